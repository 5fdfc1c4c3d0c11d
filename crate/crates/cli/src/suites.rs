//! The verification suites behind `jetfield run`.

use anyhow::Result;
use jetfield_core::algebra::{
    ad_invariance_residual, bracket_antisymmetry_residual, jacobi_residual, total_antisymmetry_residual,
    LieAlgebraData,
};
use jetfield_core::connection::{a_from_f_coordinates, curvature, f_from_a_coordinates, Curvature, GaugeField};
use jetfield_core::dynamics::{
    euler_lagrange_residual, hamiltonian_action, hamiltonian_density, hdd_residuals,
    inverse_legendre, lagrangian_action, lagrangian_action_gradient, lagrangian_density, legendre,
    pair_curvature_momentum, BaseMetric, Momentum, PhaseSection, PlaneWave,
};
use jetfield_core::gauge::{gauge_F, gauge_Pi, gauge_a, gauge_spin, gauge_triad, make_gauge_map, GaugeMapData};
use jetfield_core::lattice::{pair_count, reduce, Grid, LatticeField, Norm, Scheme, TrigPolynomial};
use jetfield_core::multimomentum::{
    closure_residuals, connection_from_section, hamiltonian_connection_residuals, hamiltonian_split_family,
    ConnectionValues, PhaseConnectionFamily, PhasePoint,
};
use jetfield_core::triad::{
    ec_image_of_hdd, ec_residuals, einstein_terms, free_field_residuals, from_spin_connection, from_triad,
    induced_metric, metricity_residual, prop55_residual, prop55_residual_at, spin_curvature,
    spin_curvature_from_curvature, spin_from_triad_jet, to_spin_connection, to_triad, torsion_residual,
    SpinConnectionData, TriadData, TriadJetSample,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{derive_seed, ConfigError, FieldKind, ScenarioConfig, Stream, Suite, Tol};
use crate::report::{convergence_slope, Check, GridRow, SuiteReport};

/// Centered-difference step for the action-gradient check.
pub const GRADIENT_STEP: f64 = 1e-5;

/// Everything a suite needs, resolved once from the configuration.
pub struct Context {
    pub cfg: ScenarioConfig,
    pub algebra: LieAlgebraData,
    pub grid: Grid,
    pub metric: BaseMetric,
    pub scheme: Scheme,
    pub tol: Tol,
}

impl Context {
    pub fn new(cfg: &ScenarioConfig) -> Result<Context, ConfigError> {
        cfg.validate()?;
        let algebra = cfg.algebra().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let grid = cfg.grid()?;
        let metric = cfg.metric(&grid).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Context {
            cfg: cfg.clone(),
            algebra,
            grid,
            metric,
            scheme: cfg.scheme.scheme(),
            tol: cfg.tolerances.resolve(cfg.scheme),
        })
    }

    fn r(&self) -> usize {
        self.algebra.dim()
    }

    fn m(&self) -> usize {
        self.grid.dim()
    }

    fn is_3d(&self) -> bool {
        self.r() == 3 && self.m() == 3
    }

    fn rng(&self, suite: Suite) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, Stream::Samples) ^ suite as u64)
    }

    /// Seed of the `k`-th auxiliary random field of a suite.
    fn aux_seed(&self, suite: Suite, k: usize) -> u64 {
        derive_seed(self.cfg.seed ^ ((suite as u64) << 32) ^ k as u64, Stream::Samples)
    }

    fn random<T>(&self, suite: Suite, k: usize, f: impl Fn(&Grid, usize, u64, u32, f64) -> jetfield_core::Result<T>) -> Result<T> {
        Ok(f(&self.grid, self.r(), self.aux_seed(suite, k), self.cfg.field.kmax, self.cfg.field.amplitude)?)
    }

    fn generator(&self, m: usize) -> TrigPolynomial {
        let g = &self.cfg.gauge;
        TrigPolynomial::random(m, self.r(), self.cfg.gauge_seed(), g.kmax, g.amplitude)
    }

    fn gauge_map(&self) -> Result<GaugeMapData> {
        Ok(make_gauge_map(&self.generator(self.m()), &self.grid, &self.algebra)?)
    }

    /// Potentials for the field-based suites, each with the grid and metric it lives on.
    fn potentials(&self) -> Result<Vec<(GaugeField, BaseMetric)>> {
        let f = &self.cfg.field;
        match f.kind {
            FieldKind::Random => (0..self.cfg.samples.sections)
                .map(|k| {
                    let a = GaugeField::random(&self.grid, self.r(), self.cfg.field_seed() + k as u64, f.kmax, f.amplitude)?;
                    Ok((a, self.metric.clone()))
                })
                .collect(),
            FieldKind::PlaneWave => {
                let wave = PlaneWave::embedded(self.cfg.grid.n, self.algebra.clone())?;
                Ok(vec![(wave.a, wave.metric)])
            }
            FieldKind::PureGauge => {
                let map = self.gauge_map()?;
                Ok(vec![(gauge_a(&GaugeField::zeros(&self.grid, self.r()), &map)?, self.metric.clone())])
            }
        }
    }
}

fn maxabs(f: &LatticeField) -> f64 {
    reduce(f, Norm::MaxAbs)
}

fn diff(a: &LatticeField, b: &LatticeField) -> Result<f64> {
    Ok(maxabs(&a.sub(b)?))
}

/// Pointwise `Σ F^μ_{pq} Π^{pq}_μ`.
fn pairing_density(f: &Curvature, pi: &Momentum) -> LatticeField {
    let r = f.r();
    let np = pair_count(f.grid().dim());
    LatticeField::from_node_fn(f.grid(), jetfield_core::lattice::Shape::scalar(), |node, out| {
        let (fv, pv) = (f.at(node), pi.at(node));
        let mut acc = 0.0;
        for mu in 0..r {
            for q in 0..np {
                acc += fv[mu * np + q] * pv[q * r + mu];
            }
        }
        out[0] = acc;
    })
}

/// Largest value of `f` over `0..count`.
fn worst<F: FnMut(usize) -> Result<f64>>(count: usize, mut f: F) -> Result<f64> {
    let mut w = 0.0_f64;
    for k in 0..count {
        let v = f(k)?;
        w = if v.is_nan() { f64::NAN } else { w.max(v) };
    }
    Ok(w)
}

fn add_slope(rep: &mut SuiteReport, label: &str, ns: &[usize], errs: &[f64], target: f64, tol: f64) {
    let slope = convergence_slope(ns, errs);
    rep.slope = Some(slope);
    rep.push(Check::near(label, slope, target, tol));
}

pub fn run_suite(ctx: &Context, suite: Suite, rep: &mut SuiteReport) -> Result<()> {
    match suite {
        Suite::Identities => identities(ctx, rep),
        Suite::Roundtrip => roundtrip(ctx, rep),
        Suite::Residuals => residuals(ctx, rep),
        Suite::GaugeCheck => gauge_check(ctx, rep),
        Suite::Convergence => convergence(ctx, rep),
        Suite::TriadMap => triad_map(ctx, rep),
        Suite::Multimomentum => multimomentum(ctx, rep),
    }
}

fn identities(ctx: &Context, rep: &mut SuiteReport) -> Result<()> {
    let s = &ctx.algebra;
    let t = ctx.tol.algebra;
    rep.push(Check::at_most("bracket antisymmetry", bracket_antisymmetry_residual(s), t));
    rep.push(Check::at_most("Jacobi identity", jacobi_residual(s), t));
    rep.push(Check::at_most("Ad-invariance of K", ad_invariance_residual(s), t));
    rep.push(Check::at_most("total antisymmetry of C (lowered)", total_antisymmetry_residual(s), t));
    if s.dim() == 3 {
        let mut rng = ctx.rng(Suite::Identities);
        let n = ctx.cfg.samples.points;
        let w = worst(n, |_| {
            let sample: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
            Ok(prop55_residual_at(&sample, s))
        })?;
        rep.push(Check::at_most(format!("spin quadratic identity ({n} samples)"), w, ctx.tol.prop55));
    }
    Ok(())
}

fn roundtrip(ctx: &Context, rep: &mut SuiteReport) -> Result<()> {
    let s = &ctx.algebra;
    let g = &ctx.metric;
    let t = ctx.tol.roundtrip;
    let n = ctx.cfg.samples.sections;
    let (mut inv, mut hl, mut cons, mut acoord) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for k in 0..n {
        let f = ctx.random(Suite::Roundtrip, 2 * k, Curvature::random)?;
        let a = ctx.random(Suite::Roundtrip, 2 * k + 1, GaugeField::random)?;
        let pi = legendre(&f, g, s)?;
        inv = inv.max(diff(inverse_legendre(&pi, g, s)?.values(), f.values())?);
        let h = hamiltonian_density(&pi, g, s)?;
        let l = lagrangian_density(&f, g, s)?;
        hl = hl.max(diff(&h, &l)?);
        cons = cons.max(maxabs(&h.add(&l)?.sub(&pairing_density(&f, &pi))?));
        let back = f_from_a_coordinates(&a_from_f_coordinates(&f, &a, s)?, &a, s)?;
        acoord = acoord.max(diff(back.values(), f.values())?);
    }
    rep.push(Check::at_most("inverse_legendre(legendre(F)) - F", inv, t));
    rep.push(Check::at_most("H(legendre(F)) - L(F)", hl, t));
    rep.push(Check::at_most("H + L - F.Pi", cons, t));
    rep.push(Check::at_most("A-coordinate roundtrip", acoord, t));
    if ctx.is_3d() {
        let td = ctx.tol.dictionary;
        let (mut tri, mut spin) = (0.0_f64, 0.0_f64);
        for k in 0..n {
            let e = ctx.random(Suite::Roundtrip, 100 + 2 * k, TriadData::random)?;
            tri = tri.max(diff(to_triad(&from_triad(&e, s)?, s)?.values(), e.values())?);
            let w = ctx.random(Suite::Roundtrip, 101 + 2 * k, SpinConnectionData::random)?;
            spin = spin.max(diff(to_spin_connection(&from_spin_connection(&w, s)?, s)?.values(), w.values())?);
        }
        rep.push(Check::at_most("triad dictionary roundtrip", tri, td));
        rep.push(Check::at_most("spin dictionary roundtrip", spin, td));
    }
    Ok(())
}

fn residuals(ctx: &Context, rep: &mut SuiteReport) -> Result<()> {
    let s = &ctx.algebra;
    let scheme = ctx.scheme;
    let (mut r1max, mut eqmax, mut scale) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (a, g) in ctx.potentials()? {
        let pi = legendre(&curvature(&a, s, scheme)?, &g, s)?;
        let (r1, r2) = hdd_residuals(&PhaseSection::new(a.clone(), pi)?, &g, s, scheme)?;
        let el = euler_lagrange_residual(&a, &g, s, scheme)?;
        r1max = r1max.max(maxabs(r1.values()));
        eqmax = eqmax.max(diff(&r2, &el)?);
        scale = scale.max(maxabs(&r2));
    }
    let t = ctx.tol.residuals;
    rep.push(Check::at_most("R1 with Pi = legendre(curvature(a))", r1max, t));
    rep.push(Check::at_most("R2 - Euler-Lagrange residual", eqmax, t));
    rep.push(Check::info("max |R2|", scale));

    let grid = &ctx.grid;
    let g = &ctx.metric;
    let base = ctx.random(Suite::Residuals, 0, GaugeField::random)?;
    let pi0 = ctx.random(Suite::Residuals, 1, Momentum::random)?;
    let f0 = ctx.random(Suite::Residuals, 2, Curvature::random)?;
    let sec = PhaseSection::new(base.clone(), pi0.clone())?;
    let (r1, r2) = hdd_residuals(&sec, g, s, scheme)?;
    let (ga, gf) = lagrangian_action_gradient(&base, &f0, g, s, scheme)?;
    let eps = GRADIENT_STEP;
    let (mut herr, mut lerr) = (0.0_f64, 0.0_f64);
    for d in 0..ctx.cfg.samples.directions {
        let da = ctx.random(Suite::Residuals, 10 + 3 * d, GaugeField::random)?;
        let dp = ctx.random(Suite::Residuals, 11 + 3 * d, Momentum::random)?;
        let df = ctx.random(Suite::Residuals, 12 + 3 * d, Curvature::random)?;
        let shifted = |t: f64| -> Result<f64> {
            let sec = PhaseSection::new(base.axpy(t, &da)?, pi0.axpy(t, &dp)?)?;
            Ok(hamiltonian_action(&sec, g, s, scheme)?)
        };
        let fd = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
        let exact = (pair_curvature_momentum(&r1, &dp)? + r2.dot(da.values())?) * grid.cell_volume();
        herr = herr.max((fd - exact).abs() / exact.abs());
        let lag = |t: f64| -> Result<f64> { Ok(lagrangian_action(&base.axpy(t, &da)?, &f0.axpy(t, &df)?, g, s, scheme)?) };
        let fd = (lag(eps)? - lag(-eps)?) / (2.0 * eps);
        let exact = (pair_curvature_momentum(&df, &gf)? + ga.dot(da.values())?) * grid.cell_volume();
        lerr = lerr.max((fd - exact).abs() / exact.abs());
    }
    rep.push(Check::at_most("Hamiltonian action gradient (relative)", herr, ctx.tol.gradient));
    rep.push(Check::at_most("Lagrangian action gradient (relative)", lerr, ctx.tol.gradient));
    Ok(())
}

fn gauge_check(ctx: &Context, rep: &mut SuiteReport) -> Result<()> {
    let s = &ctx.algebra;
    let g = &ctx.metric;
    let t = ctx.tol.invariance;
    let map = ctx.gauge_map()?;
    let (inv, kres) = map.consistency_residuals(s);
    rep.push(Check::at_most("Ad Ad^-1 - I", inv, t));
    rep.push(Check::at_most("Ad^T K Ad - K", kres, t));

    let n = ctx.cfg.samples.sections;
    let (mut pairing, mut h, mut l, mut leg, mut inverse) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for k in 0..n {
        let f = ctx.random(Suite::GaugeCheck, 3 * k, Curvature::random)?;
        let pi = ctx.random(Suite::GaugeCheck, 3 * k + 1, Momentum::random)?;
        let a = ctx.random(Suite::GaugeCheck, 3 * k + 2, GaugeField::random)?;
        let (fb, pib) = (gauge_F(&f, &map)?, gauge_Pi(&pi, &map)?);
        pairing = pairing.max(diff(&pairing_density(&fb, &pib), &pairing_density(&f, &pi))?);
        h = h.max(diff(&hamiltonian_density(&pib, g, s)?, &hamiltonian_density(&pi, g, s)?)?);
        l = l.max(diff(&lagrangian_density(&fb, g, s)?, &lagrangian_density(&f, g, s)?)?);
        leg = leg.max(diff(gauge_Pi(&legendre(&f, g, s)?, &map)?.values(), legendre(&fb, g, s)?.values())?);
        let back = gauge_a(&gauge_a(&a, &map)?, &map.inverse())?;
        inverse = inverse.max(diff(back.values(), a.values())?);
    }
    rep.push(Check::at_most("pairing F.Pi invariance", pairing, t));
    rep.push(Check::at_most("H invariance", h, t));
    rep.push(Check::at_most("L invariance", l, t));
    rep.push(Check::at_most("Legendre equivariance", leg, t));
    rep.push(Check::at_most("gauge by map then inverse", inverse, t));

    if ctx.is_3d() {
        let e = ctx.random(Suite::GaugeCheck, 1000, TriadData::random)?;
        let e = TriadData::from_node_fn(&ctx.grid, 3, |node, out| {
            out.copy_from_slice(e.at(node));
            for k in 0..3 {
                out[k * 4] += 2.0;
            }
        });
        let before = induced_metric(&e, s)?;
        let after = induced_metric(&gauge_triad(&e, &map)?, s)?;
        rep.push(Check::at_most("induced metric invariance", diff(before.g_field(), after.g_field())?, t));
        let a = ctx.random(Suite::GaugeCheck, 1001, GaugeField::random)?;
        let via_a = to_spin_connection(&gauge_a(&a, &map)?, s)?;
        let via_w = gauge_spin(&to_spin_connection(&a, s)?, &map, s)?;
        rep.push(Check::at_most("spin law vs dictionary", diff(via_a.values(), via_w.values())?, t));
    }

    let ns = ctx.cfg.convergence.grids.clone();
    let m = ctx.m();
    let generator = ctx.generator(m);
    let mut errs = Vec::new();
    for &n in &ns {
        let grid = Grid::cubic(m, n)?;
        let map = make_gauge_map(&generator, &grid, s)?;
        let f = &ctx.cfg.field;
        let a = GaugeField::random(&grid, s.dim(), ctx.cfg.field_seed(), f.kmax, f.amplitude)?;
        let lhs = curvature(&gauge_a(&a, &map)?, s, ctx.scheme)?;
        let rhs = gauge_F(&curvature(&a, s, ctx.scheme)?, &map)?;
        let d = lhs.sub(&rhs)?;
        let (max_abs, l2) = (maxabs(d.values()), reduce(d.values(), Norm::L2));
        rep.rows.push(GridRow { n, max_abs, l2 });
        errs.push(max_abs);
    }
    let largest = errs.iter().fold(0.0_f64, |w, e| w.max(*e));
    if largest <= ctx.tol.invariance {
        rep.push(Check::at_most("curvature covariance (exact on every grid)", largest, ctx.tol.invariance));
        return Ok(());
    }
    let order = ctx.scheme.order() as f64;
    add_slope(rep, "curvature covariance slope", &ns, &errs, order, ctx.tol.slope);
    Ok(())
}

fn convergence(ctx: &Context, rep: &mut SuiteReport) -> Result<()> {
    let s = &ctx.algebra;
    let scheme = ctx.scheme;
    let ns = ctx.cfg.convergence.grids.clone();
    let mut errs = Vec::new();
    let mut agree = 0.0_f64;
    for &n in &ns {
        let wave = PlaneWave::embedded(n, s.clone())?;
        let sec = wave.section(scheme)?;
        let (_, r2) = hdd_residuals(&sec, &wave.metric, s, scheme)?;
        let el = euler_lagrange_residual(&wave.a, &wave.metric, s, scheme)?;
        agree = agree.max(diff(&r2, &el)?);
        let (max_abs, l2) = (maxabs(&r2), reduce(&r2, Norm::L2));
        rep.rows.push(GridRow { n, max_abs, l2 });
        errs.push(max_abs);
    }
    rep.push(Check::at_most("R2 - Euler-Lagrange residual", agree, ctx.tol.residuals));
    let order = scheme.order() as f64;
    add_slope(rep, "plane-wave residual slope", &ns, &errs, order, ctx.tol.slope);
    Ok(())
}

fn random_jet_points(ctx: &Context, suite: Suite) -> Vec<TriadJetSample> {
    let mut rng = ctx.rng(suite);
    (0..ctx.cfg.samples.points).map(|_| TriadJetSample::random(&mut rng)).collect()
}

fn triad_map(ctx: &Context, rep: &mut SuiteReport) -> Result<()> {
    let s = &ctx.algebra;
    let scheme = ctx.scheme;
    let t = ctx.tol.ec_map;
    let (mut rho_e, mut rho_w, mut rmap, mut p55, mut torsion_rel, mut einstein_rel) =
        (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for (k, (a, g)) in ctx.potentials()?.into_iter().enumerate() {
        let pi = Momentum::random(a.grid(), 3, ctx.aux_seed(Suite::TriadMap, k), ctx.cfg.field.kmax, ctx.cfg.field.amplitude)?;
        let (r1, r2) = hdd_residuals(&PhaseSection::new(a.clone(), pi.clone())?, &g, s, scheme)?;
        let (me, mw) = ec_image_of_hdd(&r1, &r2, s)?;
        let e = to_triad(&pi, s)?;
        let w = to_spin_connection(&a, s)?;
        let (re, rw) = ec_residuals(&e, &w, &g, s, scheme)?;
        rho_e = rho_e.max(diff(&re, &me)?);
        rho_w = rho_w.max(diff(&rw, &mw)?);
        let image = spin_curvature_from_curvature(&curvature(&a, s, scheme)?, s)?;
        rmap = rmap.max(diff(&spin_curvature(&w, s, scheme)?, &image)?);
        p55 = p55.max(prop55_residual(&w, s)?);
        let (torsion, einstein) = free_field_residuals(&e, &w, &g, s, scheme)?;
        torsion_rel = torsion_rel.max(diff(&torsion, &rw.scale(s.sqrt_k()))?);
        let (cosmo, curv) = einstein_terms(&e, &w, &g, s, scheme)?;
        einstein_rel = einstein_rel.max(diff(&einstein, &cosmo.sub(&curv)?)?);
        einstein_rel = einstein_rel.max(diff(&re, &cosmo.scale(2.0).sub(&curv.scale(0.5))?)?);
    }
    rep.push(Check::at_most("rho_e - M(R1)", rho_e, t));
    rep.push(Check::at_most("rho_omega - M(R2)", rho_w, t));
    rep.push(Check::at_most("spin curvature vs image of F", rmap, t));
    rep.push(Check::at_most("torsion-like equation vs rho_omega", torsion_rel, t));
    rep.push(Check::at_most("Einstein-like terms vs rho_e", einstein_rel, t));
    rep.push(Check::at_most("spin quadratic identity on lattice", p55, ctx.tol.prop55));

    let jets = random_jet_points(ctx, Suite::TriadMap);
    let (mut metric, mut tors) = (0.0_f64, 0.0_f64);
    for jet in &jets {
        let w = spin_from_triad_jet(jet, s)?;
        metric = metric.max(metricity_residual(&w, s));
        tors = tors.max(torsion_residual(jet, &w));
    }
    let count = jets.len();
    rep.push(Check::at_most(format!("spin from triad metricity ({count} samples)"), metric, ctx.tol.spin));
    rep.push(Check::at_most(format!("spin from triad torsion ({count} samples)"), tors, ctx.tol.spin));
    let mut id = TriadJetSample { e: [0.0; 9], big_e: [0.0; 9] };
    for k in 0..3 {
        id.e[k * 4] = 1.0;
    }
    let w = spin_from_triad_jet(&id, s)?;
    rep.push(Check::at_most("identity triad gives zero spin", w.iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0));
    Ok(())
}

fn random_phase_points(rng: &mut ChaCha8Rng, count: usize, m: usize, r: usize) -> Vec<PhasePoint> {
    let np = pair_count(m);
    (0..count)
        .map(|_| PhasePoint {
            x: (0..m).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect(),
            a: (0..r * m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            pi: (0..np * r).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        })
        .collect()
}

fn multimomentum(ctx: &Context, rep: &mut SuiteReport) -> Result<()> {
    let s = &ctx.algebra;
    let scheme = ctx.scheme;
    let (m, r) = (ctx.m(), ctx.r());
    let (mut l1, mut l2) = (0.0_f64, 0.0_f64);
    for (k, (a, g)) in ctx.potentials()?.into_iter().enumerate() {
        let pi = Momentum::random(a.grid(), r, ctx.aux_seed(Suite::Multimomentum, k), ctx.cfg.field.kmax, ctx.cfg.field.amplitude)?;
        let sec = PhaseSection::new(a, pi)?;
        let c = connection_from_section(&sec, scheme);
        let (rho1, rho2) = hamiltonian_connection_residuals(&c, &sec, &g, s)?;
        let (r1, r2) = hdd_residuals(&sec, &g, s, scheme)?;
        l1 = l1.max(maxabs(&rho1.add(&r2)?));
        l2 = l2.max(diff(rho2.values(), r1.values())?);
    }
    rep.push(Check::at_most("holonomic lift rho1 + R2", l1, ctx.tol.lift));
    rep.push(Check::at_most("holonomic lift rho2 - R1", l2, ctx.tol.lift));

    let mut rng = ctx.rng(Suite::Multimomentum);
    let count = ctx.cfg.samples.points.min(50);
    let points = random_phase_points(&mut rng, count, m, r);
    let np = pair_count(m);
    let values = ConnectionValues {
        gamma_a: (0..m * r * m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        gamma_pi: (0..m * np * r).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let constant = closure_residuals(&PhaseConnectionFamily::constant(m, r, values), &points)?;
    let c = constant.iter().fold(0.0_f64, |w, x| {
        w.max(x.cond1).max(x.cond1_symmetric).max(x.cond2).max(x.cond3).max(x.cond3_antisymmetrized)
    });
    rep.push(Check::at_most(format!("closure, constant family ({count} points)"), c, ctx.tol.closure));

    let diag = ctx.cfg.metric_diag();
    let mut gmat = vec![0.0; m * m];
    for i in 0..m {
        gmat[i * m + i] = diag[i];
    }
    let split_points = &points[..count.min(10)];
    let split = closure_residuals(&hamiltonian_split_family(s, &gmat, m)?, split_points)?;
    let fold = |f: fn(&jetfield_core::multimomentum::ClosureResiduals) -> f64| split.iter().map(f).fold(0.0_f64, f64::max);
    let t = ctx.tol.split_family;
    rep.push(Check::at_most("split family cond1 (A = B form)", fold(|x| x.cond1_symmetric), t));
    rep.push(Check::at_most("split family cond2", fold(|x| x.cond2), t));
    rep.push(Check::at_most("split family cond3 (antisymmetrized)", fold(|x| x.cond3_antisymmetrized), t));
    rep.push(Check::info("split family cond1 as printed", fold(|x| x.cond1)));
    rep.push(Check::info("split family cond3 as printed", fold(|x| x.cond3)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_density_sums_to_the_pairing() {
        let grid = Grid::cubic(3, 8).unwrap();
        let f = Curvature::random(&grid, 3, 1, 1, 0.7).unwrap();
        let pi = Momentum::random(&grid, 3, 2, 1, 0.7).unwrap();
        let total: f64 = pairing_density(&f, &pi).data().iter().sum();
        assert!((total - pair_curvature_momentum(&f, &pi).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn non_triad_suites_run_on_a_plane_abelian_scenario() {
        let cfg = ScenarioConfig::parse(
            "suites = [\"identities\", \"roundtrip\", \"residuals\", \"gauge-check\", \"multimomentum\"]\n\
             [grid]\nm = 2\nn = 8\n[algebra]\nkind = \"abelian\"\nk = [1.0, -1.0]\n[samples]\nsections = 2\n",
            "test",
        )
        .unwrap();
        let ctx = Context::new(&cfg).unwrap();
        for &suite in &cfg.suites {
            let mut rep = SuiteReport::new(suite.name());
            run_suite(&ctx, suite, &mut rep).unwrap();
            assert!(rep.pass, "{suite}: {:?}", rep.checks);
        }
    }

    #[test]
    fn pure_gauge_potential_has_vanishing_residuals() {
        let mut cfg = ScenarioConfig::with_suites(vec![Suite::Residuals]);
        cfg.field.kind = FieldKind::PureGauge;
        let ctx = Context::new(&cfg).unwrap();
        let (a, g) = ctx.potentials().unwrap().remove(0);
        let el = euler_lagrange_residual(&a, &g, &ctx.algebra, ctx.scheme).unwrap();
        let f = curvature(&a, &ctx.algebra, ctx.scheme).unwrap();
        assert!(maxabs(f.values()) < 0.2);
        assert!(maxabs(&el) < 0.5);
    }
}
