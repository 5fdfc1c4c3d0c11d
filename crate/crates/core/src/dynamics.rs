//! Free Yang–Mills densities, the Legendre map and its inverse, the
//! Hamilton–De Donder and Euler–Lagrange residuals and the two discrete
//! action functionals.
//!
//! Derivatives with respect to an antisymmetric pair are taken with respect to
//! the packed component `i < j`. With this convention
//! `Π = ∂L/∂F`, `F = ∂H/∂Π`, and `inverse_legendre ∘ legendre` is exactly the
//! identity.

use nalgebra::DMatrix;

use crate::algebra::LieAlgebraData;
use crate::connection::{
    check_compat, check_grid, commutator_term, covariant_divergence, curvature, Curvature, GaugeField,
};
use crate::error::{Error, Result};
use crate::lattice::{
    gradient, integrate, pair_count, pairs, signed_pair, Grid, LatticeField, Scheme, Shape, Slot,
};

/// Lower bound on `|det g|` at every node.
pub const METRIC_DET_MIN: f64 = 1e-8;
/// Tolerance on `g·g⁻¹ = 1` and on the symmetry of `g`.
pub const METRIC_TOL: f64 = 1e-12;

lattice_wrapper!(
    /// Momentum `Π^{ij}_μ`, packed `i < j`, component `pair * r + mu`.
    Momentum,
    |r, m| Shape::new(vec![Slot::Pair(m), Slot::Index(r)])
);

impl Momentum {
    /// Signed lookup `Π^{ij}_μ` for any ordered pair.
    pub fn get(&self, node: usize, i: usize, j: usize, mu: usize) -> f64 {
        self.values().get(node, &[i, j, mu])
    }
}

/// Node-wise symmetric nondegenerate base metric with uniform signature.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMetric {
    g: LatticeField,
    ginv: LatticeField,
    sqrtg: Vec<f64>,
    sigma: f64,
}

impl BaseMetric {
    /// Constant diagonal metric.
    pub fn flat(grid: &Grid, diag: &[f64]) -> Result<BaseMetric> {
        let m = grid.dim();
        if diag.len() != m {
            return Err(Error::ShapeMismatch(format!("metric diagonal needs {m} entries")));
        }
        BaseMetric::from_coord_fn(grid, |_, out| {
            for i in 0..m {
                out[i * m + i] = diag[i];
            }
        })
    }

    /// Metric from a function of the node coordinates filling `g_ij` row-major.
    pub fn from_coord_fn<F>(grid: &Grid, f: F) -> Result<BaseMetric>
    where
        F: Fn(&[f64], &mut [f64]) + Sync + Send,
    {
        let m = grid.dim();
        BaseMetric::from_field(LatticeField::from_coord_fn(
            grid,
            Shape::new(vec![Slot::Index(m), Slot::Index(m)]),
            f,
        ))
    }

    /// Constant diagonal `base` plus a seeded smooth symmetric perturbation.
    pub fn random(grid: &Grid, base: &[f64], seed: u64, amplitude: f64) -> Result<BaseMetric> {
        let m = grid.dim();
        if base.len() != m {
            return Err(Error::ShapeMismatch(format!("metric diagonal needs {m} entries")));
        }
        let pert = crate::lattice::random_smooth(
            grid,
            Shape::new(vec![Slot::Index(m), Slot::Index(m)]),
            seed,
            1,
            amplitude,
        )?;
        BaseMetric::from_field(LatticeField::from_node_fn(
            grid,
            Shape::new(vec![Slot::Index(m), Slot::Index(m)]),
            |node, out| {
                let p = pert.at(node);
                for i in 0..m {
                    for j in 0..m {
                        out[i * m + j] = 0.5 * (p[i * m + j] + p[j * m + i]);
                    }
                    out[i * m + i] += base[i];
                }
            },
        ))
    }

    pub fn from_field(g: LatticeField) -> Result<BaseMetric> {
        let grid = g.grid().clone();
        let m = grid.dim();
        if g.shape() != &Shape::new(vec![Slot::Index(m), Slot::Index(m)]) {
            return Err(Error::ShapeMismatch("metric must have m×m components per node".into()));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite("metric".into()));
        }
        let n = grid.node_count();
        let mut ginv = LatticeField::zeros(&grid, g.shape().clone());
        let mut sqrtg = vec![0.0; n];
        let mut sigma = 0.0;
        for node in 0..n {
            let gv = g.at(node);
            let scale = gv.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
            let mut asym = 0.0_f64;
            for i in 0..m {
                for j in 0..i {
                    asym = asym.max((gv[i * m + j] - gv[j * m + i]).abs());
                }
            }
            if asym > METRIC_TOL * scale {
                return Err(Error::AsymmetricMetric { asymmetry: asym });
            }
            let mat = DMatrix::from_row_slice(m, m, gv);
            let det = mat.determinant();
            if det.abs() < METRIC_DET_MIN {
                return Err(Error::DegenerateMetric {
                    det,
                    threshold: METRIC_DET_MIN,
                });
            }
            let inv = mat
                .clone()
                .try_inverse()
                .ok_or(Error::DegenerateMetric { det, threshold: METRIC_DET_MIN })?;
            let resid = (&mat * &inv - DMatrix::identity(m, m)).amax();
            if resid > METRIC_TOL {
                return Err(Error::DegenerateMetric { det, threshold: METRIC_DET_MIN });
            }
            let sign = det.signum();
            if node == 0 {
                sigma = sign;
            } else if sign != sigma {
                return Err(Error::NonUniformSignature { node });
            }
            let out = ginv.at_mut(node);
            for i in 0..m {
                for j in 0..m {
                    // symmetrize to remove roundoff asymmetry of the inverse
                    out[i * m + j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                }
            }
            sqrtg[node] = det.abs().sqrt();
        }
        Ok(BaseMetric { g, ginv, sqrtg, sigma })
    }

    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    /// `g_ij` at one node, row-major.
    pub fn g_at(&self, node: usize) -> &[f64] {
        self.g.at(node)
    }

    /// `g^{ij}` at one node, row-major.
    pub fn ginv_at(&self, node: usize) -> &[f64] {
        self.ginv.at(node)
    }

    /// `√|det g|` at one node.
    pub fn sqrtg_at(&self, node: usize) -> f64 {
        self.sqrtg[node]
    }

    /// Sign of `det g`, uniform over the lattice.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn g_field(&self) -> &LatticeField {
        &self.g
    }

    pub fn ginv_field(&self) -> &LatticeField {
        &self.ginv
    }
}

/// Section `(a, Π)` of the phase space over the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSection {
    pub a: GaugeField,
    pub pi: Momentum,
}

impl PhaseSection {
    pub fn new(a: GaugeField, pi: Momentum) -> Result<PhaseSection> {
        check_grid(a.grid(), pi.grid())?;
        if a.r() != pi.r() {
            return Err(Error::ShapeMismatch("potential and momentum differ in r".into()));
        }
        Ok(PhaseSection { a, pi })
    }

    pub fn grid(&self) -> &Grid {
        self.a.grid()
    }
}

fn check_metric(g: &BaseMetric, grid: &Grid) -> Result<()> {
    check_grid(g.grid(), grid)
}

/// Pointwise Legendre map, `Π^{ij}_μ = −√g Σ F^ν_{pq} g^{ip} g^{jq} K_{μν}`.
pub fn legendre_at(f: &[f64], ginv: &[f64], sqrtg: f64, s: &LieAlgebraData, m: usize, out: &mut [f64]) {
    let r = s.dim();
    let np = pair_count(m);
    let prs = pairs(m);
    let mut fup = vec![0.0; r];
    for (a, &(i, j)) in prs.iter().enumerate() {
        for nu in 0..r {
            let mut acc = 0.0;
            for (b, &(p, q)) in prs.iter().enumerate() {
                let w = ginv[i * m + p] * ginv[j * m + q] - ginv[i * m + q] * ginv[j * m + p];
                acc += f[nu * np + b] * w;
            }
            fup[nu] = acc;
        }
        for mu in 0..r {
            let mut acc = 0.0;
            for nu in 0..r {
                acc += s.k(mu, nu) * fup[nu];
            }
            out[a * r + mu] = -sqrtg * acc;
        }
    }
}

/// Pointwise inverse Legendre map, `F^μ_{ij} = −(1/√g) Σ Π^{st}_λ g_{si} g_{tj} K^{λμ}`.
pub fn inverse_legendre_at(pi: &[f64], g: &[f64], sqrtg: f64, s: &LieAlgebraData, m: usize, out: &mut [f64]) {
    let r = s.dim();
    let np = pair_count(m);
    let prs = pairs(m);
    let mut plow = vec![0.0; r];
    for (a, &(i, j)) in prs.iter().enumerate() {
        for lambda in 0..r {
            let mut acc = 0.0;
            for (b, &(p, q)) in prs.iter().enumerate() {
                let w = g[p * m + i] * g[q * m + j] - g[q * m + i] * g[p * m + j];
                acc += pi[b * r + lambda] * w;
            }
            plow[lambda] = acc;
        }
        for mu in 0..r {
            let mut acc = 0.0;
            for lambda in 0..r {
                acc += s.k_inv(lambda, mu) * plow[lambda];
            }
            out[mu * np + a] = -acc / sqrtg;
        }
    }
}

/// Pointwise `L = −¼ F^μ_{ip} F^ν_{jq} g^{ij} g^{pq} K_{μν} √g`, full index sum.
pub fn lagrangian_at(f: &[f64], ginv: &[f64], sqrtg: f64, s: &LieAlgebraData, m: usize) -> f64 {
    let r = s.dim();
    let np = pair_count(m);
    let full = |mu: usize, i: usize, p: usize| match signed_pair(i, p, m) {
        Some((k, sg)) => sg * f[mu * np + k],
        None => 0.0,
    };
    let mut acc = 0.0;
    for mu in 0..r {
        for nu in 0..r {
            let kmn = s.k(mu, nu);
            if kmn == 0.0 {
                continue;
            }
            for i in 0..m {
                for p in 0..m {
                    let a = full(mu, i, p);
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        for q in 0..m {
                            acc += a * full(nu, j, q) * ginv[i * m + j] * ginv[p * m + q] * kmn;
                        }
                    }
                }
            }
        }
    }
    -0.25 * acc * sqrtg
}

/// Pointwise `H = −¼ (1/√g) Π^{pq}_σ Π^{st}_λ g_{sp} g_{tq} K^{σλ}`, full index sum.
pub fn hamiltonian_at(pi: &[f64], g: &[f64], sqrtg: f64, s: &LieAlgebraData, m: usize) -> f64 {
    let r = s.dim();
    let full = |p: usize, q: usize, sg_: usize| match signed_pair(p, q, m) {
        Some((k, sg)) => sg * pi[k * r + sg_],
        None => 0.0,
    };
    let mut acc = 0.0;
    for sigma in 0..r {
        for lambda in 0..r {
            let kinv = s.k_inv(sigma, lambda);
            if kinv == 0.0 {
                continue;
            }
            for p in 0..m {
                for q in 0..m {
                    let a = full(p, q, sigma);
                    if a == 0.0 {
                        continue;
                    }
                    for st in 0..m {
                        for t in 0..m {
                            acc += a * full(st, t, lambda) * g[st * m + p] * g[t * m + q] * kinv;
                        }
                    }
                }
            }
        }
    }
    -0.25 * acc / sqrtg
}

pub fn lagrangian_density(f: &Curvature, g: &BaseMetric, s: &LieAlgebraData) -> Result<LatticeField> {
    check_metric(g, f.grid())?;
    check_compat(f.r(), s, "lagrangian_density")?;
    let m = f.grid().dim();
    Ok(LatticeField::from_node_fn(f.grid(), Shape::scalar(), |node, out| {
        out[0] = lagrangian_at(f.at(node), g.ginv_at(node), g.sqrtg_at(node), s, m);
    }))
}

pub fn legendre(f: &Curvature, g: &BaseMetric, s: &LieAlgebraData) -> Result<Momentum> {
    check_metric(g, f.grid())?;
    check_compat(f.r(), s, "legendre")?;
    let m = f.grid().dim();
    Ok(Momentum::from_node_fn(f.grid(), s.dim(), |node, out| {
        legendre_at(f.at(node), g.ginv_at(node), g.sqrtg_at(node), s, m, out);
    }))
}

pub fn hamiltonian_density(pi: &Momentum, g: &BaseMetric, s: &LieAlgebraData) -> Result<LatticeField> {
    check_metric(g, pi.grid())?;
    check_compat(pi.r(), s, "hamiltonian_density")?;
    let m = pi.grid().dim();
    Ok(LatticeField::from_node_fn(pi.grid(), Shape::scalar(), |node, out| {
        out[0] = hamiltonian_at(pi.at(node), g.g_at(node), g.sqrtg_at(node), s, m);
    }))
}

/// `∂H/∂Π` in the packed convention; equal to the inverse Legendre map.
pub fn inverse_legendre(pi: &Momentum, g: &BaseMetric, s: &LieAlgebraData) -> Result<Curvature> {
    check_metric(g, pi.grid())?;
    check_compat(pi.r(), s, "inverse_legendre")?;
    let m = pi.grid().dim();
    Ok(Curvature::from_node_fn(pi.grid(), s.dim(), |node, out| {
        inverse_legendre_at(pi.at(node), g.g_at(node), g.sqrtg_at(node), s, m, out);
    }))
}

/// `∂H/∂a^μ_i`. The free Hamiltonian has no explicit potential dependence,
/// so this is the zero field with the potential layout.
pub fn dh_da(pi: &Momentum, a: &GaugeField, g: &BaseMetric, s: &LieAlgebraData) -> Result<LatticeField> {
    check_grid(pi.grid(), a.grid())?;
    check_metric(g, a.grid())?;
    check_compat(a.r(), s, "dh_da")?;
    Ok(LatticeField::zeros(a.grid(), GaugeField::layout(s.dim(), a.grid().dim())))
}

/// Hamilton–De Donder residuals:
/// `R1 = curvature(a) − ∂H/∂Π`, `R2 = −∂H/∂a − D_jΠ^{ji}`.
pub fn hdd_residuals(
    sec: &PhaseSection,
    g: &BaseMetric,
    s: &LieAlgebraData,
    scheme: Scheme,
) -> Result<(Curvature, LatticeField)> {
    let r1 = curvature(&sec.a, s, scheme)?.sub(&inverse_legendre(&sec.pi, g, s)?)?;
    let div = covariant_divergence(&sec.pi, &sec.a, s, scheme)?;
    let dh = dh_da(&sec.pi, &sec.a, g, s)?;
    let r2 = dh.scale(-1.0).sub(&div)?;
    Ok((r1, r2))
}

/// `∂L/∂a^μ_i − D_j ∂L/∂F^μ_{ji}` with the free-field `∂L/∂a = 0`.
pub fn euler_lagrange_residual(
    a: &GaugeField,
    g: &BaseMetric,
    s: &LieAlgebraData,
    scheme: Scheme,
) -> Result<LatticeField> {
    let pi = legendre(&curvature(a, s, scheme)?, g, s)?;
    Ok(covariant_divergence(&pi, a, s, scheme)?.scale(-1.0))
}

/// `∫ (−H − Π^{ij}_μ (∂_j a^μ_i + ½ a^ν_i a^ρ_j C^μ_{ρν}))` with node-sum quadrature.
pub fn hamiltonian_action(sec: &PhaseSection, g: &BaseMetric, s: &LieAlgebraData, scheme: Scheme) -> Result<f64> {
    check_metric(g, sec.grid())?;
    check_compat(sec.a.r(), s, "hamiltonian_action")?;
    let m = sec.grid().dim();
    let r = s.dim();
    let np = pair_count(m);
    let da = gradient(sec.a.values(), scheme);
    let density = LatticeField::from_node_fn(sec.grid(), Shape::scalar(), |node, out| {
        let pi = sec.pi.at(node);
        let av = sec.a.at(node);
        let mut t = vec![0.0; r * np];
        commutator_term(av, m, s, &mut t);
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let Some((k, sg)) = signed_pair(i, j, m) else {
                    continue;
                };
                for mu in 0..r {
                    let p = sg * pi[k * r + mu];
                    let tij = sg * t[mu * np + k];
                    acc += p * (da[j].at(node)[mu * m + i] + 0.5 * tij);
                }
            }
        }
        out[0] = -hamiltonian_at(pi, g.g_at(node), g.sqrtg_at(node), s, m) - acc;
    });
    Ok(integrate(&density))
}

/// `∫ (L − ½(F^μ_{kr} + a^ν_k a^ρ_r C^μ_{ρν}) ∂L/∂F^μ_{kr} + ∂L/∂F^μ_{rk} ∂_r a^μ_k)`.
pub fn lagrangian_action(
    a: &GaugeField,
    f: &Curvature,
    g: &BaseMetric,
    s: &LieAlgebraData,
    scheme: Scheme,
) -> Result<f64> {
    check_grid(a.grid(), f.grid())?;
    check_metric(g, a.grid())?;
    check_compat(a.r(), s, "lagrangian_action")?;
    let m = a.grid().dim();
    let r = s.dim();
    let np = pair_count(m);
    let da = gradient(a.values(), scheme);
    let density = LatticeField::from_node_fn(a.grid(), Shape::scalar(), |node, out| {
        let fv = f.at(node);
        let av = a.at(node);
        let mut p = vec![0.0; r * np];
        legendre_at(fv, g.ginv_at(node), g.sqrtg_at(node), s, m, &mut p);
        let mut t = vec![0.0; r * np];
        commutator_term(av, m, s, &mut t);
        let mut acc = lagrangian_at(fv, g.ginv_at(node), g.sqrtg_at(node), s, m);
        for k in 0..m {
            for rr in 0..m {
                let Some((q, sg)) = signed_pair(k, rr, m) else {
                    continue;
                };
                for mu in 0..r {
                    let p_kr = sg * p[q * r + mu];
                    acc -= 0.5 * (sg * fv[mu * np + q] + sg * t[mu * np + q]) * p_kr;
                    // ∂L/∂F^μ_{rk} ∂_r a^μ_k, with Π^{rk} = −Π^{kr}
                    acc += -p_kr * da[rr].at(node)[mu * m + k];
                }
            }
        }
        out[0] = acc;
    });
    Ok(integrate(&density))
}

/// Exact gradient of [`lagrangian_action`] divided by the cell volume:
/// `(∂/∂a, ∂/∂F)` = `(−D_j legendre(F)^{ji}, legendre(curvature(a) − F))`.
pub fn lagrangian_action_gradient(
    a: &GaugeField,
    f: &Curvature,
    g: &BaseMetric,
    s: &LieAlgebraData,
    scheme: Scheme,
) -> Result<(LatticeField, Momentum)> {
    let p = legendre(f, g, s)?;
    let ga = covariant_divergence(&p, a, s, scheme)?.scale(-1.0);
    let gf = legendre(&curvature(a, s, scheme)?.sub(f)?, g, s)?;
    Ok((ga, gf))
}

/// Pairing `Σ_nodes Σ_{pairs, μ} X^μ_{pq} Y^{pq}_μ` of a curvature-shaped field with a momentum-shaped one.
pub fn pair_curvature_momentum(x: &Curvature, y: &Momentum) -> Result<f64> {
    check_grid(x.grid(), y.grid())?;
    let r = x.r();
    let np = pair_count(x.grid().dim());
    let per_node: Vec<f64> = (0..x.grid().node_count())
        .map(|node| {
            let (xv, yv) = (x.at(node), y.at(node));
            let mut acc = 0.0;
            for mu in 0..r {
                for p in 0..np {
                    acc += xv[mu * np + p] * yv[p * r + mu];
                }
            }
            acc
        })
        .collect();
    Ok(crate::lattice::ordered_sum(per_node))
}

/// Flat-space Maxwell plane wave `a^0_1 = sin(x^0 − x^2)` in the metric
/// `diag(1, 1, −1)`, on the grid `N × N × 2N` with spacing `(h, h, h/2)`,
/// `h = 2π/N`.
///
/// On an isotropic grid this profile solves the discrete equations exactly;
/// the anisotropic spacing makes the two characteristic directions resolve
/// differently so residuals decay at the nominal rate of the scheme.
#[derive(Debug, Clone)]
pub struct PlaneWave {
    pub grid: Grid,
    pub algebra: LieAlgebraData,
    pub metric: BaseMetric,
    pub a: GaugeField,
}

impl PlaneWave {
    pub fn new(n: usize) -> Result<PlaneWave> {
        PlaneWave::embedded(n, LieAlgebraData::abelian(1))
    }

    /// The same wave in algebra component 0 of `algebra`. All brackets vanish
    /// on a single-component potential, so it solves the non-abelian equations too.
    pub fn embedded(n: usize, algebra: LieAlgebraData) -> Result<PlaneWave> {
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let grid = Grid::with_spacing(vec![n, n, 2 * n], vec![h, h, h / 2.0])?;
        let metric = BaseMetric::flat(&grid, &[1.0, 1.0, -1.0])?;
        let a = GaugeField::from_coord_fn(&grid, algebra.dim(), |x, out| out[1] = (x[0] - x[2]).sin());
        Ok(PlaneWave { grid, algebra, metric, a })
    }

    /// Analytic field strength: `F_{01} = cos u`, `F_{12} = cos u`, `u = x^0 − x^2`.
    pub fn exact_curvature(&self) -> Curvature {
        Curvature::from_coord_fn(&self.grid, self.algebra.dim(), |x, out| {
            let c = (x[0] - x[2]).cos();
            out[0] = c;
            out[2] = c;
        })
    }

    /// Phase section `(a, legendre(curvature(a)))`.
    pub fn section(&self, scheme: Scheme) -> Result<PhaseSection> {
        let f = curvature(&self.a, &self.algebra, scheme)?;
        let pi = legendre(&f, &self.metric, &self.algebra)?;
        PhaseSection::new(self.a.clone(), pi)
    }
}
