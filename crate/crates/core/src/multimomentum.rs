//! Connections on the phase space and on the quotient jet bundle: the
//! holonomic lift of a section, the algebraic conditions satisfied by
//! Hamiltonian and Lagrangian connections, and the closedness conditions
//! evaluated by fiber finite differences on callable connection families.
//!
//! With the holonomic lift, the Hamiltonian-connection residuals relate to the
//! Hamilton–De Donder residuals by `(ρ1, ρ2) = (−R2, R1)`.

use rayon::prelude::*;

use crate::algebra::LieAlgebraData;
use crate::connection::{check_compat, check_grid, commutator_term, Curvature, GaugeField};
use crate::dynamics::{dh_da, inverse_legendre_at, legendre_at, BaseMetric, PhaseSection};
use crate::error::{Error, Result};
use crate::lattice::{gradient, pair_count, signed_pair, LatticeField, Scheme, Shape, Slot};

/// Connection coefficients along a phase section:
/// `Γ^μ_{kh}` at `(k * r + mu) * m + h` and `Γ^{st}_{kμ}` at `(k * P + pair) * r + mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionConnection {
    pub gamma_a: LatticeField,
    pub gamma_pi: LatticeField,
}

/// Connection coefficients along a Lagrangian section:
/// `Γ^μ_{kh}` as in [`SectionConnection`] and `Γ^μ_{kst}` at `(k * r + mu) * P + pair`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianSectionConnection {
    pub gamma_a: LatticeField,
    pub gamma_f: LatticeField,
}

fn gamma_a_shape(r: usize, m: usize) -> Shape {
    Shape::new(vec![Slot::Index(m), Slot::Index(r), Slot::Index(m)])
}

fn gamma_pi_shape(r: usize, m: usize) -> Shape {
    Shape::new(vec![Slot::Index(m), Slot::Pair(m), Slot::Index(r)])
}

fn gamma_f_shape(r: usize, m: usize) -> Shape {
    Shape::new(vec![Slot::Index(m), Slot::Index(r), Slot::Pair(m)])
}

/// Stack the derivatives `∂_k f` into one field with a leading base index.
fn stacked_gradient(f: &LatticeField, shape: Shape, scheme: Scheme) -> LatticeField {
    let d = gradient(f, scheme);
    let block = f.shape().len();
    LatticeField::from_node_fn(f.grid(), shape, |node, out| {
        for (k, dk) in d.iter().enumerate() {
            out[k * block..(k + 1) * block].copy_from_slice(dk.at(node));
        }
    })
}

/// Holonomic lift `Γ^μ_{kh} = ∂_k a^μ_h`, `Γ^{st}_{kμ} = ∂_k Π^{st}_μ`.
pub fn connection_from_section(sec: &PhaseSection, scheme: Scheme) -> SectionConnection {
    let (r, m) = (sec.a.r(), sec.grid().dim());
    SectionConnection {
        gamma_a: stacked_gradient(sec.a.values(), gamma_a_shape(r, m), scheme),
        gamma_pi: stacked_gradient(sec.pi.values(), gamma_pi_shape(r, m), scheme),
    }
}

/// Holonomic lift `Γ^μ_{kh} = ∂_k a^μ_h`, `Γ^μ_{kst} = ∂_k F^μ_{st}`.
pub fn lagrangian_connection_from_section(a: &GaugeField, f: &Curvature, scheme: Scheme) -> LagrangianSectionConnection {
    let (r, m) = (a.r(), a.grid().dim());
    LagrangianSectionConnection {
        gamma_a: stacked_gradient(a.values(), gamma_a_shape(r, m), scheme),
        gamma_f: stacked_gradient(f.values(), gamma_f_shape(r, m), scheme),
    }
}

fn check_connection_shapes(gamma_a: &LatticeField, other: &LatticeField, other_shape: Shape, r: usize) -> Result<()> {
    let m = gamma_a.grid().dim();
    if gamma_a.shape() != &gamma_a_shape(r, m) || other.shape() != &other_shape {
        return Err(Error::ShapeMismatch("connection coefficients have the wrong layout".into()));
    }
    check_grid(gamma_a.grid(), other.grid())
}

/// Algebraic Hamiltonian-connection conditions:
/// `ρ1^i_σ = Γ^{ji}_{jσ} + ∂H/∂a^σ_i − Π^{ji}_μ C^μ_{ρσ} a^ρ_j` (potential layout) and
/// `ρ2^σ_{ij} = Γ^σ_{ij} − Γ^σ_{ji} + ∂H/∂Π^{ji}_σ − a^ν_i a^ρ_j C^σ_{ρν}`.
pub fn hamiltonian_connection_residuals(
    c: &SectionConnection,
    sec: &PhaseSection,
    g: &BaseMetric,
    s: &LieAlgebraData,
) -> Result<(LatticeField, Curvature)> {
    let r = s.dim();
    check_compat(sec.a.r(), s, "hamiltonian_connection_residuals")?;
    let m = sec.grid().dim();
    check_connection_shapes(&c.gamma_a, &c.gamma_pi, gamma_pi_shape(r, m), r)?;
    check_grid(c.gamma_a.grid(), sec.grid())?;
    check_grid(g.grid(), sec.grid())?;
    let np = pair_count(m);
    let dh = dh_da(&sec.pi, &sec.a, g, s)?;
    let rho1 = LatticeField::from_node_fn(sec.grid(), GaugeField::layout(r, m), |node, out| {
        let gp = c.gamma_pi.at(node);
        let pi = sec.pi.at(node);
        let av = sec.a.at(node);
        for sigma in 0..r {
            for i in 0..m {
                let mut acc = dh.at(node)[sigma * m + i];
                for j in 0..m {
                    let Some((q, sg)) = signed_pair(j, i, m) else {
                        continue;
                    };
                    acc += sg * gp[(j * np + q) * r + sigma];
                    for mu in 0..r {
                        let pji = sg * pi[q * r + mu];
                        for rho in 0..r {
                            acc -= pji * s.c(mu, rho, sigma) * av[rho * m + j];
                        }
                    }
                }
                out[sigma * m + i] = acc;
            }
        }
    });
    let rho2 = Curvature::from_node_fn(sec.grid(), r, |node, out| {
        let ga = c.gamma_a.at(node);
        let mut dhdpi = vec![0.0; r * np];
        inverse_legendre_at(sec.pi.at(node), g.g_at(node), g.sqrtg_at(node), s, m, &mut dhdpi);
        commutator_term(sec.a.at(node), m, s, out);
        for (p, (i, j)) in crate::lattice::pairs(m).into_iter().enumerate() {
            for sigma in 0..r {
                let k = sigma * np + p;
                let gij = ga[(i * r + sigma) * m + j];
                let gji = ga[(j * r + sigma) * m + i];
                // ∂H/∂Π^{ji} = −∂H/∂Π^{ij}
                out[k] = gij - gji - dhdpi[k] - out[k];
            }
        }
    });
    Ok((rho1, rho2))
}

/// Algebraic Lagrangian-connection conditions for the free quadratic Lagrangian.
///
/// `ρ1^i_σ = ∂_j^{x} Π^{ji}_σ + Σ_{s<t} Γ^μ_{jst} ∂Π^{ji}_σ/∂F^μ_{st} − Π^{ji}_μ a^γ_j C^μ_{γσ} − ∂L/∂a^σ_i`,
/// with `Π = legendre(F)` and the explicit `x`-derivative (through the metric)
/// taken with `scheme`; `ρ2^μ_{ij} = F^μ_{ij} + Γ^μ_{ji} − Γ^μ_{ij} + a^λ_i a^γ_j C^μ_{γλ}`.
pub fn lagrangian_connection_residuals(
    c: &LagrangianSectionConnection,
    a: &GaugeField,
    f: &Curvature,
    g: &BaseMetric,
    s: &LieAlgebraData,
    scheme: Scheme,
) -> Result<(LatticeField, Curvature)> {
    let r = s.dim();
    check_compat(a.r(), s, "lagrangian_connection_residuals")?;
    check_compat(f.r(), s, "lagrangian_connection_residuals")?;
    let grid = a.grid();
    let m = grid.dim();
    check_connection_shapes(&c.gamma_a, &c.gamma_f, gamma_f_shape(r, m), r)?;
    check_grid(c.gamma_a.grid(), grid)?;
    check_grid(f.grid(), grid)?;
    check_grid(g.grid(), grid)?;
    let np = pair_count(m);
    let rho1 = LatticeField::from_node_fn(grid, GaugeField::layout(r, m), |node, out| {
        let fv = f.at(node);
        let av = a.at(node);
        let gf = c.gamma_f.at(node);
        let mut pi = vec![0.0; np * r];
        legendre_at(fv, g.ginv_at(node), g.sqrtg_at(node), s, m, &mut pi);
        let mut total = vec![0.0; m * r];
        let mut implicit = vec![0.0; np * r];
        let mut shifted = vec![0.0; np * r];
        for j in 0..m {
            // the Legendre map is linear in F; its coefficients depend on x only through g
            legendre_at(&gf[j * r * np..(j + 1) * r * np], g.ginv_at(node), g.sqrtg_at(node), s, m, &mut implicit);
            let h = grid.spacing()[j];
            let mut expl = vec![0.0; np * r];
            for &(off, w) in scheme.stencil() {
                let nb = grid.shift(node, j, off);
                legendre_at(fv, g.ginv_at(nb), g.sqrtg_at(nb), s, m, &mut shifted);
                for k in 0..np * r {
                    expl[k] += w / h * shifted[k];
                }
            }
            for i in 0..m {
                let Some((q, sg)) = signed_pair(j, i, m) else {
                    continue;
                };
                for sigma in 0..r {
                    let k = q * r + sigma;
                    total[i * r + sigma] += sg * (expl[k] + implicit[k]);
                }
            }
        }
        for sigma in 0..r {
            for i in 0..m {
                let mut acc = total[i * r + sigma];
                for j in 0..m {
                    let Some((q, sg)) = signed_pair(j, i, m) else {
                        continue;
                    };
                    for mu in 0..r {
                        let pji = sg * pi[q * r + mu];
                        for gm in 0..r {
                            acc -= pji * av[gm * m + j] * s.c(mu, gm, sigma);
                        }
                    }
                }
                out[sigma * m + i] = acc;
            }
        }
    });
    let rho2 = Curvature::from_node_fn(grid, r, |node, out| {
        let ga = c.gamma_a.at(node);
        let fv = f.at(node);
        commutator_term(a.at(node), m, s, out);
        for (p, (i, j)) in crate::lattice::pairs(m).into_iter().enumerate() {
            for mu in 0..r {
                let k = mu * np + p;
                let gji = ga[(j * r + mu) * m + i];
                let gij = ga[(i * r + mu) * m + j];
                // a^λ_i a^γ_j C^μ_{γλ} is the commutator term T^μ_{ij}
                out[k] += fv[k] + gji - gij;
            }
        }
    });
    Ok((rho1, rho2))
}

/// A point `(x, a, Π)` of the phase space; `a` in the potential layout and
/// `Π` packed as `pair * r + mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub pi: Vec<f64>,
}

/// Connection coefficients at one phase-space point, laid out as in
/// [`SectionConnection`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionValues {
    pub gamma_a: Vec<f64>,
    pub gamma_pi: Vec<f64>,
}

type Evaluator = dyn Fn(&PhasePoint) -> ConnectionValues + Send + Sync;

/// Phase-space connection given as a callable of the fiber coordinates.
pub struct PhaseConnectionFamily {
    m: usize,
    r: usize,
    evaluator: Box<Evaluator>,
    step: f64,
}

/// Default absolute fiber step for the closure conditions.
pub const DEFAULT_FIBER_STEP: f64 = 1e-4;

impl PhaseConnectionFamily {
    pub fn new<F>(m: usize, r: usize, evaluator: F) -> PhaseConnectionFamily
    where
        F: Fn(&PhasePoint) -> ConnectionValues + Send + Sync + 'static,
    {
        PhaseConnectionFamily {
            m,
            r,
            evaluator: Box::new(evaluator),
            step: DEFAULT_FIBER_STEP,
        }
    }

    pub fn with_step(mut self, step: f64) -> PhaseConnectionFamily {
        self.step = step;
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.r)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn eval(&self, p: &PhasePoint) -> Result<ConnectionValues> {
        let v = (self.evaluator)(p);
        let np = pair_count(self.m);
        if v.gamma_a.len() != self.m * self.r * self.m || v.gamma_pi.len() != self.m * np * self.r {
            return Err(Error::ShapeMismatch("connection family returned the wrong number of coefficients".into()));
        }
        if v.gamma_a.iter().chain(&v.gamma_pi).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("connection family output".into()));
        }
        Ok(v)
    }

    /// Family whose coefficients do not depend on the fiber coordinates.
    pub fn constant(m: usize, r: usize, values: ConnectionValues) -> PhaseConnectionFamily {
        PhaseConnectionFamily::new(m, r, move |_| values.clone())
    }
}

/// Max-abs of each closedness condition at one sample point.
///
/// `cond1` is condition 1 read as printed (both derivatives vanish) and
/// `cond1_symmetric` its exchange-symmetry form `|A − B|`. `cond3` is the
/// third condition as printed and `cond3_antisymmetrized` the variant
/// `∂(Γ^σ_{ji} − Γ^σ_{ij})/∂Π^{pq}_λ − ∂(Γ^λ_{pq} − Γ^λ_{qp})/∂Π^{ji}_σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureResiduals {
    pub cond1: f64,
    pub cond1_symmetric: f64,
    pub cond2: f64,
    pub cond3: f64,
    pub cond3_antisymmetrized: f64,
}

/// Fiber Jacobians at one point: derivatives of the trace `τ^i_σ = Γ^{ji}_{jσ}`
/// and of `Γ^λ_{pq}` with respect to every `a^λ_p` and packed `Π^{pq}_λ`.
struct FiberJacobian {
    /// `[coordinate][sigma * m + i]`
    dtau: Vec<Vec<f64>>,
    /// `[coordinate][(k * r + mu) * m + h]`
    dgamma: Vec<Vec<f64>>,
}

fn trace(v: &ConnectionValues, m: usize, r: usize) -> Vec<f64> {
    let np = pair_count(m);
    let mut tau = vec![0.0; r * m];
    for sigma in 0..r {
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                if let Some((q, sg)) = signed_pair(j, i, m) {
                    acc += sg * v.gamma_pi[(j * np + q) * r + sigma];
                }
            }
            tau[sigma * m + i] = acc;
        }
    }
    tau
}

fn fiber_jacobian(fam: &PhaseConnectionFamily, p: &PhasePoint) -> Result<FiberJacobian> {
    let (m, r) = fam.dims();
    let na = r * m;
    let npi = pair_count(m) * r;
    let outputs = |q: &PhasePoint| -> Result<Vec<f64>> {
        let v = fam.eval(q)?;
        let mut o = trace(&v, m, r);
        o.extend_from_slice(&v.gamma_a);
        Ok(o)
    };
    let derivative = |coord: usize, h: f64| -> Result<Vec<f64>> {
        let shifted = |sign: f64| {
            let mut q = p.clone();
            if coord < na {
                q.a[coord] += sign * h;
            } else {
                q.pi[coord - na] += sign * h;
            }
            q
        };
        let (fp, fm) = (outputs(&shifted(1.0))?, outputs(&shifted(-1.0))?);
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let mut dtau = Vec::with_capacity(na + npi);
    let mut dgamma = Vec::with_capacity(na + npi);
    for coord in 0..na + npi {
        let coarse = derivative(coord, fam.step)?;
        let fine = derivative(coord, 0.5 * fam.step)?;
        let d: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
        dtau.push(d[..r * m].to_vec());
        dgamma.push(d[r * m..].to_vec());
    }
    Ok(FiberJacobian { dtau, dgamma })
}

fn closure_at(fam: &PhaseConnectionFamily, p: &PhasePoint) -> Result<ClosureResiduals> {
    let (m, r) = fam.dims();
    let np = pair_count(m);
    if p.x.len() != m || p.a.len() != r * m || p.pi.len() != np * r {
        return Err(Error::ShapeMismatch("phase point does not match the family dimensions".into()));
    }
    let jac = fiber_jacobian(fam, p)?;
    let na = r * m;
    let a_coord = |lambda: usize, p_: usize| lambda * m + p_;
    let pi_coord = |pair: usize, lambda: usize| na + pair * r + lambda;
    let gamma = |k: usize, mu: usize, h: usize| (k * r + mu) * m + h;
    // derivative w.r.t. Π^{ji}_σ for an ordered pair, via the packed coordinate
    let d_pi = |j: usize, i: usize, sigma: usize| signed_pair(j, i, m).map(|(q, sg)| (pi_coord(q, sigma), sg));

    let mut res = ClosureResiduals {
        cond1: 0.0,
        cond1_symmetric: 0.0,
        cond2: 0.0,
        cond3: 0.0,
        cond3_antisymmetrized: 0.0,
    };
    for sigma in 0..r {
        for i in 0..m {
            for lambda in 0..r {
                for pp in 0..m {
                    let a_ = jac.dtau[a_coord(lambda, pp)][sigma * m + i];
                    let b_ = jac.dtau[a_coord(sigma, i)][lambda * m + pp];
                    res.cond1 = res.cond1.max(a_.abs()).max(b_.abs());
                    res.cond1_symmetric = res.cond1_symmetric.max((a_ - b_).abs());
                }
            }
        }
    }
    for sigma in 0..r {
        for i in 0..m {
            for (pair, (pp, q)) in crate::lattice::pairs(m).into_iter().enumerate() {
                for lambda in 0..r {
                    let da = &jac.dgamma[a_coord(sigma, i)];
                    let v = jac.dtau[pi_coord(pair, lambda)][sigma * m + i] + da[gamma(pp, lambda, q)]
                        - da[gamma(q, lambda, pp)];
                    res.cond2 = res.cond2.max(v.abs());
                }
            }
        }
    }
    for sigma in 0..r {
        for j in 0..m {
            for i in 0..m {
                let Some((c_ji, s_ji)) = d_pi(j, i, sigma) else {
                    continue;
                };
                for (pair, (pp, q)) in crate::lattice::pairs(m).into_iter().enumerate() {
                    for lambda in 0..r {
                        let dpq = &jac.dgamma[pi_coord(pair, lambda)];
                        let dji = &jac.dgamma[c_ji];
                        let printed = dpq[gamma(j, sigma, i)] - s_ji * dji[gamma(pp, lambda, q)]
                            - dpq[gamma(i, sigma, j)]
                            - s_ji * dji[gamma(q, lambda, pp)];
                        let variant = (dpq[gamma(j, sigma, i)] - dpq[gamma(i, sigma, j)])
                            - s_ji * (dji[gamma(pp, lambda, q)] - dji[gamma(q, lambda, pp)]);
                        res.cond3 = res.cond3.max(printed.abs());
                        res.cond3_antisymmetrized = res.cond3_antisymmetrized.max(variant.abs());
                    }
                }
            }
        }
    }
    Ok(res)
}

/// Closedness conditions at each sample point, evaluated in parallel.
pub fn closure_residuals(fam: &PhaseConnectionFamily, points: &[PhasePoint]) -> Result<Vec<ClosureResiduals>> {
    points.par_iter().map(|p| closure_at(fam, p)).collect()
}

/// Family solving the algebraic Hamiltonian-connection conditions pointwise for
/// the free Hamiltonian in a constant metric: the trace is fixed by the first
/// condition and `Γ^σ_{ij} = ½ a^ν_i a^ρ_j C^σ_{ρν} − ½ ∂H/∂Π^{ji}_σ`.
pub fn hamiltonian_split_family(
    s: &LieAlgebraData,
    g: &[f64],
    m: usize,
) -> Result<PhaseConnectionFamily> {
    if g.len() != m * m {
        return Err(Error::ShapeMismatch("metric must have m×m entries".into()));
    }
    let det = nalgebra::DMatrix::from_row_slice(m, m, g).determinant();
    if det.abs() < crate::dynamics::METRIC_DET_MIN {
        return Err(Error::DegenerateMetric {
            det,
            threshold: crate::dynamics::METRIC_DET_MIN,
        });
    }
    let sqrtg = det.abs().sqrt();
    let s = s.clone();
    let g = g.to_vec();
    let r = s.dim();
    Ok(PhaseConnectionFamily::new(m, r, move |p| {
        let np = pair_count(m);
        let mut t = vec![0.0; r * np];
        commutator_term(&p.a, m, &s, &mut t);
        let mut dh = vec![0.0; r * np];
        inverse_legendre_at(&p.pi, &g, sqrtg, &s, m, &mut dh);
        let mut gamma_a = vec![0.0; m * r * m];
        for i in 0..m {
            for j in 0..m {
                let Some((q, sg)) = signed_pair(i, j, m) else {
                    continue;
                };
                for sigma in 0..r {
                    let k = sigma * np + q;
                    gamma_a[(i * r + sigma) * m + j] = 0.5 * sg * (t[k] + dh[k]);
                }
            }
        }
        // τ^i_σ = Π^{ji}_μ C^μ_{ρσ} a^ρ_j, spread as Γ^{st}_{kμ} = (δ^s_k τ^t_μ − δ^t_k τ^s_μ)/(m − 1)
        let mut tau = vec![0.0; r * m];
        for sigma in 0..r {
            for i in 0..m {
                let mut acc = 0.0;
                for j in 0..m {
                    if let Some((q, sg)) = signed_pair(j, i, m) {
                        for mu in 0..r {
                            for rho in 0..r {
                                acc += sg * p.pi[q * r + mu] * s.c(mu, rho, sigma) * p.a[rho * m + j];
                            }
                        }
                    }
                }
                tau[sigma * m + i] = acc;
            }
        }
        let mut gamma_pi = vec![0.0; m * np * r];
        for k in 0..m {
            for (q, (st, t_)) in crate::lattice::pairs(m).into_iter().enumerate() {
                for mu in 0..r {
                    let mut v = 0.0;
                    if st == k {
                        v += tau[mu * m + t_];
                    }
                    if t_ == k {
                        v -= tau[mu * m + st];
                    }
                    gamma_pi[(k * np + q) * r + mu] = v / (m as f64 - 1.0);
                }
            }
        }
        ConnectionValues { gamma_a, gamma_pi }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::curvature;
    use crate::dynamics::{hdd_residuals, legendre, Momentum, PlaneWave};
    use crate::lattice::{pairs, reduce, Grid, Norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn maxabs(f: &LatticeField) -> f64 {
        reduce(f, Norm::MaxAbs)
    }

    fn random_section(g: &Grid, seed: u64) -> PhaseSection {
        PhaseSection::new(
            GaugeField::random(g, 3, seed, 2, 1.0).unwrap(),
            Momentum::random(g, 3, seed + 1, 2, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn holonomic_lift_examples() {
        let g = Grid::cubic(3, 32).unwrap();
        let constant = PhaseSection::new(
            GaugeField::from_node_fn(&g, 3, |_, out| out.fill(0.4)),
            Momentum::from_node_fn(&g, 3, |_, out| out.fill(-1.1)),
        )
        .unwrap();
        let c = connection_from_section(&constant, Scheme::Order4);
        assert_eq!(maxabs(&c.gamma_a), 0.0);
        assert_eq!(maxabs(&c.gamma_pi), 0.0);

        let sec = PhaseSection::new(
            GaugeField::from_coord_fn(&g, 3, |x, out| out[0] = x[1].sin()),
            Momentum::zeros(&g, 3),
        )
        .unwrap();
        let c = connection_from_section(&sec, Scheme::Order2);
        let h = g.spacing()[1];
        for node in 0..g.node_count() {
            let mut x = [0.0; 3];
            g.coords(node, &mut x);
            // Γ^0_{1,0} at (k=1, mu=0, h=0)
            assert!((c.gamma_a.at(node)[(3) * 3] - x[1].cos()).abs() <= h * h / 6.0 * 1.01);
        }

        let s1 = random_section(&g, 3);
        let s2 = random_section(&g, 7);
        let sum = PhaseSection::new(s1.a.add(&s2.a).unwrap(), s1.pi.add(&s2.pi).unwrap()).unwrap();
        let (c1, c2, c12) = (
            connection_from_section(&s1, Scheme::Order2),
            connection_from_section(&s2, Scheme::Order2),
            connection_from_section(&sum, Scheme::Order2),
        );
        assert!(maxabs(&c12.gamma_a.sub(&c1.gamma_a.add(&c2.gamma_a).unwrap()).unwrap()) <= 1e-13);
        assert!(maxabs(&c12.gamma_pi.sub(&c1.gamma_pi.add(&c2.gamma_pi).unwrap()).unwrap()) <= 1e-13);
    }

    #[test]
    fn hamiltonian_connection_matches_hdd() {
        let g = Grid::cubic(3, 8).unwrap();
        for s in [LieAlgebraData::so3(), LieAlgebraData::so21()] {
            let metric = BaseMetric::random(&g, &[1.0, 1.0, 1.0], 5, 0.2).unwrap();
            let sec = random_section(&g, 11);
            let c = connection_from_section(&sec, Scheme::Order2);
            let (rho1, rho2) = hamiltonian_connection_residuals(&c, &sec, &metric, &s).unwrap();
            let (r1, r2) = hdd_residuals(&sec, &metric, &s, Scheme::Order2).unwrap();
            assert!(maxabs(&rho1.add(&r2).unwrap()) <= 1e-13);
            assert!(maxabs(rho2.sub(&r1).unwrap().values()) <= 1e-13);
        }
        let zero = PhaseSection::new(GaugeField::zeros(&g, 3), Momentum::zeros(&g, 3)).unwrap();
        let metric = BaseMetric::flat(&g, &[1.0, 1.0, 1.0]).unwrap();
        let c = connection_from_section(&zero, Scheme::Order2);
        let (rho1, rho2) = hamiltonian_connection_residuals(&c, &zero, &metric, &LieAlgebraData::so3()).unwrap();
        assert_eq!(maxabs(&rho1), 0.0);
        assert_eq!(maxabs(rho2.values()), 0.0);
    }

    #[test]
    fn symmetric_part_of_gamma_is_ignored() {
        let g = Grid::cubic(3, 8).unwrap();
        let s = LieAlgebraData::so3();
        let metric = BaseMetric::flat(&g, &[1.0, 2.0, 1.0]).unwrap();
        let sec = random_section(&g, 1);
        let c = connection_from_section(&sec, Scheme::Order2);
        let sym = crate::lattice::random_smooth(&g, gamma_a_shape(3, 3), 9, 1, 1.0).unwrap();
        let mut c2 = c.clone();
        c2.gamma_a = LatticeField::from_node_fn(&g, c.gamma_a.shape().clone(), |node, out| {
            let base = c.gamma_a.at(node);
            let add = sym.at(node);
            for k in 0..3 {
                for mu in 0..3 {
                    for h in 0..3 {
                        let (lo, hi) = (k.min(h), k.max(h));
                        out[(k * 3 + mu) * 3 + h] = base[(k * 3 + mu) * 3 + h] + add[(lo * 3 + mu) * 3 + hi];
                    }
                }
            }
        });
        let (_, a2) = hamiltonian_connection_residuals(&c, &sec, &metric, &s).unwrap();
        let (_, b2) = hamiltonian_connection_residuals(&c2, &sec, &metric, &s).unwrap();
        // Γ_{ij} − Γ_{ji} cancels the symmetric addition up to the rounding of the sum
        assert!(maxabs(a2.sub(&b2).unwrap().values()) <= 1e-14);
    }

    #[test]
    fn plane_wave_connection_residuals_decay() {
        let err = |n: usize| {
            let pw = PlaneWave::new(n).unwrap();
            let sec = pw.section(Scheme::Order2).unwrap();
            let c = connection_from_section(&sec, Scheme::Order2);
            let (rho1, _) = hamiltonian_connection_residuals(&c, &sec, &pw.metric, &pw.algebra).unwrap();
            let f = pw.exact_curvature();
            let lc = lagrangian_connection_from_section(&pw.a, &f, Scheme::Order2);
            let (l1, l2) =
                lagrangian_connection_residuals(&lc, &pw.a, &f, &pw.metric, &pw.algebra, Scheme::Order2).unwrap();
            (maxabs(&rho1), maxabs(&l1), maxabs(l2.values()))
        };
        let (a, b) = (err(16), err(32));
        for (e1, e2) in [(a.0, b.0), (a.1, b.1), (a.2, b.2)] {
            let slope = (e1 / e2).log2();
            assert!((slope - 2.0).abs() <= 0.2, "slope {slope}");
        }
    }

    #[test]
    fn lagrangian_connection_zero_and_commutator_cancellation() {
        let g = Grid::cubic(3, 6).unwrap();
        let s = LieAlgebraData::so3();
        let metric = BaseMetric::flat(&g, &[1.0, 1.0, 1.0]).unwrap();
        let a0 = GaugeField::zeros(&g, 3);
        let f0 = Curvature::zeros(&g, 3);
        let c = lagrangian_connection_from_section(&a0, &f0, Scheme::Order2);
        let (r1, r2) = lagrangian_connection_residuals(&c, &a0, &f0, &metric, &s, Scheme::Order2).unwrap();
        assert_eq!(maxabs(&r1), 0.0);
        assert_eq!(maxabs(r2.values()), 0.0);

        let a = GaugeField::from_node_fn(&g, 3, |_, out| {
            out.iter_mut().enumerate().for_each(|(k, v)| *v = 0.3 * k as f64 - 1.0)
        });
        let f = Curvature::from_node_fn(&g, 3, |node, out| {
            commutator_term(a.at(node), 3, &s, out);
            out.iter_mut().for_each(|v| *v = -*v);
        });
        let zero = LagrangianSectionConnection {
            gamma_a: LatticeField::zeros(&g, gamma_a_shape(3, 3)),
            gamma_f: LatticeField::zeros(&g, gamma_f_shape(3, 3)),
        };
        let (_, r2) = lagrangian_connection_residuals(&zero, &a, &f, &metric, &s, Scheme::Order2).unwrap();
        assert!(maxabs(r2.values()) <= 1e-15);
    }

    #[test]
    fn lagrangian_connection_with_curved_metric() {
        // holonomic lift of (a, curvature(a)): ρ2 vanishes and ρ1 is the discrete
        // Euler–Lagrange residual up to the product-rule error of the stencil
        let s = LieAlgebraData::so3();
        let err = |n: usize| {
            let g = Grid::cubic(3, n).unwrap();
            let metric = BaseMetric::random(&g, &[1.0, 1.0, 1.0], 4, 0.2).unwrap();
            let a = GaugeField::random(&g, 3, 2, 1, 0.5).unwrap();
            let f = curvature(&a, &s, Scheme::Order2).unwrap();
            let c = lagrangian_connection_from_section(&a, &f, Scheme::Order2);
            let (r1, r2) = lagrangian_connection_residuals(&c, &a, &f, &metric, &s, Scheme::Order2).unwrap();
            assert!(maxabs(r2.values()) <= 1e-13);
            let el = crate::dynamics::euler_lagrange_residual(&a, &metric, &s, Scheme::Order2).unwrap();
            maxabs(&r1.add(&el).unwrap())
        };
        let slope = (err(16) / err(32)).log2();
        assert!((slope - 2.0).abs() <= 0.2, "slope {slope}");
    }

    fn random_points(seed: u64, count: usize, r: usize) -> Vec<PhasePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| PhasePoint {
                x: (0..3).map(|_| rng.gen_range(0.0..6.0)).collect(),
                a: (0..r * 3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                pi: (0..r * 3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            })
            .collect()
    }

    #[test]
    fn constant_family_is_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values = ConnectionValues {
            gamma_a: (0..27).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            gamma_pi: (0..27).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let fam = PhaseConnectionFamily::constant(3, 3, values);
        for res in closure_residuals(&fam, &random_points(1, 10, 3)).unwrap() {
            for v in [res.cond1, res.cond1_symmetric, res.cond2, res.cond3, res.cond3_antisymmetrized] {
                assert!(v <= 1e-9);
            }
        }
    }

    #[test]
    fn linear_trace_violates_condition_one() {
        // Γ^{ji}_{jσ} summed equals a^σ_i
        let fam = PhaseConnectionFamily::new(3, 3, |p| {
            let mut gamma_pi = vec![0.0; 27];
            for k in 0..3 {
                for (q, (st, t)) in pairs(3).into_iter().enumerate() {
                    for mu in 0..3 {
                        let mut v = 0.0;
                        if st == k {
                            v += p.a[mu * 3 + t];
                        }
                        if t == k {
                            v -= p.a[mu * 3 + st];
                        }
                        gamma_pi[(k * 3 + q) * 3 + mu] = 0.5 * v;
                    }
                }
            }
            ConnectionValues { gamma_a: vec![0.0; 27], gamma_pi }
        });
        let res = closure_residuals(&fam, &random_points(2, 3, 3)).unwrap();
        for r in res {
            assert!((r.cond1 - 1.0).abs() <= 1e-9);
            assert!(r.cond1_symmetric <= 1e-9);
        }
    }

    #[test]
    fn split_family_against_hand_derivatives() {
        for s in [LieAlgebraData::so3(), LieAlgebraData::so21()] {
            let g = [1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, -1.5];
            let fam = hamiltonian_split_family(&s, &g, 3).unwrap();
            let points = random_points(5, 4, 3);
            let res = closure_residuals(&fam, &points).unwrap();
            let sqrtg = nalgebra::DMatrix::from_row_slice(3, 3, &g).determinant().abs().sqrt();
            // M[(σ,ij),(λ,pq)] = ∂(∂H/∂Π^{ij}_σ)/∂Π^{pq}_λ, from unit momenta
            let mut hess = vec![vec![0.0; 9]; 9];
            for col in 0..9 {
                let mut unit = vec![0.0; 9];
                unit[col] = 1.0;
                inverse_legendre_at(&unit, &g, sqrtg, &s, 3, &mut hess[col]);
            }
            // hess[pq*3+λ][σ*3+ij]
            let m_entry = |sigma: usize, i: usize, j: usize, lambda: usize, pq: usize| -> f64 {
                match signed_pair(i, j, 3) {
                    Some((q, sg)) => sg * hess[pq * 3 + lambda][sigma * 3 + q],
                    None => 0.0,
                }
            };
            for (pt, r) in points.iter().zip(&res) {
                // condition 1: A = ∂τ^i_σ/∂a^λ_p = Π^{pi}_μ C^μ_{λσ}
                let mut c1: f64 = 0.0;
                for sigma in 0..3 {
                    for i in 0..3 {
                        for lambda in 0..3 {
                            for p in 0..3 {
                                let mut v = 0.0;
                                if let Some((q, sg)) = signed_pair(p, i, 3) {
                                    for mu in 0..3 {
                                        v += sg * pt.pi[q * 3 + mu] * s.c(mu, lambda, sigma);
                                    }
                                }
                                c1 = c1.max(v.abs());
                            }
                        }
                    }
                }
                assert!((r.cond1 - c1).abs() <= 1e-8);
                assert!(r.cond1_symmetric <= 1e-8);
                // condition 2 vanishes by antisymmetry of C
                assert!(r.cond2 <= 1e-8, "cond2 {}", r.cond2);
                // condition 3: printed form equals −M^{σ,ij}_{λ,pq}; antisymmetrized form vanishes
                let mut c3: f64 = 0.0;
                for sigma in 0..3 {
                    for (i, j) in (0..3).flat_map(|i| (0..3).map(move |j| (i, j))) {
                        if i == j {
                            continue;
                        }
                        for pq in 0..3 {
                            for lambda in 0..3 {
                                c3 = c3.max(m_entry(sigma, i, j, lambda, pq).abs());
                            }
                        }
                    }
                }
                assert!((r.cond3 - c3).abs() <= 1e-8, "{} vs {c3}", r.cond3);
                assert!(r.cond3_antisymmetrized <= 1e-8);
            }
            // the family solves the algebraic conditions pointwise
            let pt = &points[0];
            let v = fam.eval(pt).unwrap();
            let mut t = vec![0.0; 9];
            commutator_term(&pt.a, 3, &s, &mut t);
            let mut dh = vec![0.0; 9];
            inverse_legendre_at(&pt.pi, &g, sqrtg, &s, 3, &mut dh);
            for (q, (i, j)) in pairs(3).into_iter().enumerate() {
                for sigma in 0..3 {
                    let rho2 = v.gamma_a[(i * 3 + sigma) * 3 + j] - v.gamma_a[(j * 3 + sigma) * 3 + i]
                        - dh[sigma * 3 + q]
                        - t[sigma * 3 + q];
                    assert!(rho2.abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn non_finite_family_rejected() {
        let fam = PhaseConnectionFamily::new(3, 3, |_| ConnectionValues {
            gamma_a: vec![f64::NAN; 27],
            gamma_pi: vec![0.0; 27],
        });
        assert!(matches!(
            closure_residuals(&fam, &random_points(1, 1, 3)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn consistency_direction() {
        // small HDD residuals imply small connection residuals for the holonomic lift
        let s = LieAlgebraData::so3();
        let g = Grid::cubic(3, 8).unwrap();
        let metric = BaseMetric::flat(&g, &[1.0, 1.0, 1.0]).unwrap();
        let a = GaugeField::random(&g, 3, 4, 1, 0.3).unwrap();
        let pi = legendre(&curvature(&a, &s, Scheme::Order2).unwrap(), &metric, &s).unwrap();
        let sec = PhaseSection::new(a, pi).unwrap();
        let (r1, r2) = hdd_residuals(&sec, &metric, &s, Scheme::Order2).unwrap();
        let eps = maxabs(r1.values()).max(maxabs(&r2));
        let c = connection_from_section(&sec, Scheme::Order2);
        let (p1, p2) = hamiltonian_connection_residuals(&c, &sec, &metric, &s).unwrap();
        assert!(maxabs(&p1).max(maxabs(p2.values())) <= eps + 1e-13);
    }
}
