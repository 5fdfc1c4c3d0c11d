//! Gauge maps `γ = exp ξ` generated by analytic algebra-valued fields, and
//! the transformation laws of potentials, field strengths, momenta, triads
//! and spin connections under them. The base map is always the identity.
//!
//! Only `Ad(γ)`, `Ad(γ⁻¹)` and the Maurer–Cartan components
//! `η_j = γ⁻¹ ∂_j γ` are materialized.

use nalgebra::DMatrix;

use crate::algebra::LieAlgebraData;
use crate::connection::{check_compat, check_grid, Curvature, GaugeField};
use crate::dynamics::Momentum;
use crate::error::{Error, Result};
use crate::lattice::{pairs, Grid, LatticeField, Shape, Slot, TrigPolynomial};
use crate::triad::{unpack_spin, SpinConnectionData, TriadData};

/// Largest accepted Frobenius norm of `ad_ξ` at any node.
pub const MAX_GENERATOR_NORM: f64 = 20.0;

const SERIES_TOL: f64 = 1e-15;
const SERIES_MAX_TERMS: usize = 400;

/// Per-node `Ad(γ)`, `Ad(γ⁻¹)` (row-major `r × r`, entry `mu * r + nu`)
/// and `η^μ_j` (potential layout).
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeMapData {
    ad: LatticeField,
    ad_inv: LatticeField,
    eta: GaugeField,
}

fn matrix_layout(r: usize) -> Shape {
    Shape::new(vec![Slot::Index(r), Slot::Index(r)])
}

/// `exp(A)` by scaling and squaring with a Taylor kernel.
fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a / 2f64.powi(squarings as i32);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.abs().max() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `Σ_k (−ad)^k / (k+1)! · v`, truncated once a term falls below `SERIES_TOL`.
fn dexp_series(ad: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let mut term = nalgebra::DVector::from_column_slice(v);
    let mut sum = term.clone();
    for k in 1..SERIES_MAX_TERMS {
        term = -(ad * &term) / (k + 1) as f64;
        sum += &term;
        if term.norm() < SERIES_TOL {
            break;
        }
    }
    sum.as_slice().to_vec()
}

impl GaugeMapData {
    /// `γ = identity` everywhere.
    pub fn identity(grid: &Grid, r: usize) -> GaugeMapData {
        let id = LatticeField::from_node_fn(grid, matrix_layout(r), |_, out| {
            for mu in 0..r {
                out[mu * r + mu] = 1.0;
            }
        });
        GaugeMapData {
            ad: id.clone(),
            ad_inv: id,
            eta: GaugeField::zeros(grid, r),
        }
    }

    /// Assemble from precomputed parts, checking layouts.
    pub fn from_parts(ad: LatticeField, ad_inv: LatticeField, eta: GaugeField) -> Result<GaugeMapData> {
        let r = eta.r();
        check_grid(ad.grid(), eta.grid())?;
        check_grid(ad_inv.grid(), eta.grid())?;
        if ad.shape() != &matrix_layout(r) || ad_inv.shape() != &matrix_layout(r) {
            return Err(Error::ShapeMismatch("Ad fields must be r × r per node".into()));
        }
        Ok(GaugeMapData { ad, ad_inv, eta })
    }

    pub fn r(&self) -> usize {
        self.eta.r()
    }

    pub fn grid(&self) -> &Grid {
        self.eta.grid()
    }

    pub fn ad(&self) -> &LatticeField {
        &self.ad
    }

    pub fn ad_inv(&self) -> &LatticeField {
        &self.ad_inv
    }

    pub fn eta(&self) -> &GaugeField {
        &self.eta
    }

    /// The map "apply `second`, then `self`":
    /// `Ad(γ⁻¹) = Ad(γ₁⁻¹) Ad(γ₂⁻¹)`, `η = Ad(γ₁⁻¹) η₂ + η₁`.
    pub fn compose(&self, second: &GaugeMapData) -> Result<GaugeMapData> {
        check_grid(self.grid(), second.grid())?;
        if self.r() != second.r() {
            return Err(Error::ShapeMismatch("composed gauge maps differ in r".into()));
        }
        let r = self.r();
        let m = self.grid().dim();
        let matmul = |x: &[f64], y: &[f64], out: &mut [f64]| {
            for i in 0..r {
                for j in 0..r {
                    out[i * r + j] = (0..r).map(|k| x[i * r + k] * y[k * r + j]).sum();
                }
            }
        };
        let ad = LatticeField::from_node_fn(self.grid(), matrix_layout(r), |node, out| {
            matmul(second.ad.at(node), self.ad.at(node), out)
        });
        let ad_inv = LatticeField::from_node_fn(self.grid(), matrix_layout(r), |node, out| {
            matmul(self.ad_inv.at(node), second.ad_inv.at(node), out)
        });
        let eta = GaugeField::from_node_fn(self.grid(), r, |node, out| {
            let inv1 = self.ad_inv.at(node);
            let e1 = self.eta.at(node);
            let e2 = second.eta.at(node);
            for mu in 0..r {
                for j in 0..m {
                    let mut acc = e1[mu * m + j];
                    for nu in 0..r {
                        acc += inv1[mu * r + nu] * e2[nu * m + j];
                    }
                    out[mu * m + j] = acc;
                }
            }
        });
        Ok(GaugeMapData { ad, ad_inv, eta })
    }

    /// The inverse map: `Ad ↔ Ad⁻¹`, `η ↦ −Ad η`.
    pub fn inverse(&self) -> GaugeMapData {
        let r = self.r();
        let m = self.grid().dim();
        let eta = GaugeField::from_node_fn(self.grid(), r, |node, out| {
            let ad = self.ad.at(node);
            let e = self.eta.at(node);
            for mu in 0..r {
                for j in 0..m {
                    out[mu * m + j] = -(0..r).map(|nu| ad[mu * r + nu] * e[nu * m + j]).sum::<f64>();
                }
            }
        });
        GaugeMapData {
            ad: self.ad_inv.clone(),
            ad_inv: self.ad.clone(),
            eta,
        }
    }

    /// Max-abs of `Ad·Ad⁻¹ − I` and of `Adᵀ K Ad − K` over the lattice.
    pub fn consistency_residuals(&self, s: &LieAlgebraData) -> (f64, f64) {
        let r = self.r();
        let mut inv_res = 0.0_f64;
        let mut k_res = 0.0_f64;
        for node in 0..self.grid().node_count() {
            let ad = self.ad.at(node);
            let inv = self.ad_inv.at(node);
            for i in 0..r {
                for j in 0..r {
                    let prod: f64 = (0..r).map(|k| ad[i * r + k] * inv[k * r + j]).sum();
                    let id = if i == j { 1.0 } else { 0.0 };
                    inv_res = inv_res.max((prod - id).abs());
                    let mut kk = 0.0;
                    for a in 0..r {
                        for b in 0..r {
                            kk += ad[a * r + i] * s.k(a, b) * ad[b * r + j];
                        }
                    }
                    k_res = k_res.max((kk - s.k(i, j)).abs());
                }
            }
        }
        (inv_res, k_res)
    }
}

/// Build `γ = exp ξ` from an analytic generator: `Ad(γ) = exp(ad_ξ)`,
/// `Ad(γ⁻¹) = exp(−ad_ξ)` and `η_j = Σ_k (−ad_ξ)^k/(k+1)! ∂_jξ`, with `∂_jξ`
/// taken from the generator's exact gradient.
pub fn make_gauge_map(xi: &TrigPolynomial, grid: &Grid, s: &LieAlgebraData) -> Result<GaugeMapData> {
    let r = s.dim();
    let m = grid.dim();
    if xi.components() != r || xi.dim() != m {
        return Err(Error::ShapeMismatch(format!(
            "generator has {} components on {} axes, expected {r} on {m}",
            xi.components(),
            xi.dim()
        )));
    }
    let mut x = vec![0.0; m];
    let mut v = vec![0.0; r];
    for node in 0..grid.node_count() {
        grid.coords(node, &mut x);
        xi.eval(&x, &mut v);
        let norm = DMatrix::from_row_slice(r, r, &s.ad_matrix(&v)).norm();
        if !norm.is_finite() || norm > MAX_GENERATOR_NORM {
            return Err(Error::GeneratorTooLarge {
                norm,
                limit: MAX_GENERATOR_NORM,
            });
        }
    }
    let block = 2 * r * r + r * m;
    let packed = LatticeField::from_node_fn(grid, Shape::new(vec![Slot::Index(block)]), |node, out| {
        let mut x = vec![0.0; m];
        grid.coords(node, &mut x);
        let mut v = vec![0.0; r];
        xi.eval(&x, &mut v);
        let mut dv = vec![0.0; r * m];
        xi.gradient(&x, &mut dv);
        let ad = DMatrix::from_row_slice(r, r, &s.ad_matrix(&v));
        let fwd = expm(&ad);
        let bwd = expm(&-&ad);
        for mu in 0..r {
            for nu in 0..r {
                out[mu * r + nu] = fwd[(mu, nu)];
                out[r * r + mu * r + nu] = bwd[(mu, nu)];
            }
        }
        for j in 0..m {
            let eta = dexp_series(&ad, &dv[j * r..(j + 1) * r]);
            for mu in 0..r {
                out[2 * r * r + mu * m + j] = eta[mu];
            }
        }
    });
    let n = grid.node_count();
    let mut ad = Vec::with_capacity(n * r * r);
    let mut ad_inv = Vec::with_capacity(n * r * r);
    let mut eta = Vec::with_capacity(n * r * m);
    for node in 0..n {
        let v = packed.at(node);
        ad.extend_from_slice(&v[..r * r]);
        ad_inv.extend_from_slice(&v[r * r..2 * r * r]);
        eta.extend_from_slice(&v[2 * r * r..]);
    }
    Ok(GaugeMapData {
        ad: LatticeField::from_data(grid, matrix_layout(r), ad)?,
        ad_inv: LatticeField::from_data(grid, matrix_layout(r), ad_inv)?,
        eta: GaugeField::from_field(LatticeField::from_data(grid, GaugeField::layout(r, m), eta)?, r)?,
    })
}

fn check_map(g: &GaugeMapData, grid: &Grid, r: usize, what: &str) -> Result<()> {
    check_grid(g.grid(), grid)?;
    if g.r() != r {
        return Err(Error::ShapeMismatch(format!("{what}: gauge map has r = {}, field has r = {r}", g.r())));
    }
    Ok(())
}

/// Apply `Ad(γ⁻¹)` to the leading algebra index of a `[Index(r), rest]` block.
fn adjoint_leading(block: &[f64], inv: &[f64], r: usize, out: &mut [f64]) {
    let rest = block.len() / r;
    for mu in 0..r {
        for c in 0..rest {
            out[mu * rest + c] = (0..r).map(|nu| inv[mu * r + nu] * block[nu * rest + c]).sum();
        }
    }
}

/// `ā^μ_i = Ad(γ⁻¹)^μ_ν a^ν_i + η^μ_i`.
pub fn gauge_a(a: &GaugeField, g: &GaugeMapData) -> Result<GaugeField> {
    check_map(g, a.grid(), a.r(), "gauge_a")?;
    let r = a.r();
    Ok(GaugeField::from_node_fn(a.grid(), r, |node, out| {
        adjoint_leading(a.at(node), g.ad_inv.at(node), r, out);
        for (o, e) in out.iter_mut().zip(g.eta.at(node)) {
            *o += e;
        }
    }))
}

/// `F̄^μ_{ik} = Ad(γ⁻¹)^μ_ν F^ν_{ik}`.
#[allow(non_snake_case)]
pub fn gauge_F(f: &Curvature, g: &GaugeMapData) -> Result<Curvature> {
    check_map(g, f.grid(), f.r(), "gauge_F")?;
    let r = f.r();
    Ok(Curvature::from_node_fn(f.grid(), r, |node, out| {
        adjoint_leading(f.at(node), g.ad_inv.at(node), r, out)
    }))
}

/// `Π̄^{pq}_μ = Π^{pq}_ν Ad(γ)^ν_μ`, which keeps `Π^{ij}_μ F^μ_{ij}` invariant.
#[allow(non_snake_case)]
pub fn gauge_Pi(pi: &Momentum, g: &GaugeMapData) -> Result<Momentum> {
    check_map(g, pi.grid(), pi.r(), "gauge_Pi")?;
    let r = pi.r();
    Ok(Momentum::from_node_fn(pi.grid(), r, |node, out| {
        let ad = g.ad.at(node);
        for (blk, src) in out.chunks_mut(r).zip(pi.at(node).chunks(r)) {
            for mu in 0..r {
                blk[mu] = (0..r).map(|nu| src[nu] * ad[nu * r + mu]).sum();
            }
        }
    }))
}

/// Co-adjoint law `R̄_{μ,i} = R_{ν,i} Ad(γ)^ν_μ` for fields in the potential
/// layout that carry a lower algebra index, such as the second
/// Hamilton–De Donder residual.
pub fn gauge_coadjoint(field: &LatticeField, g: &GaugeMapData) -> Result<LatticeField> {
    let r = g.r();
    check_grid(field.grid(), g.grid())?;
    let m = field.grid().dim();
    if field.shape() != &GaugeField::layout(r, m) {
        return Err(Error::ShapeMismatch("gauge_coadjoint expects the potential layout".into()));
    }
    Ok(LatticeField::from_node_fn(field.grid(), GaugeField::layout(r, m), |node, out| {
        let ad = g.ad.at(node);
        let src = field.at(node);
        for mu in 0..r {
            for i in 0..m {
                out[mu * m + i] = (0..r).map(|nu| src[nu * m + i] * ad[nu * r + mu]).sum();
            }
        }
    }))
}

/// `ē^μ_p = Ad(γ⁻¹)^μ_σ e^σ_p`.
pub fn gauge_triad(e: &TriadData, g: &GaugeMapData) -> Result<TriadData> {
    check_map(g, e.grid(), e.r(), "gauge_triad")?;
    let r = e.r();
    Ok(TriadData::from_node_fn(e.grid(), r, |node, out| {
        adjoint_leading(e.at(node), g.ad_inv.at(node), r, out)
    }))
}

/// `ω̄_{iβα} = Ad^σ_β Ad^γ_α ω_{iσγ} + Ad^η_β (∂_i Ad(γ⁻¹))^σ_η K_{σα}`,
/// with `∂_i Ad(γ⁻¹) = −ad(η_i) Ad(γ⁻¹)`.
pub fn gauge_spin(w: &SpinConnectionData, g: &GaugeMapData, s: &LieAlgebraData) -> Result<SpinConnectionData> {
    check_map(g, w.grid(), w.r(), "gauge_spin")?;
    check_compat(w.r(), s, "gauge_spin")?;
    Ok(SpinConnectionData::from_node_fn(w.grid(), 3, |node, out| {
        let ad = g.ad.at(node);
        let inv = g.ad_inv.at(node);
        let eta = g.eta.at(node);
        let full = unpack_spin(w.at(node));
        for i in 0..3 {
            let eta_i: Vec<f64> = (0..3).map(|mu| eta[mu * 3 + i]).collect();
            let adm = s.ad_matrix(&eta_i);
            // ∂_i Ad(γ⁻¹)
            let mut d = [0.0; 9];
            for a in 0..3 {
                for b in 0..3 {
                    d[a * 3 + b] = -(0..3).map(|k| adm[a * 3 + k] * inv[k * 3 + b]).sum::<f64>();
                }
            }
            for (q, (be, al)) in pairs(3).into_iter().enumerate() {
                let mut acc = 0.0;
                for sg in 0..3 {
                    for gm in 0..3 {
                        acc += ad[sg * 3 + be] * ad[gm * 3 + al] * full[(i * 3 + sg) * 3 + gm];
                    }
                }
                for et in 0..3 {
                    for sg in 0..3 {
                        acc += ad[et * 3 + be] * d[sg * 3 + et] * s.k(sg, al);
                    }
                }
                out[i * 3 + q] = acc;
            }
        }
    }))
}
