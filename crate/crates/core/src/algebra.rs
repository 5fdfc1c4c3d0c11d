//! Lie-algebra data: structure constants `C^μ_{ρν}` and an Ad-invariant
//! metric `K_{μν}`.
//!
//! Algebra indices are zero-based. For the three-dimensional algebras the
//! constants are generated from the metric as
//! `C^μ_{λσ} = ½ √K K^{μν} ε_{νλσ}` with `ε_{012} = +1`, which makes the
//! bracket a K-weighted cross product. Custom algebras (including the
//! abelian one used for Maxwell-type checks) are accepted after validation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Absolute tolerance used when validating custom structure constants.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Determinants below this are treated as degenerate.
const DEGENERACY_TOL: f64 = 1e-12;

/// Levi-Civita permutation symbol in three dimensions, `ε_{012} = +1`.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    if i == j || j == k || i == k || i > 2 || j > 2 || k > 2 {
        return 0.0;
    }
    // (i, j, k) is a permutation of (0, 1, 2); its sign is the sign of the product of differences.
    let p = (j as i64 - i as i64) * (k as i64 - i as i64) * (k as i64 - j as i64);
    p.signum() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgebraKind {
    So3,
    So21,
    Custom,
}

/// How the metric `K_{μν}` is supplied.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Diagonal(Vec<f64>),
    /// Row-major `r × r` matrix.
    Full(Vec<Vec<f64>>),
}

/// Structure constants and Ad-invariant metric of a real Lie algebra.
///
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebraData {
    r: usize,
    /// `c[(mu * r + rho) * r + nu] = C^μ_{ρν}`
    c: Vec<f64>,
    k: Vec<f64>,
    k_inv: Vec<f64>,
    sqrt_k: f64,
    sigma_k: f64,
}

impl LieAlgebraData {
    /// so(3) with `K = I`.
    pub fn so3() -> Self {
        build_algebra(AlgebraKind::So3, &MetricSpec::Diagonal(vec![1.0; 3]), None)
            .expect("identity metric is valid")
    }

    /// so(2,1) with `K = diag(1, 1, -1)`.
    pub fn so21() -> Self {
        build_algebra(
            AlgebraKind::So21,
            &MetricSpec::Diagonal(vec![1.0, 1.0, -1.0]),
            None,
        )
        .expect("diag(1,1,-1) is valid")
    }

    /// Abelian algebra of dimension `r` with `K = I`.
    pub fn abelian(r: usize) -> Self {
        build_algebra(
            AlgebraKind::Custom,
            &MetricSpec::Diagonal(vec![1.0; r]),
            Some(&vec![0.0; r * r * r]),
        )
        .expect("abelian algebra is valid")
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn c(&self, mu: usize, rho: usize, nu: usize) -> f64 {
        self.c[(mu * self.r + rho) * self.r + nu]
    }

    #[inline]
    pub fn k(&self, mu: usize, nu: usize) -> f64 {
        self.k[mu * self.r + nu]
    }

    #[inline]
    pub fn k_inv(&self, mu: usize, nu: usize) -> f64 {
        self.k_inv[mu * self.r + nu]
    }

    /// `√|det K|`
    pub fn sqrt_k(&self) -> f64 {
        self.sqrt_k
    }

    /// Sign of `det K`.
    pub fn sigma_k(&self) -> f64 {
        self.sigma_k
    }

    pub fn structure_constants(&self) -> &[f64] {
        &self.c
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    /// `[x, y]^μ = C^μ_{ρν} x^ρ y^ν`
    pub fn bracket(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let r = self.r;
        for mu in 0..r {
            let mut s = 0.0;
            for rho in 0..r {
                if x[rho] == 0.0 {
                    continue;
                }
                for nu in 0..r {
                    s += self.c(mu, rho, nu) * x[rho] * y[nu];
                }
            }
            out[mu] = s;
        }
    }

    /// Row-major matrix of `ad_ξ`, `(ad_ξ)^μ_ν = C^μ_{σν} ξ^σ`.
    pub fn ad_matrix(&self, xi: &[f64]) -> Vec<f64> {
        let r = self.r;
        let mut m = vec![0.0; r * r];
        for mu in 0..r {
            for nu in 0..r {
                let mut s = 0.0;
                for sigma in 0..r {
                    s += self.c(mu, sigma, nu) * xi[sigma];
                }
                m[mu * r + nu] = s;
            }
        }
        m
    }

    /// Lower an algebra index: `v_μ = K_{μν} v^ν`.
    pub fn lower(&self, v: &[f64], out: &mut [f64]) {
        let r = self.r;
        for mu in 0..r {
            out[mu] = (0..r).map(|nu| self.k(mu, nu) * v[nu]).sum();
        }
    }
}

/// Build and validate Lie-algebra data.
///
/// `so3`/`so21` require `r = 3` with a diagonal `K` of signature `(+,+,+)`
/// or two positive and one negative entry respectively; their structure
/// constants are generated from `K`. `custom` requires `custom_c` laid out as
/// `C^μ_{ρν}` at `(μ r + ρ) r + ν`.
pub fn build_algebra(
    kind: AlgebraKind,
    metric: &MetricSpec,
    custom_c: Option<&[f64]>,
) -> Result<LieAlgebraData> {
    let (r, k) = metric_matrix(metric)?;
    let km = DMatrix::from_row_slice(r, r, &k);
    let det = km.determinant();
    if !det.is_finite() || det.abs() <= DEGENERACY_TOL {
        return Err(Error::DegenerateMetric {
            det,
            threshold: DEGENERACY_TOL,
        });
    }
    let kinv_m = km
        .clone()
        .try_inverse()
        .ok_or(Error::DegenerateMetric {
            det,
            threshold: DEGENERACY_TOL,
        })?;
    let k_inv: Vec<f64> = (0..r * r).map(|idx| kinv_m[(idx / r, idx % r)]).collect();
    let sqrt_k = det.abs().sqrt();
    let sigma_k = det.signum();

    let c = match kind {
        AlgebraKind::So3 | AlgebraKind::So21 => {
            if custom_c.is_some() {
                return Err(Error::InvalidAlgebra(
                    "structure constants are generated for so3/so21; do not pass custom ones".into(),
                ));
            }
            check_three_dim_metric(kind, r, &k)?;
            let mut c = vec![0.0; 27];
            for mu in 0..3 {
                for lambda in 0..3 {
                    for sigma in 0..3 {
                        let mut s = 0.0;
                        for nu in 0..3 {
                            s += k_inv[mu * 3 + nu] * levi_civita(nu, lambda, sigma);
                        }
                        c[(mu * 3 + lambda) * 3 + sigma] = 0.5 * sqrt_k * s;
                    }
                }
            }
            c
        }
        AlgebraKind::Custom => {
            let c = custom_c.ok_or_else(|| {
                Error::InvalidAlgebra("custom algebra requires structure constants".into())
            })?;
            if c.len() != r * r * r {
                return Err(Error::InvalidAlgebra(format!(
                    "expected {} structure constants for r = {r}, got {}",
                    r * r * r,
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("structure constants".into()));
            }
            c.to_vec()
        }
    };

    let data = LieAlgebraData {
        r,
        c,
        k,
        k_inv,
        sqrt_k,
        sigma_k,
    };

    let anti = bracket_antisymmetry_residual(&data);
    if anti > VALIDATION_TOL {
        return Err(Error::InvalidAlgebra(format!(
            "structure constants not antisymmetric in the lower pair (residual {anti:e})"
        )));
    }
    let jac = jacobi_residual(&data);
    if jac > VALIDATION_TOL {
        return Err(Error::JacobiViolation { residual: jac });
    }
    let adi = ad_invariance_residual(&data);
    if adi > VALIDATION_TOL {
        return Err(Error::AdInvarianceViolation { residual: adi });
    }
    Ok(data)
}

fn metric_matrix(metric: &MetricSpec) -> Result<(usize, Vec<f64>)> {
    match metric {
        MetricSpec::Diagonal(d) => {
            let r = d.len();
            if r == 0 {
                return Err(Error::InvalidAlgebra("empty metric".into()));
            }
            let mut k = vec![0.0; r * r];
            for (i, &v) in d.iter().enumerate() {
                k[i * r + i] = v;
            }
            if k.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("algebra metric".into()));
            }
            Ok((r, k))
        }
        MetricSpec::Full(rows) => {
            let r = rows.len();
            if r == 0 || rows.iter().any(|row| row.len() != r) {
                return Err(Error::InvalidAlgebra("metric must be a square matrix".into()));
            }
            let k: Vec<f64> = rows.iter().flatten().copied().collect();
            if k.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("algebra metric".into()));
            }
            let mut asym: f64 = 0.0;
            for i in 0..r {
                for j in 0..r {
                    asym = asym.max((k[i * r + j] - k[j * r + i]).abs());
                }
            }
            if asym > VALIDATION_TOL {
                return Err(Error::AsymmetricMetric { asymmetry: asym });
            }
            Ok((r, k))
        }
    }
}

fn check_three_dim_metric(kind: AlgebraKind, r: usize, k: &[f64]) -> Result<()> {
    if r != 3 {
        return Err(Error::InvalidAlgebra(format!(
            "{kind:?} requires a 3-dimensional metric, got r = {r}"
        )));
    }
    for i in 0..3 {
        for j in 0..3 {
            if i != j && k[i * 3 + j] != 0.0 {
                return Err(Error::InvalidAlgebra(format!(
                    "{kind:?} requires a diagonal metric"
                )));
            }
        }
    }
    let negatives = (0..3).filter(|&i| k[i * 3 + i] < 0.0).count();
    let expected = if kind == AlgebraKind::So3 { 0 } else { 1 };
    if negatives != expected {
        return Err(Error::InvalidAlgebra(format!(
            "{kind:?} requires {expected} negative metric entries, got {negatives}"
        )));
    }
    Ok(())
}

/// Max-abs of `C^μ_{ρν} + C^μ_{νρ}`.
pub fn bracket_antisymmetry_residual(s: &LieAlgebraData) -> f64 {
    let r = s.r;
    let mut worst: f64 = 0.0;
    for mu in 0..r {
        for rho in 0..r {
            for nu in 0..r {
                worst = worst.max((s.c(mu, rho, nu) + s.c(mu, nu, rho)).abs());
            }
        }
    }
    worst
}

/// Max-abs of the Jacobi cyclic sum
/// `C^μ_{σλ}C^σ_{ρν} + C^μ_{σρ}C^σ_{νλ} + C^μ_{σν}C^σ_{λρ}`.
pub fn jacobi_residual(s: &LieAlgebraData) -> f64 {
    let r = s.r;
    let mut worst: f64 = 0.0;
    for mu in 0..r {
        for lambda in 0..r {
            for rho in 0..r {
                for nu in 0..r {
                    let mut sum = 0.0;
                    for sigma in 0..r {
                        sum += s.c(mu, sigma, lambda) * s.c(sigma, rho, nu)
                            + s.c(mu, sigma, rho) * s.c(sigma, nu, lambda)
                            + s.c(mu, sigma, nu) * s.c(sigma, lambda, rho);
                    }
                    worst = worst.max(sum.abs());
                }
            }
        }
    }
    worst
}

/// Max-abs of `T_{ρμσ} + T_{ρσμ}` where `T_{ρμσ} = C^λ_{ρμ} K_{λσ}`.
pub fn ad_invariance_residual(s: &LieAlgebraData) -> f64 {
    let r = s.r;
    let t = |rho: usize, mu: usize, sigma: usize| -> f64 {
        (0..r).map(|l| s.c(l, rho, mu) * s.k(l, sigma)).sum()
    };
    let mut worst: f64 = 0.0;
    for rho in 0..r {
        for mu in 0..r {
            for sigma in 0..r {
                worst = worst.max((t(rho, mu, sigma) + t(rho, sigma, mu)).abs());
            }
        }
    }
    worst
}

/// Max over the three index pairs of the antisymmetry defect of the
/// lowered tensor `C_{σλμ} = C^ν_{λμ} K_{νσ}`.
pub fn total_antisymmetry_residual(s: &LieAlgebraData) -> f64 {
    let r = s.r;
    let lowered = |sigma: usize, lambda: usize, mu: usize| -> f64 {
        (0..r).map(|nu| s.c(nu, lambda, mu) * s.k(nu, sigma)).sum()
    };
    let mut worst: f64 = 0.0;
    for a in 0..r {
        for b in 0..r {
            for c in 0..r {
                let v = lowered(a, b, c);
                worst = worst
                    .max((v + lowered(b, a, c)).abs())
                    .max((v + lowered(a, c, b)).abs())
                    .max((v + lowered(c, b, a)).abs());
            }
        }
    }
    worst
}
