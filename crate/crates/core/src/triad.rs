//! The (3+3) dictionary between Yang–Mills phase-space coordinates and
//! Einstein–Cartan variables: triads `e^ν_p`, spin connections `ω_{iβα}`,
//! their curvature, the field equations in the new variables and the
//! torsion-free spin connection of a triad jet.
//!
//! `ε` is the plain permutation symbol with `ε_{012} = ε^{012} = +1`. The mixed
//! spin connection is `ω_i^μ_σ = K^{μν} ω_{iνσ}`.

use nalgebra::Matrix3;

use crate::algebra::{levi_civita, LieAlgebraData};
use crate::connection::{check_compat, check_grid, Curvature, GaugeField};
use crate::dynamics::{BaseMetric, Momentum};
use crate::error::{Error, Result};
use crate::lattice::{gradient, pair_index, pairs, signed_pair, LatticeField, Scheme, Shape, Slot};

/// Lower bound on `|det e|` where the triad is inverted.
pub const TRIAD_DET_MIN: f64 = 1e-8;

lattice_wrapper!(
    /// Triad `e^ν_p`, component `nu * 3 + p`.
    TriadData,
    |r, m| Shape::new(vec![Slot::Index(r), Slot::Index(m)])
);

lattice_wrapper!(
    /// Spin connection `ω_{iβα}`, packed `β < α`, component `i * 3 + pair`.
    SpinConnectionData,
    |r, m| Shape::new(vec![Slot::Index(m), Slot::Pair(r)])
);

impl SpinConnectionData {
    /// Signed lookup `ω_{iβα}`.
    pub fn get(&self, node: usize, i: usize, beta: usize, alpha: usize) -> f64 {
        self.values().get(node, &[i, beta, alpha])
    }
}

/// Layout of the spin curvature `R_{ijλσ}`: packed in `(i, j)` and in `(λ, σ)`.
pub fn spin_curvature_layout() -> Shape {
    Shape::new(vec![Slot::Pair(3), Slot::Pair(3)])
}

fn require_3d(m: usize, r: usize) -> Result<()> {
    if m != 3 || r != 3 {
        return Err(Error::NotThreeDimensional { m, r });
    }
    Ok(())
}

/// Full `ω_{iβα}` (27 entries, `(i * 3 + beta) * 3 + alpha`) from the packed block.
pub fn unpack_spin(w: &[f64]) -> [f64; 27] {
    let mut out = [0.0; 27];
    for i in 0..3 {
        for (p, (b, a)) in pairs(3).into_iter().enumerate() {
            out[(i * 3 + b) * 3 + a] = w[i * 3 + p];
            out[(i * 3 + a) * 3 + b] = -w[i * 3 + p];
        }
    }
    out
}

/// Mixed form `ω_i^μ_σ = K^{μν} ω_{iνσ}` from the full lowered form.
pub fn raise_spin(full: &[f64; 27], s: &LieAlgebraData) -> [f64; 27] {
    let mut out = [0.0; 27];
    for i in 0..3 {
        for mu in 0..3 {
            for sg in 0..3 {
                let mut acc = 0.0;
                for nu in 0..3 {
                    acc += s.k_inv(mu, nu) * full[(i * 3 + nu) * 3 + sg];
                }
                out[(i * 3 + mu) * 3 + sg] = acc;
            }
        }
    }
    out
}

/// `e^ν_p = ½ K^{μν} Π^{ij}_μ ε_{pij}` at one node.
pub fn to_triad_at(pi: &[f64], s: &LieAlgebraData, out: &mut [f64]) {
    for nu in 0..3 {
        for p in 0..3 {
            let mut acc = 0.0;
            for (q, (i, j)) in pairs(3).into_iter().enumerate() {
                let eps = levi_civita(p, i, j);
                if eps == 0.0 {
                    continue;
                }
                for mu in 0..3 {
                    // both orderings of (i, j) contribute equally
                    acc += s.k_inv(mu, nu) * pi[q * 3 + mu] * eps;
                }
            }
            out[nu * 3 + p] = acc;
        }
    }
}

/// `Π^{ij}_μ = K_{μν} e^ν_p ε^{pij}` at one node.
pub fn from_triad_at(e: &[f64], s: &LieAlgebraData, out: &mut [f64]) {
    for (q, (i, j)) in pairs(3).into_iter().enumerate() {
        for mu in 0..3 {
            let mut acc = 0.0;
            for nu in 0..3 {
                for p in 0..3 {
                    acc += s.k(mu, nu) * e[nu * 3 + p] * levi_civita(p, i, j);
                }
            }
            out[q * 3 + mu] = acc;
        }
    }
}

/// `ω_{iβα} = ½√K ε_{μαβ} a^μ_i` at one node.
pub fn to_spin_at(a: &[f64], s: &LieAlgebraData, out: &mut [f64]) {
    let half = 0.5 * s.sqrt_k();
    for i in 0..3 {
        for (q, (b, al)) in pairs(3).into_iter().enumerate() {
            let mut acc = 0.0;
            for mu in 0..3 {
                acc += levi_civita(mu, al, b) * a[mu * 3 + i];
            }
            out[i * 3 + q] = half * acc;
        }
    }
}

/// `a^μ_i = (1/√K) ε^{μσλ} ω_{iλσ}` at one node.
pub fn from_spin_at(w: &[f64], s: &LieAlgebraData, out: &mut [f64]) {
    let full = unpack_spin(w);
    for mu in 0..3 {
        for i in 0..3 {
            let mut acc = 0.0;
            for sg in 0..3 {
                for l in 0..3 {
                    acc += levi_civita(mu, sg, l) * full[(i * 3 + l) * 3 + sg];
                }
            }
            out[mu * 3 + i] = acc / s.sqrt_k();
        }
    }
}

pub fn to_triad(pi: &Momentum, s: &LieAlgebraData) -> Result<TriadData> {
    require_3d(pi.grid().dim(), pi.r())?;
    check_compat(pi.r(), s, "to_triad")?;
    Ok(TriadData::from_node_fn(pi.grid(), 3, |node, out| to_triad_at(pi.at(node), s, out)))
}

pub fn from_triad(e: &TriadData, s: &LieAlgebraData) -> Result<Momentum> {
    require_3d(e.grid().dim(), e.r())?;
    check_compat(e.r(), s, "from_triad")?;
    Ok(Momentum::from_node_fn(e.grid(), 3, |node, out| from_triad_at(e.at(node), s, out)))
}

pub fn to_spin_connection(a: &GaugeField, s: &LieAlgebraData) -> Result<SpinConnectionData> {
    require_3d(a.grid().dim(), a.r())?;
    check_compat(a.r(), s, "to_spin_connection")?;
    Ok(SpinConnectionData::from_node_fn(a.grid(), 3, |node, out| to_spin_at(a.at(node), s, out)))
}

pub fn from_spin_connection(w: &SpinConnectionData, s: &LieAlgebraData) -> Result<GaugeField> {
    require_3d(w.grid().dim(), w.r())?;
    check_compat(w.r(), s, "from_spin_connection")?;
    Ok(GaugeField::from_node_fn(w.grid(), 3, |node, out| from_spin_at(w.at(node), s, out)))
}

/// Quadratic spin identity residual at one point: max over `(i, j, ν)` of
/// `|−½ ε^{ραβ} ω_{jνρ} ω_{iβα} − K_{μν} ε^{μσλ} ω_{iλη} ω_j^η_σ|`.
pub fn prop55_residual_at(w: &[f64], s: &LieAlgebraData) -> f64 {
    let full = unpack_spin(w);
    let mixed = raise_spin(&full, s);
    let om = |i: usize, b: usize, a: usize| full[(i * 3 + b) * 3 + a];
    let mx = |i: usize, up: usize, lo: usize| mixed[(i * 3 + up) * 3 + lo];
    let mut worst = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            for nu in 0..3 {
                let mut lhs = 0.0;
                for rho in 0..3 {
                    for al in 0..3 {
                        for be in 0..3 {
                            lhs -= 0.5 * levi_civita(rho, al, be) * om(j, nu, rho) * om(i, be, al);
                        }
                    }
                }
                let mut rhs = 0.0;
                for mu in 0..3 {
                    let kmn = s.k(mu, nu);
                    if kmn == 0.0 {
                        continue;
                    }
                    for sg in 0..3 {
                        for l in 0..3 {
                            let eps = levi_civita(mu, sg, l);
                            if eps == 0.0 {
                                continue;
                            }
                            for eta in 0..3 {
                                rhs += kmn * eps * om(i, l, eta) * mx(j, eta, sg);
                            }
                        }
                    }
                }
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    worst
}

/// Max of [`prop55_residual_at`] over the lattice.
pub fn prop55_residual(w: &SpinConnectionData, s: &LieAlgebraData) -> Result<f64> {
    require_3d(w.grid().dim(), w.r())?;
    check_compat(w.r(), s, "prop55_residual")?;
    let per = LatticeField::from_node_fn(w.grid(), Shape::scalar(), |node, out| {
        out[0] = prop55_residual_at(w.at(node), s);
    });
    Ok(crate::lattice::reduce(&per, crate::lattice::Norm::MaxAbs))
}

/// Quadratic part `ω_{iλη} ω_j^η_σ − ω_{jλη} ω_i^η_σ` of the spin curvature for one ordered `(i, j)`.
fn spin_commutator(full: &[f64; 27], mixed: &[f64; 27], i: usize, j: usize, l: usize, sg: usize) -> f64 {
    let mut acc = 0.0;
    for eta in 0..3 {
        acc += full[(i * 3 + l) * 3 + eta] * mixed[(j * 3 + eta) * 3 + sg]
            - full[(j * 3 + l) * 3 + eta] * mixed[(i * 3 + eta) * 3 + sg];
    }
    acc
}

/// `R_{ijλσ} = ∂_iω_{jλσ} − ∂_jω_{iλσ} + ω_{iλη}ω_j^η_σ − ω_{jλη}ω_i^η_σ`.
pub fn spin_curvature(w: &SpinConnectionData, s: &LieAlgebraData, scheme: Scheme) -> Result<LatticeField> {
    require_3d(w.grid().dim(), w.r())?;
    check_compat(w.r(), s, "spin_curvature")?;
    let dw = gradient(w.values(), scheme);
    Ok(LatticeField::from_node_fn(w.grid(), spin_curvature_layout(), |node, out| {
        let full = unpack_spin(w.at(node));
        let mixed = raise_spin(&full, s);
        for (pij, (i, j)) in pairs(3).into_iter().enumerate() {
            for (pls, (l, sg)) in pairs(3).into_iter().enumerate() {
                out[pij * 3 + pls] = dw[i].at(node)[j * 3 + pls] - dw[j].at(node)[i * 3 + pls]
                    + spin_commutator(&full, &mixed, i, j, l, sg);
            }
        }
    }))
}

/// The image of a Yang–Mills curvature under the dictionary,
/// `R_{ijλσ} = ½√K ε_{μσλ} F^μ_{ij}`.
pub fn spin_curvature_from_curvature(f: &Curvature, s: &LieAlgebraData) -> Result<LatticeField> {
    require_3d(f.grid().dim(), f.r())?;
    check_compat(f.r(), s, "spin_curvature_from_curvature")?;
    let half = 0.5 * s.sqrt_k();
    Ok(LatticeField::from_node_fn(f.grid(), spin_curvature_layout(), |node, out| {
        let fv = f.at(node);
        for pij in 0..3 {
            for (pls, (l, sg)) in pairs(3).into_iter().enumerate() {
                let mut acc = 0.0;
                for mu in 0..3 {
                    acc += levi_civita(mu, sg, l) * fv[mu * 3 + pij];
                }
                out[pij * 3 + pls] = half * acc;
            }
        }
    }))
}

/// Free-field `∂H/∂e^ν_p = −e^μ_k K_{μν} g^{kp} √g σ(g)`, triad layout.
pub fn dh_de(e: &TriadData, g: &BaseMetric, s: &LieAlgebraData) -> Result<LatticeField> {
    require_3d(e.grid().dim(), e.r())?;
    check_grid(e.grid(), g.grid())?;
    Ok(LatticeField::from_node_fn(e.grid(), TriadData::layout(3, 3), |node, out| {
        let ev = e.at(node);
        let ginv = g.ginv_at(node);
        let w = g.sqrtg_at(node) * g.sigma();
        for nu in 0..3 {
            for p in 0..3 {
                let mut acc = 0.0;
                for mu in 0..3 {
                    for k in 0..3 {
                        acc += ev[mu * 3 + k] * s.k(mu, nu) * ginv[k * 3 + p];
                    }
                }
                out[nu * 3 + p] = -acc * w;
            }
        }
    }))
}

/// Free-field Hamiltonian in triad variables, `H = −½ G_{kh} g^{kh} √g σ(g)`.
pub fn triad_hamiltonian_density(e: &TriadData, g: &BaseMetric, s: &LieAlgebraData) -> Result<LatticeField> {
    require_3d(e.grid().dim(), e.r())?;
    check_grid(e.grid(), g.grid())?;
    Ok(LatticeField::from_node_fn(e.grid(), Shape::scalar(), |node, out| {
        let ev = e.at(node);
        let ginv = g.ginv_at(node);
        let mut acc = 0.0;
        for k in 0..3 {
            for h in 0..3 {
                let mut gkh = 0.0;
                for mu in 0..3 {
                    for nu in 0..3 {
                        gkh += ev[mu * 3 + k] * ev[nu * 3 + h] * s.k(mu, nu);
                    }
                }
                acc += gkh * ginv[k * 3 + h];
            }
        }
        out[0] = -0.5 * acc * g.sqrtg_at(node) * g.sigma();
    }))
}

/// Hamilton–De Donder equations in triad variables with the free-field hooks
/// `∂H/∂e = dh_de`, `∂H/∂ω = 0`:
/// `ρ_e^{(ν,p)} = −∂H/∂e^ν_p − ε^{pij} ε^{μσλ} (K_{μν}/√K)(∂_jω_{iλσ} + ω_{jλη}ω_i^η_σ)`,
/// `ρ_ω^{(i,λσ)} = −∂H/∂ω_{iλσ} + (2K_{μν}/√K) ε^{pij} ε^{μσλ} (∂_j e^ν_p + ω_j^ν_γ e^γ_p)`.
pub fn ec_residuals(
    e: &TriadData,
    w: &SpinConnectionData,
    g: &BaseMetric,
    s: &LieAlgebraData,
    scheme: Scheme,
) -> Result<(LatticeField, LatticeField)> {
    require_3d(e.grid().dim(), e.r())?;
    require_3d(w.grid().dim(), w.r())?;
    check_compat(e.r(), s, "ec_residuals")?;
    check_grid(e.grid(), w.grid())?;
    check_grid(e.grid(), g.grid())?;
    let dh = dh_de(e, g, s)?;
    let dw = gradient(w.values(), scheme);
    let de = gradient(e.values(), scheme);
    let sk = s.sqrt_k();
    let rho_e = LatticeField::from_node_fn(e.grid(), TriadData::layout(3, 3), |node, out| {
        let full = unpack_spin(w.at(node));
        let mixed = raise_spin(&full, s);
        let dfull: Vec<[f64; 27]> = (0..3).map(|j| unpack_spin(dw[j].at(node))).collect();
        for nu in 0..3 {
            for p in 0..3 {
                let mut acc = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let epij = levi_civita(p, i, j);
                        if epij == 0.0 {
                            continue;
                        }
                        for mu in 0..3 {
                            let kmn = s.k(mu, nu);
                            if kmn == 0.0 {
                                continue;
                            }
                            for sg in 0..3 {
                                for l in 0..3 {
                                    let emsl = levi_civita(mu, sg, l);
                                    if emsl == 0.0 {
                                        continue;
                                    }
                                    let mut quad = 0.0;
                                    for eta in 0..3 {
                                        quad += full[(j * 3 + l) * 3 + eta] * mixed[(i * 3 + eta) * 3 + sg];
                                    }
                                    acc += epij * emsl * kmn / sk * (dfull[j][(i * 3 + l) * 3 + sg] + quad);
                                }
                            }
                        }
                    }
                }
                out[nu * 3 + p] = -dh.at(node)[nu * 3 + p] - acc;
            }
        }
    });
    let rho_w = LatticeField::from_node_fn(e.grid(), SpinConnectionData::layout(3, 3), |node, out| {
        let ev = e.at(node);
        let mixed = raise_spin(&unpack_spin(w.at(node)), s);
        // D_j e^ν_p = ∂_j e^ν_p + ω_j^ν_γ e^γ_p
        let mut cov = [[0.0; 9]; 3];
        for (j, c) in cov.iter_mut().enumerate() {
            for nu in 0..3 {
                for p in 0..3 {
                    let mut acc = de[j].at(node)[nu * 3 + p];
                    for gm in 0..3 {
                        acc += mixed[(j * 3 + nu) * 3 + gm] * ev[gm * 3 + p];
                    }
                    c[nu * 3 + p] = acc;
                }
            }
        }
        for i in 0..3 {
            for (q, (l, sg)) in pairs(3).into_iter().enumerate() {
                let mut acc = 0.0;
                for mu in 0..3 {
                    let emsl = levi_civita(mu, sg, l);
                    if emsl == 0.0 {
                        continue;
                    }
                    for nu in 0..3 {
                        let kmn = s.k(mu, nu);
                        if kmn == 0.0 {
                            continue;
                        }
                        for p in 0..3 {
                            for (j, c) in cov.iter().enumerate() {
                                let epij = levi_civita(p, i, j);
                                if epij != 0.0 {
                                    acc += 2.0 * kmn / sk * epij * emsl * c[nu * 3 + p];
                                }
                            }
                        }
                    }
                }
                out[i * 3 + q] = acc;
            }
        }
    });
    Ok((rho_e, rho_w))
}

/// The constant linear map taking Hamilton–De Donder residuals to the triad residuals:
/// `ρ_e^{(ν,p)} = Σ_{i<j} ε^{pij} K_{μν} R1^μ_{ij}` and
/// `ρ_ω^{(i,λσ)} = (2/√K) ε^{μσλ} R2^i_μ`.
pub fn ec_image_of_hdd(r1: &Curvature, r2: &LatticeField, s: &LieAlgebraData) -> Result<(LatticeField, LatticeField)> {
    require_3d(r1.grid().dim(), r1.r())?;
    check_compat(r1.r(), s, "ec_image_of_hdd")?;
    if r2.shape() != &GaugeField::layout(3, 3) {
        return Err(Error::ShapeMismatch("R2 must have the potential layout".into()));
    }
    let rho_e = LatticeField::from_node_fn(r1.grid(), TriadData::layout(3, 3), |node, out| {
        let rv = r1.at(node);
        for nu in 0..3 {
            for p in 0..3 {
                let mut acc = 0.0;
                for (q, (i, j)) in pairs(3).into_iter().enumerate() {
                    for mu in 0..3 {
                        acc += levi_civita(p, i, j) * s.k(mu, nu) * rv[mu * 3 + q];
                    }
                }
                out[nu * 3 + p] = acc;
            }
        }
    });
    let rho_w = LatticeField::from_node_fn(r1.grid(), SpinConnectionData::layout(3, 3), |node, out| {
        let rv = r2.at(node);
        for i in 0..3 {
            for (q, (l, sg)) in pairs(3).into_iter().enumerate() {
                let mut acc = 0.0;
                for mu in 0..3 {
                    acc += levi_civita(mu, sg, l) * rv[mu * 3 + i];
                }
                out[i * 3 + q] = 2.0 / s.sqrt_k() * acc;
            }
        }
    });
    Ok((rho_e, rho_w))
}

/// Terms of the Einstein-like free-field equation, triad layout:
/// `(½ e^μ_k K_{μν} g^{kp} √g σ(g), ε^{pij} ε_{νλσ} R_{ij}^{λσ} √K σ(K))`.
pub fn einstein_terms(
    e: &TriadData,
    w: &SpinConnectionData,
    g: &BaseMetric,
    s: &LieAlgebraData,
    scheme: Scheme,
) -> Result<(LatticeField, LatticeField)> {
    let cosmo = dh_de(e, g, s)?.scale(-0.5);
    let r = spin_curvature(w, s, scheme)?;
    let factor = s.sqrt_k() * s.sigma_k();
    let curv = LatticeField::from_node_fn(e.grid(), TriadData::layout(3, 3), |node, out| {
        let rv = r.at(node);
        let rfull = |i: usize, j: usize, a: usize, b: usize| match (signed_pair(i, j, 3), signed_pair(a, b, 3)) {
            (Some((p1, s1)), Some((p2, s2))) => s1 * s2 * rv[p1 * 3 + p2],
            _ => 0.0,
        };
        for nu in 0..3 {
            for p in 0..3 {
                let mut acc = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let epij = levi_civita(p, i, j);
                        if epij == 0.0 {
                            continue;
                        }
                        for l in 0..3 {
                            for sg in 0..3 {
                                let enls = levi_civita(nu, l, sg);
                                if enls == 0.0 {
                                    continue;
                                }
                                // R_{ij}^{λσ} = R_{ijμκ} K^{μλ} K^{κσ}
                                let mut raised = 0.0;
                                for mu in 0..3 {
                                    for ka in 0..3 {
                                        raised += rfull(i, j, mu, ka) * s.k_inv(mu, l) * s.k_inv(ka, sg);
                                    }
                                }
                                acc += epij * enls * raised;
                            }
                        }
                    }
                }
                out[nu * 3 + p] = acc * factor;
            }
        }
    });
    Ok((cosmo, curv))
}

/// Free-field equations as printed:
/// torsion-like `2K_{μν} ε^{pij} ε^{μσλ} (∂_j e^ν_p + ω_j^ν_γ e^γ_p)` (spin layout) and
/// Einstein-like `½ e K g √g σ(g) − ε^{pij} ε_{νλσ} R_{ij}^{λσ} √K σ(K)` (triad layout).
pub fn free_field_residuals(
    e: &TriadData,
    w: &SpinConnectionData,
    g: &BaseMetric,
    s: &LieAlgebraData,
    scheme: Scheme,
) -> Result<(LatticeField, LatticeField)> {
    let (_, rho_w) = ec_residuals(e, w, g, s, scheme)?;
    let torsion = rho_w.scale(s.sqrt_k());
    let (cosmo, curv) = einstein_terms(e, w, g, s, scheme)?;
    Ok((torsion, cosmo.sub(&curv)?))
}

/// Induced metric `G_{hk} = K_{μν} e^μ_k e^ν_h`.
pub fn induced_metric(e: &TriadData, s: &LieAlgebraData) -> Result<BaseMetric> {
    require_3d(e.grid().dim(), e.r())?;
    check_compat(e.r(), s, "induced_metric")?;
    let field = LatticeField::from_node_fn(e.grid(), Shape::new(vec![Slot::Index(3), Slot::Index(3)]), |node, out| {
        let ev = e.at(node);
        for h in 0..3 {
            for k in 0..3 {
                let mut acc = 0.0;
                for mu in 0..3 {
                    for nu in 0..3 {
                        acc += s.k(mu, nu) * ev[mu * 3 + k] * ev[nu * 3 + h];
                    }
                }
                out[h * 3 + k] = acc;
            }
        }
    });
    BaseMetric::from_field(field)
}

/// Point values of a triad and its antisymmetrized derivatives:
/// `e^μ_i` at `mu * 3 + i` and `E^μ_{ij} = ½(∂_j e^μ_i − ∂_i e^μ_j)` at `mu * 3 + pair`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriadJetSample {
    pub e: [f64; 9],
    pub big_e: [f64; 9],
}

impl TriadJetSample {
    /// Largest condition number accepted by [`TriadJetSample::random`].
    pub const MAX_CONDITION: f64 = 10.0;

    /// Seeded sample with entries of `E` in `[-1, 1)` and `e = 2I + U(-1, 1)`,
    /// redrawn until the condition number of `e` is at most [`Self::MAX_CONDITION`].
    pub fn random<R: rand::Rng>(rng: &mut R) -> TriadJetSample {
        loop {
            let mut jet = TriadJetSample {
                e: [0.0; 9],
                big_e: [0.0; 9],
            };
            for (k, v) in jet.e.iter_mut().enumerate() {
                *v = rng.gen_range(-1.0..1.0) + if k % 4 == 0 { 2.0 } else { 0.0 };
            }
            for v in jet.big_e.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let sv = Matrix3::from_row_slice(&jet.e).singular_values();
            if sv.min() > 0.0 && sv.max() / sv.min() <= Self::MAX_CONDITION {
                return jet;
            }
        }
    }

    fn big_e_full(&self, mu: usize, i: usize, j: usize) -> f64 {
        match signed_pair(i, j, 3) {
            Some((q, sg)) => sg * self.big_e[mu * 3 + q],
            None => 0.0,
        }
    }
}

fn triad_matrix(e: &[f64; 9]) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    let m = Matrix3::from_row_slice(e);
    let det = m.determinant();
    if det.abs() < TRIAD_DET_MIN || !det.is_finite() {
        return Err(Error::SingularTriad { det });
    }
    let inv = m.try_inverse().ok_or(Error::SingularTriad { det })?;
    Ok((m, inv))
}

/// Torsion-free spin connection of a triad jet in mixed form,
/// `ω_i^μ_ν` at `(i * 3 + mu) * 3 + nu`:
/// `ω_i^μ_ν = e^μ_p (Σ^p_{ji} − Σ_j^p_i + Σ_{ij}^p) e^j_ν`, `Σ^p_{ji} = e^p_λ E^λ_{ij}`,
/// base indices moved with `G = K e e`.
pub fn spin_from_triad_jet(jet: &TriadJetSample, s: &LieAlgebraData) -> Result<[f64; 27]> {
    if s.dim() != 3 {
        return Err(Error::NotThreeDimensional { m: 3, r: s.dim() });
    }
    let (e, einv) = triad_matrix(&jet.e)?;
    let k = Matrix3::from_fn(|a, b| s.k(a, b));
    // fully lowered Σ_{pab} = G_{pq} Σ^q_{ab} = e^μ_p K_{μλ} E^λ_{ba}
    let ke = k * e;
    let mut low = [0.0; 27];
    for p in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for l in 0..3 {
                    acc += ke[(l, p)] * jet.big_e_full(l, b, a);
                }
                low[(p * 3 + a) * 3 + b] = acc;
            }
        }
    }
    let sl = |p: usize, a: usize, b: usize| low[(p * 3 + a) * 3 + b];
    // K_{μκ} e^κ_p G^{pq} = e^q_μ, so the lowered connection is
    // ω_{iμν} = e^q_μ (Σ_{qji} − Σ_{jqi} + Σ_{ijq}) e^j_ν
    let mut lowered = [0.0; 27];
    for i in 0..3 {
        for mu in 0..3 {
            for nu in 0..3 {
                let mut acc = 0.0;
                for q in 0..3 {
                    for j in 0..3 {
                        acc += einv[(q, mu)] * (sl(q, j, i) - sl(j, q, i) + sl(i, j, q)) * einv[(j, nu)];
                    }
                }
                lowered[(i * 3 + mu) * 3 + nu] = acc;
            }
        }
    }
    let out = raise_spin(&lowered, s);
    Ok(out)
}

/// Lowered packed spin connection `ω_{iβα}` (`i * 3 + pair`) from the mixed form,
/// antisymmetrizing the lowered matrix.
pub fn lower_spin(mixed: &[f64; 27], s: &LieAlgebraData) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for (q, (b, a)) in pairs(3).into_iter().enumerate() {
            let mut ba = 0.0;
            let mut ab = 0.0;
            for sg in 0..3 {
                ba += s.k(b, sg) * mixed[(i * 3 + sg) * 3 + a];
                ab += s.k(a, sg) * mixed[(i * 3 + sg) * 3 + b];
            }
            out[i * 3 + q] = 0.5 * (ba - ab);
        }
    }
    out
}

/// Max-abs of `ω_{iμν} + ω_{iνμ}` for a mixed spin connection.
pub fn metricity_residual(mixed: &[f64; 27], s: &LieAlgebraData) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..3 {
        for mu in 0..3 {
            for nu in 0..3 {
                let mut acc = 0.0;
                for sg in 0..3 {
                    acc += s.k(mu, sg) * mixed[(i * 3 + sg) * 3 + nu] + s.k(nu, sg) * mixed[(i * 3 + sg) * 3 + mu];
                }
                worst = worst.max(acc.abs());
            }
        }
    }
    worst
}

/// Max-abs of `2E^μ_{ij} − ω_i^μ_ν e^ν_j + ω_j^μ_ν e^ν_i`.
pub fn torsion_residual(jet: &TriadJetSample, mixed: &[f64; 27]) -> f64 {
    let mut worst = 0.0_f64;
    for mu in 0..3 {
        for (i, j) in pairs(3) {
            let mut acc = 2.0 * jet.big_e[mu * 3 + pair_index(i, j, 3)];
            for nu in 0..3 {
                acc -= mixed[(i * 3 + mu) * 3 + nu] * jet.e[nu * 3 + j];
                acc += mixed[(j * 3 + mu) * 3 + nu] * jet.e[nu * 3 + i];
            }
            worst = worst.max(acc.abs());
        }
    }
    worst
}

/// Spin connection of a triad field, with `E` taken from finite differences.
pub fn spin_from_triad_field(e: &TriadData, s: &LieAlgebraData, scheme: Scheme) -> Result<SpinConnectionData> {
    require_3d(e.grid().dim(), e.r())?;
    let de = gradient(e.values(), scheme);
    let n = e.grid().node_count();
    let mut data = vec![0.0; n * 9];
    for node in 0..n {
        let mut jet = TriadJetSample {
            e: [0.0; 9],
            big_e: [0.0; 9],
        };
        jet.e.copy_from_slice(e.at(node));
        for mu in 0..3 {
            for (q, (i, j)) in pairs(3).into_iter().enumerate() {
                jet.big_e[mu * 3 + q] = 0.5 * (de[j].at(node)[mu * 3 + i] - de[i].at(node)[mu * 3 + j]);
            }
        }
        let mixed = spin_from_triad_jet(&jet, s)?;
        data[node * 9..(node + 1) * 9].copy_from_slice(&lower_spin(&mixed, s));
    }
    SpinConnectionData::from_field(
        LatticeField::from_data(e.grid(), SpinConnectionData::layout(3, 3), data)?,
        3,
    )
}
