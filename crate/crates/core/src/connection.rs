//! Gauge potentials `a^μ_i`, curvature `F^μ_{ij}`, the contact residual, the
//! covariant divergence of a momentum field and the `A ↔ F` coordinate change.
//!
//! Curvature convention:
//! `F^μ_{ij} = ∂_i a^μ_j − ∂_j a^μ_i − a^ν_i a^ρ_j C^μ_{ρν}`.

use crate::algebra::LieAlgebraData;
use crate::dynamics::Momentum;
use crate::error::{Error, Result};
use crate::lattice::{gradient, pair_count, pairs, signed_pair, LatticeField, Scheme, Shape, Slot};

lattice_wrapper!(
    /// Potential `a^μ_i`, component `mu * m + i`.
    GaugeField,
    |r, m| Shape::new(vec![Slot::Index(r), Slot::Index(m)])
);

lattice_wrapper!(
    /// Field strength `F^μ_{ij}`, packed `i < j`, component `mu * P + pair`.
    Curvature,
    |r, m| Shape::new(vec![Slot::Index(r), Slot::Pair(m)])
);

impl GaugeField {
    pub fn get(&self, node: usize, mu: usize, i: usize) -> f64 {
        self.values().at(node)[mu * self.grid().dim() + i]
    }
}

impl Curvature {
    /// Signed lookup `F^μ_{ij}` for any ordered pair.
    pub fn get(&self, node: usize, mu: usize, i: usize, j: usize) -> f64 {
        self.values().get(node, &[mu, i, j])
    }
}

pub(crate) fn check_compat(r: usize, s: &LieAlgebraData, what: &str) -> Result<()> {
    if r != s.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: field has r = {r}, algebra has r = {}",
            s.dim()
        )));
    }
    Ok(())
}

pub(crate) fn check_grid(a: &crate::lattice::Grid, b: &crate::lattice::Grid) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch("fields live on different grids".into()));
    }
    Ok(())
}

/// `T^μ_{ij} = a^ν_i a^ρ_j C^μ_{ρν}` for one node, packed `i < j`.
pub(crate) fn commutator_term(a: &[f64], m: usize, s: &LieAlgebraData, out: &mut [f64]) {
    let r = s.dim();
    let np = pair_count(m);
    for (p, (i, j)) in pairs(m).into_iter().enumerate() {
        for mu in 0..r {
            let mut acc = 0.0;
            for nu in 0..r {
                let ani = a[nu * m + i];
                if ani == 0.0 {
                    continue;
                }
                for rho in 0..r {
                    acc += ani * a[rho * m + j] * s.c(mu, rho, nu);
                }
            }
            out[mu * np + p] = acc;
        }
    }
}

/// Pointwise curvature from the potential and its derivatives,
/// `da[k][mu * m + i] = ∂_k a^μ_i`.
pub fn curvature_at(a: &[f64], da: &[&[f64]], s: &LieAlgebraData, out: &mut [f64]) {
    let m = da.len();
    let np = pair_count(m);
    commutator_term(a, m, s, out);
    for (p, (i, j)) in pairs(m).into_iter().enumerate() {
        for mu in 0..s.dim() {
            out[mu * np + p] = da[i][mu * m + j] - da[j][mu * m + i] - out[mu * np + p];
        }
    }
}

/// Curvature with finite-difference derivatives.
pub fn curvature(a: &GaugeField, s: &LieAlgebraData, scheme: Scheme) -> Result<Curvature> {
    check_compat(a.r(), s, "curvature")?;
    let grid = a.grid();
    let da = gradient(a.values(), scheme);
    Ok(Curvature::from_node_fn(grid, a.r(), |node, out| {
        let d: Vec<&[f64]> = da.iter().map(|f| f.at(node)).collect();
        curvature_at(a.at(node), &d, s, out);
    }))
}

/// Holonomy residual `F − curvature(a)`.
pub fn contact_residual(a: &GaugeField, f: &Curvature, s: &LieAlgebraData, scheme: Scheme) -> Result<Curvature> {
    check_grid(a.grid(), f.grid())?;
    check_compat(f.r(), s, "contact_residual")?;
    f.sub(&curvature(a, s, scheme)?)
}

/// `D_jΠ^{ji}_μ = ∂_jΠ^{ji}_μ − Π^{ji}_λ a^γ_j C^λ_{γμ}`, returned with the
/// potential layout `(μ, i)`.
pub fn covariant_divergence(
    pi: &Momentum,
    a: &GaugeField,
    s: &LieAlgebraData,
    scheme: Scheme,
) -> Result<LatticeField> {
    check_grid(a.grid(), pi.grid())?;
    check_compat(a.r(), s, "covariant_divergence")?;
    check_compat(pi.r(), s, "covariant_divergence")?;
    let grid = a.grid();
    let m = grid.dim();
    let r = s.dim();
    let dpi = gradient(pi.values(), scheme);
    Ok(LatticeField::from_node_fn(grid, GaugeField::layout(r, m), |node, out| {
        let p = pi.at(node);
        let av = a.at(node);
        for mu in 0..r {
            for i in 0..m {
                let mut acc = 0.0;
                for j in 0..m {
                    let Some((q, sign)) = signed_pair(j, i, m) else {
                        continue;
                    };
                    acc += sign * dpi[j].at(node)[q * r + mu];
                    for lambda in 0..r {
                        let pji = sign * p[q * r + lambda];
                        if pji == 0.0 {
                            continue;
                        }
                        for gamma in 0..r {
                            acc -= pji * av[gamma * m + j] * s.c(lambda, gamma, mu);
                        }
                    }
                }
                out[mu * m + i] = acc;
            }
        }
    }))
}

/// A-coordinates `A^μ_{pq}` (packed `p < q`) from `(F, a)`:
/// `A^μ_{ji} = ½(F^μ_{ij} − a^ν_j a^ρ_i C^μ_{ρν})`.
pub fn a_from_f_coordinates(f: &Curvature, a: &GaugeField, s: &LieAlgebraData) -> Result<LatticeField> {
    check_grid(a.grid(), f.grid())?;
    check_compat(f.r(), s, "a_from_f_coordinates")?;
    check_compat(a.r(), s, "a_from_f_coordinates")?;
    let m = a.grid().dim();
    let np = pair_count(m);
    Ok(LatticeField::from_node_fn(a.grid(), Curvature::layout(s.dim(), m), |node, out| {
        let fv = f.at(node);
        commutator_term(a.at(node), m, s, out);
        // With (j, i) = (p, q): F^μ_{qp} = −F^μ_{pq} and a^ν_p a^ρ_q C^μ_{ρν} = T^μ_{pq}.
        for mu in 0..s.dim() {
            for p in 0..np {
                let k = mu * np + p;
                out[k] = 0.5 * (-fv[k] - out[k]);
            }
        }
    }))
}

/// Inverse of [`a_from_f_coordinates`]: `F^μ_{ij} = 2A^μ_{ji} + a^ν_j a^ρ_i C^μ_{ρν}`.
pub fn f_from_a_coordinates(a_coords: &LatticeField, a: &GaugeField, s: &LieAlgebraData) -> Result<Curvature> {
    check_grid(a.grid(), a_coords.grid())?;
    check_compat(a.r(), s, "f_from_a_coordinates")?;
    let m = a.grid().dim();
    if a_coords.shape() != &Curvature::layout(s.dim(), m) {
        return Err(Error::ShapeMismatch("A-coordinates must have the curvature layout".into()));
    }
    let np = pair_count(m);
    Ok(Curvature::from_node_fn(a.grid(), s.dim(), |node, out| {
        let av = a_coords.at(node);
        commutator_term(a.at(node), m, s, out);
        // F_{pq} = 2A_{qp} + a_q a_p C = −2A_{pq} − T_{pq}.
        for k in 0..s.dim() * np {
            out[k] = -2.0 * av[k] - out[k];
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::LieAlgebraData;
    use crate::lattice::{pair_index, reduce, Grid, Norm};

    fn maxabs(f: &LatticeField) -> f64 {
        reduce(f, Norm::MaxAbs)
    }

    #[test]
    fn zero_potential_has_zero_curvature() {
        let g = Grid::cubic(3, 8).unwrap();
        let s = LieAlgebraData::so3();
        let f = curvature(&GaugeField::zeros(&g, 3), &s, Scheme::Order2).unwrap();
        assert_eq!(maxabs(f.values()), 0.0);
    }

    #[test]
    fn abelian_curl() {
        let s = LieAlgebraData::abelian(1);
        let err = |n: usize| {
            let g = Grid::cubic(3, n).unwrap();
            let a = GaugeField::from_coord_fn(&g, 1, |x, out| out[0] = x[1].sin());
            let f = curvature(&a, &s, Scheme::Order2).unwrap();
            let exact = Curvature::from_coord_fn(&g, 1, |x, out| out[pair_index(0, 1, 3)] = -x[1].cos());
            maxabs(f.sub(&exact).unwrap().values())
        };
        let (e16, e32) = (err(16), err(32));
        assert!(e16 < 0.05);
        assert!(((e16 / e32).log2() - 2.0).abs() < 0.1);
    }

    #[test]
    fn constant_potential_so3_commutator() {
        let g = Grid::cubic(3, 4).unwrap();
        let s = LieAlgebraData::so3();
        let a = GaugeField::from_node_fn(&g, 3, |_, out| {
            out[0] = 1.0; // a^0_0
            out[3 + 1] = 1.0; // a^1_1
        });
        let f = curvature(&a, &s, Scheme::Order4).unwrap();
        for node in 0..g.node_count() {
            // −a^0_0 a^1_1 C^2_{10} with C^2_{10} = −½
            assert_eq!(f.get(node, 2, 0, 1), 0.5);
            assert_eq!(f.get(node, 2, 1, 0), -0.5);
            for mu in 0..2 {
                for (i, j) in pairs(3) {
                    assert_eq!(f.get(node, mu, i, j), 0.0);
                }
            }
            assert_eq!(f.get(node, 2, 0, 2), 0.0);
            assert_eq!(f.get(node, 2, 1, 2), 0.0);
        }
    }

    #[test]
    fn contact_residual_examples() {
        let g = Grid::cubic(3, 8).unwrap();
        let s = LieAlgebraData::so3();
        let a = GaugeField::random(&g, 3, 1, 2, 1.0).unwrap();
        let f = curvature(&a, &s, Scheme::Order2).unwrap();
        assert_eq!(maxabs(contact_residual(&a, &f, &s, Scheme::Order2).unwrap().values()), 0.0);
        let z = Curvature::zeros(&g, 3);
        let res = contact_residual(&a, &z, &s, Scheme::Order2).unwrap();
        assert_eq!(res, f.scale(-1.0));
    }

    #[test]
    fn covariant_divergence_abelian() {
        let s = LieAlgebraData::abelian(1);
        let g = Grid::cubic(3, 32).unwrap();
        let pi = Momentum::from_coord_fn(&g, 1, |x, out| out[pair_index(0, 1, 3)] = x[0].sin());
        let a = GaugeField::zeros(&g, 1);
        let d = covariant_divergence(&pi, &a, &s, Scheme::Order2).unwrap();
        let h = g.spacing()[0];
        for node in 0..g.node_count() {
            let mut x = [0.0; 3];
            g.coords(node, &mut x);
            assert!((d.at(node)[1] - x[0].cos()).abs() <= h * h / 6.0 * 1.01);
            assert_eq!(d.at(node)[0], 0.0);
            assert_eq!(d.at(node)[2], 0.0);
        }
    }

    #[test]
    fn covariant_divergence_constant_fields_enumeration() {
        let g = Grid::cubic(3, 4).unwrap();
        let s = LieAlgebraData::so3();
        let pc = [0.3, -1.2, 0.7, 0.4, 0.9, -0.5, 1.1, 0.2, -0.8];
        let ac = [0.6, -0.4, 1.3, 0.1, -0.9, 0.5, 0.8, 0.2, -0.7];
        let pi = Momentum::from_node_fn(&g, 3, |_, out| out.copy_from_slice(&pc));
        let a = GaugeField::from_node_fn(&g, 3, |_, out| out.copy_from_slice(&ac));
        let d = covariant_divergence(&pi, &a, &s, Scheme::Order2).unwrap();
        let full_pi = |j: usize, i: usize, l: usize| match j.cmp(&i) {
            std::cmp::Ordering::Less => pc[pair_index(j, i, 3) * 3 + l],
            std::cmp::Ordering::Greater => -pc[pair_index(i, j, 3) * 3 + l],
            std::cmp::Ordering::Equal => 0.0,
        };
        for mu in 0..3 {
            for i in 0..3 {
                let mut expect = 0.0;
                for j in 0..3 {
                    for l in 0..3 {
                        for gm in 0..3 {
                            expect -= full_pi(j, i, l) * ac[gm * 3 + j] * s.c(l, gm, mu);
                        }
                    }
                }
                for node in 0..g.node_count() {
                    assert!((d.at(node)[mu * 3 + i] - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn a_coordinates_examples() {
        let g = Grid::cubic(3, 6).unwrap();
        let ab = LieAlgebraData::abelian(3);
        let s = LieAlgebraData::so3();
        let f = Curvature::random(&g, 3, 2, 1, 1.0).unwrap();
        let a = GaugeField::random(&g, 3, 3, 1, 1.0).unwrap();
        // abelian and a = 0: A_{ji} = ½F_{ij}, i.e. packed A_{pq} = −½F_{pq}
        for (alg, pot) in [(&ab, a.clone()), (&s, GaugeField::zeros(&g, 3))] {
            let ac = a_from_f_coordinates(&f, &pot, alg).unwrap();
            assert_eq!(ac, f.values().scale(-0.5));
        }
        let ac = a_from_f_coordinates(&f, &a, &s).unwrap();
        let back = f_from_a_coordinates(&ac, &a, &s).unwrap();
        assert!(maxabs(back.sub(&f).unwrap().values()) <= 1e-15);
    }

    #[test]
    fn sign_convention_matches_a_coordinate_form() {
        // Holonomic A-coordinates A^μ_{ij} = ½(∂_j a_i − ∂_i a_j), then F = 2A_{ji} + a_j a_i C.
        let g = Grid::cubic(3, 8).unwrap();
        for s in [LieAlgebraData::so3(), LieAlgebraData::so21()] {
            let a = GaugeField::random(&g, 3, 17, 2, 1.0).unwrap();
            let da = gradient(a.values(), Scheme::Order4);
            let np = 3;
            let acoords = LatticeField::from_node_fn(&g, Curvature::layout(3, 3), |node, out| {
                for (p, (i, j)) in pairs(3).into_iter().enumerate() {
                    for mu in 0..3 {
                        out[mu * np + p] = 0.5 * (da[j].at(node)[mu * 3 + i] - da[i].at(node)[mu * 3 + j]);
                    }
                }
            });
            let f18 = f_from_a_coordinates(&acoords, &a, &s).unwrap();
            let f = curvature(&a, &s, Scheme::Order4).unwrap();
            assert!(maxabs(f.sub(&f18).unwrap().values()) <= 1e-13);
        }
    }

    #[test]
    fn curvature_is_quadratic_in_the_potential() {
        let g = Grid::cubic(3, 8).unwrap();
        let s = LieAlgebraData::so3();
        let a = GaugeField::random(&g, 3, 5, 2, 1.0).unwrap();
        let f1 = curvature(&a, &s, Scheme::Order2).unwrap();
        let f2 = curvature(&a.scale(2.0), &s, Scheme::Order2).unwrap();
        // f1 = D + Q, f2 = 2D + 4Q
        let quad = f2.axpy(-2.0, &f1).unwrap().scale(0.5);
        let lin = f1.sub(&quad).unwrap();
        let abelian = LieAlgebraData::abelian(3);
        let lin_direct = curvature(&a, &abelian, Scheme::Order2).unwrap();
        let quad_direct = Curvature::from_node_fn(&g, 3, |node, out| {
            commutator_term(a.at(node), 3, &s, out);
            out.iter_mut().for_each(|v| *v = -*v);
        });
        assert!(maxabs(lin.sub(&lin_direct).unwrap().values()) <= 1e-12);
        assert!(maxabs(quad.sub(&quad_direct).unwrap().values()) <= 1e-12);
    }

    #[test]
    fn abelian_bianchi_identity() {
        let s = LieAlgebraData::abelian(2);
        let err = |n: usize| {
            let g = Grid::cubic(3, n).unwrap();
            let a = GaugeField::random(&g, 2, 8, 2, 1.0).unwrap();
            let f = curvature(&a, &s, Scheme::Order2).unwrap();
            let df = gradient(f.values(), Scheme::Order2);
            let b = LatticeField::from_node_fn(&g, Shape::new(vec![Slot::Index(2)]), |node, out| {
                for mu in 0..2 {
                    let fd = |k: usize, i: usize, j: usize| {
                        let (p, sg) = signed_pair(i, j, 3).unwrap();
                        sg * df[k].at(node)[mu * 3 + p]
                    };
                    out[mu] = fd(0, 1, 2) + fd(1, 2, 0) + fd(2, 0, 1);
                }
            });
            maxabs(&b)
        };
        // finite differences along distinct axes commute, so the cyclic sum vanishes to roundoff
        assert!(err(8) <= 1e-12);
        assert!(err(16) <= 1e-12);
    }

    #[test]
    fn contact_residual_refinement_slope() {
        let s = LieAlgebraData::so3();
        let poly = crate::lattice::TrigPolynomial::random(3, 9, 21, 1, 1.0);
        let err = |n: usize| {
            let g = Grid::cubic(3, n).unwrap();
            let gf = g.refined(2).unwrap();
            let a = GaugeField::from_field(poly.sample(&g, GaugeField::layout(3, 3)).unwrap(), 3).unwrap();
            let af = GaugeField::from_field(poly.sample(&gf, GaugeField::layout(3, 3)).unwrap(), 3).unwrap();
            let ff = curvature(&af, &s, Scheme::Order2).unwrap();
            // restrict: coarse node (i,j,k) is fine node (2i,2j,2k)
            let restricted = Curvature::from_node_fn(&g, 3, |node, out| {
                let mut idx = [0; 3];
                g.multi_index(node, &mut idx);
                let fine = (2 * idx[0] * 2 * n + 2 * idx[1]) * 2 * n + 2 * idx[2];
                out.copy_from_slice(ff.at(fine));
            });
            maxabs(contact_residual(&a, &restricted, &s, Scheme::Order2).unwrap().values())
        };
        let slope = (err(16) / err(32)).log2();
        assert!((slope - 2.0).abs() <= 0.2, "slope {slope}");
    }
}
