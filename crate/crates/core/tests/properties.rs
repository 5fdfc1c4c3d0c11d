use jetfield_core::algebra::LieAlgebraData;
use jetfield_core::dynamics::{hamiltonian_at, inverse_legendre_at, lagrangian_at, legendre_at};
use jetfield_core::gauge::make_gauge_map;
use jetfield_core::lattice::{pair_count, pair_index, pairs, signed_pair, Grid, TrigPolynomial};
use jetfield_core::triad::{
    from_spin_at, from_triad_at, prop55_residual_at, spin_from_triad_jet, to_spin_at, to_triad_at, torsion_residual,
    metricity_residual, TriadJetSample,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn algebra(indefinite: bool) -> LieAlgebraData {
    if indefinite {
        LieAlgebraData::so21()
    } else {
        LieAlgebraData::so3()
    }
}

/// `diag(signs · scale) + ε·sym`, its inverse and `√|det|`.
fn metric(m: usize, diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let mut g = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&diag[..m]));
    let mut k = 0;
    for i in 0..m {
        for j in i + 1..m {
            g[(i, j)] = off[k];
            g[(j, i)] = off[k];
            k += 1;
        }
    }
    let inv = g.clone().try_inverse().unwrap();
    let sqrtg = g.determinant().abs().sqrt();
    (g.transpose().as_slice().to_vec(), inv.transpose().as_slice().to_vec(), sqrtg)
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pair_packing_is_a_bijection(n in 2usize..7) {
        let list = pairs(n);
        prop_assert_eq!(list.len(), pair_count(n));
        for (k, &(i, j)) in list.iter().enumerate() {
            prop_assert_eq!(pair_index(i, j, n), k);
            prop_assert_eq!(signed_pair(j, i, n), Some((k, -1.0)));
        }
        for i in 0..n {
            prop_assert_eq!(signed_pair(i, i, n), None);
        }
    }

    #[test]
    fn legendre_roundtrip_and_consistency(
        m in 2usize..5,
        indefinite in any::<bool>(),
        lorentz in any::<bool>(),
        f in values(3 * 6),
        scale in prop::collection::vec(0.5..2.0f64, 4),
        off in prop::collection::vec(-0.1..0.1f64, 6),
    ) {
        let s = algebra(indefinite);
        let np = pair_count(m);
        let f = &f[..3 * np];
        let diag: Vec<f64> = (0..4).map(|k| if lorentz && k == m - 1 { -scale[k] } else { scale[k] }).collect();
        let (g, ginv, sqrtg) = metric(m, &diag, &off);
        let mut pi = vec![0.0; np * 3];
        legendre_at(f, &ginv, sqrtg, &s, m, &mut pi);
        let mut back = vec![0.0; 3 * np];
        inverse_legendre_at(&pi, &g, sqrtg, &s, m, &mut back);
        for (a, b) in f.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let l = lagrangian_at(f, &ginv, sqrtg, &s, m);
        let h = hamiltonian_at(&pi, &g, sqrtg, &s, m);
        let pairing: f64 = (0..np).flat_map(|q| (0..3).map(move |mu| (q, mu))).map(|(q, mu)| f[mu * np + q] * pi[q * 3 + mu]).sum();
        prop_assert!((h - l).abs() <= 1e-11 * (1.0 + l.abs()));
        prop_assert!((h + l - pairing).abs() <= 1e-11 * (1.0 + pairing.abs()));
    }

    #[test]
    fn dictionary_is_invertible(indefinite in any::<bool>(), pi in values(9), a in values(9)) {
        let s = algebra(indefinite);
        let mut e = [0.0; 9];
        let mut back = [0.0; 9];
        to_triad_at(&pi, &s, &mut e);
        from_triad_at(&e, &s, &mut back);
        for (x, y) in pi.iter().zip(back) {
            prop_assert!((x - y).abs() <= 1e-14);
        }
        let mut w = [0.0; 9];
        to_spin_at(&a, &s, &mut w);
        from_spin_at(&w, &s, &mut back);
        for (x, y) in a.iter().zip(back) {
            prop_assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn prop55_identity(indefinite in any::<bool>(), w in values(9)) {
        prop_assert!(prop55_residual_at(&w, &algebra(indefinite)) <= 1e-12);
    }

    #[test]
    fn levi_civita_spin_connection(indefinite in any::<bool>(), seed in any::<u64>()) {
        use rand::SeedableRng;
        let s = algebra(indefinite);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let jet = TriadJetSample::random(&mut rng);
        let w = spin_from_triad_jet(&jet, &s).unwrap();
        prop_assert!(metricity_residual(&w, &s) <= 1e-11);
        prop_assert!(torsion_residual(&jet, &w) <= 1e-11);
    }

    #[test]
    fn gauge_maps_preserve_k(indefinite in any::<bool>(), seed in any::<u64>(), amp in 0.0..1.5f64) {
        let s = algebra(indefinite);
        let grid = Grid::cubic(3, 4).unwrap();
        let map = make_gauge_map(&TrigPolynomial::random(3, 3, seed, 1, amp), &grid, &s).unwrap();
        let (inv, k) = map.consistency_residuals(&s);
        prop_assert!(inv <= 1e-12);
        prop_assert!(k <= 1e-12);
    }
}
