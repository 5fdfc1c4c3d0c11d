use jetfield_core::algebra::LieAlgebraData;
use jetfield_core::connection::GaugeField;
use jetfield_core::dynamics::{hamiltonian_action, hdd_residuals, BaseMetric, Momentum, PhaseSection, PlaneWave};
use jetfield_core::gauge::{gauge_Pi, gauge_a, gauge_triad, make_gauge_map};
use jetfield_core::lattice::{reduce, Grid, Norm, Scheme, TrigPolynomial};
use jetfield_core::triad::{ec_image_of_hdd, ec_residuals, to_spin_connection, to_triad};

#[test]
fn gauge_then_triad_map_commutes_with_residuals() {
    let grid = Grid::cubic(3, 8).unwrap();
    let s = LieAlgebraData::so21();
    let metric = BaseMetric::random(&grid, &[1.0, 1.0, -1.0], 1, 0.1).unwrap();
    let map = make_gauge_map(&TrigPolynomial::random(3, 3, 2, 1, 0.8), &grid, &s).unwrap();
    let a = gauge_a(&GaugeField::random(&grid, 3, 3, 2, 0.5).unwrap(), &map).unwrap();
    let pi = gauge_Pi(&Momentum::random(&grid, 3, 4, 2, 0.5).unwrap(), &map).unwrap();
    let sec = PhaseSection::new(a.clone(), pi.clone()).unwrap();
    for scheme in [Scheme::Order2, Scheme::Order4] {
        let (r1, r2) = hdd_residuals(&sec, &metric, &s, scheme).unwrap();
        let (me, mw) = ec_image_of_hdd(&r1, &r2, &s).unwrap();
        let e = to_triad(&pi, &s).unwrap();
        let w = to_spin_connection(&a, &s).unwrap();
        let (re, rw) = ec_residuals(&e, &w, &metric, &s, scheme).unwrap();
        assert!(reduce(&re.sub(&me).unwrap(), Norm::MaxAbs) <= 1e-10);
        assert!(reduce(&rw.sub(&mw).unwrap(), Norm::MaxAbs) <= 1e-10);
    }
    // triads of gauge-related momenta are gauge-related triads
    let e0 = to_triad(&Momentum::random(&grid, 3, 4, 2, 0.5).unwrap(), &s).unwrap();
    let via_triad = gauge_triad(&e0, &map).unwrap();
    let via_pi = to_triad(&pi, &s).unwrap();
    assert!(reduce(&via_triad.values().sub(via_pi.values()).unwrap(), Norm::MaxAbs) <= 1e-12);
}

#[test]
fn plane_wave_action_converges_under_both_schemes() {
    for scheme in [Scheme::Order2, Scheme::Order4] {
        let mut actions = Vec::new();
        for n in [8, 16, 32] {
            let wave = PlaneWave::embedded(n, LieAlgebraData::so3()).unwrap();
            let sec = wave.section(scheme).unwrap();
            let (r1, r2) = hdd_residuals(&sec, &wave.metric, &wave.algebra, scheme).unwrap();
            assert_eq!(reduce(r1.values(), Norm::MaxAbs), 0.0);
            assert!(reduce(&r2, Norm::MaxAbs) < 0.2);
            actions.push(hamiltonian_action(&sec, &wave.metric, &wave.algebra, scheme).unwrap());
        }
        // L vanishes on the continuum null wave, so the action decays at the scheme order
        let rate = (actions[1] / actions[2]).abs().log2();
        assert!(rate >= scheme.order() as f64 - 0.3, "{actions:?}");
    }
}
