use num_complex::Complex64 as C64;
use std::f64::consts::TAU;
use photonsort_core::apps::time_reversal::fit_state;
use photonsort_core::apps::{bell_table, ns_closed_form};
use photonsort_core::grid::from_time_domain;
use photonsort_core::modal::sorting_report;
use photonsort_core::objective::{error_value, ErrorKernel};
use photonsort_core::oracle::couplings;
use photonsort_core::scattering::{apply_single_photon, apply_two_photon_chain, apply_two_photon_chain_adjoint};
use photonsort_core::state::product_state;
use photonsort_core::takagi::takagi;
use photonsort_core::{Emitter, EmitterChain, Grid, Pulse, TwoPhotonState};
use proptest::prelude::*;

fn small_grid() -> Grid {
    Grid::new(96, 8.0).unwrap()
}

/// A smooth packet: Gaussian envelope, center, width, delay and chirp.
fn packet() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-1.5..1.5f64, 0.5..2.5f64, -3.0..3.0f64, -0.5..0.5f64)
}

fn make_pulse(g: Grid, (c, w, t0, chirp): (f64, f64, f64, f64)) -> Pulse {
    Pulse::from_fn(g, |k| {
        let x = k - c;
        C64::from_polar((-x * x / (2.0 * w * w)).exp(), k * t0 + chirp * x * x)
    })
    .normalize()
    .unwrap()
}

fn emitter() -> impl Strategy<Value = Emitter> {
    (0.5..1.5f64, -0.5..0.5f64, 0.8..=1.0f64).prop_map(|(g, d, b)| Emitter::new(g, d, b, 0.0).unwrap())
}

fn chain() -> impl Strategy<Value = EmitterChain> {
    prop::collection::vec(emitter(), 1..=3).prop_map(|v| EmitterChain::new(v).unwrap())
}

fn lossless_chain() -> impl Strategy<Value = EmitterChain> {
    // the pole half-width Γ/2 must span a few grid steps
    prop::collection::vec((0.8..1.5f64, -0.5..0.5f64), 1..=2)
        .prop_map(|v| EmitterChain::new(v.into_iter().map(|(g, d)| Emitter::new(g, d, 1.0, 0.0).unwrap()).collect()).unwrap())
}

fn pair_state(a: Pulse, b: Pulse, w: C64) -> TwoPhotonState {
    let s = TwoPhotonState::symmetric_product(&a, &b).unwrap().axpy(w, &product_state(&a).unwrap()).unwrap();
    let n = s.norm();
    s.scaled(C64::new(1.0 / n, 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn normalized_pulse_has_unit_norm(p in packet()) {
        let q = make_pulse(small_grid(), p);
        prop_assert!((q.norm_sq() - 1.0).abs() < 1e-12);
        prop_assert!(q.is_normalized());
    }

    #[test]
    fn time_domain_round_trip(p in packet()) {
        let q = make_pulse(small_grid(), p);
        let t = q.to_time_domain();
        prop_assert!((t.norm_sq() - 1.0).abs() < 1e-10);
        prop_assert!(from_time_domain(&t).max_abs_diff(&q) < 1e-10);
    }

    #[test]
    fn mirror_is_involution(p in packet()) {
        let q = make_pulse(small_grid(), p);
        prop_assert_eq!(q.mirrored().mirrored(), q.clone());
        prop_assert!(q.delayed(1.3).delayed(-1.3).max_abs_diff(&q) < 1e-12);
    }

    #[test]
    fn inner_product_cauchy_schwarz(a in packet(), b in packet()) {
        let g = small_grid();
        let (x, y) = (make_pulse(g, a), make_pulse(g, b));
        prop_assert!(x.inner(&y).unwrap().norm() <= 1.0 + 1e-12);
        let xy = x.inner(&y).unwrap();
        prop_assert!((xy - y.inner(&x).unwrap().conj()).norm() < 1e-14);
    }

    #[test]
    fn scattering_never_gains_norm(c in chain(), a in packet(), b in packet(), w in -1.0..1.0f64) {
        let g = Grid::new(128, 16.0).unwrap();
        let s = pair_state(make_pulse(g, a), make_pulse(g, b), C64::new(w, 0.3));
        let out = apply_two_photon_chain(&c, &s).unwrap();
        prop_assert!(out.norm_sq() <= 1.0 + 1e-9);
        prop_assert!(out.symmetry_defect() < 1e-12);
        let one = apply_single_photon(&c, &make_pulse(g, a));
        prop_assert!(one.norm_sq() <= 1.0 + 1e-12);
        if c.is_lossless() {
            prop_assert!((one.norm_sq() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lossless_pair_deficit_shrinks_with_extent(c in lossless_chain(), a in packet(), b in packet()) {
        let mut deficits = Vec::new();
        for g in [Grid::production(), Grid::production().doubled()] {
            let s = pair_state(make_pulse(g, a), make_pulse(g, b), C64::new(0.0, 0.5));
            let out = apply_two_photon_chain(&c, &s).unwrap();
            deficits.push((1.0 - out.norm()).abs());
        }
        prop_assert!(deficits[0] < 1e-4, "deficit {}", deficits[0]);
        prop_assert!(deficits[1] <= 0.5 * deficits[0] + 1e-12, "{:?}", deficits);
    }

    #[test]
    fn adjoint_is_exact(c in chain(), a in packet(), b in packet()) {
        let g = small_grid();
        let x = product_state(&make_pulse(g, a)).unwrap();
        let y = product_state(&make_pulse(g, b)).unwrap();
        let lhs = y.inner(&apply_two_photon_chain(&c, &x).unwrap()).unwrap();
        let rhs = apply_two_photon_chain_adjoint(&c, &y).unwrap().inner(&x).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn report_is_consistent(c in chain(), a in packet()) {
        let g = small_grid();
        let p = make_pulse(g, a);
        let r = sorting_report(&c, &p).unwrap();
        prop_assert!(r.error >= 0.0 && r.error <= r.n2 + 1e-9);
        prop_assert!(r.n1 <= 1.0 + 1e-12 && r.n2 <= 1.0 + 1e-9);
        prop_assert!((r.error - error_value(&c, &p).unwrap()).abs() < 1e-10);
        let pops: f64 = r.takagi.populations().iter().sum();
        prop_assert!((pops - r.n2).abs() < 1e-9);
        prop_assert!(r.takagi.populations().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn error_is_gauge_invariant(c in chain(), a in packet(), phase in 0.0..TAU) {
        let g = small_grid();
        let p = make_pulse(g, a);
        let e0 = error_value(&c, &p).unwrap();
        let e1 = error_value(&c, &p.scaled(C64::from_polar(1.0, phase))).unwrap();
        prop_assert!((e0 - e1).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_hermitian(c in chain(), a in packet(), b in packet(), d in packet()) {
        let g = small_grid();
        let h = ErrorKernel::new(&c, &make_pulse(g, a)).unwrap();
        let (x, y) = (make_pulse(g, b), make_pulse(g, d));
        let lhs = x.inner(&h.apply(&y).unwrap()).unwrap();
        let rhs = h.apply(&x).unwrap().inner(&y).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn takagi_reconstructs(a in packet(), b in packet(), w in -1.0..1.0f64) {
        let g = Grid::new(64, 6.0).unwrap();
        let s = pair_state(make_pulse(g, a), make_pulse(g, b), C64::new(w, -0.2));
        let t = takagi(&s).unwrap();
        prop_assert!(t.reconstruct().max_abs_diff(&s) < 1e-8);
    }

    #[test]
    fn time_reversal_overlap_bounded(a in packet(), phase in 0.0..TAU) {
        let g = small_grid();
        let chain = EmitterChain::identical(1).unwrap();
        let p = make_pulse(g, a);
        let s = apply_two_photon_chain(&chain, &product_state(&p).unwrap()).unwrap();
        let f = fit_state(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&f.overlap));
        prop_assert!((0.0..=10.0).contains(&f.t_d));
        let s2 = apply_two_photon_chain(&chain, &product_state(&p.scaled(C64::from_polar(1.0, phase))).unwrap()).unwrap();
        prop_assert!((fit_state(&s2).unwrap().overlap - f.overlap).abs() < 1e-10);
    }

    #[test]
    fn bell_rows(f in 0.0..=1.0f64) {
        let t = bell_table(f).unwrap();
        prop_assert!(t.iter().all(|r| r.probability == 1.0 || r.probability == f));
        prop_assert_eq!(t.iter().filter(|r| r.probability == f).count() >= 2, true);
    }

    #[test]
    fn ns_closed_form_in_unit_disk(c1 in 0.0..0.5f64, c2 in 0.0..0.5f64) {
        prop_assert!(ns_closed_form(c1, c2).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn couplings_finite(re in -2.0..2.0f64, im in -2.0..2.0f64, ip in 0.0..=1.0f64, is in 0.0..=1.0f64) {
        let (a, b) = couplings(C64::new(re, im), C64::new(im, re), ip, is);
        prop_assert!(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite());
    }
}
