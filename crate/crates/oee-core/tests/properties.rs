//! Randomized properties of the numerical core.

use num_complex::Complex64;
use oee_core::bulk::{bulk_texture, TexturePath};
use oee_core::entanglement::{entanglement_spectra, traces, CutSpec, EsOptions, Geometry};
use oee_core::io;
use oee_core::linalg;
use oee_core::models::{
    assemble_bdg, FourierTable, FourierTerm, ModelSpec, Momentum, NormalState, PairingVector,
};
use oee_core::realspace::{extract_hoppings, ky_samples, slab_spectrum, Boundary};
use oee_core::topology::{chern_number, skyrmion_number};
use oee_core::BZGrid;
use proptest::prelude::*;

fn model() -> impl Strategy<Value = ModelSpec<f64>> {
    let qwz = (-3.0..3.0f64, prop_oneof![Just(1.0), Just(-1.0)], 0.5..1.5f64, 0.0..1.5f64, any::<bool>())
        .prop_map(|(mu, t, b, d, hp)| ModelSpec::qwz(mu, t, b, d).with_h_prime(hp));
    let sticlet =
        (0.3..2.0f64, prop_oneof![Just(1.0), Just(-1.0)], 0.0..1.5f64, [-1.0..1.0f64, -1.0..1.0, -1.0..1.0])
            .prop_map(|(a, t, d, v)| ModelSpec::sticlet(a, t, d).with_pairing(PairingVector::Constant(v)));
    prop_oneof![qwz, sticlet]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn hopping_round_trip(spec in model(), kx in -4.0..4.0f64, ky in -4.0..4.0f64) {
        let h = extract_hoppings(&spec, 2).unwrap();
        let k = Momentum::new(kx, ky);
        let d = linalg::max_abs_diff(&h.bloch(k), &assemble_bdg(&spec, k).unwrap());
        prop_assert!(d < 1e-10, "deviation {d:e}");
    }

    #[test]
    fn slab_spectrum_is_particle_hole_symmetric(spec in model(), periodic in any::<bool>()) {
        let b = if periodic { Boundary::PeriodicX } else { Boundary::OpenX };
        let s = slab_spectrum(&spec, 10, &ky_samples::<f64>(7), b).unwrap();
        prop_assert!(s.particle_hole_asymmetry() < 1e-10);
    }

    #[test]
    fn entanglement_values_in_unit_interval(spec in model(), start in 0usize..6, len in 2usize..8) {
        let nx = 14;
        let cut = CutSpec::new(Geometry::Cylinder, start, (start + len).min(nx - 1));
        let (plain, rich) = entanglement_spectra(&spec, nx, &ky_samples::<f64>(5), &cut, EsOptions::default()).unwrap();
        for s in [&plain, &rich] {
            for p in &s.points {
                for &x in &p.xi {
                    prop_assert!((-1e-10..=1.0 + 1e-10).contains(&x), "value {x}");
                }
            }
        }
    }

    #[test]
    fn enriched_trace_is_half_the_plain_trace(spec in model()) {
        let cut = CutSpec::half(Geometry::Cylinder, 12);
        let (plain, rich) = entanglement_spectra(&spec, 12, &ky_samples::<f64>(6), &cut, EsOptions::default()).unwrap();
        let (tp, tr) = (traces(&plain), traces(&rich));
        for (a, b) in tp.iter().zip(&tr) {
            prop_assert!((a / 2.0 - b).abs() < 1e-9);
        }
    }

    #[test]
    fn mirrored_texture_reverses_skyrmion_number(spec in model()) {
        let grid = BZGrid::square(24).unwrap();
        if let Ok(t) = bulk_texture(&spec, &grid, 2, true, TexturePath::GroundState) {
            if t.min_norm() > 1e-2 {
                if let (Ok(a), Ok(b)) = (skyrmion_number(&t), skyrmion_number(&t.reversed_handedness())) {
                    prop_assert_eq!(a.value, -b.value);
                }
            }
        }
    }

    #[test]
    fn invariants_survive_spin_rotation_about_z(mu in -2.8..2.8f64, phi in 0.0..std::f64::consts::TAU, hp in any::<bool>()) {
        let grid = BZGrid::square(24).unwrap();
        let plain = ModelSpec::qwz(mu, -1.0, 1.0, 1.0).with_h_prime(hp);
        // the uniform term acts like a pairing vector pinned to y, so it has to turn as well
        let pairing = if hp { PairingVector::Constant([-phi.sin(), phi.cos(), 0.0]) } else { PairingVector::Zero };
        let rotated = ModelSpec::new(NormalState::CustomFourier(rotated_qwz(mu, phi)), 1.0).with_pairing(pairing);
        let a = chern_number(&plain, &grid, 2);
        let b = chern_number(&rotated, &grid, 2);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.value, b.value),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
        let qa = bulk_texture(&plain, &grid, 2, true, TexturePath::GroundState).and_then(|t| skyrmion_number(&t));
        let qb = bulk_texture(&rotated, &grid, 2, true, TexturePath::GroundState).and_then(|t| skyrmion_number(&t));
        if let (Ok(qa), Ok(qb)) = (qa, qb) {
            if qa.is_quantized() && qb.is_quantized() {
                prop_assert_eq!(qa.value, qb.value);
            }
        }
    }

    #[test]
    fn spectrum_csv_round_trip(spec in model()) {
        let s = slab_spectrum(&spec, 4, &ky_samples::<f64>(3), Boundary::OpenX).unwrap();
        let text = io::to_csv_string(&io::spectrum_rows(&s)).unwrap();
        let back: Vec<io::SpectrumRow> = io::read_rows(text.as_bytes()).unwrap();
        prop_assert_eq!(&io::spectrum_from_rows(&back), &s);
    }
}

/// `h = (beta sin kx, beta sin ky, mu - t cos kx - t cos ky)` with `t = -1`, `beta = 1`,
/// its in-plane part rotated by `phi`.
fn rotated_qwz(mu: f64, phi: f64) -> FourierTable<f64> {
    let (c, s) = (phi.cos(), phi.sin());
    // coefficient vector (x, y, z) -> h . sigma
    let block = |v: [Complex64; 3]| {
        let i = Complex64::i();
        [[v[2], v[0] - i * v[1]], [v[0] + i * v[1], -v[2]]]
    };
    let half_i = Complex64::new(0.0, -0.5); // 1 / (2i)
    let mut terms = vec![FourierTerm { dx: 0, dy: 0, block: block([0.0.into(), 0.0.into(), mu.into()]) }];
    for sign in [1.0, -1.0] {
        let sx = half_i * sign;
        // sin kx along (c, s); sin ky along (-s, c); -t cos = +cos/2 per harmonic
        terms.push(FourierTerm { dx: sign as i32, dy: 0, block: block([sx * c, sx * s, 0.5.into()]) });
        terms.push(FourierTerm { dx: 0, dy: sign as i32, block: block([-sx * s, sx * c, 0.5.into()]) });
    }
    FourierTable::new(terms)
}
