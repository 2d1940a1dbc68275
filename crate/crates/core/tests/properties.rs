use std::f64::consts::PI;

use num_complex::Complex;
use proptest::prelude::*;
use spinsim_core::experiment::PowderScheme;
use spinsim_core::hamiltonian::{
    average_dipolar_closed, average_dipolar_matrix_form, average_dipolar_numeric, dipolar_hamiltonian_rot,
    DipolarCoupling, SpinSystem,
};
use spinsim_core::propagation::{evolve, propagate_interval, DensityDeviation};
use spinsim_core::spin::{rotate_operator, spin_operator, Axis, HermitianSpectrum, OperatorMatrix, SpinBasis};
use spinsim_core::waveform::Waveform;
use spinsim_core::{Operator, Real};
use spinsim_testkit as tk;

fn axis(k: usize) -> Axis {
    Axis::ALL[k]
}

fn axis_char(a: Axis) -> char {
    match a {
        Axis::X => 'x',
        Axis::Y => 'y',
        Axis::Z => 'z',
    }
}

/// Hermitian operator `sum c_ab I_a^(i) I_b^(j) + sum h_a I_a^(i)` on two spins.
fn hermitian_from(coeffs: &[f64]) -> Operator {
    let b = SpinBasis::<f64>::new(2).unwrap();
    let mut h = OperatorMatrix::zeros(4);
    for (k, &c) in coeffs.iter().take(9).enumerate() {
        h.add_scaled(c, &(b.site(axis(k / 3), 0) * b.site(axis(k % 3), 1)));
    }
    for (k, &c) in coeffs.iter().skip(9).take(6).enumerate() {
        h.add_scaled(c, b.site(axis(k % 3), k / 3));
    }
    h
}

fn coupling() -> impl Strategy<Value = (f64, f64, f64)> {
    (-3.0e4..3.0e4f64, 0.0..PI, 0.0..2.0 * PI)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angular_momentum_algebra(n in 1usize..5, site in 0usize..4, other in 0usize..4, a in 0usize..3) {
        let (site, other) = (site % n, other % n);
        let ia = spin_operator::<f64>(axis(a), site, n).unwrap();
        let ib = spin_operator::<f64>(axis((a + 1) % 3), site, n).unwrap();
        let ic = spin_operator::<f64>(axis((a + 2) % 3), site, n).unwrap();
        let lhs = ia.commutator(&ib);
        prop_assert!(lhs.distance(&ic.scale_complex(Complex::new(0.0, 1.0))) < 1e-14);
        if other != site {
            let jb = spin_operator::<f64>(axis((a + 1) % 3), other, n).unwrap();
            prop_assert!(ia.commutator(&jb).frobenius_norm() == 0.0);
        }
        // Kronecker layout agrees with an independent construction
        let want = tk::site_op(axis_char(axis(a)), site, n);
        prop_assert!(tk::frobenius(&(ia.matrix() - &want)) == 0.0);
    }

    #[test]
    fn propagator_is_unitary_and_matches_series(coeffs in prop::collection::vec(-5.0..5.0f64, 15), t in -2.0..2.0f64) {
        let h = hermitian_from(&coeffs);
        let u = HermitianSpectrum::new(&h).unwrap().exp(t);
        prop_assert!(u.unitarity_error() < 1e-12);
        let want = tk::propagator(h.matrix(), t);
        prop_assert!(tk::frobenius(&(u.matrix() - &want)) < 1e-11);
    }

    #[test]
    fn rotation_preserves_hermiticity_and_norm(coeffs in prop::collection::vec(-5.0..5.0f64, 15), a in 0usize..3, th in -7.0..7.0f64) {
        let h = hermitian_from(&coeffs);
        let r = rotate_operator(&h, axis(a), th, 2).unwrap();
        prop_assert!(r.hermiticity_error() < 1e-12);
        prop_assert!((r.frobenius_norm() - h.frobenius_norm()).abs() < 1e-11);
        let u = tk::propagator(&tk::total_op(axis_char(axis(a)), 2), th);
        let want = &u * h.matrix() * u.adjoint();
        prop_assert!(tk::frobenius(&(r.matrix() - &want)) < 1e-11);
    }

    #[test]
    fn dipolar_hamiltonian_is_secular((d, beta, gamma) in coupling(), wr in 0.0..1.0e5f64, t in 0.0..1e-3f64, stat in any::<bool>()) {
        let sys = SpinSystem::pair(d, beta, gamma).unwrap();
        let h = dipolar_hamiltonian_rot(&sys, wr, t, stat).unwrap();
        prop_assert!(h.hermiticity_error() == 0.0);
        prop_assert!(h.trace().norm() < 1e-9);
        let iz = SpinBasis::<f64>::new(2).unwrap().total(Axis::Z).clone();
        prop_assert!(h.commutator(&iz).frobenius_norm() < 1e-9);
    }

    #[test]
    fn recoupled_average_is_pure_double_quantum((d, beta, gamma) in coupling(), k in 1u8..3, phi in -PI..PI) {
        let c = DipolarCoupling::new(0, 1, d, beta, gamma).unwrap();
        let closed = average_dipolar_closed(&c, k).unwrap();
        let matrix = average_dipolar_matrix_form(&c, k).unwrap();
        let scale = closed.frobenius_norm().max(1.0);
        prop_assert!(closed.distance(&matrix) <= 1e-12 * scale);
        for r in 0..4 {
            for col in 0..4 {
                if (r, col) != (0, 3) && (r, col) != (3, 0) {
                    prop_assert!(closed[(r, col)].norm() <= 1e-12 * scale);
                }
            }
        }
        // coherence order 2: a z rotation by phi multiplies the corner by exp(-2 i phi)
        let rotated = rotate_operator(&closed, Axis::Z, phi, 2).unwrap();
        let want = closed[(0, 3)] * Complex::from_polar(1.0, -2.0 * phi);
        prop_assert!((rotated[(0, 3)] - want).norm() <= 1e-12 * scale);
        // no projection onto any product operator outside the transverse bilinears
        let e = OperatorMatrix::<f64>::identity(2);
        let ops = |i: usize| -> Operator {
            match i {
                0 => e.clone(),
                a => spin_operator::<f64>(axis(a - 1), 0, 1).unwrap(),
            }
        };
        for p in 0..4 {
            for q in 0..4 {
                let transverse = (1..=2).contains(&p) && (1..=2).contains(&q);
                if transverse {
                    continue;
                }
                let prod = ops(p).kron(&ops(q));
                prop_assert!(prod.inner(&closed).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn numeric_average_agrees_with_closed_form((d, beta, gamma) in coupling(), k in 1u8..3) {
        let c = DipolarCoupling::new(0, 1, d, beta, gamma).unwrap();
        let wr = 2.0 * PI * 20e3;
        let w1 = if k == 2 { wr } else { wr / 2.0 };
        let numeric = average_dipolar_numeric(&c, w1, wr, 1).unwrap();
        let closed = average_dipolar_closed(&c, k).unwrap();
        prop_assert!(numeric.distance(&closed) <= 1e-6 * closed.frobenius_norm().max(1e-9 * d.abs()));
    }

    #[test]
    fn evolution_preserves_trace_and_purity(coeffs in prop::collection::vec(-5.0e3..5.0e3f64, 15), slope in -1.0e7..1.0e7f64) {
        let h0 = hermitian_from(&coeffs);
        let b = SpinBasis::<f64>::new(2).unwrap();
        let u = propagate_interval(|t| {
            let mut h = h0.clone();
            h.add_scaled(slope * t, b.total(Axis::X));
            h
        }, 0.0, 1e-4, 1e-6).unwrap();
        prop_assert!(u.unitarity_error() < 1e-10);
        let rho = DensityDeviation::thermal(2).unwrap();
        let out = evolve(&rho, &u).unwrap();
        prop_assert!(out.matrix().trace().norm() < 1e-12);
        prop_assert!((out.purity() - rho.purity()).abs() < 1e-10);
    }

    #[test]
    fn phase_correction_matches_quadrature(
        f1 in 5.0e3..5.0e4f64,
        f2 in 0.0..5.0e4f64,
        tau_us in 200u32..2000,
        t_ret_us in 0u32..1000,
        za in -PI..PI,
        zr in -PI..PI,
        frac in 0.0..1.0f64,
    ) {
        let (tau, t_ret) = (tau_us as f64 * 1e-6, t_ret_us as f64 * 1e-6);
        let (w1, w2) = (2.0 * PI * f1, 2.0 * PI * f2);
        let wf = Waveform::new(w1, w2, tau, t_ret, za, zr).unwrap();
        let profile = tk::RampProfile { omega1: w1, omega2: w2, tau, t_retention: t_ret, zeta_down: za, zeta_up: zr };
        // whole segment ends included: equally spaced samples there can all hit zeros
        let t = if frac > 0.9 { wf.duration() } else { frac * wf.duration() / 0.9 };
        let want = profile.phase_integral(t, 1e-11);
        prop_assert!((wf.phase_correction(t) - want).abs() <= 1e-9, "t = {t}");
        prop_assert!((wf.nutating_amplitude(t) - profile.field(t)).abs() <= 1e-9 * w2.max(1.0));
    }

    #[test]
    fn powder_weights_form_a_measure(n in 1usize..400, nb in 1usize..20, ng in 1usize..20) {
        for scheme in [PowderScheme::<f64>::golden_spiral(n).unwrap(), PowderScheme::uniform_grid(nb, ng).unwrap()] {
            scheme.validate().unwrap();
            for o in &scheme.orientations {
                prop_assert!(o.beta >= 0.0 && o.beta <= PI);
                prop_assert!(o.gamma >= 0.0 && o.gamma < 2.0 * PI);
                prop_assert!(o.weight >= 0.0);
            }
        }
    }

    #[test]
    fn orientation_keeps_isotropic_invariants((d, beta, gamma) in coupling(), ob in 0.0..PI, og in 0.0..2.0 * PI) {
        let sys = SpinSystem::pair(d, beta, gamma).unwrap();
        let rotated = sys.oriented(ob, og);
        let c = rotated.couplings[0];
        prop_assert!(c.beta_d >= 0.0 && c.beta_d <= PI);
        let u = sys.couplings[0].direction();
        let v = c.direction();
        let norm = |x: [f64; 3]| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        prop_assert!((norm(u) - 1.0).abs() < 1e-12 && (norm(v) - 1.0).abs() < 1e-12);
        prop_assert!(c.d == d);
        // z component after R_z(og) R_y(ob) acting on u
        let vz = -ob.sin() * u[0] + ob.cos() * u[2];
        prop_assert!((v[2] - vz).abs() < 1e-12);
    }
}

#[test]
fn real_trait_round_trips() {
    assert_eq!(<f64 as Real>::lit(0.25).as_f64(), 0.25);
    assert_eq!(<f32 as Real>::lit(0.25).as_f64(), 0.25);
}
