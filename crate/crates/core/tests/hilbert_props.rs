use approx::assert_abs_diff_eq;
use cascade_core::hilbert::{annihilation, coherent_state, creation, number, tensor, CompositeSpace, ModeSpace};
use cascade_core::{Complex, DensityOperator, Error, StateVector, StateVector32};
use proptest::prelude::*;

fn arb_alpha(max_abs: f64) -> impl Strategy<Value = Complex> {
    (0.0..max_abs, 0.0..std::f64::consts::TAU).prop_map(|(r, th)| Complex::from_polar(r, th))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coherent_state_mean_number(a in arb_alpha(2.5)) {
        let space = ModeSpace::for_coherent_amplitude(a.norm());
        let psi = coherent_state(a, space).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        prop_assert!(psi.truncation_deficit() < 1e-6);
        let rho = psi.to_density();
        let n = cascade_core::hilbert::expectation(&number(space), &rho).unwrap();
        prop_assert!((n.re - a.norm_sqr()).abs() < 1e-4);
        let b = cascade_core::hilbert::expectation(&annihilation(space), &psi).unwrap();
        prop_assert!((b - a).norm() < 1e-4);
    }

    #[test]
    fn partial_trace_of_product_recovers_factors(a in arb_alpha(1.0), n in 0usize..4) {
        let (d0, d1) = (ModeSpace::new(9).unwrap(), ModeSpace::new(5).unwrap());
        let space = CompositeSpace::modes(&[9, 5]).unwrap();
        let left = coherent_state(a, d0).unwrap();
        let right = StateVector::fock(n, d1).unwrap();
        let rho = tensor(&[left.clone(), right.clone()], &space).unwrap().to_density();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let r0 = rho.partial_trace(&space, &[0]).unwrap();
        let r1 = rho.partial_trace(&space, &[1]).unwrap();
        prop_assert!((r0.fidelity_with_pure(&left).unwrap() - 1.0).abs() < 1e-10);
        prop_assert!((r1.fidelity_with_pure(&right).unwrap() - 1.0).abs() < 1e-10);
        prop_assert!((r0.purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pure_states_are_positive_semidefinite(a in arb_alpha(1.5)) {
        let space = ModeSpace::for_coherent_amplitude(a.norm());
        let rho = coherent_state(a, space).unwrap().to_density();
        let m = rho.min_eigenvalue();
        prop_assert!(m.is_finite());
        prop_assert!(m > -1e-12, "min eigenvalue {}", m);
        prop_assert!(rho.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn ladder_operators_are_adjoint(dim in 2usize..20) {
        let space = ModeSpace::new(dim).unwrap();
        let a = annihilation::<f64>(space);
        let ad = creation::<f64>(space);
        prop_assert_eq!(a.adjoint(), ad.clone());
        prop_assert!(ad.matmul(&a).sub(&number(space)).hermiticity_defect() < 1e-14);
        prop_assert!(number::<f64>(space).is_hermitian(0.0));
    }
}

#[test]
fn truncation_rule_boundary() {
    // |α| = 1 needs dim ≥ 9, and the norm deficit at dim 9 is still above 1e-6.
    let a = Complex::new(1.0, 0.0);
    assert!(matches!(
        coherent_state(a, ModeSpace::new(9).unwrap()),
        Err(Error::Truncation { .. })
    ));
    assert!(coherent_state(a, ModeSpace::new(10).unwrap()).is_ok());
    // At |α| = 2 the rule alone gives 16, which leaves a 3.8e-6 deficit.
    let d = ModeSpace::for_coherent_amplitude(2.0).dim();
    assert!(d > 16);
    assert!(coherent_state(Complex::new(2.0, 0.0), ModeSpace::new(d).unwrap()).is_ok());
    assert!(coherent_state(Complex::new(2.0, 0.0), ModeSpace::new(d - 1).unwrap()).is_err());
    assert_eq!(ModeSpace::for_coherent_amplitude(1.0).dim(), 10);
}

#[test]
fn single_precision_agrees_with_double() {
    let a32 = num_complex::Complex::new(0.8f32, -0.3);
    let a64 = Complex::new(0.8, -0.3);
    let s32: StateVector32 = coherent_state(a32, ModeSpace::new(12).unwrap()).unwrap();
    let s64 = coherent_state(a64, ModeSpace::new(12).unwrap()).unwrap();
    for (x, y) in s32.amplitudes().iter().zip(s64.amplitudes()) {
        assert_abs_diff_eq!(x.re as f64, y.re, epsilon = 1e-6);
        assert_abs_diff_eq!(x.im as f64, y.im, epsilon = 1e-6);
    }
}

#[test]
fn density_operator_rejects_bad_data() {
    let bad = DensityOperator::from_raw(2, vec![Complex::new(1.0, 0.0); 3]);
    assert!(bad.is_err());
}
