use cascade_core::protocol::{
    ideal_transfer, measure_internal, rotate_internal, rotations, scenario_n_atom_cat, scenario_three_atom_cat,
    scenario_two_atom_cat, Internal, NetworkTopology, Site,
};
use cascade_core::{Complex, Error, MotionalLabel, ProtocolResult, SymbolicKet};
use proptest::prelude::*;

fn arb_alpha() -> impl Strategy<Value = Complex> {
    (0.0f64..2.0, 0.0..std::f64::consts::TAU).prop_map(|(r, th)| Complex::from_polar(r, th))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn n_atom_cat_reaches_its_target(a in arb_alpha(), n in 2usize..7) {
        let r = scenario_n_atom_cat(a, n).unwrap();
        prop_assert!(r.target_overlap.unwrap() > 1.0 - 1e-12);
        prop_assert!(r.success_probability > 0.0 && r.success_probability <= 1.0 + 1e-12);
        prop_assert!((r.final_state.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_sites_match_the_dedicated_builder(a in arb_alpha()) {
        let general = scenario_n_atom_cat(a, 3).unwrap();
        let three = scenario_three_atom_cat(a).unwrap();
        prop_assert!((general.success_probability - three.success_probability).abs() < 1e-12);
        prop_assert!(general.final_state.overlap_modulus(&three.final_state).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn single_precision_tracks_double(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let p64 = scenario_two_atom_cat(Complex::new(re, im)).unwrap().success_probability;
        let p32 = scenario_two_atom_cat(num_complex::Complex::new(re as f32, im as f32)).unwrap().success_probability;
        prop_assert!((p32 as f64 - p64).abs() < 1e-5);
    }

    #[test]
    fn branch_probabilities_sum_to_one(a in arb_alpha()) {
        let r = scenario_two_atom_cat(a).unwrap();
        let b = r.step("measure_internal").unwrap().branch_probabilities.unwrap();
        prop_assert!((b.up + b.down - 1.0).abs() < 1e-12);
        prop_assert!((b.up - r.success_probability).abs() < 1e-12);
    }
}

#[test]
fn sink_must_be_empty_before_transfer() {
    let ket = SymbolicKet::product(vec![
        Site::new(Internal::Up, MotionalLabel::fock(1)),
        Site::new(Internal::Up, MotionalLabel::fock(2)),
    ]);
    let topo = NetworkTopology::chain(2).unwrap();
    let err = ideal_transfer(&ket, &topo).unwrap_err();
    assert!(matches!(err, Error::PreconditionViolation { .. }));
    assert!(err.is_protocol());
}

#[test]
fn impossible_outcome_is_reported() {
    let ket = SymbolicKet::product(vec![Site::up_vacuum(), Site::up_vacuum()]);
    let err = measure_internal(&ket, 0, Internal::Down).unwrap_err();
    assert!(matches!(err, Error::ZeroProbability { atom: 0, .. }));
}

#[test]
fn recombining_twice_flips_the_qubit() {
    let up = SymbolicKet::product(vec![Site::new(Internal::Up, MotionalLabel::fock(3))]);
    let u = rotations::recombine();
    let twice = rotate_internal(&rotate_internal(&up, 0, &u).unwrap(), 0, &u).unwrap();
    let down = SymbolicKet::product(vec![Site::new(Internal::Down, MotionalLabel::fock(3))]);
    let amp = down.inner(&twice).unwrap();
    assert!((amp - Complex::new(-1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn non_unitary_rotation_is_rejected() {
    let ket = SymbolicKet::product(vec![Site::up_vacuum()]);
    let one = Complex::new(1.0, 0.0);
    let zero = Complex::new(0.0, 0.0);
    let err = rotate_internal(&ket, 0, &[[one, one], [zero, one]]).unwrap_err();
    assert!(err.is_protocol());
}

#[test]
fn result_round_trips_through_json() {
    let r = scenario_two_atom_cat(Complex::new(1.0, 0.5)).unwrap();
    let text = serde_json::to_string(&r).unwrap();
    let back: ProtocolResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}
