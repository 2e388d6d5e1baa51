use cascade_core::dynamics::{CascadeOptions, Channel};
use cascade_core::hilbert::{coherent_state, ModeSpace};
use cascade_core::transfer::{canonical_pulses, run_transfer, run_transfer_with};
use cascade_core::{Complex, StateVector, TransferReport};
use proptest::prelude::*;

fn fock(n: usize, dim: usize) -> StateVector {
    StateVector::fock(n, ModeSpace::new(dim).unwrap()).unwrap()
}

fn transfer(input: &StateVector, gamma: f64, gamma_t: f64, eta: f64) -> TransferReport {
    let schedule = canonical_pulses(gamma, gamma_t).unwrap();
    run_transfer(input, &schedule, eta, input.dim(), &schedule.integrator_config()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pulses_are_mirror_images(gamma in 0.1f64..10.0, t in -5.0f64..5.0) {
        let s = canonical_pulses(gamma, 10.0).unwrap();
        prop_assert!((s.gamma1(t) - s.gamma2(-t)).abs() <= 1e-12 * gamma);
        prop_assert!((s.gamma1(t) + s.gamma2(t) - gamma).abs() <= 1e-12 * gamma);
        let r = s.time_reversed();
        prop_assert!((r.gamma1(t) - s.gamma2(t)).abs() <= 1e-12 * gamma);
    }

    #[test]
    fn photon_flux_is_accounted_for(eta in 0.5f64..1.0, n in 0usize..3) {
        let r = transfer(&fock(n, 4), 1.0, 6.0, eta);
        let budget = r.final_occupation + r.emitted_photons + r.lost_photons;
        prop_assert!((budget - r.initial_occupation).abs() < 1e-6, "budget {} vs {}", budget, r.initial_occupation);
        prop_assert!(r.fidelity <= 1.0 + 1e-9);
        prop_assert!(r.max_trace_drift <= 1e-8);
        prop_assert!(r.min_eigenvalue >= -1e-8);
    }

    #[test]
    fn time_rescaling_leaves_fidelity_unchanged(gamma in 0.2f64..5.0) {
        let a = transfer(&fock(1, 4), 1.0, 8.0, 0.9);
        let b = transfer(&fock(1, 4), gamma, 8.0, 0.9);
        prop_assert!((a.fidelity - b.fidelity).abs() < 1e-6);
    }
}

#[test]
fn single_photon_fidelity_tracks_propagation_efficiency() {
    for eta in [1.0, 0.9, 0.7] {
        let r = transfer(&fock(1, 4), 1.0, 10.0, eta);
        assert!((r.fidelity - eta).abs() < 1e-3, "eta {eta}: fidelity {}", r.fidelity);
    }
}

#[test]
fn backward_channel_mirrors_forward() {
    let input = coherent_state(Complex::new(0.6, 0.2), ModeSpace::new(8).unwrap()).unwrap();
    let schedule = canonical_pulses(1.0, 10.0).unwrap();
    let cfg = schedule.integrator_config();
    let fwd = run_transfer_with(&input, &schedule, CascadeOptions::new(1.0, [8, 8]), &cfg).unwrap();
    let mut opts = CascadeOptions::new(1.0, [8, 8]);
    opts.channel = Channel::BACKWARD;
    let back = schedule.time_reversed();
    let bwd = run_transfer_with(&input, &back, opts, &back.integrator_config()).unwrap();
    assert!(fwd.fidelity > 0.999);
    assert!((fwd.fidelity - bwd.fidelity).abs() < 1e-6);
    assert!((fwd.emitted_photons - bwd.emitted_photons).abs() < 1e-6);
}

#[test]
fn short_windows_are_flagged_but_run() {
    let short = transfer(&fock(1, 4), 1.0, 3.0, 1.0);
    let long = transfer(&fock(1, 4), 1.0, 10.0, 1.0);
    assert!(!short.window_adequate);
    assert!(long.window_adequate);
    assert!(short.fidelity < long.fidelity);
}

#[test]
fn mismatched_input_dimension_is_rejected() {
    let schedule = canonical_pulses(1.0, 10.0).unwrap();
    let err = run_transfer(&fock(1, 4), &schedule, 1.0, 6, &schedule.integrator_config());
    assert!(err.is_err());
}

#[test]
fn report_round_trips_through_json() {
    let r = transfer(&fock(1, 3), 1.0, 5.0, 1.0);
    let text = serde_json::to_string(&r).unwrap();
    let back: TransferReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.fidelity, r.fidelity);
    assert_eq!(back.trace.len(), r.trace.len());
}
