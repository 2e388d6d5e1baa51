use std::f64::consts::PI;

use cascade_core::transfer::LaserAmplitude;
use cascade_core::validity::{regime_report, MotionalStats, Thresholds, Verdict};
use cascade_core::PhysicalParams;
use proptest::prelude::*;

fn params(nu_x: f64, kappa: f64, g0: f64, eta_x: f64, detuning: f64, omega: f64) -> PhysicalParams {
    PhysicalParams {
        nu_x,
        kappa,
        g0,
        eta_x,
        detuning,
        laser_amplitude: LaserAmplitude::Constant(0.0),
        gamma_sp: 2.0 * PI * 3e6,
        cavity_detuning: nu_x,
        laser_phase: 0.0,
    }
    .with_omega_peak(omega)
    .unwrap()
}

fn arb_params() -> impl Strategy<Value = PhysicalParams> {
    (
        1e5f64..1e8,
        1e4f64..1e7,
        1e6f64..1e9,
        0.01f64..0.3,
        1e9f64..1e12,
        1e3f64..1e6,
    )
        .prop_map(|(nu, ka, g, eta, del, om)| params(nu, ka, g, eta, del, om))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn verdicts_are_invariant_under_rate_rescaling(p in arb_params(), s in 1e-3f64..1e3, n_bar in 0.0f64..20.0) {
        let th = Thresholds::default();
        let motion = MotionalStats::coherent(n_bar);
        let a = regime_report(&p, motion, &th).unwrap();
        let b = regime_report(&p.scaled(s), motion, &th).unwrap();
        prop_assert_eq!(a.overall, b.overall);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            prop_assert_eq!(&x.name, &y.name);
            prop_assert_eq!(x.verdict, y.verdict);
            prop_assert!((x.ratio - y.ratio).abs() <= 1e-9 * x.ratio.abs().max(1.0));
        }
        prop_assert!((b.gamma_peak / a.gamma_peak / s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn larger_kappa_never_improves_the_trap_check(p in arb_params(), factor in 1.0f64..100.0) {
        let th = Thresholds::default();
        let motion = MotionalStats::fock(0);
        let mut q = p.clone();
        q.kappa *= factor;
        let a = regime_report(&p, motion, &th).unwrap();
        let b = regime_report(&q, motion, &th).unwrap();
        let trap_a = a.entry("trap_over_kappa").unwrap();
        let trap_b = b.entry("trap_over_kappa").unwrap();
        prop_assert!(trap_b.ratio <= trap_a.ratio * (1.0 + 1e-12));
        prop_assert!(trap_b.verdict >= trap_a.verdict);
        // κ/Ω moves the other way.
        let ko_a = a.entry("kappa_over_omega").unwrap();
        let ko_b = b.entry("kappa_over_omega").unwrap();
        prop_assert!(ko_b.verdict <= ko_a.verdict);
        // Γ = Ω²/κ shrinks.
        prop_assert!(b.gamma_peak <= a.gamma_peak * (1.0 + 1e-12));
    }

    #[test]
    fn overall_is_the_worst_entry(p in arb_params(), n_bar in 0.0f64..50.0) {
        let r = regime_report(&p, MotionalStats::coherent(n_bar), &Thresholds::default()).unwrap();
        let worst = r.entries.iter().map(|e| e.verdict).max().unwrap();
        prop_assert_eq!(r.overall, worst);
    }
}

#[test]
fn lamb_dicke_worsens_with_motional_excitation() {
    let p = params(2.0 * PI * 5e6, 2.0 * PI * 5e5, 2.0 * PI * 1e8, 0.1, 2.0 * PI * 2e10, 2.0 * PI * 5e4);
    let th = Thresholds::default();
    let mut last = Verdict::Pass;
    for n_bar in [0.0, 1.0, 5.0, 10.0, 40.0, 200.0] {
        let r = regime_report(&p, MotionalStats::coherent(n_bar), &th).unwrap();
        let v = r.entry("lamb_dicke").unwrap().verdict;
        assert!(v >= last, "n_bar {n_bar}: {v} after {last}");
        last = v;
    }
    assert_eq!(last, Verdict::Fail);
}

#[test]
fn thresholds_reject_unknown_fields() {
    let err = serde_json::from_str::<Thresholds>(r#"{"lamb_dikce": {"pass": 0.1, "marginal": 0.2}}"#);
    assert!(err.is_err());
    let partial: Thresholds = serde_json::from_str(r#"{"gamma_window": [1.0, 2.0]}"#).unwrap();
    assert_eq!(partial.lamb_dicke, Thresholds::default().lamb_dicke);
}
