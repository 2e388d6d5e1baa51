//! Parameter-regime checks for the effective transfer model.
//!
//! Every check reduces to a dimensionless ratio compared against a pass and a
//! marginal threshold. The thresholds are policy, not physics: the underlying
//! conditions are only stated as "much greater than".

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::transfer::PhysicalParams;

/// Relative slack when comparing a ratio against a threshold, so that values
/// such as `9.999999999` for an intended 10 are not demoted by rounding.
const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Marginal,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Marginal => "marginal",
            Verdict::Fail => "fail",
        })
    }
}

/// Whether a large or a small ratio is good.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtLeast,
    AtMost,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub pass: f64,
    pub marginal: f64,
}

impl Band {
    pub const fn new(pass: f64, marginal: f64) -> Self {
        Self { pass, marginal }
    }

    fn classify(&self, ratio: f64, direction: Direction) -> Verdict {
        let meets = |thr: f64| match direction {
            Direction::AtLeast => ratio >= thr * (1.0 - THRESHOLD_SLACK),
            Direction::AtMost => ratio <= thr * (1.0 + THRESHOLD_SLACK),
        };
        if meets(self.pass) {
            Verdict::Pass
        } else if meets(self.marginal) {
            Verdict::Marginal
        } else {
            Verdict::Fail
        }
    }
}

/// Threshold policy; every field has a default so configs may override a subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub lamb_dicke: Band,
    pub trap_over_kappa: Band,
    pub kappa_over_omega: Band,
    pub detuning_hierarchy: Band,
    pub cooperativity: Band,
    /// Optional absolute window `[lo, hi]` for the peak transfer rate Γ, in the
    /// same units as the physical parameters. Off by default because it is
    /// the only check that is not scale invariant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_window: Option<[f64; 2]>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            lamb_dicke: Band::new(0.05, 0.1),
            trap_over_kappa: Band::new(10.0, 5.0),
            kappa_over_omega: Band::new(10.0, 3.0),
            detuning_hierarchy: Band::new(100.0, 10.0),
            cooperativity: Band::new(10.0, 1.0),
            gamma_window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, dimensionless.
    pub ratio: f64,
    pub direction: Direction,
    pub pass_threshold: f64,
    pub marginal_threshold: f64,
    pub verdict: Verdict,
}

impl CheckEntry {
    fn ratio_check(name: &str, lhs: f64, rhs: f64, band: Band, direction: Direction) -> Result<Self> {
        if rhs == 0.0 {
            return Err(Error::Domain(format!("{name}: zero denominator")));
        }
        let ratio = lhs / rhs;
        Ok(Self {
            name: name.to_string(),
            lhs,
            rhs,
            ratio,
            direction,
            pass_threshold: band.pass,
            marginal_threshold: band.marginal,
            verdict: band.classify(ratio, direction),
        })
    }
}

/// Occupation statistics of the motional state being transferred.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionalStats {
    pub n_bar: f64,
    pub sigma: f64,
}

impl MotionalStats {
    /// Coherent state: Poissonian, `σ = √n̄`.
    pub fn coherent(n_bar: f64) -> Self {
        Self {
            n_bar,
            sigma: n_bar.sqrt(),
        }
    }

    pub fn fock(n: usize) -> Self {
        Self {
            n_bar: n as f64,
            sigma: 0.0,
        }
    }
}

/// `(1 + n̄ + 3σ)/2`.
pub fn lamb_dicke_bracket(n_bar: f64, sigma: f64) -> f64 {
    (1.0 + n_bar + 3.0 * sigma) / 2.0
}

/// `v = η²(1 + n̄ + 3σ)/2`, required to be small.
pub fn lamb_dicke_check_with(eta_x: f64, n_bar: f64, sigma: f64, band: Band) -> Result<CheckEntry> {
    for (name, v) in [("eta_x", eta_x), ("n_bar", n_bar), ("sigma", sigma)] {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("{name} must be non-negative, got {v}")));
        }
    }
    let v = eta_x * eta_x * lamb_dicke_bracket(n_bar, sigma);
    CheckEntry::ratio_check("lamb_dicke", v, 1.0, band, Direction::AtMost)
}

pub fn lamb_dicke_check(eta_x: f64, n_bar: f64, sigma: f64) -> Result<CheckEntry> {
    lamb_dicke_check_with(eta_x, n_bar, sigma, Thresholds::default().lamb_dicke)
}

/// ν_x/κ, κ/Ω_peak and |Δ|/max(ℰ_A, g₀, δ, ν_x).
pub fn hierarchy_check_with<T: Real>(p: &PhysicalParams<T>, th: &Thresholds) -> Result<Vec<CheckEntry>> {
    p.validate()?;
    let f = |x: T| x.as_f64();
    let omega = f(p.omega_peak()?);
    let largest = [f(p.laser_amplitude.peak()), f(p.g0), f(p.cavity_detuning), f(p.nu_x)]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(vec![
        CheckEntry::ratio_check("trap_over_kappa", f(p.nu_x), f(p.kappa), th.trap_over_kappa, Direction::AtLeast)?,
        CheckEntry::ratio_check("kappa_over_omega", f(p.kappa), omega, th.kappa_over_omega, Direction::AtLeast)?,
        CheckEntry::ratio_check(
            "detuning_hierarchy",
            f(p.detuning).abs(),
            largest,
            th.detuning_hierarchy,
            Direction::AtLeast,
        )?,
    ])
}

pub fn hierarchy_check<T: Real>(p: &PhysicalParams<T>) -> Result<Vec<CheckEntry>> {
    hierarchy_check_with(p, &Thresholds::default())
}

/// Cooperativity `C = g₀²/(κγ)`.
pub fn strong_coupling_check_with(g0: f64, kappa: f64, gamma_sp: f64, band: Band) -> Result<CheckEntry> {
    if !(kappa > 0.0) || !(gamma_sp > 0.0) {
        return Err(Error::Domain(format!(
            "cooperativity needs kappa > 0 and gamma_sp > 0, got {kappa} and {gamma_sp}"
        )));
    }
    CheckEntry::ratio_check("cooperativity", g0 * g0, kappa * gamma_sp, band, Direction::AtLeast)
}

pub fn strong_coupling_check(g0: f64, kappa: f64, gamma_sp: f64) -> Result<CheckEntry> {
    strong_coupling_check_with(g0, kappa, gamma_sp, Thresholds::default().cooperativity)
}

/// Peak Γ inside `[lo, hi]`: pass or fail, no marginal band.
pub fn gamma_window_check<T: Real>(p: &PhysicalParams<T>, window: [f64; 2]) -> Result<CheckEntry> {
    let gamma = p.gamma_peak()?.as_f64();
    let [lo, hi] = window;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidArgument(format!("bad Γ window [{lo}, {hi}]")));
    }
    let inside = gamma >= lo * (1.0 - THRESHOLD_SLACK) && gamma <= hi * (1.0 + THRESHOLD_SLACK);
    Ok(CheckEntry {
        name: "gamma_window".to_string(),
        lhs: gamma,
        rhs: lo,
        ratio: gamma / lo,
        direction: Direction::AtLeast,
        pass_threshold: 1.0,
        marginal_threshold: hi / lo,
        verdict: if inside { Verdict::Pass } else { Verdict::Fail },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub entries: Vec<CheckEntry>,
    /// Peak rates derived from the parameters, for reference.
    pub omega_peak: f64,
    pub gamma_peak: f64,
    pub overall: Verdict,
}

impl RegimeReport {
    pub fn entry(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Fixed-width table, one row per check.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<20} {:>14} {:>14} {:>12} {:>8} {:>10}  {}\n",
            "check", "lhs", "rhs", "ratio", "pass", "marginal", "verdict"
        );
        for e in &self.entries {
            let op = match e.direction {
                Direction::AtLeast => ">=",
                Direction::AtMost => "<=",
            };
            out.push_str(&format!(
                "{:<20} {:>14.6e} {:>14.6e} {:>12.5} {:>2}{:>6} {:>10}  {}\n",
                e.name,
                e.lhs,
                e.rhs,
                e.ratio,
                op,
                format!("{}", e.pass_threshold),
                format!("{}", e.marginal_threshold),
                e.verdict
            ));
        }
        out.push_str(&format!("overall: {}\n", self.overall));
        out
    }
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// All checks for one parameter set and motional state.
pub fn regime_report<T: Real>(p: &PhysicalParams<T>, motion: MotionalStats, th: &Thresholds) -> Result<RegimeReport> {
    let mut entries = vec![lamb_dicke_check_with(p.eta_x.as_f64(), motion.n_bar, motion.sigma, th.lamb_dicke)?];
    entries.extend(hierarchy_check_with(p, th)?);
    entries.push(strong_coupling_check_with(
        p.g0.as_f64(),
        p.kappa.as_f64(),
        p.gamma_sp.as_f64(),
        th.cooperativity,
    )?);
    if let Some(w) = th.gamma_window {
        entries.push(gamma_window_check(p, w)?);
    }
    let overall = entries.iter().map(|e| e.verdict).max().unwrap_or(Verdict::Pass);
    Ok(RegimeReport {
        entries,
        omega_peak: p.omega_peak()?.as_f64(),
        gamma_peak: p.gamma_peak()?.as_f64(),
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::LaserAmplitude;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn example() -> PhysicalParams<f64> {
        let tau = 2.0 * PI;
        PhysicalParams {
            nu_x: tau * 5e6,
            kappa: tau * 5e5,
            g0: tau * 1e7,
            eta_x: 0.1,
            detuning: tau * 1e9,
            laser_amplitude: LaserAmplitude::Constant(0.0),
            gamma_sp: tau * 3e6,
            cavity_detuning: tau * 5e6,
            laser_phase: 0.0,
        }
        .with_omega_peak(tau * 5e4)
        .unwrap()
    }

    #[test]
    fn lamb_dicke_values() {
        let n: f64 = 10.0;
        assert_relative_eq!(lamb_dicke_bracket(n, n.sqrt()), 10.2434, epsilon = 1e-4);
        let e = lamb_dicke_check(0.1, n, n.sqrt()).unwrap();
        assert_relative_eq!(e.ratio, 0.102434, epsilon = 1e-6);
        assert_eq!(e.verdict, Verdict::Fail);
        let g = lamb_dicke_check(0.2, 0.0, 0.0).unwrap();
        assert_relative_eq!(g.ratio, 0.02, epsilon = 1e-15);
        assert_eq!(g.verdict, Verdict::Pass);
        assert_eq!(lamb_dicke_check(0.4, 0.0, 0.0).unwrap().verdict, Verdict::Marginal);
        assert!(lamb_dicke_check(-0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn trap_over_kappa_example_passes() {
        let p = example();
        let h = hierarchy_check(&p).unwrap();
        assert_relative_eq!(h[0].ratio, 10.0, epsilon = 1e-12);
        assert_eq!(h[0].verdict, Verdict::Pass);
        assert_relative_eq!(h[1].ratio, 10.0, epsilon = 1e-9);
        assert_relative_eq!(p.gamma_peak().unwrap() / (2.0 * PI), 5e3, epsilon = 1e-6);
    }

    #[test]
    fn kappa_equal_omega_fails() {
        let p = example();
        let p = p.with_omega_peak(p.kappa).unwrap();
        let h = hierarchy_check(&p).unwrap();
        assert_eq!(h[1].verdict, Verdict::Fail);
    }

    #[test]
    fn cooperativity_bands() {
        assert_eq!(strong_coupling_check(10.0, 1.0, 1.0).unwrap().verdict, Verdict::Pass);
        let one = strong_coupling_check(2.0, 2.0, 2.0).unwrap();
        assert_relative_eq!(one.ratio, 1.0);
        assert_eq!(one.verdict, Verdict::Marginal);
        assert_eq!(strong_coupling_check(0.5, 1.0, 1.0).unwrap().verdict, Verdict::Fail);
        assert!(strong_coupling_check(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_denominators_are_domain_errors() {
        let mut p = example();
        p.kappa = 0.0;
        assert!(matches!(hierarchy_check(&p), Err(Error::Domain(_))));
        let mut p = example();
        p.detuning = 0.0;
        assert!(matches!(hierarchy_check(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn report_with_gamma_window() {
        let tau = 2.0 * PI;
        let th = Thresholds {
            gamma_window: Some([tau * 5e3, tau * 2e4]),
            ..Thresholds::default()
        };
        let r = regime_report(&example(), MotionalStats::fock(1), &th).unwrap();
        assert_eq!(r.entry("gamma_window").unwrap().verdict, Verdict::Pass);
        assert_eq!(r.entries.len(), 6);
        assert!(r.to_table().contains("trap_over_kappa"));
        let json = serde_json::to_string(&r).unwrap();
        let back: RegimeReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn thresholds_partial_override() {
        let th: Thresholds = serde_json::from_str(r#"{"cooperativity": {"pass": 50, "marginal": 5}}"#).unwrap();
        assert_eq!(th.cooperativity, Band::new(50.0, 5.0));
        assert_eq!(th.trap_over_kappa, Band::new(10.0, 5.0));
        assert!(serde_json::from_str::<Thresholds>(r#"{"bogus": 1}"#).is_err());
    }
}
