//! Scenario configuration files.
//!
//! Every config is a JSON object tagged by `kind`. Unknown keys are rejected
//! at every level so typos fail loudly instead of silently using defaults.

use std::f64::consts::TAU;
use std::path::PathBuf;

use cascade_core::protocol::{Internal, MotionalLabel, Term};
use cascade_core::transfer::{LaserAmplitude, PhysicalParams, DEFAULT_HALF_WINDOW};
use cascade_core::validity::{MotionalStats, Thresholds};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Upper bound on the number of points in a sweep grid.
pub const MAX_SWEEP_POINTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Transfer(TransferConfig),
    Protocol(ProtocolConfig),
    Validity(ValidityConfig),
    Sweep(SweepConfig),
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioConfig::Transfer(_) => "transfer",
            ScenarioConfig::Protocol(_) => "protocol",
            ScenarioConfig::Validity(_) => "validity",
            ScenarioConfig::Sweep(_) => "sweep",
        }
    }

    pub fn output(&self) -> &OutputSpec {
        match self {
            ScenarioConfig::Transfer(c) => &c.output,
            ScenarioConfig::Protocol(c) => &c.output,
            ScenarioConfig::Validity(c) => &c.output,
            ScenarioConfig::Sweep(c) => &c.output,
        }
    }

    /// Semantic checks that do not require running anything.
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            ScenarioConfig::Transfer(c) => c.validate(),
            ScenarioConfig::Protocol(c) => c.scenario.validate(),
            ScenarioConfig::Validity(c) => c.physical_params().map(|_| ()),
            ScenarioConfig::Sweep(c) => c.validate(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
}

/// Integrator settings exposed in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub trace_guard: f64,
    pub positivity_guard: f64,
    pub sample_count: usize,
    /// In units of `1/Γ`.
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            trace_guard: 1e-8,
            positivity_guard: 1e-8,
            sample_count: 101,
            max_step: 0.5,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("trace_guard", self.trace_guard),
            ("positivity_guard", self.positivity_guard),
            ("max_step", self.max_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(CliError::Config(format!("tolerances.{name} must be positive, got {v}")));
            }
        }
        if self.sample_count < 2 {
            return Err(CliError::Config("tolerances.sample_count must be at least 2".into()));
        }
        Ok(())
    }
}

/// Motional input state placed on the source node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputState {
    Fock(usize),
    Coherent(Complex64),
}

impl InputState {
    /// Label used in the `alpha` column of tables.
    pub fn label(&self) -> String {
        match self {
            InputState::Fock(n) => format!("fock:{n}"),
            InputState::Coherent(a) if a.im == 0.0 => format!("{}", a.re),
            InputState::Coherent(a) => format!("{}{:+}i", a.re, a.im),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Angular frequencies (rad/s).
    #[default]
    Angular,
    /// Ordinary frequencies (Hz); converted by 2π on load.
    Cycles,
}

impl Units {
    fn factor(self) -> f64 {
        match self {
            Units::Angular => 1.0,
            Units::Cycles => TAU,
        }
    }

    pub fn to_angular(self, p: &PhysicalParams<f64>) -> PhysicalParams<f64> {
        let s = self.factor();
        let laser_amplitude = match &p.laser_amplitude {
            LaserAmplitude::Constant(v) => LaserAmplitude::Constant(v * s),
            LaserAmplitude::Tabulated { times, values } => LaserAmplitude::Tabulated {
                times: times.clone(),
                values: values.iter().map(|v| v * s).collect(),
            },
        };
        PhysicalParams {
            nu_x: p.nu_x * s,
            kappa: p.kappa * s,
            g0: p.g0 * s,
            eta_x: p.eta_x,
            detuning: p.detuning * s,
            laser_amplitude,
            gamma_sp: p.gamma_sp * s,
            cavity_detuning: p.cavity_detuning * s,
            laser_phase: p.laser_phase,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

fn default_eta_p() -> f64 {
    1.0
}

fn default_gamma_t() -> f64 {
    DEFAULT_HALF_WINDOW
}

fn check_eta_p(eta_p: f64) -> Result<(), CliError> {
    if !(eta_p > 0.0 && eta_p <= 1.0) {
        return Err(CliError::Config(format!("eta_p must lie in (0, 1], got {eta_p}")));
    }
    Ok(())
}

fn check_gamma_t(gamma_t: f64) -> Result<(), CliError> {
    if !(gamma_t > 0.0 && gamma_t.is_finite()) {
        return Err(CliError::Config(format!("gamma_t must be positive, got {gamma_t}")));
    }
    Ok(())
}

fn check_n_max(n_max: usize) -> Result<(), CliError> {
    if n_max < 2 {
        return Err(CliError::Config(format!("n_max must be at least 2, got {n_max}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub input: InputState,
    #[serde(default = "default_eta_p")]
    pub eta_p: f64,
    #[serde(default = "default_gamma_t", alias = "GammaT")]
    pub gamma_t: f64,
    pub n_max: usize,
    /// Peak Γ in the simulation's time unit; defaults to 1 unless `physical` is given.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub physical: Option<PhysicalParams<f64>>,
    #[serde(default)]
    pub direction: Direction,
    /// Override of the upstream phase θ (radians).
    #[serde(default)]
    pub source_phase: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Include the sampled occupations and photon counts in the result.
    #[serde(default)]
    pub trajectory: bool,
    #[serde(default)]
    pub output: OutputSpec,
}

fn resolve_gamma(gamma: Option<f64>, units: Units, physical: Option<&PhysicalParams<f64>>) -> Result<f64, CliError> {
    match (gamma, physical) {
        (Some(_), Some(_)) => Err(CliError::Config("give either `gamma` or `physical`, not both".into())),
        (Some(g), None) => {
            if g > 0.0 && g.is_finite() {
                Ok(g * units.factor())
            } else {
                Err(CliError::Config(format!("gamma must be positive, got {g}")))
            }
        }
        (None, Some(p)) => {
            let p = units.to_angular(p);
            p.validate()?;
            let g = p.gamma_peak()?;
            if g > 0.0 && g.is_finite() {
                Ok(g)
            } else {
                Err(CliError::Config(format!("physical parameters give a non-positive Γ ({g})")))
            }
        }
        (None, None) => Ok(1.0),
    }
}

impl TransferConfig {
    pub fn peak_rate(&self) -> Result<f64, CliError> {
        resolve_gamma(self.gamma, self.units, self.physical.as_ref())
    }

    fn validate(&self) -> Result<(), CliError> {
        check_eta_p(self.eta_p)?;
        check_gamma_t(self.gamma_t)?;
        check_n_max(self.n_max)?;
        self.tolerances.validate()?;
        self.peak_rate().map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub inputs: Vec<InputState>,
    #[serde(default = "default_sweep_eta")]
    pub eta_p: Vec<f64>,
    #[serde(default = "default_sweep_gamma_t", alias = "GammaT")]
    pub gamma_t: Vec<f64>,
    pub n_max: Vec<usize>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub physical: Option<PhysicalParams<f64>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_sweep_eta() -> Vec<f64> {
    vec![1.0]
}

fn default_sweep_gamma_t() -> Vec<f64> {
    vec![DEFAULT_HALF_WINDOW]
}

/// One grid point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub input: InputState,
    pub eta_p: f64,
    pub gamma_t: f64,
    pub n_max: usize,
}

impl SweepConfig {
    pub fn point_count(&self) -> usize {
        [self.inputs.len(), self.eta_p.len(), self.gamma_t.len(), self.n_max.len()]
            .iter()
            .fold(1usize, |acc, &n| acc.saturating_mul(n))
    }

    /// Grid points in row-major order: inputs, then η_p, then ΓT, then n_max.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::with_capacity(self.point_count());
        for &input in &self.inputs {
            for &eta_p in &self.eta_p {
                for &gamma_t in &self.gamma_t {
                    for &n_max in &self.n_max {
                        out.push(SweepPoint {
                            input,
                            eta_p,
                            gamma_t,
                            n_max,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn peak_rate(&self) -> Result<f64, CliError> {
        resolve_gamma(self.gamma, self.units, self.physical.as_ref())
    }

    fn validate(&self) -> Result<(), CliError> {
        let n = self.point_count();
        if n > MAX_SWEEP_POINTS {
            return Err(CliError::Config(format!(
                "sweep grid has {n} points; the limit is {MAX_SWEEP_POINTS}"
            )));
        }
        self.eta_p.iter().try_for_each(|&e| check_eta_p(e))?;
        self.gamma_t.iter().try_for_each(|&g| check_gamma_t(g))?;
        self.n_max.iter().try_for_each(|&m| check_n_max(m))?;
        self.tolerances.validate()?;
        self.peak_rate().map(|_| ())
    }
}

/// Motional label as written in configs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSpec {
    Fock(usize),
    Coherent(Complex64),
}

impl LabelSpec {
    pub fn to_label(self) -> MotionalLabel<f64> {
        match self {
            LabelSpec::Fock(n) => MotionalLabel::fock(n),
            LabelSpec::Coherent(a) => MotionalLabel::coherent(a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    TwoAtomCat { alpha: Complex64 },
    ThreeAtomCat { alpha: Complex64 },
    NAtomCat { alpha: Complex64, n: usize },
    Ghz { phi: LabelSpec },
    Hardy { a: Complex64, b: Complex64 },
    /// User-defined operation sequence on an explicit initial ket.
    Script {
        initial: Vec<Term<f64>>,
        /// Directed channels; defaults to the chain `k → k+1`.
        #[serde(default)]
        channels: Option<Vec<(usize, usize)>>,
        steps: Vec<StepSpec>,
        #[serde(default)]
        target: Option<Vec<Term<f64>>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedRotation {
    Identity,
    Recombine,
    SplitEven,
    Flip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationSpec {
    Named(NamedRotation),
    /// `u[out][in]` in the `(up, down)` basis.
    Matrix([[Complex64; 2]; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSpec {
    Transfer { from: usize, to: usize },
    Reroute { from: usize, to: usize },
    Rotate { atom: usize, rotation: RotationSpec },
    Measure { atom: usize, outcome: Internal },
    Displace { atom: usize, phi: LabelSpec },
}

impl ScenarioSpec {
    fn validate(&self) -> Result<(), CliError> {
        match self {
            ScenarioSpec::NAtomCat { n, .. } if *n < 2 => {
                Err(CliError::Config(format!("n_atom_cat needs n >= 2, got {n}")))
            }
            ScenarioSpec::Hardy { a, b } => {
                let s = a.norm_sqr() + b.norm_sqr();
                if (s - 1.0).abs() > 1e-12 {
                    Err(CliError::Config(format!("hardy needs |a|^2 + |b|^2 = 1, got {s}")))
                } else {
                    Ok(())
                }
            }
            ScenarioSpec::Script { initial, steps, .. } => {
                let n = initial.first().map_or(0, |t| t.sites.len());
                if n == 0 {
                    return Err(CliError::Config("script needs a non-empty initial ket".into()));
                }
                if steps.is_empty() {
                    return Err(CliError::Config("script has no steps".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Occupation statistics of the state whose transfer is being assessed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionSpec {
    /// Coherent state with mean occupation `n̄`; `σ = √n̄`.
    Coherent(f64),
    Fock(usize),
    Explicit(MotionalStats),
}

impl MotionSpec {
    pub fn stats(self) -> MotionalStats {
        match self {
            MotionSpec::Coherent(n) => MotionalStats::coherent(n),
            MotionSpec::Fock(n) => MotionalStats::fock(n),
            MotionSpec::Explicit(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidityConfig {
    #[serde(default)]
    pub units: Units,
    pub physical: PhysicalParams<f64>,
    /// Peak Ω to realise by choosing the laser amplitude, `ℰ_A = ΩΔ/(g₀η_x)`.
    #[serde(default)]
    pub omega_peak: Option<f64>,
    pub motion: MotionSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ValidityConfig {
    /// Parameters in angular units with the laser amplitude resolved.
    pub fn physical_params(&self) -> Result<PhysicalParams<f64>, CliError> {
        let mut p = self.units.to_angular(&self.physical);
        if let Some(om) = self.omega_peak {
            if !(om > 0.0) {
                return Err(CliError::Config(format!("omega_peak must be positive, got {om}")));
            }
            p = p.with_omega_peak(om * self.units.factor())?;
        }
        p.validate()?;
        if let MotionSpec::Coherent(n) = self.motion {
            if !(n >= 0.0) {
                return Err(CliError::Config(format!("coherent n_bar must be non-negative, got {n}")));
            }
        }
        Ok(p)
    }

    /// Thresholds with any Γ window converted to angular units.
    pub fn thresholds(&self) -> Thresholds {
        let mut th = self.thresholds.clone();
        if let Some([lo, hi]) = th.gamma_window {
            th.gamma_window = Some([lo * self.units.factor(), hi * self.units.factor()]);
        }
        th
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{"kind": "transfer", "input": {"fock": 1}, "n_max": 4, "etap": 0.9}"#;
        assert!(matches!(ScenarioConfig::parse(bad), Err(CliError::Config(_))));
        let bad_kind = r#"{"kind": "teleport"}"#;
        assert!(ScenarioConfig::parse(bad_kind).is_err());
    }

    #[test]
    fn transfer_defaults() {
        let ok = r#"{"kind": "transfer", "input": {"coherent": [1.0, 0.0]}, "n_max": 12}"#;
        let ScenarioConfig::Transfer(t) = ScenarioConfig::parse(ok).unwrap() else {
            panic!("wrong kind")
        };
        assert_eq!(t.eta_p, 1.0);
        assert_eq!(t.gamma_t, 10.0);
        assert_eq!(t.peak_rate().unwrap(), 1.0);
        assert_eq!(t.input.label(), "1");
    }

    #[test]
    fn sweep_grid_order_and_cap() {
        let cfg = r#"{"kind": "sweep", "inputs": [{"fock": 1}], "eta_p": [1.0, 0.9], "gamma_t": [3, 5], "n_max": [4]}"#;
        let ScenarioConfig::Sweep(s) = ScenarioConfig::parse(cfg).unwrap() else {
            panic!("wrong kind")
        };
        let pts = s.points();
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].eta_p, pts[1].gamma_t), (1.0, 5.0));
        let big = format!(
            r#"{{"kind": "sweep", "inputs": [{{"fock": 1}}], "eta_p": [{}], "n_max": [4]}}"#,
            vec!["1.0"; 10_001].join(",")
        );
        assert!(ScenarioConfig::parse(&big).is_err());
    }

    #[test]
    fn cycles_convert_to_angular() {
        let p = PhysicalParams {
            nu_x: 5e6,
            kappa: 5e5,
            g0: 1e7,
            eta_x: 0.1,
            detuning: 1e9,
            laser_amplitude: LaserAmplitude::Constant(1e8),
            gamma_sp: 3e6,
            cavity_detuning: 5e6,
            laser_phase: 0.3,
        };
        let a = Units::Cycles.to_angular(&p);
        assert_eq!(a.kappa, 5e5 * TAU);
        assert_eq!(a.eta_x, 0.1);
        assert_eq!(a.laser_phase, 0.3);
    }
}
