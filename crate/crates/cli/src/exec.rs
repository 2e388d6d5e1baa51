//! Execution of parsed scenario configs.

use cascade_core::dynamics::{CascadeOptions, Channel};
use cascade_core::hilbert::{coherent_state, ModeSpace};
use cascade_core::protocol::{
    rotations, scenario_ghz, scenario_hardy, scenario_n_atom_cat, scenario_three_atom_cat, scenario_two_atom_cat,
    NetworkTopology, ProtocolRunner, Term,
};
use cascade_core::transfer::{canonical_pulses, run_transfer_with};
use cascade_core::validity::regime_report;
use cascade_core::{ProtocolResult, RegimeReport, StateVector, SymbolicKet, TransferReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    Direction, InputState, NamedRotation, ProtocolConfig, RotationSpec, ScenarioConfig, ScenarioSpec, StepSpec,
    SweepConfig, SweepPoint, Tolerances, TransferConfig, ValidityConfig,
};
use crate::error::CliError;

/// One row of a transfer table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferRow {
    pub alpha: String,
    pub eta_p: f64,
    #[serde(rename = "GammaT")]
    pub gamma_t: f64,
    pub n_max: usize,
    pub fidelity: f64,
    pub residual_n1: f64,
    pub emitted_photons: f64,
    pub lost_photons: f64,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
    pub window_adequate: bool,
}

pub const TRANSFER_COLUMNS: [&str; 11] = [
    "alpha",
    "eta_p",
    "GammaT",
    "n_max",
    "fidelity",
    "residual_n1",
    "emitted_photons",
    "lost_photons",
    "max_trace_drift",
    "min_eigenvalue",
    "window_adequate",
];

impl TransferRow {
    fn new(p: &SweepPoint, r: &TransferReport) -> Self {
        Self {
            alpha: p.input.label(),
            eta_p: p.eta_p,
            gamma_t: p.gamma_t,
            n_max: p.n_max,
            fidelity: r.fidelity,
            residual_n1: r.residual_source_occupation,
            emitted_photons: r.emitted_photons,
            lost_photons: r.lost_photons,
            max_trace_drift: r.max_trace_drift,
            min_eigenvalue: r.min_eigenvalue,
            window_adequate: r.window_adequate,
        }
    }
}

pub enum Outcome {
    Transfer { row: TransferRow, report: TransferReport },
    Protocol(ProtocolResult),
    Validity(RegimeReport),
    Sweep(Vec<TransferRow>),
}

impl Outcome {
    /// One-line human summary for stderr.
    pub fn summary(&self) -> String {
        match self {
            Outcome::Transfer { row, .. } => format!(
                "transfer {}: fidelity {:.6}, residual n1 {:.3e}, emitted {:.3e}",
                row.alpha, row.fidelity, row.residual_n1, row.emitted_photons
            ),
            Outcome::Protocol(r) => match r.target_overlap {
                Some(o) => format!(
                    "{}: success probability {:.12}, target overlap {:.15}",
                    r.scenario, r.success_probability, o
                ),
                None => format!("{}: success probability {:.12}", r.scenario, r.success_probability),
            },
            Outcome::Validity(r) => format!("regime report: overall {}", r.overall),
            Outcome::Sweep(rows) => format!("sweep: {} rows", rows.len()),
        }
    }
}

fn input_state(input: InputState, n_max: usize) -> Result<StateVector, CliError> {
    let space = ModeSpace::new(n_max)?;
    Ok(match input {
        InputState::Fock(n) => StateVector::fock(n, space)?,
        InputState::Coherent(a) => coherent_state(a, space)?,
    })
}

struct TransferSettings<'a> {
    gamma: f64,
    tolerances: &'a Tolerances,
    direction: Direction,
    source_phase: Option<f64>,
}

fn transfer_point(p: &SweepPoint, s: &TransferSettings<'_>) -> Result<TransferReport, CliError> {
    let input = input_state(p.input, p.n_max)?;
    let mut schedule = canonical_pulses(s.gamma, p.gamma_t)?;
    let mut opts = CascadeOptions::new(p.eta_p, [p.n_max, p.n_max]);
    if s.direction == Direction::Backward {
        // Node 2 must now ramp up while node 1 ramps down.
        schedule = schedule.time_reversed();
        opts.channel = Channel::BACKWARD;
    }
    if let Some(theta) = s.source_phase {
        opts.source_phase = theta;
    }
    let mut cfg = schedule.integrator_config();
    let t = s.tolerances;
    cfg.rel_tol = t.rel_tol;
    cfg.abs_tol = t.abs_tol;
    cfg.trace_guard = t.trace_guard;
    cfg.positivity_guard = t.positivity_guard;
    cfg.sample_count = t.sample_count;
    cfg.max_step = (t.max_step / s.gamma).min((cfg.t_end - cfg.t_start) / 20.0);
    Ok(run_transfer_with(&input, &schedule, opts, &cfg)?)
}

fn run_transfer(c: &TransferConfig) -> Result<Outcome, CliError> {
    let point = SweepPoint {
        input: c.input,
        eta_p: c.eta_p,
        gamma_t: c.gamma_t,
        n_max: c.n_max,
    };
    let settings = TransferSettings {
        gamma: c.peak_rate()?,
        tolerances: &c.tolerances,
        direction: c.direction,
        source_phase: c.source_phase,
    };
    let mut report = transfer_point(&point, &settings)?;
    if !c.trajectory {
        report.trace.clear();
    }
    Ok(Outcome::Transfer {
        row: TransferRow::new(&point, &report),
        report,
    })
}

fn run_protocol(c: &ProtocolConfig) -> Result<Outcome, CliError> {
    let r = match &c.scenario {
        ScenarioSpec::TwoAtomCat { alpha } => scenario_two_atom_cat(*alpha),
        ScenarioSpec::ThreeAtomCat { alpha } => scenario_three_atom_cat(*alpha),
        ScenarioSpec::NAtomCat { alpha, n } => scenario_n_atom_cat(*alpha, *n),
        ScenarioSpec::Ghz { phi } => scenario_ghz(phi.to_label()),
        ScenarioSpec::Hardy { a, b } => scenario_hardy(*a, *b),
        ScenarioSpec::Script {
            initial,
            channels,
            steps,
            target,
        } => return run_script(initial, channels.as_deref(), steps, target.as_deref()).map(Outcome::Protocol),
    }?;
    Ok(Outcome::Protocol(r))
}

fn run_script(
    initial: &[Term<f64>],
    channels: Option<&[(usize, usize)]>,
    steps: &[StepSpec],
    target: Option<&[Term<f64>]>,
) -> Result<ProtocolResult, CliError> {
    let n = initial[0].sites.len();
    let ket = SymbolicKet::from_terms(n, initial.to_vec())?;
    let topology = match channels {
        Some(c) => NetworkTopology::new(n, c.to_vec())?,
        None => NetworkTopology::chain(n)?,
    };
    let mut run = ProtocolRunner::new(ket, topology)?;
    for step in steps {
        match step {
            StepSpec::Transfer { from, to } => run.transfer(*from, *to)?,
            StepSpec::Reroute { from, to } => run.reroute(*from, *to)?,
            StepSpec::Rotate { atom, rotation } => {
                let (name, u) = match rotation {
                    RotationSpec::Named(r) => match r {
                        NamedRotation::Identity => ("identity", rotations::identity()),
                        NamedRotation::Recombine => ("recombine", rotations::recombine()),
                        NamedRotation::SplitEven => ("split_even", rotations::split_even()),
                        NamedRotation::Flip => ("flip", rotations::flip()),
                    },
                    RotationSpec::Matrix(m) => ("matrix", *m),
                };
                run.rotate(*atom, name, &u)?
            }
            StepSpec::Measure { atom, outcome } => run.measure(*atom, *outcome)?,
            StepSpec::Displace { atom, phi } => run.displace(*atom, phi.to_label())?,
        };
    }
    let target = target
        .map(|t| SymbolicKet::from_terms(n, t.to_vec()))
        .transpose()?;
    Ok(run.finish("script", target.as_ref())?)
}

fn run_validity(c: &ValidityConfig) -> Result<Outcome, CliError> {
    let p = c.physical_params()?;
    Ok(Outcome::Validity(regime_report(&p, c.motion.stats(), &c.thresholds())?))
}

/// Rows come back in grid order regardless of scheduling; the first failing
/// point (in grid order) aborts the sweep.
fn run_sweep(c: &SweepConfig, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let settings = TransferSettings {
        gamma: c.peak_rate()?,
        tolerances: &c.tolerances,
        direction: Direction::Forward,
        source_phase: None,
    };
    let points = c.points();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<TransferRow, CliError>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| transfer_point(p, &settings).map(|r| TransferRow::new(p, &r)))
            .collect()
    });
    Ok(Outcome::Sweep(results.into_iter().collect::<Result<_, _>>()?))
}

pub fn execute(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<Outcome, CliError> {
    match cfg {
        ScenarioConfig::Transfer(c) => run_transfer(c),
        ScenarioConfig::Protocol(c) => run_protocol(c),
        ScenarioConfig::Validity(c) => run_validity(c),
        ScenarioConfig::Sweep(c) => run_sweep(c, jobs),
    }
}
