//! Pulse schedules, the physical-rate calculator and transfer experiments.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    cascaded_model_with, evolve_observing, CascadeOptions, IntegratorConfig, RateFn, StepStats, CASCADE_OUTPUT,
    PROPAGATION_LOSS,
};
use crate::error::{Error, Result};
use crate::hilbert::{number, tensor, DensityOperator, ModeSpace, StateVector};
use crate::scalar::Real;

/// Smallest half-window `ΓT` for which the canonical pulses are fully switched.
pub const MIN_ADEQUATE_HALF_WINDOW: f64 = 5.0;
pub const DEFAULT_HALF_WINDOW: f64 = 10.0;

/// Effective coupling rates of the two nodes and the simulation window.
#[derive(Clone)]
pub struct PulseSchedule<T: Real> {
    peak: T,
    gamma1: RateFn<T>,
    gamma2: RateFn<T>,
    window: (T, T),
}

impl<T: Real> std::fmt::Debug for PulseSchedule<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PulseSchedule")
            .field("peak", &self.peak)
            .field("window", &self.window)
            .finish()
    }
}

impl<T: Real> PulseSchedule<T> {
    pub fn new(peak: T, gamma1: RateFn<T>, gamma2: RateFn<T>, window: (T, T)) -> Result<Self> {
        if !(window.1 > window.0) {
            return Err(Error::InvalidArgument("schedule window must be increasing".into()));
        }
        if !(peak >= T::zero()) {
            return Err(Error::InvalidArgument("peak rate must be non-negative".into()));
        }
        Ok(Self {
            peak,
            gamma1,
            gamma2,
            window,
        })
    }

    /// Both rates held at fixed values over `window`.
    pub fn constant(gamma1: T, gamma2: T, window: (T, T)) -> Result<Self> {
        if gamma1 < T::zero() || gamma2 < T::zero() {
            return Err(Error::InvalidArgument("rates must be non-negative".into()));
        }
        Self::new(gamma1.max(gamma2), Arc::new(move |_| gamma1), Arc::new(move |_| gamma2), window)
    }

    pub fn peak(&self) -> T {
        self.peak
    }

    pub fn window(&self) -> (T, T) {
        self.window
    }

    /// Rate function of node `k` (0 or 1).
    pub fn rate(&self, node: usize) -> RateFn<T> {
        match node {
            0 => self.gamma1.clone(),
            _ => self.gamma2.clone(),
        }
    }

    pub fn gamma1(&self, t: T) -> T {
        (self.gamma1)(t)
    }

    pub fn gamma2(&self, t: T) -> T {
        (self.gamma2)(t)
    }

    /// Half-window in units of `1/Γ`.
    pub fn half_window(&self) -> T {
        (self.window.1 - self.window.0) * self.peak / T::lit(2.0)
    }

    pub fn is_window_adequate(&self) -> bool {
        self.half_window() >= T::lit(MIN_ADEQUATE_HALF_WINDOW)
    }

    /// `Γ_j(t) → Γ_j(−t)` with the window mirrored.
    pub fn time_reversed(&self) -> Self {
        let g1 = self.gamma1.clone();
        let g2 = self.gamma2.clone();
        Self {
            peak: self.peak,
            gamma1: Arc::new(move |t| g1(-t)),
            gamma2: Arc::new(move |t| g2(-t)),
            window: (-self.window.1, -self.window.0),
        }
    }

    /// Exchange the node rates.
    pub fn swapped(&self) -> Self {
        Self {
            peak: self.peak,
            gamma1: self.gamma2.clone(),
            gamma2: self.gamma1.clone(),
            window: self.window,
        }
    }

    /// Default integrator settings spanning the schedule window.
    pub fn integrator_config(&self) -> IntegratorConfig<T> {
        let mut cfg = IntegratorConfig::new(self.window.0, self.window.1);
        if self.peak > T::zero() {
            cfg.max_step = (T::lit(0.5) / self.peak).min(cfg.max_step);
        }
        cfg
    }
}

/// `Γ₁(t) = Γ e^{Γt}/(e^{Γt} + e^{−Γt})`, `Γ₂(t) = Γ₁(−t)` on `[−T/Γ, T/Γ]`.
///
/// Half-windows below [`MIN_ADEQUATE_HALF_WINDOW`] are accepted but flagged by
/// [`PulseSchedule::is_window_adequate`].
pub fn canonical_pulses<T: Real>(gamma: T, half_window: T) -> Result<PulseSchedule<T>> {
    if !(gamma > T::zero()) {
        return Err(Error::InvalidArgument(format!("peak rate must be positive, got {gamma}")));
    }
    if !(half_window > T::zero()) {
        return Err(Error::InvalidArgument(format!("half-window must be positive, got {half_window}")));
    }
    let two = T::lit(2.0);
    let g1: RateFn<T> = Arc::new(move |t: T| gamma / (T::one() + (-two * gamma * t).exp()));
    let g2: RateFn<T> = Arc::new(move |t: T| gamma / (T::one() + (two * gamma * t).exp()));
    let edge = half_window / gamma;
    PulseSchedule::new(gamma, g1, g2, (-edge, edge))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LaserAmplitude<T: Real> {
    /// Constant (peak) amplitude.
    Constant(T),
    /// Piecewise-linear samples; held constant outside the table.
    Tabulated { times: Vec<T>, values: Vec<T> },
}

impl<T: Real> LaserAmplitude<T> {
    pub fn at(&self, t: T) -> T {
        match self {
            LaserAmplitude::Constant(v) => *v,
            LaserAmplitude::Tabulated { times, values } => {
                if times.is_empty() {
                    return T::zero();
                }
                if t <= times[0] {
                    return values[0];
                }
                let last = times.len() - 1;
                if t >= times[last] {
                    return values[last];
                }
                let k = times.partition_point(|&x| x <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                values[k] + (values[k + 1] - values[k]) * w
            }
        }
    }

    pub fn peak(&self) -> T {
        match self {
            LaserAmplitude::Constant(v) => v.abs(),
            LaserAmplitude::Tabulated { values, .. } => values.iter().map(|v| v.abs()).fold(T::zero(), T::max),
        }
    }

    fn validate(&self) -> Result<()> {
        if let LaserAmplitude::Tabulated { times, values } = self {
            if times.len() != values.len() {
                return Err(Error::InvalidArgument("laser table times/values lengths differ".into()));
            }
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidArgument("laser table times must increase".into()));
            }
        }
        Ok(())
    }
}

/// Trap, cavity and laser parameters. All frequencies are angular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams<T: Real> {
    /// Trap frequency ν_x.
    pub nu_x: T,
    /// Cavity field decay rate κ.
    pub kappa: T,
    /// Single-photon coupling g₀.
    pub g0: T,
    /// Lamb-Dicke parameter η_x.
    pub eta_x: T,
    /// Laser-atom detuning Δ.
    pub detuning: T,
    /// Laser amplitude ℰ_A.
    pub laser_amplitude: LaserAmplitude<T>,
    /// Atomic spontaneous emission rate γ.
    pub gamma_sp: T,
    /// Cavity-laser detuning δ; tuned to ν_x and kept for reporting.
    pub cavity_detuning: T,
    /// Laser phase φ_A.
    #[serde(default)]
    pub laser_phase: T,
}

impl<T: Real> PhysicalParams<T> {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("nu_x", self.nu_x),
            ("kappa", self.kappa),
            ("g0", self.g0),
            ("eta_x", self.eta_x),
            ("gamma_sp", self.gamma_sp),
            ("cavity_detuning", self.cavity_detuning),
        ];
        for (name, v) in rates {
            if !(v >= T::zero()) {
                return Err(Error::Domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        self.laser_amplitude.validate()
    }

    /// Peak beam-splitter rate `Ω = g₀ η_x ℰ_A / Δ`.
    pub fn omega_peak(&self) -> Result<T> {
        if self.detuning == T::zero() {
            return Err(Error::Domain("laser-atom detuning Δ is zero".into()));
        }
        Ok((self.g0 * self.eta_x * self.laser_amplitude.peak() / self.detuning).abs())
    }

    /// Peak transfer rate `Γ = Ω²/κ`.
    pub fn gamma_peak(&self) -> Result<T> {
        if self.kappa == T::zero() {
            return Err(Error::Domain("cavity decay rate κ is zero".into()));
        }
        let om = self.omega_peak()?;
        Ok(om * om / self.kappa)
    }

    /// Multiply every rate (not the dimensionless η_x or phase) by `s`.
    pub fn scaled(&self, s: T) -> Self {
        let laser_amplitude = match &self.laser_amplitude {
            LaserAmplitude::Constant(v) => LaserAmplitude::Constant(*v * s),
            LaserAmplitude::Tabulated { times, values } => LaserAmplitude::Tabulated {
                times: times.iter().map(|t| *t / s).collect(),
                values: values.iter().map(|v| *v * s).collect(),
            },
        };
        Self {
            nu_x: self.nu_x * s,
            kappa: self.kappa * s,
            g0: self.g0 * s,
            eta_x: self.eta_x,
            detuning: self.detuning * s,
            laser_amplitude,
            gamma_sp: self.gamma_sp * s,
            cavity_detuning: self.cavity_detuning * s,
            laser_phase: self.laser_phase,
        }
    }

    /// Constant laser amplitude that yields peak rate `omega`: `ℰ_A = ΩΔ/(g₀η_x)`.
    pub fn with_omega_peak(&self, omega: T) -> Result<Self> {
        let denom = self.g0 * self.eta_x;
        if denom == T::zero() {
            return Err(Error::Domain("g0 * eta_x is zero; cannot invert for the laser amplitude".into()));
        }
        let mut out = self.clone();
        out.laser_amplitude = LaserAmplitude::Constant(omega * self.detuning.abs() / denom);
        Ok(out)
    }
}

/// `Ω(t) = g₀η_x ℰ_A(t)/Δ` and `Γ(t) = Ω(t)²/κ`.
pub fn rate_from_physical<T: Real>(p: &PhysicalParams<T>) -> Result<(RateFn<T>, RateFn<T>)> {
    if p.detuning == T::zero() {
        return Err(Error::Domain("laser-atom detuning Δ is zero".into()));
    }
    if p.kappa == T::zero() {
        return Err(Error::Domain("cavity decay rate κ is zero".into()));
    }
    p.laser_amplitude.validate()?;
    let scale = p.g0 * p.eta_x / p.detuning;
    let kappa = p.kappa;
    let amp = p.laser_amplitude.clone();
    let amp2 = p.laser_amplitude.clone();
    let omega: RateFn<T> = Arc::new(move |t| scale * amp.at(t));
    let gamma: RateFn<T> = Arc::new(move |t| {
        let om = scale * amp2.at(t);
        om * om / kappa
    });
    Ok((omega, gamma))
}

/// Outcome of a single two-node transfer run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport<T: Real> {
    /// `⟨target|ρ_sink|target⟩` with the input relabelled onto the sink node.
    pub fidelity: T,
    /// `⟨b†b⟩` left on the source node at the end of the window.
    pub residual_source_occupation: T,
    /// `∫⟨C†C⟩ dt` through the cascade output.
    pub emitted_photons: T,
    /// `∫⟨L†L⟩ dt` through the propagation-loss channel.
    pub lost_photons: T,
    pub initial_occupation: T,
    pub final_occupation: T,
    pub truncation_deficit: T,
    pub max_trace_drift: T,
    pub min_eigenvalue: f64,
    pub window_adequate: bool,
    pub stats: StepStats,
    #[serde(skip)]
    pub final_state: Option<DensityOperator<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sink_state: Option<DensityOperator<T>>,
    /// Sampled expectation values over the window.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint<T>>,
}

/// One sample of a transfer run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint<T: Real> {
    pub t: T,
    pub source_occupation: T,
    pub sink_occupation: T,
    pub emitted_photons: T,
    pub lost_photons: T,
    pub trace_drift: T,
    pub min_eigenvalue: f64,
}

/// Transfer `input` from node 1 to node 2 (forward channel, default phase).
pub fn run_transfer<T: Real>(
    input: &StateVector<T>,
    schedule: &PulseSchedule<T>,
    eta_p: T,
    n_max: usize,
    cfg: &IntegratorConfig<T>,
) -> Result<TransferReport<T>> {
    run_transfer_with(input, schedule, CascadeOptions::new(eta_p, [n_max, n_max]), cfg)
}

/// Transfer `input` from `opts.channel.from` to `opts.channel.to`.
pub fn run_transfer_with<T: Real>(
    input: &StateVector<T>,
    schedule: &PulseSchedule<T>,
    opts: CascadeOptions<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<TransferReport<T>> {
    let src = opts.channel.from;
    let snk = opts.channel.to;
    if input.dim() != opts.dims[src] {
        return Err(Error::DimensionMismatch {
            context: "run_transfer (input state)",
            expected: opts.dims[src],
            found: input.dim(),
        });
    }
    if opts.dims[snk] < opts.dims[src] {
        return Err(Error::Truncation {
            detail: "sink mode smaller than source mode".into(),
        });
    }
    let model = cascaded_model_with(schedule, opts)?;
    let space = model.space().clone();
    let m_src = ModeSpace::new(opts.dims[src])?;
    let m_snk = ModeSpace::new(opts.dims[snk])?;

    let mut factors = [StateVector::vacuum(m_src), StateVector::vacuum(m_snk)];
    factors[src] = input.clone();
    let rho0 = tensor(&factors, &space)?.to_density();

    let n_src = space.lift(&number(m_src), src)?;
    let n_snk = space.lift(&number(m_snk), snk)?;
    let traj = evolve_observing(&model, &rho0, cfg, &[n_src, n_snk], false)?;

    let sink_state = traj.final_state.partial_trace(&space, &[snk])?;
    let mut target_amps = input.amplitudes().to_vec();
    target_amps.resize(opts.dims[snk], crate::scalar::czero());
    let target = StateVector::from_amplitudes(target_amps)?;
    let fidelity = sink_state.fidelity_with_pure(&target)?;

    let out_idx = traj.jump_names.iter().position(|n| n == CASCADE_OUTPUT);
    let loss_idx = traj.jump_names.iter().position(|n| n == PROPAGATION_LOSS);
    let trace = traj
        .samples
        .iter()
        .map(|s| TracePoint {
            t: s.t,
            source_occupation: s.observables[0].re,
            sink_occupation: s.observables[1].re,
            emitted_photons: out_idx.map_or(T::zero(), |k| s.integrated_jumps[k]),
            lost_photons: loss_idx.map_or(T::zero(), |k| s.integrated_jumps[k]),
            trace_drift: s.trace_drift,
            min_eigenvalue: s.min_eigenvalue,
        })
        .collect();

    let first = &traj.samples[0];
    let last = traj.samples.last().expect("at least two samples");
    let initial_occupation = first.observables[0].re + first.observables[1].re;
    let final_occupation = last.observables[0].re + last.observables[1].re;
    Ok(TransferReport {
        fidelity,
        residual_source_occupation: last.observables[0].re,
        emitted_photons: traj.integrated_jump(CASCADE_OUTPUT).unwrap_or(T::zero()),
        lost_photons: traj.integrated_jump(PROPAGATION_LOSS).unwrap_or(T::zero()),
        initial_occupation,
        final_occupation,
        truncation_deficit: input.truncation_deficit(),
        max_trace_drift: traj.max_trace_drift(),
        min_eigenvalue: traj.min_eigenvalue(),
        window_adequate: schedule.is_window_adequate(),
        stats: traj.stats,
        final_state: Some(traj.final_state),
        sink_state: None,
        trace,
    })
}
