//! Time-dependent Lindblad evolution and the two physical models.
//!
//! The generator is `dρ/dt = −i[H(t), ρ] + Σₖ Lₖ(t) ρ Lₖ(t)† − ½{Lₖ†Lₖ, ρ}`.
//! Integration uses an adaptive Dormand–Prince 5(4) pair on the vectorised
//! density matrix. Each jump channel also carries an accumulator for the
//! integrated flux `∫ Tr(Lₖ†Lₖ ρ) dt`, integrated by the same stepper.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, CompositeSpace, DensityOperator, ModeSpace, Operator, QuantumState};
use crate::scalar::{c, cr, czero, imag_unit, Real, C};
use crate::transfer::PulseSchedule;

pub type TimeOperator<T> = Arc<dyn Fn(T) -> Operator<T> + Send + Sync>;
pub type RateFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
pub struct JumpChannel<T: Real> {
    pub name: String,
    pub operator: TimeOperator<T>,
}

/// Open-system model: Hamiltonian and jump operators as functions of time.
#[derive(Clone)]
pub struct LindbladModel<T: Real> {
    space: CompositeSpace,
    hamiltonian: TimeOperator<T>,
    jumps: Vec<JumpChannel<T>>,
}

impl<T: Real> std::fmt::Debug for LindbladModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LindbladModel")
            .field("space", &self.space)
            .field("jumps", &self.jumps.iter().map(|j| &j.name).collect::<Vec<_>>())
            .finish()
    }
}

impl<T: Real> LindbladModel<T> {
    pub fn new(space: CompositeSpace, hamiltonian: TimeOperator<T>, jumps: Vec<JumpChannel<T>>) -> Self {
        Self {
            space,
            hamiltonian,
            jumps,
        }
    }

    pub fn time_independent(space: CompositeSpace, hamiltonian: Operator<T>, jumps: Vec<(String, Operator<T>)>) -> Self {
        let h = Arc::new(move |_t: T| hamiltonian.clone());
        let jumps = jumps
            .into_iter()
            .map(|(name, op)| JumpChannel {
                name,
                operator: Arc::new(move |_t: T| op.clone()) as TimeOperator<T>,
            })
            .collect();
        Self::new(space, h, jumps)
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn hamiltonian_at(&self, t: T) -> Operator<T> {
        (self.hamiltonian)(t)
    }

    pub fn jump_names(&self) -> Vec<String> {
        self.jumps.iter().map(|j| j.name.clone()).collect()
    }

    pub fn jumps_at(&self, t: T) -> Vec<Operator<T>> {
        self.jumps.iter().map(|j| (j.operator)(t)).collect()
    }

    /// Largest Hermiticity defect of `H(t)` over the given times.
    pub fn hamiltonian_defect(&self, times: &[T]) -> T {
        times
            .iter()
            .map(|&t| self.hamiltonian_at(t).hermiticity_defect())
            .fold(T::zero(), T::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig<T: Real> {
    pub t_start: T,
    pub t_end: T,
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    pub sample_count: usize,
    /// Bound on `|Tr ρ − 1|` at every sample.
    pub trace_guard: T,
    /// Bound on negative eigenvalues at every sample.
    pub positivity_guard: T,
}

impl<T: Real> IntegratorConfig<T> {
    pub fn new(t_start: T, t_end: T) -> Self {
        Self {
            t_start,
            t_end,
            rel_tol: T::lit(1e-10).max(T::epsilon() * T::lit(100.0)),
            abs_tol: T::lit(1e-12).max(T::epsilon()),
            max_step: (t_end - t_start) / T::lit(20.0),
            sample_count: 101,
            trace_guard: T::guard_tol(),
            positivity_guard: T::guard_tol(),
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.sample_count = n;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: T, abs_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidArgument(format!(
                "integration window must satisfy t_end > t_start (got {} .. {})",
                self.t_start, self.t_end
            )));
        }
        if !(self.rel_tol > T::zero() && self.abs_tol > T::zero()) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.max_step > T::zero()) {
            return Err(Error::InvalidArgument("max_step must be positive".into()));
        }
        if self.sample_count < 2 {
            return Err(Error::InvalidArgument("sample_count must be at least 2".into()));
        }
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<T> {
        let n = self.sample_count;
        let span = self.t_end - self.t_start;
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    self.t_end
                } else {
                    self.t_start + span * T::from_usize_lossy(k) / T::from_usize_lossy(n - 1)
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample<T: Real> {
    pub t: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<DensityOperator<T>>,
    pub observables: Vec<C<T>>,
    /// Instantaneous `Tr(Lₖ†Lₖ ρ)` per jump channel.
    pub jump_rates: Vec<T>,
    /// `∫ Tr(Lₖ†Lₖ ρ) dt` from `t_start` per jump channel.
    pub integrated_jumps: Vec<T>,
    pub trace_drift: T,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T: Real> {
    pub jump_names: Vec<String>,
    pub samples: Vec<Sample<T>>,
    pub final_state: DensityOperator<T>,
    pub stats: StepStats,
}

impl<T: Real> Trajectory<T> {
    pub fn max_trace_drift(&self) -> T {
        self.samples.iter().map(|s| s.trace_drift).fold(T::zero(), T::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn integrated_jump(&self, name: &str) -> Option<T> {
        let k = self.jump_names.iter().position(|n| n == name)?;
        self.samples.last().map(|s| s.integrated_jumps[k])
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Real parts of observable `k` along the trajectory.
    pub fn observable_series(&self, k: usize) -> Vec<T> {
        self.samples.iter().map(|s| s.observables[k].re).collect()
    }
}

/// Evolve `rho0`, keeping the full state at every sample.
pub fn evolve<T: Real>(model: &LindbladModel<T>, rho0: &DensityOperator<T>, cfg: &IntegratorConfig<T>) -> Result<Trajectory<T>> {
    evolve_observing(model, rho0, cfg, &[], true)
}

/// Evolve `rho0`, recording expectation values of `observables` at every sample.
pub fn evolve_observing<T: Real>(
    model: &LindbladModel<T>,
    rho0: &DensityOperator<T>,
    cfg: &IntegratorConfig<T>,
    observables: &[Operator<T>],
    keep_states: bool,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    let n = model.dim();
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "evolve (initial state)",
            expected: n,
            found: rho0.dim(),
        });
    }
    for op in observables {
        if op.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "evolve (observable)",
                expected: n,
                found: op.dim(),
            });
        }
    }
    rho0.validate(cfg.trace_guard.max(T::structure_tol()))?;

    let sample_times = cfg.sample_times();
    let defect = model.hamiltonian_defect(&sample_times);
    if defect > T::structure_tol() {
        return Err(Error::InvalidArgument(format!(
            "Hamiltonian not Hermitian (defect {defect})"
        )));
    }

    let m = model.jumps.len();
    let mut y: Vec<C<T>> = Vec::with_capacity(n * n + m);
    y.extend_from_slice(rho0.as_slice());
    y.extend(std::iter::repeat_n(czero(), m));

    let mut rhs = LindbladRhs::new(model);
    let mut stepper = Dopri5::new(y.len());
    let span = cfg.t_end - cfg.t_start;
    let mut t = cfg.t_start;
    let mut h = cfg.max_step.min(span / T::lit(100.0));
    let min_step = span * T::lit(1e-14);

    let mut samples = Vec::with_capacity(sample_times.len());
    let mut stats = StepStats::default();
    let mut k1 = vec![czero(); y.len()];
    rhs.eval(t, &y, &mut k1);
    stats.rhs_evaluations += 1;

    samples.push(make_sample(&mut rhs, t, &y, n, m, observables, keep_states, cfg)?);

    for &target in &sample_times[1..] {
        while t < target {
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };
            let err = stepper.attempt(&mut rhs, t, step, &y, &k1, cfg.rel_tol, cfg.abs_tol);
            stats.rhs_evaluations += 6;
            let factor = if err == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(5.0))
            };
            if err <= T::one() {
                stats.accepted += 1;
                t = if clipped { target } else { t + step };
                std::mem::swap(&mut y, &mut stepper.y_new);
                hermitize_in_place(&mut y[..n * n], n);
                std::mem::swap(&mut k1, &mut stepper.k[6]);
                if !clipped {
                    h = (step * factor).min(cfg.max_step);
                } else if factor > T::one() {
                    h = h.max(step * factor).min(cfg.max_step);
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(T::one());
                if h < min_step {
                    return Err(Error::ToleranceFailure {
                        check: "step size underflow",
                        time: t.as_f64(),
                        value: h.as_f64(),
                        bound: min_step.as_f64(),
                    });
                }
            }
            if stats.accepted + stats.rejected > 10_000_000 {
                return Err(Error::ToleranceFailure {
                    check: "step budget",
                    time: t.as_f64(),
                    value: (stats.accepted + stats.rejected) as f64,
                    bound: 1e7,
                });
            }
        }
        samples.push(make_sample(&mut rhs, t, &y, n, m, observables, keep_states, cfg)?);
    }

    let final_state = DensityOperator::from_raw(n, y[..n * n].to_vec())?;
    Ok(Trajectory {
        jump_names: model.jump_names(),
        samples,
        final_state,
        stats,
    })
}

#[allow(clippy::too_many_arguments)]
fn make_sample<T: Real>(
    rhs: &mut LindbladRhs<'_, T>,
    t: T,
    y: &[C<T>],
    n: usize,
    m: usize,
    observables: &[Operator<T>],
    keep_states: bool,
    cfg: &IntegratorConfig<T>,
) -> Result<Sample<T>> {
    let rho = DensityOperator::from_raw(n, y[..n * n].to_vec())?;
    let trace_drift = (rho.trace() - cr(T::one())).norm();
    if trace_drift > cfg.trace_guard {
        return Err(Error::ToleranceFailure {
            check: "trace preservation",
            time: t.as_f64(),
            value: trace_drift.as_f64(),
            bound: cfg.trace_guard.as_f64(),
        });
    }
    let min_eigenvalue = rho.min_eigenvalue();
    if !(min_eigenvalue >= -cfg.positivity_guard.as_f64()) {
        return Err(Error::ToleranceFailure {
            check: "positivity",
            time: t.as_f64(),
            value: -min_eigenvalue,
            bound: cfg.positivity_guard.as_f64(),
        });
    }
    let obs = observables
        .iter()
        .map(|op| rho.expectation(op))
        .collect::<Result<Vec<_>>>()?;
    let jump_rates = rhs.jump_rates(t, &rho);
    let integrated_jumps = y[n * n..n * n + m].iter().map(|v| v.re).collect();
    Ok(Sample {
        t,
        state: keep_states.then_some(rho),
        observables: obs,
        jump_rates,
        integrated_jumps,
        trace_drift,
        min_eigenvalue,
    })
}

fn hermitize_in_place<T: Real>(rho: &mut [C<T>], n: usize) {
    let half = T::lit(0.5);
    for i in 0..n {
        rho[i * n + i].im = T::zero();
        for j in (i + 1)..n {
            let avg = (rho[i * n + j] + rho[j * n + i].conj()) * half;
            rho[i * n + j] = avg;
            rho[j * n + i] = avg.conj();
        }
    }
}

/// Right-hand side with scratch buffers.
///
/// For Hermitian ρ the generator is `A + A†` with
/// `A = Kρ + ½ Σ LρL†` and `K = −iH − ½ Σ L†L`.
struct LindbladRhs<'a, T: Real> {
    model: &'a LindbladModel<T>,
    n: usize,
    a: Vec<C<T>>,
    lrho: Vec<C<T>>,
    lrho_adj: Vec<C<T>>,
}

impl<'a, T: Real> LindbladRhs<'a, T> {
    fn new(model: &'a LindbladModel<T>) -> Self {
        let n = model.dim();
        Self {
            model,
            n,
            a: vec![czero(); n * n],
            lrho: vec![czero(); n * n],
            lrho_adj: vec![czero(); n * n],
        }
    }

    /// `out += s · op · mat` for dense row-major `mat`.
    fn sparse_dense_acc(op: &Operator<T>, mat: &[C<T>], s: C<T>, out: &mut [C<T>], n: usize) {
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for (k, v) in op.row(i) {
                let coef = v * s;
                let src = &mat[k * n..(k + 1) * n];
                for (o, x) in out_row.iter_mut().zip(src) {
                    *o += coef * *x;
                }
            }
        }
    }

    /// Leaves `ρL†` in `lrho_adj` and returns `Tr(LρL†)`.
    fn sandwich(&mut self, l: &Operator<T>, rho: &[C<T>]) -> C<T> {
        let n = self.n;
        self.lrho.iter_mut().for_each(|v| *v = czero());
        Self::sparse_dense_acc(l, rho, cr(T::one()), &mut self.lrho, n);
        // (Lρ)† = ρL† for Hermitian ρ.
        for i in 0..n {
            for j in 0..n {
                self.lrho_adj[j * n + i] = self.lrho[i * n + j].conj();
            }
        }
        // trace(L ρ L†) = Σ_i Σ_k L_ik (ρL†)_ki
        let mut tr = czero();
        for i in 0..n {
            for (k, v) in l.row(i) {
                tr += v * self.lrho_adj[k * n + i];
            }
        }
        tr
    }

    fn eval(&mut self, t: T, y: &[C<T>], dy: &mut [C<T>]) {
        let n = self.n;
        let rho = &y[..n * n];
        let h = self.model.hamiltonian_at(t);
        let jumps = self.model.jumps_at(t);

        let minus_i = -imag_unit::<T>();
        let half = cr(T::lit(0.5));
        let mut k_terms: Vec<(C<T>, &Operator<T>)> = vec![(minus_i, &h)];
        let ltl: Vec<Operator<T>> = jumps.iter().map(|l| l.adjoint().matmul(l)).collect();
        for op in &ltl {
            k_terms.push((-half, op));
        }
        let k = Operator::combine(n, k_terms);

        self.a.iter_mut().for_each(|v| *v = czero());
        Self::sparse_dense_acc(&k, rho, cr(T::one()), &mut self.a, n);
        for (idx, l) in jumps.iter().enumerate() {
            let tr = self.sandwich(l, rho);
            // a += ½ L (ρL†)
            let mut a = std::mem::take(&mut self.a);
            Self::sparse_dense_acc(l, &self.lrho_adj, half, &mut a, n);
            self.a = a;
            dy[n * n + idx] = cr(tr.re);
        }
        for i in 0..n {
            for j in 0..n {
                dy[i * n + j] = self.a[i * n + j] + self.a[j * n + i].conj();
            }
        }
    }

    fn jump_rates(&mut self, t: T, rho: &DensityOperator<T>) -> Vec<T> {
        let jumps = self.model.jumps_at(t);
        jumps
            .iter()
            .map(|l| self.sandwich(l, rho.as_slice()).re)
            .collect()
    }
}

/// Dormand–Prince 5(4) stepper with FSAL storage.
struct Dopri5<T: Real> {
    k: Vec<Vec<C<T>>>,
    y_tmp: Vec<C<T>>,
    y_new: Vec<C<T>>,
}

impl<T: Real> Dopri5<T> {
    fn new(len: usize) -> Self {
        Self {
            k: (0..7).map(|_| vec![czero(); len]).collect(),
            y_tmp: vec![czero(); len],
            y_new: vec![czero(); len],
        }
    }

    /// One trial step from `(t, y)` with `k1 = f(t, y)`. On return `y_new`
    /// holds the 5th-order solution and `k[6] = f(t+h, y_new)`; the return
    /// value is the scaled RMS error estimate.
    #[allow(clippy::too_many_arguments)]
    fn attempt(&mut self, rhs: &mut LindbladRhs<'_, T>, t: T, h: T, y: &[C<T>], k1: &[C<T>], rtol: T, atol: T) -> T {
        let l = |x: f64| T::lit(x);
        let cs = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
        let a: [&[f64]; 7] = [
            &[],
            &[1.0 / 5.0],
            &[3.0 / 40.0, 9.0 / 40.0],
            &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
            &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
            &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
            &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        let e = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        self.k[0].copy_from_slice(k1);
        for s in 1..7 {
            let coeffs: Vec<T> = a[s].iter().map(|&x| l(x) * h).collect();
            for i in 0..y.len() {
                let mut acc = y[i];
                for (j, cj) in coeffs.iter().enumerate() {
                    if *cj != T::zero() {
                        acc += self.k[j][i] * *cj;
                    }
                }
                self.y_tmp[i] = acc;
            }
            let ts = t + l(cs[s]) * h;
            let (head, tail) = self.k.split_at_mut(s);
            let _ = head;
            rhs.eval(ts, &self.y_tmp, &mut tail[0]);
        }
        // Stage 7 input is the 5th-order solution.
        self.y_new.copy_from_slice(&self.y_tmp);

        let mut sum = T::zero();
        for i in 0..y.len() {
            let mut err = czero::<T>();
            for (j, ej) in e.iter().enumerate() {
                if *ej != 0.0 {
                    err += self.k[j][i] * (l(*ej) * h);
                }
            }
            let scale = atol + rtol * y[i].norm().max(self.y_new[i].norm());
            let r = err.norm() / scale;
            sum += r * r;
        }
        (sum / T::from_usize_lossy(y.len())).sqrt()
    }
}

/// Direction of the unidirectional channel between the two nodes (0 and 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub from: usize,
    pub to: usize,
}

impl Channel {
    pub const FORWARD: Channel = Channel { from: 0, to: 1 };
    pub const BACKWARD: Channel = Channel { from: 1, to: 0 };
}

/// Options for [`cascaded_model_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeOptions<T: Real> {
    /// Propagation efficiency η_p ∈ (0, 1].
    pub eta_p: T,
    pub dims: [usize; 2],
    /// Phase θ applied to the upstream local operator, `c_src → e^{iθ} c_src`.
    /// The default π maps `b_src → +b_snk` so transferred states are not reflected.
    pub source_phase: T,
    pub channel: Channel,
}

impl<T: Real> CascadeOptions<T> {
    pub fn new(eta_p: T, dims: [usize; 2]) -> Self {
        Self {
            eta_p,
            dims,
            source_phase: T::PI(),
            channel: Channel::FORWARD,
        }
    }
}

pub const CASCADE_OUTPUT: &str = "cascade_output";
pub const PROPAGATION_LOSS: &str = "propagation_loss";

/// Reduced two-node cascaded model in the interaction picture at ν_x.
pub fn cascaded_model<T: Real>(schedule: &PulseSchedule<T>, eta_p: T, dims: [usize; 2]) -> Result<LindbladModel<T>> {
    cascaded_model_with(schedule, CascadeOptions::new(eta_p, dims))
}

/// Local operators `c_j(t) = √(2Γ_j(t)) b_j`; collective jump
/// `C = √η c_src + c_snk`, loss jump `L = √(1−η) c_src`, and cascade
/// Hamiltonian `H_c = (i/2)√η (c_src† c_snk − c_snk† c_src)`.
pub fn cascaded_model_with<T: Real>(schedule: &PulseSchedule<T>, opts: CascadeOptions<T>) -> Result<LindbladModel<T>> {
    let eta = opts.eta_p;
    if !(eta > T::zero() && eta <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "propagation efficiency must lie in (0, 1], got {eta}"
        )));
    }
    let Channel { from, to } = opts.channel;
    if from > 1 || to > 1 || from == to {
        return Err(Error::InvalidArgument(format!(
            "channel {from} -> {to} must connect distinct nodes 0 and 1"
        )));
    }
    let space = CompositeSpace::modes(&opts.dims)?;
    let b: Vec<Operator<T>> = (0..2)
        .map(|k| space.lift(&annihilation(ModeSpace::new(opts.dims[k])?), k))
        .collect::<Result<_>>()?;
    let b_src = b[from].clone();
    let b_snk = b[to].clone();
    let rate_src = schedule.rate(from);
    let rate_snk = schedule.rate(to);
    let phase = c(opts.source_phase.cos(), opts.source_phase.sin());
    let n = space.dim();
    let two = T::lit(2.0);
    let sqrt_eta = eta.sqrt();
    let sqrt_loss = (T::one() - eta).max(T::zero()).sqrt();

    let local = move |t: T| -> (C<T>, C<T>) {
        let gs = rate_src(t).max(T::zero());
        let gk = rate_snk(t).max(T::zero());
        (phase * (two * gs).sqrt(), cr((two * gk).sqrt()))
    };

    let (bs, bk) = (b_src.clone(), b_snk.clone());
    let hop = bs.adjoint().matmul(&bk);
    let hop_adj = hop.adjoint();
    let local_h = local.clone();
    let hamiltonian: TimeOperator<T> = Arc::new(move |t: T| {
        let (s, k) = local_h(t);
        // (i/2)√η (s* k b_src† b_snk − k* s b_snk† b_src)
        let w = imag_unit::<T>() * cr(T::lit(0.5) * sqrt_eta);
        Operator::combine(n, [(w * s.conj() * k, &hop), (-(w * k.conj() * s), &hop_adj)])
    });

    let (bs, bk) = (b_src.clone(), b_snk.clone());
    let local_c = local.clone();
    let mut jumps = vec![JumpChannel {
        name: CASCADE_OUTPUT.to_string(),
        operator: Arc::new(move |t: T| {
            let (s, k) = local_c(t);
            Operator::combine(n, [(s * cr(sqrt_eta), &bs), (k, &bk)])
        }),
    }];
    if sqrt_loss > T::zero() {
        let bs = b_src.clone();
        jumps.push(JumpChannel {
            name: PROPAGATION_LOSS.to_string(),
            operator: Arc::new(move |t: T| {
                let (s, _) = local(t);
                bs.scale(s * cr(sqrt_loss))
            }),
        });
    }
    Ok(LindbladModel::new(space, hamiltonian, jumps))
}

pub const CAVITY_DECAY: &str = "cavity_decay";

/// Motional mode ⊗ cavity mode with `H = Ω(t)(a†b + b†a)` and jump `√(2κ) a`.
pub fn intermediate_model<T: Real>(omega: RateFn<T>, kappa: T, n_mode: usize, n_cav: usize) -> Result<LindbladModel<T>> {
    if !(kappa > T::zero()) {
        return Err(Error::Domain(format!("cavity decay rate must be positive, got {kappa}")));
    }
    let space = CompositeSpace::modes(&[n_mode, n_cav])?;
    let b = space.lift(&annihilation(ModeSpace::new(n_mode)?), 0)?;
    let a = space.lift(&annihilation(ModeSpace::new(n_cav)?), 1)?;
    let exchange = a.adjoint().matmul(&b).add(&b.adjoint().matmul(&a));
    let hamiltonian: TimeOperator<T> = Arc::new(move |t: T| exchange.scale(cr(omega(t))));
    let decay = a.scale(cr((T::lit(2.0) * kappa).sqrt()));
    let jumps = vec![JumpChannel {
        name: CAVITY_DECAY.to_string(),
        operator: Arc::new(move |_t: T| decay.clone()),
    }];
    Ok(LindbladModel::new(space, hamiltonian, jumps))
}

/// Least-squares slope of `−ln y` against `t`; samples with `y ≤ 0` are skipped.
pub fn fit_exponential_rate<T: Real>(times: &[T], values: &[T]) -> Result<T> {
    let pts: Vec<(T, T)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > T::zero())
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument("need at least two positive samples to fit".into()));
    }
    let np = T::from_usize_lossy(pts.len());
    let mt = pts.iter().map(|p| p.0).sum::<T>() / np;
    let my = pts.iter().map(|p| p.1).sum::<T>() / np;
    let sxx: T = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == T::zero() {
        return Err(Error::InvalidArgument("degenerate time samples".into()));
    }
    Ok(-sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationCheck<T: Real> {
    pub omega: T,
    pub kappa: T,
    /// `2Ω²/κ`, the population decay rate of the reduced model.
    pub predicted_rate: T,
    /// Exponential rate fitted to `⟨b†b⟩(t)` in the intermediate model.
    pub fitted_rate: T,
    pub relative_discrepancy: T,
}

/// Compare the intermediate model's motional decay with the reduced rate.
///
/// Starts from `|1⟩_b |0⟩_a` with constant Ω and fits over `[0, 1/Γ]`.
pub fn adiabatic_elimination_check<T: Real>(omega: T, kappa: T, n_mode: usize, n_cav: usize) -> Result<EliminationCheck<T>> {
    let gamma = omega * omega / kappa;
    if !(gamma > T::zero()) {
        return Err(Error::Domain("elimination check needs Ω > 0".into()));
    }
    let model = intermediate_model(Arc::new(move |_t: T| omega), kappa, n_mode, n_cav)?;
    let space = model.space().clone();
    let one = crate::hilbert::StateVector::fock(1, ModeSpace::new(n_mode)?)?;
    let vac = crate::hilbert::StateVector::vacuum(ModeSpace::new(n_cav)?);
    let rho0 = crate::hilbert::tensor(&[one, vac], &space)?.to_density();
    let nb = space.lift(&crate::hilbert::number(ModeSpace::new(n_mode)?), 0)?;
    let t_end = T::one() / gamma;
    let mut cfg = IntegratorConfig::new(T::zero(), t_end).with_samples(201);
    cfg.max_step = (T::one() / kappa).min(T::one() / omega) / T::lit(4.0);
    let traj = evolve_observing(&model, &rho0, &cfg, &[nb], false)?;
    let fitted = fit_exponential_rate(&traj.times(), &traj.observable_series(0))?;
    let predicted = T::lit(2.0) * gamma;
    Ok(EliminationCheck {
        omega,
        kappa,
        predicted_rate: predicted,
        fitted_rate: fitted,
        relative_discrepancy: ((fitted - predicted) / predicted).abs(),
    })
}
