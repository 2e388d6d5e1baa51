//! Exact symbolic engine for the entanglement protocols.
//!
//! A [`SymbolicKet`] is a superposition of product terms; each site carries an
//! internal label (↑/↓) and a motional label (coherent or Fock). Motional
//! labels are not orthogonal, so norms and probabilities go through the Gram
//! matrix of closed-form overlaps rather than a truncated basis.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{coherent_state, ModeSpace, StateVector};
use crate::scalar::{c, cone, cr, czero, ln_factorial, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Internal {
    Up,
    Down,
}

impl Internal {
    /// Basis index in the `(↑, ↓)` ordering.
    pub fn index(self) -> usize {
        match self {
            Internal::Up => 0,
            Internal::Down => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Internal::Up
        } else {
            Internal::Down
        }
    }
}

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Internal::Up => "up",
            Internal::Down => "down",
        })
    }
}

/// Motional state of one site. The vacuum is always stored as `Fock(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionalLabel<T: Real> {
    Coherent(C<T>),
    Fock(usize),
}

impl<T: Real> MotionalLabel<T> {
    pub fn coherent(alpha: C<T>) -> Self {
        if alpha == czero() {
            MotionalLabel::Fock(0)
        } else {
            MotionalLabel::Coherent(alpha)
        }
    }

    pub fn fock(n: usize) -> Self {
        MotionalLabel::Fock(n)
    }

    pub fn vacuum() -> Self {
        MotionalLabel::Fock(0)
    }

    pub fn canonical(self) -> Self {
        match self {
            MotionalLabel::Coherent(a) => Self::coherent(a),
            f => f,
        }
    }

    pub fn is_vacuum(&self) -> bool {
        matches!(self.canonical(), MotionalLabel::Fock(0))
    }

    /// `⟨self|other⟩` in closed form.
    pub fn overlap(&self, other: &Self) -> C<T> {
        match (self.canonical(), other.canonical()) {
            (MotionalLabel::Fock(m), MotionalLabel::Fock(n)) => {
                if m == n {
                    cone()
                } else {
                    czero()
                }
            }
            (MotionalLabel::Fock(n), MotionalLabel::Coherent(a)) => fock_coherent(n, a),
            (MotionalLabel::Coherent(a), MotionalLabel::Fock(n)) => fock_coherent(n, a).conj(),
            (MotionalLabel::Coherent(a), MotionalLabel::Coherent(b)) => {
                let half = T::lit(0.5);
                (cr(-(a.norm_sqr() + b.norm_sqr()) * half) + a.conj() * b).exp()
            }
        }
    }

    /// Truncated-Fock vector for this label.
    pub fn embed(&self, space: ModeSpace) -> Result<StateVector<T>> {
        match self.canonical() {
            MotionalLabel::Fock(n) => StateVector::fock(n, space),
            MotionalLabel::Coherent(a) => coherent_state(a, space),
        }
    }
}

/// `⟨n|α⟩ = e^{−|α|²/2} αⁿ/√(n!)`.
fn fock_coherent<T: Real>(n: usize, alpha: C<T>) -> C<T> {
    let r = alpha.norm();
    if r == T::zero() {
        return if n == 0 { cone() } else { czero() };
    }
    let nn = T::from_usize_lossy(n);
    let log_mag = -r * r / T::lit(2.0) + nn * r.ln() - ln_factorial::<T>(n) / T::lit(2.0);
    let phase = nn * alpha.arg();
    C::from_polar(log_mag.exp(), phase)
}

impl<T: Real> fmt::Display for MotionalLabel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MotionalLabel::Fock(n) => write!(f, "|{n}>"),
            MotionalLabel::Coherent(a) => write!(f, "|alpha={}{:+}i>", a.re, a.im),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site<T: Real> {
    pub internal: Internal,
    pub motion: MotionalLabel<T>,
}

impl<T: Real> Site<T> {
    pub fn new(internal: Internal, motion: MotionalLabel<T>) -> Self {
        Self {
            internal,
            motion: motion.canonical(),
        }
    }

    pub fn up_vacuum() -> Self {
        Self::new(Internal::Up, MotionalLabel::vacuum())
    }

    pub fn overlap(&self, other: &Self) -> C<T> {
        if self.internal != other.internal {
            czero()
        } else {
            self.motion.overlap(&other.motion)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term<T: Real> {
    pub amplitude: C<T>,
    pub sites: Vec<Site<T>>,
}

impl<T: Real> Term<T> {
    /// `⟨self.labels|other.labels⟩`, amplitudes excluded.
    pub fn label_overlap(&self, other: &Self) -> C<T> {
        self.sites
            .iter()
            .zip(&other.sites)
            .fold(cone(), |acc, (a, b)| acc * a.overlap(b))
    }
}

/// Superposition of labelled product states over a fixed number of sites.
///
/// The term list is canonical: identical label sequences are merged and
/// amplitudes below [`Real::prune_threshold`] are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolicKet<T: Real> {
    n_sites: usize,
    terms: Vec<Term<T>>,
}

impl<T: Real> SymbolicKet<T> {
    pub fn from_terms(n_sites: usize, terms: Vec<Term<T>>) -> Result<Self> {
        for t in &terms {
            if t.sites.len() != n_sites {
                return Err(Error::DimensionMismatch {
                    context: "SymbolicKet term site count",
                    expected: n_sites,
                    found: t.sites.len(),
                });
            }
        }
        let mut ket = Self { n_sites, terms };
        ket.canonicalize();
        Ok(ket)
    }

    pub fn product(sites: Vec<Site<T>>) -> Self {
        let n = sites.len();
        Self {
            n_sites: n,
            terms: vec![Term {
                amplitude: cone(),
                sites: sites.into_iter().map(|s| Site::new(s.internal, s.motion)).collect(),
            }],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn terms(&self) -> &[Term<T>] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn canonicalize(&mut self) {
        let mut merged: Vec<Term<T>> = Vec::with_capacity(self.terms.len());
        for mut t in self.terms.drain(..) {
            for s in &mut t.sites {
                s.motion = s.motion.canonical();
            }
            match merged.iter_mut().find(|m| m.sites == t.sites) {
                Some(m) => m.amplitude += t.amplitude,
                None => merged.push(t),
            }
        }
        let eps = T::prune_threshold();
        merged.retain(|t| t.amplitude.norm() >= eps);
        self.terms = merged;
    }

    pub fn scaled(&self, s: C<T>) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                amplitude: t.amplitude * s,
                sites: t.sites.clone(),
            })
            .collect();
        let mut k = Self {
            n_sites: self.n_sites,
            terms,
        };
        k.canonicalize();
        k
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.n_sites != other.n_sites {
            return Err(Error::DimensionMismatch {
                context: "SymbolicKet sum",
                expected: self.n_sites,
                found: other.n_sites,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(self.n_sites, terms)
    }

    /// Gram matrix `G_ij = ⟨term_i|term_j⟩` of the label products.
    pub fn gram(&self) -> Vec<Vec<C<T>>> {
        self.terms
            .iter()
            .map(|a| self.terms.iter().map(|b| a.label_overlap(b)).collect())
            .collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        if self.n_sites != other.n_sites {
            return Err(Error::DimensionMismatch {
                context: "SymbolicKet inner product",
                expected: self.n_sites,
                found: other.n_sites,
            });
        }
        let mut acc = czero();
        for a in &self.terms {
            for b in &other.terms {
                acc += a.amplitude.conj() * b.amplitude * a.label_overlap(b);
            }
        }
        Ok(acc)
    }

    /// `Σ_ij cᵢ* cⱼ G_ij`.
    pub fn norm_sqr(&self) -> T {
        let g = self.gram();
        let mut acc = czero::<T>();
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in self.terms.iter().enumerate() {
                acc += a.amplitude.conj() * b.amplitude * g[i][j];
            }
        }
        acc.re.max(T::zero())
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > T::zero()) {
            return Err(Error::InvalidState("symbolic ket has zero norm".into()));
        }
        Ok(self.scaled(cr(T::one() / n)))
    }

    /// `|⟨a|b⟩| / (‖a‖‖b‖)`, insensitive to global phase.
    pub fn overlap_modulus(&self, other: &Self) -> Result<T> {
        let denom = self.norm() * other.norm();
        if !(denom > T::zero()) {
            return Err(Error::InvalidState("overlap with a zero-norm ket".into()));
        }
        Ok(self.inner(other)?.norm() / denom)
    }

    fn check_atom(&self, atom: usize, op: &'static str) -> Result<()> {
        if atom >= self.n_sites {
            return Err(Error::PreconditionViolation {
                operation: op,
                detail: format!("atom {atom} out of range for {} sites", self.n_sites),
            });
        }
        Ok(())
    }

    /// Truncated-Fock vector of one term (amplitude included), in the
    /// composite order `(qubit, mode)` per site.
    pub fn embed_term(&self, index: usize, mode_dim: usize) -> Result<Vec<C<T>>> {
        let space = ModeSpace::new(mode_dim)?;
        let t = &self.terms[index];
        let mut v = vec![t.amplitude];
        for s in &t.sites {
            let mut q = vec![czero::<T>(); 2];
            q[s.internal.index()] = cone();
            let m = s.motion.embed(space)?;
            let mut factor = Vec::with_capacity(2 * mode_dim);
            for qa in &q {
                for ma in m.amplitudes() {
                    factor.push(*qa * *ma);
                }
            }
            let mut next = Vec::with_capacity(v.len() * factor.len());
            for a in &v {
                for b in &factor {
                    next.push(*a * *b);
                }
            }
            v = next;
        }
        Ok(v)
    }

    /// Unnormalised truncated-Fock vector of the whole ket.
    pub fn embed(&self, mode_dim: usize) -> Result<Vec<C<T>>> {
        let len = (2 * mode_dim).pow(self.n_sites as u32);
        let mut acc = vec![czero(); len];
        for i in 0..self.terms.len() {
            for (a, b) in acc.iter_mut().zip(self.embed_term(i, mode_dim)?) {
                *a += b;
            }
        }
        Ok(acc)
    }
}

/// 2×2 matrix acting on an internal qubit; `u[out][in]` in the `(↑, ↓)` basis.
pub type Rotation<T> = [[C<T>; 2]; 2];

pub mod rotations {
    //! Internal-state rotations used by the scenarios.
    use super::Rotation;
    use crate::scalar::{cr, Real};

    fn real<T: Real>(m: [[f64; 2]; 2]) -> Rotation<T> {
        [[cr(T::lit(m[0][0])), cr(T::lit(m[0][1]))], [cr(T::lit(m[1][0])), cr(T::lit(m[1][1]))]]
    }

    pub fn identity<T: Real>() -> Rotation<T> {
        real([[1.0, 0.0], [0.0, 1.0]])
    }

    /// `↑ → (↑ − ↓)/√2`, `↓ → (↑ + ↓)/√2`.
    pub fn recombine<T: Real>() -> Rotation<T> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        real([[h, h], [-h, h]])
    }

    /// `↑ → (↑ + ↓)/√2`, `↓ → (−↑ + ↓)/√2`.
    pub fn split_even<T: Real>() -> Rotation<T> {
        weighted_split(1.0, 1.0)
    }

    /// `↑ → (w_up ↑ + w_down ↓)/n`, `↓ → (−w_down ↑ + w_up ↓)/n`.
    pub fn weighted_split<T: Real>(w_up: f64, w_down: f64) -> Rotation<T> {
        let n = (w_up * w_up + w_down * w_down).sqrt();
        let (u, d) = (w_up / n, w_down / n);
        real([[u, -d], [d, u]])
    }

    /// `↑ → −↓`, `↓ → ↑`.
    pub fn flip<T: Real>() -> Rotation<T> {
        real([[0.0, 1.0], [-1.0, 0.0]])
    }
}

fn unitarity_defect<T: Real>(u: &Rotation<T>) -> T {
    let mut worst = T::zero();
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = czero::<T>();
            for k in 0..2 {
                acc += u[k][i].conj() * u[k][j];
            }
            let want = if i == j { cone() } else { czero() };
            worst = worst.max((acc - want).norm());
        }
    }
    worst
}

/// Apply `u` to the internal factor of `atom` in every term.
pub fn rotate_internal<T: Real>(ket: &SymbolicKet<T>, atom: usize, u: &Rotation<T>) -> Result<SymbolicKet<T>> {
    ket.check_atom(atom, "rotate_internal")?;
    let defect = unitarity_defect(u);
    if defect > T::structure_tol() {
        return Err(Error::NonUnitary {
            deviation: defect.as_f64(),
        });
    }
    let mut terms = Vec::with_capacity(ket.terms.len() * 2);
    for t in &ket.terms {
        let input = t.sites[atom].internal.index();
        for out in 0..2 {
            let w = u[out][input];
            if w == czero() {
                continue;
            }
            let mut sites = t.sites.clone();
            sites[atom].internal = Internal::from_index(out);
            terms.push(Term {
                amplitude: t.amplitude * w,
                sites,
            });
        }
    }
    SymbolicKet::from_terms(ket.n_sites, terms)
}

/// Directed channels between nodes; exactly one is active at a time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    nodes: usize,
    channels: Vec<(usize, usize)>,
    active: usize,
}

impl NetworkTopology {
    pub fn new(nodes: usize, channels: Vec<(usize, usize)>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidArgument("topology needs at least one channel".into()));
        }
        for &(from, to) in &channels {
            Self::check_channel(nodes, from, to)?;
        }
        Ok(Self {
            nodes,
            channels,
            active: 0,
        })
    }

    /// Channels `k → k+1` for `k = 0..n−1`, first one active.
    pub fn chain(nodes: usize) -> Result<Self> {
        Self::new(nodes, (0..nodes.saturating_sub(1)).map(|k| (k, k + 1)).collect())
    }

    fn check_channel(nodes: usize, from: usize, to: usize) -> Result<()> {
        if from >= nodes || to >= nodes || from == to {
            return Err(Error::InvalidArgument(format!(
                "channel {from} -> {to} must join distinct nodes among {nodes}"
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn channels(&self) -> &[(usize, usize)] {
        &self.channels
    }

    pub fn active(&self) -> (usize, usize) {
        self.channels[self.active]
    }

    /// Make an existing channel active.
    pub fn activate(&mut self, from: usize, to: usize) -> Result<()> {
        match self.channels.iter().position(|&c| c == (from, to)) {
            Some(k) => {
                self.active = k;
                Ok(())
            }
            None => Err(Error::InvalidArgument(format!("no channel {from} -> {to} in topology"))),
        }
    }

    /// Redirect the network so that `from → to` is active, adding it if needed.
    pub fn reroute(&mut self, from: usize, to: usize) -> Result<()> {
        Self::check_channel(self.nodes, from, to)?;
        if self.activate(from, to).is_err() {
            self.channels.push((from, to));
            self.active = self.channels.len() - 1;
        }
        Ok(())
    }
}

/// Ideal motional transfer along the active channel, conditional on the
/// source atom being ↑; ↓ terms are untouched.
pub fn ideal_transfer<T: Real>(ket: &SymbolicKet<T>, topology: &NetworkTopology) -> Result<SymbolicKet<T>> {
    if topology.nodes() != ket.n_sites {
        return Err(Error::PreconditionViolation {
            operation: "ideal_transfer",
            detail: format!(
                "topology has {} nodes but ket has {} sites",
                topology.nodes(),
                ket.n_sites
            ),
        });
    }
    let (src, snk) = topology.active();
    let mut terms = Vec::with_capacity(ket.terms.len());
    for (idx, t) in ket.terms.iter().enumerate() {
        let mut sites = t.sites.clone();
        if sites[src].internal == Internal::Up {
            let sink = sites[snk];
            if sink.internal != Internal::Up || !sink.motion.is_vacuum() {
                return Err(Error::PreconditionViolation {
                    operation: "ideal_transfer",
                    detail: format!(
                        "term {idx}: sink atom {snk} must be up with motional vacuum, found {} {}",
                        sink.internal, sink.motion
                    ),
                });
            }
            sites[snk].motion = sites[src].motion;
            sites[src].motion = MotionalLabel::vacuum();
        }
        terms.push(Term {
            amplitude: t.amplitude,
            sites,
        });
    }
    SymbolicKet::from_terms(ket.n_sites, terms)
}

fn project<T: Real>(ket: &SymbolicKet<T>, atom: usize, outcome: Internal) -> SymbolicKet<T> {
    SymbolicKet {
        n_sites: ket.n_sites,
        terms: ket
            .terms
            .iter()
            .filter(|t| t.sites[atom].internal == outcome)
            .cloned()
            .collect(),
    }
}

/// Project `atom` onto `outcome`; returns the renormalised branch and its
/// probability (Gram-weighted).
pub fn measure_internal<T: Real>(ket: &SymbolicKet<T>, atom: usize, outcome: Internal) -> Result<(SymbolicKet<T>, T)> {
    ket.check_atom(atom, "measure_internal")?;
    let total = ket.norm_sqr();
    if !(total > T::zero()) {
        return Err(Error::InvalidState("cannot measure a zero-norm ket".into()));
    }
    let branch = project(ket, atom, outcome);
    let p = branch.norm_sqr() / total;
    let eps = T::prune_threshold();
    if branch.is_empty() || p <= eps * eps {
        return Err(Error::ZeroProbability {
            atom,
            outcome: outcome.to_string(),
        });
    }
    Ok((branch.normalized()?, p))
}

/// `Û(φ)`: `↑|0⟩ → ↑|φ⟩`, `↓|0⟩ → ↓|0⟩` on `atom`.
pub fn conditional_displacement<T: Real>(ket: &SymbolicKet<T>, atom: usize, phi: MotionalLabel<T>) -> Result<SymbolicKet<T>> {
    ket.check_atom(atom, "conditional_displacement")?;
    let mut terms = Vec::with_capacity(ket.terms.len());
    for (idx, t) in ket.terms.iter().enumerate() {
        let mut sites = t.sites.clone();
        if sites[atom].internal == Internal::Up {
            if !sites[atom].motion.is_vacuum() {
                return Err(Error::PreconditionViolation {
                    operation: "conditional_displacement",
                    detail: format!(
                        "term {idx}: atom {atom} is up but has motional label {}",
                        sites[atom].motion
                    ),
                });
            }
            sites[atom].motion = phi.canonical();
        }
        terms.push(Term {
            amplitude: t.amplitude,
            sites,
        });
    }
    SymbolicKet::from_terms(ket.n_sites, terms)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchProbabilities<T: Real> {
    pub up: T,
    pub down: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T: Real> {
    pub operation: String,
    pub parameters: BTreeMap<String, String>,
    pub post_norm: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch_probabilities: Option<BranchProbabilities<T>>,
    /// Ket after the step.
    pub state: SymbolicKet<T>,
    /// Renormalised branch discarded by post-selection, if it is non-empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discarded: Option<SymbolicKet<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult<T: Real> {
    pub scenario: String,
    pub steps: Vec<StepRecord<T>>,
    pub final_state: SymbolicKet<T>,
    /// Product of the post-selected branch probabilities.
    pub success_probability: T,
    /// Phase-insensitive overlap of the final state with the scenario target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_overlap: Option<T>,
}

impl<T: Real> ProtocolResult<T> {
    pub fn step(&self, operation: &str) -> Option<&StepRecord<T>> {
        self.steps.iter().find(|s| s.operation == operation)
    }
}

/// Sequential protocol script with a step log.
#[derive(Clone, Debug)]
pub struct ProtocolRunner<T: Real> {
    ket: SymbolicKet<T>,
    topology: NetworkTopology,
    steps: Vec<StepRecord<T>>,
    probability: T,
}

impl<T: Real> ProtocolRunner<T> {
    pub fn new(initial: SymbolicKet<T>, topology: NetworkTopology) -> Result<Self> {
        let ket = initial.normalized()?;
        let mut r = Self {
            ket,
            topology,
            steps: Vec::new(),
            probability: T::one(),
        };
        r.log("prepare", BTreeMap::new(), None, None);
        Ok(r)
    }

    pub fn ket(&self) -> &SymbolicKet<T> {
        &self.ket
    }

    fn log(
        &mut self,
        operation: &str,
        parameters: BTreeMap<String, String>,
        branch_probabilities: Option<BranchProbabilities<T>>,
        discarded: Option<SymbolicKet<T>>,
    ) {
        self.steps.push(StepRecord {
            operation: operation.to_string(),
            parameters,
            post_norm: self.ket.norm(),
            branch_probabilities,
            state: self.ket.clone(),
            discarded,
        });
    }

    pub fn rotate(&mut self, atom: usize, name: &str, u: &Rotation<T>) -> Result<&mut Self> {
        self.ket = rotate_internal(&self.ket, atom, u)?;
        let params = BTreeMap::from([("atom".to_string(), atom.to_string()), ("rotation".to_string(), name.to_string())]);
        self.log("rotate_internal", params, None, None);
        Ok(self)
    }

    pub fn transfer(&mut self, from: usize, to: usize) -> Result<&mut Self> {
        self.topology.activate(from, to)?;
        self.ket = ideal_transfer(&self.ket, &self.topology)?;
        let params = BTreeMap::from([("from".to_string(), from.to_string()), ("to".to_string(), to.to_string())]);
        self.log("ideal_transfer", params, None, None);
        Ok(self)
    }

    pub fn reroute(&mut self, from: usize, to: usize) -> Result<&mut Self> {
        self.topology.reroute(from, to)?;
        let params = BTreeMap::from([("from".to_string(), from.to_string()), ("to".to_string(), to.to_string())]);
        self.log("reroute", params, None, None);
        Ok(self)
    }

    pub fn measure(&mut self, atom: usize, keep: Internal) -> Result<&mut Self> {
        let other = if keep == Internal::Up { Internal::Down } else { Internal::Up };
        let (kept, p) = measure_internal(&self.ket, atom, keep)?;
        let discarded = measure_internal(&self.ket, atom, other).ok();
        let (p_up, p_down) = match keep {
            Internal::Up => (p, T::one() - p),
            Internal::Down => (T::one() - p, p),
        };
        self.ket = kept;
        self.probability *= p;
        let params = BTreeMap::from([("atom".to_string(), atom.to_string()), ("outcome".to_string(), keep.to_string())]);
        self.log(
            "measure_internal",
            params,
            Some(BranchProbabilities { up: p_up, down: p_down }),
            discarded.map(|d| d.0),
        );
        Ok(self)
    }

    pub fn displace(&mut self, atom: usize, phi: MotionalLabel<T>) -> Result<&mut Self> {
        self.ket = conditional_displacement(&self.ket, atom, phi)?;
        let params = BTreeMap::from([("atom".to_string(), atom.to_string()), ("phi".to_string(), phi.to_string())]);
        self.log("conditional_displacement", params, None, None);
        Ok(self)
    }

    pub fn finish(self, scenario: &str, target: Option<&SymbolicKet<T>>) -> Result<ProtocolResult<T>> {
        let target_overlap = target.map(|t| self.ket.overlap_modulus(t)).transpose()?;
        Ok(ProtocolResult {
            scenario: scenario.to_string(),
            final_state: self.ket,
            steps: self.steps,
            success_probability: self.probability,
            target_overlap,
        })
    }
}

/// Site with an explicit internal superposition is expressed as separate terms;
/// this builds `Σ_k w_k |s_k⟩ ⊗ rest` for the first atom.
fn internal_superposition<T: Real>(weights: &[(Internal, C<T>)], first_motion: MotionalLabel<T>, rest: &[Site<T>]) -> Result<SymbolicKet<T>> {
    let terms = weights
        .iter()
        .map(|&(s, w)| {
            let mut sites = vec![Site::new(s, first_motion)];
            sites.extend_from_slice(rest);
            Term { amplitude: w, sites }
        })
        .collect();
    SymbolicKet::from_terms(rest.len() + 1, terms)
}

pub mod targets {
    //! Closed-form target states the scenarios are checked against.
    use super::*;

    /// `Σ_j |0…α_j…0⟩ ⊗ |↑…↑⟩`, normalised through the Gram norm.
    pub fn delocalised<T: Real>(alpha: C<T>, n: usize) -> Result<SymbolicKet<T>> {
        delocalised_label(MotionalLabel::coherent(alpha), n)
    }

    pub fn delocalised_label<T: Real>(phi: MotionalLabel<T>, n: usize) -> Result<SymbolicKet<T>> {
        let terms = (0..n)
            .map(|j| Term {
                amplitude: cone(),
                sites: (0..n)
                    .map(|k| Site::new(Internal::Up, if k == j { phi } else { MotionalLabel::vacuum() }))
                    .collect(),
            })
            .collect();
        SymbolicKet::from_terms(n, terms)?.normalized()
    }

    /// `(2a|00⟩ + b|01⟩ + b|10⟩)/√(2(|a|²+1))` with both atoms ↑.
    pub fn hardy<T: Real>(a: C<T>, b: C<T>) -> Result<SymbolicKet<T>> {
        let up = |m: usize| Site::new(Internal::Up, MotionalLabel::fock(m));
        let norm = cr(T::one() / (T::lit(2.0) * (a.norm_sqr() + T::one())).sqrt());
        let terms = vec![
            Term { amplitude: a * cr(T::lit(2.0)) * norm, sites: vec![up(0), up(0)] },
            Term { amplitude: b * norm, sites: vec![up(0), up(1)] },
            Term { amplitude: b * norm, sites: vec![up(1), up(0)] },
        ];
        SymbolicKet::from_terms(2, terms)
    }

    /// `(↑₁|0⟩₁|φ⟩₂ + ↓₁|φ⟩₁|0⟩₂)/√2 ⊗ ↑₂`, atom 3 (if present) in `↑|0⟩`.
    pub fn ghz_entangled<T: Real>(phi: MotionalLabel<T>, n_sites: usize) -> Result<SymbolicKet<T>> {
        let h = cr(T::lit(std::f64::consts::FRAC_1_SQRT_2));
        let mut t1 = vec![Site::new(Internal::Up, MotionalLabel::vacuum()), Site::new(Internal::Up, phi)];
        let mut t2 = vec![Site::new(Internal::Down, phi), Site::up_vacuum()];
        for _ in 2..n_sites {
            t1.push(Site::up_vacuum());
            t2.push(Site::up_vacuum());
        }
        SymbolicKet::from_terms(n_sites, vec![Term { amplitude: h, sites: t1 }, Term { amplitude: h, sites: t2 }])
    }

    /// `(−↓₁|φ⟩₂|0⟩₃ + ↑₁|0⟩₂|φ⟩₃)/√2 ⊗ |0⟩₁ ↑₂ ↑₃`.
    pub fn ghz_separated<T: Real>(phi: MotionalLabel<T>) -> Result<SymbolicKet<T>> {
        let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        let v = MotionalLabel::vacuum();
        SymbolicKet::from_terms(
            3,
            vec![
                Term {
                    amplitude: cr(-h),
                    sites: vec![Site::new(Internal::Down, v), Site::new(Internal::Up, phi), Site::new(Internal::Up, v)],
                },
                Term {
                    amplitude: cr(h),
                    sites: vec![Site::new(Internal::Up, v), Site::new(Internal::Up, v), Site::new(Internal::Up, phi)],
                },
            ],
        )
    }

    /// Three motional factors entangled with atom 1:
    /// `(−↓₁|0,φ,0⟩ + ↑₁|φ,0,φ⟩)/√2`.
    pub fn ghz_motional<T: Real>(phi: MotionalLabel<T>) -> Result<SymbolicKet<T>> {
        let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        let v = MotionalLabel::vacuum();
        SymbolicKet::from_terms(
            3,
            vec![
                Term {
                    amplitude: cr(-h),
                    sites: vec![Site::new(Internal::Down, v), Site::new(Internal::Up, phi), Site::new(Internal::Up, v)],
                },
                Term {
                    amplitude: cr(h),
                    sites: vec![Site::new(Internal::Up, phi), Site::new(Internal::Up, v), Site::new(Internal::Up, phi)],
                },
            ],
        )
    }
}

/// Two-atom delocalised coherent state.
pub fn scenario_two_atom_cat<T: Real>(alpha: C<T>) -> Result<ProtocolResult<T>> {
    let h = cr(T::lit(std::f64::consts::FRAC_1_SQRT_2));
    let init = internal_superposition(
        &[(Internal::Up, h), (Internal::Down, h)],
        MotionalLabel::coherent(alpha),
        &[Site::up_vacuum()],
    )?;
    let mut run = ProtocolRunner::new(init, NetworkTopology::chain(2)?)?;
    run.transfer(0, 1)?
        .rotate(0, "recombine", &rotations::recombine())?
        .measure(0, Internal::Up)?;
    run.finish("two_atom_cat", Some(&targets::delocalised(alpha, 2)?))
}

/// Three-atom delocalised coherent state from the 2:1 weighted preparation.
pub fn scenario_three_atom_cat<T: Real>(alpha: C<T>) -> Result<ProtocolResult<T>> {
    let s5 = T::lit(5.0).sqrt();
    let init = internal_superposition(
        &[(Internal::Up, cr(T::lit(2.0) / s5)), (Internal::Down, cr(T::one() / s5))],
        MotionalLabel::coherent(alpha),
        &[Site::up_vacuum(), Site::up_vacuum()],
    )?;
    let mut run = ProtocolRunner::new(init, NetworkTopology::chain(3)?)?;
    run.transfer(0, 1)?
        .rotate(1, "split_even", &rotations::split_even())?
        .transfer(1, 2)?
        .rotate(0, "recombine", &rotations::recombine())?
        .rotate(1, "recombine", &rotations::recombine())?
        .measure(1, Internal::Up)?
        .measure(0, Internal::Up)?;
    run.finish("three_atom_cat", Some(&targets::delocalised(alpha, 3)?))
}

/// N-atom delocalised coherent state.
///
/// Atom 1 starts in `((N−1)↑ + ↓)/√((N−1)²+1))`; relay atom `k` (1-based,
/// `2 ≤ k ≤ N−1`) is split as `↑ → ((N−k)↑ + ↓)/√((N−k)²+1)` before passing the
/// excitation on. These weights give equal amplitudes on all N sites after
/// the final recombination and ↑ post-selection; at N = 3 they reduce to the
/// three-atom sequence.
pub fn scenario_n_atom_cat<T: Real>(alpha: C<T>, n: usize) -> Result<ProtocolResult<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 atoms, got {n}")));
    }
    let w = (n - 1) as f64;
    let norm = (w * w + 1.0).sqrt();
    let rest = vec![Site::up_vacuum(); n - 1];
    let init = internal_superposition(
        &[(Internal::Up, cr(T::lit(w / norm))), (Internal::Down, cr(T::lit(1.0 / norm)))],
        MotionalLabel::coherent(alpha),
        &rest,
    )?;
    let mut run = ProtocolRunner::new(init, NetworkTopology::chain(n)?)?;
    run.transfer(0, 1)?;
    for k in 1..n - 1 {
        let weight = (n - 1 - k) as f64;
        run.rotate(k, &format!("split({weight}:1)"), &rotations::weighted_split(weight, 1.0))?
            .transfer(k, k + 1)?;
    }
    for k in 0..n - 1 {
        run.rotate(k, "recombine", &rotations::recombine())?;
    }
    for k in (0..n - 1).rev() {
        run.measure(k, Internal::Up)?;
    }
    run.finish("n_atom_cat", Some(&targets::delocalised(alpha, n)?))
}

/// GHZ-type state: transfer, flip atom 1, reroute to atom 3, transfer again,
/// then the conditional displacement `Û₁(φ)` on atom 1.
pub fn scenario_ghz<T: Real>(phi: MotionalLabel<T>) -> Result<ProtocolResult<T>> {
    let h = cr(T::lit(std::f64::consts::FRAC_1_SQRT_2));
    let init = internal_superposition(
        &[(Internal::Up, h), (Internal::Down, h)],
        phi.canonical(),
        &[Site::up_vacuum(), Site::up_vacuum()],
    )?;
    let mut run = ProtocolRunner::new(init, NetworkTopology::chain(3)?)?;
    run.transfer(0, 1)?
        .rotate(0, "flip", &rotations::flip())?
        .reroute(0, 2)?
        .transfer(0, 2)?
        .displace(0, phi)?;
    run.finish("ghz", Some(&targets::ghz_motional(phi)?))
}

/// Hardy state from the two-atom sequence with `|φ⟩ = a|0⟩ + b|1⟩`.
pub fn scenario_hardy<T: Real>(a: C<T>, b: C<T>) -> Result<ProtocolResult<T>> {
    let total = a.norm_sqr() + b.norm_sqr();
    if (total - T::one()).abs() > T::structure_tol() {
        return Err(Error::InvalidArgument(format!("|a|^2 + |b|^2 must be 1, got {total}")));
    }
    let h = cr(T::lit(std::f64::consts::FRAC_1_SQRT_2));
    let mut terms = Vec::new();
    for s in [Internal::Up, Internal::Down] {
        for (m, amp) in [(0usize, a), (1, b)] {
            terms.push(Term {
                amplitude: h * amp,
                sites: vec![Site::new(s, MotionalLabel::fock(m)), Site::up_vacuum()],
            });
        }
    }
    let init = SymbolicKet::from_terms(2, terms)?;
    let mut run = ProtocolRunner::new(init, NetworkTopology::chain(2)?)?;
    run.transfer(0, 1)?
        .rotate(0, "recombine", &rotations::recombine())?
        .measure(0, Internal::Up)?;
    run.finish("hardy", Some(&targets::hardy(a, b)?))
}

/// Convenience for coherent labels from real parts.
pub fn alpha<T: Real>(re: f64, im: f64) -> C<T> {
    c(T::lit(re), T::lit(im))
}
