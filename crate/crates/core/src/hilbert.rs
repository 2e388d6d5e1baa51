//! Truncated Fock spaces, qubits, sparse operators and state containers.
//!
//! Bosonic modes are truncated to `dim` levels `|0⟩ … |dim−1⟩`. Composite
//! spaces are ordered tensor products; basis index of a product state is the
//! row-major (first factor slowest) combination of factor indices. Qubit basis
//! order is `(↑, ↓)` with index 0 = ↑.
//!
//! The truncated annihilation operator satisfies `[b, b†] = 1` only on the
//! subspace `n < dim − 1`; the last diagonal entry of the commutator equals
//! `1 − dim`. That row is a truncation artifact and carries no physics.

use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cone, cr, czero, Real, C};

/// Truncation bound (in amplitude-squared) tolerated for coherent states.
pub const COHERENT_DEFICIT_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSpace {
    dim: usize,
}

impl ModeSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "mode dimension must be at least 2, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Smallest dimension accepted by [`coherent_state`]: it satisfies
    /// `dim ≥ |α|² + 4|α| + 4` and keeps the norm deficit within
    /// [`COHERENT_DEFICIT_LIMIT`].
    pub fn for_coherent_amplitude(alpha_abs: f64) -> Self {
        let r2 = alpha_abs * alpha_abs;
        let rule = (r2 + 4.0 * alpha_abs + 4.0).ceil() as usize;
        // Poisson weights e^{-r²} r^{2n}/n!, accumulated until both limits hold.
        let mut weight = (-r2).exp();
        let mut kept = 0.0;
        let mut dim = 0;
        while dim < rule.max(2) || 1.0 - kept > COHERENT_DEFICIT_LIMIT {
            kept += weight;
            dim += 1;
            weight *= r2 / dim as f64;
        }
        Self { dim }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    Qubit,
    Mode(ModeSpace),
}

impl Subsystem {
    pub fn dim(&self) -> usize {
        match self {
            Subsystem::Qubit => 2,
            Subsystem::Mode(m) => m.dim(),
        }
    }
}

/// Ordered tensor product of qubits and truncated modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompositeSpace {
    factors: Vec<Subsystem>,
}

impl CompositeSpace {
    pub fn new(factors: Vec<Subsystem>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument(
                "composite space needs at least one factor".into(),
            ));
        }
        Ok(Self { factors })
    }

    pub fn modes(dims: &[usize]) -> Result<Self> {
        let factors = dims
            .iter()
            .map(|&d| ModeSpace::new(d).map(Subsystem::Mode))
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }

    pub fn factors(&self) -> &[Subsystem] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(Subsystem::dim).product()
    }

    pub fn factor_dims(&self) -> Vec<usize> {
        self.factors.iter().map(Subsystem::dim).collect()
    }

    /// Embed a single-factor operator as `1 ⊗ … ⊗ op ⊗ … ⊗ 1`.
    pub fn lift<T: Real>(&self, op: &Operator<T>, factor: usize) -> Result<Operator<T>> {
        let sub = self.factors.get(factor).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "factor {factor} out of range for {} factors",
                self.factors.len()
            ))
        })?;
        if sub.dim() != op.dim() {
            return Err(Error::DimensionMismatch {
                context: "lift",
                expected: sub.dim(),
                found: op.dim(),
            });
        }
        let left: usize = self.factors[..factor].iter().map(Subsystem::dim).product();
        let right: usize = self.factors[factor + 1..]
            .iter()
            .map(Subsystem::dim)
            .product();
        Ok(Operator::identity(left)
            .kron(op)
            .kron(&Operator::identity(right)))
    }
}

/// Square sparse operator in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator<T: Real> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C<T>>,
}

impl<T: Real> Operator<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, cone())))
    }

    /// Duplicate entries are summed; exact zeros are dropped.
    pub fn from_triplets<I>(dim: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C<T>)>,
    {
        let mut rows: Vec<Vec<(usize, C<T>)>> = vec![Vec::new(); dim];
        for (i, j, v) in entries {
            assert!(i < dim && j < dim, "triplet ({i},{j}) outside {dim}x{dim}");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut acc = czero::<T>();
                while k < row.len() && row[k].0 == j {
                    acc += row[k].1;
                    k += 1;
                }
                if acc != czero() {
                    cols.push(j);
                    vals.push(acc);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(dim: usize, data: &[C<T>]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "Operator::from_dense",
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self::from_triplets(
            dim,
            data.iter()
                .enumerate()
                .map(|(k, &v)| (k / dim, k % dim, v)),
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterate `(column, value)` over the stored entries of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C<T>)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C<T>)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or_else(czero)
    }

    pub fn to_dense(&self) -> Vec<C<T>> {
        let mut out = vec![czero(); self.dim * self.dim];
        for (i, j, v) in self.triplets() {
            out[i * self.dim + j] = v;
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (i, j, v * s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimension mismatch in add");
        Self::from_triplets(self.dim, self.triplets().chain(other.triplets()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(cr(-T::one())))
    }

    /// Linear combination `Σ cₖ Aₖ`.
    pub fn combine<'a, I>(dim: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (C<T>, &'a Operator<T>)>,
    {
        let mut entries = Vec::new();
        for (s, op) in terms {
            assert_eq!(op.dim, dim, "operator dimension mismatch in combine");
            if s == czero() {
                continue;
            }
            entries.extend(op.triplets().map(|(i, j, v)| (i, j, v * s)));
        }
        Self::from_triplets(dim, entries)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimension mismatch in matmul");
        let mut entries = Vec::new();
        for i in 0..self.dim {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    entries.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, entries)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let d = other.dim;
        let mut entries = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.triplets() {
            for (k, l, b) in other.triplets() {
                entries.push((i * d + k, j * d + l, a * b));
            }
        }
        Self::from_triplets(self.dim * d, entries)
    }

    pub fn apply(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch in apply");
        (0..self.dim)
            .map(|i| self.row(i).fold(czero(), |acc, (j, a)| acc + a * v[j]))
            .collect()
    }

    /// Largest entry-wise deviation from `A = A†`.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for (i, j, v) in self.triplets() {
            worst = worst.max((v - self.get(j, i).conj()).norm());
        }
        worst
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_defect() <= tol
    }
}

/// Annihilation operator on a truncated mode: `⟨n−1|b|n⟩ = √n`.
pub fn annihilation<T: Real>(space: ModeSpace) -> Operator<T> {
    Operator::from_triplets(
        space.dim(),
        (1..space.dim()).map(|n| (n - 1, n, cr(T::from_usize_lossy(n).sqrt()))),
    )
}

pub fn creation<T: Real>(space: ModeSpace) -> Operator<T> {
    annihilation::<T>(space).adjoint()
}

/// `b†b` built directly as a diagonal.
pub fn number<T: Real>(space: ModeSpace) -> Operator<T> {
    Operator::from_triplets(
        space.dim(),
        (0..space.dim()).map(|n| (n, n, cr(T::from_usize_lossy(n)))),
    )
}

/// Qubit projector `|s⟩⟨s|` in the `(↑, ↓)` basis.
pub fn qubit_projector<T: Real>(index: usize) -> Operator<T> {
    Operator::from_triplets(2, [(index, index, cone())])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T: Real> {
    amplitudes: Vec<C<T>>,
    /// `1 − Σ|cₙ|²` before renormalisation, for truncated constructions.
    truncation_deficit: T,
}

impl<T: Real> StateVector<T> {
    /// Normalises the amplitudes; fails on the zero vector.
    pub fn from_amplitudes(amplitudes: Vec<C<T>>) -> Result<Self> {
        let n2: T = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !(n2 > T::zero()) || !n2.is_finite() {
            return Err(Error::InvalidState("state vector has zero norm".into()));
        }
        let inv = T::one() / n2.sqrt();
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a * inv).collect(),
            truncation_deficit: T::zero(),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Truncation {
                detail: format!("basis index {index} outside dimension {dim}"),
            });
        }
        let mut a = vec![czero(); dim];
        a[index] = cone();
        Ok(Self {
            amplitudes: a,
            truncation_deficit: T::zero(),
        })
    }

    pub fn fock(n: usize, space: ModeSpace) -> Result<Self> {
        Self::basis(space.dim(), n)
    }

    pub fn vacuum(space: ModeSpace) -> Self {
        Self::basis(space.dim(), 0).expect("dim >= 2")
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn truncation_deficit(&self) -> T {
        self.truncation_deficit
    }

    pub fn norm(&self) -> T {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                context: "inner product",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(czero(), |acc, (a, b)| acc + a.conj() * *b))
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                out.push(*a * *b);
            }
        }
        let d = T::one() - (T::one() - self.truncation_deficit) * (T::one() - other.truncation_deficit);
        Self {
            amplitudes: out,
            truncation_deficit: d,
        }
    }

    pub fn to_density(&self) -> DensityOperator<T> {
        DensityOperator::from_pure(self)
    }
}

/// Coherent state `|α⟩` truncated to `space`, renormalised after truncation.
pub fn coherent_state<T: Real>(alpha: C<T>, space: ModeSpace) -> Result<StateVector<T>> {
    let abs = alpha.norm();
    let need = abs * abs + T::lit(4.0) * abs + T::lit(4.0);
    if need > T::from_usize_lossy(space.dim()) {
        return Err(Error::Truncation {
            detail: format!(
                "coherent amplitude |alpha| = {abs} needs dim >= {}, got {}",
                need.ceil(),
                space.dim()
            ),
        });
    }
    let mut amps = Vec::with_capacity(space.dim());
    let mut cur = cr((-(abs * abs) / T::lit(2.0)).exp());
    amps.push(cur);
    for n in 1..space.dim() {
        cur = cur * alpha / T::from_usize_lossy(n).sqrt();
        amps.push(cur);
    }
    let kept: T = amps.iter().map(|a| a.norm_sqr()).sum();
    let deficit = (T::one() - kept).max(T::zero());
    if deficit > T::lit(COHERENT_DEFICIT_LIMIT) {
        return Err(Error::Truncation {
            detail: format!(
                "coherent truncation deficit {deficit} exceeds {COHERENT_DEFICIT_LIMIT:e} at dim {}",
                space.dim()
            ),
        });
    }
    let mut state = StateVector::from_amplitudes(amps)?;
    state.truncation_deficit = deficit;
    Ok(state)
}

/// Kronecker product of factor states in declared order.
pub fn tensor<T: Real>(states: &[StateVector<T>], space: &CompositeSpace) -> Result<StateVector<T>> {
    if states.len() != space.factors().len() {
        return Err(Error::DimensionMismatch {
            context: "tensor (factor count)",
            expected: space.factors().len(),
            found: states.len(),
        });
    }
    for (s, f) in states.iter().zip(space.factors()) {
        if s.dim() != f.dim() {
            return Err(Error::DimensionMismatch {
                context: "tensor (factor dimension)",
                expected: f.dim(),
                found: s.dim(),
            });
        }
    }
    let mut it = states.iter();
    let first = it.next().expect("non-empty").clone();
    Ok(it.fold(first, |acc, s| acc.kron(s)))
}

/// Dense square complex matrix, row-major, used for density operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOperator<T: Real> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> DensityOperator<T> {
    pub fn from_pure(psi: &StateVector<T>) -> Self {
        let n = psi.dim();
        let a = psi.amplitudes();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(a[i] * a[j].conj());
            }
        }
        Self { dim: n, data }
    }

    /// Raw matrix without validation; see [`DensityOperator::validate`].
    pub fn from_raw(dim: usize, data: Vec<C<T>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "DensityOperator::from_raw",
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).map(|i| self.get(i, i)).fold(czero(), |a, b| a + b)
    }

    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `ρ ← (ρ + ρ†)/2`.
    pub fn hermitize(&mut self) {
        let n = self.dim;
        let half = T::lit(0.5);
        for i in 0..n {
            let d = self.data[i * n + i];
            self.data[i * n + i] = cr(d.re);
            for j in (i + 1)..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * half;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    /// Smallest eigenvalue of the Hermitian part, computed in double precision.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.dim;
        let m = Mat::<c64>::from_fn(n, n, |i, j| {
            let h = (self.get(i, j) + self.get(j, i).conj()) * T::lit(0.5);
            c64::new(h.re.as_f64(), h.im.as_f64())
        });
        match m.self_adjoint_eigenvalues(Side::Lower) {
            Ok(ev) => ev.into_iter().fold(f64::INFINITY, f64::min),
            Err(_) => f64::NAN,
        }
    }

    pub fn purity(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Checks Hermiticity, unit trace and the eigenvalue floor.
    pub fn validate(&self, tol: T) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > tol {
            return Err(Error::InvalidState(format!(
                "density operator not Hermitian (defect {herm})"
            )));
        }
        let tr = self.trace();
        if (tr - cone()).norm() > tol {
            return Err(Error::InvalidState(format!(
                "density operator trace {tr} differs from 1"
            )));
        }
        let lo = self.min_eigenvalue();
        if lo < -tol.as_f64() {
            return Err(Error::InvalidState(format!(
                "density operator has eigenvalue {lo:e} below floor"
            )));
        }
        Ok(())
    }

    /// Reduced state on the factors listed in `keep` (in composite order).
    pub fn partial_trace(&self, space: &CompositeSpace, keep: &[usize]) -> Result<Self> {
        if space.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "partial_trace",
                expected: space.dim(),
                found: self.dim,
            });
        }
        let dims = space.factor_dims();
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        if keep_sorted.iter().any(|&k| k >= dims.len()) {
            return Err(Error::InvalidArgument(format!(
                "partial_trace keep list {keep:?} out of range"
            )));
        }
        let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep_sorted.contains(k)).collect();
        let kd: usize = keep_sorted.iter().map(|&k| dims[k]).product();
        let td: usize = traced.iter().map(|&k| dims[k]).product();

        // Composite index from kept and traced multi-indices.
        let compose = |kidx: usize, tidx: usize| -> usize {
            let mut digits = vec![0usize; dims.len()];
            let mut r = kidx;
            for &k in keep_sorted.iter().rev() {
                digits[k] = r % dims[k];
                r /= dims[k];
            }
            let mut r = tidx;
            for &k in traced.iter().rev() {
                digits[k] = r % dims[k];
                r /= dims[k];
            }
            digits.iter().zip(&dims).fold(0, |acc, (d, n)| acc * n + d)
        };
        let index: Vec<Vec<usize>> = (0..kd)
            .map(|a| (0..td).map(|t| compose(a, t)).collect())
            .collect();
        let mut out = vec![czero(); kd * kd];
        for a in 0..kd {
            for b in 0..kd {
                let mut acc = czero();
                for t in 0..td {
                    acc += self.get(index[a][t], index[b][t]);
                }
                out[a * kd + b] = acc;
            }
        }
        Ok(Self { dim: kd, data: out })
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, psi: &StateVector<T>) -> Result<T> {
        if psi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "fidelity",
                expected: self.dim,
                found: psi.dim(),
            });
        }
        let a = psi.amplitudes();
        let mut acc = czero();
        for i in 0..self.dim {
            if a[i] == czero() {
                continue;
            }
            for j in 0..self.dim {
                acc += a[i].conj() * self.get(i, j) * a[j];
            }
        }
        Ok(acc.re)
    }
}

/// Anything an operator expectation value can be taken against.
pub trait QuantumState<T: Real> {
    fn expectation(&self, op: &Operator<T>) -> Result<C<T>>;
}

impl<T: Real> QuantumState<T> for StateVector<T> {
    fn expectation(&self, op: &Operator<T>) -> Result<C<T>> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "expectation",
                expected: op.dim(),
                found: self.dim(),
            });
        }
        let applied = op.apply(self.amplitudes());
        Ok(self
            .amplitudes()
            .iter()
            .zip(&applied)
            .fold(czero(), |acc, (a, b)| acc + a.conj() * *b))
    }
}

impl<T: Real> QuantumState<T> for DensityOperator<T> {
    fn expectation(&self, op: &Operator<T>) -> Result<C<T>> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "expectation",
                expected: op.dim(),
                found: self.dim(),
            });
        }
        Ok(op
            .triplets()
            .fold(czero(), |acc, (i, j, a)| acc + a * self.get(j, i)))
    }
}

/// `⟨ψ|A|ψ⟩` or `Tr(Aρ)`.
pub fn expectation<T: Real, S: QuantumState<T>>(op: &Operator<T>, state: &S) -> Result<C<T>> {
    state.expectation(op)
}
