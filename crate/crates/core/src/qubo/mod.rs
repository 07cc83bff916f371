//! Quadratic unconstrained binary optimisation problems and their samples.
//!
//! Energy convention: `E(z) = zᵀQz + bᵀz` with `Q` symmetric, so an
//! off-diagonal pair contributes `2·Q[i][j]·z_i·z_j`. The `offset` is never
//! part of [`energy`]; callers add it when comparing against a loss.

mod batch;
mod decompose;
mod dump;

pub use batch::{assemble_batch, disassemble_batch, Placement, SubproblemBatch};
pub use decompose::{clamp_subproblem, energy_impact_select, flip_deltas};
pub use dump::QuboDump;

use std::collections::HashMap;

use thiserror::Error;

use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entry {index} of the assignment is {value}, expected 0 or 1")]
    NonBinary { index: usize, value: u8 },
    #[error("quadratic matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("cannot select {k} variables out of {n}")]
    TooMany { k: usize, n: usize },
    #[error("variable index {0} is out of range or repeated")]
    BadIndex(usize),
    #[error("subproblem has {found} variables, batch expects {expected}")]
    SubproblemSize { expected: usize, found: usize },
    #[error("{found} sample sets supplied for {expected} batch problems")]
    ResultCount { expected: usize, found: usize },
    #[error("malformed QUBO dump: {0}")]
    Dump(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem<T = f64> {
    q: Matrix<T>,
    b: Vec<T>,
    offset: T,
}

impl<T: Real> QuboProblem<T> {
    /// `q` must be square, symmetric and match `b` in size.
    pub fn new(q: Matrix<T>, b: Vec<T>, offset: T) -> Result<Self, QuboError> {
        let n = b.len();
        if q.rows() != n || q.cols() != n {
            return Err(QuboError::DimensionMismatch(format!("Q is {}x{}, b has {n}", q.rows(), q.cols())));
        }
        if !q.is_finite() || b.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(QuboError::NonFinite);
        }
        for i in 0..n {
            for j in i + 1..n {
                if q[(i, j)] != q[(j, i)] {
                    return Err(QuboError::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self { q, b, offset })
    }

    /// Builds from upper-triangular coordinates `(i, j, v)` with `i <= j`;
    /// each entry is mirrored to `(j, i)`. Repeated coordinates accumulate.
    pub fn from_upper(n: usize, entries: &[(usize, usize, T)], b: Vec<T>, offset: T) -> Result<Self, QuboError> {
        let mut q = Matrix::zeros(n, n);
        for &(i, j, v) in entries {
            if i > j || j >= n {
                return Err(QuboError::BadIndex(j.max(i)));
            }
            q[(i, j)] += v;
            if i != j {
                q[(j, i)] += v;
            }
        }
        Self::new(q, b, offset)
    }

    pub fn zeros(n: usize) -> Self {
        Self { q: Matrix::zeros(n, n), b: vec![T::zero(); n], offset: T::zero() }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.b.len()
    }

    #[inline]
    pub fn q(&self) -> &Matrix<T> {
        &self.q
    }

    #[inline]
    pub fn b(&self) -> &[T] {
        &self.b
    }

    #[inline]
    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn with_offset(mut self, offset: T) -> Self {
        self.offset = offset;
        self
    }

    /// Multiplies `Q`, `b` and the offset by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self { q: self.q.map(|v| v * c), b: self.b.iter().map(|&v| v * c).collect(), offset: self.offset * c }
    }

    /// Energy without validation; `z` must be binary and of length `n`.
    pub fn energy_of(&self, z: &[u8]) -> T {
        let n = self.n();
        let mut e = T::zero();
        for i in 0..n {
            if z[i] == 0 {
                continue;
            }
            let row = self.q.row(i);
            let mut acc = self.b[i] + row[i];
            for j in i + 1..n {
                if z[j] != 0 {
                    acc += row[j] + row[j];
                }
            }
            e += acc;
        }
        e
    }

    /// `b_i + 2·Σ_{j≠i} Q_ij z_j` for every `i`.
    pub fn local_fields(&self, z: &[u8]) -> Vec<T> {
        let n = self.n();
        let mut h = self.b.clone();
        for j in 0..n {
            if z[j] == 0 {
                continue;
            }
            let col = self.q.row(j);
            for i in 0..n {
                if i != j {
                    h[i] += col[i] + col[i];
                }
            }
        }
        h
    }

    fn check_assignment(&self, z: &[u8]) -> Result<(), QuboError> {
        if z.len() != self.n() {
            return Err(QuboError::DimensionMismatch(format!("assignment of length {} for {} variables", z.len(), self.n())));
        }
        if let Some((index, &value)) = z.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(QuboError::NonBinary { index, value });
        }
        Ok(())
    }

    /// Canonical little-endian serialisation used for content hashing:
    /// `n` as u64, the upper triangle row by row, `b`, then the offset, all
    /// as f64.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let n = self.n();
        let mut out = Vec::with_capacity(8 * (2 + n * (n + 1) / 2 + n));
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for i in 0..n {
            for j in i..n {
                out.extend_from_slice(&self.q[(i, j)].as_f64().to_le_bytes());
            }
        }
        for &v in &self.b {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        out.extend_from_slice(&self.offset.as_f64().to_le_bytes());
        out
    }
}

/// `zᵀQz + bᵀz`, excluding the offset.
pub fn energy<T: Real>(p: &QuboProblem<T>, z: &[u8]) -> Result<T, QuboError> {
    p.check_assignment(z)?;
    Ok(p.energy_of(z))
}

/// Sparse-coding QUBO for a binary mask `m` with coefficients `α = μ·m`:
/// `Q = μ·DᵀD`, `b = −2·Dᵀy + λ·1`.
///
/// This is the loss `‖μDm − y‖² + λμ‖m‖₁` divided by `μ`, so the offset is
/// `yᵀy / μ` and `μ·(energy + offset)` recovers the loss exactly.
pub fn build_sparse_coding_qubo<T: Real>(d: &Matrix<T>, y: &[T], lambda: T, mu: T) -> Result<QuboProblem<T>, QuboError> {
    if y.len() != d.rows() {
        return Err(QuboError::DimensionMismatch(format!("y has {} entries, D has {} rows", y.len(), d.rows())));
    }
    if !(mu > T::zero()) {
        return Err(QuboError::DimensionMismatch("mu must be positive".into()));
    }
    let gram = d.gram();
    Ok(sparse_coding_qubo_from_gram(&gram, &d.t_matvec(y), dot(y, y), lambda, mu))
}

/// Same construction from a precomputed Gram matrix `DᵀD` and correlation
/// `Dᵀy`; pipelines reuse one Gram matrix for every patch.
pub fn sparse_coding_qubo_from_gram<T: Real>(gram: &Matrix<T>, dty: &[T], yty: T, lambda: T, mu: T) -> QuboProblem<T> {
    let two = T::lit(2.0);
    QuboProblem {
        q: gram.map(|v| v * mu),
        b: dty.iter().map(|&c| lambda - two * c).collect(),
        offset: yty / mu,
    }
}

/// Unique binary solutions with their energies and how often each was read.
///
/// Solutions keep the order in which they were first observed.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T = f64> {
    pub solutions: Vec<Vec<u8>>,
    pub energies: Vec<T>,
    pub occurrences: Vec<u64>,
    pub total_reads: u64,
}

impl<T: Real> SampleSet<T> {
    pub fn empty() -> Self {
        Self { solutions: Vec::new(), energies: Vec::new(), occurrences: Vec::new(), total_reads: 0 }
    }

    /// Deduplicates raw reads and evaluates each unique one against `p`.
    pub fn from_reads(p: &QuboProblem<T>, reads: impl IntoIterator<Item = Vec<u8>>) -> Self {
        Self::from_weighted_reads(p, reads.into_iter().map(|r| (r, 1)))
    }

    /// Like [`SampleSet::from_reads`] but each read carries a multiplicity.
    pub fn from_weighted_reads(p: &QuboProblem<T>, reads: impl IntoIterator<Item = (Vec<u8>, u64)>) -> Self {
        let mut out = Self::empty();
        let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
        for (z, count) in reads {
            out.total_reads += count;
            if let Some(&k) = seen.get(&z) {
                out.occurrences[k] += count;
                continue;
            }
            seen.insert(z.clone(), out.solutions.len());
            out.energies.push(p.energy_of(&z));
            out.solutions.push(z);
            out.occurrences.push(count);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Index of the lowest-energy solution; ties go to the earliest one.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (k, &e) in self.energies.iter().enumerate() {
            match best {
                Some(b) if self.energies[b] <= e => {}
                _ => best = Some(k),
            }
        }
        best
    }

    pub fn best(&self) -> Option<(&[u8], T)> {
        self.best_index().map(|k| (self.solutions[k].as_slice(), self.energies[k]))
    }

    /// Largest discrepancy between stored and recomputed energies.
    pub fn max_energy_error(&self, p: &QuboProblem<T>) -> T {
        self.solutions
            .iter()
            .zip(&self.energies)
            .map(|(z, &e)| (p.energy_of(z) - e).abs())
            .fold(T::zero(), T::max)
    }

    /// Checks uniqueness, read accounting and stored energies.
    pub fn is_consistent(&self, p: &QuboProblem<T>, tol: T) -> bool {
        let unique: std::collections::HashSet<&Vec<u8>> = self.solutions.iter().collect();
        unique.len() == self.solutions.len()
            && self.energies.len() == self.solutions.len()
            && self.occurrences.len() == self.solutions.len()
            && self.occurrences.iter().sum::<u64>() == self.total_reads
            && self.solutions.iter().all(|z| z.len() == p.n())
            && self.max_energy_error(p) <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_energy(q: &Matrix<f64>, b: &[f64], z: &[u8]) -> f64 {
        let n = b.len();
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                e += q[(i, j)] * z[i] as f64 * z[j] as f64;
            }
            e += b[i] * z[i] as f64;
        }
        e
    }

    fn random_problem(n: usize, rng: &mut ChaCha8Rng) -> QuboProblem<f64> {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                entries.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        QuboProblem::from_upper(n, &entries, b, 0.0).unwrap()
    }

    #[test]
    fn hand_expanded_single_atom() {
        let d = Matrix::from_row_major(2, 1, vec![1.0, 0.0]).unwrap();
        let p = build_sparse_coding_qubo(&d, &[1.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(p.q()[(0, 0)], 1.0);
        assert_eq!(p.b(), &[-2.0]);
        assert_eq!(p.offset(), 1.0);
        assert_eq!(energy(&p, &[1]).unwrap() + p.offset(), 0.0);
    }

    #[test]
    fn zero_target_has_zero_linear_term() {
        let d = Matrix::from_fn(3, 2, |r, c| (r + 2 * c) as f64);
        let p = build_sparse_coding_qubo(&d, &[0.0; 3], 0.0, 1.0).unwrap();
        assert!(p.b().iter().all(|&v| v == 0.0));
        assert_eq!(energy(&p, &[0, 0]).unwrap(), 0.0);
        for z in [[1u8, 0], [0, 1], [1, 1]] {
            assert!(energy(&p, &z).unwrap() >= 0.0);
        }
    }

    #[test]
    fn energy_examples() {
        let p = QuboProblem::new(Matrix::identity(2), vec![-3.0, 0.0], 0.0).unwrap();
        assert_eq!(energy(&p, &[0, 0]).unwrap(), 0.0);
        assert_eq!(energy(&p, &[1, 0]).unwrap(), -2.0);
        assert!(matches!(energy(&p, &[1]), Err(QuboError::DimensionMismatch(_))));
        assert_eq!(energy(&p, &[1, 2]), Err(QuboError::NonBinary { index: 1, value: 2 }));
    }

    #[test]
    fn energy_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..20);
            let p = random_problem(n, &mut rng);
            let z: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let e = energy(&p, &z).unwrap();
            assert!((e - naive_energy(p.q(), p.b(), &z)).abs() < 1e-12);
        }
    }

    #[test]
    fn local_fields_give_flip_deltas() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_problem(9, &mut rng);
        let z: Vec<u8> = (0..9).map(|_| rng.random_range(0..2)).collect();
        let h = p.local_fields(&z);
        let e0 = p.energy_of(&z);
        for i in 0..9 {
            let mut f = z.clone();
            f[i] ^= 1;
            let sign = if z[i] == 0 { 1.0 } else { -1.0 };
            assert!((p.energy_of(&f) - e0 - sign * (h[i] + p.q()[(i, i)])).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let q = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(QuboProblem::new(q, vec![0.0, 0.0], 0.0), Err(QuboError::NotSymmetric(0, 1)));
    }

    #[test]
    fn sample_set_dedups_in_first_seen_order() {
        let p = QuboProblem::new(Matrix::identity(2), vec![-3.0, 0.0], 0.0).unwrap();
        let s = SampleSet::from_reads(&p, vec![vec![0, 1], vec![1, 0], vec![0, 1], vec![0, 1]]);
        assert_eq!(s.solutions, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(s.occurrences, vec![3, 1]);
        assert_eq!(s.total_reads, 4);
        assert_eq!(s.best().unwrap().0, &[1, 0]);
        assert!(s.is_consistent(&p, 1e-12));
    }

    #[test]
    fn best_ties_go_to_first() {
        let p = QuboProblem::<f64>::zeros(2);
        let s = SampleSet::from_reads(&p, vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(s.best_index(), Some(0));
    }

    #[test]
    fn canonical_bytes_distinguish_coefficients() {
        let a = QuboProblem::new(Matrix::identity(3), vec![0.0, 1.0, 2.0], 0.0).unwrap();
        let mut q = Matrix::identity(3);
        q[(1, 1)] = 1.0 + 1e-15;
        let b = QuboProblem::new(q, vec![0.0, 1.0, 2.0], 0.0).unwrap();
        assert_ne!(a.canonical_bytes(), b.canonical_bytes());
        assert_eq!(a.canonical_bytes(), a.clone().canonical_bytes());
    }
}
