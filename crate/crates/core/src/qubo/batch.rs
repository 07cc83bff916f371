//! Packing many small subproblems onto the diagonal of fixed-size QUBOs.

use super::{QuboError, QuboProblem, SampleSet};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Where one subproblem lives inside the batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    /// Which batch problem holds the block.
    pub problem: usize,
    /// First variable of the diagonal block.
    pub offset: usize,
    /// Positions of the block's variables within the patch's full mask.
    pub variables: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemBatch<T = f64> {
    pub problems: Vec<QuboProblem<T>>,
    pub placements: Vec<Placement>,
    pub subproblems: Vec<QuboProblem<T>>,
    pub sub_size: usize,
    pub batch_size: usize,
}

impl<T: Real> SubproblemBatch<T> {
    pub fn blocks_per_problem(&self) -> usize {
        self.batch_size / self.sub_size
    }
}

/// Places subproblems, in order, as diagonal blocks of `batch_size`-variable
/// problems. Unused trailing variables of the last problem are inert (zero
/// rows and zero linear terms). Each batch problem's offset is the sum of its
/// blocks' offsets.
pub fn assemble_batch<T: Real>(
    subs: Vec<QuboProblem<T>>,
    variables: Vec<Vec<usize>>,
    sub_size: usize,
    batch_size: usize,
) -> Result<SubproblemBatch<T>, QuboError> {
    if sub_size == 0 || batch_size < sub_size {
        return Err(QuboError::SubproblemSize { expected: batch_size, found: sub_size });
    }
    if variables.len() != subs.len() {
        return Err(QuboError::DimensionMismatch(format!("{} index lists for {} subproblems", variables.len(), subs.len())));
    }
    for (s, v) in subs.iter().zip(&variables) {
        if s.n() != sub_size {
            return Err(QuboError::SubproblemSize { expected: sub_size, found: s.n() });
        }
        if v.len() != sub_size {
            return Err(QuboError::SubproblemSize { expected: sub_size, found: v.len() });
        }
    }
    let per = batch_size / sub_size;
    let mut problems = Vec::new();
    let mut placements = Vec::with_capacity(subs.len());
    for (chunk_no, chunk) in subs.chunks(per).enumerate() {
        let mut q = Matrix::zeros(batch_size, batch_size);
        let mut b = vec![T::zero(); batch_size];
        let mut offset = T::zero();
        for (slot, sub) in chunk.iter().enumerate() {
            let base = slot * sub_size;
            for i in 0..sub_size {
                b[base + i] = sub.b()[i];
                for j in 0..sub_size {
                    q[(base + i, base + j)] = sub.q()[(i, j)];
                }
            }
            offset += sub.offset();
            let k = chunk_no * per + slot;
            placements.push(Placement { problem: chunk_no, offset: base, variables: variables[k].clone() });
        }
        problems.push(QuboProblem::new(q, b, offset)?);
    }
    Ok(SubproblemBatch { problems, placements, subproblems: subs, sub_size, batch_size })
}

/// Splits each batch problem's reads back into per-subproblem sample sets.
///
/// Projected reads are deduplicated with their occurrences summed, and
/// energies are recomputed against the subproblem; block-diagonal structure
/// makes this exact.
pub fn disassemble_batch<T: Real>(batch: &SubproblemBatch<T>, results: &[SampleSet<T>]) -> Result<Vec<SampleSet<T>>, QuboError> {
    if results.len() != batch.problems.len() {
        return Err(QuboError::ResultCount { expected: batch.problems.len(), found: results.len() });
    }
    batch
        .placements
        .iter()
        .zip(&batch.subproblems)
        .map(|(pl, sub)| {
            let set = &results[pl.problem];
            if set.solutions.iter().any(|z| z.len() != batch.batch_size) {
                return Err(QuboError::DimensionMismatch("read width differs from batch size".into()));
            }
            let projected = set
                .solutions
                .iter()
                .zip(&set.occurrences)
                .map(|(z, &o)| (z[pl.offset..pl.offset + batch.sub_size].to_vec(), o));
            Ok(SampleSet::from_weighted_reads(sub, projected))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(n: usize, rng: &mut ChaCha8Rng) -> QuboProblem<f64> {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                entries.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        QuboProblem::from_upper(n, &entries, b, rng.random_range(-1.0..1.0)).unwrap()
    }

    fn batch_of(count: usize, sub: usize, size: usize, seed: u64) -> SubproblemBatch<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subs: Vec<_> = (0..count).map(|_| random_problem(sub, &mut rng)).collect();
        let vars = (0..count).map(|k| (k..k + sub).collect()).collect();
        assemble_batch(subs, vars, sub, size).unwrap()
    }

    #[test]
    fn one_block_pads_the_rest() {
        let batch = batch_of(1, 32, 512, 1);
        assert_eq!(batch.problems.len(), 1);
        assert_eq!(batch.placements[0].offset, 0);
        let p = &batch.problems[0];
        assert!(p.b()[32..].iter().all(|&v| v == 0.0));
        for i in 32..512 {
            assert!(p.q().row(i).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sixteen_fill_exactly_one() {
        let batch = batch_of(16, 32, 512, 2);
        assert_eq!(batch.problems.len(), 1);
        let offsets: Vec<usize> = batch.placements.iter().map(|p| p.offset).collect();
        assert_eq!(offsets, (0..16).map(|k| 32 * k).collect::<Vec<_>>());
    }

    #[test]
    fn seventeen_spill_into_two() {
        let batch = batch_of(17, 32, 512, 3);
        assert_eq!(batch.problems.len(), 2);
        assert_eq!(batch.placements[16].problem, 1);
        assert_eq!(batch.placements[16].offset, 0);
    }

    #[test]
    fn off_block_entries_are_zero() {
        let batch = batch_of(3, 4, 16, 4);
        let q = batch.problems[0].q();
        for i in 0..16 {
            for j in 0..16 {
                if i / 4 != j / 4 {
                    assert_eq!(q[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn wrong_sized_subproblem_rejected() {
        let r = assemble_batch(vec![QuboProblem::<f64>::zeros(3)], vec![vec![0, 1, 2]], 4, 16);
        assert_eq!(r.unwrap_err(), QuboError::SubproblemSize { expected: 4, found: 3 });
    }

    #[test]
    fn single_block_unique_reads_pass_through() {
        let batch = batch_of(1, 4, 4, 5);
        let reads = vec![vec![1, 0, 0, 1], vec![0, 1, 1, 0]];
        let full = SampleSet::from_reads(&batch.problems[0], reads);
        let parts = disassemble_batch(&batch, &[full.clone()]).unwrap();
        assert_eq!(parts[0].solutions, full.solutions);
        assert_eq!(parts[0].occurrences, full.occurrences);
        for (a, b) in parts[0].energies.iter().zip(&full.energies) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_projections_merge_occurrences() {
        let batch = batch_of(2, 2, 4, 6);
        let full = SampleSet::from_weighted_reads(
            &batch.problems[0],
            vec![(vec![1, 0, 0, 0], 3), (vec![1, 0, 1, 1], 2)],
        );
        let parts = disassemble_batch(&batch, &[full]).unwrap();
        assert_eq!(parts[0].solutions, vec![vec![1, 0]]);
        assert_eq!(parts[0].occurrences, vec![5]);
        assert_eq!(parts[1].solutions.len(), 2);
        assert!(disassemble_batch(&batch, &[]).is_err());
    }

    #[test]
    fn block_energies_sum_to_full_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..10 {
            let batch = batch_of(5, 4, 16, 100 + seed);
            for p in 0..batch.problems.len() {
                let z: Vec<u8> = (0..16).map(|_| rng.random_range(0..2)).collect();
                let full = batch.problems[p].energy_of(&z) + batch.problems[p].offset();
                let parts: f64 = batch
                    .placements
                    .iter()
                    .zip(&batch.subproblems)
                    .filter(|(pl, _)| pl.problem == p)
                    .map(|(pl, s)| s.energy_of(&z[pl.offset..pl.offset + 4]) + s.offset())
                    .sum();
                assert!((full - parts).abs() < 1e-9);
            }
        }
    }
}
