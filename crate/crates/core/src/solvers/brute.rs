//! Exhaustive enumeration for small problems; the reference oracle.

use super::SolverError;
use crate::qubo::{QuboProblem, SampleSet};
use crate::scalar::Real;

pub const MAX_BRUTE_FORCE_VARS: usize = 24;

/// Every assignment attaining the minimum energy, in ascending binary order
/// (bit `i` of the counter is variable `i`), plus that energy.
///
/// Energies within `1e-12·(1 + |E_min|)` of the minimum count as ties.
pub fn brute_force_minima<T: Real>(p: &QuboProblem<T>) -> Result<(Vec<Vec<u8>>, T), SolverError> {
    let n = p.n();
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(SolverError::TooLarge { n, max: MAX_BRUTE_FORCE_VARS });
    }
    let q: Vec<f64> = p.q().as_slice().iter().map(|v| v.as_f64()).collect();
    let mut z = vec![0u8; n];
    let mut h: Vec<f64> = p.b().iter().map(|v| v.as_f64()).collect();
    let mut e = 0.0f64;
    let mut energies = Vec::with_capacity(1 << n);
    energies.push(0.0);
    // Gray-code walk: one flip per step.
    let mut gray = 0u64;
    for k in 1u64..(1u64 << n) {
        let i = k.trailing_zeros() as usize;
        let diag = q[i * n + i];
        let sign = if z[i] == 0 { 1.0 } else { -1.0 };
        e += sign * (h[i] + diag);
        z[i] ^= 1;
        let row = &q[i * n..(i + 1) * n];
        for (j, hj) in h.iter_mut().enumerate() {
            if j != i {
                *hj += 2.0 * sign * row[j];
            }
        }
        gray ^= 1 << i;
        energies.push(e);
        debug_assert_eq!(gray, k ^ (k >> 1));
    }
    let approx_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    // Recompute candidates exactly before deciding ties.
    let slack = 1e-9 * (1.0 + approx_min.abs());
    let mut candidates: Vec<(u64, T)> = energies
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= approx_min + slack)
        .map(|(k, _)| {
            let code = (k as u64) ^ ((k as u64) >> 1);
            (code, p.energy_of(&bits(code, n)))
        })
        .collect();
    let min = candidates.iter().map(|c| c.1).fold(T::infinity(), T::min);
    let tie = T::lit(1e-12) * (T::one() + min.abs());
    candidates.retain(|c| c.1 <= min + tie);
    candidates.sort_by_key(|c| c.0);
    Ok((candidates.into_iter().map(|(code, _)| bits(code, n)).collect(), min))
}

fn bits(code: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((code >> i) & 1) as u8).collect()
}

/// Ground states as a sample set. `reads` is spread over the ground states
/// in order, the first ones taking any remainder.
pub fn brute_force_sample<T: Real>(p: &QuboProblem<T>, reads: usize) -> Result<SampleSet<T>, SolverError> {
    let (minima, _) = brute_force_minima(p)?;
    let k = minima.len().min(reads.max(1));
    let reads = reads.max(1) as u64;
    let base = reads / k as u64;
    let extra = reads % k as u64;
    let weighted = minima.into_iter().take(k).enumerate().map(|(i, z)| (z, base + u64::from((i as u64) < extra)));
    Ok(SampleSet::from_weighted_reads(p, weighted))
}
