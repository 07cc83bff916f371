//! Metropolis simulated annealing with single-flip sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qubo::{QuboProblem, SampleSet};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Geometric,
    Linear,
}

/// Inverse-temperature range for one anneal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaRange {
    Fixed { start: f64, end: f64 },
    /// Derived from the coefficients: the hot end accepts the largest possible
    /// uphill flip with probability 1/2, the cold end accepts the smallest
    /// non-zero coefficient's flip with probability 1/100.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealConfig {
    pub sweeps: usize,
    pub reads: usize,
    pub beta_range: BetaRange,
    pub interpolation: Interpolation,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            sweeps: 64,
            reads: 32,
            beta_range: BetaRange::Fixed { start: 0.1, end: 10.0 },
            interpolation: Interpolation::Geometric,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.sweeps == 0 || self.reads == 0 {
            return Err("sweeps and reads must be at least 1".into());
        }
        if let BetaRange::Fixed { start, end } = self.beta_range {
            if !(start > 0.0 && start <= end && end.is_finite()) {
                return Err(format!("beta range must satisfy 0 < start <= end, got {start}..{end}"));
            }
        }
        Ok(())
    }
}

fn auto_beta_range<T: Real>(p: &QuboProblem<T>) -> (f64, f64) {
    let n = p.n();
    let mut max_delta = 0.0f64;
    let mut min_coef = f64::INFINITY;
    for i in 0..n {
        let row = p.q().row(i);
        let mut bound = (p.b()[i] + row[i]).abs().as_f64();
        for (j, &v) in row.iter().enumerate() {
            let v = v.as_f64().abs();
            if j != i {
                bound += 2.0 * v;
            }
            if v > 0.0 {
                min_coef = min_coef.min(v);
            }
        }
        let bi = p.b()[i].as_f64().abs();
        if bi > 0.0 {
            min_coef = min_coef.min(bi);
        }
        max_delta = max_delta.max(bound);
    }
    if max_delta == 0.0 || !min_coef.is_finite() {
        return (1.0, 1.0);
    }
    let hot = std::f64::consts::LN_2 / max_delta;
    let cold = (100.0f64).ln() / min_coef;
    (hot, cold.max(hot))
}

/// Inverse temperatures for each sweep.
pub fn beta_schedule<T: Real>(p: &QuboProblem<T>, cfg: &AnnealConfig) -> Vec<f64> {
    let (start, end) = match cfg.beta_range {
        BetaRange::Fixed { start, end } => (start, end),
        BetaRange::Auto => auto_beta_range(p),
    };
    let s = cfg.sweeps;
    (0..s)
        .map(|k| {
            if s == 1 {
                return end;
            }
            let t = k as f64 / (s - 1) as f64;
            match cfg.interpolation {
                Interpolation::Geometric => start * (end / start).powf(t),
                Interpolation::Linear => start + (end - start) * t,
            }
        })
        .collect()
}

/// RNG for read `read` of a run seeded with `seed`; independent of threading.
pub(crate) fn read_rng(seed: u64, read: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(read);
    rng
}

/// Off-diagonal couplings, stored as dense rows when most entries are non-zero
/// and as per-variable neighbour lists otherwise, so block-sparse problems
/// only pay for their non-zeros.
pub(crate) struct Couplings {
    pub diag: Vec<f64>,
    n: usize,
    /// Row-major with a zero diagonal.
    dense: Option<Vec<f64>>,
    nbr: Vec<Vec<(u32, f64)>>,
}

impl Couplings {
    pub(crate) fn new<T: Real>(p: &QuboProblem<T>) -> Self {
        let n = p.n();
        let diag = (0..n).map(|i| p.q()[(i, i)].as_f64()).collect();
        let nnz = p.q().as_slice().iter().filter(|v| **v != T::zero()).count();
        if 2 * nnz > n * n {
            let mut dense: Vec<f64> = p.q().as_slice().iter().map(|v| v.as_f64()).collect();
            for i in 0..n {
                dense[i * n + i] = 0.0;
            }
            return Self { diag, n, dense: Some(dense), nbr: Vec::new() };
        }
        let nbr = (0..n)
            .map(|i| {
                p.q()
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, v)| j != i && *v != T::zero())
                    .map(|(j, v)| (j as u32, v.as_f64()))
                    .collect()
            })
            .collect();
        Self { diag, n, dense: None, nbr }
    }

    #[inline]
    pub(crate) fn flip(&self, z: &mut [u8], h: &mut [f64], i: usize) {
        let sign = if z[i] == 0 { 2.0 } else { -2.0 };
        z[i] ^= 1;
        match &self.dense {
            Some(d) => {
                for (hj, &v) in h.iter_mut().zip(&d[i * self.n..(i + 1) * self.n]) {
                    *hj += sign * v;
                }
            }
            None => {
                for &(j, v) in &self.nbr[i] {
                    h[j as usize] += sign * v;
                }
            }
        }
    }
}

fn anneal_prepared<T: Real>(p: &QuboProblem<T>, c: &Couplings, betas: &[f64], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = p.n();
    let mut z: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    let mut h: Vec<f64> = p.local_fields(&z).iter().map(|v| v.as_f64()).collect();
    for &beta in betas {
        for i in 0..n {
            let delta = if z[i] == 0 { h[i] + c.diag[i] } else { -(h[i] + c.diag[i]) };
            let x = beta * delta;
            if x <= 0.0 || (x < 40.0 && rng.random::<f64>() < (-x).exp()) {
                c.flip(&mut z, &mut h, i);
            }
        }
    }
    z
}

/// One annealing read from a uniformly random start.
pub fn anneal_once<T: Real>(p: &QuboProblem<T>, betas: &[f64], rng: &mut ChaCha8Rng) -> Vec<u8> {
    anneal_prepared(p, &Couplings::new(p), betas, rng)
}

/// `reads` independent anneals collected into a [`SampleSet`].
pub fn simulated_anneal<T: Real>(p: &QuboProblem<T>, cfg: &AnnealConfig, reads: usize) -> SampleSet<T> {
    let betas = beta_schedule(p, cfg);
    let c = Couplings::new(p);
    let raw: Vec<Vec<u8>> = (0..reads as u64)
        .into_par_iter()
        .map(|r| anneal_prepared(p, &c, &betas, &mut read_rng(cfg.seed, r)))
        .collect();
    SampleSet::from_reads(p, raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn geometric_schedule_endpoints() {
        let p = QuboProblem::<f64>::zeros(2);
        let cfg = AnnealConfig { sweeps: 5, ..Default::default() };
        let b = beta_schedule(&p, &cfg);
        assert!((b[0] - 0.1).abs() < 1e-15);
        assert!((b[4] - 10.0).abs() < 1e-12);
        assert!((b[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auto_range_scales_with_coefficients() {
        let p = QuboProblem::new(Matrix::identity(2), vec![-3.0, 0.5], 0.0).unwrap();
        let (hot, cold) = auto_beta_range(&p);
        let (hot2, cold2) = auto_beta_range(&p.scaled(0.01));
        assert!((hot2 / hot - 100.0).abs() < 1e-9);
        assert!((cold2 / cold - 100.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_per_seed() {
        let p = QuboProblem::new(Matrix::identity(3), vec![-1.5, 0.5, -0.2], 0.0).unwrap();
        let cfg = AnnealConfig { seed: 9, ..Default::default() };
        assert_eq!(simulated_anneal(&p, &cfg, 8), simulated_anneal(&p, &cfg, 8));
    }

    #[test]
    fn validation() {
        assert!(AnnealConfig::default().validate().is_ok());
        let bad = AnnealConfig { beta_range: BetaRange::Fixed { start: 2.0, end: 1.0 }, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(AnnealConfig { reads: 0, ..Default::default() }.validate().is_err());
    }
}
