//! Optimization backends and the sampler abstraction over them.

mod anneal;
mod brute;
mod lasso;
mod replay;
mod tabu;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use anneal::{anneal_once, beta_schedule, simulated_anneal, AnnealConfig, BetaRange, Interpolation};
pub use brute::{brute_force_minima, brute_force_sample, MAX_BRUTE_FORCE_VARS};
pub use lasso::{lasso_gram, lasso_objective, lasso_solve, lasso_solve_with, LassoConfig};
pub use replay::{problem_hash, record_samples, replay_samples};
pub use tabu::{tabu_search, tabu_search_stream, TabuConfig};

use crate::qubo::{QuboProblem, SampleSet};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("brute force refused for n = {n} (limit {max})")]
    TooLarge { n: usize, max: usize },
    #[error("problem not recorded in replay file")]
    NotRecorded,
    #[error("replay hash collision: stored problem differs")]
    HashCollision,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed replay data: {0}")]
    Format(String),
}

/// Which backend answers a `sample` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplerHandle {
    SimulatedAnneal(AnnealConfig),
    /// Each read is an independent multistart tabu run on its own RNG stream.
    Tabu(TabuConfig),
    BruteForce,
    Replay { path: PathBuf },
    /// Runs `inner` and appends every result to the replay file at `path`.
    Record { inner: Box<SamplerHandle>, path: PathBuf },
}

impl Default for SamplerHandle {
    fn default() -> Self {
        SamplerHandle::SimulatedAnneal(AnnealConfig { beta_range: BetaRange::Auto, ..AnnealConfig::default() })
    }
}

impl SamplerHandle {
    pub fn validate(&self) -> Result<(), SolverError> {
        match self {
            SamplerHandle::SimulatedAnneal(c) => c.validate().map_err(SolverError::Config),
            SamplerHandle::Tabu(c) => c.validate().map_err(SolverError::Config),
            SamplerHandle::Record { inner, .. } => inner.validate(),
            _ => Ok(()),
        }
    }

    /// Same backend with its RNG seed replaced.
    pub fn with_seed(&self, seed: u64) -> SamplerHandle {
        match self {
            SamplerHandle::SimulatedAnneal(c) => SamplerHandle::SimulatedAnneal(AnnealConfig { seed, ..*c }),
            SamplerHandle::Tabu(c) => SamplerHandle::Tabu(TabuConfig { seed, ..*c }),
            SamplerHandle::Record { inner, path } => {
                SamplerHandle::Record { inner: Box::new(inner.with_seed(seed)), path: path.clone() }
            }
            other => other.clone(),
        }
    }
}

/// Independent child seed for item `index` of a run seeded with `seed`
/// (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `reads` samples of `p` from the selected backend.
pub fn sample<T: Real>(handle: &SamplerHandle, p: &QuboProblem<T>, reads: usize) -> Result<SampleSet<T>, SolverError> {
    if reads == 0 {
        return Err(SolverError::Config("reads must be at least 1".into()));
    }
    if !p.b().iter().all(|v| v.is_finite()) || !p.q().is_finite() {
        return Err(SolverError::NonFinite);
    }
    handle.validate()?;
    match handle {
        SamplerHandle::SimulatedAnneal(cfg) => Ok(simulated_anneal(p, cfg, reads)),
        SamplerHandle::Tabu(cfg) => {
            use rayon::prelude::*;
            let raw: Vec<Vec<u8>> = (0..reads as u64).into_par_iter().map(|r| tabu_search_stream(p, cfg, r)).collect();
            Ok(SampleSet::from_reads(p, raw))
        }
        SamplerHandle::BruteForce => brute_force_sample(p, reads),
        SamplerHandle::Replay { path } => replay_samples(p, path),
        SamplerHandle::Record { inner, path } => {
            let s = sample(inner, p, reads)?;
            record_samples(p, &s, path)?;
            Ok(s)
        }
    }
}
