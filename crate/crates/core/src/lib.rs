//! Single-image super-resolution by patch-wise binary sparse coding.
//!
//! Three reconstruction pipelines share one formulation: each patch's
//! gradient descriptor is coded against a low-resolution dictionary and the
//! code is replayed through the paired high-resolution dictionary. The
//! pipelines differ only in how the code is found: ℓ1 coordinate descent,
//! simulated annealing on a QUBO over a binary mask, or an ensemble of
//! annealing reads on clamped, batched sub-QUBOs whose Boltzmann-weighted
//! average also yields a per-patch entropy map.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for callers that do not care.

pub mod dictionary;
pub mod features;
pub mod imagecore;
pub mod linalg;
pub mod qubo;
pub mod scalar;
pub mod solvers;
pub mod sr;
pub mod synthbench;

pub use scalar::Real;

pub type ImageF64 = imagecore::Image<f64>;
pub type ImageF32 = imagecore::Image<f32>;
pub type MatrixF64 = linalg::Matrix<f64>;
pub type QuboF64 = qubo::QuboProblem<f64>;
pub type QuboF32 = qubo::QuboProblem<f32>;
pub type SampleSetF64 = qubo::SampleSet<f64>;
pub type DictionaryF64 = dictionary::DictionaryPair<f64>;
pub type SrOutputF64 = sr::SrOutput<f64>;
