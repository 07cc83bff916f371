//! The three super-resolution pipelines and their shared reconstruction steps.
//!
//! Every pipeline works on the luma plane: extract gradient features from the
//! bicubic enlargement, code each patch descriptor against `d_l`, synthesise
//! the pixel patch from `d_h`, blend overlaps by averaging, then enforce
//! consistency with the input by iterative back-projection.
//!
//! Descriptors are scaled the way training scaled them (`f / √M_l`) and then
//! normalised to unit length; the removed length `s` is restored on synthesis,
//! `x = √M_h · s · D_h α + mean(bicubic patch)`.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{mean, DictionaryPair};
use crate::features::{extract_feature_vector, extract_features, extract_patch_vector, make_patch_grid, FeatureError, PatchGeometry, PatchGrid};
use crate::imagecore::{resample, rgb_to_ycbcr, save_image, upscale, ycbcr_to_rgb, Image, ImageError, ResampleKernel};
use crate::linalg::{norm2, Matrix};
use crate::qubo::{
    assemble_batch, clamp_subproblem, disassemble_batch, energy_impact_select, sparse_coding_qubo_from_gram, QuboError, QuboProblem,
    SampleSet, SubproblemBatch,
};
use crate::scalar::Real;
use crate::solvers::{derive_seed, lasso_gram, sample, tabu_search, LassoConfig, SamplerHandle, SolverError, TabuConfig};

#[derive(Debug, Error)]
pub enum SrError {
    #[error("dictionary scale {dict} does not match configured scale {config}")]
    ScaleMismatch { dict: usize, config: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("pixel ({row}, {col}) is not covered by any patch")]
    Uncovered { row: usize, col: usize },
    #[error("empty input")]
    Empty,
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Inverse temperature for Boltzmann weighting of reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// `1 / std` of the patch's read energies (counting occurrences).
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackprojectConfig {
    /// Gaussian blur applied before downsampling in the forward model;
    /// `None` means no blur.
    pub blur_sigma: Option<f64>,
    /// Gaussian used to spread the upsampled residual.
    pub spread_sigma: f64,
    pub kernel_size: usize,
    pub step: f64,
}

impl Default for BackprojectConfig {
    fn default() -> Self {
        Self { blur_sigma: None, spread_sigma: 1.0, kernel_size: 7, step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrConfig {
    pub scale: usize,
    pub lambda_lasso: f64,
    pub lambda_anneal: f64,
    pub mu: f64,
    pub beta: BetaMode,
    pub n_reads: usize,
    pub backproject_iters: usize,
    pub backproject: BackprojectConfig,
    pub sampler: SamplerHandle,
    pub tabu: TabuConfig,
    pub sub_size: usize,
    pub batch_size: usize,
    /// Patch stride on the high-resolution grid.
    pub stride: usize,
    /// Length the binary pipelines rescale each patch descriptor to before
    /// building its QUBO.
    pub descriptor_norm: f64,
    pub seed: u64,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            scale: 3,
            lambda_lasso: 1e-5,
            lambda_anneal: 0.1,
            mu: 0.05,
            beta: BetaMode::Adaptive,
            n_reads: 100,
            backproject_iters: 100,
            backproject: BackprojectConfig::default(),
            sampler: SamplerHandle::default(),
            tabu: TabuConfig::default(),
            sub_size: 32,
            batch_size: 512,
            stride: 4,
            descriptor_norm: 0.35,
            seed: 0,
        }
    }
}

impl SrConfig {
    pub fn validate(&self) -> Result<(), SrError> {
        let bad = |m: String| Err(SrError::Config(m));
        if self.scale == 0 {
            return bad("scale must be at least 1".into());
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if let BetaMode::Fixed(b) = self.beta {
            if !(b > 0.0) {
                return bad(format!("beta must be positive, got {b}"));
            }
        }
        if !(self.descriptor_norm > 0.0 && self.descriptor_norm.is_finite()) {
            return bad(format!("descriptor_norm must be positive, got {}", self.descriptor_norm));
        }
        if self.n_reads == 0 {
            return bad("n_reads must be at least 1".into());
        }
        if !(self.lambda_lasso >= 0.0 && self.lambda_anneal.is_finite()) {
            return bad("lambda values must be finite and lasso lambda non-negative".into());
        }
        if self.sub_size == 0 || self.batch_size < self.sub_size {
            return bad(format!("need 1 <= sub_size <= batch_size, got {} and {}", self.sub_size, self.batch_size));
        }
        if !(self.backproject.step > 0.0 && self.backproject.spread_sigma > 0.0 && self.backproject.kernel_size % 2 == 1) {
            return bad("backprojection needs positive step and sigma and an odd kernel size".into());
        }
        self.tabu.validate().map_err(SrError::Config)?;
        self.sampler.validate()?;
        Ok(())
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub cpu_opt: f64,
    pub create_qubo: f64,
    pub sampler_prep: f64,
    pub sampler_opt: f64,
    pub misc: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.cpu_opt + self.create_qubo + self.sampler_prep + self.sampler_opt + self.misc
    }

    pub fn add(&mut self, other: &Timings) {
        self.cpu_opt += other.cpu_opt;
        self.create_qubo += other.create_qubo;
        self.sampler_prep += other.sampler_prep;
        self.sampler_opt += other.sampler_opt;
        self.misc += other.misc;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchEntropy {
    pub anchor: (usize, usize),
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrOutput<T = f64> {
    pub image: Image<T>,
    /// Per-patch entropy painted over each footprint in traversal order.
    pub entropy_map: Option<Image<T>>,
    pub patch_entropy: Option<Vec<PatchEntropy>>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lasso,
    #[serde(alias = "anneal")]
    ClassicalAnneal,
    #[serde(alias = "ensemble")]
    EnsembleAnneal,
}

/// How the ensemble pipeline turns a patch's reads into one code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Boltzmann-weighted mean of the synthesised patches.
    Boltzmann,
    /// Only the lowest-energy read (earliest on ties).
    BestRead,
}

struct Prepared<T> {
    features: Image<T>,
    bicubic: Image<T>,
    grid: PatchGrid,
    geometry: PatchGeometry,
}

/// Patch descriptor as handed to a coder. `scale` maps a code for `y` back to
/// the dimension-weighted feature vector.
struct Descriptor<T> {
    y: Vec<T>,
    scale: T,
    mean: T,
}

fn prepare<T: Real>(lr: &Image<T>, dict: &DictionaryPair<T>, cfg: &SrConfig) -> Result<Prepared<T>, SrError> {
    cfg.validate()?;
    if dict.scale != cfg.scale {
        return Err(SrError::ScaleMismatch { dict: dict.scale, config: cfg.scale });
    }
    if lr.channels() != 1 {
        return Err(SrError::Image(ImageError::ChannelCount { expected: 1, found: lr.channels() }));
    }
    let geometry = dict.geometry(cfg.stride);
    geometry.validate()?;
    if dict.m_l() != geometry.feature_dim(4) || dict.m_h() != geometry.pixel_dim() {
        return Err(SrError::DimensionMismatch(format!(
            "dictionary rows {}x{} do not fit patch geometry {:?}",
            dict.m_l(),
            dict.m_h(),
            geometry
        )));
    }
    let features = extract_features(lr, cfg.scale)?;
    let bicubic = upscale(lr, cfg.scale)?;
    let grid = make_patch_grid(bicubic.width(), bicubic.height(), geometry.hr_patch, geometry.stride)?;
    Ok(Prepared { features, bicubic, grid, geometry })
}

/// Feature vector weighted by `1/√M_l`. With `norm` given it is rescaled to
/// that length, or zeroed when numerically flat; otherwise it is left as is.
fn descriptor<T: Real>(
    prep: &Prepared<T>,
    dict: &DictionaryPair<T>,
    anchor: (usize, usize),
    norm: Option<T>,
) -> Result<Descriptor<T>, SrError> {
    let f = extract_feature_vector(&prep.features, anchor, &prep.geometry)?;
    let w = T::one() / T::from_usize_lossy(dict.m_l()).sqrt();
    let mut y: Vec<T> = f.iter().map(|&v| v * w).collect();
    let scale = match norm {
        None => T::one(),
        Some(rho) => {
            let s = norm2(&y);
            if s > T::lit(1e-10) {
                y.iter_mut().for_each(|v| *v *= rho / s);
                s / rho
            } else {
                y.iter_mut().for_each(|v| *v = T::zero());
                T::zero()
            }
        }
    };
    let m = if dict.mean_removed {
        mean(&extract_patch_vector(&prep.bicubic, anchor, prep.geometry.hr_patch)?)
    } else {
        T::zero()
    };
    Ok(Descriptor { y, scale, mean: m })
}

fn synthesize<T: Real>(dict: &DictionaryPair<T>, d: &Descriptor<T>, alpha: &[T]) -> Vec<T> {
    let g = T::from_usize_lossy(dict.m_h()).sqrt() * d.scale;
    dict.d_h.matvec(alpha).into_iter().map(|v| g * v + d.mean).collect()
}

/// Adds `x` into the canvas at `anchor` and bumps the per-pixel weights.
pub fn accumulate_patch<T: Real>(
    canvas: &mut Image<T>,
    weights: &mut Image<T>,
    x: &[T],
    anchor: (usize, usize),
    patch_size: usize,
) -> Result<(), SrError> {
    let (row, col) = anchor;
    if row + patch_size > canvas.height() || col + patch_size > canvas.width() || !canvas.same_shape(weights) {
        return Err(SrError::Feature(FeatureError::OutOfBounds { row, col, patch: patch_size }));
    }
    if x.len() != patch_size * patch_size {
        return Err(SrError::Feature(FeatureError::VectorLength { expected: patch_size * patch_size, found: x.len() }));
    }
    for r in 0..patch_size {
        for c in 0..patch_size {
            let v = canvas.get(0, row + r, col + c) + x[r * patch_size + c];
            canvas.set(0, row + r, col + c, v);
            let w = weights.get(0, row + r, col + c) + T::one();
            weights.set(0, row + r, col + c, w);
        }
    }
    Ok(())
}

/// Divides the accumulated canvas by its weights.
pub fn finalize_canvas<T: Real>(canvas: &Image<T>, weights: &Image<T>) -> Result<Image<T>, SrError> {
    let mut out = canvas.clone();
    for r in 0..canvas.height() {
        for c in 0..canvas.width() {
            let w = weights.get(0, r, c);
            if w <= T::zero() {
                return Err(SrError::Uncovered { row: r, col: c });
            }
            out.set(0, r, c, canvas.get(0, r, c) / w);
        }
    }
    Ok(out)
}

fn blend<T: Real>(prep: &Prepared<T>, patches: &[Vec<T>]) -> Result<Image<T>, SrError> {
    let (w, h) = (prep.bicubic.width(), prep.bicubic.height());
    let mut canvas = Image::new(w, h, 1);
    let mut weights = Image::new(w, h, 1);
    for (&anchor, x) in prep.grid.positions.iter().zip(patches) {
        accumulate_patch(&mut canvas, &mut weights, x, anchor, prep.geometry.hr_patch)?;
    }
    finalize_canvas(&canvas, &weights)
}

fn gaussian_taps<T: Real>(sigma: f64, size: usize) -> Vec<T> {
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size).map(|k| (-((k as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|&v| T::lit(v / sum)).collect()
}

/// Separable edge-clamped Gaussian blur.
pub fn gaussian_blur<T: Real>(img: &Image<T>, sigma: f64, size: usize) -> Image<T> {
    let taps = gaussian_taps::<T>(sigma, size);
    let half = (size / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let mut tmp = Image::new(w, h, img.channels());
    let mut out = Image::new(w, h, img.channels());
    for ch in 0..img.channels() {
        for r in 0..h {
            for c in 0..w {
                let v = taps.iter().enumerate().fold(T::zero(), |acc, (k, &t)| {
                    acc + t * img.get_clamped(ch, r as isize, c as isize + k as isize - half)
                });
                tmp.set(ch, r, c, v);
            }
        }
        for r in 0..h {
            for c in 0..w {
                let v = taps.iter().enumerate().fold(T::zero(), |acc, (k, &t)| {
                    acc + t * tmp.get_clamped(ch, r as isize + k as isize - half, c as isize)
                });
                out.set(ch, r, c, v);
            }
        }
    }
    out
}

/// Forward observation model: optional blur, then bicubic reduction to the
/// size of `lr`.
pub fn observe<T: Real>(x: &Image<T>, lr_w: usize, lr_h: usize, bp: &BackprojectConfig) -> Result<Image<T>, SrError> {
    let blurred = match bp.blur_sigma {
        Some(s) => gaussian_blur(x, s, bp.kernel_size),
        None => x.clone(),
    };
    Ok(resample(&blurred, lr_w, lr_h, ResampleKernel::bicubic())?)
}

fn residual<T: Real>(x: &Image<T>, lr: &Image<T>, bp: &BackprojectConfig) -> Result<(Image<T>, f64), SrError> {
    let sim = observe(x, lr.width(), lr.height(), bp)?;
    let mut e = lr.clone();
    let mut ss = 0.0;
    for (v, s) in e.as_mut_slice().iter_mut().zip(sim.as_slice()) {
        *v -= *s;
        ss += v.as_f64() * v.as_f64();
    }
    Ok((e, ss.sqrt()))
}

/// Iterative back-projection towards `observe(X) = lr`.
///
/// Each iteration upsamples the low-resolution residual, spreads it with the
/// Gaussian kernel and adds `step` times it to the estimate. If a full step
/// would increase the residual the step is halved (up to 20 times) and the
/// iteration is skipped when nothing helps, so the returned residual trace is
/// non-increasing. Returns the estimate and the residual norm before the
/// first and after every iteration.
pub fn backproject_traced<T: Real>(
    x0: &Image<T>,
    lr: &Image<T>,
    iters: usize,
    bp: &BackprojectConfig,
) -> Result<(Image<T>, Vec<f64>), SrError> {
    if x0.channels() != lr.channels() || x0.width() < lr.width() || x0.height() < lr.height() {
        return Err(SrError::DimensionMismatch(format!(
            "estimate {}x{}x{} vs observation {}x{}x{}",
            x0.width(),
            x0.height(),
            x0.channels(),
            lr.width(),
            lr.height(),
            lr.channels()
        )));
    }
    let mut x = x0.clone();
    let (mut e, mut r) = residual(&x, lr, bp)?;
    let mut trace = vec![r];
    for _ in 0..iters {
        if r == 0.0 {
            trace.push(r);
            continue;
        }
        let up = resample(&e, x.width(), x.height(), ResampleKernel::bicubic())?;
        let spread = gaussian_blur(&up, bp.spread_sigma, bp.kernel_size);
        let mut step = bp.step;
        for _ in 0..=20 {
            let mut cand = x.clone();
            let c = T::lit(step);
            for (v, d) in cand.as_mut_slice().iter_mut().zip(spread.as_slice()) {
                *v += c * *d;
            }
            let (ce, cr) = residual(&cand, lr, bp)?;
            if cr <= r {
                x = cand;
                e = ce;
                r = cr;
                break;
            }
            step *= 0.5;
        }
        trace.push(r);
    }
    Ok((x, trace))
}

pub fn backproject<T: Real>(x0: &Image<T>, lr: &Image<T>, cfg: &SrConfig) -> Result<Image<T>, SrError> {
    Ok(backproject_traced(x0, lr, cfg.backproject_iters, &cfg.backproject)?.0)
}

/// `p_j ∝ O_j · exp(−β (E_j − min E))`, normalised.
pub fn boltzmann_weights<T: Real>(energies: &[T], occurrences: &[u64], beta: T) -> Result<Vec<T>, SrError> {
    if energies.is_empty() {
        return Err(SrError::Empty);
    }
    if energies.len() != occurrences.len() {
        return Err(SrError::DimensionMismatch(format!("{} energies, {} occurrences", energies.len(), occurrences.len())));
    }
    let emin = energies.iter().copied().fold(T::infinity(), T::min);
    let raw: Vec<T> = energies
        .iter()
        .zip(occurrences)
        .map(|(&e, &o)| T::lit(o as f64) * (-(beta * (e - emin))).exp())
        .collect();
    let z: T = raw.iter().copied().sum();
    if !(z > T::zero()) {
        return Err(SrError::Empty);
    }
    Ok(raw.into_iter().map(|v| v / z).collect())
}

/// `−Σ p log p`, with `0 log 0 = 0`.
pub fn entropy<T: Real>(p: &[T]) -> T {
    p.iter().filter(|&&v| v > T::zero()).map(|&v| -v * v.ln()).sum()
}

fn adaptive_beta<T: Real>(s: &SampleSet<T>) -> T {
    let total = s.occurrences.iter().sum::<u64>() as f64;
    let mean = s.energies.iter().zip(&s.occurrences).map(|(e, &o)| e.as_f64() * o as f64).sum::<f64>() / total;
    let var = s
        .energies
        .iter()
        .zip(&s.occurrences)
        .map(|(e, &o)| (e.as_f64() - mean).powi(2) * o as f64)
        .sum::<f64>()
        / total;
    let sd = var.sqrt();
    if sd > 0.0 && sd.is_finite() {
        T::lit(1.0 / sd)
    } else {
        T::one()
    }
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn finish<T: Real>(
    lr: &Image<T>,
    prep: &Prepared<T>,
    patches: &[Vec<T>],
    cfg: &SrConfig,
    timings: &mut Timings,
) -> Result<Image<T>, SrError> {
    let t = Instant::now();
    let x0 = blend(prep, patches)?;
    let x = backproject(&x0, lr, cfg)?;
    timings.misc += elapsed(t);
    Ok(x)
}

/// Lasso coding of every patch.
pub fn sr_lasso<T: Real>(lr: &Image<T>, dict: &DictionaryPair<T>, cfg: &SrConfig) -> Result<SrOutput<T>, SrError> {
    let mut timings = Timings::default();
    let t = Instant::now();
    let prep = prepare(lr, dict, cfg)?;
    let gram = dict.d_l.gram();
    let lambda = T::lit(2.0 * dict.m_l() as f64 * cfg.lambda_lasso);
    timings.misc += elapsed(t);

    let t = Instant::now();
    let patches: Vec<Vec<T>> = prep
        .grid
        .positions
        .par_iter()
        .map(|&anchor| {
            let d = descriptor(&prep, dict, anchor, None)?;
            let mut alpha = vec![T::zero(); dict.n_atoms];
            let dty = dict.d_l.t_matvec(&d.y);
            lasso_gram(&gram, &dty, lambda, &LassoConfig::default(), &mut alpha);
            Ok(synthesize(dict, &d, &alpha))
        })
        .collect::<Result<_, SrError>>()?;
    timings.cpu_opt += elapsed(t);

    let image = finish(lr, &prep, &patches, cfg, &mut timings)?;
    Ok(SrOutput { image, entropy_map: None, patch_entropy: None, timings })
}

fn patch_qubo<T: Real>(gram: &Matrix<T>, dict: &DictionaryPair<T>, d: &Descriptor<T>, cfg: &SrConfig) -> QuboProblem<T> {
    let dty = dict.d_l.t_matvec(&d.y);
    let yty = d.y.iter().map(|&v| v * v).sum();
    sparse_coding_qubo_from_gram(gram, &dty, yty, T::lit(cfg.lambda_anneal), T::lit(cfg.mu))
}

/// Samples problem `k` with the sampler reseeded by `derive_seed(seed, k)`.
/// Recording runs one problem at a time so the replay file has a fixed order.
fn sample_all<T: Real>(problems: Vec<&QuboProblem<T>>, cfg: &SrConfig) -> Result<Vec<SampleSet<T>>, SrError> {
    let one = |(k, p): (usize, &&QuboProblem<T>)| sample(&cfg.sampler.with_seed(derive_seed(cfg.seed, k as u64)), p, cfg.n_reads);
    let sets = if matches!(cfg.sampler, SamplerHandle::Record { .. }) {
        problems.iter().enumerate().map(one).collect::<Result<_, _>>()
    } else {
        problems.par_iter().enumerate().map(one).collect::<Result<_, _>>()
    };
    Ok(sets?)
}

/// One QUBO per patch, sampled with the configured sampler; the best read
/// becomes the code `α = μ·m`.
pub fn sr_classical_anneal<T: Real>(lr: &Image<T>, dict: &DictionaryPair<T>, cfg: &SrConfig) -> Result<SrOutput<T>, SrError> {
    let mut timings = Timings::default();
    let t = Instant::now();
    let prep = prepare(lr, dict, cfg)?;
    let gram = dict.d_l.gram();
    let mu = T::lit(cfg.mu);
    timings.misc += elapsed(t);

    let t = Instant::now();
    let problems: Vec<(Descriptor<T>, QuboProblem<T>)> = prep
        .grid
        .positions
        .par_iter()
        .map(|&anchor| {
            let d = descriptor(&prep, dict, anchor, Some(T::lit(cfg.descriptor_norm)))?;
            let p = patch_qubo(&gram, dict, &d, cfg);
            Ok((d, p))
        })
        .collect::<Result<_, SrError>>()?;
    timings.create_qubo += elapsed(t);

    let t = Instant::now();
    let sets = sample_all(problems.iter().map(|(_, p)| p).collect(), cfg)?;
    let patches: Vec<Vec<T>> = problems
        .par_iter()
        .zip(&sets)
        .map(|((d, _), s)| {
            let (m, _) = s.best().ok_or(SrError::Empty)?;
            let alpha: Vec<T> = m.iter().map(|&b| if b == 1 { mu } else { T::zero() }).collect();
            Ok(synthesize(dict, d, &alpha))
        })
        .collect::<Result<_, SrError>>()?;
    timings.cpu_opt += elapsed(t);

    let image = finish(lr, &prep, &patches, cfg, &mut timings)?;
    Ok(SrOutput { image, entropy_map: None, patch_entropy: None, timings })
}

/// Output of [`create_qubo_batch`].
#[derive(Debug, Clone)]
pub struct QuboBatch<T = f64> {
    pub batch: SubproblemBatch<T>,
    /// Full-size patch QUBOs, in patch order.
    pub parents: Vec<QuboProblem<T>>,
    /// Tabu warm-start masks, in patch order.
    pub m0: Vec<Vec<u8>>,
    /// Selected variables per patch.
    pub index: Vec<Vec<usize>>,
}

fn create_from_descriptors<T: Real>(
    descriptors: &[Descriptor<T>],
    dict: &DictionaryPair<T>,
    cfg: &SrConfig,
) -> Result<QuboBatch<T>, SrError> {
    if cfg.sub_size > dict.n_atoms {
        return Err(SrError::Config(format!("sub_size {} exceeds {} atoms", cfg.sub_size, dict.n_atoms)));
    }
    let gram = dict.d_l.gram();
    let per_patch: Vec<(QuboProblem<T>, Vec<u8>, Vec<usize>, QuboProblem<T>)> = descriptors
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let p = patch_qubo(&gram, dict, d, cfg);
            let tabu = TabuConfig { seed: derive_seed(cfg.tabu.seed ^ cfg.seed, i as u64), ..cfg.tabu };
            let m0 = tabu_search(&p, &tabu);
            let index = energy_impact_select(&p, &m0, cfg.sub_size)?;
            let sub = clamp_subproblem(&p, &m0, &index)?;
            Ok((p, m0, index, sub))
        })
        .collect::<Result<_, SrError>>()?;
    let mut parents = Vec::with_capacity(per_patch.len());
    let mut m0 = Vec::with_capacity(per_patch.len());
    let mut index = Vec::with_capacity(per_patch.len());
    let mut subs = Vec::with_capacity(per_patch.len());
    for (p, m, ix, s) in per_patch {
        parents.push(p);
        m0.push(m);
        index.push(ix);
        subs.push(s);
    }
    let batch = assemble_batch(subs, index.clone(), cfg.sub_size, cfg.batch_size)?;
    Ok(QuboBatch { batch, parents, m0, index })
}

/// Per-patch QUBO, tabu warm start, energy-impact selection, clamping, and
/// block-diagonal packing, for the feature map of an enlarged image.
pub fn create_qubo_batch<T: Real>(features: &Image<T>, dict: &DictionaryPair<T>, cfg: &SrConfig) -> Result<QuboBatch<T>, SrError> {
    cfg.validate()?;
    let geometry = dict.geometry(cfg.stride);
    geometry.validate()?;
    let grid = make_patch_grid(features.width(), features.height(), geometry.hr_patch, geometry.stride)?;
    let prep = Prepared { features: features.clone(), bicubic: Image::new(0, 0, 1), grid, geometry };
    let no_mean = DictionaryPair { mean_removed: false, ..dict.clone() };
    let descriptors: Vec<Descriptor<T>> =
        prep.grid.positions.iter().map(|&a| descriptor(&prep, &no_mean, a, Some(T::lit(cfg.descriptor_norm)))).collect::<Result<_, _>>()?;
    create_from_descriptors(&descriptors, dict, cfg)
}

/// Ensemble annealing with the default Boltzmann reduction.
pub fn sr_ensemble_anneal<T: Real>(lr: &Image<T>, dict: &DictionaryPair<T>, cfg: &SrConfig) -> Result<SrOutput<T>, SrError> {
    sr_ensemble_anneal_with(lr, dict, cfg, Reduction::Boltzmann)
}

/// Clamped, batched subproblems sampled jointly; each unique read of a patch
/// overwrites the selected bits of the tabu mask and the synthesised patches
/// are combined according to `reduction`.
pub fn sr_ensemble_anneal_with<T: Real>(
    lr: &Image<T>,
    dict: &DictionaryPair<T>,
    cfg: &SrConfig,
    reduction: Reduction,
) -> Result<SrOutput<T>, SrError> {
    let mut timings = Timings::default();
    let t = Instant::now();
    let prep = prepare(lr, dict, cfg)?;
    let descriptors: Vec<Descriptor<T>> =
        prep.grid.positions.par_iter().map(|&a| descriptor(&prep, dict, a, Some(T::lit(cfg.descriptor_norm)))).collect::<Result<_, _>>()?;
    timings.misc += elapsed(t);

    let t = Instant::now();
    let qb = create_from_descriptors(&descriptors, dict, cfg)?;
    timings.create_qubo += elapsed(t);

    let t = Instant::now();
    let results = sample_all(qb.batch.problems.iter().collect(), cfg)?;
    timings.sampler_opt += elapsed(t);

    let t = Instant::now();
    let per_patch = disassemble_batch(&qb.batch, &results)?;
    timings.sampler_prep += elapsed(t);

    let t = Instant::now();
    let mu = T::lit(cfg.mu);
    let synthesized: Vec<(Vec<T>, f64)> = per_patch
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let d = &descriptors[i];
            let code = |z: &[u8]| -> Vec<T> {
                let mut m = qb.m0[i].clone();
                for (&v, &bit) in qb.index[i].iter().zip(z) {
                    m[v] = bit;
                }
                m.iter().map(|&b| if b == 1 { mu } else { T::zero() }).collect()
            };
            match reduction {
                Reduction::BestRead => {
                    let (z, _) = s.best().ok_or(SrError::Empty)?;
                    Ok((synthesize(dict, d, &code(z)), 0.0))
                }
                Reduction::Boltzmann => {
                    let beta = match cfg.beta {
                        BetaMode::Adaptive => adaptive_beta(s),
                        BetaMode::Fixed(b) => T::lit(b),
                    };
                    let p = boltzmann_weights(&s.energies, &s.occurrences, beta)?;
                    let mut acc = vec![T::zero(); dict.m_h()];
                    for (z, &pj) in s.solutions.iter().zip(&p) {
                        for (a, v) in acc.iter_mut().zip(synthesize(dict, d, &code(z))) {
                            *a += pj * v;
                        }
                    }
                    Ok((acc, entropy(&p).as_f64()))
                }
            }
        })
        .collect::<Result<_, SrError>>()?;
    let (patches, entropies): (Vec<Vec<T>>, Vec<f64>) = synthesized.into_iter().unzip();
    timings.misc += elapsed(t);

    let image = finish(lr, &prep, &patches, cfg, &mut timings)?;

    let t = Instant::now();
    let patch_entropy: Vec<PatchEntropy> =
        prep.grid.positions.iter().zip(&entropies).map(|(&anchor, &entropy)| PatchEntropy { anchor, entropy }).collect();
    let entropy_map = paint_entropy(image.width(), image.height(), prep.geometry.hr_patch, &patch_entropy);
    timings.misc += elapsed(t);
    Ok(SrOutput { image, entropy_map: Some(entropy_map), patch_entropy: Some(patch_entropy), timings })
}

/// Paints each patch's entropy over its footprint in traversal order, so
/// later patches cover earlier ones where they overlap.
pub fn paint_entropy<T: Real>(width: usize, height: usize, patch: usize, entries: &[PatchEntropy]) -> Image<T> {
    let mut img = Image::new(width, height, 1);
    for e in entries {
        let (row, col) = e.anchor;
        for r in row..(row + patch).min(height) {
            for c in col..(col + patch).min(width) {
                img.set(0, r, c, T::lit(e.entropy));
            }
        }
    }
    img
}

pub fn run_method<T: Real>(method: Method, lr: &Image<T>, dict: &DictionaryPair<T>, cfg: &SrConfig) -> Result<SrOutput<T>, SrError> {
    match method {
        Method::Lasso => sr_lasso(lr, dict, cfg),
        Method::ClassicalAnneal => sr_classical_anneal(lr, dict, cfg),
        Method::EnsembleAnneal => sr_ensemble_anneal(lr, dict, cfg),
    }
}

/// Runs `method` on the luma of a grey or RGB image; chroma is enlarged
/// bicubically. The returned image has the input's channel count.
pub fn super_resolve<T: Real>(lr: &Image<T>, dict: &DictionaryPair<T>, cfg: &SrConfig, method: Method) -> Result<SrOutput<T>, SrError> {
    match lr.channels() {
        1 => run_method(method, lr, dict, cfg),
        3 => {
            let ycc = rgb_to_ycbcr(lr)?;
            let mut out = run_method(method, &ycc.channel(0), dict, cfg)?;
            let t = Instant::now();
            let cb = upscale(&ycc.channel(1), cfg.scale)?;
            let cr = upscale(&ycc.channel(2), cfg.scale)?;
            out.image = ycbcr_to_rgb(&Image::from_planes(&[out.image, cb, cr])?)?;
            out.timings.misc += elapsed(t);
            Ok(out)
        }
        n => Err(SrError::Image(ImageError::ChannelCount { expected: 3, found: n })),
    }
}

/// Writes the entropy map as a PNG normalised by its maximum.
pub fn save_entropy_png<T: Real>(map: &Image<T>, path: impl AsRef<Path>) -> Result<(), SrError> {
    let max = map.as_slice().iter().copied().fold(T::zero(), T::max);
    let norm = if max > T::zero() { map.map(|v| v / max) } else { map.clone() };
    Ok(save_image(&norm, path)?)
}

/// Writes `row,col,entropy` per patch.
pub fn save_entropy_csv(entries: &[PatchEntropy], path: impl AsRef<Path>) -> Result<(), SrError> {
    let path = path.as_ref();
    let mut s = String::from("row,col,entropy\n");
    for e in entries {
        s.push_str(&format!("{},{},{}\n", e.anchor.0, e.anchor.1, e.entropy));
    }
    std::fs::write(path, s).map_err(|source| SrError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_dict(n_atoms: usize, seed: u64) -> DictionaryPair<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d_l: Matrix<f64> = Matrix::from_fn(36, n_atoms, |_, _| rng.random_range(-1.0..1.0));
        let mut d_h: Matrix<f64> = Matrix::from_fn(81, n_atoms, |_, _| rng.random_range(-1.0..1.0));
        for c in 0..n_atoms {
            let n = (norm2(&d_l.column(c)).powi(2) + norm2(&d_h.column(c)).powi(2)).sqrt();
            d_l.set_column(c, &d_l.column(c).iter().map(|v| v / n).collect::<Vec<_>>());
            d_h.set_column(c, &d_h.column(c).iter().map(|v| v / n).collect::<Vec<_>>());
        }
        DictionaryPair { d_l, d_h, patch_size_lr: 3, patch_size_hr: 9, scale: 3, mean_removed: true, n_atoms }
    }

    fn texture(w: usize, h: usize, seed: u64) -> Image<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Image::from_fn(w, h, |_, _| rng.random_range(0.0..1.0));
        gaussian_blur(&base, 1.0, 5)
    }

    fn quick_cfg() -> SrConfig {
        SrConfig { n_reads: 8, backproject_iters: 5, ..SrConfig::default() }
    }

    #[test]
    fn boltzmann_examples() {
        assert_eq!(boltzmann_weights(&[3.0], &[7], 2.0).unwrap(), vec![1.0]);
        let p: Vec<f64> = boltzmann_weights(&[0.0, 0.0], &[1, 3], 1.0).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let p = boltzmann_weights(&[5.0, -2.0, 1.0], &[2, 1, 1], 0.0).unwrap();
        assert_eq!(p, vec![0.5, 0.25, 0.25]);
        assert!(boltzmann_weights::<f64>(&[], &[], 1.0).is_err());
    }

    #[test]
    fn two_way_tie_has_ln2_entropy() {
        let p = boltzmann_weights(&[1.5, 1.5], &[2, 2], 3.0).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!((entropy(&p) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn accumulation_averages_overlap() {
        let mut canvas = Image::<f64>::new(3, 1, 1);
        let mut w = Image::<f64>::new(3, 1, 1);
        let mut canvas2 = Image::<f64>::new(2, 2, 1);
        let mut w2 = Image::<f64>::new(2, 2, 1);
        accumulate_patch(&mut canvas2, &mut w2, &[1.0, 2.0, 3.0, 4.0], (0, 0), 2).unwrap();
        assert_eq!(finalize_canvas(&canvas2, &w2).unwrap().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        accumulate_patch(&mut canvas, &mut w, &[0.2], (0, 1), 1).unwrap();
        accumulate_patch(&mut canvas, &mut w, &[0.6], (0, 1), 1).unwrap();
        assert!(matches!(finalize_canvas(&canvas, &w), Err(SrError::Uncovered { row: 0, col: 0 })));
        accumulate_patch(&mut canvas, &mut w, &[0.0], (0, 0), 1).unwrap();
        accumulate_patch(&mut canvas, &mut w, &[0.0], (0, 2), 1).unwrap();
        assert!((finalize_canvas(&canvas, &w).unwrap().get(0, 0, 1) - 0.4).abs() < 1e-15);
        assert!(accumulate_patch(&mut canvas, &mut w, &[0.0; 4], (0, 2), 2).is_err());
    }

    #[test]
    fn backprojection_fixed_points() {
        let hr = texture(30, 24, 1);
        let bp = BackprojectConfig::default();
        let lr = observe(&hr, 10, 8, &bp).unwrap();
        let (x, trace) = backproject_traced(&hr, &lr, 10, &bp).unwrap();
        assert!(trace[0] < 1e-12);
        for (a, b) in x.as_slice().iter().zip(hr.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn backprojection_is_monotone_and_converges() {
        let hr = texture(45, 45, 2);
        let lr = crate::imagecore::downscale(&hr, 3).unwrap();
        let x0 = upscale(&lr, 3).unwrap();
        let (_, trace) = backproject_traced(&x0, &lr, 100, &BackprojectConfig::default()).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(trace[100] < 0.1 * trace[0], "{} vs {}", trace[100], trace[0]);
    }

    #[test]
    fn constant_input_stays_constant() {
        let lr = Image::<f64>::filled(8, 7, 1, 0.37);
        let dict = random_dict(16, 1);
        for out in [sr_lasso(&lr, &dict, &quick_cfg()).unwrap(), sr_classical_anneal(&lr, &dict, &quick_cfg()).unwrap()] {
            assert_eq!((out.image.width(), out.image.height()), (24, 21));
            assert!(out.image.as_slice().iter().all(|v| (v - 0.37).abs() < 1e-6));
        }
    }

    #[test]
    fn tiny_mu_gives_mean_only_reconstruction() {
        let lr = texture(8, 8, 3);
        let dict = random_dict(16, 2);
        let cfg = SrConfig { mu: 1e-12, backproject_iters: 0, ..quick_cfg() };
        let out = sr_classical_anneal(&lr, &dict, &cfg).unwrap();
        let prep = prepare(&lr, &dict, &cfg).unwrap();
        let means: Vec<Vec<f64>> = prep
            .grid
            .positions
            .iter()
            .map(|&a| vec![mean(&extract_patch_vector(&prep.bicubic, a, 9).unwrap()); 81])
            .collect();
        let expect = blend(&prep, &means).unwrap();
        for (a, b) in out.image.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn scale_mismatch_is_reported() {
        let lr = texture(8, 8, 3);
        let dict = random_dict(16, 2);
        let cfg = SrConfig { scale: 2, ..quick_cfg() };
        assert!(matches!(sr_lasso(&lr, &dict, &cfg), Err(SrError::ScaleMismatch { dict: 3, config: 2 })));
    }

    #[test]
    fn single_read_has_zero_entropy_and_matches_point_estimate() {
        let lr = texture(10, 9, 4);
        let dict = random_dict(32, 3);
        let cfg = SrConfig { n_reads: 1, ..quick_cfg() };
        let a = sr_ensemble_anneal(&lr, &dict, &cfg).unwrap();
        let b = sr_ensemble_anneal_with(&lr, &dict, &cfg, Reduction::BestRead).unwrap();
        assert_eq!(a.image, b.image);
        assert!(a.entropy_map.unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn huge_beta_uses_lowest_energy_read() {
        let lr = texture(10, 9, 5);
        let dict = random_dict(32, 4);
        let cfg = SrConfig { beta: BetaMode::Fixed(1e9), n_reads: 16, ..quick_cfg() };
        let a = sr_ensemble_anneal(&lr, &dict, &cfg).unwrap();
        let b = sr_ensemble_anneal_with(&lr, &dict, &cfg, Reduction::BestRead).unwrap();
        for (x, y) in a.image.as_slice().iter().zip(b.image.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn qubo_batch_geometry() {
        let dict = random_dict(32, 5);
        let cfg = SrConfig { stride: 8, ..quick_cfg() };
        // 33×33 features with 9-pixel patches at stride 8: anchors 0,8,16,24 per axis.
        let feats = extract_features(&texture(11, 11, 6), 3).unwrap();
        let qb = create_qubo_batch(&feats, &dict, &cfg).unwrap();
        assert_eq!(qb.batch.placements.len(), 16);
        assert_eq!(qb.batch.problems.len(), 1);
        assert_eq!(qb.batch.problems[0].n(), 512);
        let one = extract_features(&texture(3, 3, 6), 3).unwrap();
        let qb = create_qubo_batch(&one, &dict, &cfg).unwrap();
        assert_eq!((qb.batch.problems.len(), qb.batch.placements.len()), (1, 1));
    }

    #[test]
    fn emitted_subproblems_satisfy_clamping_identity() {
        let dict = random_dict(12, 6);
        let cfg = SrConfig { sub_size: 4, batch_size: 16, ..quick_cfg() };
        let feats = extract_features(&texture(6, 6, 7), 3).unwrap();
        let qb = create_qubo_batch(&feats, &dict, &cfg).unwrap();
        for (k, parent) in qb.parents.iter().enumerate() {
            let sub = &qb.batch.subproblems[k];
            for code in 0u32..16 {
                let z: Vec<u8> = (0..4).map(|i| ((code >> i) & 1) as u8).collect();
                let mut merged = qb.m0[k].clone();
                for (&v, &bit) in qb.index[k].iter().zip(&z) {
                    merged[v] = bit;
                }
                let lhs = sub.energy_of(&z) + sub.offset();
                let rhs = parent.energy_of(&merged);
                assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn brute_force_pipelines_agree_without_clamping() {
        let lr = texture(7, 7, 8);
        let dict = random_dict(10, 7);
        let cfg = SrConfig {
            sampler: SamplerHandle::BruteForce,
            sub_size: 10,
            batch_size: 10,
            beta: BetaMode::Fixed(1e12),
            n_reads: 4,
            ..quick_cfg()
        };
        let ca = sr_classical_anneal(&lr, &dict, &cfg).unwrap();
        let ens = sr_ensemble_anneal(&lr, &dict, &cfg).unwrap();
        for (x, y) in ca.image.as_slice().iter().zip(ens.image.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn entropy_map_is_constant_per_visible_footprint() {
        let entries = vec![
            PatchEntropy { anchor: (0, 0), entropy: 0.5 },
            PatchEntropy { anchor: (2, 0), entropy: 1.0 },
        ];
        let m: Image<f64> = paint_entropy(3, 5, 3, &entries);
        assert_eq!(m.get(0, 1, 2), 0.5);
        assert_eq!(m.get(0, 2, 0), 1.0);
        assert_eq!(m.get(0, 4, 2), 1.0);
    }

    #[test]
    fn color_input_keeps_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lr = Image::<f64>::from_vec(6, 5, 3, (0..90).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let out = super_resolve(&lr, &random_dict(16, 9), &quick_cfg(), Method::Lasso).unwrap();
        assert_eq!((out.image.width(), out.image.height(), out.image.channels()), (18, 15, 3));
    }
}
