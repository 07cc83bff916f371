//! Coupled dictionary pair: training, normalisation and the `.qsrd` file format.
//!
//! Both dictionaries are learned jointly. Each training pair is stacked as
//! `[f / √M_l ; p / √M_h]`, scaled to unit norm, and a single dictionary is
//! learned on the stacked vectors. The stored `d_l`, `d_h` are the two halves
//! of that joint dictionary, still carrying the `1/√M` weights, so every
//! stored joint column has unit norm.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{extract_feature_vector, extract_features, extract_patch_vector, make_patch_grid, FeatureError, PatchGeometry};
use crate::imagecore::{downscale, modcrop, Image, ImageError};
use crate::linalg::{dot, norm2, Matrix};
use crate::scalar::Real;
use crate::solvers::{lasso_gram, LassoConfig};

pub const MAGIC: &[u8; 4] = b"QSRD";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("only {available} patches survive pruning, {requested} requested")]
    NotEnoughPatches { available: usize, requested: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("degenerate training data: {0}")]
    Degenerate(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not a dictionary file (bad magic)")]
    BadMagic,
    #[error("unsupported dictionary format version {0}")]
    Version(u16),
    #[error("dictionary file truncated")]
    Truncated,
    #[error("dictionary checksum mismatch")]
    Checksum,
    #[error("malformed dictionary header: {0}")]
    Header(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryPair<T = f64> {
    /// `M_l × N` feature atoms (weighted half of the joint atoms).
    pub d_l: Matrix<T>,
    /// `M_h × N` pixel atoms (weighted half of the joint atoms).
    pub d_h: Matrix<T>,
    pub patch_size_lr: usize,
    pub patch_size_hr: usize,
    pub scale: usize,
    pub mean_removed: bool,
    pub n_atoms: usize,
}

impl<T: Real> DictionaryPair<T> {
    pub fn m_l(&self) -> usize {
        self.d_l.rows()
    }

    pub fn m_h(&self) -> usize {
        self.d_h.rows()
    }

    pub fn geometry(&self, stride: usize) -> PatchGeometry {
        PatchGeometry { scale: self.scale, hr_patch: self.patch_size_hr, stride }
    }

    /// Norm of each stacked `[d_l; d_h]` column.
    pub fn joint_norms(&self) -> Vec<T> {
        self.d_l.column_norms().iter().zip(self.d_h.column_norms()).map(|(&a, b)| (a * a + b * b).sqrt()).collect()
    }

    pub fn cast<U: Real>(&self) -> DictionaryPair<U> {
        DictionaryPair {
            d_l: self.d_l.map(|v| U::lit(v.as_f64())),
            d_h: self.d_h.map(|v| U::lit(v.as_f64())),
            patch_size_lr: self.patch_size_lr,
            patch_size_hr: self.patch_size_hr,
            scale: self.scale,
            mean_removed: self.mean_removed,
            n_atoms: self.n_atoms,
        }
    }

    /// Keeps only the first `n` atoms (useful for tiny test dictionaries).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n_atoms);
        DictionaryPair {
            d_l: Matrix::from_fn(self.d_l.rows(), n, |r, c| self.d_l[(r, c)]),
            d_h: Matrix::from_fn(self.d_h.rows(), n, |r, c| self.d_h[(r, c)]),
            n_atoms: n,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_atoms: usize,
    pub n_patches: usize,
    pub variance_floor: f64,
    /// Full passes over the sampled patches.
    pub iterations: usize,
    pub batch_size: usize,
    pub sparsity_lambda: f64,
    pub seed: u64,
    pub geometry: PatchGeometry,
    pub mean_removed: bool,
    /// Anchor spacing when harvesting candidate patches from the corpus.
    pub sample_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_atoms: 128,
            n_patches: 20_000,
            variance_floor: 1e-4,
            iterations: 20,
            batch_size: 256,
            sparsity_lambda: 0.1,
            seed: 0,
            geometry: PatchGeometry::default(),
            mean_removed: true,
            sample_stride: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DictionaryError> {
        let bad = |m: &str| Err(DictionaryError::Config(m.into()));
        if self.n_atoms == 0 {
            return bad("n_atoms must be at least 1");
        }
        if self.n_patches < self.n_atoms {
            return bad("n_patches must be at least n_atoms");
        }
        if !(self.variance_floor >= 0.0) {
            return bad("variance_floor must be non-negative");
        }
        if self.iterations == 0 || self.batch_size == 0 || self.sample_stride == 0 {
            return bad("iterations, batch_size and sample_stride must be at least 1");
        }
        if !(self.sparsity_lambda >= 0.0) {
            return bad("sparsity_lambda must be non-negative");
        }
        self.geometry.validate()?;
        Ok(())
    }
}

fn variance<T: Real>(v: &[T]) -> T {
    let n = T::from_usize_lossy(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    v.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n
}

pub(crate) fn mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len())
}

/// Harvests paired `(feature, pixel)` patch vectors from a corpus of
/// high-resolution images. Returns `(M_l × n_patches, M_h × n_patches)`.
///
/// Each image is reduced to luma, cropped to a multiple of the scale,
/// downscaled, and featurised. Candidate anchors are laid out every
/// `sample_stride` pixels; pairs whose pixel patch variance is below
/// `variance_floor` are dropped, and `n_patches` survivors are drawn without
/// replacement. Pixel patches have their own mean removed when
/// `mean_removed` is set.
pub fn sample_training_patches<T: Real>(
    corpus: &[Image<T>],
    cfg: &TrainConfig,
) -> Result<(Matrix<T>, Matrix<T>), DictionaryError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(DictionaryError::EmptyCorpus);
    }
    let g = cfg.geometry;
    let prepared: Vec<(Image<T>, Image<T>)> = corpus
        .par_iter()
        .map(|img| -> Result<Option<(Image<T>, Image<T>)>, DictionaryError> {
            let hr = modcrop(&img.luma()?, g.scale)?;
            if hr.width() < g.hr_patch || hr.height() < g.hr_patch {
                return Ok(None);
            }
            let lr = downscale(&hr, g.scale)?;
            let feats = extract_features(&lr, g.scale)?;
            Ok(Some((hr, feats)))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    let floor = T::lit(cfg.variance_floor);
    let mut candidates: Vec<(usize, (usize, usize))> = Vec::new();
    for (k, (hr, _)) in prepared.iter().enumerate() {
        let grid = make_patch_grid(hr.width(), hr.height(), g.hr_patch, cfg.sample_stride)?;
        for &anchor in &grid.positions {
            let p = extract_patch_vector(hr, anchor, g.hr_patch)?;
            let v = variance(&p);
            if v >= floor && (cfg.variance_floor == 0.0 || v > T::zero()) {
                candidates.push((k, anchor));
            }
        }
    }
    if candidates.len() < cfg.n_patches {
        return Err(DictionaryError::NotEnoughPatches { available: candidates.len(), requested: cfg.n_patches });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (chosen, _) = candidates.partial_shuffle(&mut rng, cfg.n_patches);

    let m_l = g.feature_dim(4);
    let m_h = g.pixel_dim();
    let mut xl = Matrix::zeros(m_l, cfg.n_patches);
    let mut xh = Matrix::zeros(m_h, cfg.n_patches);
    for (s, &(k, anchor)) in chosen.iter().enumerate() {
        let (hr, feats) = &prepared[k];
        let f = extract_feature_vector(feats, anchor, &g)?;
        let mut p = extract_patch_vector(hr, anchor, g.hr_patch)?;
        if cfg.mean_removed {
            let m = mean(&p);
            p.iter_mut().for_each(|v| *v -= m);
        }
        xl.set_column(s, &f);
        xh.set_column(s, &p);
    }
    Ok((xl, xh))
}

/// Stacked, dimension-weighted, unit-norm training vectors (`M × S`).
fn joint_samples<T: Real>(xl: &Matrix<T>, xh: &Matrix<T>) -> Result<Matrix<T>, DictionaryError> {
    let (m_l, m_h, s) = (xl.rows(), xh.rows(), xl.cols());
    let wl = T::one() / T::from_usize_lossy(m_l).sqrt();
    let wh = T::one() / T::from_usize_lossy(m_h).sqrt();
    let mut out = Matrix::zeros(m_l + m_h, s);
    let mut degenerate = 0;
    for c in 0..s {
        let mut v: Vec<T> = (0..m_l).map(|r| xl[(r, c)] * wl).chain((0..m_h).map(|r| xh[(r, c)] * wh)).collect();
        let n = norm2(&v);
        if n > T::zero() {
            v.iter_mut().for_each(|x| *x /= n);
            out.set_column(c, &v);
        } else {
            degenerate += 1;
        }
    }
    if degenerate == s {
        return Err(DictionaryError::Degenerate("every training column is zero".into()));
    }
    Ok(out)
}

fn normalize_column<T: Real>(d: &mut Matrix<T>, c: usize) -> bool {
    let col = d.column(c);
    let n = norm2(&col);
    if n > T::zero() && n.is_finite() {
        d.set_column(c, &col.iter().map(|&v| v / n).collect::<Vec<_>>());
        true
    } else {
        false
    }
}

/// Learns a coupled dictionary from paired feature/pixel vectors.
///
/// Minibatch online learning: codes are found by lasso with penalty
/// `sparsity_lambda` (warm-started from the previous pass), the running
/// sufficient statistics `A = Σααᵀ`, `B = Σxαᵀ` are decayed and updated per
/// minibatch, and each atom gets one block-coordinate step followed by
/// renormalisation. An atom that no sample used for a whole pass is replaced
/// by the worst-reconstructed sample of that pass.
pub fn train_dictionary_pair<T: Real>(
    lr_features: &Matrix<T>,
    hr_patches: &Matrix<T>,
    cfg: &TrainConfig,
) -> Result<DictionaryPair<T>, DictionaryError> {
    train_dictionary_pair_traced(lr_features, hr_patches, cfg, None).map(|(d, _)| d)
}

/// Like [`train_dictionary_pair`] but also reports, after every pass, the mean
/// coding objective on the held-out pairs in `held_out` when given.
pub fn train_dictionary_pair_traced<T: Real>(
    lr_features: &Matrix<T>,
    hr_patches: &Matrix<T>,
    cfg: &TrainConfig,
    held_out: Option<(&Matrix<T>, &Matrix<T>)>,
) -> Result<(DictionaryPair<T>, Vec<f64>), DictionaryError> {
    if cfg.n_atoms == 0 || cfg.iterations == 0 || cfg.batch_size == 0 || !(cfg.sparsity_lambda >= 0.0) {
        return Err(DictionaryError::Config("n_atoms, iterations and batch_size must be positive".into()));
    }
    if lr_features.cols() != hr_patches.cols() {
        return Err(DictionaryError::DimensionMismatch(format!(
            "{} feature columns vs {} pixel columns",
            lr_features.cols(),
            hr_patches.cols()
        )));
    }
    let s = lr_features.cols();
    if cfg.n_atoms > s {
        return Err(DictionaryError::Config(format!("{} atoms requested from {s} samples", cfg.n_atoms)));
    }
    if !lr_features.is_finite() || !hr_patches.is_finite() {
        return Err(DictionaryError::Degenerate("non-finite training data".into()));
    }
    let x = joint_samples(lr_features, hr_patches)?;
    let held = match held_out {
        Some((l, h)) => Some(joint_samples(l, h)?),
        None => None,
    };
    let (m, n) = (x.rows(), cfg.n_atoms);
    let lambda = T::lit(cfg.sparsity_lambda);
    let lasso_cfg = LassoConfig { tol: 1e-6, max_passes: 200 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let live: Vec<usize> = (0..s).filter(|&c| norm2(&x.column(c)) > T::zero()).collect();
    if live.len() < n {
        return Err(DictionaryError::Degenerate(format!("only {} non-zero samples for {n} atoms", live.len())));
    }
    let mut d = Matrix::zeros(m, n);
    for (j, c) in spread_init(&x, &live, n, &mut rng).into_iter().enumerate() {
        d.set_column(j, &x.column(c));
    }

    let mut a = Matrix::<T>::zeros(n, n);
    let mut b = Matrix::<T>::zeros(m, n);
    let mut codes: Vec<Vec<T>> = vec![vec![T::zero(); n]; s];
    let mut order: Vec<usize> = live;
    let bs = cfg.batch_size;
    let mut step = 0usize;
    let mut trace = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        order.shuffle(&mut rng);
        let mut usage = vec![0usize; n];
        let mut residuals: Vec<(T, usize)> = Vec::with_capacity(order.len());
        for batch in order.chunks(bs) {
            let gram = d.gram();
            let coded: Vec<(Vec<T>, T)> = batch
                .par_iter()
                .map(|&c| {
                    let xc = x.column(c);
                    let dty = d.t_matvec(&xc);
                    let mut alpha = codes[c].clone();
                    lasso_gram(&gram, &dty, lambda, &lasso_cfg, &mut alpha);
                    let rec = d.matvec(&alpha);
                    let err = rec.iter().zip(&xc).map(|(&p, &t)| (p - t) * (p - t)).sum::<T>();
                    (alpha, err)
                })
                .collect();

            step += 1;
            let theta = if step < bs { (step * bs) as f64 } else { (bs * bs + step - bs) as f64 };
            let decay = T::lit((theta + 1.0 - bs as f64) / (theta + 1.0));
            a.as_mut_slice().iter_mut().for_each(|v| *v *= decay);
            b.as_mut_slice().iter_mut().for_each(|v| *v *= decay);
            for (&c, (alpha, err)) in batch.iter().zip(coded) {
                let nz: Vec<usize> = (0..n).filter(|&j| alpha[j] != T::zero()).collect();
                for &i in &nz {
                    usage[i] += 1;
                    for &j in &nz {
                        a[(i, j)] += alpha[i] * alpha[j];
                    }
                    for r in 0..m {
                        b[(r, i)] += x[(r, c)] * alpha[i];
                    }
                }
                residuals.push((err, c));
                codes[c] = alpha;
            }

            for j in 0..n {
                let ajj = a[(j, j)];
                if ajj <= T::lit(1e-12) {
                    continue;
                }
                let aj: Vec<T> = (0..n).map(|k| a[(k, j)]).collect();
                let da = d.matvec(&aj);
                let u: Vec<T> = (0..m).map(|r| d[(r, j)] + (b[(r, j)] - da[r]) / ajj).collect();
                if norm2(&u) > T::lit(1e-12) {
                    d.set_column(j, &u);
                    normalize_column(&mut d, j);
                }
            }
        }

        let dead: Vec<usize> = (0..n).filter(|&j| usage[j] == 0).collect();
        if !dead.is_empty() {
            residuals.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap_or(std::cmp::Ordering::Equal).then(p.1.cmp(&q.1)));
            for (&j, &(_, c)) in dead.iter().zip(&residuals) {
                d.set_column(j, &x.column(c));
                for k in 0..n {
                    a[(j, k)] = T::zero();
                    a[(k, j)] = T::zero();
                }
                for r in 0..m {
                    b[(r, j)] = T::zero();
                }
                for code in codes.iter_mut() {
                    code[j] = T::zero();
                }
            }
        }

        if let Some(h) = &held {
            trace.push(mean_objective(&d, h, lambda, &lasso_cfg));
        }
    }

    for j in 0..n {
        if !normalize_column(&mut d, j) {
            return Err(DictionaryError::Degenerate(format!("atom {j} collapsed to zero")));
        }
    }
    if !d.is_finite() {
        return Err(DictionaryError::Degenerate("non-finite atoms".into()));
    }
    let m_l = lr_features.rows();
    let g = cfg.geometry;
    let pair = DictionaryPair {
        d_l: Matrix::from_fn(m_l, n, |r, c| d[(r, c)]),
        d_h: Matrix::from_fn(m - m_l, n, |r, c| d[(m_l + r, c)]),
        patch_size_lr: g.lr_patch(),
        patch_size_hr: g.hr_patch,
        scale: g.scale,
        mean_removed: cfg.mean_removed,
        n_atoms: n,
    };
    Ok((pair, trace))
}

/// Picks `n` distinct sample columns, each next one drawn with probability
/// proportional to `1 − max cos²` against those already picked.
fn spread_init<T: Real>(x: &Matrix<T>, live: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::Rng;
    let cols: Vec<Vec<T>> = live.iter().map(|&c| x.column(c)).collect();
    let mut dist = vec![1.0f64; live.len()];
    let mut picked = Vec::with_capacity(n);
    let mut first = rng.random_range(0..live.len());
    for _ in 0..n {
        picked.push(live[first]);
        dist[first] = 0.0;
        let chosen = cols[first].clone();
        dist.par_iter_mut().zip(&cols).for_each(|(dv, col)| {
            if *dv > 0.0 {
                let c = dot(col, &chosen).as_f64();
                *dv = dv.min((1.0 - c * c).max(0.0));
            }
        });
        let total: f64 = dist.iter().sum();
        if total <= 1e-12 {
            match (0..live.len()).find(|&k| !picked.contains(&live[k])) {
                Some(k) => first = k,
                None => break,
            }
            continue;
        }
        let mut t = rng.random_range(0.0..total);
        first = dist
            .iter()
            .position(|&dv| {
                if t < dv {
                    true
                } else {
                    t -= dv;
                    false
                }
            })
            .unwrap_or_else(|| dist.iter().rposition(|&dv| dv > 0.0).unwrap());
    }
    picked
}

/// Mean of `‖x − Dα‖² + λ‖α‖₁` over the columns of `x`, coding each from zero.
pub fn mean_objective<T: Real>(d: &Matrix<T>, x: &Matrix<T>, lambda: T, cfg: &LassoConfig) -> f64 {
    let gram = d.gram();
    let total: f64 = (0..x.cols())
        .into_par_iter()
        .map(|c| {
            let xc = x.column(c);
            let dty = d.t_matvec(&xc);
            let mut alpha = vec![T::zero(); d.cols()];
            lasso_gram(&gram, &dty, lambda, cfg, &mut alpha);
            let rec = d.matvec(&alpha);
            let fit = rec.iter().zip(&xc).map(|(&p, &t)| (p - t) * (p - t)).sum::<T>();
            (fit + lambda * alpha.iter().map(|v| v.abs()).sum::<T>()).as_f64()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / x.cols().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    n_atoms: usize,
    m_l: usize,
    m_h: usize,
    patch_size_lr: usize,
    patch_size_hr: usize,
    scale: usize,
    mean_removed: bool,
}

fn io_err(path: &Path, source: std::io::Error) -> DictionaryError {
    DictionaryError::Io { path: path.display().to_string(), source }
}

pub fn dictionary_to_bytes<T: Real>(pair: &DictionaryPair<T>) -> Vec<u8> {
    let header = Header {
        n_atoms: pair.n_atoms,
        m_l: pair.m_l(),
        m_h: pair.m_h(),
        patch_size_lr: pair.patch_size_lr,
        patch_size_hr: pair.patch_size_hr,
        scale: pair.scale,
        mean_removed: pair.mean_removed,
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * (pair.d_l.as_slice().len() + pair.d_h.as_slice().len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in pair.d_l.as_slice().iter().chain(pair.d_h.as_slice()) {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn dictionary_from_bytes<T: Real>(bytes: &[u8]) -> Result<DictionaryPair<T>, DictionaryError> {
    if bytes.len() < 4 {
        return Err(if MAGIC.starts_with(bytes) { DictionaryError::Truncated } else { DictionaryError::BadMagic });
    }
    if &bytes[..4] != MAGIC {
        return Err(DictionaryError::BadMagic);
    }
    if bytes.len() < 10 {
        return Err(DictionaryError::Truncated);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(DictionaryError::Version(version));
    }
    let hlen = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let body_start = 10 + hlen;
    if bytes.len() < body_start {
        return Err(DictionaryError::Truncated);
    }
    let header: Header = serde_json::from_slice(&bytes[10..body_start]).map_err(|e| DictionaryError::Header(e.to_string()))?;
    let count = header
        .n_atoms
        .checked_mul(header.m_l + header.m_h)
        .ok_or_else(|| DictionaryError::Header("matrix size overflows".into()))?;
    let end = body_start + 8 * count;
    if bytes.len() < end + 4 {
        return Err(DictionaryError::Truncated);
    }
    let stored = u32::from_le_bytes(bytes[end..end + 4].try_into().unwrap());
    if bytes.len() != end + 4 || crc32fast::hash(&bytes[..end]) != stored {
        return Err(DictionaryError::Checksum);
    }
    let vals: Vec<T> = bytes[body_start..end]
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let split = header.m_l * header.n_atoms;
    let d_l = Matrix::from_row_major(header.m_l, header.n_atoms, vals[..split].to_vec())
        .ok_or_else(|| DictionaryError::Header("d_l shape".into()))?;
    let d_h = Matrix::from_row_major(header.m_h, header.n_atoms, vals[split..].to_vec())
        .ok_or_else(|| DictionaryError::Header("d_h shape".into()))?;
    Ok(DictionaryPair {
        d_l,
        d_h,
        patch_size_lr: header.patch_size_lr,
        patch_size_hr: header.patch_size_hr,
        scale: header.scale,
        mean_removed: header.mean_removed,
        n_atoms: header.n_atoms,
    })
}

pub fn save_dictionary<T: Real>(pair: &DictionaryPair<T>, path: impl AsRef<Path>) -> Result<(), DictionaryError> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&dictionary_to_bytes(pair)).map_err(|e| io_err(path, e))
}

pub fn load_dictionary<T: Real>(path: impl AsRef<Path>) -> Result<DictionaryPair<T>, DictionaryError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    dictionary_from_bytes(&bytes)
}

/// Cosine similarity between two vectors; zero if either is zero.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    let na = norm2(a);
    let nb = norm2(b);
    if na == T::zero() || nb == T::zero() {
        T::zero()
    } else {
        dot(a, b) / (na * nb)
    }
}
