//! Synthetic sparse-recovery experiments: planted 10-sparse non-negative
//! codes over Gaussian designs, swept over the sparsity penalty for every
//! solver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm2, Matrix};
use crate::qubo::{assemble_batch, build_sparse_coding_qubo, clamp_subproblem, disassemble_batch, energy_impact_select, QuboError, QuboProblem};
use crate::solvers::{derive_seed, lasso_solve, sample, tabu_search, SamplerHandle, SolverError, TabuConfig};
use crate::sr::{boltzmann_weights, BetaMode, SrError};

pub const N_ROWS: usize = 756;
pub const N_TRAIN: usize = 36;
pub const N_FEATURES: usize = 100;
pub const N_TRUE: usize = 10;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("need equal-length vectors of length >= 2, got {0} and {1}")]
    Length(usize, usize),
    #[error("target has zero variance")]
    ZeroVariance,
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Sr(#[from] SrError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub x_train: Matrix<f64>,
    pub y_train: Vec<f64>,
    pub x_val: Matrix<f64>,
    pub y_val: Vec<f64>,
    pub alpha_true: Vec<f64>,
    pub seed: u64,
}

/// Gaussian `756 × 100` design, `|N(0,1)|` weights on the first 10 columns;
/// the first 36 rows train, the remaining 720 validate.
pub fn generate_dataset(seed: u64) -> SynthDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_all = Matrix::from_fn(N_ROWS, N_FEATURES, |_, _| StandardNormal.sample(&mut rng));
    let alpha_true: Vec<f64> = (0..N_TRUE).map(|_| f64::abs(StandardNormal.sample(&mut rng))).collect();
    let y_all: Vec<f64> =
        (0..N_ROWS).map(|r| x_all.row(r)[..N_TRUE].iter().zip(&alpha_true).map(|(x, a)| x * a).sum()).collect();
    let x_train = Matrix::from_fn(N_TRAIN, N_FEATURES, |r, c| x_all[(r, c)]);
    let x_val = Matrix::from_fn(N_ROWS - N_TRAIN, N_FEATURES, |r, c| x_all[(N_TRAIN + r, c)]);
    SynthDataset {
        x_train,
        y_train: y_all[..N_TRAIN].to_vec(),
        x_val,
        y_val: y_all[N_TRAIN..].to_vec(),
        alpha_true,
        seed,
    }
}

/// `SS_res / SS_tot`, i.e. `1 − R²`.
pub fn one_minus_r2(y_hat: &[f64], y: &[f64]) -> Result<f64, SynthError> {
    if y_hat.len() != y.len() || y.len() < 2 {
        return Err(SynthError::Length(y_hat.len(), y.len()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(SynthError::ZeroVariance);
    }
    let ss_res: f64 = y_hat.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthSolver {
    Lasso,
    ClassicalAnneal,
    EnsembleAnneal,
}

impl SynthSolver {
    pub fn name(&self) -> &'static str {
        match self {
            SynthSolver::Lasso => "lasso",
            SynthSolver::ClassicalAnneal => "classical_anneal",
            SynthSolver::EnsembleAnneal => "ensemble_anneal",
        }
    }

    pub fn all() -> [SynthSolver; 3] {
        [SynthSolver::Lasso, SynthSolver::ClassicalAnneal, SynthSolver::EnsembleAnneal]
    }

    /// Default λ grid for this solver.
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            SynthSolver::Lasso => logspace(-3.0, 0.5, 22),
            _ => linspace(0.0, 0.1, 41),
        }
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` points from `10^lo` to `10^hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo, hi, n).into_iter().map(|e| 10f64.powf(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_datasets: usize,
    pub mu: f64,
    pub n_reads: usize,
    pub sampler: SamplerHandle,
    pub tabu: TabuConfig,
    pub sub_size: usize,
    pub batch_size: usize,
    pub beta: BetaMode,
    /// Norm the training target is rescaled to; `None` derives it from `mu`
    /// (see [`SynthConfig::target_norm`]).
    pub target_norm: Option<f64>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_datasets: 20,
            mu: 0.05,
            n_reads: 100,
            sampler: SamplerHandle::default(),
            tabu: TabuConfig::default(),
            sub_size: 32,
            batch_size: 512,
            beta: BetaMode::Adaptive,
            target_norm: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Binary codes can only place weight `mu` on an atom, so the target is
    /// scaled until the expected planted weight on unit-norm columns is `mu`:
    /// with `k` half-normal weights that norm is `mu * sqrt(k * pi / 2)`.
    pub fn target_norm(&self) -> f64 {
        self.target_norm.unwrap_or(self.mu * (N_TRUE as f64 * std::f64::consts::FRAC_PI_2).sqrt())
    }
}

/// Outcome of one solver on one dataset at one knob value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub train_err: f64,
    pub val_err: f64,
    pub l0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population mean and standard deviation.
    pub fn of(v: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = v.into_iter().collect();
        let n = v.len().max(1) as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub train_err: MeanStd,
    pub val_err: MeanStd,
    pub l0: MeanStd,
    /// One entry per dataset, in dataset order.
    pub trials: Vec<Trial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub solver: SynthSolver,
    pub knob: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Validation error read off the mean curves at the requested sparsity:
    /// mean and std are interpolated linearly between the first pair of
    /// consecutive grid points whose mean `‖α‖₀` brackets `target`. Falls
    /// back to the point with the closest mean sparsity.
    pub fn val_err_at_sparsity(&self, target: f64) -> Option<MeanStd> {
        let first = self.points.first()?;
        for w in self.points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let (la, lb) = (a.l0.mean, b.l0.mean);
            if (la - target) * (lb - target) > 0.0 {
                continue;
            }
            let t = if la == lb { 0.0 } else { (target - la) / (lb - la) };
            let lerp = |x: f64, y: f64| x + t * (y - x);
            return Some(MeanStd { mean: lerp(a.val_err.mean, b.val_err.mean), std: lerp(a.val_err.std, b.val_err.std) });
        }
        let p = self
            .points
            .iter()
            .min_by(|a, b| (a.l0.mean - target).abs().total_cmp(&(b.l0.mean - target).abs()))
            .unwrap_or(first);
        Some(p.val_err)
    }
}

/// Design and target as seen by the coders: unit-norm columns and a target
/// of norm `target_norm`, plus the factors needed to map codes back.
struct Normalized {
    d: Matrix<f64>,
    y: Vec<f64>,
    col_norms: Vec<f64>,
    y_norm: f64,
}

fn normalize(ds: &SynthDataset, target_norm: f64) -> Normalized {
    let col_norms = ds.x_train.column_norms();
    let d = Matrix::from_fn(N_TRAIN, N_FEATURES, |r, c| ds.x_train[(r, c)] / col_norms[c]);
    let y_norm = norm2(&ds.y_train) / target_norm;
    let y = ds.y_train.iter().map(|v| v / y_norm).collect();
    Normalized { d, y, col_norms, y_norm }
}

/// Code `a` on the normalised problem → weights on the raw design.
fn to_raw(n: &Normalized, a: &[f64]) -> Vec<f64> {
    a.iter().zip(&n.col_norms).map(|(v, c)| v * n.y_norm / c).collect()
}

fn evaluate(ds: &SynthDataset, alpha_raw: &[f64], l0: f64) -> Result<Trial, SynthError> {
    let train_err = one_minus_r2(&ds.x_train.matvec(alpha_raw), &ds.y_train)?;
    let val_err = one_minus_r2(&ds.x_val.matvec(alpha_raw), &ds.y_val)?;
    Ok(Trial { train_err, val_err, l0 })
}

fn l0(a: &[f64]) -> f64 {
    a.iter().filter(|&&v| v != 0.0).count() as f64
}

fn lasso_trial(ds: &SynthDataset, lambda: f64, cfg: &SynthConfig) -> Result<Trial, SynthError> {
    let n = normalize(ds, cfg.target_norm());
    let a = lasso_solve(&n.d, &n.y, lambda)?;
    evaluate(ds, &to_raw(&n, &a), l0(&a))
}

fn anneal_trial(ds: &SynthDataset, index: usize, lambda: f64, cfg: &SynthConfig) -> Result<Trial, SynthError> {
    let n = normalize(ds, cfg.target_norm());
    let p = build_sparse_coding_qubo(&n.d, &n.y, lambda, cfg.mu)?;
    let handle = cfg.sampler.with_seed(derive_seed(cfg.seed, index as u64));
    let s = sample(&handle, &p, cfg.n_reads)?;
    let (m, _) = s.best().ok_or(SolverError::Config("empty sample set".into()))?;
    let a: Vec<f64> = m.iter().map(|&b| f64::from(b) * cfg.mu).collect();
    evaluate(ds, &to_raw(&n, &a), l0(&a))
}

/// All datasets at one λ through the batched, clamped ensemble path. Codes
/// are Boltzmann-weighted means; sparsity is the expected `‖m‖₀` under the
/// weights.
fn ensemble_trials(datasets: &[SynthDataset], lambda: f64, cfg: &SynthConfig) -> Result<Vec<Trial>, SynthError> {
    let norms: Vec<Normalized> = datasets.iter().map(|d| normalize(d, cfg.target_norm())).collect();
    let staged: Vec<(QuboProblem<f64>, Vec<u8>, Vec<usize>, QuboProblem<f64>)> = norms
        .par_iter()
        .enumerate()
        .map(|(i, n)| {
            let p = build_sparse_coding_qubo(&n.d, &n.y, lambda, cfg.mu)?;
            let tabu = TabuConfig { seed: derive_seed(cfg.tabu.seed ^ cfg.seed, i as u64), ..cfg.tabu };
            let m0 = tabu_search(&p, &tabu);
            let index = energy_impact_select(&p, &m0, cfg.sub_size)?;
            let sub = clamp_subproblem(&p, &m0, &index)?;
            Ok((p, m0, index, sub))
        })
        .collect::<Result<_, SynthError>>()?;
    let subs = staged.iter().map(|s| s.3.clone()).collect();
    let index: Vec<Vec<usize>> = staged.iter().map(|s| s.2.clone()).collect();
    let batch = assemble_batch(subs, index.clone(), cfg.sub_size, cfg.batch_size)?;
    let results = batch
        .problems
        .iter()
        .enumerate()
        .map(|(k, p)| sample(&cfg.sampler.with_seed(derive_seed(cfg.seed, k as u64)), p, cfg.n_reads))
        .collect::<Result<Vec<_>, _>>()?;
    let per = disassemble_batch(&batch, &results)?;
    per.iter()
        .enumerate()
        .map(|(i, s)| {
            let beta = match cfg.beta {
                BetaMode::Adaptive => {
                    let st = MeanStd::of(
                        s.energies.iter().zip(&s.occurrences).flat_map(|(&e, &o)| std::iter::repeat_n(e, o as usize)),
                    );
                    if st.std > 0.0 { 1.0 / st.std } else { 1.0 }
                }
                BetaMode::Fixed(b) => b,
            };
            let w = boltzmann_weights(&s.energies, &s.occurrences, beta)?;
            let mut a = vec![0.0; N_FEATURES];
            let mut expected_l0 = 0.0;
            for (z, &pj) in s.solutions.iter().zip(&w) {
                let mut m = staged[i].1.clone();
                for (&v, &bit) in index[i].iter().zip(z) {
                    m[v] = bit;
                }
                expected_l0 += pj * m.iter().filter(|&&b| b == 1).count() as f64;
                for (av, &b) in a.iter_mut().zip(&m) {
                    *av += pj * cfg.mu * f64::from(b);
                }
            }
            evaluate(&datasets[i], &to_raw(&norms[i], &a), expected_l0)
        })
        .collect()
}

/// Evaluates `solver` over `grid` on `cfg.n_datasets` seeded datasets.
pub fn run_sweep(solver: SynthSolver, grid: &[f64], cfg: &SynthConfig) -> Result<SweepResult, SynthError> {
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(SynthError::Grid("grid must be non-empty and finite".into()));
    }
    if solver == SynthSolver::Lasso && grid.iter().any(|&v| v < 0.0) {
        return Err(SynthError::Grid("lasso lambda must be non-negative".into()));
    }
    if cfg.n_datasets == 0 {
        return Err(SynthError::Grid("need at least one dataset".into()));
    }
    if !(cfg.target_norm() > 0.0 && cfg.target_norm().is_finite()) || !(cfg.mu > 0.0) {
        return Err(SynthError::Grid("mu and target_norm must be positive".into()));
    }
    let datasets: Vec<SynthDataset> = (0..cfg.n_datasets).map(|d| generate_dataset(derive_seed(cfg.seed, d as u64))).collect();
    let points = grid
        .iter()
        .enumerate()
        .map(|(g, &value)| {
            let point_cfg = SynthConfig { seed: derive_seed(cfg.seed ^ 0x5EED, g as u64), ..cfg.clone() };
            let trials: Vec<Trial> = match solver {
                SynthSolver::Lasso => datasets.par_iter().map(|ds| lasso_trial(ds, value, &point_cfg)).collect::<Result<_, _>>()?,
                SynthSolver::ClassicalAnneal => datasets
                    .par_iter()
                    .enumerate()
                    .map(|(i, ds)| anneal_trial(ds, i, value, &point_cfg))
                    .collect::<Result<_, _>>()?,
                SynthSolver::EnsembleAnneal => ensemble_trials(&datasets, value, &point_cfg)?,
            };
            Ok(SweepPoint {
                value,
                train_err: MeanStd::of(trials.iter().map(|t| t.train_err)),
                val_err: MeanStd::of(trials.iter().map(|t| t.val_err)),
                l0: MeanStd::of(trials.iter().map(|t| t.l0)),
                trials,
            })
        })
        .collect::<Result<_, SynthError>>()?;
    Ok(SweepResult { solver, knob: "lambda".into(), points })
}

pub const CSV_HEADER: &str = "solver,knob,value,mean_train_err,std_train_err,mean_val_err,std_val_err,mean_l0,std_l0";

pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        for p in &r.points {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.solver.name(),
                r.knob,
                p.value,
                p.train_err.mean,
                p.train_err.std,
                p.val_err.mean,
                p.val_err.std,
                p.l0.mean,
                p.l0.std
            ));
        }
    }
    s
}

/// Validation error against mean sparsity, one polyline per solver.
pub fn sweep_svg(results: &[SweepResult]) -> String {
    let (w, h, m) = (640.0, 420.0, 50.0);
    let max_l0 = results.iter().flat_map(|r| r.points.iter().map(|p| p.l0.mean)).fold(1.0f64, f64::max);
    let max_err = results.iter().flat_map(|r| r.points.iter().map(|p| p.val_err.mean)).fold(1.0f64, f64::max);
    let sx = |v: f64| m + (w - 2.0 * m) * v / max_l0;
    let sy = |v: f64| h - m - (h - 2.0 * m) * v / max_err;
    let colors = ["#1f77b4", "#d62728", "#2ca02c"];
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n");
    s.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{y0}\" stroke=\"black\"/>\n",
        y0 = h - m,
        x1 = w - m
    ));
    s.push_str(&format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">mean l0</text>\n", w / 2.0, h - 12.0));
    s.push_str(&format!("<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">val 1-R2</text>\n", h / 2.0, h / 2.0));
    for (k, r) in results.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = r.points.iter().map(|p| (p.l0.mean, p.val_err.mean)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let line: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let c = colors[k % colors.len()];
        s.push_str(&format!("<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"2\" points=\"{}\"/>\n", line.join(" ")));
        s.push_str(&format!("<text x=\"{}\" y=\"{}\" fill=\"{c}\">{}</text>\n", w - m - 120.0, m + 16.0 * k as f64, r.solver.name()));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_shapes_and_construction() {
        let ds = generate_dataset(3);
        assert_eq!((ds.x_train.rows(), ds.x_train.cols()), (36, 100));
        assert_eq!((ds.x_val.rows(), ds.x_val.cols()), (720, 100));
        assert_eq!(ds.y_train.len() + ds.y_val.len(), 756);
        assert!(ds.alpha_true.iter().all(|&a| a >= 0.0));
        for r in 0..36 {
            let y: f64 = (0..10).map(|c| ds.x_train[(r, c)] * ds.alpha_true[c]).sum();
            assert_eq!(y, ds.y_train[r]);
        }
        assert_eq!(generate_dataset(3), ds);
    }

    #[test]
    fn r2_examples() {
        let y = [1.0, -2.0, 0.5, 0.5];
        assert_eq!(one_minus_r2(&y, &y).unwrap(), 0.0);
        assert!((one_minus_r2(&[0.0; 4], &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((one_minus_r2(&neg, &y).unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(one_minus_r2(&[1.0, 1.0], &[2.0, 2.0]), Err(SynthError::ZeroVariance)));
        assert!(one_minus_r2(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn huge_lambda_gives_empty_lasso_model() {
        let cfg = SynthConfig { n_datasets: 3, ..SynthConfig::default() };
        let r = run_sweep(SynthSolver::Lasso, &[100.0], &cfg).unwrap();
        assert_eq!(r.points[0].l0.mean, 0.0);
        for t in &r.points[0].trials {
            assert!((t.val_err - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn lasso_sparsity_shrinks_with_lambda() {
        let cfg = SynthConfig { n_datasets: 4, ..SynthConfig::default() };
        let r = run_sweep(SynthSolver::Lasso, &logspace(-3.0, 0.5, 12), &cfg).unwrap();
        let violations = r.points.windows(2).filter(|w| w[1].l0.mean > w[0].l0.mean).count();
        assert!(violations <= 1);
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let cfg = SynthConfig { n_datasets: 2, n_reads: 4, ..SynthConfig::default() };
        let a = run_sweep(SynthSolver::Lasso, &[0.1], &cfg).unwrap();
        let b = run_sweep(SynthSolver::ClassicalAnneal, &[0.1], &cfg).unwrap();
        let csv = sweep_csv(&[a.clone(), b.clone()]);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with(CSV_HEADER));
        assert!(sweep_svg(&[a, b]).contains("polyline"));
    }

    #[test]
    fn grid_errors() {
        let cfg = SynthConfig::default();
        assert!(run_sweep(SynthSolver::Lasso, &[], &cfg).is_err());
        assert!(run_sweep(SynthSolver::Lasso, &[f64::NAN], &cfg).is_err());
    }
}
