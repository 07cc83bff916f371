//! Cyclic coordinate descent for `‖Dα − y‖² + λ‖α‖₁`.

use super::SolverError;
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    /// Stop once no coefficient moves by more than this in a full pass.
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self { tol: 1e-7, max_passes: 10_000 }
    }
}

#[inline]
fn soft_threshold<T: Real>(x: T, t: T) -> T {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        T::zero()
    }
}

pub fn lasso_solve<T: Real>(d: &Matrix<T>, y: &[T], lambda: T) -> Result<Vec<T>, SolverError> {
    lasso_solve_with(d, y, lambda, &LassoConfig::default())
}

pub fn lasso_solve_with<T: Real>(d: &Matrix<T>, y: &[T], lambda: T, cfg: &LassoConfig) -> Result<Vec<T>, SolverError> {
    if y.len() != d.rows() {
        return Err(SolverError::DimensionMismatch(format!("y has {} entries, D has {} rows", y.len(), d.rows())));
    }
    if !d.is_finite() || y.iter().any(|v| !v.is_finite()) || !lambda.is_finite() {
        return Err(SolverError::NonFinite);
    }
    if lambda < T::zero() {
        return Err(SolverError::Config("lambda must be non-negative".into()));
    }
    let gram = d.gram();
    let dty = d.t_matvec(y);
    let mut alpha = vec![T::zero(); d.cols()];
    lasso_gram(&gram, &dty, lambda, cfg, &mut alpha);
    Ok(alpha)
}

/// Coordinate descent on the Gram form: only `DᵀD` and `Dᵀy` are needed, so
/// one Gram matrix serves every right-hand side. `alpha` is used as the warm
/// start and overwritten with the solution. Returns the number of passes.
pub fn lasso_gram<T: Real>(gram: &Matrix<T>, dty: &[T], lambda: T, cfg: &LassoConfig, alpha: &mut [T]) -> usize {
    let n = dty.len();
    let half_lambda = lambda / T::lit(2.0);
    let tol = T::lit(cfg.tol);
    // g = Gα
    let mut g = gram.matvec(alpha);
    for pass in 1..=cfg.max_passes {
        let mut max_change = T::zero();
        for j in 0..n {
            let gjj = gram[(j, j)];
            if gjj <= T::zero() {
                let delta = -alpha[j];
                if delta != T::zero() {
                    alpha[j] = T::zero();
                    for (gi, &col) in g.iter_mut().zip(gram.row(j)) {
                        *gi += col * delta;
                    }
                }
                continue;
            }
            let old = alpha[j];
            let rho = dty[j] - g[j] + gjj * old;
            let new = soft_threshold(rho, half_lambda) / gjj;
            let delta = new - old;
            if delta != T::zero() {
                alpha[j] = new;
                for (gi, &col) in g.iter_mut().zip(gram.row(j)) {
                    *gi += col * delta;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            return pass;
        }
    }
    cfg.max_passes
}

/// `‖Dα − y‖² + λ‖α‖₁`
pub fn lasso_objective<T: Real>(d: &Matrix<T>, y: &[T], lambda: T, alpha: &[T]) -> T {
    let r = d.matvec(alpha);
    let fit = r.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    fit + lambda * alpha.iter().fold(T::zero(), |acc, a| acc + a.abs())
}
