//! Multistart single-flip tabu search.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::anneal::{read_rng, Couplings};
use crate::qubo::QuboProblem;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabuConfig {
    pub restarts: usize,
    /// Iterations a flipped variable stays tabu; `None` means `⌈n/4⌉`.
    pub tenure: Option<usize>,
    /// Iterations per restart; `None` means `20·n`.
    pub max_iters: Option<usize>,
    pub seed: u64,
}

impl Default for TabuConfig {
    fn default() -> Self {
        Self { restarts: 8, tenure: None, max_iters: None, seed: 0 }
    }
}

impl TabuConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.restarts == 0 || self.tenure == Some(0) {
            return Err("restarts and tenure must be at least 1".into());
        }
        Ok(())
    }
}

/// Best assignment found across all restarts.
///
/// Restart 0 starts from all zeros, later restarts from uniform random
/// vectors. Each iteration takes the best non-tabu flip; a tabu flip is
/// allowed when it would beat the best energy seen in the restart.
pub fn tabu_search<T: Real>(p: &QuboProblem<T>, cfg: &TabuConfig) -> Vec<u8> {
    tabu_search_stream(p, cfg, 0)
}

/// Like [`tabu_search`] but draws restarts from RNG streams offset by
/// `stream`, so independent runs with one seed stay distinct.
pub fn tabu_search_stream<T: Real>(p: &QuboProblem<T>, cfg: &TabuConfig, stream: u64) -> Vec<u8> {
    let n = p.n();
    if n == 0 {
        return Vec::new();
    }
    let tenure = cfg.tenure.unwrap_or(n.div_ceil(4)).max(1);
    let iters = cfg.max_iters.unwrap_or(20 * n);
    let c = Couplings::new(p);
    let diag = &c.diag;

    let mut best_z = vec![0u8; n];
    let mut best_e = p.energy_of(&best_z).as_f64();
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = read_rng(cfg.seed, stream.wrapping_mul(1 << 20).wrapping_add(restart as u64));
        let mut z: Vec<u8> = if restart == 0 && stream == 0 {
            vec![0; n]
        } else {
            (0..n).map(|_| rng.random_range(0..2u8)).collect()
        };
        let mut h: Vec<f64> = p.local_fields(&z).iter().map(|v| v.as_f64()).collect();
        let mut e = p.energy_of(&z).as_f64();
        let mut run_best = e;
        let mut run_best_z = z.clone();
        let mut tabu_until = vec![0usize; n];
        for it in 0..iters {
            let mut pick: Option<(usize, f64)> = None;
            for i in 0..n {
                let delta = if z[i] == 0 { h[i] + diag[i] } else { -(h[i] + diag[i]) };
                let allowed = tabu_until[i] <= it || e + delta < run_best - 1e-12 * run_best.abs().max(1.0);
                if allowed && pick.is_none_or(|(_, d)| delta < d) {
                    pick = Some((i, delta));
                }
            }
            let Some((i, delta)) = pick else { continue };
            c.flip(&mut z, &mut h, i);
            e += delta;
            tabu_until[i] = it + tenure + 1;
            if e < run_best {
                run_best = e;
                run_best_z.copy_from_slice(&z);
            }
        }
        // Re-evaluate exactly; the running energy accumulates rounding.
        let exact = p.energy_of(&run_best_z).as_f64();
        if exact < best_e {
            best_e = exact;
            best_z = run_best_z;
        }
    }
    best_z
}
