use proptest::prelude::*;
use qsr_core::linalg::Matrix;
use qsr_core::qubo::QuboProblem;
use qsr_core::solvers::{brute_force_minima, lasso_objective, lasso_solve, simulated_anneal, tabu_search, AnnealConfig, TabuConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_qubo(rng: &mut ChaCha8Rng, n: usize) -> QuboProblem<f64> {
    let mut q = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    QuboProblem::new(q, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), 0.0).unwrap()
}

fn hits(e: f64, e_min: f64) -> bool {
    e <= e_min + 1e-9 * (1.0 + e_min.abs())
}

#[test]
fn annealer_finds_ground_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut ok = 0;
    for k in 0..100 {
        let p = random_qubo(&mut rng, 16);
        let (_, e_min) = brute_force_minima(&p).unwrap();
        let s = simulated_anneal(&p, &AnnealConfig { seed: k, ..AnnealConfig::default() }, 32);
        ok += hits(s.best().unwrap().1, e_min) as usize;
    }
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn tabu_finds_ground_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut ok = 0;
    for k in 0..100 {
        let p = random_qubo(&mut rng, 12);
        let (_, e_min) = brute_force_minima(&p).unwrap();
        ok += hits(p.energy_of(&tabu_search(&p, &TabuConfig { seed: k, ..TabuConfig::default() })), e_min) as usize;
    }
    assert!(ok >= 90, "{ok}/100");
}

#[test]
fn more_sweeps_do_not_hurt_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let problems: Vec<_> = (0..40).map(|_| random_qubo(&mut rng, 24)).collect();
    let mean_energy = |sweeps: usize| {
        problems
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let s = simulated_anneal(p, &AnnealConfig { sweeps, seed: k as u64, ..AnnealConfig::default() }, 8);
                s.energies.iter().zip(&s.occurrences).map(|(&e, &o)| e * o as f64).sum::<f64>() / s.total_reads as f64
            })
            .sum::<f64>()
            / problems.len() as f64
    };
    let curve: Vec<f64> = [1, 4, 16, 64].iter().map(|&s| mean_energy(s)).collect();
    for w in curve.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{curve:?}");
    }
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        x[r] = (b[r] - (r + 1..n).map(|k| a[r][k] * x[k]).sum::<f64>()) / a[r][r];
    }
    Some(x)
}

/// Minimum of `‖Dα − y‖² + λ‖α‖₁` by enumerating every support and sign
/// pattern and solving the stationarity condition on it.
fn lasso_by_supports(d: &Matrix<f64>, y: &[f64], lambda: f64) -> f64 {
    let n = d.cols();
    let mut best = y.iter().map(|v| v * v).sum::<f64>();
    let mut signs = vec![0i8; n];
    loop {
        let s: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
        if !s.is_empty() {
            let g: Vec<Vec<f64>> = s.iter().map(|&i| s.iter().map(|&j| (0..d.rows()).map(|r| d[(r, i)] * d[(r, j)]).sum()).collect()).collect();
            let rhs: Vec<f64> = s.iter().map(|&i| (0..d.rows()).map(|r| d[(r, i)] * y[r]).sum::<f64>() - lambda / 2.0 * signs[i] as f64).collect();
            if let Some(x) = solve_dense(g, rhs) {
                if s.iter().zip(&x).all(|(&i, &v)| v * signs[i] as f64 > 0.0) {
                    let mut alpha = vec![0.0; n];
                    for (&i, &v) in s.iter().zip(&x) {
                        alpha[i] = v;
                    }
                    best = best.min(lasso_objective(d, y, lambda, &alpha));
                }
            }
        }
        let mut k = 0;
        while k < n {
            signs[k] = match signs[k] {
                0 => 1,
                1 => -1,
                _ => 0,
            };
            if signs[k] != 0 {
                break;
            }
            k += 1;
        }
        if k == n {
            return best;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lasso_matches_support_enumeration(
        vals in prop::collection::vec(-1.0..1.0f64, 8 * 5 + 8),
        n in 1usize..=5,
        lambda in 0.01..2.0f64,
    ) {
        let m = 8;
        let d = Matrix::from_fn(m, n, |r, c| vals[r * 5 + c]);
        let y: Vec<f64> = vals[40..48].to_vec();
        let alpha = lasso_solve(&d, &y, lambda).unwrap();
        let got = lasso_objective(&d, &y, lambda, &alpha);
        let want = lasso_by_supports(&d, &y, lambda);
        prop_assert!(got <= want + 1e-6 * (1.0 + want), "cd {got} vs oracle {want}");
        prop_assert!(got >= want - 1e-9 * (1.0 + want));
    }

    #[test]
    fn brute_force_minimum_is_minimal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_qubo(&mut rng, 8);
        let (argmins, e_min) = brute_force_minima(&p).unwrap();
        for z in &argmins {
            prop_assert!((p.energy_of(z) - e_min).abs() < 1e-12);
        }
        for mask in 0..256usize {
            let z: Vec<u8> = (0..8).map(|i| ((mask >> i) & 1) as u8).collect();
            prop_assert!(p.energy_of(&z) >= e_min - 1e-12);
        }
    }
}
