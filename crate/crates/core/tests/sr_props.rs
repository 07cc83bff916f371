use proptest::prelude::*;
use qsr_core::imagecore::{downscale, upscale, Image};
use qsr_core::sr::{accumulate_patch, backproject_traced, boltzmann_weights, entropy, finalize_canvas, BackprojectConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn boltzmann_weights_are_a_distribution(
        rows in prop::collection::vec((-100.0..100.0f64, 1u64..50), 1..40),
        log_beta in -4.0..4.0f64,
    ) {
        let (e, o): (Vec<f64>, Vec<u64>) = rows.into_iter().unzip();
        let p = boltzmann_weights(&e, &o, 10f64.powf(log_beta)).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let h = entropy(&p);
        prop_assert!(h >= 0.0 && h <= (p.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn equal_energies_weight_by_occurrence(occ in prop::collection::vec(1u64..20, 1..12), beta in 0.01..10.0f64) {
        let e = vec![1.5; occ.len()];
        let p = boltzmann_weights(&e, &occ, beta).unwrap();
        let total: u64 = occ.iter().sum();
        for (pj, &o) in p.iter().zip(&occ) {
            prop_assert!((pj - o as f64 / total as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn blending_constant_patches_is_constant(v in -1.0..1.0f64, stride in 1usize..9) {
        let (w, h, k) = (9 + 2 * stride, 9 + stride, 9);
        let mut canvas = Image::new(w, h, 1);
        let mut weights = Image::new(w, h, 1);
        for r in (0..=h - k).step_by(stride) {
            for c in (0..=w - k).step_by(stride) {
                accumulate_patch(&mut canvas, &mut weights, &vec![v; k * k], (r, c), k).unwrap();
            }
        }
        let out = finalize_canvas(&canvas, &weights).unwrap();
        prop_assert!(out.as_slice().iter().all(|&x| (x - v).abs() < 1e-12));
    }

    #[test]
    fn backprojection_never_increases_residual(seed in any::<u64>()) {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let (a, b, c) = (next(), next(), next());
        let hr = Image::from_fn(30, 27, |r, col| (0.5 + 0.3 * ((r as f64) * a).sin() + 0.2 * ((col as f64) * b + c).cos()).clamp(0.0, 1.0));
        let lr = downscale(&hr, 3).unwrap();
        let (_, trace) = backproject_traced(&upscale(&lr, 3).unwrap(), &lr, 20, &BackprojectConfig::default()).unwrap();
        prop_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn degenerate_weights() {
    assert_eq!(boltzmann_weights(&[3.0], &[7], 1.0).unwrap(), vec![1.0]);
    assert_eq!(entropy(&[1.0]), 0.0);
    let p = boltzmann_weights(&[0.0, 0.0, 0.0, 0.0], &[1, 1, 1, 1], 2.0).unwrap();
    assert!((entropy(&p) - 4f64.ln()).abs() < 1e-12);
    assert!(boltzmann_weights::<f64>(&[], &[], 1.0).is_err());
}
