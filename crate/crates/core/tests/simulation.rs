#![allow(clippy::needless_range_loop)]

use mvhawkes_core::hawkes::{expected_intensity, simulate_discretized_with, simulate_exact_with, HawkesParams};
use mvhawkes_core::rng::stream;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn exact_mean_intensity_follows_moment_equation() {
    let p = HawkesParams::univariate(1.5, 0.48, 5.0, 0.8).unwrap();
    let paths: Vec<_> = (0..4000)
        .map(|i| simulate_exact_with(&p, 2.0, None, &mut stream(11, 90, i, 0)).unwrap())
        .collect();
    for t in [0.5, 1.0, 2.0] {
        let xs: Vec<f64> = paths.iter().map(|path| path.intensity_at(&p, t)[0]).collect();
        let (mean, se) = mean_se(&xs);
        let oracle = expected_intensity(&p, t).unwrap()[0];
        assert!(
            (mean - oracle).abs() < 3.0 * se,
            "t = {t}: {mean} vs {oracle} (se {se})"
        );
    }
    let comp: Vec<f64> = paths.iter().map(|path| path.compensated_counts(&p)[0]).collect();
    let (mean, se) = mean_se(&comp);
    assert!(mean.abs() < 3.0 * se, "compensated count mean {mean} (se {se})");
}

#[test]
fn bivariate_cross_excitation_moments() {
    let p = HawkesParams::new(
        vec![0.2, 0.9],
        vec![0.4, 0.5],
        vec![3.0, 4.0],
        vec![vec![0.5, 0.7], vec![0.2, 0.6]],
    )
    .unwrap();
    let paths: Vec<_> = (0..4000)
        .map(|i| simulate_exact_with(&p, 1.5, None, &mut stream(12, 90, i, 0)).unwrap())
        .collect();
    let oracle = expected_intensity(&p, 1.0).unwrap();
    for l in 0..2 {
        let xs: Vec<f64> = paths.iter().map(|path| path.intensity_at(&p, 1.0)[l]).collect();
        let (mean, se) = mean_se(&xs);
        assert!(
            (mean - oracle[l]).abs() < 3.0 * se,
            "component {l}: {mean} vs {}",
            oracle[l]
        );
        let comp: Vec<f64> = paths.iter().map(|path| path.compensated_counts(&p)[l]).collect();
        let (mean, se) = mean_se(&comp);
        assert!(mean.abs() < 3.0 * se);
    }
}

#[test]
fn discretized_scheme_approaches_exact_mean() {
    // The Euler–Bernoulli mean obeys the same linear recursion with step dt,
    // so its bias against the continuous oracle is O(dt).
    let p = HawkesParams::univariate(0.48, 0.48, 5.0, 0.5).unwrap();
    let xs: Vec<f64> = (0..4000)
        .map(|i| {
            let path = simulate_discretized_with(&p, 1.0, 0.005, &mut stream(13, 90, i, 0)).unwrap();
            *path.grid_intensity.last().unwrap().first().unwrap()
        })
        .collect();
    let (mean, se) = mean_se(&xs);
    let oracle = expected_intensity(&p, 1.0).unwrap()[0];
    assert!((mean - oracle).abs() < 3.0 * se + 0.01 * oracle, "{mean} vs {oracle}");
}

#[test]
fn exact_path_contract() {
    let p = HawkesParams::univariate(0.48, 0.48, 5.0, 0.1).unwrap();
    let path = simulate_exact_with(&p, 2.0, Some(0.02), &mut stream(1, 90, 0, 0)).unwrap();
    assert_eq!(path.grid_times.len(), 101);
    assert!(path.times.windows(2).all(|w| w[0] < w[1]));
    assert!(path.times.iter().all(|t| *t > 0.0 && *t <= 2.0));
    for (t, lam) in path.grid_times.iter().zip(&path.grid_intensity) {
        assert!((path.intensity_at(&p, *t)[0] - lam[0]).abs() < 1e-12);
    }
}
