use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng::run_rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of `counts` against the uniform law.
///
/// Panics on fewer than two categories or an empty sample.
pub fn chi_square_uniform(counts: &[u64]) -> ChiSquare {
    assert!(counts.len() >= 2, "need at least two categories");
    let total: u64 = counts.iter().sum();
    assert!(total > 0, "empty sample");
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let df = counts.len() - 1;
    let law = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    ChiSquare {
        statistic,
        degrees_of_freedom: df,
        p_value: law.sf(statistic),
    }
}

/// Total variation between two independent `samples`-draw histograms of
/// the uniform law on `outcomes` values: the sampling noise a perfect
/// simulator would still show.
pub fn uniform_noise_floor(outcomes: usize, samples: u64, seed: u64) -> f64 {
    let mut rng = run_rng(seed);
    let mut draw = || {
        let mut counts = vec![0u64; outcomes];
        for _ in 0..samples {
            counts[rng.random_range(0..outcomes)] += 1;
        }
        counts
    };
    let (a, b) = (draw(), draw());
    let l1: u64 = a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y)).sum();
    l1 as f64 / (2 * samples) as f64
}
