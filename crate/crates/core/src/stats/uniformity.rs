use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::hypothesis::{ks_uniform, StatsError, TestReport};
use crate::params::FitnessBound;
use crate::rng::open01;
use crate::trials::run_trials;

/// One reconstructed vector of uniforms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconstruction {
    pub minimal: usize,
    pub minimum: f64,
    pub uniforms: Vec<f64>,
}

/// Realizes fitnesses `y_i + (1 - y_i) U_i`, keeps only the position and
/// value `(K, M)` of the minimum, and rebuilds a uniform vector from them:
/// `U_K = (M - y_K) / (1 - y_K)` and, for `i != K`, a fresh uniform above
/// `(M - y_i)+ / (1 - y_i)`.
///
/// With `skip_resample` the `i != K` coordinates are left at that lower
/// threshold instead.
pub fn reconstruct<R: Rng + ?Sized>(bounds: &[FitnessBound], skip_resample: bool, rng: &mut R) -> Reconstruction {
    let mut minimal = 0;
    let mut minimum = f64::INFINITY;
    for (i, y) in bounds.iter().enumerate() {
        let f = y.realize(open01(rng));
        if f < minimum {
            minimal = i;
            minimum = f;
        }
    }
    let uniforms = bounds
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let t = y.uniform_for(minimum).max(0.0);
            if i == minimal || skip_resample {
                t
            } else {
                t + (1.0 - t) * open01(rng)
            }
        })
        .collect();
    Reconstruction { minimal, minimum, uniforms }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityResult {
    /// KS test of all coordinates pooled against uniform(0, 1).
    pub ks: TestReport,
    /// Chi-square tests of each coordinate pair against the uniform 4x4
    /// grid, Bonferroni-corrected.
    pub pairs: Vec<TestReport>,
}

impl UniformityResult {
    pub fn passed(&self) -> bool {
        self.ks.passed() && self.pairs.iter().all(TestReport::passed)
    }

    pub fn reports(&self) -> impl Iterator<Item = &TestReport> {
        std::iter::once(&self.ks).chain(&self.pairs)
    }
}

fn cell(u: f64) -> usize {
    ((u * 4.0) as usize).min(3)
}

/// Runs `trials` reconstructions on streams under `master_seed` and tests
/// that the output looks like i.i.d. uniforms.
pub fn uniformity_test(
    trials: u64,
    bounds: &[f64],
    master_seed: u64,
    skip_resample: bool,
    alpha: f64,
) -> Result<UniformityResult, StatsError> {
    if bounds.len() < 2 {
        return Err(StatsError::Invalid("need at least two coordinates".into()));
    }
    if trials == 0 {
        return Err(StatsError::EmptySample("reconstruction"));
    }
    let ys = bounds
        .iter()
        .map(|&y| match FitnessBound::new(y) {
            Ok(b) if y < 1.0 => Ok(b),
            _ => Err(StatsError::Invalid(format!("bound {y} must lie in [0, 1)"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let samples = run_trials(master_seed, trials, |_, rng| reconstruct(&ys, skip_resample, rng).uniforms);

    let pooled: Vec<f64> = samples.iter().flatten().copied().collect();
    let ks = ks_uniform(&pooled, alpha)?
        .with_seeds([master_seed])
        .with("trials", trials)
        .with("bounds", bounds.to_vec())
        .with("skip_resample", skip_resample);

    let n = bounds.len();
    let npairs = n * (n - 1) / 2;
    let pair_alpha = alpha / npairs as f64;
    let threshold = ChiSquared::new(15.0).expect("df 15").inverse_cdf(1.0 - pair_alpha);
    let expected = trials as f64 / 16.0;
    let mut pairs = Vec::with_capacity(npairs);
    for i in 0..n {
        for j in i + 1..n {
            let mut grid = [0u64; 16];
            for s in &samples {
                grid[4 * cell(s[i]) + cell(s[j])] += 1;
            }
            let statistic = grid.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
            pairs.push(
                TestReport::new(format!("pair_independence_{i}_{j}"), statistic, threshold)
                    .with_seeds([master_seed])
                    .with("significance", pair_alpha)
                    .with("trials", trials),
            );
        }
    }
    Ok(UniformityResult { ks, pairs })
}
