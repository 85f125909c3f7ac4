use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("{0} sample is empty")]
    EmptySample(&'static str),
    #[error("samples were capped differently ({a} vs {b})")]
    CapMismatch { a: u64, b: u64 },
    #[error("significance {0} must lie in (0, 1)")]
    Significance(f64),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// Outcome of one statistical check. The verdict is `pass` exactly when
/// `statistic <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub seeds: Vec<u64>,
    pub config: Map<String, Value>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        let verdict = if statistic <= threshold { Verdict::Pass } else { Verdict::Fail };
        TestReport { name: name.into(), statistic, threshold, verdict, seeds: Vec::new(), config: Map::new() }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = u64>) -> Self {
        self.seeds.extend(seeds);
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.config.insert(key.to_string(), value.into());
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

fn check_significance(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::Significance(alpha))
    }
}

/// Integer observations that were censored at `cap`: anything at or above
/// it means "reached the cap".
#[derive(Debug, Clone, Copy)]
pub struct CappedSample<'a> {
    pub values: &'a [u64],
    pub cap: u64,
}

impl<'a> CappedSample<'a> {
    pub fn new(values: &'a [u64], cap: u64) -> Self {
        CappedSample { values, cap }
    }

    fn sorted(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.values.iter().map(|&x| x.min(self.cap)).collect();
        v.sort_unstable();
        v
    }
}

fn mean(values: &[u64]) -> f64 {
    values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64
}

/// One-sided two-sample Kolmogorov-Smirnov test of `H0: A >=st B`.
///
/// The statistic is `max(0, sup_t F_A(t) - F_B(t))`, i.e. how far `A` falls
/// below `B` at its worst; it is compared with the asymptotic critical value
/// `sqrt(-ln(alpha) (n + m) / (2 n m))`.
pub fn dominance_test(a: CappedSample<'_>, b: CappedSample<'_>, alpha: f64) -> Result<TestReport, StatsError> {
    check_significance(alpha)?;
    if a.values.is_empty() {
        return Err(StatsError::EmptySample("first"));
    }
    if b.values.is_empty() {
        return Err(StatsError::EmptySample("second"));
    }
    if a.cap != b.cap {
        return Err(StatsError::CapMismatch { a: a.cap, b: b.cap });
    }
    let (xs, ys) = (a.sorted(), b.sorted());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == t {
            i += 1;
        }
        while j < ys.len() && ys[j] == t {
            j += 1;
        }
        d = d.max(i as f64 / n - j as f64 / m);
    }
    let threshold = (-alpha.ln() * (n + m) / (2.0 * n * m)).sqrt();
    Ok(TestReport::new("dominance", d, threshold)
        .with("significance", alpha)
        .with("cap", a.cap)
        .with("n_a", xs.len() as u64)
        .with("n_b", ys.len() as u64)
        .with("mean_a_minus_b", mean(&xs) - mean(&ys)))
}

fn chi_square_threshold(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64).expect("df >= 1").inverse_cdf(1.0 - alpha)
}

/// Two-sample chi-square homogeneity test over the integer support.
///
/// Adjacent support points are merged left to right until every bin has an
/// expected count of at least 5 in both rows; a short remainder joins the
/// last bin.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], alpha: f64) -> Result<TestReport, StatsError> {
    check_significance(alpha)?;
    if a.is_empty() {
        return Err(StatsError::EmptySample("first"));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample("second"));
    }
    let mut table: BTreeMap<u64, [u64; 2]> = BTreeMap::new();
    for &x in a {
        table.entry(x).or_default()[0] += 1;
    }
    for &x in b {
        table.entry(x).or_default()[1] += 1;
    }
    let rows = [a.len() as f64, b.len() as f64];
    let total = rows[0] + rows[1];
    // a column total of `need` gives both rows an expectation of at least 5
    let need = 5.0 * total / rows[0].min(rows[1]);

    let mut bins: Vec<[u64; 2]> = Vec::new();
    let mut current = [0u64; 2];
    for counts in table.values() {
        current[0] += counts[0];
        current[1] += counts[1];
        if (current[0] + current[1]) as f64 >= need {
            bins.push(current);
            current = [0; 2];
        }
    }
    if current != [0, 0] {
        match bins.last_mut() {
            Some(last) => {
                last[0] += current[0];
                last[1] += current[1];
            }
            None => bins.push(current),
        }
    }

    let mut statistic = 0.0;
    for bin in &bins {
        let col = (bin[0] + bin[1]) as f64;
        for r in 0..2 {
            let expected = rows[r] * col / total;
            statistic += (bin[r] as f64 - expected).powi(2) / expected;
        }
    }
    let df = bins.len().saturating_sub(1);
    let threshold = if df == 0 { 0.0 } else { chi_square_threshold(df, alpha) };
    if df == 0 {
        statistic = 0.0;
    }
    Ok(TestReport::new("chi_square_two_sample", statistic, threshold)
        .with("significance", alpha)
        .with("bins", bins.len() as u64)
        .with("n_a", a.len() as u64)
        .with("n_b", b.len() as u64))
}

/// Two-sample comparison of cluster-size laws.
pub fn equivalence_test(a: &[u64], b: &[u64], alpha: f64) -> Result<TestReport, StatsError> {
    Ok(chi_square_two_sample(a, b, alpha)?.renamed("equivalence"))
}

/// Chi-square goodness of fit of integer data against a PMF supported on
/// `start, start + 1, ...`. Bins are grown until each expects at least 5
/// observations; the final bin collects the whole upper tail.
pub fn chi_square_gof(
    sample: &[u64],
    pmf: impl Fn(u64) -> f64,
    start: u64,
    alpha: f64,
) -> Result<TestReport, StatsError> {
    check_significance(alpha)?;
    if sample.is_empty() {
        return Err(StatsError::EmptySample("observed"));
    }
    let n = sample.len() as f64;
    // bin lower edges with the cumulative mass below each edge
    let mut edges: Vec<(u64, f64)> = Vec::new();
    let mut bin_start = (start, 0.0);
    let mut bin_expected = 0.0;
    let mut cum = 0.0;
    let mut k = start;
    loop {
        let mass = pmf(k);
        if !(0.0..=1.0).contains(&mass) {
            return Err(StatsError::Invalid(format!("pmf({k}) = {mass} is not a probability")));
        }
        cum += mass;
        bin_expected += n * mass;
        k += 1;
        if n * (1.0 - cum) < 5.0 || k - start > 10_000_000 {
            break;
        }
        if bin_expected >= 5.0 {
            edges.push(bin_start);
            bin_start = (k, cum);
            bin_expected = 0.0;
        }
    }
    // the open-ended last bin
    if n * (1.0 - bin_start.1) < 5.0 && !edges.is_empty() {
        bin_start = edges.pop().expect("nonempty");
    }
    edges.push(bin_start);

    let mut observed = vec![0u64; edges.len()];
    for &x in sample {
        let x = x.max(start);
        let bin = edges.partition_point(|&(lo, _)| lo <= x) - 1;
        observed[bin] += 1;
    }
    let mut statistic = 0.0;
    for (i, &(_, below)) in edges.iter().enumerate() {
        let above = edges.get(i + 1).map_or(1.0, |&(_, c)| c);
        let expected = n * (above - below);
        if expected > 0.0 {
            statistic += (observed[i] as f64 - expected).powi(2) / expected;
        } else if observed[i] > 0 {
            statistic = f64::INFINITY;
        }
    }
    let df = edges.len().saturating_sub(1);
    let threshold = if df == 0 { 0.0 } else { chi_square_threshold(df, alpha) };
    if df == 0 {
        statistic = 0.0;
    }
    Ok(TestReport::new("chi_square_gof", statistic, threshold)
        .with("significance", alpha)
        .with("bins", edges.len() as u64)
        .with("n", sample.len() as u64))
}

/// Survival function of the Kolmogorov distribution,
/// `Q(l) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2)`.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `lambda` with `Q(lambda) = alpha`.
pub fn kolmogorov_quantile(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sample Kolmogorov-Smirnov test against uniform(0, 1) with the
/// asymptotic critical value.
pub fn ks_uniform(sample: &[f64], alpha: f64) -> Result<TestReport, StatsError> {
    check_significance(alpha)?;
    if sample.is_empty() {
        return Err(StatsError::EmptySample("observed"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let x = x.clamp(0.0, 1.0);
        d.max((i + 1) as f64 / n - x).max(x - i as f64 / n)
    });
    let threshold = kolmogorov_quantile(alpha) / n.sqrt();
    Ok(TestReport::new("ks_uniform", d, threshold).with("significance", alpha).with("n", xs.len() as u64))
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_distr::{Distribution, Geometric};

    use super::*;
    use crate::rng::trial_rng;

    fn geometric(p: f64, n: usize, shift: u64, seed: u64) -> Vec<u64> {
        let mut rng = trial_rng(seed, 0);
        let g = Geometric::new(p).unwrap();
        (0..n).map(|_| g.sample(&mut rng) + 1 + shift).collect()
    }

    #[test]
    fn report_verdict_follows_statistic() {
        assert!(TestReport::new("x", 1.0, 1.0).passed());
        assert!(!TestReport::new("x", 1.0 + 1e-12, 1.0).passed());
        let json = serde_json::to_string(&TestReport::new("x", 0.5, 1.0).with_seeds([3])).unwrap();
        assert_eq!(json, r#"{"name":"x","statistic":0.5,"threshold":1.0,"verdict":"pass","seeds":[3],"config":{}}"#);
    }

    #[test]
    fn dominance_identical_samples() {
        let a = geometric(0.3, 1000, 0, 1);
        let r = dominance_test(CappedSample::new(&a, 100), CappedSample::new(&a, 100), 0.01).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn dominance_shifted_geometric() {
        let small = geometric(0.3, 20_000, 0, 2);
        let large = geometric(0.3, 20_000, 1, 3);
        let ok = dominance_test(CappedSample::new(&large, 1000), CappedSample::new(&small, 1000), 0.01).unwrap();
        assert!(ok.passed(), "{ok:?}");
        let swapped = dominance_test(CappedSample::new(&small, 1000), CappedSample::new(&large, 1000), 0.01).unwrap();
        assert!(!swapped.passed(), "{swapped:?}");
        // the shift moves the CDF by P(G = 1) = 0.3 at t = 1
        assert!((swapped.statistic - 0.3).abs() < 0.02);
    }

    #[test]
    fn dominance_statistic_by_hand() {
        // F_A - F_B at t = 1, 2, 3: 1/2 - 0, 1/2 - 1/2, 1 - 1
        let a = [1, 3];
        let b = [2, 3];
        let r = dominance_test(CappedSample::new(&a, 10), CappedSample::new(&b, 10), 0.05).unwrap();
        assert_eq!(r.statistic, 0.5);
        assert!((r.threshold - (-(0.05f64).ln() * 4.0 / 8.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dominance_clamps_at_cap_and_rejects_mismatch() {
        let a = [5, 50, 500];
        let b = [5, 40, 400];
        let r = dominance_test(CappedSample::new(&a, 20), CappedSample::new(&b, 20), 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(
            dominance_test(CappedSample::new(&a, 20), CappedSample::new(&b, 30), 0.05),
            Err(StatsError::CapMismatch { a: 20, b: 30 })
        );
        assert!(dominance_test(CappedSample::new(&[], 20), CappedSample::new(&b, 20), 0.05).is_err());
    }

    #[test]
    fn chi_square_same_law_passes_and_distinct_fails() {
        let a = geometric(0.4, 50_000, 0, 4);
        let b = geometric(0.4, 50_000, 0, 5);
        let c = geometric(0.45, 50_000, 0, 6);
        assert!(equivalence_test(&a, &b, 0.01).unwrap().passed());
        assert!(!equivalence_test(&a, &c, 0.01).unwrap().passed());
    }

    #[test]
    fn chi_square_hand_example() {
        // a = {1 x 10, 2 x 10}, b = {1 x 20}: one 2x2 table, each bin total
        // 30 and 10 with need = 5 * 40 / 20 = 10
        let a: Vec<u64> = [1; 10].into_iter().chain([2; 10]).collect();
        let b = vec![1u64; 20];
        let r = chi_square_two_sample(&a, &b, 0.05).unwrap();
        // expected 15/15 and 5/5
        let expected = (25.0 + 25.0) / 15.0 + (25.0 + 25.0) / 5.0;
        assert!((r.statistic - expected).abs() < 1e-12);
        assert!((r.threshold - 3.841458820694124).abs() < 1e-9);
    }

    #[test]
    fn chi_square_degenerate_support() {
        let r = chi_square_two_sample(&[3, 3, 3], &[3, 3], 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn goodness_of_fit_geometric() {
        let pmf = |k: u64| 0.4 * 0.6f64.powi(k as i32 - 1);
        let good = geometric(0.4, 50_000, 0, 7);
        assert!(chi_square_gof(&good, pmf, 1, 0.01).unwrap().passed());
        let bad = geometric(0.43, 50_000, 0, 8);
        assert!(!chi_square_gof(&bad, pmf, 1, 0.01).unwrap().passed());
    }

    #[test]
    fn kolmogorov_quantiles() {
        assert!((kolmogorov_quantile(0.05) - 1.3581).abs() < 1e-3);
        assert!((kolmogorov_quantile(0.01) - 1.6276).abs() < 1e-3);
    }

    #[test]
    fn ks_uniform_accepts_uniform_rejects_squared() {
        let mut rng = trial_rng(9, 0);
        let u: Vec<f64> = (0..20_000).map(|_| rng.random()).collect();
        assert!(ks_uniform(&u, 0.01).unwrap().passed());
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(!ks_uniform(&sq, 0.01).unwrap().passed());
    }

    #[test]
    fn ks_uniform_by_hand() {
        let r = ks_uniform(&[0.5], 0.05).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn bad_significance() {
        assert_eq!(ks_uniform(&[0.5], 1.0), Err(StatsError::Significance(1.0)));
    }
}
