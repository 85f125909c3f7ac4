//! The verification suite behind `verify`: each criterion is a list of
//! checks, all run on fixed streams derived from one master seed.

use avalanche_core::coupling::{estimate_g, g_closed_form};
use avalanche_core::percolation::{branching_total_progeny, cluster_size_pmf_z, extinction_prob};
use avalanche_core::stats::{dominance_test, equivalence_test, uniformity_test, CappedSample};
use avalanche_core::{
    grow_cluster, run_coupled, run_trials, run_with_engine, stream_seed, AvalancheStatus, Caps, CouplingError,
    CouplingOptions, Engine, GraphKind, PercStatus, TestReport, Threshold, Verdict,
};
use serde::Serialize;

/// A test report together with the verdict the check requires of it.
/// Negative controls expect `fail`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub expect: Verdict,
    pub report: TestReport,
}

impl Check {
    pub fn pass(report: TestReport) -> Self {
        Check { expect: Verdict::Pass, report }
    }

    pub fn fail(report: TestReport) -> Self {
        Check { expect: Verdict::Fail, report }
    }

    pub fn ok(&self) -> bool {
        self.report.verdict == self.expect
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "g-check on Z at p = 0.5, x = 0"),
    (2, "g-check on Z at p = 0.5, x = 0.2"),
    (3, "coupled cluster sizes follow the site-percolation law on Z"),
    (4, "extremal bounds dominate their avalanche counterparts"),
    (5, "every finalized extremal vertex closes"),
    (6, "Galton-Watson extinction oracle"),
    (7, "avalanche range stochastically dominates percolation range"),
    (8, "avalanche survival on the 5-regular tree"),
    (9, "classic and forgetful engines agree on cycle:20"),
    (10, "uniform reconstruction from a conditioned minimum"),
];

pub fn title(id: u32) -> &'static str {
    CRITERIA.iter().find(|(i, _)| *i == id).map(|(_, t)| *t).expect("known criterion")
}

const SIGNIFICANCE: f64 = 0.01;

fn th(p: f64) -> Threshold {
    Threshold::new(p).expect("suite thresholds are valid")
}

fn caps(range: usize, steps: u64) -> Caps {
    Caps::new(range, steps).expect("suite caps are valid")
}

/// Master seed of sample `part` within criterion `id`.
fn seed_for(master: u64, id: u32, part: u64) -> u64 {
    stream_seed(master, u64::from(id) * 64 + part)
}

fn deviation(name: &str, value: f64, target: f64, tol: f64) -> TestReport {
    TestReport::new(name, (value - target).abs(), tol).with("value", value).with("target", target)
}

fn count(name: &str, n: u64) -> TestReport {
    TestReport::new(name, n as f64, 0.0)
}

fn g_check(master: u64, id: u32, x: f64, tol: f64) -> Vec<Check> {
    let seed = seed_for(master, id, 0);
    let est = estimate_g(x, th(0.5), 100_000, seed, CouplingOptions::default()).expect("valid g-check parameters");
    vec![
        Check::pass(
            deviation("g_frequency", est.estimate, g_closed_form(0.5, x), tol)
                .with_seeds([seed])
                .with("trials", est.trials)
                .with("ci_low", est.ci_low)
                .with("ci_high", est.ci_high),
        ),
        Check::pass(count("g_unresolved", est.unresolved).with_seeds([seed])),
    ]
}

/// Outcome counts of a batch of coupled runs.
#[derive(Debug, Default)]
struct CoupledBatch {
    sizes: Vec<u64>,
    truncated: u64,
    domination: u64,
    not_closed: u64,
    other: u64,
}

fn coupled_batch(graph: GraphKind, p: f64, trials: u64, caps: Caps, seed: u64) -> CoupledBatch {
    let runs = run_trials(seed, trials, |_, rng| run_coupled(graph, th(p), caps, CouplingOptions::default(), rng));
    let mut batch = CoupledBatch::default();
    for r in runs {
        match r {
            Ok((_, perc)) if perc.status == PercStatus::ClosedOut => batch.sizes.push(perc.cluster_size as u64),
            Ok(_) => batch.truncated += 1,
            Err(CouplingError::DominationViolated { .. }) => batch.domination += 1,
            Err(CouplingError::ExtremalNotClosed { .. }) => batch.not_closed += 1,
            Err(_) => batch.other += 1,
        }
    }
    batch
}

fn percolation_identity(master: u64) -> Vec<Check> {
    let id = 3;
    let z = GraphKind::LatticeZd(1);
    let n = 100_000;
    let (s_coupled, s_direct, s_control) = (seed_for(master, id, 0), seed_for(master, id, 1), seed_for(master, id, 2));
    let coupled = coupled_batch(z, 0.4, n, caps(10_000, 1_000_000), s_coupled);
    let direct_sizes = |p: f64, seed: u64| -> Vec<u64> {
        run_trials(seed, n, |_, rng| grow_cluster(z, th(p), 10_000, rng))
            .into_iter()
            .filter(|o| o.status == PercStatus::ClosedOut)
            .map(|o| o.cluster_size as u64)
            .collect()
    };
    let direct = direct_sizes(0.4, s_direct);
    let control = direct_sizes(0.5, s_control);

    let mut freq = [0u64; 11];
    for &k in &direct {
        if (1..=10).contains(&k) {
            freq[k as usize] += 1;
        }
    }
    let (worst_k, worst) = (1..=10u64)
        .map(|k| (k, (freq[k as usize] as f64 / direct.len() as f64 - cluster_size_pmf_z(0.4, k)).abs()))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });

    vec![
        Check::pass(
            equivalence_test(&coupled.sizes, &direct, SIGNIFICANCE)
                .expect("nonempty samples")
                .with_seeds([s_coupled, s_direct])
                .with("truncated_runs", coupled.truncated),
        ),
        Check::pass(
            TestReport::new("pmf_max_deviation", worst, 0.005).with_seeds([s_direct]).with("worst_k", worst_k),
        ),
        Check::pass(count("coupling_errors", coupled.domination + coupled.not_closed + coupled.other)),
        Check::fail(
            equivalence_test(&coupled.sizes, &control, SIGNIFICANCE)
                .expect("nonempty samples")
                .renamed("equivalence_against_p_0.5")
                .with_seeds([s_coupled, s_control]),
        ),
    ]
}

const ASSERTION_RUNS: [(&str, GraphKind, f64); 2] =
    [("zd:1", GraphKind::LatticeZd(1), 0.5), ("tree:3", GraphKind::RegularTree(3), 0.3)];

fn assertion_batches(master: u64) -> Vec<(&'static str, u64, CoupledBatch)> {
    // criteria 4 and 5 share their runs
    ASSERTION_RUNS
        .iter()
        .enumerate()
        .map(|(i, &(name, g, p))| {
            let seed = seed_for(master, 4, i as u64);
            (name, seed, coupled_batch(g, p, 10_000, caps(10_000, 1_000_000), seed))
        })
        .collect()
}

fn domination_assertions(master: u64) -> Vec<Check> {
    assertion_batches(master)
        .into_iter()
        .map(|(name, seed, b)| {
            Check::pass(
                count(&format!("z_below_y_{name}"), b.domination)
                    .with_seeds([seed])
                    .with("runs", 10_000u64)
                    .with("truncated_runs", b.truncated),
            )
        })
        .collect()
}

fn closing_assertions(master: u64) -> Vec<Check> {
    assertion_batches(master)
        .into_iter()
        .flat_map(|(name, seed, b)| {
            [
                Check::pass(count(&format!("finalized_not_above_p_{name}"), b.not_closed).with_seeds([seed])),
                Check::pass(count(&format!("other_errors_{name}"), b.other).with_seeds([seed])),
            ]
        })
        .collect()
}

fn branching(master: u64) -> Vec<Check> {
    let seed = seed_for(master, 6, 0);
    let n = 100_000;
    let extinct = run_trials(seed, n, |_, rng| branching_total_progeny(2, 0.6, 100_000, rng).expect("valid parameters"))
        .iter()
        .filter(|o| !o.cap_hit)
        .count();
    vec![
        Check::pass(
            deviation("extinction_frequency", extinct as f64 / n as f64, 4.0 / 9.0, 0.01)
                .with_seeds([seed])
                .with("trials", n),
        ),
        Check::pass(deviation("extinction_prob_2_0.6", extinction_prob(2, 0.6).expect("valid"), 0.444444444, 1e-9)),
        Check::pass(deviation("extinction_prob_2_0.5", extinction_prob(2, 0.5).expect("valid"), 1.0, 0.0)),
    ]
}

fn dominance(master: u64) -> Vec<Check> {
    let cap = 1000;
    let n = 100_000;
    let cases = [("zd:1", GraphKind::LatticeZd(1), 0.4), ("tree:5", GraphKind::RegularTree(5), 0.22)];
    let mut checks = Vec::new();
    for (i, (name, g, p)) in cases.into_iter().enumerate() {
        let (s_av, s_perc) = (seed_for(master, 7, 2 * i as u64), seed_for(master, 7, 2 * i as u64 + 1));
        let av: Vec<u64> =
            run_trials(s_av, n, |_, rng| run_with_engine(Engine::Classic, g, th(p), caps(cap, u64::MAX), rng).range as u64);
        let perc: Vec<u64> = run_trials(s_perc, n, |_, rng| grow_cluster(g, th(p), cap, rng).range as u64);
        let (a, b) = (CappedSample::new(&av, cap as u64), CappedSample::new(&perc, cap as u64));
        checks.push(Check::pass(
            dominance_test(a, b, SIGNIFICANCE)
                .expect("nonempty samples")
                .renamed(format!("avalanche_dominates_percolation_{name}"))
                .with_seeds([s_av, s_perc]),
        ));
        checks.push(Check::fail(
            dominance_test(b, a, SIGNIFICANCE)
                .expect("nonempty samples")
                .renamed(format!("percolation_dominates_avalanche_{name}"))
                .with_seeds([s_perc, s_av]),
        ));
    }
    checks
}

fn tree_bounds(master: u64) -> Vec<Check> {
    let g = GraphKind::RegularTree(5);
    let n = 10_000;
    let hits = |p: f64, seed: u64| {
        run_trials(seed, n, |_, rng| run_with_engine(Engine::Classic, g, th(p), caps(10_000, u64::MAX), rng).status)
            .into_iter()
            .filter(|s| *s != AvalancheStatus::Died)
            .count() as u64
    };
    let (s_low, s_high) = (seed_for(master, 8, 0), seed_for(master, 8, 1));
    let low = hits(0.15, s_low);
    let high = hits(0.30, s_high);
    let fraction = high as f64 / n as f64;
    vec![
        Check::pass(count("cap_hits_p_0.15", low).with_seeds([s_low]).with("trials", n)),
        Check::pass(
            TestReport::new("cap_hit_shortfall_p_0.30", 0.01 - fraction, 0.0)
                .with_seeds([s_high])
                .with("cap_hits", high)
                .with("trials", n),
        ),
    ]
}

fn engine_equivalence(master: u64) -> Vec<Check> {
    let g = GraphKind::Cycle(20);
    let n = 100_000;
    let ranges = |engine, seed| -> Vec<u64> {
        run_trials(seed, n, |_, rng| run_with_engine(engine, g, th(0.3), caps(1000, 10_000_000), rng).range as u64)
    };
    let (s_c, s_f) = (seed_for(master, 9, 0), seed_for(master, 9, 1));
    let (classic, forgetful) = (ranges(Engine::Classic, s_c), ranges(Engine::Forgetful, s_f));
    vec![Check::pass(
        equivalence_test(&classic, &forgetful, SIGNIFICANCE)
            .expect("nonempty samples")
            .renamed("classic_vs_forgetful_range")
            .with_seeds([s_c, s_f]),
    )]
}

fn uniformity(master: u64) -> Vec<Check> {
    let bounds = [0.2, 0.3, 0.6];
    let (s, s_skip) = (seed_for(master, 10, 0), seed_for(master, 10, 1));
    let good = uniformity_test(100_000, &bounds, s, false, SIGNIFICANCE).expect("valid input");
    let skip = uniformity_test(100_000, &bounds, s_skip, true, SIGNIFICANCE).expect("valid input");
    let mut checks: Vec<Check> = good.reports().cloned().map(Check::pass).collect();
    checks.push(Check::fail(skip.ks.renamed("ks_uniform_skip_resample")));
    checks
}

pub fn run_criterion(id: u32, master: u64) -> CriterionResult {
    let checks = match id {
        1 => g_check(master, 1, 0.0, 0.005),
        2 => g_check(master, 2, 0.2, 0.006),
        3 => percolation_identity(master),
        4 => domination_assertions(master),
        5 => closing_assertions(master),
        6 => branching(master),
        7 => dominance(master),
        8 => tree_bounds(master),
        9 => engine_equivalence(master),
        10 => uniformity(master),
        _ => panic!("unknown criterion {id}"),
    };
    CriterionResult { id, title: title(id), passed: checks.iter().all(Check::ok), checks }
}

pub fn run_all(master: u64) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, master)).collect()
}
