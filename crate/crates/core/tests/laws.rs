//! Distributional checks against oracles computed here from first
//! principles, independently of the library's own closed forms.

use avalanche_core::percolation::branching_total_progeny;
use avalanche_core::stats::{chi_square_gof, equivalence_test, wilson_interval};
use avalanche_core::{grow_cluster, run_trials, run_with_engine, Caps, Engine, GraphKind, Threshold};

const ALPHA: f64 = 0.001;

fn binomial_pmf(n: u64, p: f64, j: u64) -> f64 {
    if j > n {
        return 0.0;
    }
    let ln_choose: f64 = (1..=j).map(|i| ((n - j + i) as f64 / i as f64).ln()).sum();
    (ln_choose + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp()
}

/// Total progeny of a Galton-Watson tree with Binomial(m, p) offspring,
/// by the hitting-time identity `P(T = k) = P(S_k = k - 1) / k`.
fn total_progeny_pmf(m: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    binomial_pmf(m * k, p, k - 1) / k as f64
}

/// Origin cluster on Z: one open site plus two independent geometric runs.
fn z_cluster_pmf(p: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let run = |a: u64| p.powi(a as i32) * (1.0 - p);
    (0..k).map(|a| run(a) * run(k - 1 - a)).sum()
}

#[test]
fn oracles_are_normalized() {
    let z: f64 = (1..400).map(|k| z_cluster_pmf(0.4, k)).sum();
    let gw: f64 = (1..400).map(|k| total_progeny_pmf(2, 0.3, k)).sum();
    assert!((z - 1.0).abs() < 1e-12, "{z}");
    assert!((gw - 1.0).abs() < 1e-12, "{gw}");
}

#[test]
fn z_cluster_sizes_follow_two_geometric_runs() {
    let graph = GraphKind::lattice(1).unwrap();
    let p = Threshold::new(0.45).unwrap();
    let sizes = run_trials(5, 50_000, |_, rng| grow_cluster(graph, p, 100_000, rng).cluster_size as u64);
    let report = chi_square_gof(&sizes, |k| z_cluster_pmf(0.45, k), 1, ALPHA).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn rooted_tree_star_cluster_is_a_galton_watson_tree() {
    // every vertex of T*_3 has two children
    let graph = GraphKind::rooted_tree_star(3).unwrap();
    let p = Threshold::new(0.35).unwrap();
    let sizes = run_trials(6, 50_000, |_, rng| grow_cluster(graph, p, 1_000_000, rng).cluster_size as u64);
    let report = chi_square_gof(&sizes, |k| total_progeny_pmf(2, 0.35, k), 1, ALPHA).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn branching_progeny_matches_hitting_time_law() {
    let sizes = run_trials(7, 50_000, |_, rng| branching_total_progeny(3, 0.25, 1_000_000, rng).unwrap().total_progeny);
    let report = chi_square_gof(&sizes, |k| total_progeny_pmf(3, 0.25, k), 1, ALPHA).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn supercritical_branching_survives_at_the_fixed_point_rate() {
    // q solves q = (1 - p + p q)^2, so q = ((1 - p) / p)^2
    let p: f64 = 0.7;
    let q = ((1.0 - p) / p).powi(2);
    let n = 40_000;
    let survived = run_trials(8, n, |_, rng| branching_total_progeny(2, p, 5_000, rng).unwrap().cap_hit)
        .into_iter()
        .filter(|&s| s)
        .count() as u64;
    let (lo, hi) = wilson_interval(survived, n, 0.999);
    assert!(lo <= 1.0 - q && 1.0 - q <= hi, "{survived}/{n} vs {}", 1.0 - q);
}

#[test]
fn engines_agree_on_a_short_cycle() {
    let graph = GraphKind::cycle(12).unwrap();
    let p = Threshold::new(0.25).unwrap();
    let caps = Caps::new(usize::MAX, 1_000_000).unwrap();
    let ranges = |engine, seed| {
        run_trials(seed, 20_000, |_, rng| run_with_engine(engine, graph, p, caps, rng).range as u64)
    };
    let report = equivalence_test(&ranges(Engine::Classic, 9), &ranges(Engine::Forgetful, 10), ALPHA).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn avalanches_on_tiny_threshold_stop_after_the_forced_update() {
    let p = Threshold::new(1e-12).unwrap();
    let caps = Caps::new(100, 100).unwrap();
    for graph in [GraphKind::lattice(3).unwrap(), GraphKind::regular_tree(4).unwrap(), GraphKind::cycle(5).unwrap()] {
        for engine in [Engine::Classic, Engine::Forgetful] {
            let out = run_trials(11, 50, |_, rng| run_with_engine(engine, graph, p, caps, rng));
            for o in out {
                assert_eq!((o.steps, o.range), (1, graph.max_degree() + 1), "{graph} {engine}");
            }
        }
    }
}
