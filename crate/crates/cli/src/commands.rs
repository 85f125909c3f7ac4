use avalanche_core::avalanche::{run_classic_bs, AvalancheState};
use avalanche_core::coupling::{estimate_g, CouplingOptions};
use avalanche_core::percolation::branching_total_progeny;
use avalanche_core::stats::{contradicts, monotonicity_violations, sweep, uniformity_test};
use avalanche_core::{
    drive, grow_cluster, run_coupled, run_trials, run_with_engine, trial_rng, CouplingError, Engine, GraphKind,
    TestReport,
};
use serde::Serialize;
use serde_json::{json, Map};

use crate::config::{Command, RunConfig};
use crate::output::{write_document, write_rows};
use crate::suite;
use crate::CliError;

#[derive(Debug, Serialize)]
struct AvalancheRow {
    run_id: u64,
    seed: u64,
    graph: GraphKind,
    p: f64,
    engine: Engine,
    status: &'static str,
    range: usize,
    steps: u64,
}

#[derive(Debug, Serialize)]
struct HistogramRow {
    bin_lo: f64,
    bin_hi: f64,
    mass: f64,
}

#[derive(Debug, Serialize)]
struct PercolationRow {
    run_id: u64,
    seed: u64,
    graph: GraphKind,
    p: f64,
    status: &'static str,
    cluster_size: usize,
    range: usize,
}

#[derive(Debug, Serialize)]
struct BranchingRow {
    run_id: u64,
    seed: u64,
    n: u32,
    p: f64,
    status: &'static str,
    total_progeny: u64,
    generations: u32,
}

#[derive(Debug, Serialize)]
struct CoupledRow {
    run_id: u64,
    seed: u64,
    graph: GraphKind,
    p: f64,
    av_status: &'static str,
    av_range: usize,
    av_steps: u64,
    perc_status: &'static str,
    cluster_size: usize,
    perc_range: usize,
    both_neighbors_closed: bool,
}

#[derive(Debug, Serialize)]
struct GCheckRow {
    x: f64,
    p: f64,
    trials: u64,
    both_closed: u64,
    unresolved: u64,
    estimate: f64,
    ci_low: f64,
    ci_high: f64,
    target: f64,
    tol: f64,
    verdict: &'static str,
}

#[derive(Debug, Serialize)]
struct ReportRow<'a> {
    name: &'a str,
    statistic: f64,
    threshold: f64,
    verdict: String,
}

impl<'a> From<&'a TestReport> for ReportRow<'a> {
    fn from(r: &'a TestReport) -> Self {
        ReportRow { name: &r.name, statistic: r.statistic, threshold: r.threshold, verdict: r.verdict.to_string() }
    }
}

fn failure(msg: impl Into<String>) -> CliError {
    CliError::Failed(msg.into())
}

pub fn execute(command: &Command, config: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Avalanche(_) => avalanche(config),
        Command::Classic(_) => classic(config),
        Command::Percolation(_) => percolation(config),
        Command::Branching(_) => branching(config),
        Command::Couple(_) => couple(config),
        Command::Sweep(_) => run_sweep(config),
        Command::Verify(_) => verify(config),
        Command::GCheck(_) => g_check(config),
        Command::Uniformity(_) => uniformity(config),
    }
}

fn avalanche(config: &RunConfig) -> Result<(), CliError> {
    let p = config.threshold()?;
    let (graph, caps, engine) = (config.graph, config.caps(), config.engine);
    if config.trim && engine != Engine::Forgetful {
        return Err(CliError::Usage("--trim applies to the forgetful engine only".into()));
    }
    let rows = run_trials(config.seed, config.trials, |ctx, rng| {
        let out = if config.trim {
            let origin = graph.origin();
            let mut state = AvalancheState::new(graph, p, &origin).expect("origin is a vertex").with_trimming(true);
            drive(&mut state, caps, rng, false)
        } else {
            run_with_engine(engine, graph, p, caps, rng)
        };
        AvalancheRow {
            run_id: ctx.index,
            seed: ctx.seed,
            graph,
            p: p.get(),
            engine,
            status: out.status.as_str(),
            range: out.range,
            steps: out.steps,
        }
    });
    write_rows(config, &rows, Map::new())
}

fn classic(config: &RunConfig) -> Result<(), CliError> {
    let mut rng = trial_rng(config.seed, 0);
    let hist = run_classic_bs(config.n, config.burn_in, config.measure, config.bins, &mut rng)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let rows: Vec<HistogramRow> = hist.rows().map(|(bin_lo, bin_hi, mass)| HistogramRow { bin_lo, bin_hi, mass }).collect();
    write_rows(config, &rows, Map::new())
}

fn percolation(config: &RunConfig) -> Result<(), CliError> {
    let p = config.threshold()?;
    let graph = config.graph;
    let rows = run_trials(config.seed, config.trials, |ctx, rng| {
        let out = grow_cluster(graph, p, config.range_cap, rng);
        PercolationRow {
            run_id: ctx.index,
            seed: ctx.seed,
            graph,
            p: p.get(),
            status: out.status.as_str(),
            cluster_size: out.cluster_size,
            range: out.range,
        }
    });
    write_rows(config, &rows, Map::new())
}

fn branching(config: &RunConfig) -> Result<(), CliError> {
    let p = config.threshold()?.get();
    let n = config.offspring;
    if n == 0 {
        return Err(CliError::Usage("--offspring must be at least 1".into()));
    }
    let rows = run_trials(config.seed, config.trials, |ctx, rng| {
        let out = branching_total_progeny(n as u64, p, config.range_cap as u64, rng).expect("validated parameters");
        BranchingRow {
            run_id: ctx.index,
            seed: ctx.seed,
            n,
            p,
            status: if out.cap_hit { "cap_hit" } else { "extinct" },
            total_progeny: out.total_progeny,
            generations: out.generations,
        }
    });
    write_rows(config, &rows, Map::new())
}

fn couple(config: &RunConfig) -> Result<(), CliError> {
    let p = config.threshold()?;
    if config.trim {
        return Err(CliError::Usage("the coupling needs the untrimmed avalanche; drop --trim".into()));
    }
    let graph = config.graph;
    let options = CouplingOptions { assertions: config.assertions, early_close: config.early_close };
    let results = run_trials(config.seed, config.trials, |ctx, rng| {
        run_coupled(graph, p, config.caps(), options, rng).map(|(av, perc)| CoupledRow {
            run_id: ctx.index,
            seed: ctx.seed,
            graph,
            p: p.get(),
            av_status: av.status.as_str(),
            av_range: av.range,
            av_steps: av.steps,
            perc_status: perc.status.as_str(),
            cluster_size: perc.cluster_size,
            perc_range: perc.range,
            both_neighbors_closed: perc.origin_neighbors_closed,
        })
    });
    let mut rows = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(row) => rows.push(row),
            Err(e @ (CouplingError::DominationViolated { .. } | CouplingError::ExtremalNotClosed { .. })) => {
                return Err(failure(format!("run {i}: {e}")));
            }
            Err(e) => return Err(CliError::Usage(e.to_string())),
        }
    }
    write_rows(config, &rows, Map::new())
}

fn run_sweep(config: &RunConfig) -> Result<(), CliError> {
    let grid = config.p_grid.as_deref().ok_or_else(|| CliError::Usage("sweep needs --p-grid".into()))?;
    let result = sweep(config.survival_process(), config.graph, grid, config.trials, config.caps(), config.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut extra = Map::new();
    extra.insert("bracket".into(), json!(result.bracket));
    let violations = monotonicity_violations(&result.points);
    extra.insert("monotonicity_violations".into(), json!(violations));
    if let (GraphKind::RegularTree(d), avalanche_core::stats::Process::Avalanche { .. }) =
        (config.graph, config.survival_process())
    {
        let (lower, upper) = (1.0 / (d as f64 + 1.0), 1.0 / (d as f64 - 1.0));
        extra.insert("bracket_contradicts_tree_bounds".into(), json!(contradicts(&result.bracket, lower, upper)));
    }
    eprintln!(
        "bracket: p_low = {}, p_high = {}",
        result.bracket.p_low.map_or("none".into(), |p| p.to_string()),
        result.bracket.p_high.map_or("none".into(), |p| p.to_string())
    );
    write_rows(config, &result.points, extra)
}

fn verify(config: &RunConfig) -> Result<(), CliError> {
    let results = suite::run_all(config.seed);
    for r in &results {
        eprintln!("criterion {:>2} {}: {}", r.id, if r.passed { "PASS" } else { "FAIL" }, r.title);
    }
    let passed = results.iter().all(|r| r.passed);
    let mut body = Map::new();
    body.insert("passed".into(), json!(passed));
    body.insert("criteria".into(), json!(results));
    write_document(config, body)?;
    if passed {
        Ok(())
    } else {
        Err(failure("verification suite failed"))
    }
}

fn g_check(config: &RunConfig) -> Result<(), CliError> {
    let p = config.threshold()?;
    let options = CouplingOptions { assertions: config.assertions, early_close: config.early_close };
    let est = estimate_g(config.x, p, config.trials, config.seed, options).map_err(|e| match e {
        CouplingError::DominationViolated { .. } | CouplingError::ExtremalNotClosed { .. } => failure(e.to_string()),
        other => CliError::Usage(other.to_string()),
    })?;
    // about 3.6 standard errors unless given
    let tol = config
        .tol
        .unwrap_or_else(|| 3.6 * (est.target * (1.0 - est.target) / est.trials as f64).sqrt());
    let pass = (est.estimate - est.target).abs() <= tol && est.unresolved == 0;
    eprintln!(
        "g({}) at p = {}: estimate {:.6} [{:.6}, {:.6}], target {:.6}, {}",
        est.x,
        est.p,
        est.estimate,
        est.ci_low,
        est.ci_high,
        est.target,
        if pass { "pass" } else { "fail" }
    );
    let row = GCheckRow {
        x: est.x,
        p: est.p,
        trials: est.trials,
        both_closed: est.both_closed,
        unresolved: est.unresolved,
        estimate: est.estimate,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
        target: est.target,
        tol,
        verdict: if pass { "pass" } else { "fail" },
    };
    write_rows(config, &[row], Map::new())?;
    if pass {
        Ok(())
    } else {
        Err(failure("g-check outside tolerance"))
    }
}

fn uniformity(config: &RunConfig) -> Result<(), CliError> {
    let result = uniformity_test(config.trials, &config.bounds, config.seed, config.skip_resample, config.significance)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let rows: Vec<ReportRow> = result.reports().map(ReportRow::from).collect();
    write_rows(config, &rows, Map::new())?;
    if result.passed() {
        Ok(())
    } else {
        Err(failure("reconstructed sample does not look i.i.d. uniform"))
    }
}
