use serde::{Deserialize, Serialize};

use super::interval::wilson_interval;
use crate::avalanche::{run_with_engine, AvalancheStatus, Engine};
use crate::graph::GraphKind;
use crate::params::{Caps, ParamError, Threshold};
use crate::percolation::{branching_total_progeny, grow_cluster, PercStatus};
use crate::rng::stream_seed;
use crate::trials::run_trials;

/// Which process a survival estimate runs. A trial "survives" when it
/// reaches the range cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Process {
    Avalanche { engine: Engine },
    Percolation,
    /// Galton-Watson with Binomial(`offspring`, p) children; the graph is
    /// ignored and the range cap bounds the total progeny.
    Branching { offspring: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub p: f64,
    pub trials: u64,
    pub survived: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mean range over the trials that died; `None` if none did.
    pub mean_range: Option<f64>,
    /// Mean steps over the trials that died: avalanche updates, sites
    /// examined, or generations.
    pub mean_steps: Option<f64>,
}

impl SurvivalPoint {
    pub fn rate(&self) -> f64 {
        self.survived as f64 / self.trials as f64
    }
}

/// `(survived, range, steps)` of one trial.
fn survival_trial<R: rand::Rng + ?Sized>(
    process: Process,
    graph: GraphKind,
    p: Threshold,
    caps: Caps,
    rng: &mut R,
) -> Result<(bool, u64, u64), ParamError> {
    Ok(match process {
        Process::Avalanche { engine } => {
            let out = run_with_engine(engine, graph, p, caps, rng);
            (out.status != AvalancheStatus::Died, out.range as u64, out.steps)
        }
        Process::Percolation => {
            let out = grow_cluster(graph, p, caps.range, rng);
            (out.status != PercStatus::ClosedOut, out.range as u64, out.range as u64 - 1)
        }
        Process::Branching { offspring } => {
            let out = branching_total_progeny(offspring as u64, p.get(), caps.range as u64, rng)?;
            (out.cap_hit, out.total_progeny, out.generations as u64)
        }
    })
}

/// Runs `trials` independent trials on streams `(master_seed, i)`.
///
/// Avalanches stopped by the step cap count as survivors as well, since
/// they were still alive when stopped.
pub fn estimate_survival(
    process: Process,
    graph: GraphKind,
    p: Threshold,
    trials: u64,
    caps: Caps,
    master_seed: u64,
) -> Result<SurvivalPoint, ParamError> {
    if trials == 0 {
        return Err(ParamError::Invalid("need at least one trial".into()));
    }
    if let Process::Branching { offspring: 0 } = process {
        return Err(ParamError::Invalid("offspring distribution needs n >= 1".into()));
    }
    let results = run_trials(master_seed, trials, |_, rng| survival_trial(process, graph, p, caps, rng));
    let mut survived = 0;
    let (mut died, mut range_sum, mut steps_sum) = (0u64, 0f64, 0f64);
    for r in results {
        let (alive, range, steps) = r?;
        if alive {
            survived += 1;
        } else {
            died += 1;
            range_sum += range as f64;
            steps_sum += steps as f64;
        }
    }
    let (ci_low, ci_high) = wilson_interval(survived, trials, 0.95);
    let mean = |sum: f64| (died > 0).then(|| sum / died as f64);
    Ok(SurvivalPoint {
        p: p.get(),
        trials,
        survived,
        mean_range: mean(range_sum),
        mean_steps: mean(steps_sum),
        ci_low,
        ci_high,
    })
}

/// Empirical location of the survival transition on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    /// Largest grid point whose survival interval still reaches 0.
    pub p_low: Option<f64>,
    /// Smallest grid point whose survival interval excludes 0.
    pub p_high: Option<f64>,
}

pub fn bracket(points: &[SurvivalPoint]) -> Bracket {
    Bracket {
        p_low: points.iter().filter(|s| s.ci_low == 0.0).map(|s| s.p).reduce(f64::max),
        p_high: points.iter().filter(|s| s.ci_low > 0.0).map(|s| s.p).reduce(f64::min),
    }
}

/// Whether the bracket is incompatible with a critical value known to lie
/// in `[lower, upper]`: survival seen strictly below `lower`, or none seen
/// strictly above `upper`.
pub fn contradicts(b: &Bracket, lower: f64, upper: f64) -> bool {
    b.p_high.is_some_and(|p| p < lower) || b.p_low.is_some_and(|p| p > upper)
}

/// Indices `i` where survival drops from point `i - 1` to point `i` by more
/// than three pooled standard errors.
pub fn monotonicity_violations(points: &[SurvivalPoint]) -> Vec<usize> {
    (1..points.len())
        .filter(|&i| {
            let (a, b) = (&points[i - 1], &points[i]);
            let drop = a.rate() - b.rate();
            let pooled = (a.survived + b.survived) as f64 / (a.trials + b.trials) as f64;
            let se = (pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64)).sqrt();
            drop > 3.0 * se
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SurvivalPoint>,
    pub bracket: Bracket,
}

/// Survival curve over a strictly increasing grid. Point `i` uses master
/// seed `stream_seed(master_seed, i)`.
pub fn sweep(
    process: Process,
    graph: GraphKind,
    grid: &[f64],
    trials: u64,
    caps: Caps,
    master_seed: u64,
) -> Result<SweepResult, ParamError> {
    if grid.is_empty() {
        return Err(ParamError::Invalid("empty p grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ParamError::Invalid("p grid must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for (i, &p) in grid.iter().enumerate() {
        let p = Threshold::new(p)?;
        points.push(estimate_survival(process, graph, p, trials, caps, stream_seed(master_seed, i as u64))?);
    }
    let bracket = bracket(&points);
    Ok(SweepResult { points, bracket })
}
