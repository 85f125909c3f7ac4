//! Command-line flags, the JSON config file that mirrors them, and the
//! resolved run configuration echoed into every output.

use std::fs;
use std::path::PathBuf;

use avalanche_core::stats::Process;
use avalanche_core::{Caps, Engine, GraphKind, Threshold};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "AVALANCHE_LAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "avalanche-lab", version, about = "Bak-Sneppen avalanche and site-percolation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run p-avalanches from the origin.
    Avalanche(Options),
    /// Run the circle model and emit its marginal fitness histogram.
    Classic(Options),
    /// Grow site-percolation clusters at the origin.
    Percolation(Options),
    /// Simulate Galton-Watson trees with binomial offspring.
    Branching(Options),
    /// Run the avalanche-driven percolation coupling.
    Couple(Options),
    /// Estimate survival probabilities over a grid of p.
    Sweep(Options),
    /// Run the bundled verification suite.
    Verify(Options),
    /// Estimate the probability that both neighbors of the origin on Z close.
    GCheck(Options),
    /// Test the reconstruction of uniforms from a conditioned minimum.
    Uniformity(Options),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Avalanche(_) => "avalanche",
            Command::Classic(_) => "classic",
            Command::Percolation(_) => "percolation",
            Command::Branching(_) => "branching",
            Command::Couple(_) => "couple",
            Command::Sweep(_) => "sweep",
            Command::Verify(_) => "verify",
            Command::GCheck(_) => "g-check",
            Command::Uniformity(_) => "uniformity",
        }
    }

    pub fn options(&self) -> &Options {
        match self {
            Command::Avalanche(o)
            | Command::Classic(o)
            | Command::Percolation(o)
            | Command::Branching(o)
            | Command::Couple(o)
            | Command::Sweep(o)
            | Command::Verify(o)
            | Command::GCheck(o)
            | Command::Uniformity(o) => o,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    #[default]
    Avalanche,
    Percolation,
    Branching,
}

/// Flags shared by every subcommand. Unset values fall back to the config
/// file, then to per-command defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Graph: zd:<d>, tree:<degree>, cycle:<n> or treestar:<n>.
    #[arg(long)]
    pub graph: Option<String>,
    /// Avalanche threshold, or the open-site probability for percolation.
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated values or lo:hi:step.
    #[arg(long)]
    pub p_grid: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub range_cap: Option<usize>,
    #[arg(long)]
    pub step_cap: Option<u64>,
    /// Master seed; falls back to the config file, then AVALANCHE_LAB_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_engine)]
    pub engine: Option<Engine>,
    /// Skip the coupling's domination checks.
    #[arg(long)]
    pub no_assert: bool,
    /// Evict forgetful-engine vertices whose bound exceeds p.
    #[arg(long)]
    pub trim: bool,
    /// Close extremal vertices as soon as their bound exceeds p.
    #[arg(long)]
    pub early_close: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; never changes the output.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON file with the same keys as the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Draw a fresh master seed from OS entropy and record it.
    #[arg(long)]
    pub reseed: bool,
    /// Initial bound of the origin's neighbors (g-check).
    #[arg(long)]
    pub x: Option<f64>,
    /// Binomial offspring trials per individual (branching).
    #[arg(long)]
    pub offspring: Option<u32>,
    /// Comma-separated bounds (uniformity).
    #[arg(long)]
    pub bounds: Option<String>,
    /// Number of species on the circle (classic).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long)]
    pub measure: Option<u64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_enum)]
    pub process: Option<ProcessKind>,
    /// Leave conditioned coordinates unresampled (uniformity negative control).
    #[arg(long)]
    pub skip_resample: bool,
    /// Tolerance of the g-check verdict.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub significance: Option<f64>,
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    s.parse()
}

/// Config file contents. Keys are the long flag names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub graph: Option<String>,
    pub p: Option<f64>,
    pub p_grid: Option<NumberList>,
    pub trials: Option<u64>,
    pub range_cap: Option<usize>,
    pub step_cap: Option<u64>,
    pub seed: Option<u64>,
    pub engine: Option<Engine>,
    pub no_assert: Option<bool>,
    pub trim: Option<bool>,
    pub early_close: Option<bool>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
    pub x: Option<f64>,
    pub offspring: Option<u32>,
    pub bounds: Option<NumberList>,
    pub n: Option<usize>,
    pub burn_in: Option<u64>,
    pub measure: Option<u64>,
    pub bins: Option<usize>,
    pub process: Option<ProcessKind>,
    pub skip_resample: Option<bool>,
    pub tol: Option<f64>,
    pub significance: Option<f64>,
}

/// Numbers given either as a JSON array or in flag syntax.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NumberList {
    List(Vec<f64>),
    Text(String),
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fully resolved settings of one invocation. Serialized into every output
/// header; `jobs` and `out` are left out so that neither affects the bytes
/// of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub graph: GraphKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<f64>>,
    pub trials: u64,
    pub range_cap: usize,
    pub step_cap: u64,
    pub seed: u64,
    pub engine: Engine,
    pub assertions: bool,
    pub trim: bool,
    pub early_close: bool,
    pub format: Format,
    pub x: f64,
    pub offspring: u32,
    pub bounds: Vec<f64>,
    pub n: usize,
    pub burn_in: u64,
    pub measure: u64,
    pub bins: usize,
    pub process: ProcessKind,
    pub skip_resample: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub significance: f64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

pub fn parse_graph_spec(s: &str) -> Result<GraphKind, CliError> {
    s.parse::<GraphKind>().map_err(|e| CliError::Usage(e.to_string()))
}

/// Parses `a,b,c` into numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("not a number: {t:?}"))))
        .collect()
}

/// Parses `a,b,c` or `lo:hi:step` (both ends included).
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [_] => parse_list(s),
        [lo, hi, step] => {
            let num = |t: &str| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("not a number: {t:?}")));
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if step <= 0.0 || step.is_nan() || hi < lo {
                return Err(CliError::Usage(format!("bad grid {s:?}: need lo <= hi and step > 0")));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            // round away accumulated binary noise so the grid echoes cleanly
            Ok((0..count).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect())
        }
        _ => Err(CliError::Usage(format!("bad grid {s:?}: expected a,b,c or lo:hi:step"))),
    }
}

/// Per-command default trial counts.
fn default_trials(command: &str) -> u64 {
    match command {
        "g-check" | "uniformity" => 100_000,
        _ => 1000,
    }
}

impl RunConfig {
    /// Merges flags over the config file over defaults. `env_seed` is the
    /// value of the seed environment variable, if set.
    pub fn resolve(command: &Command, env_seed: Option<&str>) -> Result<Self, CliError> {
        let flags = command.options();
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let name = command.name();

        let graph = parse_graph_spec(flags.graph.as_deref().or(file.graph.as_deref()).unwrap_or("zd:1"))?;
        let p = flags.p.or(file.p);
        if let Some(p) = p {
            Threshold::new(p).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        let p_grid = match (&flags.p_grid, file.p_grid) {
            (Some(s), _) => Some(parse_grid(s)?),
            (None, Some(NumberList::List(l))) => Some(l),
            (None, Some(NumberList::Text(t))) => Some(parse_grid(&t)?),
            (None, None) => None,
        };
        let bounds = match (&flags.bounds, file.bounds) {
            (Some(s), _) => parse_list(s)?,
            (None, Some(NumberList::List(l))) => l,
            (None, Some(NumberList::Text(t))) => parse_list(&t)?,
            (None, None) => vec![0.2, 0.3, 0.6],
        };

        let seed = if flags.reseed {
            avalanche_core::rng::entropy_seed()
        } else if let Some(s) = flags.seed.or(file.seed) {
            s
        } else if let Some(s) = env_seed {
            s.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?
        } else {
            0
        };

        let config = RunConfig {
            command: name.to_string(),
            graph,
            p,
            p_grid,
            trials: flags.trials.or(file.trials).unwrap_or_else(|| default_trials(name)),
            range_cap: flags.range_cap.or(file.range_cap).unwrap_or(10_000),
            step_cap: flags.step_cap.or(file.step_cap).unwrap_or(10_000_000),
            seed,
            engine: flags.engine.or(file.engine).unwrap_or_default(),
            assertions: !(flags.no_assert || file.no_assert.unwrap_or(false)),
            trim: flags.trim || file.trim.unwrap_or(false),
            early_close: flags.early_close || file.early_close.unwrap_or(false),
            format: flags.format.or(file.format).unwrap_or(if name == "verify" { Format::Json } else { Format::Csv }),
            x: flags.x.or(file.x).unwrap_or(0.0),
            offspring: flags.offspring.or(file.offspring).unwrap_or(2),
            bounds,
            n: flags.n.or(file.n).unwrap_or(200),
            burn_in: flags.burn_in.or(file.burn_in).unwrap_or(1_000_000),
            measure: flags.measure.or(file.measure).unwrap_or(1_000_000),
            bins: flags.bins.or(file.bins).unwrap_or(20),
            process: flags.process.or(file.process).unwrap_or_default(),
            skip_resample: flags.skip_resample || file.skip_resample.unwrap_or(false),
            tol: flags.tol.or(file.tol),
            significance: flags.significance.or(file.significance).unwrap_or(0.01),
            out: flags.out.clone().or(file.out),
            jobs: flags.jobs.or(file.jobs),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.trials == 0 {
            return usage("--trials must be at least 1".into());
        }
        if self.jobs == Some(0) {
            return usage("--jobs must be at least 1".into());
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return usage(format!("--significance {} must lie in (0, 1)", self.significance));
        }
        Caps::new(self.range_cap, self.step_cap).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn caps(&self) -> Caps {
        Caps::new(self.range_cap, self.step_cap).expect("validated")
    }

    /// The threshold, required by most commands.
    pub fn threshold(&self) -> Result<Threshold, CliError> {
        let p = self.p.ok_or_else(|| CliError::Usage(format!("{} needs --p", self.command)))?;
        Threshold::new(p).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn survival_process(&self) -> Process {
        match self.process {
            ProcessKind::Avalanche => Process::Avalanche { engine: self.engine },
            ProcessKind::Percolation => Process::Percolation,
            ProcessKind::Branching => Process::Branching { offspring: self.offspring },
        }
    }

    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
