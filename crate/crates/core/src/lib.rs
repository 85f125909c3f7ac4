//! Bak-Sneppen avalanches on infinite graphs, the forgetful reformulation,
//! and the coupling that dominates a site-percolation cluster by an
//! avalanche range.
//!
//! ```
//! use avalanche_core::{run_with_engine, trial_rng, Caps, Engine, GraphKind, Threshold};
//!
//! let graph: GraphKind = "tree:5".parse().unwrap();
//! let p = Threshold::new(0.15).unwrap();
//! let caps = Caps::new(10_000, 1_000_000).unwrap();
//! let out = run_with_engine(Engine::Forgetful, graph, p, caps, &mut trial_rng(7, 0));
//! assert!(out.range >= 6);
//! ```

pub mod avalanche;
pub mod coupling;
pub mod graph;
pub mod params;
pub mod percolation;
pub mod rng;
pub mod stats;
pub mod trials;

pub use avalanche::{
    drive, run_avalanche, run_classic_avalanche, run_with_engine, AvalancheEngine, AvalancheOutcome, AvalancheState,
    AvalancheStatus, ClassicAvalanche, Engine, StepEvent,
};
pub use coupling::{estimate_g, run_coupled, CoupledState, CoupledVertex, CouplingError, CouplingOptions, GEstimate};
pub use graph::{GraphError, GraphKind, VertexId};
pub use params::{Caps, FitnessBound, ParamError, Threshold};
pub use percolation::{grow_cluster, PercOutcome, PercStatus};
pub use rng::{stream_seed, trial_rng, TrialRng};
pub use stats::{SurvivalPoint, TestReport, Verdict};
pub use trials::{run_trials, TrialContext};
