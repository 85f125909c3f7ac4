//! p-avalanches of the Bak-Sneppen model.
//!
//! Two engines produce avalanches with the same law:
//!
//! * [`AvalancheState`] is the forgetful engine. It never remembers a
//!   fitness; each tracked vertex only carries the parameter `y` of its
//!   current law, uniform on `(y, 1)`. Every step samples all tracked
//!   vertices, fixes the minimum, and conditions the rest on exceeding it.
//! * [`ClassicAvalanche`] keeps realized fitnesses and a heap of the active
//!   ones. It is the fast path for long runs.
//!
//! Both engines perform the forced first update on construction: the origin
//! is minimal by definition, so it and its neighbors are refreshed before
//! any sampling of the origin takes place.

mod classic;
mod cycle;
mod forgetful;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use classic::{run_classic_avalanche, ClassicAvalanche};
pub use cycle::{run_classic_bs, CycleBakSneppen, FitnessHistogram};
pub use forgetful::{init_avalanche, run_avalanche, AvalancheState};

use crate::graph::VertexId;
use crate::params::Caps;

/// What one avalanche step observed.
#[derive(Debug, Clone, PartialEq)]
pub enum StepEvent {
    /// The minimum `fitness` sat at `vertex` and was at most `p`. `uniform`
    /// is the variate that realized it.
    Minimal { vertex: VertexId, fitness: f64, uniform: f64 },
    /// Every fitness exceeded `p`. The minimum is unknown in trimmed mode.
    Terminated { minimum: Option<f64> },
}

impl StepEvent {
    pub fn is_terminated(&self) -> bool {
        matches!(self, StepEvent::Terminated { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvalancheStatus {
    Died,
    RangeCapHit,
    StepCapHit,
}

impl AvalancheStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AvalancheStatus::Died => "died",
            AvalancheStatus::RangeCapHit => "range_cap_hit",
            AvalancheStatus::StepCapHit => "step_cap_hit",
        }
    }
}

impl fmt::Display for AvalancheStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvalancheOutcome {
    pub status: AvalancheStatus,
    /// Number of distinct vertices ever updated.
    pub range: usize,
    pub steps: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_set: Option<Vec<VertexId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Classic,
    #[default]
    Forgetful,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Classic => "classic",
            Engine::Forgetful => "forgetful",
        })
    }
}

impl FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(Engine::Classic),
            "forgetful" => Ok(Engine::Forgetful),
            other => Err(format!("unknown engine {other:?} (expected classic or forgetful)")),
        }
    }
}

/// Common surface of the two avalanche engines.
pub trait AvalancheEngine {
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepEvent;
    fn range(&self) -> usize;
    fn steps(&self) -> u64;
    /// Range set in canonical vertex order.
    fn range_set(&self) -> Vec<VertexId>;
}

/// Steps `engine` until it dies or hits a cap.
pub fn drive<E, R>(engine: &mut E, caps: Caps, rng: &mut R, keep_range_set: bool) -> AvalancheOutcome
where
    E: AvalancheEngine,
    R: Rng + ?Sized,
{
    let status = loop {
        if engine.range() >= caps.range {
            break AvalancheStatus::RangeCapHit;
        }
        if engine.steps() >= caps.steps {
            break AvalancheStatus::StepCapHit;
        }
        if engine.step(rng).is_terminated() {
            break AvalancheStatus::Died;
        }
    };
    AvalancheOutcome {
        status,
        range: engine.range(),
        steps: engine.steps(),
        range_set: keep_range_set.then(|| engine.range_set()),
    }
}

/// Runs one avalanche from the graph origin with the chosen engine.
pub fn run_with_engine<R: Rng + ?Sized>(
    engine: Engine,
    graph: crate::graph::GraphKind,
    p: crate::params::Threshold,
    caps: Caps,
    rng: &mut R,
) -> AvalancheOutcome {
    let origin = graph.origin();
    match engine {
        Engine::Forgetful => run_avalanche(graph, p, &origin, caps, rng),
        Engine::Classic => run_classic_avalanche(graph, p, &origin, caps, rng),
    }
}
