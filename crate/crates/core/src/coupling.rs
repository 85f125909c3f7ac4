//! The coupled process: a forgetful avalanche on one copy of the graph
//! drives the construction of a site-percolation cluster on a second copy.
//!
//! Each extremal vertex of the cluster side carries a law uniform on
//! `(z, 1)`. Whenever the avalanche fixes a minimum `M` at `K`:
//!
//! 1. every extremal vertex whose counterpart is not `K` learns that its
//!    counterpart's uniform exceeded `(M - y)+ / (1 - y)`, and `z` moves up
//!    accordingly;
//! 2. if `K` itself is extremal, its value is fixed with the same uniform
//!    that realized `M`; at most `p` it opens and its undetermined neighbors
//!    become extremal, otherwise it closes.
//!
//! When the avalanche ends, every remaining extremal vertex is conditioned
//! once more and realized with a fresh uniform; all of them close.
//!
//! The conditioned bound is computed as `M + (1 - M)(z - y)/(1 - y)`, the
//! algebraically equal form of `z + (1 - z)(M - y)/(1 - y)`. With `z >= y`
//! it is never below `M` in floating point either, so the domination checks
//! below can run with zero tolerance.

use indexmap::IndexMap;
use rand::Rng;
use rustc_hash::{FxBuildHasher, FxHashMap};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::avalanche::{AvalancheEngine, AvalancheOutcome, AvalancheState, AvalancheStatus, StepEvent};
use crate::graph::{GraphError, GraphKind, VertexId};
use crate::params::{Caps, ParamError, Threshold};
use crate::percolation::{PercOutcome, PercStatus};
use crate::rng::open01;
use crate::stats::wilson_interval;
use crate::trials::run_trials;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error("extremal vertex {vertex} has z = {z} below its counterpart bound y = {y}")]
    DominationViolated { vertex: VertexId, z: f64, y: f64 },
    #[error("extremal vertex {vertex} finalized at {value}, not above p = {p}")]
    ExtremalNotClosed { vertex: VertexId, value: f64, p: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Cluster-side status of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CoupledVertex {
    Extremal { z: f64 },
    Open { value: f64 },
    /// `value` is `None` when closed early, before realization.
    Closed { value: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingOptions {
    /// Check `z >= y` after every step and `value > p` at finalization.
    pub assertions: bool,
    /// Close extremal vertices as soon as `z > p`.
    pub early_close: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        CouplingOptions { assertions: true, early_close: false }
    }
}

#[derive(Debug, Clone, Copy)]
struct Extremal {
    z: f64,
    /// Index of the counterpart in the (untrimmed) avalanche.
    counterpart: usize,
}

#[derive(Debug, Clone)]
pub struct CoupledState {
    avalanche: AvalancheState,
    extremal: IndexMap<VertexId, Extremal, FxBuildHasher>,
    fixed: FxHashMap<VertexId, CoupledVertex>,
    open_count: usize,
    closed_count: usize,
    options: CouplingOptions,
    terminal_minimum: Option<f64>,
    finalized: bool,
    scratch: Vec<VertexId>,
    snapshot: Vec<f64>,
}

impl CoupledState {
    /// Origin open at 0; its neighbors extremal at `z = 0` on the cluster
    /// side and at bound 0 on the avalanche side.
    pub fn new(graph: GraphKind, p: Threshold, options: CouplingOptions) -> Result<Self, CouplingError> {
        Self::with_neighbor_bound(graph, p, 0.0, options)
    }

    /// Like [`CoupledState::new`] but the origin's neighbors start at
    /// `z = x` on the cluster side only.
    pub fn with_neighbor_bound(
        graph: GraphKind,
        p: Threshold,
        x: f64,
        options: CouplingOptions,
    ) -> Result<Self, CouplingError> {
        if !(0.0..=p.get()).contains(&x) {
            return Err(ParamError::Invalid(format!("initial bound {x} outside [0, p]")).into());
        }
        let origin = graph.origin();
        let avalanche = AvalancheState::new(graph, p, &origin)?;
        let mut state = CoupledState {
            avalanche,
            extremal: IndexMap::default(),
            fixed: FxHashMap::default(),
            open_count: 1,
            closed_count: 0,
            options,
            terminal_minimum: None,
            finalized: false,
            scratch: Vec::new(),
            snapshot: Vec::new(),
        };
        state.fixed.insert(origin.clone(), CoupledVertex::Open { value: 0.0 });
        for n in graph.neighbors(&origin)? {
            let counterpart = state.avalanche.index_of(&n).expect("origin neighbors are tracked");
            state.extremal.insert(n, Extremal { z: x, counterpart });
        }
        state.apply_early_close();
        Ok(state)
    }

    pub fn avalanche(&self) -> &AvalancheState {
        &self.avalanche
    }

    pub fn threshold(&self) -> f64 {
        self.avalanche.threshold().get()
    }

    pub fn status(&self, v: &VertexId) -> Option<CoupledVertex> {
        if let Some(e) = self.extremal.get(v) {
            return Some(CoupledVertex::Extremal { z: e.z });
        }
        self.fixed.get(v).copied()
    }

    /// Extremal vertices with `(z, counterpart y)`.
    pub fn extremal(&self) -> impl Iterator<Item = (&VertexId, f64, f64)> + '_ {
        self.extremal.iter().map(|(v, e)| (v, e.z, self.avalanche.bound_at(e.counterpart)))
    }

    pub fn extremal_len(&self) -> usize {
        self.extremal.len()
    }

    pub fn cluster_size(&self) -> usize {
        self.open_count
    }

    pub fn closed_examined(&self) -> usize {
        self.closed_count
    }

    pub fn open_cluster(&self) -> Vec<VertexId> {
        let mut v: Vec<_> = self
            .fixed
            .iter()
            .filter(|(_, s)| matches!(s, CoupledVertex::Open { .. }))
            .map(|(v, _)| v.clone())
            .collect();
        v.sort();
        v
    }

    /// Open and closed vertices: everything the cluster side has examined.
    pub fn examined(&self) -> Vec<VertexId> {
        let mut v: Vec<_> = self.fixed.keys().cloned().collect();
        v.sort();
        v
    }

    pub fn is_avalanche_finished(&self) -> bool {
        self.terminal_minimum.is_some()
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// True once no cluster vertex can ever be added: the extremal set is
    /// empty.
    pub fn is_closed_out(&self) -> bool {
        self.extremal.is_empty()
    }

    pub fn origin_neighbors_closed(&self) -> bool {
        let origin = self.avalanche.origin();
        self.avalanche
            .graph()
            .neighbors(origin)
            .expect("origin is valid")
            .iter()
            .all(|n| matches!(self.fixed.get(n), Some(CoupledVertex::Closed { .. })))
    }

    pub fn coupled_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepEvent, CouplingError> {
        self.coupled_step_with(|| open01(rng))
    }

    /// Advances the avalanche one step with uniforms from `uniform` and
    /// applies the conditioning rules. On termination the extremal set is
    /// left for [`CoupledState::finalize`].
    pub fn coupled_step_with(&mut self, uniform: impl FnMut() -> f64) -> Result<StepEvent, CouplingError> {
        assert!(!self.is_avalanche_finished(), "stepped after the avalanche ended");
        // counterpart bounds as they were when the step's uniforms are drawn
        self.snapshot.clear();
        self.snapshot.extend(self.extremal.values().map(|e| self.avalanche.bound_at(e.counterpart)));

        let event = self.avalanche.step_with(uniform);
        let (k, m) = match &event {
            StepEvent::Terminated { minimum } => {
                self.terminal_minimum = Some(minimum.expect("untrimmed avalanche reports its minimum"));
                return Ok(event);
            }
            StepEvent::Minimal { vertex, fitness, .. } => (vertex.clone(), *fitness),
        };

        let k_pos = self.extremal.get_index_of(&k);
        for (i, e) in self.extremal.values_mut().enumerate() {
            if Some(i) != k_pos {
                e.z = condition(e.z, self.snapshot[i], m);
            }
        }

        if let Some(pos) = k_pos {
            let y_k = self.snapshot[pos];
            let (_, e) = self.extremal.swap_remove_index(pos).expect("index from get_index_of");
            let value = condition(e.z, y_k, m);
            if value <= self.threshold() {
                self.fixed.insert(k.clone(), CoupledVertex::Open { value });
                self.open_count += 1;
                let graph = self.avalanche.graph();
                graph.neighbors_into(&k, &mut self.scratch)?;
                for n in self.scratch.drain(..) {
                    if self.fixed.contains_key(&n) || self.extremal.contains_key(&n) {
                        continue;
                    }
                    let counterpart = self.avalanche.index_of(&n).expect("neighbors of the minimum are tracked");
                    self.extremal.insert(n, Extremal { z: 0.0, counterpart });
                }
            } else {
                self.fixed.insert(k, CoupledVertex::Closed { value: Some(value) });
                self.closed_count += 1;
            }
        }

        self.apply_early_close();
        if self.options.assertions {
            self.check_domination()?;
        }
        Ok(event)
    }

    fn apply_early_close(&mut self) {
        if !self.options.early_close {
            return;
        }
        let p = self.threshold();
        let doomed: Vec<VertexId> = self.extremal.iter().filter(|(_, e)| e.z > p).map(|(v, _)| v.clone()).collect();
        for v in doomed {
            self.extremal.shift_remove(&v);
            self.fixed.insert(v, CoupledVertex::Closed { value: None });
            self.closed_count += 1;
        }
    }

    /// Every extremal vertex must dominate its counterpart: `z >= y`.
    pub fn check_domination(&self) -> Result<(), CouplingError> {
        for (v, z, y) in self.extremal() {
            if z < y {
                return Err(CouplingError::DominationViolated { vertex: v.clone(), z, y });
            }
        }
        Ok(())
    }

    pub fn finalize<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<PercOutcome, CouplingError> {
        self.finalize_with(|| open01(rng))
    }

    /// Realizes every remaining extremal vertex after the avalanche ended.
    pub fn finalize_with(&mut self, mut uniform: impl FnMut() -> f64) -> Result<PercOutcome, CouplingError> {
        let m = self.terminal_minimum.expect("finalize requires a terminated avalanche");
        let p = self.threshold();
        let extremal = std::mem::take(&mut self.extremal);
        for (v, e) in extremal {
            let y = self.avalanche.bound_at(e.counterpart);
            let z_hat = condition(e.z, y, m);
            let value = z_hat + (1.0 - z_hat) * uniform();
            if self.options.assertions && value <= p {
                return Err(CouplingError::ExtremalNotClosed { vertex: v, value, p });
            }
            if value <= p {
                // only reachable with assertions off; keep the cluster honest
                self.fixed.insert(v, CoupledVertex::Open { value });
                self.open_count += 1;
            } else {
                self.fixed.insert(v, CoupledVertex::Closed { value: Some(value) });
                self.closed_count += 1;
            }
        }
        self.finalized = true;
        Ok(self.perc_outcome(PercStatus::ClosedOut))
    }

    fn perc_outcome(&self, status: PercStatus) -> PercOutcome {
        PercOutcome {
            status,
            cluster_size: self.open_count,
            range: self.open_count + self.closed_count,
            origin_neighbors_closed: self.origin_neighbors_closed(),
        }
    }
}

/// Bound after learning that a uniform realizing `F_y` exceeded `M`, applied
/// to the coupled law `F_z`.
#[inline]
fn condition(z: f64, y: f64, m: f64) -> f64 {
    if m > y {
        m + (1.0 - m) * (z - y) / (1.0 - y)
    } else {
        z
    }
}

/// Runs the coupled process to completion or a cap.
///
/// When a cap stops the avalanche the cluster side reports the same cap,
/// unless its extremal set had already emptied, in which case the cluster
/// is fully determined and reported as closed out.
pub fn run_coupled<R: Rng + ?Sized>(
    graph: GraphKind,
    p: Threshold,
    caps: Caps,
    options: CouplingOptions,
    rng: &mut R,
) -> Result<(AvalancheOutcome, PercOutcome), CouplingError> {
    let mut state = CoupledState::new(graph, p, options)?;
    run_state(&mut state, caps, rng)
}

fn run_state<R: Rng + ?Sized>(
    state: &mut CoupledState,
    caps: Caps,
    rng: &mut R,
) -> Result<(AvalancheOutcome, PercOutcome), CouplingError> {
    let status = loop {
        if state.avalanche.range() >= caps.range {
            break AvalancheStatus::RangeCapHit;
        }
        if state.avalanche.steps() >= caps.steps {
            break AvalancheStatus::StepCapHit;
        }
        if state.coupled_step(rng)?.is_terminated() {
            break AvalancheStatus::Died;
        }
    };
    let avalanche = AvalancheOutcome {
        status,
        range: state.avalanche.range(),
        steps: state.avalanche.steps(),
        range_set: None,
    };
    let perc = match status {
        AvalancheStatus::Died => state.finalize(rng)?,
        _ if state.is_closed_out() => state.perc_outcome(PercStatus::ClosedOut),
        AvalancheStatus::RangeCapHit => state.perc_outcome(PercStatus::RangeCapHit),
        AvalancheStatus::StepCapHit => state.perc_outcome(PercStatus::StepCapHit),
    };
    Ok((avalanche, perc))
}

/// Monte Carlo estimate of the probability that both neighbors of the
/// origin on `Z` end up closed when they start from `F_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub x: f64,
    pub p: f64,
    pub trials: u64,
    pub both_closed: u64,
    /// Trials stopped by the step cap before both neighbors were decided.
    pub unresolved: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `(1 - p)^2 / (1 - x)^2`.
    pub target: f64,
}

/// Outcome of one g-trial: `Some(true)` if both origin neighbors closed.
fn g_trial<R: Rng + ?Sized>(
    p: Threshold,
    x: f64,
    step_cap: u64,
    options: CouplingOptions,
    rng: &mut R,
) -> Result<Option<bool>, CouplingError> {
    let graph = GraphKind::LatticeZd(1);
    let mut state = CoupledState::with_neighbor_bound(graph, p, x, options)?;
    let neighbors = graph.neighbors(&graph.origin())?;
    loop {
        let mut all_closed = true;
        for n in &neighbors {
            match state.status(n) {
                Some(CoupledVertex::Open { .. }) => return Ok(Some(false)),
                Some(CoupledVertex::Closed { .. }) => {}
                _ => all_closed = false,
            }
        }
        if all_closed {
            return Ok(Some(true));
        }
        if state.avalanche.steps() >= step_cap {
            return Ok(None);
        }
        if state.coupled_step(rng)?.is_terminated() {
            let out = state.finalize(rng)?;
            return Ok(Some(out.origin_neighbors_closed));
        }
    }
}

/// Estimates `g_p(x)` on `Z` over `trials` coupled runs, each on its own
/// stream under `master_seed`.
pub fn estimate_g(
    x: f64,
    p: Threshold,
    trials: u64,
    master_seed: u64,
    options: CouplingOptions,
) -> Result<GEstimate, CouplingError> {
    const STEP_CAP: u64 = 10_000_000;
    if !(0.0..=p.get()).contains(&x) {
        return Err(ParamError::Invalid(format!("x = {x} outside [0, p]")).into());
    }
    if trials == 0 {
        return Err(ParamError::Invalid("need at least one trial".into()).into());
    }
    let results = run_trials(master_seed, trials, |_, rng| g_trial(p, x, STEP_CAP, options, rng));
    let mut both_closed = 0;
    let mut unresolved = 0;
    for r in results {
        match r? {
            Some(true) => both_closed += 1,
            Some(false) => {}
            None => unresolved += 1,
        }
    }
    let (ci_low, ci_high) = wilson_interval(both_closed, trials, 0.95);
    Ok(GEstimate {
        x,
        p: p.get(),
        trials,
        both_closed,
        unresolved,
        estimate: both_closed as f64 / trials as f64,
        ci_low,
        ci_high,
        target: g_closed_form(p.get(), x),
    })
}

/// `g_p(x) = (1 - p)^2 / (1 - x)^2`.
pub fn g_closed_form(p: f64, x: f64) -> f64 {
    ((1.0 - p) / (1.0 - x)).powi(2)
}
