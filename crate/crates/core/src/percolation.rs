//! Independent oracles: dynamic site-percolation growth at the origin and
//! the Galton-Watson comparator.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::graph::{GraphKind, VertexId};
use crate::params::{ParamError, Threshold};
use crate::rng::open01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercStatus {
    /// Every boundary vertex of the open cluster is closed.
    ClosedOut,
    RangeCapHit,
    StepCapHit,
}

impl PercStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PercStatus::ClosedOut => "closed_out",
            PercStatus::RangeCapHit => "range_cap_hit",
            PercStatus::StepCapHit => "step_cap_hit",
        }
    }

    pub fn is_resolved(self) -> bool {
        self == PercStatus::ClosedOut
    }
}

impl fmt::Display for PercStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of growing (or coupling) the open cluster at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PercOutcome {
    pub status: PercStatus,
    pub cluster_size: usize,
    /// Open cluster plus its examined closed neighbors.
    pub range: usize,
    pub origin_neighbors_closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Site {
    Queued,
    Open,
    Closed,
}

/// Open cluster under construction; the frontier is examined FIFO.
#[derive(Debug, Clone)]
pub struct ClusterState {
    graph: GraphKind,
    p: Threshold,
    origin: VertexId,
    sites: FxHashMap<VertexId, Site>,
    frontier: VecDeque<VertexId>,
    open: usize,
    closed: usize,
    scratch: Vec<VertexId>,
}

impl ClusterState {
    /// The origin starts open with probability one.
    pub fn new(graph: GraphKind, p: Threshold) -> Self {
        let origin = graph.origin();
        let mut state = ClusterState {
            graph,
            p,
            origin: origin.clone(),
            sites: FxHashMap::default(),
            frontier: VecDeque::new(),
            open: 0,
            closed: 0,
            scratch: Vec::new(),
        };
        state.open_site(origin);
        state
    }

    fn open_site(&mut self, v: VertexId) {
        self.graph.neighbors_into(&v, &mut self.scratch).expect("cluster vertices are valid");
        self.sites.insert(v, Site::Open);
        self.open += 1;
        for n in self.scratch.drain(..) {
            if let std::collections::hash_map::Entry::Vacant(slot) = self.sites.entry(n) {
                self.frontier.push_back(slot.key().clone());
                slot.insert(Site::Queued);
            }
        }
    }

    /// Decides the next frontier vertex with uniform `u`: open iff `u <= p`.
    /// Returns `None` once the frontier is empty.
    pub fn examine_with(&mut self, u: f64) -> Option<bool> {
        let v = self.frontier.pop_front()?;
        let open = u <= self.p.get();
        if open {
            self.open_site(v);
        } else {
            self.sites.insert(v, Site::Closed);
            self.closed += 1;
        }
        Some(open)
    }

    pub fn frontier_len(&self) -> usize {
        self.frontier.len()
    }

    pub fn cluster_size(&self) -> usize {
        self.open
    }

    pub fn closed_count(&self) -> usize {
        self.closed
    }

    pub fn range(&self) -> usize {
        self.open + self.closed
    }

    pub fn is_open(&self, v: &VertexId) -> bool {
        self.sites.get(v) == Some(&Site::Open)
    }

    pub fn is_closed(&self, v: &VertexId) -> bool {
        self.sites.get(v) == Some(&Site::Closed)
    }

    pub fn origin_neighbors_closed(&self) -> bool {
        self.graph.neighbors(&self.origin).expect("origin is valid").iter().all(|n| self.is_closed(n))
    }

    fn outcome(&self, status: PercStatus) -> PercOutcome {
        PercOutcome {
            status,
            cluster_size: self.open,
            range: self.range(),
            origin_neighbors_closed: self.origin_neighbors_closed(),
        }
    }
}

/// Grows the origin cluster until the frontier empties or the range reaches
/// `range_cap`.
pub fn grow_cluster<R: Rng + ?Sized>(graph: GraphKind, p: Threshold, range_cap: usize, rng: &mut R) -> PercOutcome {
    let mut state = ClusterState::new(graph, p);
    loop {
        if state.range() >= range_cap {
            return state.outcome(PercStatus::RangeCapHit);
        }
        if state.frontier_len() == 0 {
            return state.outcome(PercStatus::ClosedOut);
        }
        state.examine_with(open01(rng));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchingOutcome {
    /// Individuals ever born, root included; a lower bound when `cap_hit`.
    pub total_progeny: u64,
    /// Completed generations below the root.
    pub generations: u32,
    pub cap_hit: bool,
}

/// Galton-Watson tree with Binomial(`offspring_trials`, `p`) offspring,
/// stopped once the total progeny reaches `cap`.
pub fn branching_total_progeny<R: Rng + ?Sized>(
    offspring_trials: u64,
    p: f64,
    cap: u64,
    rng: &mut R,
) -> Result<BranchingOutcome, ParamError> {
    if offspring_trials == 0 {
        return Err(ParamError::Invalid("offspring distribution needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(ParamError::Invalid(format!("offspring probability {p} outside [0, 1]")));
    }
    let mut total = 1u64;
    let mut generation_size = 1u64;
    let mut generations = 0u32;
    while generation_size > 0 {
        if total >= cap {
            return Ok(BranchingOutcome { total_progeny: total, generations, cap_hit: true });
        }
        // a generation of size g has Binomial(n g, p) children in total
        let trials = offspring_trials.saturating_mul(generation_size);
        let children = Binomial::new(trials, p).expect("validated parameters").sample(rng);
        if children > 0 {
            generations += 1;
        }
        total = total.saturating_add(children);
        generation_size = children;
    }
    Ok(BranchingOutcome { total_progeny: total, generations, cap_hit: false })
}

/// Smallest root in `[0, 1]` of `q = (1 - p + p q)^n`.
pub fn extinction_prob(n: u32, p: f64) -> Result<f64, ParamError> {
    if n == 0 || !(0.0..=1.0).contains(&p) {
        return Err(ParamError::Invalid(format!("extinction_prob needs n >= 1 and p in [0, 1], got ({n}, {p})")));
    }
    // mean offspring n p <= 1: extinction is certain, and the iteration
    // below would only crawl towards 1
    if n as f64 * p <= 1.0 {
        return Ok(1.0);
    }
    let f = |q: f64| (1.0 - p + p * q).powi(n as i32);
    let mut q = 0.0;
    for _ in 0..10_000_000 {
        let next = f(q);
        if (next - q).abs() < 1e-12 {
            // contraction factor f'(q) < 1 bounds the remaining error
            let slope = n as f64 * p * (1.0 - p + p * next).powi(n as i32 - 1);
            let tail = (next - q).abs() * slope / (1.0 - slope).max(1e-300);
            return Ok((next + tail).min(1.0));
        }
        q = next;
    }
    Ok(q)
}

/// `P(cluster size = k)` for site percolation on `Z` with the origin forced
/// open: `k p^(k-1) (1-p)^2`.
pub fn cluster_size_pmf_z(p: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    k as f64 * p.powi(k as i32 - 1) * (1.0 - p).powi(2)
}
