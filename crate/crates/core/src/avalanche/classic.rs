use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rustc_hash::FxHashMap;

use super::{drive, AvalancheEngine, AvalancheOutcome, StepEvent};
use crate::graph::{GraphError, GraphKind, VertexId};
use crate::params::{Caps, Threshold};
use crate::rng::open01;

/// Heap entry for an active vertex; stale once `generation` moves on.
#[derive(Debug, Clone, Copy)]
struct Active {
    fitness: f64,
    index: u32,
    generation: u32,
}

impl PartialEq for Active {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Active {}

impl PartialOrd for Active {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Active {
    // min-heap on fitness
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fitness
            .total_cmp(&self.fitness)
            .then_with(|| other.index.cmp(&self.index))
            .then_with(|| other.generation.cmp(&self.generation))
    }
}

/// Avalanche with explicit fitness values.
///
/// Every updated vertex keeps its realized fitness; those at or below `p`
/// are also queued in a min-heap, so a step costs `O(Δ log n)`.
#[derive(Debug, Clone)]
pub struct ClassicAvalanche {
    graph: GraphKind,
    p: Threshold,
    vertices: Vec<VertexId>,
    fitness: Vec<f64>,
    generation: Vec<u32>,
    /// Neighbor indices, filled in the first time a vertex is minimal.
    adjacency: Vec<Option<Box<[u32]>>>,
    index: FxHashMap<VertexId, u32>,
    active: BinaryHeap<Active>,
    steps: u64,
    finished: bool,
    scratch: Vec<VertexId>,
}

impl ClassicAvalanche {
    /// Starts an avalanche at `origin`, whose value is minimal by
    /// definition: the origin and its neighbors are refreshed at once.
    pub fn new<R: Rng + ?Sized>(graph: GraphKind, p: Threshold, origin: &VertexId, rng: &mut R) -> Result<Self, GraphError> {
        let mut scratch = graph.neighbors(origin)?;
        let mut engine = ClassicAvalanche {
            graph,
            p,
            vertices: Vec::new(),
            fitness: Vec::new(),
            generation: Vec::new(),
            adjacency: Vec::new(),
            index: FxHashMap::default(),
            active: BinaryHeap::new(),
            steps: 1,
            finished: false,
            scratch: Vec::new(),
        };
        let origin = engine.intern(origin.clone());
        engine.refresh(origin, open01(rng));
        for n in scratch.drain(..) {
            let i = engine.intern(n);
            engine.refresh(i, open01(rng));
        }
        engine.scratch = scratch;
        Ok(engine)
    }

    pub fn fitness(&self, v: &VertexId) -> Option<f64> {
        self.index.get(v).map(|&i| self.fitness[i as usize])
    }

    pub fn active_count(&self) -> usize {
        let p = self.p.get();
        self.fitness.iter().filter(|&&f| f <= p).count()
    }

    /// Index of `v`, adding it with a placeholder fitness if new.
    fn intern(&mut self, v: VertexId) -> u32 {
        if let Some(&i) = self.index.get(&v) {
            return i;
        }
        let i = self.vertices.len() as u32;
        self.index.insert(v.clone(), i);
        self.vertices.push(v);
        self.fitness.push(f64::INFINITY);
        self.generation.push(0);
        self.adjacency.push(None);
        i
    }

    fn neighbor_indices(&mut self, k: u32) -> Box<[u32]> {
        if let Some(adj) = &self.adjacency[k as usize] {
            return adj.clone();
        }
        let mut scratch = std::mem::take(&mut self.scratch);
        let v = self.vertices[k as usize].clone();
        self.graph.neighbors_into(&v, &mut scratch).expect("tracked vertices are valid");
        let adj: Box<[u32]> = scratch.drain(..).map(|n| self.intern(n)).collect();
        self.scratch = scratch;
        self.adjacency[k as usize] = Some(adj.clone());
        adj
    }

    fn refresh(&mut self, i: u32, u: f64) {
        self.fitness[i as usize] = u;
        self.generation[i as usize] += 1;
        if u <= self.p.get() {
            self.active.push(Active { fitness: u, index: i, generation: self.generation[i as usize] });
        }
    }

    fn is_current(&self, entry: &Active) -> bool {
        self.generation[entry.index as usize] == entry.generation
    }

    /// Pops the minimal active vertex, breaking exact ties by canonical
    /// vertex order.
    fn pop_minimum(&mut self) -> Option<Active> {
        let first = loop {
            let entry = self.active.pop()?;
            if self.is_current(&entry) {
                break entry;
            }
        };
        let mut tied = Vec::new();
        while let Some(next) = self.active.peek() {
            if next.fitness != first.fitness {
                break;
            }
            let next = self.active.pop().expect("peeked");
            if self.is_current(&next) {
                tied.push(next);
            }
        }
        if tied.is_empty() {
            return Some(first);
        }
        tied.push(first);
        let best = tied
            .iter()
            .enumerate()
            .min_by(|a, b| self.vertices[a.1.index as usize].cmp(&self.vertices[b.1.index as usize]))
            .map(|(i, _)| i)
            .expect("nonempty");
        let chosen = tied.swap_remove(best);
        self.active.extend(tied);
        Some(chosen)
    }

    pub fn step_classic<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepEvent {
        assert!(!self.finished, "stepped a terminated avalanche");
        let Some(min) = self.pop_minimum() else {
            self.finished = true;
            let minimum = self.fitness.iter().copied().fold(f64::INFINITY, f64::min);
            return StepEvent::Terminated { minimum: Some(minimum) };
        };
        let neighbors = self.neighbor_indices(min.index);
        self.refresh(min.index, open01(rng));
        for &n in neighbors.iter() {
            self.refresh(n, open01(rng));
        }
        self.steps += 1;
        let k = self.vertices[min.index as usize].clone();
        StepEvent::Minimal { vertex: k, fitness: min.fitness, uniform: min.fitness }
    }
}

impl AvalancheEngine for ClassicAvalanche {
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepEvent {
        self.step_classic(rng)
    }

    fn range(&self) -> usize {
        self.vertices.len()
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn range_set(&self) -> Vec<VertexId> {
        let mut set = self.vertices.clone();
        set.sort();
        set
    }
}

/// Runs a classic avalanche from `origin`.
///
/// Panics if `origin` is not a vertex of `graph`.
pub fn run_classic_avalanche<R: Rng + ?Sized>(
    graph: GraphKind,
    p: Threshold,
    origin: &VertexId,
    caps: Caps,
    rng: &mut R,
) -> AvalancheOutcome {
    let mut engine = ClassicAvalanche::new(graph, p, origin, rng).expect("origin must be a vertex of the graph");
    drive(&mut engine, caps, rng, false)
}
