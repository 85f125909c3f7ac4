use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};

use super::{drive, AvalancheEngine, AvalancheOutcome, StepEvent};
use crate::graph::{GraphError, GraphKind, VertexId};
use crate::params::{Caps, FitnessBound, Threshold};
use crate::rng::open01;

/// Forgetful avalanche: per-vertex lower bounds `y` of uniform-`(y, 1)`
/// fitness laws.
///
/// Tracked vertices live in insertion order, which fixes the order in which
/// uniforms are consumed. Untrimmed, a vertex index never changes once
/// assigned, so callers may hold on to [`AvalancheState::index_of`].
#[derive(Debug, Clone)]
pub struct AvalancheState {
    graph: GraphKind,
    p: Threshold,
    origin: VertexId,
    vertices: Vec<VertexId>,
    bounds: Vec<f64>,
    index: FxHashMap<VertexId, usize>,
    /// Every vertex ever updated; only kept separately once trimming may
    /// have evicted some of them.
    evicted_range: Option<FxHashSet<VertexId>>,
    steps: u64,
    finished: bool,
    scratch: Vec<VertexId>,
}

/// Performs the forced first update: origin and its neighbors at bound 0.
pub fn init_avalanche(graph: GraphKind, p: Threshold, origin: &VertexId) -> Result<AvalancheState, GraphError> {
    AvalancheState::new(graph, p, origin)
}

impl AvalancheState {
    pub fn new(graph: GraphKind, p: Threshold, origin: &VertexId) -> Result<Self, GraphError> {
        let neighbors = graph.neighbors(origin)?;
        let mut state = AvalancheState {
            graph,
            p,
            origin: origin.clone(),
            vertices: Vec::with_capacity(neighbors.len() + 1),
            bounds: Vec::with_capacity(neighbors.len() + 1),
            index: FxHashMap::default(),
            evicted_range: None,
            steps: 1,
            finished: false,
            scratch: Vec::new(),
        };
        state.reset(origin.clone());
        for n in neighbors {
            state.reset(n);
        }
        Ok(state)
    }

    /// Turns on eviction of vertices whose bound exceeds `p`. Such vertices
    /// can never be a sub-threshold minimum. The price is that the terminal
    /// minimum is no longer known.
    pub fn with_trimming(mut self, trimmed: bool) -> Self {
        if trimmed && self.evicted_range.is_none() {
            self.evicted_range = Some(self.vertices.iter().cloned().collect());
        } else if !trimmed && self.evicted_range.is_some() {
            panic!("trimming cannot be switched off once enabled");
        }
        self
    }

    pub fn graph(&self) -> GraphKind {
        self.graph
    }

    pub fn threshold(&self) -> Threshold {
        self.p
    }

    pub fn origin(&self) -> &VertexId {
        &self.origin
    }

    pub fn is_trimmed(&self) -> bool {
        self.evicted_range.is_some()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn tracked_len(&self) -> usize {
        self.vertices.len()
    }

    pub fn index_of(&self, v: &VertexId) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn bound_at(&self, index: usize) -> f64 {
        self.bounds[index]
    }

    pub fn bound(&self, v: &VertexId) -> Option<FitnessBound> {
        self.index_of(v).map(|i| FitnessBound::new(self.bounds[i]).expect("bounds stay in [0, 1]"))
    }

    /// Tracked vertices with their bounds, in sampling order.
    pub fn tracked(&self) -> impl Iterator<Item = (&VertexId, f64)> + '_ {
        self.vertices.iter().zip(self.bounds.iter().copied())
    }

    pub fn in_range(&self, v: &VertexId) -> bool {
        match &self.evicted_range {
            Some(set) => set.contains(v),
            None => self.index.contains_key(v),
        }
    }

    fn reset(&mut self, v: VertexId) {
        match self.index.get(&v) {
            Some(&i) => self.bounds[i] = 0.0,
            None => {
                if let Some(range) = &mut self.evicted_range {
                    range.insert(v.clone());
                }
                self.index.insert(v.clone(), self.vertices.len());
                self.vertices.push(v);
                self.bounds.push(0.0);
            }
        }
    }

    /// One forgetful step drawing its uniforms from `rng`.
    pub fn step_forgetful<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepEvent {
        self.step_with(|| open01(rng))
    }

    /// One forgetful step; `uniform` supplies one variate per tracked vertex
    /// in sampling order.
    pub fn step_with(&mut self, mut uniform: impl FnMut() -> f64) -> StepEvent {
        assert!(!self.finished, "stepped a terminated avalanche");
        let mut argmin = usize::MAX;
        let mut minimum = f64::INFINITY;
        let mut minimum_u = f64::NAN;
        for (i, &y) in self.bounds.iter().enumerate() {
            let u = uniform();
            let fitness = y + (1.0 - y) * u;
            debug_assert!(fitness >= y && fitness <= 1.0, "fitness {fitness} outside ({y}, 1]");
            let better = fitness < minimum || (fitness == minimum && self.vertices[i] < self.vertices[argmin]);
            if better {
                argmin = i;
                minimum = fitness;
                minimum_u = u;
            }
        }

        if argmin == usize::MAX || minimum > self.p.get() {
            self.finished = true;
            let minimum = (!self.is_trimmed() && argmin != usize::MAX).then_some(minimum);
            return StepEvent::Terminated { minimum };
        }

        for y in &mut self.bounds {
            if *y < minimum {
                *y = minimum;
            }
        }
        let k = self.vertices[argmin].clone();
        let mut scratch = std::mem::take(&mut self.scratch);
        self.graph.neighbors_into(&k, &mut scratch).expect("tracked vertices are valid");
        self.bounds[argmin] = 0.0;
        for n in scratch.drain(..) {
            self.reset(n);
        }
        self.scratch = scratch;
        self.steps += 1;
        if self.is_trimmed() {
            self.evict_above_threshold();
        }
        StepEvent::Minimal { vertex: k, fitness: minimum, uniform: minimum_u }
    }

    fn evict_above_threshold(&mut self) {
        let p = self.p.get();
        let mut i = 0;
        while i < self.vertices.len() {
            if self.bounds[i] > p {
                let gone = self.vertices.swap_remove(i);
                self.bounds.swap_remove(i);
                self.index.remove(&gone);
                if i < self.vertices.len() {
                    self.index.insert(self.vertices[i].clone(), i);
                }
            } else {
                i += 1;
            }
        }
    }
}

impl AvalancheEngine for AvalancheState {
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepEvent {
        self.step_forgetful(rng)
    }

    fn range(&self) -> usize {
        match &self.evicted_range {
            Some(set) => set.len(),
            None => self.vertices.len(),
        }
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn range_set(&self) -> Vec<VertexId> {
        let mut set: Vec<VertexId> = match &self.evicted_range {
            Some(set) => set.iter().cloned().collect(),
            None => self.vertices.clone(),
        };
        set.sort();
        set
    }
}

/// Runs a forgetful avalanche from `origin`.
///
/// Panics if `origin` is not a vertex of `graph`.
pub fn run_avalanche<R: Rng + ?Sized>(
    graph: GraphKind,
    p: Threshold,
    origin: &VertexId,
    caps: Caps,
    rng: &mut R,
) -> AvalancheOutcome {
    let mut state = AvalancheState::new(graph, p, origin).expect("origin must be a vertex of the graph");
    drive(&mut state, caps, rng, false)
}

#[cfg(test)]
mod tests {
    use std::collections::{HashMap, HashSet};

    use super::*;
    use crate::avalanche::AvalancheStatus;
    use crate::rng::trial_rng;

    fn z1() -> GraphKind {
        GraphKind::lattice(1).unwrap()
    }

    fn p(x: f64) -> Threshold {
        Threshold::new(x).unwrap()
    }

    fn scripted(values: Vec<f64>) -> impl FnMut() -> f64 {
        let mut it = values.into_iter();
        move || it.next().expect("script exhausted")
    }

    #[test]
    fn init_tracks_origin_and_neighbors() {
        let s = init_avalanche(z1(), p(0.5), &z1().origin()).unwrap();
        assert_eq!(s.tracked_len(), 3);
        assert!(s.tracked().all(|(_, y)| y == 0.0));
        assert_eq!(s.steps(), 1);

        let t3 = GraphKind::regular_tree(3).unwrap();
        assert_eq!(init_avalanche(t3, p(0.3), &t3.origin()).unwrap().range(), 4);

        let c5 = GraphKind::cycle(5).unwrap();
        let s = init_avalanche(c5, p(0.9), &VertexId::Cycle(0)).unwrap();
        assert_eq!(s.range_set(), vec![VertexId::Cycle(0), VertexId::Cycle(1), VertexId::Cycle(4)]);
    }

    #[test]
    fn origin_minimal_at_half() {
        // sampling order: origin, +1, -1
        let mut s = init_avalanche(z1(), p(0.7), &z1().origin()).unwrap();
        let ev = s.step_with(scripted(vec![0.5, 0.9, 0.8]));
        assert_eq!(ev, StepEvent::Minimal { vertex: z1().origin(), fitness: 0.5, uniform: 0.5 });
        // neighbors of the minimum are reset to F_0
        assert!(s.tracked().all(|(_, y)| y == 0.0));
        assert_eq!(s.steps(), 2);
        assert_eq!(s.range(), 3);
    }

    #[test]
    fn neighbor_minimum_conditions_the_rest() {
        let mut s = init_avalanche(z1(), p(0.7), &z1().origin()).unwrap();
        let ev = s.step_with(scripted(vec![0.6, 0.3, 0.9]));
        let plus = VertexId::lattice(&[1]);
        assert!(matches!(ev, StepEvent::Minimal { ref vertex, fitness, .. } if *vertex == plus && fitness == 0.3));
        assert_eq!(s.bound(&z1().origin()).unwrap().get(), 0.0);
        assert_eq!(s.bound(&plus).unwrap().get(), 0.0);
        assert_eq!(s.bound(&VertexId::lattice(&[2])).unwrap().get(), 0.0);
        // -1 is not adjacent to +1: conditioned above the minimum
        assert_eq!(s.bound(&VertexId::lattice(&[-1])).unwrap().get(), 0.3);
        assert_eq!(s.range(), 4);
    }

    #[test]
    fn conditioned_bound_realizes_at_three_eighths() {
        // a vertex with y = 0.2 realizing M = 0.5 used U = 3/8
        let mut s = init_avalanche(z1(), p(0.7), &z1().origin()).unwrap();
        s.step_with(scripted(vec![0.6, 0.2, 0.9]));
        let minus = VertexId::lattice(&[-1]);
        assert_eq!(s.bound(&minus).unwrap().get(), 0.2);
        // order now: origin, +1, -1, +2
        let ev = s.step_with(scripted(vec![0.9, 0.9, 3.0 / 8.0, 0.9]));
        match ev {
            StepEvent::Minimal { vertex, fitness, uniform } => {
                assert_eq!(vertex, minus);
                assert!((fitness - 0.5).abs() < 1e-15);
                assert_eq!(uniform, 3.0 / 8.0);
                assert!((FitnessBound::new(0.2).unwrap().uniform_for(fitness) - 3.0 / 8.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn termination_leaves_bounds_alone() {
        let mut s = init_avalanche(z1(), p(0.4), &z1().origin()).unwrap();
        s.step_with(scripted(vec![0.9, 0.3, 0.9]));
        let before: Vec<f64> = s.tracked().map(|(_, y)| y).collect();
        let ev = s.step_with(scripted(vec![0.8, 0.9, 0.6, 0.9]));
        let expected_min = 0.3 + 0.7 * 0.6;
        match ev {
            StepEvent::Terminated { minimum: Some(m) } => assert!((m - expected_min).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(before, s.tracked().map(|(_, y)| y).collect::<Vec<_>>());
        assert!(s.is_finished());
    }

    #[test]
    fn bounds_are_monotone_off_the_minimum() {
        let g = GraphKind::regular_tree(3).unwrap();
        let mut rng = trial_rng(3, 0);
        let mut s = init_avalanche(g, p(0.4), &g.origin()).unwrap();
        for _ in 0..200 {
            let before: HashMap<VertexId, f64> = s.tracked().map(|(v, y)| (v.clone(), y)).collect();
            match s.step_forgetful(&mut rng) {
                StepEvent::Terminated { .. } => break,
                StepEvent::Minimal { vertex, fitness, .. } => {
                    let reset: HashSet<VertexId> =
                        std::iter::once(vertex.clone()).chain(g.neighbors(&vertex).unwrap()).collect();
                    for (v, y) in s.tracked() {
                        if reset.contains(v) {
                            assert_eq!(y, 0.0);
                        } else {
                            let old = before[v];
                            assert!(y >= old);
                            assert_eq!(y, old.max(fitness));
                        }
                        assert!(y <= 0.4);
                    }
                }
            }
        }
    }

    #[test]
    fn range_is_at_least_degree_plus_one() {
        let g = GraphKind::regular_tree(4).unwrap();
        for i in 0..200 {
            let out = run_avalanche(g, p(0.2), &g.origin(), Caps::new(1000, 100_000).unwrap(), &mut trial_rng(11, i));
            assert!(out.range >= 5);
        }
    }

    #[test]
    fn low_threshold_dies_on_tree() {
        let g = GraphKind::regular_tree(5).unwrap();
        for i in 0..1000 {
            let out = run_avalanche(g, p(0.01), &g.origin(), Caps::new(10_000, 1_000_000).unwrap(), &mut trial_rng(5, i));
            assert_eq!(out.status, AvalancheStatus::Died);
        }
    }

    #[test]
    fn trimmed_and_untrimmed_agree() {
        let g = GraphKind::lattice(2).unwrap();
        let caps = Caps::new(300, 10_000).unwrap();
        for i in 0..300 {
            let mut plain = init_avalanche(g, p(0.45), &g.origin()).unwrap();
            let mut trimmed = init_avalanche(g, p(0.45), &g.origin()).unwrap().with_trimming(true);
            let a = drive(&mut plain, caps, &mut trial_rng(21, i), false);
            let b = drive(&mut trimmed, caps, &mut trial_rng(21, i), false);
            assert_eq!((a.status, a.range, a.steps), (b.status, b.range, b.steps));
        }
    }

    #[test]
    fn invalid_origin_is_rejected() {
        assert!(init_avalanche(z1(), p(0.5), &VertexId::Cycle(0)).is_err());
    }
}
