//! Fixed workloads shared by the benchmarks.

use avalanche_core::{Caps, GraphKind, Threshold};

/// A named graph and threshold to drive avalanches on.
#[derive(Debug, Clone, Copy)]
pub struct Workload {
    pub name: &'static str,
    pub graph: GraphKind,
    pub p: Threshold,
    pub caps: Caps,
}

fn workload(name: &'static str, graph: GraphKind, p: f64, range: usize) -> Workload {
    Workload {
        name,
        graph,
        p: Threshold::new(p).expect("valid threshold"),
        caps: Caps::new(range, 10_000_000).expect("valid caps"),
    }
}

/// Subcritical and near-critical avalanche workloads.
pub fn avalanche_workloads() -> Vec<Workload> {
    vec![
        workload("zd1_p0.5", GraphKind::lattice(1).unwrap(), 0.5, 10_000),
        workload("zd2_p0.3", GraphKind::lattice(2).unwrap(), 0.3, 2_000),
        workload("tree5_p0.2", GraphKind::regular_tree(5).unwrap(), 0.2, 10_000),
        workload("cycle20_p0.3", GraphKind::cycle(20).unwrap(), 0.3, usize::MAX),
    ]
}

/// Percolation workloads grow the origin cluster to the cap.
pub fn percolation_workloads() -> Vec<Workload> {
    vec![
        workload("zd2_p0.55", GraphKind::lattice(2).unwrap(), 0.55, 10_000),
        workload("tree3_p0.45", GraphKind::regular_tree(3).unwrap(), 0.45, 10_000),
    ]
}
