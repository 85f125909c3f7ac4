//! Lazily generated, locally finite transitive graphs.
//!
//! Vertices are never stored by the graph itself; a [`VertexId`] is a
//! canonical name from which the neighbors can be computed on demand. This
//! lets the engines walk `Z^d` and infinite regular trees without a bounding
//! box.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex {vertex} is not a vertex of {graph}")]
    InvalidVertex { graph: GraphKind, vertex: VertexId },
    #[error("lattice coordinate overflow at {0}")]
    Overflow(VertexId),
    #[error("malformed graph spec {0:?}")]
    MalformedSpec(String),
    #[error("graph parameter too small in {spec:?}: need at least {min}")]
    ParameterTooSmall { spec: String, min: u32 },
    #[error("malformed vertex id {0:?}")]
    MalformedVertex(String),
}

pub type LatticeCoords = SmallVec<[i32; 4]>;
pub type TreePath = SmallVec<[u32; 8]>;

/// Canonical name of a vertex.
///
/// Tree vertices are label paths from the root: the root has children
/// `0..root_degree`, every other vertex has children `0..branching`, and the
/// parent is obtained by dropping the last label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexId {
    Lattice(LatticeCoords),
    Tree(TreePath),
    Cycle(u32),
}

impl VertexId {
    pub fn lattice(coords: &[i32]) -> Self {
        VertexId::Lattice(coords.iter().copied().collect())
    }

    pub fn tree(path: &[u32]) -> Self {
        VertexId::Tree(path.iter().copied().collect())
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Lattice(c) => {
                f.write_str("z:")?;
                for (i, x) in c.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
            VertexId::Tree(path) => {
                f.write_str("t:")?;
                for (i, l) in path.iter().enumerate() {
                    if i > 0 {
                        f.write_str(".")?;
                    }
                    write!(f, "{l}")?;
                }
                Ok(())
            }
            VertexId::Cycle(i) => write!(f, "c:{i}"),
        }
    }
}

impl FromStr for VertexId {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::MalformedVertex(s.to_string());
        let (tag, body) = s.split_once(':').ok_or_else(bad)?;
        match tag {
            "z" => {
                if body.is_empty() {
                    return Err(bad());
                }
                body.split(',')
                    .map(|x| x.parse::<i32>().map_err(|_| bad()))
                    .collect::<Result<LatticeCoords, _>>()
                    .map(VertexId::Lattice)
            }
            "t" => {
                if body.is_empty() {
                    return Ok(VertexId::Tree(TreePath::new()));
                }
                body.split('.')
                    .map(|x| x.parse::<u32>().map_err(|_| bad()))
                    .collect::<Result<TreePath, _>>()
                    .map(VertexId::Tree)
            }
            "c" => body.parse().map(VertexId::Cycle).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl Serialize for VertexId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The graph families the simulations run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    /// `Z^d`, common degree `2d`.
    LatticeZd(u32),
    /// Regular tree `T_Δ`, common degree `Δ`.
    RegularTree(u32),
    /// Cycle `C_N`, common degree 2.
    Cycle(u32),
    /// `T*_n`: root of degree `n - 1`, every other vertex of degree `n`.
    RootedTreeStar(u32),
}

impl GraphKind {
    pub fn lattice(dim: u32) -> Result<Self, GraphError> {
        GraphKind::LatticeZd(dim).validated()
    }

    pub fn regular_tree(degree: u32) -> Result<Self, GraphError> {
        GraphKind::RegularTree(degree).validated()
    }

    pub fn cycle(len: u32) -> Result<Self, GraphError> {
        GraphKind::Cycle(len).validated()
    }

    pub fn rooted_tree_star(n: u32) -> Result<Self, GraphError> {
        GraphKind::RootedTreeStar(n).validated()
    }

    fn validated(self) -> Result<Self, GraphError> {
        let (param, min) = match self {
            GraphKind::LatticeZd(d) => (d, 1),
            GraphKind::RegularTree(d) => (d, 2),
            GraphKind::Cycle(n) => (n, 3),
            GraphKind::RootedTreeStar(n) => (n, 2),
        };
        if param < min {
            return Err(GraphError::ParameterTooSmall { spec: self.to_string(), min });
        }
        Ok(self)
    }

    /// The distinguished start vertex: the lattice origin, the tree root, or `0`.
    pub fn origin(&self) -> VertexId {
        match *self {
            GraphKind::LatticeZd(d) => VertexId::Lattice(std::iter::repeat_n(0, d as usize).collect()),
            GraphKind::RegularTree(_) | GraphKind::RootedTreeStar(_) => VertexId::Tree(TreePath::new()),
            GraphKind::Cycle(_) => VertexId::Cycle(0),
        }
    }

    /// Common degree for the transitive families; `None` for `T*_n`.
    pub fn common_degree(&self) -> Option<usize> {
        match *self {
            GraphKind::LatticeZd(d) => Some(2 * d as usize),
            GraphKind::RegularTree(d) => Some(d as usize),
            GraphKind::Cycle(_) => Some(2),
            GraphKind::RootedTreeStar(_) => None,
        }
    }

    /// Maximum vertex degree.
    pub fn max_degree(&self) -> usize {
        match *self {
            GraphKind::RootedTreeStar(n) => n as usize,
            _ => self.common_degree().expect("transitive family"),
        }
    }

    /// `(root children, children of any other vertex)` for the tree families.
    fn tree_shape(&self) -> Option<(u32, u32)> {
        match *self {
            GraphKind::RegularTree(d) => Some((d, d - 1)),
            GraphKind::RootedTreeStar(n) => Some((n - 1, n - 1)),
            _ => None,
        }
    }

    pub fn contains(&self, v: &VertexId) -> bool {
        match (self, v) {
            (GraphKind::LatticeZd(d), VertexId::Lattice(c)) => c.len() == *d as usize,
            (GraphKind::Cycle(n), VertexId::Cycle(i)) => i < n,
            (_, VertexId::Tree(path)) => match self.tree_shape() {
                Some((root, branch)) => path
                    .iter()
                    .enumerate()
                    .all(|(depth, &l)| if depth == 0 { l < root } else { l < branch }),
                None => false,
            },
            _ => false,
        }
    }

    fn check(&self, v: &VertexId) -> Result<(), GraphError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(GraphError::InvalidVertex { graph: *self, vertex: v.clone() })
        }
    }

    pub fn degree(&self, v: &VertexId) -> Result<usize, GraphError> {
        self.check(v)?;
        Ok(match (self, v) {
            (GraphKind::RootedTreeStar(n), VertexId::Tree(path)) if path.is_empty() => *n as usize - 1,
            _ => self.max_degree(),
        })
    }

    /// Neighbors in canonical order: `+e1, -e1, ..., +ed, -ed` on the
    /// lattice, `+1, -1` on the cycle, parent first then children by label
    /// on trees.
    pub fn neighbors(&self, v: &VertexId) -> Result<Vec<VertexId>, GraphError> {
        let mut out = Vec::with_capacity(self.max_degree());
        self.neighbors_into(v, &mut out)?;
        Ok(out)
    }

    /// Like [`GraphKind::neighbors`], writing into a reusable buffer.
    pub fn neighbors_into(&self, v: &VertexId, out: &mut Vec<VertexId>) -> Result<(), GraphError> {
        self.check(v)?;
        out.clear();
        match (self, v) {
            (GraphKind::LatticeZd(_), VertexId::Lattice(c)) => {
                for axis in 0..c.len() {
                    for delta in [1, -1] {
                        let mut n = c.clone();
                        n[axis] = c[axis].checked_add(delta).ok_or_else(|| GraphError::Overflow(v.clone()))?;
                        out.push(VertexId::Lattice(n));
                    }
                }
            }
            (GraphKind::Cycle(n), VertexId::Cycle(i)) => {
                out.push(VertexId::Cycle((i + 1) % n));
                out.push(VertexId::Cycle((i + n - 1) % n));
            }
            (_, VertexId::Tree(path)) => {
                let (root, branch) = self.tree_shape().expect("checked above");
                let children = if path.is_empty() {
                    root
                } else {
                    let mut parent = path.clone();
                    parent.pop();
                    out.push(VertexId::Tree(parent));
                    branch
                };
                for label in 0..children {
                    let mut child = path.clone();
                    child.push(label);
                    out.push(VertexId::Tree(child));
                }
            }
            _ => unreachable!("contains() rejects mismatched vertex kinds"),
        }
        Ok(())
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::LatticeZd(d) => write!(f, "zd:{d}"),
            GraphKind::RegularTree(d) => write!(f, "tree:{d}"),
            GraphKind::Cycle(n) => write!(f, "cycle:{n}"),
            GraphKind::RootedTreeStar(n) => write!(f, "treestar:{n}"),
        }
    }
}

impl FromStr for GraphKind {
    type Err = GraphError;

    /// Parses `zd:<d>`, `tree:<Δ>`, `cycle:<N>` or `treestar:<n>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::MalformedSpec(s.to_string());
        let (tag, param) = s.trim().split_once(':').ok_or_else(bad)?;
        let param: u32 = param.trim().parse().map_err(|_| bad())?;
        let kind = match tag.trim() {
            "zd" => GraphKind::LatticeZd(param),
            "tree" => GraphKind::RegularTree(param),
            "cycle" => GraphKind::Cycle(param),
            "treestar" => GraphKind::RootedTreeStar(param),
            _ => return Err(bad()),
        };
        kind.validated().map_err(|e| match e {
            GraphError::ParameterTooSmall { min, .. } => GraphError::ParameterTooSmall { spec: s.to_string(), min },
            other => other,
        })
    }
}

impl Serialize for GraphKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GraphKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeSet, HashSet, VecDeque};

    use proptest::prelude::*;

    use super::*;

    fn ball(g: &GraphKind, radius: usize) -> Vec<VertexId> {
        let mut seen = HashSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::from([(g.origin(), 0)]);
        seen.insert(g.origin());
        while let Some((v, r)) = queue.pop_front() {
            order.push(v.clone());
            if r == radius {
                continue;
            }
            for n in g.neighbors(&v).unwrap() {
                if seen.insert(n.clone()) {
                    queue.push_back((n, r + 1));
                }
            }
        }
        order
    }

    #[test]
    fn lattice_origin_neighbors_in_canonical_order() {
        let g = GraphKind::lattice(2).unwrap();
        let n = g.neighbors(&g.origin()).unwrap();
        let expected: Vec<_> = [[1, 0], [-1, 0], [0, 1], [0, -1]].iter().map(|c| VertexId::lattice(c)).collect();
        assert_eq!(n, expected);
    }

    #[test]
    fn tree_root_degrees() {
        let t3 = GraphKind::regular_tree(3).unwrap();
        assert_eq!(t3.neighbors(&t3.origin()).unwrap().len(), 3);
        let star = GraphKind::rooted_tree_star(4).unwrap();
        let kids = star.neighbors(&star.origin()).unwrap();
        assert_eq!(kids, vec![VertexId::tree(&[0]), VertexId::tree(&[1]), VertexId::tree(&[2])]);
        let star5 = GraphKind::rooted_tree_star(5).unwrap();
        assert_eq!(star5.degree(&VertexId::tree(&[3, 1])).unwrap(), 5);
        assert_eq!(star5.degree(&star5.origin()).unwrap(), 4);
    }

    #[test]
    fn tree_parent_comes_first() {
        let g = GraphKind::regular_tree(4).unwrap();
        let n = g.neighbors(&VertexId::tree(&[2, 1])).unwrap();
        assert_eq!(n[0], VertexId::tree(&[2]));
        assert_eq!(&n[1..], &[VertexId::tree(&[2, 1, 0]), VertexId::tree(&[2, 1, 1]), VertexId::tree(&[2, 1, 2])]);
    }

    #[test]
    fn small_degrees() {
        assert_eq!(GraphKind::cycle(100).unwrap().degree(&VertexId::Cycle(0)).unwrap(), 2);
        let z3 = GraphKind::lattice(3).unwrap();
        assert_eq!(z3.degree(&VertexId::lattice(&[5, -2, 7])).unwrap(), 6);
        let c5 = GraphKind::cycle(5).unwrap();
        assert_eq!(c5.neighbors(&VertexId::Cycle(0)).unwrap(), vec![VertexId::Cycle(1), VertexId::Cycle(4)]);
    }

    #[test]
    fn invalid_vertices_rejected() {
        let t3 = GraphKind::regular_tree(3).unwrap();
        // non-root vertices only have labels 0..Δ-1
        assert!(t3.neighbors(&VertexId::tree(&[2, 2])).is_err());
        assert!(t3.neighbors(&VertexId::tree(&[3])).is_err());
        assert!(GraphKind::cycle(5).unwrap().degree(&VertexId::Cycle(5)).is_err());
        assert!(GraphKind::lattice(2).unwrap().neighbors(&VertexId::lattice(&[0])).is_err());
        assert!(GraphKind::lattice(1).unwrap().neighbors(&VertexId::Cycle(0)).is_err());
    }

    #[test]
    fn lattice_overflow_is_an_error() {
        let g = GraphKind::lattice(1).unwrap();
        assert!(matches!(g.neighbors(&VertexId::lattice(&[i32::MAX])), Err(GraphError::Overflow(_))));
    }

    #[test]
    fn graph_spec_parsing() {
        assert_eq!("zd:2".parse::<GraphKind>().unwrap(), GraphKind::LatticeZd(2));
        assert_eq!("tree:5".parse::<GraphKind>().unwrap(), GraphKind::RegularTree(5));
        assert_eq!("cycle:20".parse::<GraphKind>().unwrap(), GraphKind::Cycle(20));
        assert_eq!("treestar:4".parse::<GraphKind>().unwrap(), GraphKind::RootedTreeStar(4));
        assert!(matches!("tree:1".parse::<GraphKind>(), Err(GraphError::ParameterTooSmall { .. })));
        assert!("cycle:2".parse::<GraphKind>().is_err());
        assert!("zd:0".parse::<GraphKind>().is_err());
        assert!("grid:3".parse::<GraphKind>().is_err());
        assert!("tree".parse::<GraphKind>().is_err());
    }

    #[test]
    fn vertex_serialization_format() {
        assert_eq!(VertexId::lattice(&[1, -2]).to_string(), "z:1,-2");
        assert_eq!(VertexId::tree(&[0, 2, 1]).to_string(), "t:0.2.1");
        assert_eq!(VertexId::tree(&[]).to_string(), "t:");
        assert_eq!(VertexId::Cycle(17).to_string(), "c:17");
        assert_eq!("t:".parse::<VertexId>().unwrap(), VertexId::tree(&[]));
        assert!("z:".parse::<VertexId>().is_err());
        assert!("q:1".parse::<VertexId>().is_err());
        assert!("t:1..2".parse::<VertexId>().is_err());
        assert_eq!(serde_json::to_string(&VertexId::lattice(&[3])).unwrap(), "\"z:3\"");
    }

    #[test]
    fn symmetric_and_duplicate_free_on_balls() {
        let graphs = [
            GraphKind::lattice(1).unwrap(),
            GraphKind::lattice(2).unwrap(),
            GraphKind::lattice(3).unwrap(),
            GraphKind::regular_tree(3).unwrap(),
            GraphKind::regular_tree(5).unwrap(),
            GraphKind::rooted_tree_star(4).unwrap(),
        ];
        for g in graphs {
            for v in ball(&g, 4) {
                let ns = g.neighbors(&v).unwrap();
                let distinct: BTreeSet<_> = ns.iter().collect();
                assert_eq!(distinct.len(), ns.len(), "{g}: duplicate neighbor of {v}");
                assert_eq!(ns.len(), g.degree(&v).unwrap());
                for n in &ns {
                    assert!(g.neighbors(n).unwrap().contains(&v), "{g}: {n} does not see {v}");
                }
            }
        }
    }

    #[test]
    fn cycle_symmetry_exhaustive() {
        for n in 3..12 {
            let g = GraphKind::cycle(n).unwrap();
            for i in 0..n {
                let v = VertexId::Cycle(i);
                let ns = g.neighbors(&v).unwrap();
                assert_ne!(ns[0], ns[1]);
                for u in &ns {
                    assert!(g.neighbors(u).unwrap().contains(&v));
                }
            }
        }
    }

    fn arb_vertex() -> impl Strategy<Value = VertexId> {
        prop_oneof![
            prop::collection::vec(any::<i32>(), 1..5).prop_map(|c| VertexId::lattice(&c)),
            prop::collection::vec(any::<u32>(), 0..10).prop_map(|p| VertexId::tree(&p)),
            any::<u32>().prop_map(VertexId::Cycle),
        ]
    }

    proptest! {
        #[test]
        fn vertex_id_round_trips(v in arb_vertex()) {
            let text = v.to_string();
            prop_assert_eq!(text.parse::<VertexId>().unwrap(), v.clone());
            let json = serde_json::to_string(&v).unwrap();
            prop_assert_eq!(serde_json::from_str::<VertexId>(&json).unwrap(), v);
        }

        #[test]
        fn lattice_degree_is_constant(coords in prop::collection::vec(-1000i32..1000, 3)) {
            let g = GraphKind::lattice(3).unwrap();
            prop_assert_eq!(g.degree(&VertexId::lattice(&coords)).unwrap(), 6);
        }

        #[test]
        fn tree_degree_is_constant(delta in 2u32..7, path in prop::collection::vec(0u32..100, 0..12)) {
            let g = GraphKind::regular_tree(delta).unwrap();
            let path: Vec<u32> = path
                .iter()
                .enumerate()
                .map(|(i, &l)| if i == 0 { l % delta } else { l % (delta - 1) })
                .collect();
            let v = VertexId::tree(&path);
            prop_assert_eq!(g.degree(&v).unwrap(), delta as usize);
            prop_assert_eq!(g.neighbors(&v).unwrap().len(), delta as usize);
        }

        #[test]
        fn cycle_degree_is_constant(n in 3u32..1000, i in any::<u32>()) {
            let g = GraphKind::cycle(n).unwrap();
            prop_assert_eq!(g.degree(&VertexId::Cycle(i % n)).unwrap(), 2);
        }
    }
}
