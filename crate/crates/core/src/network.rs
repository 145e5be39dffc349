//! Tree-shaped string networks.
//!
//! Nodes are numbered `0..=N` and edges `1..=N`. Node 0 is the root, an
//! external node whose only edge is edge 1. Every edge is oriented away from
//! the root and carries the index of its final node, so edge `i` runs from
//! `parent(i)` (at `x = 0`) to node `i` (at `x = 1`). Edge lengths are
//! normalized to one; the travel time along edge `i` is `1 / c_i`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when comparing a damping coefficient against the
/// junction degree (`alpha == k` or `alpha == k - 2`).
pub const ALPHA_TOLERANCE: f64 = 1e-9;

/// Boundary condition applied at the root. Every other external node is
/// transparent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Transparent,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network has no edges")]
    Empty,
    #[error("edge {edge} references node {node}, but the network has {node_count} nodes")]
    UnknownNode {
        edge: usize,
        node: usize,
        node_count: usize,
    },
    #[error("edge list contains a cycle (closing edge {edge} between nodes {a} and {b})")]
    CycleDetected { edge: usize, a: usize, b: usize },
    #[error("graph is disconnected: node {node} is unreachable from the root")]
    DisconnectedGraph { node: usize },
    #[error("root must have exactly one incident edge, found {degree}")]
    RootDegreeNotOne { degree: usize },
    #[error("edge {edge} has non-positive wave speed {speed}")]
    NonPositiveSpeed { edge: usize, speed: f64 },
    #[error("ill-posed junction at node {node}: alpha = {alpha} equals k = {k}")]
    IllPosedAlpha { node: usize, alpha: f64, k: usize },
    #[error("no damping coefficient given for internal node {node}")]
    MissingAlpha { node: usize },
    #[error("damping coefficient given for external node {node}")]
    AlphaOnExternalNode { node: usize },
    #[error("node {node} is not an external node")]
    NotExternalNode { node: usize },
    #[error("finite-time condition fails at node {node}: alpha = {alpha}, expected k - 2 = {expected}")]
    ConditionFtsViolated {
        node: usize,
        alpha: f64,
        expected: f64,
    },
}

impl NetworkError {
    /// Topology errors, as opposed to well-posedness or usage errors.
    pub fn is_topology(&self) -> bool {
        matches!(
            self,
            NetworkError::Empty
                | NetworkError::UnknownNode { .. }
                | NetworkError::CycleDetected { .. }
                | NetworkError::DisconnectedGraph { .. }
                | NetworkError::RootDegreeNotOne { .. }
                | NetworkError::NonPositiveSpeed { .. }
        )
    }
}

/// How damping coefficients are assigned to internal nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "AlphaSpecRepr")]
pub enum AlphaSpec {
    /// Same coefficient at every internal node.
    Uniform(f64),
    /// `alpha_n = k_n - 2` at every internal node.
    Rule(AlphaRule),
    /// Explicit coefficient per internal node label.
    PerNode(BTreeMap<usize, f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaRule {
    Fts,
}

// Untagged enums buffer map keys as strings, so node labels are parsed here.
#[derive(Deserialize)]
#[serde(untagged)]
enum AlphaSpecRepr {
    Uniform(f64),
    Rule(AlphaRule),
    PerNode(BTreeMap<String, f64>),
}

impl TryFrom<AlphaSpecRepr> for AlphaSpec {
    type Error = String;

    fn try_from(repr: AlphaSpecRepr) -> Result<Self, String> {
        Ok(match repr {
            AlphaSpecRepr::Uniform(a) => AlphaSpec::Uniform(a),
            AlphaSpecRepr::Rule(r) => AlphaSpec::Rule(r),
            AlphaSpecRepr::PerNode(map) => AlphaSpec::PerNode(
                map.into_iter()
                    .map(|(k, a)| {
                        k.trim()
                            .parse::<usize>()
                            .map(|n| (n, a))
                            .map_err(|_| format!("alpha key {k:?} is not a node label"))
                    })
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

/// An undirected edge between two node labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    pub speed: f64,
}

/// Unvalidated network description. Node labels are `0..node_count` and
/// label 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec {
    pub node_count: usize,
    pub edges: Vec<EdgeSpec>,
    pub alpha: AlphaSpec,
    pub root_bc: BoundaryKind,
}

impl TreeSpec {
    /// Checks topology and well-posedness and builds the oriented tree.
    pub fn validate(&self) -> Result<NetworkTree, NetworkError> {
        validate_tree(self)
    }
}

/// A validated, rooted, well-posed network. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTree {
    // Indexed by node; `parent[0]` is unused.
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    // Indexed by edge (= final node); `speed[0]` is unused.
    speed: Vec<f64>,
    alpha: Vec<Option<f64>>,
    labels: Vec<usize>,
    root_bc: BoundaryKind,
}

/// Per-edge clearing times and the derived horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    /// `t[i]` for edge `i`; `t[0]` is unused and zero.
    pub edge_times: Vec<f64>,
    pub root_time: f64,
    pub tree_time: f64,
    /// Root time for every external node taken as root, keyed by node label.
    pub per_leaf: Vec<(usize, f64)>,
    /// `None` when the finite-time damping condition fails somewhere.
    pub predicted_extinction: Option<f64>,
}

/// Validates a network description.
///
/// Accepts iff the edges form a tree, the root has degree one, all speeds are
/// positive, and `alpha_n != k_n` at every internal node.
pub fn validate_tree(spec: &TreeSpec) -> Result<NetworkTree, NetworkError> {
    let n = spec.node_count;
    if spec.edges.is_empty() || n < 2 {
        return Err(NetworkError::Empty);
    }
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut dsu = DisjointSet::new(n);
    for (idx, e) in spec.edges.iter().enumerate() {
        for node in [e.from, e.to] {
            if node >= n {
                return Err(NetworkError::UnknownNode {
                    edge: idx,
                    node,
                    node_count: n,
                });
            }
        }
        if !dsu.union(e.from, e.to) {
            return Err(NetworkError::CycleDetected {
                edge: idx,
                a: e.from,
                b: e.to,
            });
        }
        adjacency[e.from].push((e.to, idx));
        adjacency[e.to].push((e.from, idx));
    }
    if let Some(node) = (1..n).find(|&v| !dsu.same(0, v)) {
        return Err(NetworkError::DisconnectedGraph { node });
    }
    if adjacency[0].len() != 1 {
        return Err(NetworkError::RootDegreeNotOne {
            degree: adjacency[0].len(),
        });
    }
    for (idx, e) in spec.edges.iter().enumerate() {
        if !(e.speed > 0.0) || !e.speed.is_finite() {
            return Err(NetworkError::NonPositiveSpeed {
                edge: idx,
                speed: e.speed,
            });
        }
    }

    // Orient from the root. Labels are kept when they already satisfy the
    // numbering convention; otherwise nodes are renumbered depth-first.
    let keep = adjacency[0][0].0 == 1;
    let graph = LabelledGraph {
        adjacency: adjacency
            .iter()
            .map(|nbrs| {
                nbrs.iter()
                    .map(|&(v, idx)| (v, idx, spec.edges[idx].speed))
                    .collect()
            })
            .collect(),
    };
    let labels: Vec<usize> = (0..n).collect();
    let alpha_by_label = resolve_alpha(spec, &adjacency)?;
    let tree = if keep {
        graph.orient_keeping_labels(&labels, &alpha_by_label, spec.root_bc)
    } else {
        graph.orient_depth_first(0, &labels, &alpha_by_label, spec.root_bc)
    };
    tree.check_well_posed()?;
    Ok(tree)
}

fn resolve_alpha(
    spec: &TreeSpec,
    adjacency: &[Vec<(usize, usize)>],
) -> Result<Vec<Option<f64>>, NetworkError> {
    let degree = |v: usize| adjacency[v].len();
    let mut out = vec![None; spec.node_count];
    for v in 1..spec.node_count {
        if degree(v) >= 2 {
            out[v] = Some(match &spec.alpha {
                AlphaSpec::Uniform(a) => *a,
                AlphaSpec::Rule(AlphaRule::Fts) => degree(v) as f64 - 2.0,
                AlphaSpec::PerNode(map) => *map
                    .get(&v)
                    .ok_or(NetworkError::MissingAlpha { node: v })?,
            });
        }
    }
    if let AlphaSpec::PerNode(map) = &spec.alpha {
        if let Some(&node) = map
            .keys()
            .find(|&&v| v >= spec.node_count || degree(v) < 2 || v == 0)
        {
            return Err(NetworkError::AlphaOnExternalNode { node });
        }
    }
    Ok(out)
}

/// Undirected graph over label-indexed nodes; neighbours carry
/// `(node, original edge key, speed)`.
struct LabelledGraph {
    adjacency: Vec<Vec<(usize, usize, f64)>>,
}

impl LabelledGraph {
    fn orient_keeping_labels(
        &self,
        labels: &[usize],
        alpha: &[Option<f64>],
        root_bc: BoundaryKind,
    ) -> NetworkTree {
        let n = self.adjacency.len();
        let mut parent = vec![0; n];
        let mut children = vec![Vec::new(); n];
        let mut speed = vec![0.0; n];
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(w, _, c) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    speed[w] = c;
                    children[v].push(w);
                    stack.push(w);
                }
            }
        }
        for ch in &mut children {
            ch.sort_unstable();
        }
        NetworkTree {
            parent,
            children,
            speed,
            alpha: alpha.to_vec(),
            labels: labels.to_vec(),
            root_bc,
        }
    }

    /// Preorder renumbering from `root`, visiting child edges in ascending
    /// order of their edge key.
    fn orient_depth_first(
        &self,
        root: usize,
        labels: &[usize],
        alpha: &[Option<f64>],
        root_bc: BoundaryKind,
    ) -> NetworkTree {
        let n = self.adjacency.len();
        let mut new_index = vec![usize::MAX; n];
        let mut parent = vec![0; n];
        let mut children = vec![Vec::new(); n];
        let mut speed = vec![0.0; n];
        let mut new_alpha = vec![None; n];
        let mut new_labels = vec![0; n];

        let mut next = 0;
        // (old node, old parent, speed of edge into it)
        let mut stack = vec![(root, usize::MAX, 0.0)];
        while let Some((v, from, c)) = stack.pop() {
            let id = next;
            next += 1;
            new_index[v] = id;
            new_labels[id] = labels[v];
            new_alpha[id] = alpha[v];
            if from != usize::MAX {
                let p = new_index[from];
                parent[id] = p;
                speed[id] = c;
                children[p].push(id);
            }
            let mut nbrs: Vec<_> = self.adjacency[v]
                .iter()
                .filter(|&&(w, _, _)| w != from)
                .collect();
            nbrs.sort_by_key(|&&(_, key, _)| key);
            for &&(w, _, cw) in nbrs.iter().rev() {
                stack.push((w, v, cw));
            }
        }
        // External nodes carry no alpha.
        for v in 1..n {
            if children[v].is_empty() {
                new_alpha[v] = None;
            }
        }
        NetworkTree {
            parent,
            children,
            speed,
            alpha: new_alpha,
            labels: new_labels,
            root_bc,
        }
    }
}

impl NetworkTree {
    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn edge_count(&self) -> usize {
        self.parent.len() - 1
    }

    /// Initial node of edge `i`.
    pub fn parent_node(&self, edge: usize) -> usize {
        self.parent[edge]
    }

    /// Final node of edge `i`. Always `i`.
    pub fn final_node(&self, edge: usize) -> usize {
        edge
    }

    /// Edges whose initial point is `node`, ascending.
    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn speed(&self, edge: usize) -> f64 {
        self.speed[edge]
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speed[1..]
    }

    pub fn alpha(&self, node: usize) -> Option<f64> {
        self.alpha[node]
    }

    pub fn root_bc(&self) -> BoundaryKind {
        self.root_bc
    }

    /// Label of `node` in the description the tree was built from.
    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn node_by_label(&self, label: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn is_internal(&self, node: usize) -> bool {
        node != 0 && !self.children[node].is_empty()
    }

    pub fn is_external(&self, node: usize) -> bool {
        !self.is_internal(node)
    }

    /// Number of edges meeting at an internal node.
    pub fn degree(&self, node: usize) -> usize {
        self.children[node].len() + usize::from(node != 0)
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.node_count()).filter(|&n| self.is_internal(n))
    }

    pub fn external_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&n| self.is_external(n))
    }

    /// Nodes in an order where every parent precedes its children.
    pub fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.node_count());
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(self.children[v].iter().rev());
        }
        order
    }

    /// Same tree with a different root boundary condition.
    pub fn with_root_bc(&self, root_bc: BoundaryKind) -> NetworkTree {
        NetworkTree {
            root_bc,
            ..self.clone()
        }
    }

    fn check_well_posed(&self) -> Result<(), NetworkError> {
        for n in self.internal_nodes() {
            let k = self.degree(n);
            let alpha = self.alpha[n].expect("internal nodes carry alpha");
            if (alpha - k as f64).abs() <= ALPHA_TOLERANCE {
                return Err(NetworkError::IllPosedAlpha { node: n, alpha, k });
            }
        }
        Ok(())
    }

    /// Whether `alpha_n = k_n - 2` holds at every internal node; returns the
    /// first violating node otherwise.
    pub fn check_fts(&self) -> Result<(), NetworkError> {
        for n in self.internal_nodes() {
            let expected = self.degree(n) as f64 - 2.0;
            let alpha = self.alpha[n].expect("internal nodes carry alpha");
            if (alpha - expected).abs() > ALPHA_TOLERANCE {
                return Err(NetworkError::ConditionFtsViolated {
                    node: n,
                    alpha,
                    expected,
                });
            }
        }
        Ok(())
    }

    /// Clearing time of every edge: `1/c_i` for edges ending at an external
    /// node, `1/c_i + max` over child edges otherwise. Index 0 is unused.
    pub fn edge_times(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.node_count()];
        for &v in self.preorder().iter().rev().filter(|&&v| v != 0) {
            let below = self.children[v]
                .iter()
                .map(|&j| t[j])
                .fold(0.0_f64, f64::max);
            t[v] = 1.0 / self.speed[v] + below;
        }
        t
    }

    pub fn root_time(&self) -> f64 {
        self.edge_times()[1]
    }

    /// Re-roots the tree at an external node. Nodes are renumbered in
    /// depth-first preorder with child edges visited in ascending order of
    /// their current index; speeds, damping coefficients and labels follow
    /// their nodes.
    pub fn reroot(&self, leaf: usize) -> Result<NetworkTree, NetworkError> {
        if leaf >= self.node_count() || !self.is_external(leaf) {
            return Err(NetworkError::NotExternalNode { node: leaf });
        }
        let n = self.node_count();
        let mut adjacency = vec![Vec::new(); n];
        for e in 1..n {
            let p = self.parent[e];
            adjacency[p].push((e, e, self.speed[e]));
            adjacency[e].push((p, e, self.speed[e]));
        }
        let graph = LabelledGraph { adjacency };
        Ok(graph.orient_depth_first(leaf, &self.labels, &self.alpha, self.root_bc))
    }

    /// Root time with each external node as root, in ascending node order.
    pub fn per_leaf_root_times(&self) -> Vec<(usize, f64)> {
        self.external_nodes()
            .map(|leaf| {
                let t = if leaf == 0 {
                    self.root_time()
                } else {
                    self.reroot(leaf)
                        .expect("external node")
                        .root_time()
                };
                (leaf, t)
            })
            .collect()
    }

    /// Largest root time over all choices of external root.
    pub fn tree_time(&self) -> f64 {
        self.per_leaf_root_times()
            .into_iter()
            .map(|(_, t)| t)
            .fold(0.0, f64::max)
    }

    /// Time after which every solution is constant (zero for a Dirichlet
    /// root), valid when `alpha_n = k_n - 2` everywhere.
    pub fn predicted_extinction(&self) -> Result<f64, NetworkError> {
        self.check_fts()?;
        Ok(match self.root_bc {
            BoundaryKind::Dirichlet | BoundaryKind::Neumann => 2.0 * self.root_time(),
            BoundaryKind::Transparent => self.tree_time(),
        })
    }

    pub fn timing_report(&self) -> TimingReport {
        let edge_times = self.edge_times();
        let per_leaf = self.per_leaf_root_times();
        TimingReport {
            root_time: edge_times[1],
            tree_time: per_leaf.iter().map(|&(_, t)| t).fold(0.0, f64::max),
            per_leaf: per_leaf
                .into_iter()
                .map(|(n, t)| (self.labels[n], t))
                .collect(),
            predicted_extinction: self.predicted_extinction().ok(),
            edge_times,
        }
    }

    /// Undirected edge set keyed by node labels, for comparing trees that
    /// differ only in numbering.
    pub fn canonical_form(&self) -> CanonicalTree {
        let mut edges: Vec<(usize, usize, u64)> = (1..self.node_count())
            .map(|e| {
                let (a, b) = (self.labels[self.parent[e]], self.labels[e]);
                (a.min(b), a.max(b), self.speed[e].to_bits())
            })
            .collect();
        edges.sort_unstable();
        let mut alpha: Vec<(usize, u64)> = (0..self.node_count())
            .filter_map(|n| self.alpha[n].map(|a| (self.labels[n], a.to_bits())))
            .collect();
        alpha.sort_unstable();
        CanonicalTree { edges, alpha }
    }

    /// Back to a description, with current node indices as labels.
    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec {
            node_count: self.node_count(),
            edges: (1..self.node_count())
                .map(|e| EdgeSpec {
                    from: self.parent[e],
                    to: e,
                    speed: self.speed[e],
                })
                .collect(),
            alpha: AlphaSpec::PerNode(
                self.internal_nodes()
                    .map(|n| (n, self.alpha[n].unwrap()))
                    .collect(),
            ),
            root_bc: self.root_bc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalTree {
    pub edges: Vec<(usize, usize, u64)>,
    pub alpha: Vec<(usize, u64)>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Ready-made networks used throughout the tests and examples.
pub mod catalog {
    use super::*;

    /// Star with `speeds.len()` edges: root edge 1 into the centre, the
    /// remaining edges pendant.
    pub fn star(speeds: &[f64], alpha: f64, root_bc: BoundaryKind) -> TreeSpec {
        let mut edges = vec![EdgeSpec {
            from: 0,
            to: 1,
            speed: speeds[0],
        }];
        edges.extend(speeds.iter().enumerate().skip(1).map(|(i, &c)| EdgeSpec {
            from: 1,
            to: i + 1,
            speed: c,
        }));
        TreeSpec {
            node_count: speeds.len() + 1,
            edges,
            alpha: AlphaSpec::Uniform(alpha),
            root_bc,
        }
    }

    /// Two internal nodes joined by edge 2. Node 1 has children
    /// `2..=k1`, node 2 has children `k1+1..=k1+k2-1`.
    pub fn bone(
        k1: usize,
        k2: usize,
        alpha: (f64, f64),
        speeds: &[f64],
        root_bc: BoundaryKind,
    ) -> TreeSpec {
        let n_edges = k1 + k2 - 1;
        assert_eq!(speeds.len(), n_edges, "one speed per edge");
        let mut edges = vec![EdgeSpec {
            from: 0,
            to: 1,
            speed: speeds[0],
        }];
        for i in 2..=k1 {
            edges.push(EdgeSpec {
                from: 1,
                to: i,
                speed: speeds[i - 1],
            });
        }
        for i in k1 + 1..=n_edges {
            edges.push(EdgeSpec {
                from: 2,
                to: i,
                speed: speeds[i - 1],
            });
        }
        TreeSpec {
            node_count: n_edges + 1,
            edges,
            alpha: AlphaSpec::PerNode(BTreeMap::from([(1, alpha.0), (2, alpha.1)])),
            root_bc,
        }
    }

    /// Parent of nodes 1..=13 in the 14-node, depth-5 reference tree whose
    /// external nodes are {0, 4, 8, 9, 10, 11, 12, 13}.
    pub const REFERENCE_TREE_PARENTS: [usize; 13] = [0, 1, 1, 2, 2, 3, 5, 5, 5, 6, 6, 7, 7];

    pub fn reference_tree(speed: f64, alpha: AlphaSpec, root_bc: BoundaryKind) -> TreeSpec {
        TreeSpec {
            node_count: 14,
            edges: REFERENCE_TREE_PARENTS
                .iter()
                .enumerate()
                .map(|(i, &p)| EdgeSpec {
                    from: p,
                    to: i + 1,
                    speed,
                })
                .collect(),
            alpha,
            root_bc,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;

    fn fts_reference() -> NetworkTree {
        reference_tree(1.0, AlphaSpec::Rule(AlphaRule::Fts), BoundaryKind::Transparent)
            .validate()
            .unwrap()
    }

    #[test]
    fn star_with_alpha_one_is_accepted() {
        let tree = star(&[1.0; 3], 1.0, BoundaryKind::Dirichlet).validate().unwrap();
        assert_eq!(tree.degree(1), 3);
        assert_eq!(tree.internal_nodes().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn alpha_equal_to_degree_is_ill_posed() {
        let err = star(&[1.0; 3], 3.0, BoundaryKind::Dirichlet)
            .validate()
            .unwrap_err();
        assert_eq!(
            err,
            NetworkError::IllPosedAlpha {
                node: 1,
                alpha: 3.0,
                k: 3
            }
        );
    }

    #[test]
    fn duplicated_edge_is_a_cycle() {
        let spec = TreeSpec {
            node_count: 2,
            edges: vec![
                EdgeSpec { from: 0, to: 1, speed: 1.0 },
                EdgeSpec { from: 0, to: 1, speed: 1.0 },
            ],
            alpha: AlphaSpec::Uniform(0.0),
            root_bc: BoundaryKind::Dirichlet,
        };
        assert!(matches!(
            spec.validate(),
            Err(NetworkError::CycleDetected { .. })
        ));
    }

    #[test]
    fn topology_errors() {
        let mut spec = star(&[1.0; 3], 0.0, BoundaryKind::Dirichlet);
        spec.node_count = 5;
        assert_eq!(
            spec.validate(),
            Err(NetworkError::DisconnectedGraph { node: 4 })
        );

        let mut spec = star(&[1.0; 3], 0.0, BoundaryKind::Dirichlet);
        spec.edges.push(EdgeSpec { from: 0, to: 4, speed: 1.0 });
        spec.node_count = 5;
        assert_eq!(
            spec.validate(),
            Err(NetworkError::RootDegreeNotOne { degree: 2 })
        );

        let spec = star(&[1.0, -2.0, 1.0], 0.0, BoundaryKind::Dirichlet);
        assert!(matches!(
            spec.validate(),
            Err(NetworkError::NonPositiveSpeed { edge: 1, .. })
        ));
    }

    #[test]
    fn per_node_alpha_must_cover_internal_nodes_only() {
        let mut spec = star(&[1.0; 3], 0.0, BoundaryKind::Dirichlet);
        spec.alpha = AlphaSpec::PerNode(BTreeMap::new());
        assert_eq!(spec.validate(), Err(NetworkError::MissingAlpha { node: 1 }));
        spec.alpha = AlphaSpec::PerNode(BTreeMap::from([(1, 0.0), (2, 0.5)]));
        assert_eq!(
            spec.validate(),
            Err(NetworkError::AlphaOnExternalNode { node: 2 })
        );
    }

    #[test]
    fn unary_internal_node_has_degree_two() {
        let tree = fts_reference();
        assert_eq!(tree.children(3), &[6]);
        assert_eq!(tree.degree(3), 2);
        assert_eq!(tree.alpha(3), Some(0.0));
    }

    #[test]
    fn relabels_when_root_neighbour_is_not_node_one() {
        let spec = TreeSpec {
            node_count: 4,
            edges: vec![
                EdgeSpec { from: 0, to: 3, speed: 1.0 },
                EdgeSpec { from: 3, to: 1, speed: 2.0 },
                EdgeSpec { from: 3, to: 2, speed: 4.0 },
            ],
            alpha: AlphaSpec::PerNode(BTreeMap::from([(3, 1.0)])),
            root_bc: BoundaryKind::Neumann,
        };
        let tree = spec.validate().unwrap();
        assert_eq!(tree.label(1), 3);
        assert_eq!(tree.alpha(1), Some(1.0));
        assert_eq!(tree.children(1), &[2, 3]);
        assert_eq!(tree.label(2), 1);
        assert_eq!(tree.speed(2), 2.0);
    }

    #[test]
    fn edge_times_examples() {
        let single = TreeSpec {
            node_count: 2,
            edges: vec![EdgeSpec { from: 0, to: 1, speed: 2.0 }],
            alpha: AlphaSpec::Uniform(0.0),
            root_bc: BoundaryKind::Transparent,
        }
        .validate()
        .unwrap();
        assert_eq!(single.edge_times()[1], 0.5);
        assert_eq!(single.tree_time(), 0.5);

        let s = star(&[1.0; 3], 1.0, BoundaryKind::Dirichlet).validate().unwrap();
        assert_eq!(s.edge_times(), vec![0.0, 2.0, 1.0, 1.0]);
        assert_eq!(s.tree_time(), 2.0);

        let s = star(&[2.0, 1.0, 4.0], 0.0, BoundaryKind::Dirichlet)
            .validate()
            .unwrap();
        assert_eq!(s.root_time(), 1.5);
    }

    #[test]
    fn reference_tree_timing() {
        let tree = fts_reference();
        let t = tree.edge_times();
        assert_eq!(t[1], 5.0);
        assert_eq!(t[2], 4.0);
        assert_eq!(t[3], 3.0);
        assert_eq!(tree.tree_time(), 7.0);
        let by_label = |l| tree.reroot(tree.node_by_label(l).unwrap()).unwrap().root_time();
        assert_eq!(by_label(12), 7.0);
        assert_eq!(by_label(13), 7.0);
        assert_eq!(by_label(10), 7.0);
        assert_eq!(by_label(11), 7.0);
        assert_eq!(by_label(8), 6.0);
        assert_eq!(by_label(9), 6.0);
        assert_eq!(by_label(4), 5.0);
    }

    #[test]
    fn reroot_rejects_internal_nodes() {
        let tree = fts_reference();
        assert_eq!(
            tree.reroot(5),
            Err(NetworkError::NotExternalNode { node: 5 })
        );
    }

    #[test]
    fn reroot_keeps_alpha_with_nodes() {
        let tree = fts_reference();
        let re = tree.reroot(12).unwrap();
        assert_eq!(re.label(0), 12);
        assert_eq!(re.label(1), 7);
        assert_eq!(re.canonical_form(), tree.canonical_form());
        for n in re.internal_nodes() {
            assert_eq!(re.alpha(n), Some(re.degree(n) as f64 - 2.0));
        }
        // Old root became a transparent leaf and carries no alpha.
        let old_root = re.node_by_label(0).unwrap();
        assert!(re.is_external(old_root));
        assert_eq!(re.alpha(old_root), None);
    }

    #[test]
    fn predicted_extinction_by_boundary() {
        let s = star(&[1.0; 3], 1.0, BoundaryKind::Dirichlet).validate().unwrap();
        assert_eq!(s.predicted_extinction(), Ok(4.0));
        assert_eq!(fts_reference().predicted_extinction(), Ok(7.0));
        let s = star(&[1.0; 3], 0.0, BoundaryKind::Dirichlet).validate().unwrap();
        assert!(matches!(
            s.predicted_extinction(),
            Err(NetworkError::ConditionFtsViolated { node: 1, .. })
        ));
    }

    #[test]
    fn to_spec_round_trips() {
        let tree = fts_reference();
        assert_eq!(tree.to_spec().validate().unwrap(), tree);
    }
}
