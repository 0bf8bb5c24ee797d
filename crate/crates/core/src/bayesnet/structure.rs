use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, QbcError, Result};

/// Node index: 0 is the label `y`, `1..=n` are the features `x_1..x_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const LABEL: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_label(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_label() {
            write!(f, "y")
        } else {
            write!(f, "x{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    #[default]
    Naive,
    Spode,
    Tan,
    Symmetric,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 4] = [
        NetworkKind::Naive,
        NetworkKind::Spode,
        NetworkKind::Tan,
        NetworkKind::Symmetric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::Naive => "naive",
            NetworkKind::Spode => "spode",
            NetworkKind::Tan => "tan",
            NetworkKind::Symmetric => "symmetric",
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NetworkKind {
    type Err = QbcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(NetworkKind::Naive),
            "spode" => Ok(NetworkKind::Spode),
            "tan" => Ok(NetworkKind::Tan),
            "symmetric" => Ok(NetworkKind::Symmetric),
            other => invalid(format!("unknown network kind {other:?}")),
        }
    }
}

/// A one-dependence Bayesian network over binary nodes.
///
/// `parents[0]` is empty (the label is the root); for every feature the
/// parent list starts with the label, optionally followed by one feature
/// parent. The parent order fixes the bit order of CPT rows and of circuit
/// controls: the first parent is the most significant bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BayesNetDoc")]
pub struct BayesNet {
    kind: NetworkKind,
    n_features: usize,
    parents: Vec<Vec<NodeId>>,
    encode_order: Vec<NodeId>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BayesNetDoc {
    kind: NetworkKind,
    n_features: usize,
    parents: Vec<Vec<NodeId>>,
    encode_order: Vec<NodeId>,
}

impl TryFrom<BayesNetDoc> for BayesNet {
    type Error = QbcError;

    fn try_from(doc: BayesNetDoc) -> Result<Self> {
        BayesNet::from_parts(doc.kind, doc.n_features, doc.parents, doc.encode_order)
    }
}

impl BayesNet {
    /// Assembles a network and checks every structural invariant.
    pub fn from_parts(
        kind: NetworkKind,
        n_features: usize,
        parents: Vec<Vec<NodeId>>,
        encode_order: Vec<NodeId>,
    ) -> Result<Self> {
        if n_features == 0 {
            return invalid("a network needs at least one feature");
        }
        if parents.len() != n_features + 1 {
            return invalid(format!(
                "expected {} parent lists, got {}",
                n_features + 1,
                parents.len()
            ));
        }
        if !parents[0].is_empty() {
            return invalid("the label node cannot have parents");
        }
        for (node, list) in parents.iter().enumerate().skip(1) {
            match list.as_slice() {
                [NodeId::LABEL] => {}
                [NodeId::LABEL, p] if !p.is_label() && p.0 <= n_features && p.0 != node => {}
                _ => {
                    return invalid(format!(
                        "feature x{node} must have parents [y] or [y, x_j] (got {list:?})"
                    ))
                }
            }
        }
        if kind == NetworkKind::Naive && parents.iter().any(|p| p.len() > 1) {
            return invalid("a naive network has no feature-feature edges");
        }

        // encode_order must be a permutation of the features that respects
        // feature-feature edges; this also rules out cycles.
        if encode_order.len() != n_features {
            return invalid("encode order must list every feature exactly once");
        }
        let mut position = vec![usize::MAX; n_features + 1];
        for (pos, node) in encode_order.iter().enumerate() {
            if node.is_label() || node.0 > n_features || position[node.0] != usize::MAX {
                return invalid(format!("encode order is not a feature permutation: {encode_order:?}"));
            }
            position[node.0] = pos;
        }
        for (node, list) in parents.iter().enumerate().skip(1) {
            if let Some(p) = list.get(1) {
                if position[p.0] >= position[node] {
                    return invalid(format!(
                        "encode order places x{node} before its parent {p}"
                    ));
                }
            }
        }

        Ok(Self {
            kind,
            n_features,
            parents,
            encode_order,
        })
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn parents(&self, node: NodeId) -> &[NodeId] {
        &self.parents[node.0]
    }

    /// The feature parent of `node`, if any.
    pub fn feature_parent(&self, node: NodeId) -> Option<NodeId> {
        self.parents[node.0].get(1).copied()
    }

    pub fn encode_order(&self) -> &[NodeId] {
        &self.encode_order
    }

    pub fn features(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.n_features).map(NodeId)
    }

    /// Directed edges `(parent, child)`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut edges: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(child, list)| list.iter().map(move |&p| (p, NodeId(child))))
            .collect();
        edges.sort();
        edges
    }

    /// Undirected feature-feature edges as `(low, high)` pairs, sorted.
    pub fn feature_edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut edges: Vec<_> = self
            .features()
            .filter_map(|f| self.feature_parent(f).map(|p| (p.min(f), p.max(f))))
            .collect();
        edges.sort();
        edges
    }

    /// Row index into the CPT of `node` for a full assignment `(y, x)`.
    ///
    /// Parent values are read in parent-list order, most significant first.
    pub fn parent_assignment(&self, node: NodeId, y: u8, x: &[u8]) -> usize {
        self.parents[node.0].iter().fold(0, |acc, p| {
            let bit = if p.is_label() { y } else { x[p.0 - 1] };
            (acc << 1) | usize::from(bit)
        })
    }
}

fn check_feature(n: usize, node: NodeId, what: &str) -> Result<()> {
    if node.is_label() || node.0 > n {
        return invalid(format!("{what} {} is not a feature in 1..={n}", node.0));
    }
    Ok(())
}

/// Every feature depends only on the label.
pub fn build_naive(n: usize) -> Result<BayesNet> {
    if n == 0 {
        return invalid("a network needs at least one feature");
    }
    let mut parents = vec![Vec::new()];
    parents.extend((0..n).map(|_| vec![NodeId::LABEL]));
    BayesNet::from_parts(NetworkKind::Naive, n, parents, (1..=n).map(NodeId).collect())
}

/// Every feature other than `superparent` depends on `y` and `superparent`.
pub fn build_spode(n: usize, superparent: NodeId) -> Result<BayesNet> {
    if n == 0 {
        return invalid("a network needs at least one feature");
    }
    check_feature(n, superparent, "superparent")?;
    let mut parents = vec![Vec::new()];
    for f in 1..=n {
        if f == superparent.0 {
            parents.push(vec![NodeId::LABEL]);
        } else {
            parents.push(vec![NodeId::LABEL, superparent]);
        }
    }
    let mut order = vec![superparent];
    order.extend((1..=n).filter(|&f| f != superparent.0).map(NodeId));
    BayesNet::from_parts(NetworkKind::Spode, n, parents, order)
}

/// Orients an undirected feature tree away from `root` and adds the label
/// as a parent of every feature. The encode order is breadth-first from the
/// root, visiting neighbours in ascending index order.
pub fn build_tan_from_tree(n: usize, tree: &[(NodeId, NodeId)], root: NodeId) -> Result<BayesNet> {
    if n == 0 {
        return invalid("a network needs at least one feature");
    }
    check_feature(n, root, "tree root")?;
    if tree.len() + 1 != n {
        return invalid(format!(
            "a spanning tree over {n} features has {} edges, got {}",
            n - 1,
            tree.len()
        ));
    }
    let mut adjacency = vec![Vec::new(); n + 1];
    for &(a, b) in tree {
        check_feature(n, a, "tree node")?;
        check_feature(n, b, "tree node")?;
        if a == b {
            return invalid("self-loop in feature tree");
        }
        adjacency[a.0].push(b);
        adjacency[b.0].push(a);
    }
    for list in &mut adjacency {
        list.sort();
    }

    let mut parents = vec![Vec::new(); n + 1];
    let mut visited = vec![false; n + 1];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    visited[root.0] = true;
    parents[root.0] = vec![NodeId::LABEL];
    while let Some(node) = queue.pop_front() {
        order.push(node);
        for &next in &adjacency[node.0] {
            if !visited[next.0] {
                visited[next.0] = true;
                parents[next.0] = vec![NodeId::LABEL, node];
                queue.push_back(next);
            }
        }
    }
    if order.len() != n {
        return invalid("feature edges do not form a spanning tree");
    }
    BayesNet::from_parts(NetworkKind::Tan, n, parents, order)
}

/// Naive network plus one directed edge per symmetric feature pair,
/// oriented from the lower to the higher index.
pub fn build_symmetric(n: usize, pairs: &[(NodeId, NodeId)]) -> Result<BayesNet> {
    if n == 0 {
        return invalid("a network needs at least one feature");
    }
    let mut parents: Vec<Vec<NodeId>> = vec![Vec::new()];
    parents.extend((0..n).map(|_| vec![NodeId::LABEL]));
    let mut used = vec![false; n + 1];
    let mut child_of = vec![None; n + 1];
    for &(a, b) in pairs {
        check_feature(n, a, "symmetric pair member")?;
        check_feature(n, b, "symmetric pair member")?;
        if a == b {
            return invalid(format!("symmetric pair ({a}, {b}) repeats a feature"));
        }
        if used[a.0] || used[b.0] {
            return invalid(format!("symmetric pairs overlap at ({a}, {b})"));
        }
        used[a.0] = true;
        used[b.0] = true;
        let (low, high) = (a.min(b), a.max(b));
        parents[high.0].push(low);
        child_of[low.0] = Some(high);
    }

    let mut order = Vec::with_capacity(n);
    for f in 1..=n {
        if parents[f].len() == 1 {
            order.push(NodeId(f));
            if let Some(child) = child_of[f] {
                order.push(child);
            }
        }
    }
    BayesNet::from_parts(NetworkKind::Symmetric, n, parents, order)
}
