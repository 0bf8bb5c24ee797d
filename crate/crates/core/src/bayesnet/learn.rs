//! TAN structure learning: conditional mutual information weights and a
//! deterministic maximum-weight spanning tree.

use serde::{Deserialize, Serialize};

use super::structure::{build_naive, build_tan_from_tree, BayesNet, NodeId};
use super::SampleSet;
use crate::error::{invalid, Result};

/// How the per-class terms of the conditional mutual information are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmiWeighting {
    /// `Σ P(xi, xj, c) · log[P(xi, xj | c) / (P(xi | c) P(xj | c))]`
    #[default]
    Joint,
    /// `Σ P(xi, xj | c) · log[...]`, i.e. without the class weight `P(c)`.
    ClassConditional,
}

/// Conditional mutual information `I(xi; xj | y)` in nats.
///
/// All probabilities come from a single 2×2×2 joint table over
/// `(xi, xj, y)` smoothed with `alpha` per cell, so the estimate is never
/// negative beyond rounding.
pub fn conditional_mutual_information(
    samples: &SampleSet,
    i: NodeId,
    j: NodeId,
    alpha: f64,
    weighting: CmiWeighting,
) -> Result<f64> {
    let n = samples.n_features();
    for node in [i, j] {
        if node.is_label() || node.0 > n {
            return invalid(format!("{node} is not a feature in 1..={n}"));
        }
    }
    if i == j {
        return invalid("conditional mutual information needs two distinct features");
    }
    if samples.is_empty() {
        return invalid("conditional mutual information needs at least one sample");
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return invalid(format!("smoothing pseudocount must be finite and >= 0, got {alpha}"));
    }

    // counts[xi][xj][c]
    let mut counts = [[[0u64; 2]; 2]; 2];
    for (c, bits) in samples.rows() {
        counts[bits[i.0 - 1] as usize][bits[j.0 - 1] as usize][c as usize] += 1;
    }
    let total = samples.len() as f64 + 8.0 * alpha;
    let mut joint = [[[0.0f64; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                joint[a][b][c] = (counts[a][b][c] as f64 + alpha) / total;
            }
        }
    }

    let mut cmi = 0.0;
    for c in 0..2 {
        let pc: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| joint[a][b][c]).sum();
        if pc == 0.0 {
            continue;
        }
        for a in 0..2 {
            let pa = joint[a][0][c] + joint[a][1][c];
            for b in 0..2 {
                let p = joint[a][b][c];
                if p == 0.0 {
                    continue;
                }
                let pb = joint[0][b][c] + joint[1][b][c];
                // P(a,b|c) / (P(a|c) P(b|c)) = P(a,b,c) P(c) / (P(a,c) P(b,c))
                let ratio = (p * pc) / (pa * pb);
                let weight = match weighting {
                    CmiWeighting::Joint => p,
                    CmiWeighting::ClassConditional => p / pc,
                };
                cmi += weight * ratio.ln();
            }
        }
    }
    Ok(cmi)
}

/// Symmetric matrix of pairwise edge weights over features `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    values: Vec<f64>,
}

impl WeightMatrix {
    /// Builds a matrix from its strict upper triangle, listed row-major:
    /// `(1,2), (1,3), ..., (1,n), (2,3), ...`.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return invalid(format!(
                "{n} features need {} pairwise weights, got {}",
                n * n.saturating_sub(1) / 2,
                upper.len()
            ));
        }
        let mut m = Self {
            n,
            values: vec![0.0; n * n],
        };
        let mut it = upper.iter();
        for a in 1..=n {
            for b in a + 1..=n {
                let w = *it.next().expect("length checked");
                if !w.is_finite() || w < 0.0 {
                    return invalid(format!("weight ({a},{b}) = {w} must be finite and >= 0"));
                }
                m.set(a, b, w);
            }
        }
        Ok(m)
    }

    /// Pairwise conditional mutual information over all feature pairs.
    pub fn from_samples(samples: &SampleSet, alpha: f64, weighting: CmiWeighting) -> Result<Self> {
        let n = samples.n_features();
        let mut m = Self {
            n,
            values: vec![0.0; n * n],
        };
        for a in 1..=n {
            for b in a + 1..=n {
                let w = conditional_mutual_information(samples, NodeId(a), NodeId(b), alpha, weighting)?;
                // rounding can leave a -1e-17 on independent pairs
                m.set(a, b, w.max(0.0));
            }
        }
        Ok(m)
    }

    fn set(&mut self, a: usize, b: usize, w: f64) {
        self.values[(a - 1) * self.n + (b - 1)] = w;
        self.values[(b - 1) * self.n + (a - 1)] = w;
    }

    pub fn n_features(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> f64 {
        self.values[(a.0 - 1) * self.n + (b.0 - 1)]
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // smaller root wins so the structure is independent of call history
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

/// Kruskal over the complete feature graph.
///
/// Edges are considered by descending weight, ties broken by ascending
/// `(i, j)`. Returns `n - 1` edges `(i, j)` with `i < j` in selection order.
pub fn max_weight_spanning_tree(weights: &WeightMatrix) -> Result<Vec<(NodeId, NodeId)>> {
    let n = weights.n_features();
    if n < 2 {
        return invalid(format!("a spanning tree needs at least 2 features, got {n}"));
    }
    let mut edges: Vec<(NodeId, NodeId)> = (1..=n)
        .flat_map(|a| (a + 1..=n).map(move |b| (NodeId(a), NodeId(b))))
        .collect();
    edges.sort_by(|&(a1, b1), &(a2, b2)| {
        weights
            .get(a2, b2)
            .total_cmp(&weights.get(a1, b1))
            .then((a1, b1).cmp(&(a2, b2)))
    });

    let mut sets = DisjointSet::new(n + 1);
    let mut tree = Vec::with_capacity(n - 1);
    for (a, b) in edges {
        if sets.union(a.0, b.0) {
            tree.push((a, b));
            if tree.len() == n - 1 {
                break;
            }
        }
    }
    Ok(tree)
}

/// Learns a tree-augmented naive network rooted at `root`.
///
/// With a single feature there is no tree to learn and the naive network is
/// returned instead.
pub fn build_tan(
    samples: &SampleSet,
    root: NodeId,
    alpha: f64,
    weighting: CmiWeighting,
) -> Result<BayesNet> {
    let n = samples.n_features();
    if n == 1 {
        log::warn!("TAN requested with one feature; using the naive structure");
        return build_naive(1);
    }
    if root.is_label() || root.0 > n {
        return invalid(format!("tree root {} is not a feature in 1..={n}", root.0));
    }
    let weights = WeightMatrix::from_samples(samples, alpha, weighting)?;
    let tree = max_weight_spanning_tree(&weights)?;
    build_tan_from_tree(n, &tree, root)
}
