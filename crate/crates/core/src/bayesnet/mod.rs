//! Binary Bayesian networks over one label node `y` and `n` feature nodes.
//!
//! Every network in this crate is a one-dependence estimator: each feature
//! has the label as a parent plus at most one feature parent. The four
//! supported families are naive, SPODE (shared super-parent), TAN
//! (conditional-mutual-information spanning tree) and symmetric-feature
//! networks.

mod cpt;
mod learn;
mod structure;

pub use cpt::{estimate_cpts, joint_probability, CptSet};
pub use learn::{
    build_tan, conditional_mutual_information, max_weight_spanning_tree, CmiWeighting,
    WeightMatrix,
};
pub use structure::{
    build_naive, build_spode, build_symmetric, build_tan_from_tree, BayesNet, NetworkKind, NodeId,
};

use crate::error::{invalid, Result};

/// Binarized training rows: a label bit plus `n` feature bits per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    n_features: usize,
    labels: Vec<u8>,
    features: Vec<u8>,
}

impl SampleSet {
    pub fn new(n_features: usize) -> Self {
        Self {
            n_features,
            labels: Vec::new(),
            features: Vec::new(),
        }
    }

    pub fn from_rows<I, R>(n_features: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u8, R)>,
        R: AsRef<[u8]>,
    {
        let mut set = Self::new(n_features);
        for (label, bits) in rows {
            set.push(label, bits.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, label: u8, bits: &[u8]) -> Result<()> {
        if bits.len() != self.n_features {
            return invalid(format!(
                "sample has {} feature bits, expected {}",
                bits.len(),
                self.n_features
            ));
        }
        if label > 1 || bits.iter().any(|&b| b > 1) {
            return invalid("sample bits must be 0 or 1");
        }
        self.labels.push(label);
        self.features.extend_from_slice(bits);
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> (u8, &[u8]) {
        let start = i * self.n_features;
        (self.labels[i], &self.features[start..start + self.n_features])
    }

    pub fn rows(&self) -> impl Iterator<Item = (u8, &[u8])> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }
}
