use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::structure::{BayesNet, NodeId};
use super::SampleSet;
use crate::error::{invalid, QbcError, Result};

/// Conditional probability tables for a binary network.
///
/// `tables[i - 1][a]` is `P(x_i = 0 | parents = a)` where `a` packs the
/// parent values in parent-list order, most significant bit first. In JSON
/// each table is an object keyed by the parent bitstring (`"0"`, `"01"`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CptDoc", into = "CptDoc")]
pub struct CptSet {
    prior0: f64,
    tables: Vec<Vec<f64>>,
    alpha: f64,
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptDoc {
    prior0: f64,
    alpha: f64,
    /// Set when some probability is exactly 0 or 1 (only possible with
    /// `alpha = 0`).
    degenerate: bool,
    tables: Vec<BTreeMap<String, f64>>,
}

impl From<CptSet> for CptDoc {
    fn from(c: CptSet) -> Self {
        let tables = c
            .tables
            .iter()
            .map(|t| {
                let width = t.len().trailing_zeros() as usize;
                t.iter()
                    .enumerate()
                    .map(|(a, &p)| (format!("{a:0width$b}"), p))
                    .collect()
            })
            .collect();
        CptDoc {
            prior0: c.prior0,
            alpha: c.alpha,
            degenerate: c.degenerate,
            tables,
        }
    }
}

impl TryFrom<CptDoc> for CptSet {
    type Error = QbcError;

    fn try_from(doc: CptDoc) -> Result<Self> {
        let mut tables = Vec::with_capacity(doc.tables.len());
        for (i, map) in doc.tables.into_iter().enumerate() {
            let width = map.keys().next().map_or(0, String::len);
            if map.len() != 1 << width || map.keys().any(|k| k.len() != width) {
                return Err(QbcError::Format(format!(
                    "table for x{} must have 2^k keys of k bits",
                    i + 1
                )));
            }
            let mut table = vec![f64::NAN; map.len()];
            for (key, p) in map {
                let a = usize::from_str_radix(&key, 2)
                    .map_err(|_| QbcError::Format(format!("bad parent bitstring {key:?}")))?;
                table[a] = p;
            }
            tables.push(table);
        }
        CptSet::new(doc.prior0, tables, doc.alpha)
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("{what} = {p} is not a probability"));
    }
    Ok(())
}

impl CptSet {
    pub fn new(prior0: f64, tables: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        check_probability(prior0, "P(y=0)")?;
        for (i, table) in tables.iter().enumerate() {
            if table.is_empty() || !table.len().is_power_of_two() {
                return invalid(format!("table for x{} must have 2^k entries", i + 1));
            }
            for &p in table {
                check_probability(p, &format!("P(x{}=0 | ...)", i + 1))?;
            }
        }
        let degenerate = std::iter::once(prior0)
            .chain(tables.iter().flatten().copied())
            .any(|p| p == 0.0 || p == 1.0);
        Ok(Self {
            prior0,
            tables,
            alpha,
            degenerate,
        })
    }

    /// `P(y = 0)`.
    pub fn prior0(&self) -> f64 {
        self.prior0
    }

    /// The table of `P(node = 0 | parent assignment)` for a feature node.
    pub fn table(&self, node: NodeId) -> &[f64] {
        &self.tables[node.0 - 1]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// True when some entry is exactly 0 or 1.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Checks that every table has the shape required by `net`.
    pub fn check_against(&self, net: &BayesNet) -> Result<()> {
        if self.tables.len() != net.n_features() {
            return Err(QbcError::InvalidModel(format!(
                "CPT set has {} tables for {} features",
                self.tables.len(),
                net.n_features()
            )));
        }
        for node in net.features() {
            let want = 1usize << net.parents(node).len();
            if self.table(node).len() != want {
                return Err(QbcError::InvalidModel(format!(
                    "table for {node} has {} entries, its {} parents need {want}",
                    self.table(node).len(),
                    net.parents(node).len()
                )));
            }
        }
        Ok(())
    }
}

/// Frequency estimates with additive smoothing:
/// `(count(node = 0, parents = a) + alpha) / (count(parents = a) + 2·alpha)`.
///
/// With `alpha = 0` a parent assignment that never occurs has no estimate;
/// such rows are set to 1/2 and the set is marked degenerate.
pub fn estimate_cpts(net: &BayesNet, samples: &SampleSet, alpha: f64) -> Result<CptSet> {
    if samples.is_empty() {
        return invalid("cannot estimate probabilities from an empty sample set");
    }
    if samples.n_features() != net.n_features() {
        return invalid(format!(
            "samples have {} features, network has {}",
            samples.n_features(),
            net.n_features()
        ));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return invalid(format!("smoothing pseudocount must be finite and >= 0, got {alpha}"));
    }

    let n = net.n_features();
    let mut zeros: Vec<Vec<u64>> = net.features().map(|f| vec![0; 1 << net.parents(f).len()]).collect();
    let mut totals = zeros.clone();
    let mut label_zero = 0u64;
    for (y, x) in samples.rows() {
        if y == 0 {
            label_zero += 1;
        }
        for f in 1..=n {
            let a = net.parent_assignment(NodeId(f), y, x);
            totals[f - 1][a] += 1;
            if x[f - 1] == 0 {
                zeros[f - 1][a] += 1;
            }
        }
    }

    let mut unseen = false;
    let ratio = |num: u64, den: u64, unseen: &mut bool| {
        let d = den as f64 + 2.0 * alpha;
        if d == 0.0 {
            *unseen = true;
            0.5
        } else {
            (num as f64 + alpha) / d
        }
    };
    let prior0 = ratio(label_zero, samples.len() as u64, &mut unseen);
    let tables = zeros
        .iter()
        .zip(&totals)
        .map(|(z, t)| z.iter().zip(t).map(|(&num, &den)| ratio(num, den, &mut unseen)).collect())
        .collect();
    let mut cpts = CptSet::new(prior0, tables, alpha)?;
    cpts.degenerate |= unseen;
    Ok(cpts)
}

/// Chain-rule joint probability `P(y) · Π P(x_i | parents(x_i))`.
pub fn joint_probability(net: &BayesNet, cpts: &CptSet, y: u8, x: &[u8]) -> Result<f64> {
    if x.len() != net.n_features() {
        return invalid(format!(
            "assignment has {} features, network has {}",
            x.len(),
            net.n_features()
        ));
    }
    if y > 1 || x.iter().any(|&b| b > 1) {
        return invalid("assignment bits must be 0 or 1");
    }
    let mut p = if y == 0 { cpts.prior0 } else { 1.0 - cpts.prior0 };
    for f in net.features() {
        let q0 = cpts.table(f)[net.parent_assignment(f, y, x)];
        p *= if x[f.0 - 1] == 0 { q0 } else { 1.0 - q0 };
    }
    Ok(p)
}
