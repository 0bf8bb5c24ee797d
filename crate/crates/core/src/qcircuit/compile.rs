use super::{Circuit, Gate};
use crate::bayesnet::{BayesNet, CptSet};
use crate::error::{invalid, Result};

/// Tolerance for probabilities that drift just outside `[0, 1]`.
const PROBABILITY_SLACK: f64 = 1e-12;

/// Rotation angle that stores `p` as the squared `|0⟩` amplitude:
/// `theta = 2·arccos(√p)`, so `cos²(theta/2) = p`.
pub fn angle_from_probability(p: f64) -> Result<f64> {
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) {
        return invalid(format!("{p} is not a probability"));
    }
    Ok(2.0 * p.clamp(0.0, 1.0).sqrt().acos())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// Cancel X gates that meet back to back between control patterns.
    /// Off by default so the gate list mirrors the textbook layout.
    pub elide_x_pairs: bool,
}

pub fn compile(net: &BayesNet, cpts: &CptSet) -> Result<Circuit> {
    compile_with(net, cpts, CompileOptions::default())
}

/// Emits `Ry(f(P(y=0)))` on the label qubit, then for every feature in
/// encode order one controlled rotation per parent assignment. Controls
/// whose required value is 0 are wrapped in X gates.
pub fn compile_with(net: &BayesNet, cpts: &CptSet, options: CompileOptions) -> Result<Circuit> {
    cpts.check_against(net)?;
    let mut gates = vec![Gate::ry(0, angle_from_probability(cpts.prior0())?)];
    for &node in net.encode_order() {
        let controls: Vec<usize> = net.parents(node).iter().map(|p| p.index()).collect();
        let k = controls.len();
        for (assignment, &p) in cpts.table(node).iter().enumerate() {
            let flipped: Vec<usize> = controls
                .iter()
                .enumerate()
                .filter(|&(m, _)| (assignment >> (k - 1 - m)) & 1 == 0)
                .map(|(_, &q)| q)
                .collect();
            gates.extend(flipped.iter().map(|&q| Gate::x(q)));
            gates.push(Gate::cry(controls.clone(), node.index(), angle_from_probability(p)?));
            gates.extend(flipped.iter().map(|&q| Gate::x(q)));
        }
    }
    if options.elide_x_pairs {
        gates = cancel_x_pairs(gates);
    }
    Circuit::new(net.n_features() + 1, gates)
}

/// Within each run of consecutive X gates (which all commute), drops pairs
/// acting on the same qubit.
fn cancel_x_pairs(gates: Vec<Gate>) -> Vec<Gate> {
    let mut out = Vec::with_capacity(gates.len());
    let mut run: Vec<usize> = Vec::new();
    let flush = |run: &mut Vec<usize>, out: &mut Vec<Gate>| {
        let mut kept: Vec<usize> = Vec::new();
        for &q in run.iter() {
            if let Some(pos) = kept.iter().position(|&k| k == q) {
                kept.remove(pos);
            } else {
                kept.push(q);
            }
        }
        out.extend(kept.into_iter().map(Gate::x));
        run.clear();
    };
    for gate in gates {
        match gate {
            Gate::X { target } => run.push(target),
            other => {
                flush(&mut run, &mut out);
                out.push(other);
            }
        }
    }
    flush(&mut run, &mut out);
    out
}
