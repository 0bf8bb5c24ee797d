use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{Circuit, Gate};
use crate::error::{invalid, QbcError, Result};

/// 2^26 amplitudes of 8 bytes is 512 MiB.
pub const DEFAULT_MAX_QUBITS: usize = 26;

/// Real amplitudes over `2^n_qubits` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<f64>,
}

/// Basis index of `|y x_1 ... x_n⟩` with `y` as the most significant bit.
pub fn basis_index(y: u8, x: &[u8]) -> usize {
    x.iter().fold(usize::from(y), |acc, &b| (acc << 1) | usize::from(b))
}

impl StateVector {
    /// `|0...0⟩`
    pub fn zero(n_qubits: usize) -> Self {
        let mut amplitudes = vec![0.0; 1 << n_qubits];
        amplitudes[0] = 1.0;
        Self {
            n_qubits,
            amplitudes,
        }
    }

    pub fn from_amplitudes(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() || !amplitudes.len().is_power_of_two() {
            return invalid("amplitude count must be a power of two");
        }
        let n_qubits = amplitudes.len().trailing_zeros() as usize;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a * a).collect()
    }

    /// `|⟨y x|ψ⟩|²` for a label bit and a feature assignment.
    pub fn probability_of(&self, y: u8, x: &[u8]) -> Result<f64> {
        if x.len() + 1 != self.n_qubits {
            return invalid(format!(
                "assignment has {} features, state has {} feature qubits",
                x.len(),
                self.n_qubits.saturating_sub(1)
            ));
        }
        if y > 1 || x.iter().any(|&b| b > 1) {
            return invalid("assignment bits must be 0 or 1");
        }
        let a = self.amplitudes[basis_index(y, x)];
        Ok(a * a)
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn apply(&mut self, gate: &Gate) {
        match gate {
            Gate::X { target } => {
                let t = self.mask(*target);
                for i in 0..self.amplitudes.len() {
                    if i & t == 0 {
                        self.amplitudes.swap(i, i | t);
                    }
                }
            }
            Gate::Ry {
                controls,
                target,
                theta,
            } => {
                let t = self.mask(*target);
                let ctl = controls.iter().fold(0, |m, &q| m | self.mask(q));
                let (s, c) = (theta / 2.0).sin_cos();
                for i in 0..self.amplitudes.len() {
                    if i & t == 0 && i & ctl == ctl {
                        let j = i | t;
                        let (a0, a1) = (self.amplitudes[i], self.amplitudes[j]);
                        self.amplitudes[i] = c * a0 - s * a1;
                        self.amplitudes[j] = s * a0 + c * a1;
                    }
                }
            }
        }
    }
}

pub fn simulate(circuit: &Circuit) -> Result<StateVector> {
    simulate_with_cap(circuit, DEFAULT_MAX_QUBITS)
}

/// Applies the gates in order to `|0...0⟩`.
pub fn simulate_with_cap(circuit: &Circuit, max_qubits: usize) -> Result<StateVector> {
    if circuit.n_qubits() > max_qubits {
        return Err(QbcError::ResourceLimit(format!(
            "{} qubits exceeds the cap of {max_qubits}",
            circuit.n_qubits()
        )));
    }
    let mut state = StateVector::zero(circuit.n_qubits());
    for gate in circuit.gates() {
        state.apply(gate);
    }
    Ok(state)
}

/// Draws `shots` computational-basis measurements and returns the count of
/// each basis index.
///
/// The multinomial is drawn as a chain of conditional binomials in index
/// order, so the result depends only on the probabilities and the seed.
pub fn sample_shots(state: &StateVector, shots: u64, seed: u64) -> Result<Vec<u64>> {
    if shots == 0 {
        return invalid("shots must be at least 1");
    }
    let probs = state.probabilities();
    let mut counts = vec![0u64; probs.len()];
    let Some(last) = probs.iter().rposition(|&p| p > 0.0) else {
        return invalid("state has no support");
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = shots;
    let mut mass = probs[..=last].iter().sum::<f64>();
    for (k, &p) in probs[..last].iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .map_err(|e| QbcError::InvalidArgument(format!("binomial draw: {e}")))?
            .sample(&mut rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    counts[last] += remaining;
    Ok(counts)
}
