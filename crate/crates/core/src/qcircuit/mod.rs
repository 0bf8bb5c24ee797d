//! Amplitude-encoding circuits over `{X, Ry, CⁿRy}`.
//!
//! Qubit 0 holds the label `y` and qubit `i` holds feature `x_i`. Basis
//! states are indexed with qubit 0 as the most significant bit, matching the
//! ket order `|y x_1 ... x_n⟩`.

mod compile;
mod export;
mod statevector;

pub use compile::{angle_from_probability, compile, compile_with, CompileOptions};
pub use export::{export, parse_circuit_json, ExportFormat};
pub use statevector::{
    basis_index, sample_shots, simulate, simulate_with_cap, StateVector, DEFAULT_MAX_QUBITS,
};

use serde::{Deserialize, Serialize};

use crate::error::{QbcError, Result};

/// Circuit document version written by [`export`] and stored in models.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Gate {
    #[serde(rename = "x")]
    X { target: usize },
    /// `Ry(theta)` on `target`, applied only where every control is `|1⟩`.
    /// No controls means a plain `Ry`.
    #[serde(rename = "cry")]
    Ry {
        controls: Vec<usize>,
        target: usize,
        theta: f64,
    },
}

impl Gate {
    pub fn x(target: usize) -> Self {
        Gate::X { target }
    }

    pub fn ry(target: usize, theta: f64) -> Self {
        Gate::Ry {
            controls: Vec::new(),
            target,
            theta,
        }
    }

    pub fn cry(controls: Vec<usize>, target: usize, theta: f64) -> Self {
        Gate::Ry {
            controls,
            target,
            theta,
        }
    }

    pub fn target(&self) -> usize {
        match self {
            Gate::X { target } | Gate::Ry { target, .. } => *target,
        }
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self, Gate::Ry { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitDoc", into = "CircuitDoc")]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitDoc {
    format_version: u32,
    qubits: usize,
    gates: Vec<Gate>,
}

impl From<Circuit> for CircuitDoc {
    fn from(c: Circuit) -> Self {
        CircuitDoc {
            format_version: FORMAT_VERSION,
            qubits: c.n_qubits,
            gates: c.gates,
        }
    }
}

impl TryFrom<CircuitDoc> for Circuit {
    type Error = QbcError;

    fn try_from(doc: CircuitDoc) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(QbcError::Format(format!(
                "unsupported circuit format_version {}",
                doc.format_version
            )));
        }
        Circuit::new(doc.qubits, doc.gates)
    }
}

impl Circuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for (k, gate) in gates.iter().enumerate() {
            let bad = |msg: String| Err(QbcError::InvalidArgument(format!("gate {k}: {msg}")));
            if gate.target() >= n_qubits {
                return bad(format!("target {} outside {n_qubits} qubits", gate.target()));
            }
            if let Gate::Ry {
                controls,
                target,
                theta,
            } = gate
            {
                if !theta.is_finite() {
                    return bad(format!("rotation angle {theta} is not finite"));
                }
                for (m, &c) in controls.iter().enumerate() {
                    if c >= n_qubits {
                        return bad(format!("control {c} outside {n_qubits} qubits"));
                    }
                    if c == *target {
                        return bad(format!("qubit {c} is both control and target"));
                    }
                    if controls[..m].contains(&c) {
                        return bad(format!("control {c} repeated"));
                    }
                }
            }
        }
        Ok(Self { n_qubits, gates })
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn rotation_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_rotation()).count()
    }

    pub fn x_count(&self) -> usize {
        self.gates.len() - self.rotation_count()
    }
}
