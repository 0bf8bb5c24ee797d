use std::fmt::Write;
use std::str::FromStr;

use super::{Circuit, Gate, FORMAT_VERSION};
use crate::error::{invalid, QbcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Qasm3,
}

impl FromStr for ExportFormat {
    type Err = QbcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "qasm3" => Ok(ExportFormat::Qasm3),
            other => invalid(format!("unknown circuit format {other:?} (expected json or qasm3)")),
        }
    }
}

/// Angles are written with 17 significant digits so they parse back to the
/// same `f64`.
fn angle(theta: f64) -> String {
    format!("{theta:.16e}")
}

fn join(qubits: &[usize]) -> String {
    qubits.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",")
}

pub fn export(circuit: &Circuit, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => export_json(circuit),
        ExportFormat::Qasm3 => export_qasm3(circuit),
    }
}

fn export_json(circuit: &Circuit) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\n  \"format_version\": {FORMAT_VERSION},\n  \"qubits\": {},\n  \"gates\": [",
        circuit.n_qubits()
    );
    for (k, gate) in circuit.gates().iter().enumerate() {
        out.push_str(if k == 0 { "\n    " } else { ",\n    " });
        match gate {
            Gate::X { target } => {
                let _ = write!(out, "{{\"kind\": \"x\", \"target\": {target}}}");
            }
            Gate::Ry {
                controls,
                target,
                theta,
            } => {
                let _ = write!(
                    out,
                    "{{\"kind\": \"cry\", \"controls\": [{}], \"target\": {target}, \"theta\": {}}}",
                    join(controls),
                    angle(*theta)
                );
            }
        }
    }
    if !circuit.gates().is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out
}

fn export_qasm3(circuit: &Circuit) -> String {
    let mut out = String::new();
    out.push_str("OPENQASM 3.0;\ninclude \"stdgates.inc\";\n");
    let _ = writeln!(out, "// format_version: {FORMAT_VERSION}");
    let _ = writeln!(out, "qubit[{}] q;", circuit.n_qubits());
    for gate in circuit.gates() {
        match gate {
            Gate::X { target } => {
                let _ = writeln!(out, "x q[{target}];");
            }
            Gate::Ry {
                controls,
                target,
                theta,
            } if controls.is_empty() => {
                let _ = writeln!(out, "ry({}) q[{target}];", angle(*theta));
            }
            Gate::Ry {
                controls,
                target,
                theta,
            } => {
                let operands: Vec<String> = controls
                    .iter()
                    .chain(std::iter::once(target))
                    .map(|q| format!("q[{q}]"))
                    .collect();
                let _ = writeln!(
                    out,
                    "ctrl({}) @ ry({}) {};",
                    controls.len(),
                    angle(*theta),
                    operands.join(", ")
                );
            }
        }
    }
    out
}

/// Parses the JSON circuit document produced by [`export`].
pub fn parse_circuit_json(text: &str) -> Result<Circuit> {
    serde_json::from_str(text).map_err(|e| QbcError::Format(format!("circuit document: {e}")))
}
