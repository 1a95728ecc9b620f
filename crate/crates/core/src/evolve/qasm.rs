//! OpenQASM 2.0 export of reservoir circuits, and a reader for the subset we
//! emit (`h`, `rz`, `ry`, `cx`, `reset`, `measure`).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evolve::{Gate, GateCircuit};

/// QASM real literal that parses back to the identical `f64`.
fn format_angle(x: f64) -> String {
    let s = format!("{x:?}");
    match s.find('e') {
        Some(pos) if !s[..pos].contains('.') => format!("{}.0{}", &s[..pos], &s[pos..]),
        _ => s,
    }
}

fn write_gate(out: &mut String, gate: &Gate) {
    // writing into a String cannot fail
    let _ = match *gate {
        Gate::Hadamard { target } => writeln!(out, "h q[{target}];"),
        Gate::RotZ { angle, target } => writeln!(out, "rz({}) q[{target}];", format_angle(angle)),
        Gate::RotY { angle, target } => writeln!(out, "ry({}) q[{target}];", format_angle(angle)),
        Gate::Cnot { control, target } => writeln!(out, "cx q[{control}],q[{target}];"),
        Gate::Reset { target } => writeln!(out, "reset q[{target}];"),
        Gate::StatePrep { angle, target } => writeln!(
            out,
            "reset q[{target}];\nry({}) q[{target}];",
            format_angle(angle)
        ),
    };
}

/// Emit the reservoir program that feeds `input_angles` in order: for each
/// angle, `reset q[0]; ry(angle) q[0];` then the `circuit` body; finally a
/// z-basis measurement of every qubit.
pub fn export_qasm(circuit: &GateCircuit, input_angles: &[f64]) -> Result<String> {
    export_qasm_annotated(circuit, input_angles, &[])
}

/// As [`export_qasm`], with `// key: value` comment lines after the header.
pub fn export_qasm_annotated(
    circuit: &GateCircuit,
    input_angles: &[f64],
    notes: &[(&str, String)],
) -> Result<String> {
    if input_angles.is_empty() {
        return Err(Error::param("no input angles to export"));
    }
    if let Some(bad) = input_angles.iter().find(|a| !a.is_finite()) {
        return Err(Error::param(format!("input angle {bad} is not finite")));
    }
    let n = circuit.width();
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    for (key, value) in notes {
        let _ = writeln!(out, "// {key}: {value}");
    }
    let _ = writeln!(out, "qreg q[{n}];\ncreg c[{n}];");
    for (step, &angle) in input_angles.iter().enumerate() {
        let _ = writeln!(out, "// step {step}");
        write_gate(&mut out, &Gate::StatePrep { angle, target: 0 });
        for gate in circuit.gates() {
            write_gate(&mut out, gate);
        }
    }
    for q in 0..n {
        let _ = writeln!(out, "measure q[{q}] -> c[{q}];");
    }
    Ok(out)
}

/// A parsed program: the gate sequence plus the measured qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct QasmProgram {
    pub circuit: GateCircuit,
    pub measured: Vec<usize>,
}

struct LineParser<'a> {
    line: usize,
    source: &'a str,
}

impl LineParser<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn qubit(&self, arg: &str, reg: &str) -> Result<usize> {
        let arg = arg.trim();
        arg.strip_prefix(reg)
            .and_then(|rest| rest.strip_prefix('['))
            .and_then(|rest| rest.strip_suffix(']'))
            .and_then(|idx| idx.trim().parse().ok())
            .ok_or_else(|| self.err(format!("expected {reg}[index], found `{arg}`")))
    }

    fn angle(&self, head: &str) -> Result<f64> {
        head.split_once('(')
            .and_then(|(_, rest)| rest.strip_suffix(')'))
            .and_then(|a| a.trim().parse().ok())
            .ok_or_else(|| self.err(format!("bad rotation angle in `{head}`")))
    }
}

/// Read back a program produced by [`export_qasm`].
pub fn parse_qasm(text: &str) -> Result<QasmProgram> {
    let mut circuit: Option<GateCircuit> = None;
    let mut measured = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let p = LineParser {
            line: idx + 1,
            source: "<qasm>",
        };
        let code = raw.split("//").next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        let stmt = code
            .strip_suffix(';')
            .ok_or_else(|| p.err("statement must end with `;`"))?
            .trim();
        let (head, args) = match stmt.find(|c: char| c.is_whitespace()) {
            // `rz(0.5) q[0]` splits after the parenthesized angle
            Some(pos) if !stmt[..pos].contains('(') || stmt[..pos].contains(')') => {
                (&stmt[..pos], stmt[pos..].trim())
            }
            _ => match stmt.find(')') {
                Some(close) => (&stmt[..=close], stmt[close + 1..].trim()),
                None => (stmt, ""),
            },
        };
        let name = head.split('(').next().unwrap_or(head);
        match name {
            "OPENQASM" | "include" | "creg" | "barrier" => continue,
            "qreg" => {
                circuit = Some(GateCircuit::new(p.qubit(args, "q")?));
                continue;
            }
            _ => {}
        }
        let c = circuit
            .as_mut()
            .ok_or_else(|| p.err("gate before `qreg` declaration"))?;
        let gate = match name {
            "h" => Gate::Hadamard {
                target: p.qubit(args, "q")?,
            },
            "rz" => Gate::RotZ {
                angle: p.angle(head)?,
                target: p.qubit(args, "q")?,
            },
            "ry" => Gate::RotY {
                angle: p.angle(head)?,
                target: p.qubit(args, "q")?,
            },
            "cx" => {
                let (a, b) = args
                    .split_once(',')
                    .ok_or_else(|| p.err("cx needs two operands"))?;
                Gate::Cnot {
                    control: p.qubit(a, "q")?,
                    target: p.qubit(b, "q")?,
                }
            }
            "reset" => Gate::Reset {
                target: p.qubit(args, "q")?,
            },
            "measure" => {
                let (q, _) = args
                    .split_once("->")
                    .ok_or_else(|| p.err("measure needs `-> c[i]`"))?;
                measured.push(p.qubit(q, "q")?);
                continue;
            }
            other => return Err(p.err(format!("unsupported instruction `{other}`"))),
        };
        c.push(gate).map_err(|e| p.err(e.to_string()))?;
    }
    let circuit = circuit.ok_or_else(|| Error::Parse {
        path: "<qasm>".into(),
        line: 0,
        message: "missing `qreg` declaration".into(),
    })?;
    Ok(QasmProgram { circuit, measured })
}
