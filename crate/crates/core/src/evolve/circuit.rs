use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{expand_index, qubit_mask, reduce_qubit, CMatrix, DensityMatrix, ZERO};

/// Elementary gate. Rotations follow `R_a(θ) = exp(-iθσ_a/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    Hadamard {
        target: usize,
    },
    RotZ {
        angle: f64,
        target: usize,
    },
    RotY {
        angle: f64,
        target: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// Non-unitary: `|0⟩⟨0|_q ⊗ Tr_q[ρ]`.
    Reset {
        target: usize,
    },
    /// Reset followed by `RotY(angle)`.
    StatePrep {
        angle: f64,
        target: usize,
    },
}

impl Gate {
    pub fn target(&self) -> usize {
        match *self {
            Gate::Hadamard { target }
            | Gate::RotZ { target, .. }
            | Gate::RotY { target, .. }
            | Gate::Cnot { target, .. }
            | Gate::Reset { target }
            | Gate::StatePrep { target, .. } => target,
        }
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self, Gate::Reset { .. } | Gate::StatePrep { .. })
    }

    fn validate(&self, width: usize) -> Result<()> {
        let check = |q: usize| {
            if q >= width {
                Err(Error::QubitOutOfRange { index: q, width })
            } else {
                Ok(())
            }
        };
        check(self.target())?;
        match *self {
            Gate::Cnot { control, target } => {
                check(control)?;
                if control == target {
                    return Err(Error::param(format!(
                        "cnot control equals target ({target})"
                    )));
                }
            }
            Gate::RotZ { angle, .. } | Gate::RotY { angle, .. } | Gate::StatePrep { angle, .. }
                if !angle.is_finite() =>
            {
                return Err(Error::param(format!("gate angle {angle} is not finite")));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Ordered gate list on a fixed-width register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCircuit {
    width: usize,
    gates: Vec<Gate>,
}

impl GateCircuit {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            gates: Vec::new(),
        }
    }

    pub fn from_gates(width: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut circuit = Self::new(width);
        for g in gates {
            circuit.push(g)?;
        }
        Ok(circuit)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.width)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend_from(&mut self, other: &GateCircuit) -> Result<()> {
        if other.width != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                got: other.width,
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

type Mat2 = [[Complex64; 2]; 2];

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub(crate) fn hadamard_matrix() -> Mat2 {
    let s = re(FRAC_1_SQRT_2);
    [[s, s], [s, -s]]
}

pub(crate) fn rot_z_matrix(angle: f64) -> Mat2 {
    let half = angle / 2.0;
    [
        [Complex64::from_polar(1.0, -half), ZERO],
        [ZERO, Complex64::from_polar(1.0, half)],
    ]
}

pub(crate) fn rot_y_matrix(angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    [[re(c), re(-s)], [re(s), re(c)]]
}

/// `ρ ← U_q ρ U_q†` for a single-qubit `U` acting on `qubit`.
fn apply_single(m: &mut CMatrix, u: &Mat2, qubit: usize, n: usize) {
    let d = m.nrows();
    let mask = qubit_mask(qubit, n);
    for col in 0..d {
        for i0 in (0..d).filter(|i| i & mask == 0) {
            let i1 = i0 | mask;
            let (a, b) = (m[(i0, col)], m[(i1, col)]);
            m[(i0, col)] = u[0][0] * a + u[0][1] * b;
            m[(i1, col)] = u[1][0] * a + u[1][1] * b;
        }
    }
    let conj = [
        [u[0][0].conj(), u[0][1].conj()],
        [u[1][0].conj(), u[1][1].conj()],
    ];
    for j0 in (0..d).filter(|j| j & mask == 0) {
        let j1 = j0 | mask;
        for row in 0..d {
            let (a, b) = (m[(row, j0)], m[(row, j1)]);
            m[(row, j0)] = a * conj[0][0] + b * conj[0][1];
            m[(row, j1)] = a * conj[1][0] + b * conj[1][1];
        }
    }
}

fn apply_cnot(m: &mut CMatrix, control: usize, target: usize, n: usize) {
    let d = m.nrows();
    let cmask = qubit_mask(control, n);
    let tmask = qubit_mask(target, n);
    for i in (0..d).filter(|i| i & cmask != 0 && i & tmask == 0) {
        m.swap_rows(i, i | tmask);
    }
    for j in (0..d).filter(|j| j & cmask != 0 && j & tmask == 0) {
        m.swap_columns(j, j | tmask);
    }
}

fn apply_reset(m: &mut CMatrix, qubit: usize, n: usize) {
    let reduced = reduce_qubit(m, qubit, n);
    m.fill(ZERO);
    let half = reduced.nrows();
    for b in 0..half {
        let jb = expand_index(b, qubit, n);
        for a in 0..half {
            m[(expand_index(a, qubit, n), jb)] = reduced[(a, b)];
        }
    }
}

pub(crate) fn apply_gate(m: &mut CMatrix, gate: &Gate, n: usize) {
    match *gate {
        Gate::Hadamard { target } => apply_single(m, &hadamard_matrix(), target, n),
        Gate::RotZ { angle, target } => apply_single(m, &rot_z_matrix(angle), target, n),
        Gate::RotY { angle, target } => apply_single(m, &rot_y_matrix(angle), target, n),
        Gate::Cnot { control, target } => apply_cnot(m, control, target, n),
        Gate::Reset { target } => apply_reset(m, target, n),
        Gate::StatePrep { angle, target } => {
            apply_reset(m, target, n);
            apply_single(m, &rot_y_matrix(angle), target, n);
        }
    }
}

/// Run `circuit` on a copy of `rho`, gates left to right.
pub fn apply_circuit(rho: &DensityMatrix, circuit: &GateCircuit) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    apply_circuit_in_place(&mut out, circuit)?;
    Ok(out)
}

pub(crate) fn apply_circuit_in_place(rho: &mut DensityMatrix, circuit: &GateCircuit) -> Result<()> {
    let n = rho.num_qubits();
    if circuit.width() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: circuit.width(),
        });
    }
    let m = rho.matrix_mut();
    for gate in circuit.gates() {
        apply_gate(m, gate, n);
    }
    Ok(())
}
