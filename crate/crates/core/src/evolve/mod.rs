//! Time evolution of a density matrix over one interval τ.
//!
//! Two routes: the exact propagator `exp(-iHτ)` from a Hermitian
//! eigendecomposition, and a first-order product-formula gate circuit that
//! a gate-based device could run. They agree as κ grows, with error
//! shrinking like τ²/κ.

mod circuit;
pub mod qasm;

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::HamiltonianSpec;
use crate::quantum::{DensityMatrix, Operator};

pub(crate) use circuit::apply_circuit_in_place;
pub use circuit::{apply_circuit, Gate, GateCircuit};
pub use qasm::{export_qasm, export_qasm_annotated, parse_qasm, QasmProgram};

const HERMITIAN_TOL: f64 = 1e-9;

/// Evolution interval split into κ product-formula slices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    tau: f64,
    kappa: usize,
}

impl TrotterPlan {
    pub fn new(tau: f64, kappa: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param(format!("tau must be positive, got {tau}")));
        }
        if kappa == 0 {
            return Err(Error::param("kappa must be at least 1"));
        }
        Ok(Self { tau, kappa })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn slice_time(&self) -> f64 {
        self.tau / self.kappa as f64
    }
}

/// `U = exp(-iHτ) = V exp(-iΛτ) V†`.
pub fn exact_propagator(hamiltonian: &Operator, tau: f64) -> Result<Operator> {
    let dev = hamiltonian.hermiticity_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let eig = SymmetricEigen::new(hamiltonian.matrix().clone());
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "Hamiltonian eigendecomposition diverged".into(),
        ));
    }
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * tau)),
    );
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (mut col, phase) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *phase;
    }
    Operator::new(scaled * v.adjoint())
}

/// `U ρ U†`.
pub fn conjugate_evolve(rho: &DensityMatrix, propagator: &Operator) -> Result<DensityMatrix> {
    if rho.dim() != propagator.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: propagator.dim(),
        });
    }
    let u = propagator.matrix();
    DensityMatrix::from_raw(u * rho.matrix() * u.adjoint())
}

/// One product-formula slice repeated κ times.
///
/// Slice layout: `RotZ(2hᵢτ/κ)` on every qubit, then for each pair `i<j` in
/// row-major order `H_i H_j · CNOT(i→j) · RotZ(2Jᵢⱼτ/κ)_j · CNOT(i→j) · H_i H_j`,
/// which is `exp(-iJᵢⱼ XᵢXⱼ τ/κ)` up to global phase.
pub fn build_trotter_circuit(spec: &HamiltonianSpec, plan: &TrotterPlan) -> GateCircuit {
    let n = spec.n();
    let dt = plan.slice_time();
    let mut slice = Vec::with_capacity(n + 7 * n * (n - 1) / 2);
    for q in 0..n {
        slice.push(Gate::RotZ {
            angle: 2.0 * spec.fields().get(q) * dt,
            target: q,
        });
    }
    for (i, j, coupling) in spec.couplings().pairs() {
        slice.extend_from_slice(&[
            Gate::Hadamard { target: i },
            Gate::Hadamard { target: j },
            Gate::Cnot {
                control: i,
                target: j,
            },
            Gate::RotZ {
                angle: 2.0 * coupling * dt,
                target: j,
            },
            Gate::Cnot {
                control: i,
                target: j,
            },
            Gate::Hadamard { target: i },
            Gate::Hadamard { target: j },
        ]);
    }
    let gates = slice
        .iter()
        .copied()
        .cycle()
        .take(slice.len() * plan.kappa())
        .collect();
    GateCircuit::from_gates(n, gates).expect("pair indices are within the register")
}
