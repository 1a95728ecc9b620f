//! Dense complex-matrix foundations for small qubit registers.
//!
//! Basis indices are big-endian in qubit order: qubit 0 is the most
//! significant bit of the index, so `a ⊗ b` places `a` on the low-numbered
//! qubits. "The first qubit" everywhere in this crate is qubit 0.

use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Largest register the dense simulator accepts (a 1024x1024 density matrix).
pub const MAX_QUBITS: usize = 10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

const HERMITIAN_TOL: f64 = 1e-9;
const TRACE_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-8;
const NORM_TOL: f64 = 1e-12;

/// Number of qubits for a square matrix of side `dim`.
pub fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    Ok(n)
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    qubits_for_dim(m.nrows())
}

fn check_qubit_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    Ok(())
}

/// Bit mask selecting `qubit` in a basis index of an `n`-qubit register.
#[inline]
pub(crate) fn qubit_mask(qubit: usize, n: usize) -> usize {
    1 << (n - 1 - qubit)
}

/// Largest elementwise modulus of `m - m†`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A square complex operator on a qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    qubits: usize,
}

impl Operator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let qubits = check_square(&matrix)?;
        Ok(Self { matrix, qubits })
    }

    pub fn identity(qubits: usize) -> Result<Self> {
        check_qubit_count(qubits)?;
        let d = 1 << qubits;
        Ok(Self {
            matrix: CMatrix::identity(d, d),
            qubits,
        })
    }

    pub fn zeros(qubits: usize) -> Result<Self> {
        check_qubit_count(qubits)?;
        let d = 1 << qubits;
        Ok(Self {
            matrix: CMatrix::zeros(d, d),
            qubits,
        })
    }

    pub fn from_real(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::new(matrix.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Largest elementwise modulus of `U†U - I`.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.matrix.adjoint() * &self.matrix;
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            qubits: self.qubits,
        }
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &Operator) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            qubits: self.qubits,
        })
    }

    pub fn tensor(&self, other: &Operator) -> Result<Self> {
        Self::new(tensor_product(&self.matrix, &other.matrix)?)
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimensions differ");
        Operator {
            matrix: &self.matrix + &rhs.matrix,
            qubits: self.qubits,
        }
    }
}

impl Mul<&Operator> for f64 {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        Operator {
            matrix: rhs.matrix.map(|z| z * self),
            qubits: rhs.qubits,
        }
    }
}

/// Normalized state vector `Σ αₖ|k⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: DVector<Complex64>,
    qubits: usize,
}

impl PureState {
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        let qubits = qubits_for_dim(amplitudes.len())?;
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "state vector has squared norm {norm_sq}"
            )));
        }
        Ok(Self { amplitudes, qubits })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(qubits)?;
        let dim = 1 << qubits;
        if index >= dim {
            return Err(Error::param(format!(
                "basis index {index} out of range for {qubits} qubits"
            )));
        }
        let mut amplitudes = DVector::from_element(dim, ZERO);
        amplitudes[index] = ONE;
        Ok(Self { amplitudes, qubits })
    }

    /// Single-qubit state `√(1-u)|0⟩ + √u|1⟩`.
    pub fn encoded_input(u: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InputOutOfRange(u));
        }
        Ok(Self {
            amplitudes: DVector::from_vec(vec![
                Complex64::new((1.0 - u).sqrt(), 0.0),
                Complex64::new(u.sqrt(), 0.0),
            ]),
            qubits: 1,
        })
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    /// Projector `|ψ⟩⟨ψ|`.
    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
            qubits: self.qubits,
        }
    }
}

/// Density operator of a qubit register.
///
/// [`DensityMatrix::new`] enforces the physical invariants (Hermitian, unit
/// trace, positive semidefinite); [`DensityMatrix::from_raw`] only checks the
/// shape and exists so that candidate matrices can be diagnosed.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    qubits: usize,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = Self::from_raw(matrix)?;
        let report = validate_density(&rho);
        if !report.is_valid() {
            return Err(Error::InvalidState(report.to_string()));
        }
        Ok(rho)
    }

    pub fn from_raw(matrix: CMatrix) -> Result<Self> {
        let qubits = check_square(&matrix)?;
        Ok(Self { matrix, qubits })
    }

    /// `|0…0⟩⟨0…0|`.
    pub fn ground(qubits: usize) -> Result<Self> {
        Ok(PureState::basis(qubits, 0)?.to_density())
    }

    /// `I / 2ⁿ`.
    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        check_qubit_count(qubits)?;
        let d = 1 << qubits;
        Ok(Self {
            matrix: CMatrix::identity(d, d).map(|z| z / d as f64),
            qubits,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        Self::from_raw(tensor_product(&self.matrix, &other.matrix)?)
    }

    /// Eigenvalues of the Hermitian part `(ρ+ρ†)/2`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Computational-basis probabilities `diag(ρ)` (real parts).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    let mut values: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Kronecker product with `a` on the most significant qubits.
pub fn tensor_product(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_square(a)?;
    check_square(b)?;
    let n = qubits_for_dim(a.nrows() * b.nrows())?;
    debug_assert!(n <= MAX_QUBITS);
    Ok(a.kronecker(b))
}

/// `Tr₁[ρ]`: trace out qubit 0.
pub fn partial_trace_first(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.num_qubits() < 2 {
        return Err(Error::param(
            "partial trace needs at least two qubits (dim >= 4)",
        ));
    }
    partial_trace(rho, 0)
}

/// Trace out a single qubit, leaving the others in their original order.
pub fn partial_trace(rho: &DensityMatrix, qubit: usize) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    if qubit >= n {
        return Err(Error::QubitOutOfRange {
            index: qubit,
            width: n,
        });
    }
    if n < 2 {
        return Err(Error::param("cannot trace out the only qubit"));
    }
    let reduced = reduce_qubit(rho.matrix(), qubit, n);
    Ok(DensityMatrix {
        matrix: reduced,
        qubits: n - 1,
    })
}

/// Insert a zero bit for `qubit` into a reduced index.
#[inline]
pub(crate) fn expand_index(reduced: usize, qubit: usize, n: usize) -> usize {
    let low_bits = n - 1 - qubit;
    let low = reduced & ((1 << low_bits) - 1);
    let high = reduced >> low_bits;
    (high << (low_bits + 1)) | low
}

pub(crate) fn reduce_qubit(m: &CMatrix, qubit: usize, n: usize) -> CMatrix {
    let half = 1 << (n - 1);
    let mask = qubit_mask(qubit, n);
    CMatrix::from_fn(half, half, |a, b| {
        let ia = expand_index(a, qubit, n);
        let ib = expand_index(b, qubit, n);
        m[(ia, ib)] + m[(ia | mask, ib | mask)]
    })
}

/// Which single-qubit Pauli matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Z,
}

/// `I ⊗ … ⊗ σ ⊗ … ⊗ I` with σ on `qubit` of an `n`-qubit register.
pub fn pauli_operator(axis: PauliAxis, qubit: usize, n: usize) -> Result<Operator> {
    check_qubit_count(n)?;
    if qubit >= n {
        return Err(Error::QubitOutOfRange {
            index: qubit,
            width: n,
        });
    }
    let d = 1 << n;
    let mask = qubit_mask(qubit, n);
    let mut m = CMatrix::zeros(d, d);
    for k in 0..d {
        match axis {
            PauliAxis::Z => {
                m[(k, k)] = if k & mask == 0 { ONE } else { -ONE };
            }
            PauliAxis::X => {
                m[(k ^ mask, k)] = ONE;
            }
        }
    }
    Operator::new(m)
}

/// `Tr(O ρ)` for a Hermitian observable; the imaginary residue is dropped.
pub fn expectation(rho: &DensityMatrix, obs: &Operator) -> Result<f64> {
    if rho.dim() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: obs.dim(),
        });
    }
    let dev = obs.hermiticity_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let d = rho.dim();
    let (o, r) = (obs.matrix(), rho.matrix());
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += o[(i, j)] * r[(j, i)];
        }
    }
    Ok(acc.re)
}

/// `⟨Z_qubit⟩` read straight off the diagonal.
pub fn z_expectation(rho: &DensityMatrix, qubit: usize) -> Result<f64> {
    let n = rho.num_qubits();
    if qubit >= n {
        return Err(Error::QubitOutOfRange {
            index: qubit,
            width: n,
        });
    }
    let mask = qubit_mask(qubit, n);
    let m = rho.matrix();
    Ok((0..rho.dim())
        .map(|k| {
            if k & mask == 0 {
                m[(k, k)].re
            } else {
                -m[(k, k)].re
            }
        })
        .sum())
}

/// Invariant report for a candidate density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityDiagnostics {
    pub trace_deviation: f64,
    pub hermiticity_deviation: f64,
    pub min_eigenvalue: f64,
    pub trace_ok: bool,
    pub hermitian_ok: bool,
    pub psd_ok: bool,
}

impl DensityDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.trace_ok && self.hermitian_ok && self.psd_ok
    }
}

impl std::fmt::Display for DensityDiagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "|tr-1|={:.3e}{} herm={:.3e}{} min_eig={:.3e}{}",
            self.trace_deviation,
            if self.trace_ok { "" } else { " (violated)" },
            self.hermiticity_deviation,
            if self.hermitian_ok { "" } else { " (violated)" },
            self.min_eigenvalue,
            if self.psd_ok { "" } else { " (violated)" },
        )
    }
}

pub fn validate_density(rho: &DensityMatrix) -> DensityDiagnostics {
    let trace = rho.trace();
    let trace_deviation = (trace - ONE).norm();
    let hermiticity_deviation = hermiticity_deviation(rho.matrix());
    let min_eigenvalue = rho.eigenvalues().first().copied().unwrap_or(f64::NAN);
    DensityDiagnostics {
        trace_deviation,
        hermiticity_deviation,
        min_eigenvalue,
        trace_ok: trace_deviation <= TRACE_TOL,
        hermitian_ok: hermiticity_deviation <= HERMITIAN_TOL,
        psd_ok: min_eigenvalue >= -PSD_TOL,
    }
}
