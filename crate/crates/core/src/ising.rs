//! Fully connected transverse-field Ising Hamiltonian
//! `H = Σ_{i<j} J_ij X_i X_j + Σ_i h_i Z_i` and its random couplings.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{qubit_mask, CMatrix, Operator, MAX_QUBITS};

/// Symmetric zero-diagonal pair couplings with entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    values: DMatrix<f64>,
}

impl CouplingMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: values.ncols(),
            });
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::param(format!("coupling J[{i}][{i}] must be zero")));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::param(format!(
                        "coupling J[{i}][{j}] = {v} outside [0, 1]"
                    )));
                }
                if v != values[(j, i)] {
                    return Err(Error::param(format!(
                        "coupling matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.values[(i, j)]).collect())
            .collect()
    }

    /// Unordered pairs `(i, j, J_ij)` with `i < j`, row-major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j, self.values[(i, j)])))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldVector {
    values: DVector<f64>,
}

impl FieldVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::param(format!("field value {bad} is not finite")));
        }
        Ok(Self {
            values: DVector::from_vec(values),
        })
    }

    pub fn uniform(n: usize, h: f64) -> Result<Self> {
        Self::new(vec![h; n])
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    couplings: CouplingMatrix,
    fields: FieldVector,
}

impl HamiltonianSpec {
    pub fn new(couplings: CouplingMatrix, fields: FieldVector) -> Result<Self> {
        if couplings.n() != fields.n() {
            return Err(Error::DimensionMismatch {
                expected: couplings.n(),
                got: fields.n(),
            });
        }
        if couplings.n() == 0 || couplings.n() > MAX_QUBITS {
            return Err(Error::TooManyQubits(couplings.n()));
        }
        Ok(Self { couplings, fields })
    }

    pub fn n(&self) -> usize {
        self.couplings.n()
    }

    pub fn couplings(&self) -> &CouplingMatrix {
        &self.couplings
    }

    pub fn fields(&self) -> &FieldVector {
        &self.fields
    }

    /// Multiply every coupling and field by `c` (no range check on `J`).
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            couplings: CouplingMatrix {
                values: &self.couplings.values * c,
            },
            fields: FieldVector {
                values: &self.fields.values * c,
            },
        }
    }
}

/// JSON form of a Hamiltonian: uniform field `h` plus either explicit
/// couplings `j` or a Beta sampling recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianDoc {
    pub n: usize,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_shape")]
    pub alpha: f64,
    #[serde(default = "default_shape")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<Vec<Vec<f64>>>,
}

fn default_shape() -> f64 {
    0.9
}

impl HamiltonianDoc {
    pub fn to_spec(&self) -> Result<HamiltonianSpec> {
        let couplings = match (&self.j, self.seed) {
            (Some(rows), _) => CouplingMatrix::from_rows(rows)?,
            (None, Some(seed)) => sample_couplings(self.n, self.alpha, self.beta, seed)?,
            (None, None) => {
                return Err(Error::Config(
                    "hamiltonian needs either explicit `j` or a `seed`".into(),
                ))
            }
        };
        if couplings.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: couplings.n(),
            });
        }
        HamiltonianSpec::new(couplings, FieldVector::uniform(self.n, self.h)?)
    }
}

/// Draw `n(n-1)/2` couplings from Beta(alpha, beta).
///
/// Each draw is `X / (X + Y)` with `X ~ Gamma(alpha, 1)` and
/// `Y ~ Gamma(beta, 1)`, taken in that order from a ChaCha8 stream seeded
/// with `seed`, filling the strict upper triangle row by row.
pub fn sample_couplings(n: usize, alpha: f64, beta: f64, seed: u64) -> Result<CouplingMatrix> {
    if n < 2 {
        return Err(Error::param(format!("need at least 2 qubits, got {n}")));
    }
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::param(format!(
            "Beta shape parameters must be positive (alpha={alpha}, beta={beta})"
        )));
    }
    let gx = Gamma::new(alpha, 1.0).map_err(|e| Error::param(e.to_string()))?;
    let gy = Gamma::new(beta, 1.0).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let x: f64 = gx.sample(&mut rng);
            let y: f64 = gy.sample(&mut rng);
            let v = x / (x + y);
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(CouplingMatrix { values })
}

/// Dense `2ⁿ×2ⁿ` matrix of the Hamiltonian; each unordered pair once.
pub fn build_hamiltonian(spec: &HamiltonianSpec) -> Result<Operator> {
    let n = spec.n();
    let d = 1usize << n;
    let mut m = CMatrix::zeros(d, d);
    for (i, j, coupling) in spec.couplings().pairs() {
        let flip = qubit_mask(i, n) | qubit_mask(j, n);
        for k in 0..d {
            m[(k ^ flip, k)] += Complex64::new(coupling, 0.0);
        }
    }
    for q in 0..n {
        let h = spec.fields().get(q);
        let mask = qubit_mask(q, n);
        for k in 0..d {
            m[(k, k)] += Complex64::new(if k & mask == 0 { h } else { -h }, 0.0);
        }
    }
    Operator::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::testing::max_abs_diff;
    use crate::quantum::{pauli_operator, PauliAxis};
    use proptest::prelude::*;

    fn uniform_spec(n: usize, h: f64, seed: u64) -> HamiltonianSpec {
        HamiltonianSpec::new(
            sample_couplings(n, 0.9, 0.9, seed).unwrap(),
            FieldVector::uniform(n, h).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn couplings_are_deterministic() {
        assert_eq!(
            sample_couplings(5, 0.9, 0.9, 7).unwrap(),
            sample_couplings(5, 0.9, 0.9, 7).unwrap()
        );
        assert_ne!(
            sample_couplings(5, 0.9, 0.9, 7).unwrap(),
            sample_couplings(5, 0.9, 0.9, 8).unwrap()
        );
    }

    #[test]
    fn couplings_respect_beta_support() {
        for seed in 0..20 {
            let j = sample_couplings(6, 0.9, 0.9, seed).unwrap();
            for a in 0..6 {
                assert_eq!(j.get(a, a), 0.0);
                for b in 0..6 {
                    assert_eq!(j.get(a, b), j.get(b, a));
                    if a != b {
                        assert!(j.get(a, b) > 0.0 && j.get(a, b) < 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn coupling_mean_matches_beta_mean() {
        // 447 qubits would be too many for a Hamiltonian, but the sampler
        // itself has no such limit: 447·446/2 ≈ 10⁵ draws.
        let j = sample_couplings(448, 0.9, 0.9, 2024).unwrap();
        let draws: Vec<f64> = j.pairs().map(|(_, _, v)| v).collect();
        assert!(draws.len() >= 100_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        // Beta(0.9, 0.9) variance: αβ / ((α+β)²(α+β+1)) = 0.81 / (3.24·2.8)
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!((var - 0.81 / (3.24 * 2.8)).abs() < 0.003, "var {var}");
    }

    #[test]
    fn sampling_rejects_bad_shapes() {
        assert!(sample_couplings(3, 0.0, 0.9, 1).is_err());
        assert!(sample_couplings(3, 0.9, -1.0, 1).is_err());
        assert!(sample_couplings(1, 0.9, 0.9, 1).is_err());
    }

    #[test]
    fn coupling_matrix_validation() {
        assert!(CouplingMatrix::from_rows(&[vec![0.0, 0.3], vec![0.2, 0.0]]).is_err());
        assert!(CouplingMatrix::from_rows(&[vec![0.1, 0.3], vec![0.3, 0.0]]).is_err());
        assert!(CouplingMatrix::from_rows(&[vec![0.0, 1.3], vec![1.3, 0.0]]).is_err());
        assert!(CouplingMatrix::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).is_ok());
    }

    #[test]
    fn single_qubit_field_only() {
        let spec = HamiltonianSpec::new(
            CouplingMatrix::zeros(1),
            FieldVector::uniform(1, 0.5).unwrap(),
        )
        .unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        assert_eq!(h.matrix()[(0, 0)].re, 0.5);
        assert_eq!(h.matrix()[(1, 1)].re, -0.5);
        assert_eq!(h.matrix()[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn two_qubit_xx_term_is_antidiagonal() {
        let j = 0.37;
        let spec = HamiltonianSpec::new(
            CouplingMatrix::from_rows(&[vec![0.0, j], vec![j, 0.0]]).unwrap(),
            FieldVector::uniform(2, 0.0).unwrap(),
        )
        .unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expected = if r + c == 3 { j } else { 0.0 };
                assert_eq!(h.matrix()[(r, c)], Complex64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn matches_pauli_string_sum() {
        let spec = uniform_spec(4, 0.5, 99);
        let h = build_hamiltonian(&spec).unwrap();
        let mut oracle = Operator::zeros(4).unwrap();
        for (i, j, c) in spec.couplings().pairs() {
            let xx = pauli_operator(PauliAxis::X, i, 4)
                .unwrap()
                .compose(&pauli_operator(PauliAxis::X, j, 4).unwrap())
                .unwrap();
            oracle = &oracle + &(c * &xx);
        }
        for q in 0..4 {
            oracle = &oracle + &(0.5 * &pauli_operator(PauliAxis::Z, q, 4).unwrap());
        }
        assert!(max_abs_diff(h.matrix(), oracle.matrix()) < 1e-15);
    }

    #[test]
    fn random_hamiltonian_is_hermitian_and_traceless() {
        let h = build_hamiltonian(&uniform_spec(4, 0.5, 5)).unwrap();
        let m = h.matrix();
        // elementwise conjugate-transpose oracle
        let mut worst = 0.0f64;
        for r in 0..16 {
            for c in 0..16 {
                worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
            }
        }
        assert!(worst <= 1e-12);
        assert!(h.trace().norm() <= 1e-10);
    }

    #[test]
    fn doc_round_trip() {
        let doc = HamiltonianDoc {
            n: 3,
            h: 0.5,
            seed: Some(4),
            alpha: 0.9,
            beta: 0.9,
            j: None,
        };
        let text = serde_json::to_string(&doc).unwrap();
        let back: HamiltonianDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_spec().unwrap(), uniform_spec(3, 0.5, 4));

        let explicit: HamiltonianDoc =
            serde_json::from_str(r#"{"n":2,"h":0.1,"j":[[0,0.5],[0.5,0]]}"#).unwrap();
        assert_eq!(explicit.to_spec().unwrap().couplings().get(0, 1), 0.5);
        let neither: HamiltonianDoc = serde_json::from_str(r#"{"n":2,"h":0.1}"#).unwrap();
        assert!(neither.to_spec().is_err());
    }

    proptest! {
        #[test]
        fn hamiltonian_is_linear_in_parameters(seed in any::<u64>(), c in 0.0f64..1.0) {
            let spec = uniform_spec(3, 0.5, seed);
            let h = build_hamiltonian(&spec).unwrap();
            let scaled = build_hamiltonian(&spec.scaled(c)).unwrap();
            let expected = c * &h;
            prop_assert!(max_abs_diff(scaled.matrix(), expected.matrix()) <= 1e-14);
        }

        #[test]
        fn zero_field_commutes_with_global_flip(seed in any::<u64>(), n in 2usize..=4) {
            let spec = uniform_spec(n, 0.0, seed);
            let h = build_hamiltonian(&spec).unwrap();
            let mut flip = pauli_operator(PauliAxis::X, 0, n).unwrap();
            for q in 1..n {
                flip = flip.compose(&pauli_operator(PauliAxis::X, q, n).unwrap()).unwrap();
            }
            let ab = h.compose(&flip).unwrap();
            let ba = flip.compose(&h).unwrap();
            prop_assert!(max_abs_diff(ab.matrix(), ba.matrix()) <= 1e-10);
        }
    }
}
