//! The reservoir loop: encode `u(t)` into qubit 0, let the Ising register
//! evolve for τ, read `⟨Z_i⟩` off every qubit.

use std::io::Write;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{
    apply_circuit_in_place, build_trotter_circuit, exact_propagator, Gate, GateCircuit, TrotterPlan,
};
use crate::ising::{
    build_hamiltonian, sample_couplings, CouplingMatrix, FieldVector, HamiltonianSpec,
};
use crate::quantum::{
    partial_trace_first, qubit_mask, z_expectation, DensityMatrix, Operator, PureState, MAX_QUBITS,
};
use crate::seed::stream_seed;

const NEGATIVE_MASS_TOL: f64 = 1e-6;

/// Offset separating closed-loop shot streams from the teacher-forced run.
pub(crate) const CLOSED_LOOP_STREAM: u64 = 1 << 40;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionMode {
    Exact,
    #[default]
    Trotter,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    #[default]
    Exact,
    Shots,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirConfig {
    /// Qubit count.
    pub n: usize,
    /// Uniform transverse field on every qubit.
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    pub coupling_seed: u64,
    /// Explicit coupling matrix; overrides Beta sampling when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<Vec<f64>>>,
    pub tau: f64,
    pub kappa: usize,
    pub evolution: EvolutionMode,
    pub measurement: MeasurementMode,
    pub shots: usize,
    pub shot_seed: u64,
    pub washout: usize,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            n: 4,
            h: 0.5,
            alpha: 0.9,
            beta: 0.9,
            coupling_seed: 0,
            couplings: None,
            tau: 1.0,
            kappa: 10,
            evolution: EvolutionMode::Trotter,
            measurement: MeasurementMode::Exact,
            shots: 1024,
            shot_seed: 0,
            washout: 70,
        }
    }
}

impl ReservoirConfig {
    /// Settings used for the 50-point hardware run: 4000 shots, washout 10.
    pub fn device_run() -> Self {
        Self {
            measurement: MeasurementMode::Shots,
            shots: 4000,
            washout: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > MAX_QUBITS {
            return Err(Error::param(format!(
                "reservoir needs 2..={MAX_QUBITS} qubits, got {}",
                self.n
            )));
        }
        if !self.h.is_finite() {
            return Err(Error::param("field h must be finite"));
        }
        TrotterPlan::new(self.tau, self.kappa)?;
        if self.measurement == MeasurementMode::Shots && self.shots == 0 {
            return Err(Error::param("shot mode needs at least one shot"));
        }
        Ok(())
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianSpec> {
        let couplings = match &self.couplings {
            Some(rows) => CouplingMatrix::from_rows(rows)?,
            None => sample_couplings(self.n, self.alpha, self.beta, self.coupling_seed)?,
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

/// `2·arcsin(√u)`: the `RotY` angle taking `|0⟩` to `√(1-u)|0⟩ + √u|1⟩`.
pub fn encode_angle(u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InputOutOfRange(u));
    }
    Ok(2.0 * u.sqrt().asin())
}

/// `|ψ_u⟩⟨ψ_u| ⊗ Tr₁[ρ]`.
pub fn inject(rho: &DensityMatrix, u: f64) -> Result<DensityMatrix> {
    let psi = PureState::encoded_input(u)?.to_density();
    psi.tensor(&partial_trace_first(rho)?)
}

/// `(⟨Z_0⟩, …, ⟨Z_{n-1}⟩)` without disturbing ρ.
pub fn measure_features_exact(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.num_qubits())
        .map(|q| z_expectation(rho, q).expect("qubit index in range"))
        .collect()
}

/// Shot-averaged `⟨Z_i⟩` from `shots` computational-basis samples of `diag(ρ)`.
pub fn measure_features_shots(rho: &DensityMatrix, shots: usize, seed: u64) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::param("shots must be at least 1"));
    }
    let mut probs = rho.diagonal();
    if let Some(&worst) = probs.iter().min_by(|a, b| a.total_cmp(b)) {
        if worst < -NEGATIVE_MASS_TOL {
            return Err(Error::InvalidState(format!(
                "negative basis probability {worst:.3e}"
            )));
        }
    }
    for p in probs.iter_mut() {
        *p = p.max(0.0);
    }
    let dist = WeightedIndex::new(&probs)
        .map_err(|e| Error::InvalidState(format!("cannot sample basis states: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; probs.len()];
    for _ in 0..shots {
        counts[dist.sample(&mut rng)] += 1;
    }
    let n = rho.num_qubits();
    Ok((0..n)
        .map(|q| {
            let mask = qubit_mask(q, n);
            let signed: i64 = counts
                .iter()
                .enumerate()
                .map(|(k, &c)| if k & mask == 0 { c as i64 } else { -(c as i64) })
                .sum();
            signed as f64 / shots as f64
        })
        .collect())
}

/// Rows of reservoir features with a trailing all-ones bias column.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn from_feature_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: bad.len(),
            });
        }
        let data = DMatrix::from_fn(rows.len(), width + 1, |r, c| {
            if c == width {
                1.0
            } else {
                rows[r][c]
            }
        });
        Ok(Self { data })
    }

    /// Wrap a matrix whose last column is the bias.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::param("feature matrix needs a bias column"));
        }
        let last = data.ncols() - 1;
        if data.column(last).iter().any(|&b| b != 1.0) {
            return Err(Error::param("last feature column must be all ones"));
        }
        Ok(Self { data })
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn feature_count(&self) -> usize {
        self.data.ncols() - 1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.data.row(r).iter().copied().collect()
    }

    pub fn rows(&self, start: usize, count: usize) -> Self {
        Self {
            data: self.data.rows(start, count).into_owned(),
        }
    }

    /// CSV with header `z0,…,z{k-1},bias`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.feature_count()).map(|i| format!("z{i}")).collect();
        header.push("bias".into());
        w.write_record(&header)?;
        for r in 0..self.nrows() {
            w.serialize(self.row(r))?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }
}

enum Evolution {
    Exact(Operator),
    Trotter(GateCircuit),
}

/// A configured reservoir: fixed Hamiltonian and compiled evolution.
pub struct Reservoir {
    config: ReservoirConfig,
    spec: HamiltonianSpec,
    evolution: Evolution,
}

/// Output of [`run_reservoir`].
#[derive(Clone, Debug)]
pub struct ReservoirRun {
    pub features: FeatureMatrix,
    pub final_state: DensityMatrix,
}

impl Reservoir {
    pub fn new(config: &ReservoirConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.hamiltonian()?;
        let evolution = match config.evolution {
            EvolutionMode::Exact => {
                Evolution::Exact(exact_propagator(&build_hamiltonian(&spec)?, config.tau)?)
            }
            EvolutionMode::Trotter => Evolution::Trotter(build_trotter_circuit(
                &spec,
                &TrotterPlan::new(config.tau, config.kappa)?,
            )),
        };
        Ok(Self {
            config: config.clone(),
            spec,
            evolution,
        })
    }

    pub fn config(&self) -> &ReservoirConfig {
        &self.config
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    /// Gate body of one τ-step, independent of the evolution mode.
    pub fn trotter_body(&self) -> Result<GateCircuit> {
        match &self.evolution {
            Evolution::Trotter(c) => Ok(c.clone()),
            Evolution::Exact(_) => Ok(build_trotter_circuit(
                &self.spec,
                &TrotterPlan::new(self.config.tau, self.config.kappa)?,
            )),
        }
    }

    /// Inject `u` into qubit 0, then evolve for τ.
    ///
    /// In Trotter mode the injection is the gate pair `reset; ry(e(u))`, the
    /// same operations an exported circuit performs.
    pub fn step(&self, rho: &mut DensityMatrix, u: f64) -> Result<()> {
        if rho.num_qubits() != self.config.n {
            return Err(Error::DimensionMismatch {
                expected: self.config.n,
                got: rho.num_qubits(),
            });
        }
        match &self.evolution {
            Evolution::Exact(propagator) => {
                let injected = inject(rho, u)?;
                let p = propagator.matrix();
                *rho = DensityMatrix::from_raw(p * injected.matrix() * p.adjoint())?;
            }
            Evolution::Trotter(body) => {
                let mut prep = GateCircuit::new(self.config.n);
                prep.push(Gate::StatePrep {
                    angle: encode_angle(u)?,
                    target: 0,
                })?;
                apply_circuit_in_place(rho, &prep)?;
                apply_circuit_in_place(rho, body)?;
            }
        }
        Ok(())
    }

    /// Features of ρ; `stream` selects the shot substream in shot mode.
    pub fn measure(&self, rho: &DensityMatrix, stream: u64) -> Result<Vec<f64>> {
        match self.config.measurement {
            MeasurementMode::Exact => Ok(measure_features_exact(rho)),
            MeasurementMode::Shots => measure_features_shots(
                rho,
                self.config.shots,
                stream_seed(self.config.shot_seed, stream),
            ),
        }
    }

    /// Drive the reservoir from `initial`; `observer(t, ρ)` sees the state
    /// after step `t`.
    pub fn run_observed(
        &self,
        series: &[f64],
        initial: DensityMatrix,
        mut observer: impl FnMut(usize, &DensityMatrix),
    ) -> Result<ReservoirRun> {
        let washout = self.config.washout;
        if series.len() <= washout {
            return Err(Error::Data(format!(
                "series length {} must exceed washout {washout}",
                series.len()
            )));
        }
        if let Some(&bad) = series.iter().find(|u| !(0.0..=1.0).contains(*u)) {
            return Err(Error::InputOutOfRange(bad));
        }
        let mut rho = initial;
        let mut rows = Vec::with_capacity(series.len() - washout);
        for (t, &u) in series.iter().enumerate() {
            self.step(&mut rho, u)?;
            observer(t, &rho);
            if t >= washout {
                rows.push(self.measure(&rho, t as u64)?);
            }
        }
        Ok(ReservoirRun {
            features: FeatureMatrix::from_feature_rows(&rows)?,
            final_state: rho,
        })
    }

    pub fn run(&self, series: &[f64]) -> Result<ReservoirRun> {
        self.run_observed(series, DensityMatrix::ground(self.config.n)?, |_, _| {})
    }
}

/// Feed `series` through a fresh reservoir starting from `|0…0⟩`.
pub fn run_reservoir(series: &[f64], config: &ReservoirConfig) -> Result<ReservoirRun> {
    Reservoir::new(config)?.run(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::testing::{max_abs_diff, random_density};
    use crate::quantum::{partial_trace, validate_density};
    use std::f64::consts::PI;

    fn small_config(n: usize, evolution: EvolutionMode) -> ReservoirConfig {
        ReservoirConfig {
            n,
            coupling_seed: 3,
            evolution,
            washout: 5,
            ..ReservoirConfig::default()
        }
    }

    fn wave(len: usize) -> Vec<f64> {
        (0..len)
            .map(|t| 0.5 + 0.4 * (t as f64 * 0.3).sin())
            .collect()
    }

    #[test]
    fn encode_angle_values() {
        assert_eq!(encode_angle(0.0).unwrap(), 0.0);
        assert!((encode_angle(0.5).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((encode_angle(1.0).unwrap() - PI).abs() < 1e-15);
        assert!(encode_angle(-0.1).is_err());
        assert!(encode_angle(1.0001).is_err());
    }

    #[test]
    fn inject_into_ground_with_zero_is_identity() {
        let g = DensityMatrix::ground(2).unwrap();
        assert_eq!(inject(&g, 0.0).unwrap(), g);
    }

    #[test]
    fn inject_sets_first_qubit_and_keeps_marginal() {
        for seed in 0..10 {
            let rho = random_density(3, seed);
            let u = 0.07 * seed as f64;
            let out = inject(&rho, u).unwrap();
            let z0 = z_expectation(&out, 0).unwrap();
            assert!((z0 - (1.0 - 2.0 * u)).abs() < 1e-12);
            let before = partial_trace(&rho, 0).unwrap();
            let after = partial_trace(&out, 0).unwrap();
            assert!(max_abs_diff(before.matrix(), after.matrix()) < 1e-12);
        }
        assert!(inject(&DensityMatrix::ground(2).unwrap(), 1.2).is_err());
    }

    #[test]
    fn exact_features_of_reference_states() {
        assert_eq!(
            measure_features_exact(&DensityMatrix::ground(3).unwrap()),
            vec![1.0; 3]
        );
        let mixed = measure_features_exact(&DensityMatrix::maximally_mixed(3).unwrap());
        assert!(mixed.iter().all(|z| z.abs() < 1e-15));
        let out = inject(&random_density(3, 1), 0.7).unwrap();
        assert!((measure_features_exact(&out)[0] + 0.4).abs() < 1e-12);
    }

    #[test]
    fn shots_on_basis_state_are_exact() {
        let g = DensityMatrix::ground(3).unwrap();
        assert_eq!(measure_features_shots(&g, 17, 9).unwrap(), vec![1.0; 3]);
        assert!(measure_features_shots(&g, 0, 9).is_err());
    }

    #[test]
    fn shots_converge_to_exact_values() {
        let rho = random_density(3, 77);
        let exact = measure_features_exact(&rho);
        let est = measure_features_shots(&rho, 1_000_000, 5).unwrap();
        for (a, b) in exact.iter().zip(&est) {
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
    }

    #[test]
    fn shots_reject_negative_mass() {
        let mut m = DensityMatrix::ground(1).unwrap().into_matrix();
        m[(0, 0)].re = 1.1;
        m[(1, 1)].re = -0.1;
        let bad = DensityMatrix::from_raw(m).unwrap();
        assert!(matches!(
            measure_features_shots(&bad, 10, 1),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn shots_are_seed_deterministic() {
        let rho = random_density(2, 4);
        assert_eq!(
            measure_features_shots(&rho, 1024, 3).unwrap(),
            measure_features_shots(&rho, 1024, 3).unwrap()
        );
    }

    #[test]
    fn feature_matrix_shape_and_bias() {
        let run = run_reservoir(&wave(40), &small_config(3, EvolutionMode::Exact)).unwrap();
        assert_eq!((run.features.nrows(), run.features.ncols()), (35, 4));
        assert!(run.features.matrix().column(3).iter().all(|&b| b == 1.0));
        assert!(run
            .features
            .matrix()
            .columns(0, 3)
            .iter()
            .all(|z| z.abs() <= 1.0 + 1e-9));
        assert!(validate_density(&run.final_state).is_valid());
    }

    #[test]
    fn constant_zero_input_without_field_is_stationary() {
        // The reset-and-evolve map only contracts onto its fixed point
        // asymptotically, so look well past the transient.
        let config = ReservoirConfig {
            h: 0.0,
            washout: 600,
            ..small_config(3, EvolutionMode::Exact)
        };
        let run = run_reservoir(&vec![0.0; 700], &config).unwrap();
        let first = run.features.row(0);
        for r in 1..run.features.nrows() {
            for (a, b) in first.iter().zip(run.features.row(r)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn trotter_features_track_exact_features() {
        let series = wave(50);
        let exact = run_reservoir(&series, &small_config(3, EvolutionMode::Exact)).unwrap();
        let trotter = run_reservoir(
            &series,
            &ReservoirConfig {
                kappa: 32,
                ..small_config(3, EvolutionMode::Trotter)
            },
        )
        .unwrap();
        let diff = (exact.features.matrix() - trotter.features.matrix())
            .abs()
            .max();
        assert!(diff <= 0.02, "diff {diff}");
    }

    #[test]
    fn trotter_injection_equals_partial_trace_injection() {
        let config = small_config(3, EvolutionMode::Trotter);
        let reservoir = Reservoir::new(&config).unwrap();
        let rho = random_density(3, 10);
        let mut via_gates = rho.clone();
        reservoir.step(&mut via_gates, 0.35).unwrap();
        let mut via_inject = inject(&rho, 0.35).unwrap();
        apply_circuit_in_place(&mut via_inject, &reservoir.trotter_body().unwrap()).unwrap();
        assert!(max_abs_diff(via_gates.matrix(), via_inject.matrix()) < 1e-14);
    }

    #[test]
    fn runs_are_deterministic_in_both_measurement_modes() {
        let series = wave(30);
        for measurement in [MeasurementMode::Exact, MeasurementMode::Shots] {
            let config = ReservoirConfig {
                measurement,
                shot_seed: 8,
                ..small_config(3, EvolutionMode::Trotter)
            };
            let a = run_reservoir(&series, &config).unwrap();
            let b = run_reservoir(&series, &config).unwrap();
            assert_eq!(a.features, b.features);
        }
    }

    #[test]
    fn evolved_feature_is_not_the_raw_encoding() {
        let series = wave(20);
        let run = run_reservoir(&series, &small_config(3, EvolutionMode::Exact)).unwrap();
        let raw_hits = (0..run.features.nrows())
            .filter(|&r| (run.features.row(r)[0] - (1.0 - 2.0 * series[r + 5])).abs() < 1e-9)
            .count();
        assert_eq!(raw_hits, 0);
    }

    #[test]
    fn run_errors() {
        let config = small_config(2, EvolutionMode::Exact);
        assert!(matches!(
            run_reservoir(&wave(5), &config),
            Err(Error::Data(_))
        ));
        let mut bad = wave(10);
        bad[3] = 1.5;
        assert!(matches!(
            run_reservoir(&bad, &config),
            Err(Error::InputOutOfRange(_))
        ));
        let one_qubit = ReservoirConfig {
            n: 1,
            ..config.clone()
        };
        assert!(run_reservoir(&wave(10), &one_qubit).is_err());
        let no_shots = ReservoirConfig {
            measurement: MeasurementMode::Shots,
            shots: 0,
            ..config
        };
        assert!(run_reservoir(&wave(10), &no_shots).is_err());
    }

    #[test]
    fn config_json_round_trip_with_defaults() {
        let c: ReservoirConfig = serde_json::from_str(r#"{"n":3,"evolution":"exact"}"#).unwrap();
        assert_eq!(c.n, 3);
        assert_eq!(c.shots, 1024);
        assert_eq!(c.washout, 70);
        let back: ReservoirConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ReservoirConfig>(r#"{"qubits":3}"#).is_err());
    }

    #[test]
    fn feature_csv_has_header() {
        let fm = FeatureMatrix::from_feature_rows(&[vec![0.5, -0.25]]).unwrap();
        let mut buf = Vec::new();
        fm.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "z0,z1,bias\n0.5,-0.25,1.0\n"
        );
    }
}
