//! Echo-state-network baseline.
//!
//! Update rule (no leak, no output feedback):
//! `x ← tanh(W·x + w_in·u) + noise·(ζ − ½)`, `ζ ~ U[0,1]` per unit.
//! The readout is the same pseudoinverse fit the quantum reservoir uses,
//! over the reservoir state plus a bias column.

use nalgebra::{DMatrix, DVector, Schur};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::{train_readout, PredictionMode, PredictionReport};
use crate::reservoir::FeatureMatrix;

const MAX_REDRAWS: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsnConfig {
    pub units: usize,
    pub spectral_radius: f64,
    /// Fraction of recurrent weights set to exactly zero.
    pub sparsity: f64,
    pub noise: f64,
    pub input_scale: f64,
    pub seed: u64,
}

impl Default for EsnConfig {
    fn default() -> Self {
        Self {
            units: 500,
            spectral_radius: 0.95,
            sparsity: 0.1,
            noise: 0.001,
            input_scale: 1.0,
            seed: 0,
        }
    }
}

impl EsnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.units == 0 {
            return Err(Error::param("ESN needs at least one unit"));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return Err(Error::param("spectral radius must be positive"));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::param("sparsity must lie in [0, 1)"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::param("noise must be non-negative"));
        }
        if !self.input_scale.is_finite() {
            return Err(Error::param("input scale must be finite"));
        }
        Ok(())
    }

    /// Number of recurrent entries zeroed for this configuration.
    pub fn zero_count(&self) -> usize {
        (self.sparsity * (self.units * self.units) as f64).round() as usize
    }
}

/// Largest eigenvalue modulus, from the real Schur form.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct EsnReservoir {
    recurrent: DMatrix<f64>,
    input_weights: DVector<f64>,
    state: DVector<f64>,
    noise: f64,
    rng: ChaCha8Rng,
}

/// Build a reservoir: uniform `[-½, ½]` recurrent weights with an exact
/// `sparsity` fraction zeroed at random positions, rescaled to the target
/// spectral radius; input weights uniform `[-1, 1]·input_scale`.
///
/// A degenerate draw (zero spectral radius) is redrawn with seed+1, up to
/// three times.
pub fn init_esn(config: &EsnConfig) -> Result<EsnReservoir> {
    config.validate()?;
    let units = config.units;
    for attempt in 0..=MAX_REDRAWS {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(attempt));
        let mut recurrent = DMatrix::from_fn(units, units, |_, _| rng.random_range(-0.5..0.5));
        for flat in sample(&mut rng, units * units, config.zero_count()) {
            recurrent[(flat / units, flat % units)] = 0.0;
        }
        let radius = spectral_radius(&recurrent)?;
        if radius <= f64::EPSILON {
            log::warn!(
                "degenerate ESN draw (seed {}), redrawing",
                config.seed + attempt
            );
            continue;
        }
        recurrent *= config.spectral_radius / radius;
        let input_weights = DVector::from_fn(units, |_, _| {
            rng.random_range(-1.0..=1.0) * config.input_scale
        });
        return Ok(EsnReservoir {
            recurrent,
            input_weights,
            state: DVector::zeros(units),
            noise: config.noise,
            rng,
        });
    }
    Err(Error::Numerical(format!(
        "ESN recurrent matrix degenerate after {} redraws",
        MAX_REDRAWS
    )))
}

impl EsnReservoir {
    pub fn units(&self) -> usize {
        self.state.len()
    }

    pub fn recurrent(&self) -> &DMatrix<f64> {
        &self.recurrent
    }

    pub fn input_weights(&self) -> &DVector<f64> {
        &self.input_weights
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn reset_state(&mut self) {
        self.state.fill(0.0);
    }

    /// Advance one step on input `u`.
    pub fn step(&mut self, u: f64) -> &DVector<f64> {
        let pre = &self.recurrent * &self.state + &self.input_weights * u;
        self.state = pre.map(f64::tanh);
        if self.noise > 0.0 {
            for x in self.state.iter_mut() {
                *x += self.noise * (self.rng.random::<f64>() - 0.5);
            }
        }
        &self.state
    }
}

/// Train on the series minus its last `total_horizon` points, then forecast
/// those points in chunks of `step`.
///
/// Inside a chunk each prediction is fed back as the next input; between
/// chunks the reservoir is re-synchronized on the true values. `step = 1`
/// is plain teacher-forced one-step prediction.
pub fn esn_forecast(
    reservoir: &mut EsnReservoir,
    series: &[f64],
    washout: usize,
    step: usize,
    total_horizon: usize,
    variable: &str,
) -> Result<PredictionReport> {
    if step == 0 || total_horizon == 0 || !total_horizon.is_multiple_of(step) {
        return Err(Error::param(format!(
            "horizon {total_horizon} must be a positive multiple of step {step}"
        )));
    }
    let len = series.len();
    if len < washout + total_horizon + 2 {
        return Err(Error::Data(format!(
            "series of length {len} too short for washout {washout} and horizon {total_horizon}"
        )));
    }
    let split = len - total_horizon;
    let mut rows = Vec::with_capacity(split - washout);
    for (t, &u) in series[..split].iter().enumerate() {
        let state = reservoir.step(u);
        if t >= washout && t + 1 < split {
            rows.push(state.iter().copied().collect::<Vec<f64>>());
        }
    }
    let features = FeatureMatrix::from_feature_rows(&rows)?;
    let weights = train_readout(&features, &series[washout + 1..split])?;
    let readout = |state: &DVector<f64>| weights.apply(state.as_slice());

    let mut predictions = Vec::with_capacity(total_horizon);
    for chunk in 0..total_horizon / step {
        let start = split + chunk * step;
        let mut rollout = reservoir.clone();
        let mut next = readout(rollout.state())?;
        predictions.push(next);
        for _ in 1..step {
            rollout.step(next);
            next = readout(rollout.state())?;
            predictions.push(next);
        }
        for &u in &series[start..start + step] {
            reservoir.step(u);
        }
    }
    let mode = if step == 1 {
        PredictionMode::OpenLoop
    } else {
        PredictionMode::ClosedLoop
    };
    PredictionReport::new("ESN", variable, mode, predictions, series[split..].to_vec())
}
