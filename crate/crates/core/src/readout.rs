//! Linear readout trained by pseudoinverse, forecasting and scoring.

use std::fmt;
use std::io::Write;

use nalgebra::{DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::DensityMatrix;
use crate::reservoir::{FeatureMatrix, Reservoir, ReservoirConfig, CLOSED_LOOP_STREAM};

/// Singular values below this fraction of the largest are dropped.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Output weights; the last entry multiplies the bias column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutWeights {
    values: Vec<f64>,
}

impl ReadoutWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "readout weights must be finite and non-empty".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bias(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `features · W[..k] + W[k]` for a row without its bias entry.
    pub fn apply(&self, features: &[f64]) -> Result<f64> {
        if features.len() + 1 != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len() - 1,
                got: features.len(),
            });
        }
        Ok(features
            .iter()
            .zip(&self.values)
            .map(|(x, w)| x * w)
            .sum::<f64>()
            + self.bias())
    }
}

/// `W = pinv(X̄)·ū`, the minimum-norm least-squares solution.
pub fn train_readout(features: &FeatureMatrix, targets: &[f64]) -> Result<ReadoutWeights> {
    let x = features.matrix();
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Numerical(
            "cannot train on an empty feature matrix".into(),
        ));
    }
    if x.nrows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: targets.len(),
        });
    }
    if x.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in training data".into()));
    }
    let svd = SVD::try_new(x.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let largest = svd.singular_values.max();
    let cutoff = largest * PINV_RELATIVE_CUTOFF;
    let u = svd.u.as_ref().expect("computed U");
    let v_t = svd.v_t.as_ref().expect("computed Vᵀ");
    let b = DVector::from_column_slice(targets);
    // W = V Σ⁺ Uᵀ b, dropping the truncated directions
    let mut coeffs = u.transpose() * b;
    for (c, &s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c = if s > cutoff { *c / s } else { 0.0 };
    }
    let w = v_t.transpose() * coeffs;
    ReadoutWeights::new(w.iter().copied().collect())
}

/// Teacher-forced predictions `X̄W`, one per feature row.
pub fn predict_open_loop(features: &FeatureMatrix, weights: &ReadoutWeights) -> Result<Vec<f64>> {
    if features.ncols() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: features.ncols(),
        });
    }
    let w = DVector::from_column_slice(weights.values());
    Ok((features.matrix() * w).iter().copied().collect())
}

/// Autoregressive forecast from `rho`: read features, predict, clamp to
/// `[0, 1]`, feed the prediction back as the next input.
pub fn predict_closed_loop(
    rho: &DensityMatrix,
    weights: &ReadoutWeights,
    config: &ReservoirConfig,
    horizon: usize,
) -> Result<Vec<f64>> {
    predict_closed_loop_with(&Reservoir::new(config)?, rho, weights, horizon)
}

pub(crate) fn predict_closed_loop_with(
    reservoir: &Reservoir,
    rho: &DensityMatrix,
    weights: &ReadoutWeights,
    horizon: usize,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::param("closed-loop horizon must be at least 1"));
    }
    let mut state = rho.clone();
    let mut out = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let features = reservoir.measure(&state, CLOSED_LOOP_STREAM + k as u64)?;
        let next = weights.apply(&features)?.clamp(0.0, 1.0);
        out.push(next);
        if k + 1 < horizon {
            reservoir.step(&mut state, next)?;
        }
    }
    Ok(out)
}

pub fn mse(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::param("mse of empty sequences"));
    }
    let sum: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    Ok(sum / predicted.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    OpenLoop,
    ClosedLoop,
}

impl fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictionMode::OpenLoop => "open_loop",
            PredictionMode::ClosedLoop => "closed_loop",
        })
    }
}

impl std::str::FromStr for PredictionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open_loop" => Ok(PredictionMode::OpenLoop),
            "closed_loop" => Ok(PredictionMode::ClosedLoop),
            other => Err(Error::param(format!("unknown prediction mode `{other}`"))),
        }
    }
}

/// Held-out forecast of one method on one variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub method: String,
    pub variable: String,
    pub mode: PredictionMode,
    pub horizon: usize,
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    pub mse: f64,
}

impl PredictionReport {
    pub fn new(
        method: impl Into<String>,
        variable: impl Into<String>,
        mode: PredictionMode,
        predictions: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let mse = mse(&predictions, &targets)?;
        Ok(Self {
            method: method.into(),
            variable: variable.into(),
            mode,
            horizon: predictions.len(),
            predictions,
            targets,
            mse,
        })
    }

    /// Per-step CSV: `step,truth,prediction`.
    pub fn write_steps_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "truth", "prediction"])?;
        for (step, (t, p)) in self.targets.iter().zip(&self.predictions).enumerate() {
            w.serialize((step, t, p))?;
        }
        w.flush().map_err(|e| Error::io("<prediction csv>", e))?;
        Ok(())
    }

    pub fn summary_json(&self, config_hash: &str) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "variable": self.variable,
            "mode": self.mode,
            "horizon": self.horizon,
            "mse": self.mse,
            "config_hash": config_hash,
        })
    }
}

/// Open- and closed-loop QRC forecasts of the last `horizon` points.
#[derive(Clone, Debug)]
pub struct QrcForecast {
    pub weights: ReadoutWeights,
    pub open_loop: PredictionReport,
    pub closed_loop: PredictionReport,
    pub features: FeatureMatrix,
}

/// Train on everything but the last `horizon` points and forecast those.
///
/// Feature row `t` (measured after consuming `u(t)`) is paired with target
/// `u(t+1)`. Washout rows are excluded from both features and targets.
/// Open-loop predictions use the true inputs up to `t`; the closed-loop run
/// starts from the state after the last training input and feeds back its
/// own predictions.
pub fn forecast_qrc(
    series: &[f64],
    config: &ReservoirConfig,
    horizon: usize,
    variable: &str,
) -> Result<QrcForecast> {
    let len = series.len();
    let washout = config.washout;
    if horizon == 0 {
        return Err(Error::param("horizon must be at least 1"));
    }
    if len < washout + horizon + 2 {
        return Err(Error::Data(format!(
            "series of length {len} too short for washout {washout} and horizon {horizon}"
        )));
    }
    let reservoir = Reservoir::new(config)?;
    let split = len - horizon;
    let mut prefix_state = None;
    let run = reservoir.run_observed(series, DensityMatrix::ground(config.n)?, |t, rho| {
        if t + 1 == split {
            prefix_state = Some(rho.clone());
        }
    })?;
    let features = run.features;
    // row r ↔ time washout + r
    let train_rows = split - 1 - washout;
    let train = features.rows(0, train_rows);
    let weights = train_readout(&train, &series[washout + 1..split])?;

    let test = features.rows(train_rows, horizon);
    let truth = series[split..].to_vec();
    let open = predict_open_loop(&test, &weights)?;
    let open_loop = PredictionReport::new(
        "QRC",
        variable,
        PredictionMode::OpenLoop,
        open,
        truth.clone(),
    )?;

    let start = prefix_state.expect("split lies inside the series");
    let closed = predict_closed_loop_with(&reservoir, &start, &weights, horizon)?;
    let closed_loop =
        PredictionReport::new("QRC", variable, PredictionMode::ClosedLoop, closed, truth)?;

    Ok(QrcForecast {
        weights,
        open_loop,
        closed_loop,
        features,
    })
}
