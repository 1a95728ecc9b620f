//! Reproducible experiments: config loading, seed fan-out, and the work
//! behind each CLI command.
//!
//! Every run resolves the master `seed` into component seeds with
//! [`derive_seed`] (labels `couplings`, `shots`, `esn`, `synthetic`), writes
//! the resolved config to `config.json`, and tags every artifact with the
//! config hash and master seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    create_tagged, gen_synthetic, normalize_minmax, parse_timestamp, read_external_predictions,
    read_plt, read_series_csv, select_window, write_report_tagged, write_series_csv,
    NormalizedSeries, SyntheticKind, Variable,
};
use crate::error::{Error, Result};
use crate::esn::{esn_forecast, init_esn, EsnConfig, EsnReservoir};
use crate::evolve::export_qasm_annotated;
use crate::ising::HamiltonianDoc;
use crate::readout::{forecast_qrc, PredictionMode, PredictionReport, QrcForecast};
use crate::reservoir::{encode_angle, EvolutionMode, Reservoir, ReservoirConfig};
use crate::seed::{self, derive_seed, short_hash, stream_seed};

pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const QASM_MANIFEST: &str = "qasm_manifest.json";
pub const HAMILTONIAN_FILE: &str = "hamiltonian.json";
pub const SERIES_FILE: &str = "series.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Geolife `.plt` trajectory, optionally cut to an inclusive window
    /// given as `YYYY-MM-DD HH:MM:SS`.
    Plt {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end: Option<String>,
        #[serde(default = "default_variables")]
        variables: Vec<Variable>,
    },
    /// Univariate `t,value` CSV.
    Csv {
        path: PathBuf,
    },
    Synthetic {
        shape: SyntheticKind,
        length: usize,
    },
}

fn default_variables() -> Vec<Variable> {
    vec![Variable::Latitude, Variable::Longitude]
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            shape: SyntheticKind::SumOfSines,
            length: 244,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub reservoir: ReservoirConfig,
    pub esn: EsnConfig,
    /// Chunk length of the ESN closed-loop forecast.
    pub esn_step: usize,
    /// Held-out tail length.
    pub horizon: usize,
    pub modes: Vec<PredictionMode>,
    /// Master seed; component seeds are derived from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Filled in on the echoed config; ignored when hashing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut config = Self {
            data: DataSource::default(),
            reservoir: ReservoirConfig::default(),
            esn: EsnConfig::default(),
            esn_step: 2,
            horizon: 30,
            modes: vec![PredictionMode::OpenLoop, PredictionMode::ClosedLoop],
            seed: 0,
            out_dir: PathBuf::from("qrc-out"),
            config_hash: None,
        };
        config.derive_seeds();
        config
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Overwrite component seeds with those derived from the master seed.
    pub fn derive_seeds(&mut self) {
        self.reservoir.coupling_seed = derive_seed(self.seed, seed::COUPLINGS);
        self.reservoir.shot_seed = derive_seed(self.seed, seed::SHOTS);
        self.esn.seed = derive_seed(self.seed, seed::ESN);
    }

    pub fn synthetic_seed(&self) -> u64 {
        derive_seed(self.seed, seed::SYNTHETIC)
    }

    /// Derive seeds, validate, and record the hash.
    pub fn resolve(mut self) -> Result<Self> {
        self.derive_seeds();
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config(
                "at least one prediction mode is required".into(),
            ));
        }
        if self.esn_step == 0 || !self.horizon.is_multiple_of(self.esn_step) {
            return Err(Error::Config(format!(
                "esn_step {} must divide horizon {}",
                self.esn_step, self.horizon
            )));
        }
        if let DataSource::Plt { variables, .. } = &self.data {
            if variables.is_empty() {
                return Err(Error::Config("no variables selected".into()));
            }
        }
        self.reservoir.validate()?;
        self.esn.validate()?;
        self.config_hash = Some(self.hash());
        Ok(self)
    }

    /// Hash of the canonical JSON, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.config_hash = None;
        short_hash(&serde_json::to_vec(&canonical).expect("config serializes"))
    }

    pub fn tag(&self) -> String {
        format!("config_hash={} seed={}", self.hash(), self.seed)
    }

    /// Normalized input series, one per selected variable.
    pub fn load_series(&self) -> Result<Vec<NormalizedSeries>> {
        match &self.data {
            DataSource::Plt {
                path,
                start,
                end,
                variables,
            } => {
                let mut trajectory = read_plt(path)?;
                if start.is_some() || end.is_some() {
                    let start = start
                        .as_deref()
                        .map(parse_timestamp)
                        .transpose()?
                        .unwrap_or(i64::MIN);
                    let end = end
                        .as_deref()
                        .map(parse_timestamp)
                        .transpose()?
                        .unwrap_or(i64::MAX);
                    trajectory = select_window(&trajectory, start, end)?;
                }
                variables
                    .iter()
                    .map(|&v| normalize_minmax(&trajectory.values(v), &v.to_string()))
                    .collect()
            }
            DataSource::Csv { path } => {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "value".into());
                Ok(vec![normalize_minmax(&read_series_csv(path)?, &name)?])
            }
            DataSource::Synthetic { shape, length } => {
                let values = gen_synthetic(*shape, *length, self.synthetic_seed())?;
                let name = serde_json::to_value(shape)?
                    .as_str()
                    .unwrap_or("synthetic")
                    .to_string();
                // already in [0, 1]; kept unscaled
                Ok(vec![NormalizedSeries {
                    values,
                    min: 0.0,
                    max: 1.0,
                    variable: name,
                }])
            }
        }
    }

    fn wants(&self, mode: PredictionMode) -> bool {
        self.modes.contains(&mode)
    }
}

/// Externally produced predictions to merge into a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalSource {
    pub path: PathBuf,
    /// Variable the file forecasts; the first series when absent.
    pub variable: Option<String>,
}

impl std::str::FromStr for ExternalSource {
    type Err = Error;

    /// `path` or `variable=path`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((var, path)) if !var.is_empty() && !path.is_empty() => Ok(Self {
                path: PathBuf::from(path),
                variable: Some(var.to_string()),
            }),
            _ if !s.is_empty() => Ok(Self {
                path: PathBuf::from(s),
                variable: None,
            }),
            _ => Err(Error::Config("empty --external argument".into())),
        }
    }
}

impl ExternalSource {
    /// Method name: the file stem, upper-cased.
    pub fn method(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().to_uppercase())
            .unwrap_or_else(|| "EXTERNAL".into())
    }
}

pub fn qrc_reports(
    config: &ExperimentConfig,
    series: &NormalizedSeries,
) -> Result<(QrcForecast, Vec<PredictionReport>)> {
    let forecast = forecast_qrc(
        &series.values,
        &config.reservoir,
        config.horizon,
        &series.variable,
    )?;
    let mut reports = Vec::new();
    if config.wants(PredictionMode::OpenLoop) {
        reports.push(forecast.open_loop.clone());
    }
    if config.wants(PredictionMode::ClosedLoop) {
        reports.push(forecast.closed_loop.clone());
    }
    Ok((forecast, reports))
}

/// ESN forecasts: one-step (open loop) and chunked (closed loop, `esn_step`
/// points per chunk). Washout is shared with the reservoir config.
pub fn esn_reports(
    config: &ExperimentConfig,
    series: &NormalizedSeries,
) -> Result<Vec<PredictionReport>> {
    let fresh: EsnReservoir = init_esn(&config.esn)?;
    let washout = config.reservoir.washout;
    let mut reports = Vec::new();
    if config.wants(PredictionMode::OpenLoop) {
        let mut esn = fresh.clone();
        reports.push(esn_forecast(
            &mut esn,
            &series.values,
            washout,
            1,
            config.horizon,
            &series.variable,
        )?);
    }
    if config.wants(PredictionMode::ClosedLoop) && config.esn_step > 1 {
        let mut esn = fresh;
        reports.push(esn_forecast(
            &mut esn,
            &series.values,
            washout,
            config.esn_step,
            config.horizon,
            &series.variable,
        )?);
    }
    Ok(reports)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn prepare_out_dir(config: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    write_json(&config.out_dir.join(CONFIG_FILE), config)
}

fn write_reports(config: &ExperimentConfig, reports: &[PredictionReport]) -> Result<()> {
    let tag = config.tag();
    write_report_tagged(reports, &config.out_dir.join(SUMMARY_CSV), Some(&tag))?;
    let summary = serde_json::json!({
        "config_hash": config.hash(),
        "seed": config.seed,
        "reports": reports.iter().map(|r| r.summary_json(&config.hash())).collect::<Vec<_>>(),
    });
    write_json(&config.out_dir.join(SUMMARY_JSON), &summary)
}

/// Fixed-width MSE table, one row per report.
pub fn format_table(reports: &[PredictionReport]) -> String {
    let mut out = format!(
        "{:<10} {:<14} {:<12} {:>12}\n",
        "method", "variable", "mode", "mse"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<10} {:<14} {:<12} {:>12.6e}",
            r.method,
            r.variable,
            r.mode.to_string(),
            r.mse
        );
    }
    out
}

/// QRC forecast of every series; writes config, features, and reports.
pub fn cmd_run(config: &ExperimentConfig) -> Result<Vec<PredictionReport>> {
    let series = config.load_series()?;
    prepare_out_dir(config)?;
    let tag = config.tag();
    let mut reports = Vec::new();
    for s in &series {
        let (forecast, r) = qrc_reports(config, s)?;
        let path = config.out_dir.join(format!("features_{}.csv", s.variable));
        forecast
            .features
            .write_csv(create_tagged(&path, Some(&tag))?)?;
        reports.extend(r);
    }
    write_reports(config, &reports)?;
    Ok(reports)
}

/// QRC and ESN on the same series plus any external prediction files.
pub fn cmd_compare(
    config: &ExperimentConfig,
    external: &[ExternalSource],
) -> Result<Vec<PredictionReport>> {
    let series = config.load_series()?;
    prepare_out_dir(config)?;
    let mut reports = Vec::new();
    for s in &series {
        let (qrc, esn) = std::thread::scope(|scope| {
            let esn = scope.spawn(|| esn_reports(config, s));
            let qrc = qrc_reports(config, s).map(|(_, r)| r);
            (qrc, esn.join().expect("esn worker panicked"))
        });
        reports.extend(qrc?);
        reports.extend(esn?);
    }
    for ext in external {
        let variable = ext
            .variable
            .clone()
            .unwrap_or_else(|| series[0].variable.clone());
        reports.push(read_external_predictions(
            &ext.path,
            &ext.method(),
            &variable,
            PredictionMode::OpenLoop,
        )?);
    }
    write_reports(config, &reports)?;
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QasmStep {
    pub t: usize,
    pub input: f64,
    pub angle: f64,
    pub file: String,
    /// Seed for sampling this step's shots on a simulator.
    pub shot_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QasmManifest {
    pub config_hash: String,
    pub seed: u64,
    pub hamiltonian_hash: String,
    pub coupling_seed: u64,
    pub shot_seed: u64,
    pub shots: usize,
    pub n: usize,
    pub tau: f64,
    pub kappa: usize,
    pub variable: String,
    pub steps: Vec<QasmStep>,
}

/// One program per timestep of the first series: file `t` prepares the
/// reservoir state after inputs `0..=t` and measures every qubit.
pub fn cmd_export_qasm(config: &ExperimentConfig) -> Result<QasmManifest> {
    if config.reservoir.evolution != EvolutionMode::Trotter {
        return Err(Error::Config(
            "export-qasm needs trotter evolution; exact mode has no circuit".into(),
        ));
    }
    let series = config.load_series()?;
    let series = &series[0];
    let reservoir = Reservoir::new(&config.reservoir)?;
    let body = reservoir.trotter_body()?;
    prepare_out_dir(config)?;

    let spec = reservoir.spec();
    let doc = HamiltonianDoc {
        n: spec.n(),
        h: config.reservoir.h,
        seed: config
            .reservoir
            .couplings
            .is_none()
            .then_some(config.reservoir.coupling_seed),
        alpha: config.reservoir.alpha,
        beta: config.reservoir.beta,
        j: Some(spec.couplings().to_rows()),
    };
    let hamiltonian_hash = short_hash(&serde_json::to_vec(&doc)?);
    write_json(&config.out_dir.join(HAMILTONIAN_FILE), &doc)?;

    let angles = series
        .values
        .iter()
        .map(|&u| encode_angle(u))
        .collect::<Result<Vec<f64>>>()?;
    let config_hash = config.hash();
    let mut steps = Vec::with_capacity(angles.len());
    for (t, (&u, &angle)) in series.values.iter().zip(&angles).enumerate() {
        let file = format!("circuit_{t:04}.qasm");
        let notes = [
            ("config_hash", config_hash.clone()),
            ("seed", config.seed.to_string()),
            ("hamiltonian_hash", hamiltonian_hash.clone()),
            ("tau", format!("{:?}", config.reservoir.tau)),
            ("kappa", config.reservoir.kappa.to_string()),
            ("step", t.to_string()),
        ];
        let text = export_qasm_annotated(&body, &angles[..=t], &notes)?;
        let path = config.out_dir.join(&file);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        steps.push(QasmStep {
            t,
            input: u,
            angle,
            file,
            shot_seed: stream_seed(config.reservoir.shot_seed, t as u64),
        });
    }
    let manifest = QasmManifest {
        config_hash,
        seed: config.seed,
        hamiltonian_hash,
        coupling_seed: config.reservoir.coupling_seed,
        shot_seed: config.reservoir.shot_seed,
        shots: config.reservoir.shots,
        n: config.reservoir.n,
        tau: config.reservoir.tau,
        kappa: config.reservoir.kappa,
        variable: series.variable.clone(),
        steps,
    };
    write_json(&config.out_dir.join(QASM_MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Write a synthetic series as `t,value` CSV.
pub fn cmd_synth(
    config: &ExperimentConfig,
    shape: SyntheticKind,
    length: usize,
) -> Result<PathBuf> {
    let values = gen_synthetic(shape, length, config.synthetic_seed())?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let path = config.out_dir.join(SERIES_FILE);
    write_series_csv(&path, &values, Some(&config.tag()))?;
    Ok(path)
}

/// Write the MSE table to `out` (used by the CLI for stdout).
pub fn print_table(reports: &[PredictionReport], mut out: impl std::io::Write) -> Result<()> {
    out.write_all(format_table(reports).as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}
