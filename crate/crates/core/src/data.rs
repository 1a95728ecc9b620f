//! Trajectory ingestion, normalization, synthetic series and report files.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::{PredictionMode, PredictionReport};

const PLT_HEADER_LINES: usize = 6;
const PLT_FIELDS: usize = 7;

/// GPS fixes: seconds since the epoch (naive local time), degrees.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectorySeries {
    pub timestamps: Vec<i64>,
    pub latitude: Vec<f64>,
    pub longitude: Vec<f64>,
}

impl TrajectorySeries {
    pub fn new(timestamps: Vec<i64>, latitude: Vec<f64>, longitude: Vec<f64>) -> Result<Self> {
        if timestamps.len() != latitude.len() || latitude.len() != longitude.len() {
            return Err(Error::Data(format!(
                "trajectory columns differ in length ({}, {}, {})",
                timestamps.len(),
                latitude.len(),
                longitude.len()
            )));
        }
        Ok(Self {
            timestamps,
            latitude,
            longitude,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn is_monotonic(&self) -> bool {
        self.timestamps.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn values(&self, variable: Variable) -> Vec<f64> {
        match variable {
            Variable::Latitude => self.latitude.clone(),
            Variable::Longitude => self.longitude.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Latitude,
    Longitude,
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variable::Latitude => "latitude",
            Variable::Longitude => "longitude",
        })
    }
}

/// `YYYY-MM-DD HH:MM:SS` (or with a `T` separator) as epoch seconds.
pub fn parse_timestamp(text: &str) -> Result<i64> {
    let text = text.trim();
    NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S"))
        .map(|dt| dt.and_utc().timestamp())
        .map_err(|e| Error::Data(format!("bad timestamp `{text}`: {e}")))
}

/// Parse a Geolife `.plt` file: six header lines, then
/// `lat,lon,0,altitude,days,date,time` records.
///
/// Out-of-order timestamps are logged, not rejected.
pub fn parse_plt(text: &str, source: &str) -> Result<TrajectorySeries> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < PLT_HEADER_LINES {
        return Err(Error::Parse {
            path: source.to_string(),
            line: lines.len(),
            message: format!("expected {PLT_HEADER_LINES} header lines"),
        });
    }
    let mut series = TrajectorySeries::default();
    for (idx, line) in lines.iter().enumerate().skip(PLT_HEADER_LINES) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: source.to_string(),
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != PLT_FIELDS {
            return Err(bad(format!(
                "expected {PLT_FIELDS} fields, found {}",
                fields.len()
            )));
        }
        let number = |i: usize, what: &str| {
            fields[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("bad {what} `{}`", fields[i])))
        };
        let lat = number(0, "latitude")?;
        let lon = number(1, "longitude")?;
        let stamp = format!("{} {}", fields[5], fields[6]);
        let ts = parse_timestamp(&stamp).map_err(|e| bad(e.to_string()))?;
        if let Some(&prev) = series.timestamps.last() {
            if ts < prev {
                log::warn!("{source}:{}: timestamp goes backwards", idx + 1);
            }
        }
        series.timestamps.push(ts);
        series.latitude.push(lat);
        series.longitude.push(lon);
    }
    Ok(series)
}

pub fn read_plt(path: &Path) -> Result<TrajectorySeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_plt(&text, &path.display().to_string())
}

/// Points with `start <= t <= end`, order preserved.
pub fn select_window(series: &TrajectorySeries, start: i64, end: i64) -> Result<TrajectorySeries> {
    if start >= end {
        return Err(Error::param(format!(
            "window start {start} not before end {end}"
        )));
    }
    let mut out = TrajectorySeries::default();
    for i in 0..series.len() {
        let t = series.timestamps[i];
        if (start..=end).contains(&t) {
            out.timestamps.push(t);
            out.latitude.push(series.latitude[i]);
            out.longitude.push(series.longitude[i]);
        }
    }
    if out.is_empty() {
        return Err(Error::Data("time window selects no points".into()));
    }
    Ok(out)
}

/// Series rescaled into `[0, 1]`, keeping the original range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSeries {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub variable: String,
}

impl NormalizedSeries {
    pub fn denormalize(&self, v: f64) -> f64 {
        self.min + v * (self.max - self.min)
    }

    pub fn denormalize_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.denormalize(v)).collect()
    }
}

pub fn normalize_minmax(values: &[f64], variable: &str) -> Result<NormalizedSeries> {
    if values.len() < 2 {
        return Err(Error::Data("need at least two values to normalize".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("series contains non-finite values".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Err(Error::Data("constant series cannot be normalized".into()));
    }
    let span = max - min;
    Ok(NormalizedSeries {
        values: values
            .iter()
            .map(|v| ((v - min) / span).clamp(0.0, 1.0))
            .collect(),
        min,
        max,
        variable: variable.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Sine,
    SumOfSines,
    Ramp,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(SyntheticKind::Sine),
            "sum_of_sines" | "sum-of-sines" => Ok(SyntheticKind::SumOfSines),
            "ramp" => Ok(SyntheticKind::Ramp),
            other => Err(Error::param(format!("unknown synthetic kind `{other}`"))),
        }
    }
}

/// Deterministic test series in `[0, 1]`.
///
/// * `sine`: `0.5 + 0.4·sin(2πt/50)`
/// * `sum_of_sines`: `sin(2πt/50) + 0.5·sin(2πt/(50φ) + θ)` with φ the golden
///   ratio and θ drawn from `seed`, min-max rescaled
/// * `ramp`: `t / (length − 1)`
pub fn gen_synthetic(kind: SyntheticKind, length: usize, seed: u64) -> Result<Vec<f64>> {
    if length < 2 {
        return Err(Error::param("synthetic series needs length >= 2"));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(match kind {
        SyntheticKind::Sine => (0..length)
            .map(|t| 0.5 + 0.4 * (two_pi * t as f64 / 50.0).sin())
            .collect(),
        SyntheticKind::SumOfSines => {
            let phase = ChaCha8Rng::seed_from_u64(seed).random_range(0.0..two_pi);
            let golden = (1.0 + 5f64.sqrt()) / 2.0;
            let raw: Vec<f64> = (0..length)
                .map(|t| {
                    let t = t as f64;
                    (two_pi * t / 50.0).sin() + 0.5 * (two_pi * t / (50.0 * golden) + phase).sin()
                })
                .collect();
            normalize_minmax(&raw, "synthetic")?.values
        }
        SyntheticKind::Ramp => (0..length)
            .map(|t| t as f64 / (length - 1) as f64)
            .collect(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    t: usize,
    value: f64,
}

/// Create `path`, writing `# tag` as a first line when given.
pub(crate) fn create_tagged(path: &Path, tag: Option<&str>) -> Result<fs::File> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    if let Some(tag) = tag {
        writeln!(file, "# {tag}").map_err(|e| Error::io(path, e))?;
    }
    Ok(file)
}

/// CSV reader that skips `#` lines.
fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file))
}

/// Internal univariate CSV: header `t,value`.
pub fn write_series_csv(path: &Path, values: &[f64], tag: Option<&str>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_tagged(path, tag)?);
    for (t, &value) in values.iter().enumerate() {
        w.serialize(SeriesRow { t, value })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    open_csv(path)?
        .deserialize::<SeriesRow>()
        .map(|row| row.map(|r| r.value).map_err(Error::from))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    t: i64,
    latitude: f64,
    longitude: f64,
}

/// Internal trajectory CSV: header `t,latitude,longitude`.
pub fn write_trajectory_csv<W: std::io::Write>(series: &TrajectorySeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..series.len() {
        w.serialize(TrajectoryRow {
            t: series.timestamps[i],
            latitude: series.latitude[i],
            longitude: series.longitude[i],
        })?;
    }
    w.flush().map_err(|e| Error::io("<trajectory csv>", e))?;
    Ok(())
}

pub fn read_trajectory_csv<R: std::io::Read>(input: R) -> Result<TrajectorySeries> {
    let mut r = csv::Reader::from_reader(input);
    let mut series = TrajectorySeries::default();
    for row in r.deserialize::<TrajectoryRow>() {
        let row = row?;
        series.timestamps.push(row.t);
        series.latitude.push(row.latitude);
        series.longitude.push(row.longitude);
    }
    Ok(series)
}

/// One line of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub variable: String,
    pub mode: PredictionMode,
    pub mse: f64,
}

/// File name used for a report's per-step CSV next to `summary`.
pub fn steps_path(summary: &Path, report: &PredictionReport) -> PathBuf {
    let stem = summary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    let name = format!(
        "{stem}_{}_{}_{}.csv",
        report.method.to_lowercase(),
        report.variable,
        report.mode
    );
    summary.with_file_name(name)
}

/// Summary CSV (`method,variable,mode,mse`, one row per report) plus one
/// `step,truth,prediction` CSV per report alongside it.
pub fn write_report(reports: &[PredictionReport], path: &Path) -> Result<()> {
    write_report_tagged(reports, path, None)
}

/// As [`write_report`], with a `# tag` line heading every file.
pub fn write_report_tagged(
    reports: &[PredictionReport],
    path: &Path,
    tag: Option<&str>,
) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::param("no reports to write"));
    }
    let mut w = csv::Writer::from_writer(create_tagged(path, tag)?);
    for r in reports {
        w.serialize(ReportRow {
            method: r.method.clone(),
            variable: r.variable.clone(),
            mode: r.mode,
            mse: r.mse,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    for r in reports {
        let step_path = steps_path(path, r);
        r.write_steps_csv(create_tagged(&step_path, tag)?)?;
    }
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    open_csv(path)?
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Read an externally produced `step,truth,prediction` CSV as a report.
pub fn read_external_predictions(
    path: &Path,
    method: &str,
    variable: &str,
    mode: PredictionMode,
) -> Result<PredictionReport> {
    #[derive(Deserialize)]
    struct Row {
        #[allow(dead_code)]
        step: usize,
        truth: f64,
        prediction: f64,
    }
    let mut r = open_csv(path)?;
    let mut truth = Vec::new();
    let mut predictions = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row?;
        truth.push(row.truth);
        predictions.push(row.prediction);
    }
    if predictions.is_empty() {
        return Err(Error::Data(format!(
            "{}: no prediction rows",
            path.display()
        )));
    }
    PredictionReport::new(method, variable, mode, predictions, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // layout and coordinates of Geolife user 000, 20081023025304.plt
    const SAMPLE_PLT: &str = "Geolife trajectory
WGS 84
Altitude is in Feet
Reserved 3
0,2,255,My Track,0,0,2,8421376
0
39.984702,116.318417,0,492,39744.1201851852,2008-10-23,02:53:04
39.984683,116.31845,0,492,39744.1202546296,2008-10-23,02:53:10
39.984686,116.318417,0,492,39744.1203125,2008-10-23,02:53:15
39.984688,116.318385,0,492,39744.1203703704,2008-10-23,02:53:20
39.984655,116.318263,0,492,39744.1204282407,2008-10-23,02:53:25
";

    #[test]
    fn parses_geolife_records() {
        let s = parse_plt(SAMPLE_PLT, "000.plt").unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.latitude.iter().all(|l| (l - 39.9).abs() < 0.2));
        assert!(s.longitude.iter().all(|l| (l - 116.3).abs() < 0.2));
        assert_eq!(
            s.timestamps[0],
            parse_timestamp("2008-10-23 02:53:04").unwrap()
        );
        assert_eq!(s.timestamps[1] - s.timestamps[0], 6);
        assert!(s.is_monotonic());
    }

    #[test]
    fn malformed_record_names_line() {
        let text = SAMPLE_PLT.replace(
            "39.984686,116.318417,0,492,39744.1203125,2008-10-23,02:53:15",
            "39.984686,116.318417,0,492,39744.1203125",
        );
        let err = parse_plt(&text, "x.plt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 9, .. }), "{err}");
        assert!(err.to_string().contains("x.plt: line 9"));
    }

    #[test]
    fn short_header_rejected() {
        assert!(parse_plt("Geolife trajectory\nWGS 84\n", "h.plt").is_err());
    }

    #[test]
    fn backwards_time_is_not_an_error() {
        let text = SAMPLE_PLT.replace("02:53:25", "02:50:00");
        let s = parse_plt(&text, "b.plt").unwrap();
        assert!(!s.is_monotonic());
    }

    #[test]
    fn window_selection() {
        let s = parse_plt(SAMPLE_PLT, "000.plt").unwrap();
        let all = select_window(&s, 0, i64::MAX).unwrap();
        assert_eq!(all, s);
        let mid = select_window(
            &s,
            parse_timestamp("2008-10-23 02:53:10").unwrap(),
            parse_timestamp("2008-10-23T02:53:20").unwrap(),
        )
        .unwrap();
        assert_eq!(mid.len(), 3);
        assert!(select_window(&s, 0, 10).is_err());
        assert!(select_window(&s, 10, 10).is_err());
    }

    #[test]
    fn normalize_two_points() {
        let n = normalize_minmax(&[1.0, 3.0], "v").unwrap();
        assert_eq!(n.values, vec![0.0, 1.0]);
        assert_eq!((n.min, n.max), (1.0, 3.0));
        assert!(normalize_minmax(&[2.0, 2.0], "v").is_err());
        assert!(normalize_minmax(&[2.0], "v").is_err());
    }

    #[test]
    fn synthetic_series() {
        let sine = gen_synthetic(SyntheticKind::Sine, 244, 0).unwrap();
        assert!(sine.iter().all(|v| (0.1 - 1e-12..=0.9 + 1e-12).contains(v)));
        let a = gen_synthetic(SyntheticKind::SumOfSines, 244, 5).unwrap();
        assert_eq!(a, gen_synthetic(SyntheticKind::SumOfSines, 244, 5).unwrap());
        assert_ne!(a, gen_synthetic(SyntheticKind::SumOfSines, 244, 6).unwrap());
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        let ramp = gen_synthetic(SyntheticKind::Ramp, 10, 0).unwrap();
        assert!(ramp.windows(2).all(|w| w[0] < w[1]));
        assert!("square".parse::<SyntheticKind>().is_err());
        assert!(gen_synthetic(SyntheticKind::Ramp, 1, 0).is_err());
    }

    fn report(method: &str, variable: &str, mse_pred: f64) -> PredictionReport {
        PredictionReport::new(
            method,
            variable,
            PredictionMode::OpenLoop,
            vec![mse_pred, 0.5],
            vec![0.0, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn single_report_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_report(&[report("QRC", "latitude", 0.1)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), "method,variable,mode,mse");
        assert!(dir
            .path()
            .join("summary_qrc_latitude_open_loop.csv")
            .exists());
    }

    #[test]
    fn table_shape_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        let mut reports = Vec::new();
        for (i, method) in ["QRC", "ESN", "LSTM"].iter().enumerate() {
            for (j, var) in ["latitude", "longitude"].iter().enumerate() {
                reports.push(report(
                    method,
                    var,
                    0.013 * (i + 1) as f64 + 0.0007 * j as f64,
                ));
            }
        }
        write_report_tagged(&reports, &path, Some("config_hash=abc seed=0")).unwrap();
        let rows = read_report(&path).unwrap();
        assert_eq!(rows.len(), 6);
        for (row, r) in rows.iter().zip(&reports) {
            assert_eq!(row.mse, r.mse);
            assert_eq!(row.method, r.method);
        }
    }

    #[test]
    fn unwritable_report_path() {
        let err = write_report(
            &[report("QRC", "v", 0.1)],
            Path::new("/nonexistent/dir/x.csv"),
        );
        assert!(err.is_err());
        assert!(write_report(&[], Path::new("x.csv")).is_err());
    }

    #[test]
    fn series_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let values = gen_synthetic(SyntheticKind::SumOfSines, 30, 1).unwrap();
        write_series_csv(&path, &values, None).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("t,value\n"));
        assert_eq!(read_series_csv(&path).unwrap(), values);
        write_series_csv(&path, &values, Some("config_hash=00ff seed=3")).unwrap();
        assert!(fs::read_to_string(&path)
            .unwrap()
            .starts_with("# config_hash=00ff seed=3\nt,value\n"));
        assert_eq!(read_series_csv(&path).unwrap(), values);
        let err = read_series_csv(&dir.path().join("missing.csv")).unwrap_err();
        assert!(err.to_string().contains("missing.csv"));
    }

    #[test]
    fn external_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lstm.csv");
        fs::write(&path, "step,truth,prediction\n0,0.5,0.4\n1,0.6,0.8\n").unwrap();
        let r =
            read_external_predictions(&path, "LSTM", "latitude", PredictionMode::OpenLoop).unwrap();
        assert!((r.mse - 0.025).abs() < 1e-15);
        assert!(read_external_predictions(
            &dir.path().join("none.csv"),
            "X",
            "v",
            PredictionMode::OpenLoop
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn normalized_values_lie_in_unit_interval(values in prop::collection::vec(-1e6f64..1e6, 2..100)) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let n = normalize_minmax(&values, "v").unwrap();
            prop_assert!(n.values.iter().all(|v| (0.0..=1.0).contains(v)));
            for (orig, &norm) in values.iter().zip(&n.values) {
                let back = n.denormalize(norm);
                prop_assert!((back - orig).abs() <= 1e-12 * orig.abs().max(n.max - n.min));
            }
            // monotone
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if values[i] < values[j] {
                        prop_assert!(n.values[i] <= n.values[j]);
                    }
                }
            }
        }

        #[test]
        fn trajectory_csv_round_trip(
            rows in prop::collection::vec((any::<i32>(), -90.0f64..90.0, -180.0f64..180.0), 0..40)
        ) {
            let series = TrajectorySeries::new(
                rows.iter().map(|r| r.0 as i64).collect(),
                rows.iter().map(|r| r.1).collect(),
                rows.iter().map(|r| r.2).collect(),
            ).unwrap();
            let mut buf = Vec::new();
            write_trajectory_csv(&series, &mut buf).unwrap();
            prop_assert_eq!(read_trajectory_csv(buf.as_slice()).unwrap(), series);
        }
    }
}
