//! File formats: JSON configs and reports, JSON-lines traces, CSV matrices and tables.
//!
//! Every writer is deterministic: same inputs, same bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::error::SimError;
use crate::experiments::{distribution_history, CurvePoint, ExperimentConfig, RunReport, SweepRow};
use crate::network::ProbeOutcome;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot parse: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub type ArtifactResult<T> = Result<T, ArtifactError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> ArtifactResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> ArtifactResult<()> {
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> ArtifactResult<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads and validates an experiment config.
pub fn load_config(path: &Path) -> ArtifactResult<ExperimentConfig> {
    let config: ExperimentConfig = read_json(path)?;
    config.validate()?;
    Ok(config)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> ArtifactResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path)(e.into()))?;
    writeln!(w).map_err(io_err(path))?;
    finish(w, path)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> ArtifactResult<()> {
    let mut w = create(path)?;
    for record in records {
        serde_json::to_writer(&mut w, record).map_err(|e| io_err(path)(e.into()))?;
        writeln!(w).map_err(io_err(path))?;
    }
    finish(w, path)
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ArtifactError + '_ {
    move |e| ArtifactError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Resistance matrix in ohms: one row per bitline, no header.
pub fn write_matrix_csv(path: &Path, rows: &[Vec<f64>]) -> ArtifactResult<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    for row in rows {
        w.write_record(row.iter().map(f64::to_string))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_matrix_csv(path: &Path) -> ArtifactResult<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| ArtifactError::Parse {
                    path: path.to_path_buf(),
                    message: format!("{field:?}: {e}"),
                })
            })
            .collect::<ArtifactResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> ArtifactResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// `cv,median_epochs,mean_energy_J,success_rate`
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> ArtifactResult<()> {
    write_table(path, rows)
}

/// `pulse,resistance_ohm,energy_J`
pub fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> ArtifactResult<()> {
    write_table(path, points)
}

#[derive(Serialize)]
struct HistogramRow {
    epoch: u32,
    bin_low_ohm: f64,
    bin_high_ohm: f64,
    count: usize,
}

#[derive(Serialize)]
struct StatsRecord<'a> {
    epoch: u32,
    #[serde(flatten)]
    stats: &'a crate::crossbar::ArrayStats,
}

/// Writes a learn run to `out_dir`:
///
/// - `report.json`: the full report
/// - `traces.jsonl`: one line per pattern presentation, without snapshots
/// - `probes.jsonl`: one line per recall probe
/// - `stats.jsonl`, `histograms.csv`: per-snapshot distribution data
/// - `snapshots/epoch_NNN.csv`, `snapshots/weights_epoch_NNN.csv`: resistance
///   matrices and resistances normalized to the initial array
///
/// The distribution files are skipped when the report holds no snapshots.
pub fn write_learn_artifacts(out_dir: &Path, report: &RunReport) -> ArtifactResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    let path = out_dir.join("report.json");
    write_json(&path, report)?;
    written.push(path);

    let lean: Vec<_> = report
        .traces
        .iter()
        .map(|t| crate::network::EpochTrace {
            resistance_snapshot: None,
            ..t.clone()
        })
        .collect();
    let path = out_dir.join("traces.jsonl");
    write_jsonl(&path, &lean)?;
    written.push(path);

    let path = out_dir.join("probes.jsonl");
    write_jsonl(&path, &report.probes)?;
    written.push(path);

    let history = match distribution_history(report) {
        Ok(h) => h,
        Err(SimError::NoSnapshots) => return Ok(written),
        Err(e) => return Err(e.into()),
    };

    let stats: Vec<_> = history
        .iter()
        .map(|s| StatsRecord {
            epoch: s.epoch,
            stats: &s.stats,
        })
        .collect();
    let path = out_dir.join("stats.jsonl");
    write_jsonl(&path, &stats)?;
    written.push(path);

    let rows: Vec<_> = history
        .iter()
        .flat_map(|s| {
            s.histogram.iter().map(move |b| HistogramRow {
                epoch: s.epoch,
                bin_low_ohm: b.low,
                bin_high_ohm: b.high,
                count: b.count,
            })
        })
        .collect();
    let path = out_dir.join("histograms.csv");
    write_table(&path, &rows)?;
    written.push(path);

    let snapshots = std::iter::once((0, report.initial_resistances.as_ref()))
        .chain(
            report
                .traces
                .iter()
                .map(|t| (t.epoch, t.resistance_snapshot.as_ref())),
        )
        .filter_map(|(epoch, m)| m.map(|m| (epoch, m)));
    for ((epoch, matrix), dist) in snapshots.zip(&history) {
        let path = out_dir
            .join("snapshots")
            .join(format!("epoch_{epoch:03}.csv"));
        write_matrix_csv(&path, matrix)?;
        written.push(path);
        let path = out_dir
            .join("snapshots")
            .join(format!("weights_epoch_{:03}.csv", dist.epoch));
        write_matrix_csv(&path, &dist.normalized_weights)?;
        written.push(path);
    }
    Ok(written)
}

/// `probe.json` plus one line per probe step in `probe_steps.jsonl`.
pub fn write_probe_artifacts(out_dir: &Path, probe: &ProbeOutcome) -> ArtifactResult<Vec<PathBuf>> {
    let summary = out_dir.join("probe.json");
    write_json(&summary, probe)?;
    let steps = out_dir.join("probe_steps.jsonl");
    write_jsonl(&steps, &probe.steps)?;
    Ok(vec![summary, steps])
}
