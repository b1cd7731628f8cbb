//! Result bundles: per-step CSV tables plus a TOML sidecar with the config
//! echo, derived parameters, provenance and summary metrics.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::document::{ConfigDocument, LoadedConfig};
use crate::analytic::{self, AnalyticModel, AnalyticalCurve, ModelTag};
use crate::error::{Error, Result};
use crate::harness::{
    self, AveragedSeries, ComparisonReport, ExperimentMode, ExperimentSpec, SummaryMetrics,
    DEFAULT_PROBE_TIMES,
};
use crate::physics::{DerivedStepParameters, RegimeReport};

pub const SERIES_FILE: &str = "series.csv";
pub const CONTROL_FILE: &str = "control.csv";
pub const BUNDLE_FILE: &str = "bundle.toml";
/// Resolved config echo, loadable with `load_config`.
pub const CONFIG_FILE: &str = "config.toml";
pub const CURVES_FILE: &str = "curves.csv";

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column suffixes written for every receiver, in order.
pub const RECEIVER_COLUMNS: [&str; 4] = [
    "sim_mean_molecules",
    "sim_stderr_molecules",
    "analytic_diffusion_molecules",
    "analytic_enzyme_molecules",
];

/// One receiver's columns in a series table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverColumns {
    pub sim_mean: Vec<f64>,
    pub sim_stderr: Vec<f64>,
    pub analytic_diffusion: Vec<f64>,
    pub analytic_enzyme: Vec<f64>,
}

impl ReceiverColumns {
    fn columns(&self) -> [&Vec<f64>; 4] {
        [
            &self.sim_mean,
            &self.sim_stderr,
            &self.analytic_diffusion,
            &self.analytic_enzyme,
        ]
    }
}

/// Averaged simulation counts next to both reference curves, one row per step.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub times: Vec<f64>,
    pub receivers: Vec<ReceiverColumns>,
}

impl SeriesTable {
    pub fn new(series: &AveragedSeries, spec: &ExperimentSpec) -> Result<Self> {
        let [diffusion, enzyme] = reference_curves(spec)?;
        harness::check_grid(&series.times, &diffusion[0].times)?;
        if series.receivers() != diffusion.len() {
            return Err(Error::invalid(
                "series",
                "receiver count differs from the config",
            ));
        }
        let receivers = (0..series.receivers())
            .map(|r| ReceiverColumns {
                sim_mean: series.mean_counts[r].clone(),
                sim_stderr: series.std_error[r].clone(),
                analytic_diffusion: diffusion[r].expected_counts.clone(),
                analytic_enzyme: enzyme[r].expected_counts.clone(),
            })
            .collect();
        Ok(SeriesTable {
            times: series.times.clone(),
            receivers,
        })
    }

    pub fn header(&self) -> Vec<String> {
        let mut header = vec!["step".to_string(), "time_s".to_string()];
        for r in 0..self.receivers.len() {
            header.extend(RECEIVER_COLUMNS.iter().map(|c| format!("rx{r}_{c}")));
        }
        header
    }

    pub fn curve(&self, receiver: usize, model: ModelTag) -> Result<AnalyticalCurve> {
        let rx = self.receivers.get(receiver).ok_or_else(|| {
            Error::invalid("receiver", format!("no receiver {receiver} in table"))
        })?;
        let expected_counts = match model {
            ModelTag::DiffusionOnly => rx.analytic_diffusion.clone(),
            ModelTag::EnzymeLowerBound => rx.analytic_enzyme.clone(),
            ModelTag::Intermediate => {
                return Err(Error::invalid(
                    "model",
                    "series tables carry no intermediate column",
                ))
            }
        };
        Ok(AnalyticalCurve {
            times: self.times.clone(),
            expected_counts,
            model,
        })
    }

    /// Simulation column against one of the stored reference columns.
    pub fn compare(&self, receiver: usize, model: ModelTag) -> Result<ComparisonReport> {
        let curve = self.curve(receiver, model)?;
        let rx = &self.receivers[receiver];
        harness::compare_columns(receiver, &self.times, &rx.sim_mean, &rx.sim_stderr, &curve)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        writer
            .write_record(self.header())
            .map_err(|e| csv_error(path, e))?;
        for (k, &t) in self.times.iter().enumerate() {
            let mut row = vec![(k + 1).to_string(), fmt(t)];
            for rx in &self.receivers {
                row.extend(rx.columns().iter().map(|c| fmt(c[k])));
            }
            writer.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::SeriesFormat {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < 2 || !(header.len() - 2).is_multiple_of(RECEIVER_COLUMNS.len()) {
            return Err(bad(format!("unexpected column count {}", header.len())));
        }
        let n_rx = (header.len() - 2) / RECEIVER_COLUMNS.len();
        let mut table = SeriesTable {
            times: Vec::new(),
            receivers: vec![
                ReceiverColumns {
                    sim_mean: Vec::new(),
                    sim_stderr: Vec::new(),
                    analytic_diffusion: Vec::new(),
                    analytic_enzyme: Vec::new(),
                };
                n_rx
            ],
        };
        if table.header() != header {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let step: u64 = record[0]
                .parse()
                .map_err(|_| bad(format!("row {}: bad step `{}`", line + 1, &record[0])))?;
            if step != line as u64 + 1 {
                return Err(bad(format!(
                    "row {}: step {step} out of sequence",
                    line + 1
                )));
            }
            let values = record
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", line + 1)))?;
            table.times.push(values[0]);
            for (r, rx) in table.receivers.iter_mut().enumerate() {
                let base = 1 + r * RECEIVER_COLUMNS.len();
                rx.sim_mean.push(values[base]);
                rx.sim_stderr.push(values[base + 1]);
                rx.analytic_diffusion.push(values[base + 2]);
                rx.analytic_enzyme.push(values[base + 3]);
            }
        }
        Ok(table)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::SeriesFormat {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

/// Diffusion-only and enzyme lower-bound curves for every receiver.
pub fn reference_curves(spec: &ExperimentSpec) -> Result<[Vec<AnalyticalCurve>; 2]> {
    let config = spec.engine_config();
    let release = config.release()?;
    let bound = AnalyticModel::lower_bound(config.rates.k1, &config.enzyme_field());
    let times = spec.times();
    let sample = |model: &AnalyticModel| -> Result<Vec<AnalyticalCurve>> {
        config
            .receivers
            .iter()
            .map(|rx| analytic::sample_curve(&release, model, rx, &times))
            .collect()
    };
    Ok([sample(&AnalyticModel::DiffusionOnly)?, sample(&bound)?])
}

/// Writes every configured analytical curve as `step,time_s,rx{i}_{model}_molecules`.
pub fn write_curves(path: &Path, times: &[f64], curves: &[(usize, AnalyticalCurve)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["step".to_string(), "time_s".to_string()];
    header.extend(
        curves
            .iter()
            .map(|(r, c)| format!("rx{r}_{}_molecules", c.model.as_str())),
    );
    writer
        .write_record(&header)
        .map_err(|e| csv_error(path, e))?;
    for (k, &t) in times.iter().enumerate() {
        let mut row = vec![(k + 1).to_string(), fmt(t)];
        row.extend(curves.iter().map(|(_, c)| fmt(c.expected_counts[k])));
        writer.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub trials: u64,
    pub mode: ExperimentMode,
    pub engine_version: String,
}

/// Contents of the TOML sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub provenance: Provenance,
    pub derived: DerivedStepParameters,
    pub regime: RegimeReport,
    pub config: ConfigDocument,
    pub summary: SummaryMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub meta: BundleMeta,
    pub series: SeriesTable,
    pub control: Option<SeriesTable>,
}

impl ResultBundle {
    /// Assemble a bundle from finished runs of `loaded`.
    pub fn new(
        loaded: &LoadedConfig,
        series: &AveragedSeries,
        control: Option<&AveragedSeries>,
    ) -> Result<Self> {
        let spec = &loaded.spec;
        let mut summary = SummaryMetrics::default();
        summary.entries.extend(harness::summarize_series(
            "simulation",
            series,
            &DEFAULT_PROBE_TIMES,
        )?);
        if let Some(control) = control {
            summary.entries.extend(harness::summarize_series(
                "control",
                control,
                &DEFAULT_PROBE_TIMES,
            )?);
        }
        for (r, curve) in spec.analytical_curves()? {
            summary
                .entries
                .push(harness::summarize_curve(r, &curve, &DEFAULT_PROBE_TIMES)?);
        }
        let mut config = loaded.document.clone();
        config.experiment.trials = spec.trial_count;
        config.experiment.seed = spec.base_seed;
        config.experiment.workers = spec.workers;
        Ok(ResultBundle {
            meta: BundleMeta {
                provenance: Provenance {
                    seed: spec.base_seed,
                    trials: series.trial_count,
                    mode: spec.mode,
                    engine_version: ENGINE_VERSION.to_string(),
                },
                derived: loaded.derived,
                regime: loaded.regime,
                config,
                summary,
            },
            series: SeriesTable::new(series, spec)?,
            control: control.map(|c| SeriesTable::new(c, spec)).transpose()?,
        })
    }

    /// Writes the bundle into `dir`, creating it if needed. Returns the files written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let series = dir.join(SERIES_FILE);
        self.series.write(&series)?;
        written.push(series);
        let control = dir.join(CONTROL_FILE);
        if let Some(table) = &self.control {
            table.write(&control)?;
            written.push(control);
        } else if control.exists() {
            fs::remove_file(&control).map_err(|e| Error::io(&control, e))?;
        }
        let config = dir.join(CONFIG_FILE);
        fs::write(&config, self.meta.config.to_toml()).map_err(|e| Error::io(&config, e))?;
        written.push(config);
        let meta = dir.join(BUNDLE_FILE);
        let text = toml::to_string(&self.meta).map_err(|e| Error::Parse {
            path: meta.display().to_string(),
            message: e.to_string(),
        })?;
        fs::write(&meta, text).map_err(|e| Error::io(&meta, e))?;
        written.push(meta);
        Ok(written)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(BUNDLE_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: BundleMeta = toml::from_str(&text).map_err(|e| Error::Parse {
            path: meta_path.display().to_string(),
            message: e.to_string(),
        })?;
        let series = SeriesTable::read(&dir.join(SERIES_FILE))?;
        let control_path = dir.join(CONTROL_FILE);
        let control = if control_path.exists() {
            Some(SeriesTable::read(&control_path)?)
        } else {
            None
        };
        Ok(ResultBundle {
            meta,
            series,
            control,
        })
    }
}

/// Runs `loaded` (plus its control arm when enabled) and bundles the result.
pub fn run_bundle(loaded: &LoadedConfig) -> Result<ResultBundle> {
    let series = harness::run_experiment(&loaded.spec)?;
    let control = if loaded.spec.control_arm {
        Some(harness::run_control(&loaded.spec)?)
    } else {
        None
    };
    ResultBundle::new(loaded, &series, control.as_ref())
}
