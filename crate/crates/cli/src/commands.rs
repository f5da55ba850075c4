//! Subcommand implementations. Each writes its artifacts and returns the
//! report it wrote, so tests can check files against return values.

use std::path::{Path, PathBuf};

use arma_core::data::{synth_gas_analog_with, synth_trend_shift_with, GasAnalogConfig, SeriesTable, TrendShiftConfig};
use arma_core::model::Variant;
use arma_core::probe::{run_probe, ProbeKind, ProbeReport};
use arma_core::trainer::{Clock, EpochLog};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::{resolve_dataset, RunConfig};
use crate::csv_io::{load_csv, write_csv, write_rows};
use crate::error::{CliError, Result};
use crate::pipeline::{eval_checkpoint, train_run, EvalMetrics, Prepared, RunError, RunMetrics, SplitName};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.json";
pub const EPOCH_LOG_FILE: &str = "epoch_log.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const ABLATION_FILE: &str = "ablation.json";

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types always serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn load_dataset(dataset: &str) -> Result<SeriesTable> {
    load_csv(&resolve_dataset(dataset)?)
}

/// Overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: RunConfig) -> RunConfig {
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg
    }
}

fn write_logs(logs: &[EpochLog], dir: &Path) -> Result<()> {
    write_rows(logs, &dir.join(EPOCH_LOG_FILE))
}

/// Trains one model and writes its checkpoint, epoch log and metrics into
/// `dir`. On divergence the best checkpoint so far is still written.
fn train_into(cfg: &RunConfig, table: &SeriesTable, dir: &Path, clock: &mut dyn Clock) -> Result<RunMetrics> {
    create_dir(dir)?;
    match train_run(cfg, table, clock) {
        Ok(run) => {
            run.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
            write_logs(&run.logs, dir)?;
            write_json(&run.metrics, &dir.join(METRICS_FILE))?;
            Ok(run.metrics)
        }
        Err(RunError::Failed(e)) => Err(e),
        Err(RunError::Diverged { epoch, checkpoint, logs }) => {
            let saved = dir.join(CHECKPOINT_FILE);
            checkpoint.save(&saved)?;
            write_logs(&logs, dir)?;
            Err(CliError::Diverged { epoch, saved })
        }
    }
}

pub fn cmd_train(cfg: &RunConfig, clock: &mut dyn Clock) -> Result<RunMetrics> {
    cfg.validate()?;
    let table = load_dataset(&cfg.dataset)?;
    train_into(cfg, &table, &cfg.out_dir, clock)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Difference {
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub dataset: String,
    pub seed: u64,
    #[serde(rename = "L")]
    pub lookback: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub arma: RunMetrics,
    pub cnn_only: RunMetrics,
    /// `arma - cnn_only` on the test split; negative favours the MA path.
    pub difference: Difference,
}

/// Trains both variants with identical data and seed. Each variant's
/// artifacts go to `<out>/<variant>/`, the paired report to `<out>/ablation.json`.
pub fn cmd_ablate(cfg: &RunConfig, clock: &mut dyn Clock) -> Result<AblationReport> {
    cfg.validate()?;
    let table = load_dataset(&cfg.dataset)?;
    let run = |variant: Variant, clock: &mut dyn Clock| {
        let cfg = RunConfig {
            variant,
            ..cfg.clone()
        };
        train_into(&cfg, &table, &cfg.out_dir.join(variant.name()), clock)
    };
    let arma = run(Variant::Arma, clock)?;
    let cnn_only = run(Variant::CnnOnly, clock)?;
    let report = AblationReport {
        dataset: cfg.dataset.clone(),
        seed: cfg.seed,
        lookback: cfg.lookback,
        horizon: cfg.horizon,
        difference: Difference {
            mse: arma.test.mse - cnn_only.test.mse,
            mae: arma.test.mae - cnn_only.test.mae,
        },
        arma,
        cnn_only,
    };
    write_json(&report, &cfg.out_dir.join(ABLATION_FILE))?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    /// Defaults to the dataset recorded in the checkpoint.
    pub data: Option<PathBuf>,
    pub split: SplitName,
    pub out: PathBuf,
    pub expect_variant: Option<Variant>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalMetrics> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    if let Some(v) = args.expect_variant {
        ck.expect_variant(v)?;
    }
    let (name, table) = match &args.data {
        Some(path) => (path.display().to_string(), load_csv(path)?),
        None => (ck.meta.dataset.clone(), load_dataset(&ck.meta.dataset)?),
    };
    let (metrics, rows) = eval_checkpoint(&ck, &name, &table, args.split)?;
    create_dir(&args.out)?;
    write_json(&metrics, &args.out.join(METRICS_FILE))?;
    write_rows(&rows, &args.out.join(PREDICTIONS_FILE))?;
    Ok(metrics)
}

#[derive(Debug, Clone)]
pub struct ProbeArgs {
    pub checkpoint: PathBuf,
    pub data: Option<PathBuf>,
    /// `None` runs every kind.
    pub kind: Option<ProbeKind>,
    /// Split the readout is evaluated on; it is always fitted on train.
    pub split: SplitName,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn probe_file_name(kind: ProbeKind) -> String {
    format!("probe_{}.json", kind.name())
}

/// Fits the positional readout on frozen features of the train split and
/// writes one `probe_<kind>.json` per kind.
pub fn cmd_probe(args: &ProbeArgs) -> Result<Vec<ProbeReport>> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let table = match &args.data {
        Some(path) => load_csv(path)?,
        None => load_dataset(&ck.meta.dataset)?,
    };
    let tc = &ck.meta.train_config;
    if table.channels() != tc.channels {
        return Err(CliError::Data(format!(
            "dataset has {} value columns but the checkpoint was trained on {}",
            table.channels(),
            tc.channels
        )));
    }
    let prepared = Prepared::new(&table, &ck.meta.split, Some(&ck.scaler))?;
    let fit_w = prepared.windows(SplitName::Train, tc.lookback, tc.horizon)?;
    let eval_w = prepared.windows(args.split, tc.lookback, tc.horizon)?;
    let kinds = match args.kind {
        Some(k) => vec![k],
        None => ProbeKind::ALL.to_vec(),
    };
    create_dir(&args.out)?;
    let mut reports = Vec::new();
    for kind in kinds {
        let report = run_probe(tc.variant, &ck.params, &fit_w, &eval_w, kind, args.seed)?;
        write_json(&report, &args.out.join(probe_file_name(kind)))?;
        reports.push(report);
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    TrendShift,
    GasAnalog,
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub kind: SynthKind,
    pub seed: u64,
    pub n: usize,
    pub channels: usize,
    /// Defaults to `n / 2`.
    pub shift_at: Option<usize>,
    pub magnitude: f64,
    pub out: PathBuf,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<SeriesTable> {
    let table = match args.kind {
        SynthKind::TrendShift => {
            let cfg = TrendShiftConfig::new(args.n, args.channels, args.shift_at.unwrap_or(args.n / 2), args.magnitude);
            synth_trend_shift_with(args.seed, &cfg)?
        }
        SynthKind::GasAnalog => synth_gas_analog_with(args.seed, &GasAnalogConfig::new(args.n))?,
    };
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_csv(&table, &args.out)?;
    Ok(table)
}
