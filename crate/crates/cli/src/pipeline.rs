//! Data → training → evaluation plumbing shared by the subcommands.

use std::time::Instant;

use arma_core::data::{chronological_split, make_windows, standardize, ScalerStats, SeriesTable, SplitSpec, WindowSet};
use arma_core::metrics::{component_correlations, repeat_last_baseline, ComponentCorrelations, MetricsReport};
use arma_core::model::{decompose_forecast, forward, ArmaParams, Variant};
use arma_core::trainer::{evaluate, train_with_clock, Clock, EpochLog, TrainConfig, TrainError};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Wall-clock time since construction.
#[derive(Debug, Clone, Copy)]
pub struct StdClock(Instant);

impl Default for StdClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for StdClock {
    fn now_secs(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

/// A dataset split chronologically and standardized with train statistics.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scaler: ScalerStats,
    pub train: SeriesTable,
    pub val: SeriesTable,
    pub test: SeriesTable,
    /// First row of each split in the original table.
    pub offsets: [usize; 3],
}

impl Prepared {
    /// Splits `table`; fits the scaler on the train split unless one is given.
    pub fn new(table: &SeriesTable, spec: &SplitSpec, scaler: Option<&ScalerStats>) -> Result<Self> {
        let splits = chronological_split(table, spec)?;
        let scaler = match scaler {
            Some(s) => s.clone(),
            None => ScalerStats::fit(&splits.train)?,
        };
        let offsets = [0, splits.train.rows(), splits.train.rows() + splits.val.rows()];
        Ok(Self {
            train: standardize(&splits.train, &scaler)?,
            val: standardize(&splits.val, &scaler)?,
            test: standardize(&splits.test, &scaler)?,
            scaler,
            offsets,
        })
    }

    pub fn split(&self, which: SplitName) -> (&SeriesTable, usize) {
        match which {
            SplitName::Train => (&self.train, self.offsets[0]),
            SplitName::Val => (&self.val, self.offsets[1]),
            SplitName::Test => (&self.test, self.offsets[2]),
        }
    }

    /// Stride-1 windows over one split; an empty set is a data error.
    pub fn windows(&self, which: SplitName, lookback: usize, horizon: usize) -> Result<WindowSet> {
        let (table, _) = self.split(which);
        let windows = make_windows(table, lookback, horizon, 1)?;
        if let Some(w) = windows.warning() {
            return Err(CliError::Data(format!(
                "{} split has {} rows but a window needs {}",
                which.name(),
                w.rows, w.needed
            )));
        }
        Ok(windows)
    }
}

/// Deterministic summary of one training run (no timings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub dataset: String,
    pub variant: Variant,
    pub seed: u64,
    #[serde(rename = "L")]
    pub lookback: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "C")]
    pub channels: usize,
    pub k: usize,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub val: MetricsReport,
    pub test: MetricsReport,
    pub naive_repeat_last_test: MetricsReport,
    pub component_correlations_test: ComponentCorrelations,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub checkpoint: Checkpoint,
    pub logs: Vec<EpochLog>,
    pub metrics: RunMetrics,
}

/// Failure of [`train_run`]; divergence still carries a usable checkpoint.
#[derive(Debug)]
pub enum RunError {
    Failed(CliError),
    Diverged { epoch: usize, checkpoint: Box<Checkpoint>, logs: Vec<EpochLog> },
}

impl From<CliError> for RunError {
    fn from(e: CliError) -> Self {
        RunError::Failed(e)
    }
}

impl From<arma_core::Error> for RunError {
    fn from(e: arma_core::Error) -> Self {
        RunError::Failed(e.into())
    }
}

fn checkpoint_for(cfg: &RunConfig, tc: &TrainConfig, table: &SeriesTable, scaler: &ScalerStats, params: ArmaParams) -> Checkpoint {
    Checkpoint {
        meta: CheckpointMeta {
            train_config: tc.clone(),
            dataset: cfg.dataset.clone(),
            split: cfg.split_spec(),
            channel_names: table.channel_names.clone(),
            best_epoch: None,
            best_val: None,
        },
        scaler: scaler.clone(),
        params,
    }
}

/// Trains on `table` as configured and evaluates the best parameters on the
/// validation and test splits.
pub fn train_run(cfg: &RunConfig, table: &SeriesTable, clock: &mut dyn Clock) -> std::result::Result<RunOutcome, RunError> {
    cfg.validate()?;
    let tc = cfg.train_config(table.channels());
    let prepared = Prepared::new(table, &cfg.split_spec(), None)?;
    let train_w = prepared.windows(SplitName::Train, cfg.lookback, cfg.horizon)?;
    let val_w = prepared.windows(SplitName::Val, cfg.lookback, cfg.horizon)?;
    let test_w = prepared.windows(SplitName::Test, cfg.lookback, cfg.horizon)?;

    let outcome = match train_with_clock(&tc, &train_w, &val_w, clock) {
        Ok(o) => o,
        Err(TrainError::Core(e)) => return Err(RunError::Failed(e.into())),
        Err(TrainError::Diverged { epoch, last_good, logs }) => {
            let checkpoint = checkpoint_for(cfg, &tc, table, &prepared.scaler, *last_good);
            return Err(RunError::Diverged {
                epoch,
                checkpoint: Box::new(checkpoint),
                logs,
            });
        }
    };
    let val = evaluate(tc.variant, &outcome.params, &val_w)?;
    let test = evaluate(tc.variant, &outcome.params, &test_w)?;
    let metrics = RunMetrics {
        dataset: cfg.dataset.clone(),
        variant: tc.variant,
        seed: tc.seed,
        lookback: tc.lookback,
        horizon: tc.horizon,
        channels: tc.channels,
        k: tc.kernel_size,
        epochs_run: outcome.logs.len(),
        best_epoch: outcome.best_epoch,
        val,
        test,
        naive_repeat_last_test: repeat_last_baseline(&test_w)?,
        component_correlations_test: component_correlations(tc.variant, &outcome.params, &test_w)?,
    };
    let mut checkpoint = checkpoint_for(cfg, &tc, table, &prepared.scaler, outcome.params);
    checkpoint.meta.best_epoch = outcome.best_epoch;
    checkpoint.meta.best_val = outcome.best_val;
    Ok(RunOutcome {
        checkpoint,
        logs: outcome.logs,
        metrics,
    })
}

/// One row of `predictions.csv`, in standardized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    /// Row of the window's first lookback step in the full dataset.
    pub window_origin: usize,
    /// Forecast step, 0-based.
    pub step: usize,
    pub channel: usize,
    pub y_true: f64,
    pub y_pred: f64,
    pub y_ar: f64,
    pub y_ma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub dataset: String,
    pub variant: Variant,
    pub split: SplitName,
    #[serde(rename = "L")]
    pub lookback: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "C")]
    pub channels: usize,
    pub mse: f64,
    pub mae: f64,
    pub windows: usize,
    pub naive_repeat_last: MetricsReport,
    pub component_correlations: ComponentCorrelations,
}

/// Evaluates a checkpoint on one split of `table`, standardized with the
/// checkpoint's own scaler.
pub fn eval_checkpoint(ck: &Checkpoint, dataset: &str, table: &SeriesTable, split: SplitName) -> Result<(EvalMetrics, Vec<PredictionRow>)> {
    let tc = &ck.meta.train_config;
    if table.channels() != tc.channels {
        return Err(CliError::Data(format!(
            "dataset has {} value columns but the checkpoint was trained on {}",
            table.channels(),
            tc.channels
        )));
    }
    let prepared = Prepared::new(table, &ck.meta.split, Some(&ck.scaler))?;
    let windows = prepared.windows(split, tc.lookback, tc.horizon)?;
    let offset = prepared.split(split).1;
    let report = evaluate(tc.variant, &ck.params, &windows)?;
    let mut rows = Vec::with_capacity(windows.len() * tc.horizon * tc.channels);
    for pair in windows.iter() {
        let pair = pair?;
        let (pred, cache) = forward(tc.variant, &pair.x, &ck.params)?;
        let (y_ar, y_ma) = decompose_forecast(&cache, &ck.params)?;
        for step in 0..tc.horizon {
            for channel in 0..tc.channels {
                rows.push(PredictionRow {
                    window_origin: offset + pair.origin_index,
                    step,
                    channel,
                    y_true: pair.y.get(step, channel),
                    y_pred: pred.get(step, channel),
                    y_ar: y_ar.get(step, channel),
                    y_ma: y_ma.get(step, channel),
                });
            }
        }
    }
    let metrics = EvalMetrics {
        dataset: dataset.to_string(),
        variant: tc.variant,
        split,
        lookback: tc.lookback,
        horizon: tc.horizon,
        channels: tc.channels,
        mse: report.mse,
        mae: report.mae,
        windows: report.windows,
        naive_repeat_last: repeat_last_baseline(&windows)?,
        component_correlations: component_correlations(tc.variant, &ck.params, &windows)?,
    };
    Ok((metrics, rows))
}
