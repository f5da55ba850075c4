//! Mini-batch AdamW training with validation-based early stopping.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::conv::DEFAULT_KERNEL_SIZE;
use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::model::{backward, forward, init_params, ArmaParams, ParamGrads, Variant};
use crate::optim::{mse_loss_and_grad, AdamW, OptimConfig};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub kernel_size: usize,
    pub channels: usize,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub variant: Variant,
    pub optim: OptimConfig,
}

impl TrainConfig {
    /// Defaults: k = 5, batch 32, lr 1e-3, at most 100 epochs, patience 10.
    pub fn new(lookback: usize, horizon: usize, channels: usize, seed: u64, variant: Variant) -> Self {
        Self {
            lookback,
            horizon,
            kernel_size: DEFAULT_KERNEL_SIZE,
            channels,
            batch: 32,
            max_epochs: 100,
            patience: 10,
            seed,
            variant,
            optim: OptimConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.patience == 0 || (self.max_epochs > 0 && self.patience > self.max_epochs) {
            return Err(Error::Config(alloc::format!(
                "patience must lie in 1..=max_epochs, got {} with max_epochs {}",
                self.patience,
                self.max_epochs
            )));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Config(alloc::format!(
                "kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.lookback < 2 || self.horizon == 0 || self.channels == 0 {
            return Err(Error::Config("lookback >= 2, horizon >= 1 and channels >= 1 required".into()));
        }
        self.optim.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mse: f64,
    pub val_mae: f64,
    pub wall_time_secs: f64,
}

/// Source of elapsed time for epoch logs. The core crate has no clock, so
/// [`NoClock`] reports zero.
pub trait Clock {
    fn now_secs(&mut self) -> f64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_secs(&mut self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation MSE (the initial ones if no epoch ran).
    pub params: ArmaParams,
    pub logs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_val: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    Core(Error),
    /// Loss or gradient went non-finite; `last_good` is the best checkpoint so far.
    Diverged {
        epoch: usize,
        last_good: Box<ArmaParams>,
        logs: Vec<EpochLog>,
    },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Core(e) => write!(f, "{e}"),
            TrainError::Diverged { epoch, .. } => write!(f, "training diverged during epoch {epoch}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<Error> for TrainError {
    fn from(e: Error) -> Self {
        TrainError::Core(e)
    }
}

/// Mean MSE loss and mean parameter gradient over `indices`, accumulated in
/// index order.
pub fn batch_gradient(variant: Variant, params: &ArmaParams, windows: &WindowSet, indices: &[usize]) -> Result<(f64, ParamGrads)> {
    if indices.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let weight = 1.0 / indices.len() as f64;
    for &idx in indices {
        let pair = windows.get(idx)?;
        let (pred, cache) = forward(variant, &pair.x, params)?;
        let (l, g) = mse_loss_and_grad(&pred, &pair.y)?;
        let pg = backward(&g, &cache, params)?;
        grads.axpy(weight, &pg);
        loss += l;
    }
    Ok((loss * weight, grads))
}

pub fn predict(variant: Variant, params: &ArmaParams, x: &crate::Grid) -> Result<crate::Grid> {
    forward(variant, x, params).map(|(y, _)| y)
}

/// MSE and MAE over every entry of every window's forecast.
pub fn evaluate(variant: Variant, params: &ArmaParams, windows: &WindowSet) -> Result<MetricsReport> {
    if windows.is_empty() {
        return Err(Error::Contract("cannot evaluate on an empty window set".into()));
    }
    let (mut se, mut ae, mut count) = (0.0, 0.0, 0usize);
    for pair in windows.iter() {
        let pair = pair?;
        let pred = predict(variant, params, &pair.x)?;
        for (p, t) in pred.as_slice().iter().zip(pair.y.as_slice()) {
            se += (p - t) * (p - t);
            ae += libm::fabs(p - t);
        }
        count += pred.len();
    }
    Ok(MetricsReport {
        mse: se / count as f64,
        mae: ae / count as f64,
        windows: windows.len(),
    })
}

fn check_windows(config: &TrainConfig, windows: &WindowSet, which: &str) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::Data(alloc::format!("{which} split has no complete windows")));
    }
    if windows.lookback() != config.lookback || windows.horizon() != config.horizon || windows.channels() != config.channels {
        return Err(Error::Config(alloc::format!(
            "{which} windows are {}x{} -> {} but config expects {}x{} -> {}",
            windows.lookback(),
            windows.channels(),
            windows.horizon(),
            config.lookback,
            config.channels,
            config.horizon
        )));
    }
    Ok(())
}

pub fn initial_params(config: &TrainConfig) -> Result<ArmaParams> {
    let mut params = init_params(config.seed, config.lookback, config.horizon, config.kernel_size, config.channels)?;
    if config.variant == Variant::CnnOnly {
        params.zero_ma();
    }
    Ok(params)
}

pub fn train(config: &TrainConfig, train_windows: &WindowSet, val_windows: &WindowSet) -> core::result::Result<TrainOutcome, TrainError> {
    train_with_clock(config, train_windows, val_windows, &mut NoClock)
}

pub fn train_with_clock(
    config: &TrainConfig,
    train_windows: &WindowSet,
    val_windows: &WindowSet,
    clock: &mut dyn Clock,
) -> core::result::Result<TrainOutcome, TrainError> {
    config.validate()?;
    check_windows(config, train_windows, "train")?;
    check_windows(config, val_windows, "validation")?;
    let variant = config.variant;
    let mut params = initial_params(config)?;
    let mut best = params.clone();
    let mut best_val: Option<MetricsReport> = None;
    let mut best_epoch = None;
    let mut logs = Vec::new();
    let mut optimizer = AdamW::new(config.optim, variant, &params)?;
    let mut rng = stream_rng(config.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut stale = 0;

    for epoch in 1..=config.max_epochs {
        let started = clock.now_secs();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch) {
            let diverged = || TrainError::Diverged {
                epoch,
                last_good: Box::new(best.clone()),
                logs: logs.clone(),
            };
            let (loss, grads) = match batch_gradient(variant, &params, train_windows, chunk) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => return Err(diverged()),
                Err(e) => return Err(e.into()),
            };
            if !loss.is_finite() {
                return Err(diverged());
            }
            match optimizer.step(&mut params, &grads) {
                Ok(()) => {}
                Err(Error::NonFinite(_)) => return Err(diverged()),
                Err(e) => return Err(e.into()),
            }
            loss_sum += loss * chunk.len() as f64;
        }
        let val = match evaluate(variant, &params, val_windows) {
            Ok(v) if v.mse.is_finite() => v,
            Ok(_) | Err(Error::NonFinite(_)) => {
                return Err(TrainError::Diverged {
                    epoch,
                    last_good: Box::new(best.clone()),
                    logs,
                })
            }
            Err(e) => return Err(e.into()),
        };
        logs.push(EpochLog {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_mse: val.mse,
            val_mae: val.mae,
            wall_time_secs: clock.now_secs() - started,
        });
        if best_val.is_none_or(|b| val.mse < b.mse) {
            best = params.clone();
            best_val = Some(val);
            best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        params: best,
        logs,
        best_epoch,
        best_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_windows, synth_trend_shift};

    fn windows(seed: u64, rows: usize, l: usize, t: usize) -> WindowSet {
        let table = synth_trend_shift(seed, rows, 2, rows / 2, 0.02).unwrap();
        make_windows(&table, l, t, 1).unwrap()
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let w = windows(1, 40, 8, 4);
        let mut cfg = TrainConfig::new(8, 4, 2, 3, Variant::Arma);
        cfg.max_epochs = 0;
        let out = train(&cfg, &w, &w).unwrap();
        assert!(out.logs.is_empty());
        assert_eq!(out.params, initial_params(&cfg).unwrap());
        assert_eq!(out.best_epoch, None);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::new(8, 4, 2, 3, Variant::Arma);
        cfg.batch = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::new(8, 4, 2, 3, Variant::Arma);
        cfg.max_epochs = 5;
        assert!(cfg.validate().is_err());
        cfg.patience = 5;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn mismatched_windows_rejected() {
        let w = windows(1, 40, 8, 4);
        let cfg = TrainConfig::new(8, 5, 2, 3, Variant::Arma);
        assert!(matches!(train(&cfg, &w, &w), Err(TrainError::Core(Error::Config(_)))));
        let empty = windows(1, 10, 8, 4);
        let cfg = TrainConfig::new(8, 4, 2, 3, Variant::Arma);
        assert!(matches!(train(&cfg, &empty, &w), Err(TrainError::Core(Error::Data(_)))));
    }

    #[test]
    fn cnn_variant_keeps_ma_zero() {
        let w = windows(2, 60, 8, 4);
        let mut cfg = TrainConfig::new(8, 4, 2, 3, Variant::CnnOnly);
        cfg.max_epochs = 3;
        cfg.patience = 3;
        let out = train(&cfg, &w, &w).unwrap();
        assert!(out.params.ma_kernel.taps.iter().all(|&v| v == 0.0));
        assert!(out.params.ma_proj.weights.iter().all(|&v| v == 0.0));
    }

    struct Ticker(f64);

    impl Clock for Ticker {
        fn now_secs(&mut self) -> f64 {
            self.0 += 0.5;
            self.0
        }
    }

    #[test]
    fn clock_feeds_wall_time() {
        let w = windows(3, 50, 8, 4);
        let mut cfg = TrainConfig::new(8, 4, 2, 3, Variant::Arma);
        cfg.max_epochs = 2;
        cfg.patience = 2;
        let out = train_with_clock(&cfg, &w, &w, &mut Ticker(0.0)).unwrap();
        assert!(out.logs.iter().all(|l| l.wall_time_secs == 0.5));
        assert_eq!(out.logs.iter().map(|l| l.epoch).collect::<Vec<_>>(), alloc::vec![1, 2]);
    }
}
