//! Tables, chronological splits, scaling, sliding windows and synthetic series.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::{stream_rng, Stream};

/// A multivariate series: `rows × channels` values plus one opaque timestamp
/// per row. Row order is time order.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub timestamp_header: String,
    pub timestamps: Vec<String>,
    pub channel_names: Vec<String>,
    values: Vec<f64>,
}

impl SeriesTable {
    pub fn new(
        timestamp_header: String,
        timestamps: Vec<String>,
        channel_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let channels = channel_names.len();
        if channels == 0 {
            return Err(Error::Data("table has no value columns".into()));
        }
        if values.len() != timestamps.len() * channels {
            return Err(Error::Data(alloc::format!(
                "{} values do not fill {} rows of {channels} channels",
                values.len(),
                timestamps.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(alloc::format!(
                "non-finite value at row {}, column {}",
                pos / channels,
                pos % channels
            )));
        }
        Ok(Self {
            timestamp_header,
            timestamps,
            channel_names,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, row: usize, channel: usize) -> f64 {
        self.values[row * self.channels() + channel]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.channels();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn column(&self, channel: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(channel).step_by(self.channels()).copied()
    }

    /// Rows `start..end` as a new table.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let c = self.channels();
        Self {
            timestamp_header: self.timestamp_header.clone(),
            timestamps: self.timestamps[start..end].to_vec(),
            channel_names: self.channel_names.clone(),
            values: self.values[start * c..end * c].to_vec(),
        }
    }

    /// Appends `other`'s rows. Channel layout must agree.
    pub fn concat(&self, other: &SeriesTable) -> Result<Self> {
        if other.channel_names != self.channel_names {
            return Err(Error::Data("cannot concatenate tables with different channels".into()));
        }
        let mut out = self.clone();
        out.timestamps.extend_from_slice(&other.timestamps);
        out.values.extend_from_slice(&other.values);
        Ok(out)
    }

    pub fn to_grid(&self) -> Result<Grid> {
        Grid::from_vec(self.rows(), self.channels(), self.values.clone())
    }

    fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let c = self.channels();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % c, v))
            .collect();
        Self {
            timestamp_header: self.timestamp_header.clone(),
            timestamps: self.timestamps.clone(),
            channel_names: self.channel_names.clone(),
            values,
        }
    }
}

/// Chronological train/val/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        if libm::fabs(parts.iter().sum::<f64>() - 1.0) > 1e-9 {
            return Err(Error::Config(alloc::format!(
                "split fractions must sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Row counts: `floor(frac · n)` for train and val, the remainder to test.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        // The small slack keeps exact products like 0.7 * 17420 from flooring down.
        let part = |f: f64| libm::floor(f * n as f64 + 1e-9) as usize;
        let train = part(self.train).min(n);
        let val = part(self.val).min(n - train);
        Ok((train, val, n - train - val))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: SeriesTable,
    pub val: SeriesTable,
    pub test: SeriesTable,
}

pub fn chronological_split(table: &SeriesTable, spec: &SplitSpec) -> Result<Splits> {
    let (train, val, _) = spec.sizes(table.rows())?;
    Ok(Splits {
        train: table.slice(0, train),
        val: table.slice(train, train + val),
        test: table.slice(train + val, table.rows()),
    })
}

/// Per-channel mean and population standard deviation of the training split.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalerStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerStats {
    pub fn fit(train: &SeriesTable) -> Result<Self> {
        let (n, c) = (train.rows(), train.channels());
        if n == 0 {
            return Err(Error::Data("cannot fit scaler on an empty split".into()));
        }
        let mut mean = vec![0.0; c];
        let mut std = vec![0.0; c];
        for j in 0..c {
            mean[j] = train.column(j).sum::<f64>() / n as f64;
            let var = train.column(j).map(|v| (v - mean[j]) * (v - mean[j])).sum::<f64>() / n as f64;
            std[j] = libm::sqrt(var);
            if !(std[j] > 0.0) {
                return Err(Error::Data(alloc::format!(
                    "channel '{}' is constant on the training split",
                    train.channel_names[j]
                )));
            }
        }
        Ok(Self { mean, std })
    }

    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    fn check(&self, table: &SeriesTable) -> Result<()> {
        if self.mean.len() != table.channels() || self.std.len() != table.channels() {
            return Err(Error::Data(alloc::format!(
                "scaler has {} channels, table has {}",
                self.mean.len(),
                table.channels()
            )));
        }
        if self.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Data("scaler has a zero standard deviation".into()));
        }
        Ok(())
    }
}

/// `(v - mean_c) / std_c` per channel.
pub fn standardize(table: &SeriesTable, stats: &ScalerStats) -> Result<SeriesTable> {
    stats.check(table)?;
    Ok(table.map_values(|c, v| (v - stats.mean[c]) / stats.std[c]))
}

pub fn destandardize(table: &SeriesTable, stats: &ScalerStats) -> Result<SeriesTable> {
    stats.check(table)?;
    Ok(table.map_values(|c, v| v * stats.std[c] + stats.mean[c]))
}

/// One supervised example.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    /// Lookback window, `L × C`.
    pub x: Grid,
    /// Target horizon, `T × C`, starting at row `origin_index + L`.
    pub y: Grid,
    /// Row of the window's first step within its split.
    pub origin_index: usize,
}

/// Reported when a split is too short to hold a single window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InsufficientRows {
    pub rows: usize,
    pub needed: usize,
}

/// Lazily materialized sliding windows over one split.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    values: Vec<f64>,
    rows: usize,
    channels: usize,
    lookback: usize,
    horizon: usize,
    stride: usize,
}

pub fn make_windows(split: &SeriesTable, lookback: usize, horizon: usize, stride: usize) -> Result<WindowSet> {
    if lookback == 0 || horizon == 0 || stride == 0 {
        return Err(Error::Config(alloc::format!(
            "lookback, horizon and stride must be positive (got {lookback}, {horizon}, {stride})"
        )));
    }
    Ok(WindowSet {
        values: split.values().to_vec(),
        rows: split.rows(),
        channels: split.channels(),
        lookback,
        horizon,
        stride,
    })
}

impl WindowSet {
    pub fn len(&self) -> usize {
        let span = self.lookback + self.horizon;
        if self.rows < span {
            0
        } else {
            (self.rows - span) / self.stride + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Some` when the split holds fewer than `L + T` rows.
    pub fn warning(&self) -> Option<InsufficientRows> {
        let needed = self.lookback + self.horizon;
        (self.rows < needed).then_some(InsufficientRows {
            rows: self.rows,
            needed,
        })
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, index: usize) -> Result<WindowPair> {
        if index >= self.len() {
            return Err(Error::Contract(alloc::format!(
                "window {index} out of range ({} windows)",
                self.len()
            )));
        }
        let origin = index * self.stride;
        let c = self.channels;
        let x_start = origin * c;
        let y_start = (origin + self.lookback) * c;
        Ok(WindowPair {
            x: Grid::from_vec(self.lookback, c, self.values[x_start..y_start].to_vec())?,
            y: Grid::from_vec(self.horizon, c, self.values[y_start..y_start + self.horizon * c].to_vec())?,
            origin_index: origin,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<WindowPair>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// Piecewise-linear trend generator. Channel `c` has slope
/// `slope · (c + 1)` before `shift_at` and that plus `magnitude` after, with
/// the level continuous at the break.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendShiftConfig {
    pub n: usize,
    pub channels: usize,
    pub shift_at: usize,
    pub magnitude: f64,
    pub slope: f64,
    pub noise_std: f64,
}

impl TrendShiftConfig {
    pub fn new(n: usize, channels: usize, shift_at: usize, magnitude: f64) -> Self {
        Self {
            n,
            channels,
            shift_at,
            magnitude,
            slope: 0.01,
            noise_std: 0.1,
        }
    }

    pub fn slopes(&self, channel: usize) -> (f64, f64) {
        let before = self.slope * (channel as f64 + 1.0);
        (before, before + self.magnitude)
    }
}

fn index_timestamps(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn check_synth_len(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("synthetic series length must be positive".into()));
    }
    Ok(())
}

pub fn synth_trend_shift_with(seed: u64, cfg: &TrendShiftConfig) -> Result<SeriesTable> {
    check_synth_len(cfg.n)?;
    if cfg.channels == 0 {
        return Err(Error::Config("synthetic series needs at least one channel".into()));
    }
    let mut rng = stream_rng(seed, Stream::Synth);
    let mut values = Vec::with_capacity(cfg.n * cfg.channels);
    for t in 0..cfg.n {
        for c in 0..cfg.channels {
            let (before, after) = cfg.slopes(c);
            let level = if t <= cfg.shift_at {
                before * t as f64
            } else {
                before * cfg.shift_at as f64 + after * (t - cfg.shift_at) as f64
            };
            let noise: f64 = rng.sample(StandardNormal);
            values.push(level + cfg.noise_std * noise);
        }
    }
    SeriesTable::new(
        "date".into(),
        index_timestamps(cfg.n),
        (0..cfg.channels).map(|c| alloc::format!("ch{c}")).collect(),
        values,
    )
}

pub fn synth_trend_shift(seed: u64, n: usize, channels: usize, shift_at: usize, magnitude: f64) -> Result<SeriesTable> {
    synth_trend_shift_with(seed, &TrendShiftConfig::new(n, channels, shift_at, magnitude))
}

/// Two-channel input/output series. Channel 0 ("input") is a smooth AR(2)
/// process; channel 1 ("output") is `-gain` times a trailing moving average
/// of the input delayed by `lag` steps, plus a linear drift and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasAnalogConfig {
    pub n: usize,
    pub lag: usize,
    pub smoothing: usize,
    pub gain: f64,
    pub drift: f64,
    pub input_noise_std: f64,
    pub output_noise_std: f64,
}

impl GasAnalogConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            lag: 3,
            smoothing: 4,
            gain: 1.5,
            drift: 0.002,
            input_noise_std: 0.3,
            output_noise_std: 0.1,
        }
    }

    /// Noise-free output for step `t` given the whole input column.
    pub fn response(&self, input: &[f64], t: usize) -> f64 {
        let mut acc = 0.0;
        for s in 0..self.smoothing {
            let idx = t as isize - self.lag as isize - s as isize;
            if idx >= 0 {
                acc += input[idx as usize];
            }
        }
        -self.gain * acc / self.smoothing as f64 + self.drift * t as f64
    }
}

pub fn synth_gas_analog_with(seed: u64, cfg: &GasAnalogConfig) -> Result<SeriesTable> {
    check_synth_len(cfg.n)?;
    if cfg.smoothing == 0 {
        return Err(Error::Config("smoothing window must be positive".into()));
    }
    let mut rng = stream_rng(seed, Stream::Synth);
    let mut input = Vec::with_capacity(cfg.n);
    let (mut u1, mut u2) = (0.0f64, 0.0f64);
    for _ in 0..cfg.n {
        let e: f64 = rng.sample(StandardNormal);
        let u = 1.6 * u1 - 0.7 * u2 + cfg.input_noise_std * e;
        input.push(u);
        u2 = u1;
        u1 = u;
    }
    let mut values = Vec::with_capacity(cfg.n * 2);
    for (t, &u) in input.iter().enumerate() {
        let noise: f64 = StandardNormal.sample(&mut rng);
        values.push(u);
        values.push(cfg.response(&input, t) + cfg.output_noise_std * noise);
    }
    SeriesTable::new(
        "date".into(),
        index_timestamps(cfg.n),
        alloc::vec!["input".into(), "output".into()],
        values,
    )
}

pub fn synth_gas_analog(seed: u64, n: usize) -> Result<SeriesTable> {
    synth_gas_analog_with(seed, &GasAnalogConfig::new(n))
}
