//! The forecasting block and its CNN-only ablation.
//!
//! Forward pass for a window `x` (L × C):
//!
//! ```text
//! x_norm    = revin(x)
//! y_ar_hist = conv(x_norm, ar_kernel)            AR path on the window
//! residual  = x_norm - y_ar_hist
//! y_ma_hist = conv(residual, ma_kernel)          MA path on what AR missed
//! y_norm    = P_ar · y_ar_hist + P_ma · y_ma_hist + out_bias
//! y_out     = revin⁻¹(y_norm)
//! ```
//!
//! `P_ar`/`P_ma` are `T × L` projections shared across channels. The CNN-only
//! variant drops the MA path entirely.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::conv::{conv_same_backward, conv_same_forward, Kernel};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::projection::{time_project_backward, time_project_forward, Projection};
use crate::revin::{
    revin_denormalize, revin_denormalize_backward, revin_normalize, RevInState, DEFAULT_EPS,
};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Variant {
    /// AR and MA paths.
    Arma,
    /// AR path only (MA removed).
    CnnOnly,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Arma => "arma",
            Variant::CnnOnly => "cnn_only",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "arma" => Some(Variant::Arma),
            "cnn_only" => Some(Variant::CnnOnly),
            _ => None,
        }
    }

    /// Whether this variant trains the given parameter group.
    pub fn uses(self, group: ParamGroup) -> bool {
        self == Variant::Arma || !group.is_ma()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named parameter tensors, in a fixed order used by the optimizer and the
/// checkpoint format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    ArTaps,
    ArConvBias,
    MaTaps,
    MaConvBias,
    ArWeights,
    ArStepBias,
    MaWeights,
    MaStepBias,
    OutBias,
    RevinGamma,
    RevinBeta,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 11] = [
        ParamGroup::ArTaps,
        ParamGroup::ArConvBias,
        ParamGroup::MaTaps,
        ParamGroup::MaConvBias,
        ParamGroup::ArWeights,
        ParamGroup::ArStepBias,
        ParamGroup::MaWeights,
        ParamGroup::MaStepBias,
        ParamGroup::OutBias,
        ParamGroup::RevinGamma,
        ParamGroup::RevinBeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::ArTaps => "ar_kernel.taps",
            ParamGroup::ArConvBias => "ar_kernel.bias",
            ParamGroup::MaTaps => "ma_kernel.taps",
            ParamGroup::MaConvBias => "ma_kernel.bias",
            ParamGroup::ArWeights => "ar_proj.weights",
            ParamGroup::ArStepBias => "ar_proj.step_bias",
            ParamGroup::MaWeights => "ma_proj.weights",
            ParamGroup::MaStepBias => "ma_proj.step_bias",
            ParamGroup::OutBias => "out_bias",
            ParamGroup::RevinGamma => "revin.gamma",
            ParamGroup::RevinBeta => "revin.beta",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }

    pub fn is_ma(self) -> bool {
        matches!(
            self,
            ParamGroup::MaTaps | ParamGroup::MaConvBias | ParamGroup::MaWeights | ParamGroup::MaStepBias
        )
    }
}

/// All learnable parameters of the block.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaParams {
    pub ar_kernel: Kernel,
    pub ma_kernel: Kernel,
    pub ar_proj: Projection,
    pub ma_proj: Projection,
    /// One bias per forecast step, shared across channels.
    pub out_bias: Vec<f64>,
    pub revin_gamma: Vec<f64>,
    pub revin_beta: Vec<f64>,
    pub revin_eps: f64,
}

/// Gradients share the parameter layout.
pub type ParamGrads = ArmaParams;

impl ArmaParams {
    pub fn zeros(lookback: usize, horizon: usize, kernel_size: usize, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Config("channel count must be positive".into()));
        }
        if lookback < 2 {
            return Err(Error::Config(alloc::format!(
                "lookback must be at least 2, got {lookback}"
            )));
        }
        Ok(Self {
            ar_kernel: Kernel::zeros(kernel_size)?,
            ma_kernel: Kernel::zeros(kernel_size)?,
            ar_proj: Projection::zeros(horizon, lookback)?,
            ma_proj: Projection::zeros(horizon, lookback)?,
            out_bias: vec![0.0; horizon],
            revin_gamma: vec![1.0; channels],
            revin_beta: vec![0.0; channels],
            revin_eps: DEFAULT_EPS,
        })
    }

    /// Same shapes, every entry zero (including `revin_gamma`).
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for g in ParamGroup::ALL {
            out.group_mut(g).fill(0.0);
        }
        out
    }

    pub fn lookback(&self) -> usize {
        self.ar_proj.lookback()
    }

    pub fn horizon(&self) -> usize {
        self.ar_proj.horizon()
    }

    pub fn kernel_size(&self) -> usize {
        self.ar_kernel.size()
    }

    pub fn channels(&self) -> usize {
        self.revin_gamma.len()
    }

    pub fn group(&self, group: ParamGroup) -> &[f64] {
        match group {
            ParamGroup::ArTaps => &self.ar_kernel.taps,
            ParamGroup::ArConvBias => core::slice::from_ref(&self.ar_kernel.bias),
            ParamGroup::MaTaps => &self.ma_kernel.taps,
            ParamGroup::MaConvBias => core::slice::from_ref(&self.ma_kernel.bias),
            ParamGroup::ArWeights => &self.ar_proj.weights,
            ParamGroup::ArStepBias => &self.ar_proj.step_bias,
            ParamGroup::MaWeights => &self.ma_proj.weights,
            ParamGroup::MaStepBias => &self.ma_proj.step_bias,
            ParamGroup::OutBias => &self.out_bias,
            ParamGroup::RevinGamma => &self.revin_gamma,
            ParamGroup::RevinBeta => &self.revin_beta,
        }
    }

    pub fn group_mut(&mut self, group: ParamGroup) -> &mut [f64] {
        match group {
            ParamGroup::ArTaps => &mut self.ar_kernel.taps,
            ParamGroup::ArConvBias => core::slice::from_mut(&mut self.ar_kernel.bias),
            ParamGroup::MaTaps => &mut self.ma_kernel.taps,
            ParamGroup::MaConvBias => core::slice::from_mut(&mut self.ma_kernel.bias),
            ParamGroup::ArWeights => &mut self.ar_proj.weights,
            ParamGroup::ArStepBias => &mut self.ar_proj.step_bias,
            ParamGroup::MaWeights => &mut self.ma_proj.weights,
            ParamGroup::MaStepBias => &mut self.ma_proj.step_bias,
            ParamGroup::OutBias => &mut self.out_bias,
            ParamGroup::RevinGamma => &mut self.revin_gamma,
            ParamGroup::RevinBeta => &mut self.revin_beta,
        }
    }

    /// Sets every MA-path parameter to zero.
    pub fn zero_ma(&mut self) {
        for g in ParamGroup::ALL.into_iter().filter(|g| g.is_ma()) {
            self.group_mut(g).fill(0.0);
        }
    }

    /// Checks cross-field shape invariants.
    pub fn validate(&self) -> Result<()> {
        if self.ar_kernel.size() != self.ma_kernel.size() {
            return Err(Error::Contract("AR and MA kernels differ in size".into()));
        }
        if self.ar_proj.lookback() != self.ma_proj.lookback() || self.ar_proj.horizon() != self.ma_proj.horizon() {
            return Err(Error::Contract("AR and MA projections differ in shape".into()));
        }
        if self.out_bias.len() != self.horizon() {
            return Err(Error::Contract("output bias length differs from horizon".into()));
        }
        if self.revin_beta.len() != self.channels() || self.channels() == 0 {
            return Err(Error::Contract("revin affine length mismatch".into()));
        }
        if ParamGroup::ALL.iter().any(|&g| self.group(g).iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("parameters"));
        }
        Ok(())
    }

    /// `self += scale * other`, group by group.
    pub fn axpy(&mut self, scale: f64, other: &ArmaParams) {
        for g in ParamGroup::ALL {
            for (a, b) in self.group_mut(g).iter_mut().zip(other.group(g)) {
                *a += scale * b;
            }
        }
    }
}

/// Kernel taps ~ U(-1/k, 1/k), projection weights ~ U(-1/√L, 1/√L), biases 0,
/// identity RevIN affine.
pub fn init_params(seed: u64, lookback: usize, horizon: usize, kernel_size: usize, channels: usize) -> Result<ArmaParams> {
    let mut params = ArmaParams::zeros(lookback, horizon, kernel_size, channels)?;
    let mut rng = stream_rng(seed, Stream::Init);
    let tap_bound = 1.0 / kernel_size as f64;
    let weight_bound = 1.0 / libm::sqrt(lookback as f64);
    for g in [ParamGroup::ArTaps, ParamGroup::MaTaps] {
        for v in params.group_mut(g) {
            *v = rng.random_range(-tap_bound..tap_bound);
        }
    }
    for g in [ParamGroup::ArWeights, ParamGroup::MaWeights] {
        for v in params.group_mut(g) {
            *v = rng.random_range(-weight_bound..weight_bound);
        }
    }
    Ok(params)
}

/// Intermediates of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub variant: Variant,
    /// Standardized window before the RevIN affine.
    pub x_hat: Grid,
    pub x_norm: Grid,
    pub y_ar_hist: Grid,
    pub residual: Grid,
    pub y_ma_hist: Grid,
    pub y_ar_fut: Grid,
    pub y_ma_fut: Grid,
    pub y_norm: Grid,
    pub revin_state: RevInState,
}

fn check_window(x: &Grid, params: &ArmaParams) -> Result<()> {
    x.ensure_shape("forward", (params.lookback(), params.channels()))
}

pub fn forward(variant: Variant, x: &Grid, params: &ArmaParams) -> Result<(Grid, ForwardCache)> {
    check_window(x, params)?;
    let (x_norm, revin_state) = revin_normalize(x, params.revin_eps, &params.revin_gamma, &params.revin_beta)?;
    let x_hat = Grid::from_fn(x.rows(), x.cols(), |i, j| {
        (x.get(i, j) - revin_state.mean[j]) / (revin_state.std[j] + revin_state.eps)
    })?;
    let y_ar_hist = conv_same_forward(&x_norm, &params.ar_kernel)?;
    let residual = x_norm.sub(&y_ar_hist)?;
    let y_ar_fut = time_project_forward(&y_ar_hist, &params.ar_proj)?;
    let (y_ma_hist, y_ma_fut) = match variant {
        Variant::Arma => {
            let hist = conv_same_forward(&residual, &params.ma_kernel)?;
            let fut = time_project_forward(&hist, &params.ma_proj)?;
            (hist, fut)
        }
        Variant::CnnOnly => (
            Grid::zeros(x.rows(), x.cols())?,
            Grid::zeros(params.horizon(), x.cols())?,
        ),
    };
    let mut y_norm = y_ar_fut.add(&y_ma_fut)?;
    let cols = y_norm.cols();
    for (t, row) in y_norm.as_mut_slice().chunks_mut(cols).enumerate() {
        row.iter_mut().for_each(|v| *v += params.out_bias[t]);
    }
    y_norm.ensure_finite("forward")?;
    let y_out = revin_denormalize(&y_norm, &revin_state)?;
    Ok((
        y_out,
        ForwardCache {
            variant,
            x_hat,
            x_norm,
            y_ar_hist,
            residual,
            y_ma_hist,
            y_ar_fut,
            y_ma_fut,
            y_norm,
            revin_state,
        },
    ))
}

pub fn arma_forward(x: &Grid, params: &ArmaParams) -> Result<(Grid, ForwardCache)> {
    forward(Variant::Arma, x, params)
}

/// Forward pass with the MA path removed: `y_norm = P_ar · y_ar_hist + out_bias`.
pub fn cnn_forward(x: &Grid, params: &ArmaParams) -> Result<(Grid, ForwardCache)> {
    forward(Variant::CnnOnly, x, params)
}

/// Gradient of `Σ grad_out ⊙ y_out` with respect to every parameter. MA
/// groups stay zero for the CNN-only variant.
pub fn backward(grad_out: &Grid, cache: &ForwardCache, params: &ArmaParams) -> Result<ParamGrads> {
    let (lookback, horizon, channels) = (params.lookback(), params.horizon(), params.channels());
    if cache.x_norm.shape() != (lookback, channels)
        || cache.y_norm.shape() != (horizon, channels)
        || cache.revin_state.channels() != channels
    {
        return Err(Error::Contract(
            "forward cache does not match parameter shapes".into(),
        ));
    }
    grad_out.ensure_shape("backward", (horizon, channels))?;
    let mut grads = params.zeros_like();

    let denorm = revin_denormalize_backward(&cache.y_norm, &cache.revin_state, grad_out)?;
    let g_norm = denorm.input;
    for (t, row) in g_norm.as_slice().chunks(channels).enumerate() {
        grads.out_bias[t] = row.iter().sum();
    }

    let ar_proj = time_project_backward(&cache.y_ar_hist, &params.ar_proj, &g_norm)?;
    grads.ar_proj.weights = ar_proj.weights;
    grads.ar_proj.step_bias = ar_proj.step_bias;

    // Gradient reaching the residual from the MA path; the residual feeds back
    // into both x_norm (+) and y_ar_hist (-).
    let g_residual = match cache.variant {
        Variant::Arma => {
            let ma_proj = time_project_backward(&cache.y_ma_hist, &params.ma_proj, &g_norm)?;
            grads.ma_proj.weights = ma_proj.weights;
            grads.ma_proj.step_bias = ma_proj.step_bias;
            let ma_conv = conv_same_backward(&cache.residual, &params.ma_kernel, &ma_proj.input)?;
            grads.ma_kernel.taps = ma_conv.taps;
            grads.ma_kernel.bias = ma_conv.bias;
            Some(ma_conv.input)
        }
        Variant::CnnOnly => None,
    };

    let g_ar_hist = match &g_residual {
        Some(g_res) => ar_proj.input.sub(g_res)?,
        None => ar_proj.input,
    };
    let ar_conv = conv_same_backward(&cache.x_norm, &params.ar_kernel, &g_ar_hist)?;
    grads.ar_kernel.taps = ar_conv.taps;
    grads.ar_kernel.bias = ar_conv.bias;
    let mut g_x_norm = ar_conv.input;
    if let Some(g_res) = &g_residual {
        g_x_norm.add_assign(g_res)?;
    }

    for j in 0..channels {
        let mut gamma = denorm.gamma[j];
        let mut beta = denorm.beta[j];
        for i in 0..lookback {
            let g = g_x_norm.get(i, j);
            gamma += g * cache.x_hat.get(i, j);
            beta += g;
        }
        grads.revin_gamma[j] = gamma;
        grads.revin_beta[j] = beta;
    }
    if ParamGroup::ALL.iter().any(|&g| grads.group(g).iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("backward"));
    }
    Ok(grads)
}

pub fn arma_backward(grad_out: &Grid, cache: &ForwardCache, params: &ArmaParams) -> Result<ParamGrads> {
    if cache.variant != Variant::Arma {
        return Err(Error::Contract("cache comes from a CNN-only forward pass".into()));
    }
    backward(grad_out, cache, params)
}

/// Splits a forecast into the AR and MA contributions in output units:
/// the AR part carries the window level and output bias, the MA part is the
/// MA forecast scaled back by the RevIN inverse.
pub fn decompose_forecast(cache: &ForwardCache, params: &ArmaParams) -> Result<(Grid, Grid)> {
    let state = &cache.revin_state;
    let (rows, cols) = cache.y_ar_fut.shape();
    let ar_norm = Grid::from_fn(rows, cols, |t, j| cache.y_ar_fut.get(t, j) + params.out_bias[t])?;
    let y_ar = revin_denormalize(&ar_norm, state)?;
    let y_ma = Grid::from_fn(rows, cols, |t, j| {
        cache.y_ma_fut.get(t, j) * (state.std[j] + state.eps) / state.gamma[j]
    })
    .map_err(|_| Error::NonFinite("decompose_forecast"))?;
    Ok((y_ar, y_ma))
}
