//! Losses and the AdamW update.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{ArmaParams, ParamGrads, ParamGroup, Variant};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(alloc::format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(alloc::format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("eps must be positive and weight_decay non-negative".into()));
        }
        Ok(())
    }
}

/// Mean squared error and its gradient `2 (pred - target) / n`.
pub fn mse_loss_and_grad(pred: &Grid, target: &Grid) -> Result<(f64, Grid)> {
    target.ensure_shape("mse_loss_and_grad", pred.shape())?;
    let n = pred.len() as f64;
    let diff = pred.sub(target)?;
    let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.scale(2.0 / n)?;
    Ok((loss, grad))
}

pub fn mse(pred: &Grid, target: &Grid) -> Result<f64> {
    target.ensure_shape("mse", pred.shape())?;
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

pub fn mae(pred: &Grid, target: &Grid) -> Result<f64> {
    target.ensure_shape("mae", pred.shape())?;
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| libm::fabs(p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Moment accumulators for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamWState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

fn check_step_inputs(param: &[f64], grad: &[f64], state: &AdamWState) -> Result<()> {
    if param.len() != grad.len() || param.len() != state.m.len() || param.len() != state.v.len() {
        return Err(Error::Shape {
            op: "adamw_step",
            expected: (param.len(), 1),
            found: (grad.len(), state.m.len()),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("adamw_step gradient"));
    }
    Ok(())
}

fn apply_step(param: &mut [f64], grad: &[f64], state: &mut AdamWState, config: &OptimConfig) {
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - libm::pow(config.beta1, t);
    let bc2 = 1.0 - libm::pow(config.beta2, t);
    for (((theta, &g), m), v) in param.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *theta -= config.lr * (m_hat / (libm::sqrt(v_hat) + config.eps) + config.weight_decay * *theta);
    }
}

/// One decoupled-weight-decay Adam update of a single tensor. A non-finite
/// gradient leaves both `param` and `state` untouched.
pub fn adamw_step(param: &mut [f64], grad: &[f64], state: &mut AdamWState, config: &OptimConfig) -> Result<()> {
    check_step_inputs(param, grad, state)?;
    apply_step(param, grad, state, config);
    Ok(())
}

/// AdamW over the parameter groups a variant trains.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: OptimConfig,
    variant: Variant,
    states: Vec<(ParamGroup, AdamWState)>,
}

impl AdamW {
    pub fn new(config: OptimConfig, variant: Variant, params: &ArmaParams) -> Result<Self> {
        config.validate()?;
        let states = ParamGroup::ALL
            .into_iter()
            .filter(|&g| variant.uses(g))
            .map(|g| (g, AdamWState::new(params.group(g).len())))
            .collect();
        Ok(Self {
            config,
            variant,
            states,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn steps(&self) -> u64 {
        self.states.first().map_or(0, |(_, s)| s.step)
    }

    /// Updates every trained group. All gradients are validated before any
    /// parameter changes.
    pub fn step(&mut self, params: &mut ArmaParams, grads: &ParamGrads) -> Result<()> {
        for (group, state) in &self.states {
            check_step_inputs(params.group(*group), grads.group(*group), state)?;
        }
        for (group, state) in &mut self.states {
            apply_step(params.group_mut(*group), grads.group(*group), state, &self.config);
        }
        Ok(())
    }
}
