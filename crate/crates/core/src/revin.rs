//! Reversible instance normalization.
//!
//! Each window is standardized per channel with its own mean and (population)
//! standard deviation, then passed through a learnable per-channel affine map.
//! Forecasts are mapped back with the inverse of both steps.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct RevInState {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub eps: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl RevInState {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    #[inline]
    fn denom(&self, j: usize) -> f64 {
        self.std[j] + self.eps
    }
}

fn check_affine(cols: usize, gamma: &[f64], beta: &[f64]) -> Result<()> {
    if gamma.len() != cols || beta.len() != cols {
        return Err(Error::Shape {
            op: "revin affine",
            expected: (1, cols),
            found: (gamma.len(), beta.len()),
        });
    }
    Ok(())
}

/// Per-channel mean and population standard deviation over the time axis.
pub fn channel_stats(x: &Grid) -> (Vec<f64>, Vec<f64>) {
    let (rows, cols) = x.shape();
    let n = rows as f64;
    let mut mean = vec![0.0; cols];
    for i in 0..rows {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; cols];
    for i in 0..rows {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| libm::sqrt(s / n)).collect();
    (mean, std)
}

pub fn revin_normalize(x: &Grid, eps: f64, gamma: &[f64], beta: &[f64]) -> Result<(Grid, RevInState)> {
    let (rows, cols) = x.shape();
    if rows < 2 {
        return Err(Error::Contract(alloc::format!(
            "instance normalization needs at least 2 time steps, got {rows}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Config(alloc::format!("revin eps must be positive, got {eps}")));
    }
    check_affine(cols, gamma, beta)?;
    x.ensure_finite("revin_normalize input")?;
    let (mean, std) = channel_stats(x);
    let state = RevInState {
        mean,
        std,
        eps,
        gamma: gamma.to_vec(),
        beta: beta.to_vec(),
    };
    let out = Grid::from_fn(rows, cols, |i, j| {
        state.gamma[j] * (x.get(i, j) - state.mean[j]) / state.denom(j) + state.beta[j]
    })
    .map_err(|_| Error::NonFinite("revin_normalize"))?;
    Ok((out, state))
}

pub fn revin_denormalize(y: &Grid, state: &RevInState) -> Result<Grid> {
    if y.cols() != state.channels() {
        return Err(Error::Shape {
            op: "revin_denormalize",
            expected: (y.rows(), state.channels()),
            found: y.shape(),
        });
    }
    Grid::from_fn(y.rows(), y.cols(), |i, j| {
        (y.get(i, j) - state.beta[j]) / state.gamma[j] * state.denom(j) + state.mean[j]
    })
    .map_err(|_| Error::NonFinite("revin_denormalize"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevInGrads {
    /// Gradient w.r.t. the raw window (or, for denormalization, the normalized forecast).
    pub input: Grid,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Backward pass of [`revin_normalize`], including the dependence of the
/// window statistics on `x`.
pub fn revin_normalize_backward(x: &Grid, state: &RevInState, grad_out: &Grid) -> Result<RevInGrads> {
    grad_out.ensure_shape("revin_normalize_backward", x.shape())?;
    let (rows, cols) = x.shape();
    if state.channels() != cols {
        return Err(Error::Contract("revin state does not match window channels".into()));
    }
    let n = rows as f64;
    let mut grad_gamma = vec![0.0; cols];
    let mut grad_beta = vec![0.0; cols];
    let mut grad_x = Grid::zeros(rows, cols)?;
    for j in 0..cols {
        let d = state.denom(j);
        let (mu, sigma) = (state.mean[j], state.std[j]);
        let mut sum_g = 0.0;
        let mut sum_g_centered = 0.0;
        for i in 0..rows {
            let go = grad_out.get(i, j);
            let centered = x.get(i, j) - mu;
            grad_gamma[j] += go * centered / d;
            grad_beta[j] += go;
            sum_g += go;
            sum_g_centered += go * centered;
        }
        let gamma = state.gamma[j];
        let mean_g = gamma * sum_g / n;
        let var_term = if sigma > 0.0 {
            gamma * sum_g_centered / (d * d * n * sigma)
        } else {
            0.0
        };
        for i in 0..rows {
            let centered = x.get(i, j) - mu;
            let v = (gamma * grad_out.get(i, j) - mean_g) / d - var_term * centered;
            grad_x.set(i, j, v);
        }
    }
    grad_x.ensure_finite("revin_normalize_backward")?;
    Ok(RevInGrads {
        input: grad_x,
        gamma: grad_gamma,
        beta: grad_beta,
    })
}

/// Backward pass of [`revin_denormalize`] with the window statistics held fixed.
pub fn revin_denormalize_backward(y_norm: &Grid, state: &RevInState, grad_out: &Grid) -> Result<RevInGrads> {
    grad_out.ensure_shape("revin_denormalize_backward", y_norm.shape())?;
    let (rows, cols) = y_norm.shape();
    if state.channels() != cols {
        return Err(Error::Contract("revin state does not match forecast channels".into()));
    }
    let mut grad_gamma = vec![0.0; cols];
    let mut grad_beta = vec![0.0; cols];
    let mut grad_in = Grid::zeros(rows, cols)?;
    for j in 0..cols {
        let scale = state.denom(j) / state.gamma[j];
        for i in 0..rows {
            let go = grad_out.get(i, j);
            grad_in.set(i, j, go * scale);
            grad_beta[j] -= go * scale;
            grad_gamma[j] -= go * (y_norm.get(i, j) - state.beta[j]) * scale / state.gamma[j];
        }
    }
    grad_in.ensure_finite("revin_denormalize_backward")?;
    if grad_gamma.iter().chain(&grad_beta).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("revin_denormalize_backward"));
    }
    Ok(RevInGrads {
        input: grad_in,
        gamma: grad_gamma,
        beta: grad_beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64, offset: f64) -> Grid {
        Grid::from_fn(rows, cols, |_, j| offset * (j as f64 + 1.0) + scale * rng.random_range(-1.0..1.0)).unwrap()
    }

    fn identity_affine(c: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![1.0; c], vec![0.0; c])
    }

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let mut x = Grid::from_fn(10, 2, |i, _| i as f64).unwrap();
        for i in 0..10 {
            x.set(i, 1, 3.25);
        }
        let (g, b) = identity_affine(2);
        let (xn, state) = revin_normalize(&x, DEFAULT_EPS, &g, &b).unwrap();
        assert_eq!(state.std[1], 0.0);
        assert!(xn.column(1).all(|v| v == 0.0));
    }

    #[test]
    fn standardized_input_is_scaled_by_eps_factor() {
        // Alternating ±1 has mean 0 and population std exactly 1.
        let x = Grid::from_fn(8, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 }).unwrap();
        let (g, b) = identity_affine(1);
        let (xn, _) = revin_normalize(&x, DEFAULT_EPS, &g, &b).unwrap();
        for i in 0..8 {
            assert!((xn.get(i, 0) - x.get(i, 0) / (1.0 + DEFAULT_EPS)).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_moments_match_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_grid(&mut rng, 96, 7, 3.0, 10.0);
        let (g, b) = identity_affine(7);
        let (xn, _) = revin_normalize(&x, DEFAULT_EPS, &g, &b).unwrap();
        for j in 0..7 {
            let col: Vec<f64> = x.column(j).collect();
            let m = col.iter().sum::<f64>() / 96.0;
            let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 96.0).sqrt();
            let ncol: Vec<f64> = xn.column(j).collect();
            let nm = ncol.iter().sum::<f64>() / 96.0;
            let ns = (ncol.iter().map(|v| (v - nm) * (v - nm)).sum::<f64>() / 96.0).sqrt();
            assert!(nm.abs() < 1e-12);
            assert!((ns - s / (s + DEFAULT_EPS)).abs() < 1e-12);
        }
    }

    #[test]
    fn short_window_rejected() {
        let x = Grid::zeros(1, 3).unwrap();
        let (g, b) = identity_affine(3);
        assert!(matches!(revin_normalize(&x, DEFAULT_EPS, &g, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn round_trip_identity_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_grid(&mut rng, 50, 4, 20.0, 100.0);
        let (g, b) = identity_affine(4);
        let (xn, state) = revin_normalize(&x, DEFAULT_EPS, &g, &b).unwrap();
        let back = revin_denormalize(&xn, &state).unwrap();
        assert!(back.max_abs_diff(&x).unwrap() < 1e-9);
    }

    #[test]
    fn zero_forecast_denormalizes_to_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_grid(&mut rng, 20, 3, 1.0, 5.0);
        let (g, b) = identity_affine(3);
        let (_, state) = revin_normalize(&x, DEFAULT_EPS, &g, &b).unwrap();
        let y = revin_denormalize(&Grid::zeros(4, 3).unwrap(), &state).unwrap();
        for i in 0..4 {
            assert_eq!(y.row(i), state.mean.as_slice());
        }
    }

    #[test]
    fn denormalize_matches_inverse_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let state = RevInState {
            mean: (0..3).map(|_| rng.random_range(-5.0..5.0)).collect(),
            std: (0..3).map(|_| rng.random_range(0.1..4.0)).collect(),
            eps: DEFAULT_EPS,
            gamma: (0..3).map(|_| rng.random_range(0.5..2.0)).collect(),
            beta: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let y = random_grid(&mut rng, 5, 3, 2.0, 0.0);
        let out = revin_denormalize(&y, &state).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                // Solve gamma * (v - mean) / (std + eps) + beta = y for v.
                let v = state.mean[j] + (y.get(i, j) - state.beta[j]) * (state.std[j] + state.eps) / state.gamma[j];
                assert!((out.get(i, j) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_count_mismatch() {
        let x = Grid::from_fn(4, 2, |i, j| (i + j) as f64).unwrap();
        let (g, b) = identity_affine(2);
        let (_, state) = revin_normalize(&x, DEFAULT_EPS, &g, &b).unwrap();
        assert!(matches!(revin_denormalize(&Grid::zeros(3, 3).unwrap(), &state), Err(Error::Shape { .. })));
        assert!(revin_normalize(&x, DEFAULT_EPS, &g[..1], &b).is_err());
    }

    fn numeric(f: impl Fn(f64) -> f64, h: f64) -> f64 {
        (f(h) - f(-h)) / (2.0 * h)
    }

    fn assert_close(a: f64, n: f64) {
        let mag = a.abs().max(n.abs());
        if mag < 1.0 {
            assert!((a - n).abs() < 1e-7, "analytic {a} numeric {n}");
        } else {
            assert!((a - n).abs() / mag < 1e-4, "analytic {a} numeric {n}");
        }
    }

    #[test]
    fn normalize_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = random_grid(&mut rng, 12, 3, 2.0, 1.0);
        let gamma: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..1.5)).collect();
        let beta: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
        let g = random_grid(&mut rng, 12, 3, 1.0, 0.0);
        let obj = |x: &Grid, gamma: &[f64], beta: &[f64]| {
            revin_normalize(x, DEFAULT_EPS, gamma, beta).unwrap().0.dot(&g).unwrap()
        };
        let (_, state) = revin_normalize(&x, DEFAULT_EPS, &gamma, &beta).unwrap();
        let grads = revin_normalize_backward(&x, &state, &g).unwrap();
        let h = 1e-5;
        for idx in 0..x.len() {
            let n = numeric(
                |d| {
                    let mut xp = x.clone();
                    xp.as_mut_slice()[idx] += d;
                    obj(&xp, &gamma, &beta)
                },
                h,
            );
            assert_close(grads.input.as_slice()[idx], n);
        }
        for j in 0..3 {
            let ng = numeric(
                |d| {
                    let mut gp = gamma.clone();
                    gp[j] += d;
                    obj(&x, &gp, &beta)
                },
                h,
            );
            assert_close(grads.gamma[j], ng);
            let nb = numeric(
                |d| {
                    let mut bp = beta.clone();
                    bp[j] += d;
                    obj(&x, &gamma, &bp)
                },
                h,
            );
            assert_close(grads.beta[j], nb);
        }
    }

    #[test]
    fn denormalize_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let x = random_grid(&mut rng, 10, 2, 3.0, 2.0);
        let gamma: Vec<f64> = (0..2).map(|_| rng.random_range(0.5..1.5)).collect();
        let beta: Vec<f64> = (0..2).map(|_| rng.random_range(-0.5..0.5)).collect();
        let (_, state) = revin_normalize(&x, DEFAULT_EPS, &gamma, &beta).unwrap();
        let y = random_grid(&mut rng, 4, 2, 1.0, 0.0);
        let g = random_grid(&mut rng, 4, 2, 1.0, 0.0);
        let obj = |y: &Grid, s: &RevInState| revin_denormalize(y, s).unwrap().dot(&g).unwrap();
        let grads = revin_denormalize_backward(&y, &state, &g).unwrap();
        let h = 1e-5;
        for idx in 0..y.len() {
            let n = numeric(
                |d| {
                    let mut yp = y.clone();
                    yp.as_mut_slice()[idx] += d;
                    obj(&yp, &state)
                },
                h,
            );
            assert_close(grads.input.as_slice()[idx], n);
        }
        for j in 0..2 {
            let ng = numeric(
                |d| {
                    let mut s = state.clone();
                    s.gamma[j] += d;
                    obj(&y, &s)
                },
                h,
            );
            assert_close(grads.gamma[j], ng);
            let nb = numeric(
                |d| {
                    let mut s = state.clone();
                    s.beta[j] += d;
                    obj(&y, &s)
                },
                h,
            );
            assert_close(grads.beta[j], nb);
        }
    }
}
