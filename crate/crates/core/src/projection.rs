//! Per-channel linear map from the lookback axis onto the forecast horizon.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `horizon × lookback` weight matrix plus one bias per forecast step. The
/// same map is applied independently to every channel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Projection {
    horizon: usize,
    lookback: usize,
    /// Row-major, `[t * lookback + i]`.
    pub weights: Vec<f64>,
    pub step_bias: Vec<f64>,
}

impl Projection {
    pub fn new(horizon: usize, lookback: usize, weights: Vec<f64>, step_bias: Vec<f64>) -> Result<Self> {
        if horizon == 0 || lookback == 0 {
            return Err(Error::Config(alloc::format!(
                "projection needs positive horizon and lookback, got {horizon}x{lookback}"
            )));
        }
        if weights.len() != horizon * lookback || step_bias.len() != horizon {
            return Err(Error::Contract(alloc::format!(
                "projection {horizon}x{lookback} got {} weights and {} biases",
                weights.len(),
                step_bias.len()
            )));
        }
        Ok(Self {
            horizon,
            lookback,
            weights,
            step_bias,
        })
    }

    pub fn zeros(horizon: usize, lookback: usize) -> Result<Self> {
        Self::new(
            horizon,
            lookback,
            vec![0.0; horizon * lookback],
            vec![0.0; horizon],
        )
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn lookback(&self) -> usize {
        self.lookback
    }

    #[inline]
    pub fn weight(&self, t: usize, i: usize) -> f64 {
        self.weights[t * self.lookback + i]
    }

    fn check_input(&self, op: &'static str, h: &Grid) -> Result<()> {
        if h.rows() != self.lookback {
            return Err(Error::Shape {
                op,
                expected: (self.lookback, h.cols()),
                found: h.shape(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrads {
    pub input: Grid,
    pub weights: Vec<f64>,
    pub step_bias: Vec<f64>,
}

/// `out[t, j] = step_bias[t] + Σ_i weights[t, i] · h[i, j]`.
pub fn time_project_forward(h: &Grid, proj: &Projection) -> Result<Grid> {
    proj.check_input("time_project_forward", h)?;
    let cols = h.cols();
    let src = h.as_slice();
    let mut out = vec![0.0; proj.horizon * cols];
    for t in 0..proj.horizon {
        let row = &mut out[t * cols..(t + 1) * cols];
        row.fill(proj.step_bias[t]);
        let w_row = &proj.weights[t * proj.lookback..(t + 1) * proj.lookback];
        for (i, &w) in w_row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let h_row = &src[i * cols..(i + 1) * cols];
            for (o, &v) in row.iter_mut().zip(h_row) {
                *o += w * v;
            }
        }
    }
    Grid::from_vec(proj.horizon, cols, out).map_err(|_| Error::NonFinite("time_project_forward"))
}

pub fn time_project_backward(h: &Grid, proj: &Projection, grad_out: &Grid) -> Result<ProjectionGrads> {
    proj.check_input("time_project_backward", h)?;
    grad_out.ensure_shape("time_project_backward", (proj.horizon, h.cols()))?;
    let cols = h.cols();
    let src = h.as_slice();
    let g = grad_out.as_slice();
    let mut grad_input = vec![0.0; proj.lookback * cols];
    let mut grad_weights = vec![0.0; proj.horizon * proj.lookback];
    let mut grad_bias = vec![0.0; proj.horizon];
    for t in 0..proj.horizon {
        let g_row = &g[t * cols..(t + 1) * cols];
        grad_bias[t] = g_row.iter().sum();
        for i in 0..proj.lookback {
            let h_row = &src[i * cols..(i + 1) * cols];
            grad_weights[t * proj.lookback + i] = g_row.iter().zip(h_row).map(|(a, b)| a * b).sum();
            let w = proj.weights[t * proj.lookback + i];
            let gi = &mut grad_input[i * cols..(i + 1) * cols];
            for (o, &gv) in gi.iter_mut().zip(g_row) {
                *o += w * gv;
            }
        }
    }
    if grad_weights.iter().chain(&grad_bias).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("time_project_backward"));
    }
    Ok(ProjectionGrads {
        input: Grid::from_vec(proj.lookback, cols, grad_input)
            .map_err(|_| Error::NonFinite("time_project_backward"))?,
        weights: grad_weights,
        step_bias: grad_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> Projection {
        let mut p = Projection::zeros(n, n).unwrap();
        for i in 0..n {
            p.weights[i * n + i] = 1.0;
        }
        p
    }

    fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Grid {
        Grid::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn identity_weights_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_grid(&mut rng, 6, 3);
        assert_eq!(time_project_forward(&h, &identity(6)).unwrap(), h);
    }

    #[test]
    fn zero_weights_emit_step_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_grid(&mut rng, 5, 4);
        let mut p = Projection::zeros(3, 5).unwrap();
        p.step_bias = alloc::vec![1.0, -2.0, 0.5];
        let out = time_project_forward(&h, &p).unwrap();
        for j in 0..4 {
            assert_eq!(out.column(j).collect::<Vec<_>>(), p.step_bias);
        }
    }

    #[test]
    fn selection_matrix_picks_rows() {
        let (a, b, c) = (0.3, -1.7, 4.2);
        let h = Grid::from_rows(&[[a], [b], [c]]).unwrap();
        let p = Projection::new(2, 3, alloc::vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0], alloc::vec![0.0; 2]).unwrap();
        let out = time_project_forward(&h, &p).unwrap();
        assert_eq!(out.as_slice(), &[a, c]);
    }

    #[test]
    fn lookback_mismatch_is_error() {
        let h = Grid::zeros(4, 2).unwrap();
        let p = Projection::zeros(2, 5).unwrap();
        assert!(matches!(time_project_forward(&h, &p), Err(Error::Shape { .. })));
        let g = Grid::zeros(2, 2).unwrap();
        assert!(time_project_backward(&h, &p, &g).is_err());
    }

    #[test]
    fn backward_zero_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_grid(&mut rng, 4, 2);
        let zero = time_project_backward(&h, &identity(4), &Grid::zeros(4, 2).unwrap()).unwrap();
        assert!(zero.input.as_slice().iter().all(|&v| v == 0.0));
        assert!(zero.weights.iter().chain(&zero.step_bias).all(|&v| v == 0.0));

        let g = random_grid(&mut rng, 4, 2);
        let grads = time_project_backward(&h, &identity(4), &g).unwrap();
        assert_eq!(grads.input, g);
    }

    #[test]
    fn all_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (l, c, t) = (8, 3, 5);
        let h = random_grid(&mut rng, l, c);
        let g = random_grid(&mut rng, t, c);
        let p = Projection::new(
            t,
            l,
            (0..t * l).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..t).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        // Independent forward: explicit triple loop.
        let objective = |h: &Grid, p: &Projection| {
            let mut acc = 0.0;
            for tt in 0..t {
                for j in 0..c {
                    let mut v = p.step_bias[tt];
                    for i in 0..l {
                        v += p.weights[tt * l + i] * h.get(i, j);
                    }
                    acc += g.get(tt, j) * v;
                }
            }
            acc
        };
        let grads = time_project_backward(&h, &p, &g).unwrap();
        let step = 1e-6;
        let check = |analytic: f64, numeric: f64| {
            let scale = analytic.abs().max(numeric.abs()).max(1e-12);
            assert!((analytic - numeric).abs() / scale < 1e-6, "{analytic} vs {numeric}");
        };
        for idx in 0..t * l {
            let (mut hi, mut lo) = (p.clone(), p.clone());
            hi.weights[idx] += step;
            lo.weights[idx] -= step;
            check(grads.weights[idx], (objective(&h, &hi) - objective(&h, &lo)) / (2.0 * step));
        }
        for idx in 0..t {
            let (mut hi, mut lo) = (p.clone(), p.clone());
            hi.step_bias[idx] += step;
            lo.step_bias[idx] -= step;
            check(grads.step_bias[idx], (objective(&h, &hi) - objective(&h, &lo)) / (2.0 * step));
        }
        for idx in 0..l * c {
            let (mut hi, mut lo) = (h.clone(), h.clone());
            hi.as_mut_slice()[idx] += step;
            lo.as_mut_slice()[idx] -= step;
            check(grads.input.as_slice()[idx], (objective(&hi, &p) - objective(&lo, &p)) / (2.0 * step));
        }
    }
}
