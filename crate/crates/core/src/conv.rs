//! Same-padded 2-D cross-correlation over a (time × channel) grid.
//!
//! The kernel spans both axes and out-of-range inputs read as zero on both
//! axes, so the output has the input's shape. No kernel flip.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const DEFAULT_KERNEL_SIZE: usize = 5;

/// Square `size × size` filter with a scalar bias.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Kernel {
    size: usize,
    /// Row-major taps, index `[a * size + b]` with `a` along time.
    pub taps: Vec<f64>,
    pub bias: f64,
}

impl Kernel {
    pub fn new(size: usize, taps: Vec<f64>, bias: f64) -> Result<Self> {
        check_size(size)?;
        if taps.len() != size * size {
            return Err(Error::Contract(alloc::format!(
                "kernel of size {size} needs {} taps, got {}",
                size * size,
                taps.len()
            )));
        }
        Ok(Self { size, taps, bias })
    }

    pub fn zeros(size: usize) -> Result<Self> {
        Self::new(size, vec![0.0; size * size], 0.0)
    }

    /// Delta at the center tap: a no-op filter.
    pub fn identity(size: usize) -> Result<Self> {
        let mut kernel = Self::zeros(size)?;
        let c = size / 2;
        kernel.taps[c * size + c] = 1.0;
        Ok(kernel)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn tap(&self, a: usize, b: usize) -> f64 {
        self.taps[a * self.size + b]
    }

    #[inline]
    fn half(&self) -> usize {
        self.size / 2
    }
}

fn check_size(size: usize) -> Result<()> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::Config(alloc::format!(
            "kernel size must be odd and positive, got {size}"
        )));
    }
    Ok(())
}

/// Gradients of `Σ grad_out ⊙ conv_same_forward(x, kernel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Grid,
    pub taps: Vec<f64>,
    pub bias: f64,
}

/// Valid range of kernel rows `a` such that `i + a - half` lies in `0..n`.
#[inline]
fn tap_range(i: usize, half: usize, size: usize, n: usize) -> (usize, usize) {
    let lo = half.saturating_sub(i);
    let hi = (n + half - i).min(size);
    (lo, hi)
}

pub fn conv_same_forward(x: &Grid, kernel: &Kernel) -> Result<Grid> {
    check_size(kernel.size)?;
    x.ensure_finite("conv_same_forward input")?;
    let (rows, cols) = x.shape();
    let (k, half) = (kernel.size, kernel.half());
    let src = x.as_slice();
    let mut out = vec![kernel.bias; rows * cols];
    for i in 0..rows {
        let (a_lo, a_hi) = tap_range(i, half, k, rows);
        for j in 0..cols {
            let (b_lo, b_hi) = tap_range(j, half, k, cols);
            let mut acc = 0.0;
            for a in a_lo..a_hi {
                let src_row = (i + a - half) * cols;
                let tap_row = a * k;
                for b in b_lo..b_hi {
                    acc += kernel.taps[tap_row + b] * src[src_row + j + b - half];
                }
            }
            out[i * cols + j] += acc;
        }
    }
    let out = Grid::from_vec(rows, cols, out).map_err(|_| Error::NonFinite("conv_same_forward"))?;
    Ok(out)
}

pub fn conv_same_backward(x: &Grid, kernel: &Kernel, grad_out: &Grid) -> Result<ConvGrads> {
    check_size(kernel.size)?;
    grad_out.ensure_shape("conv_same_backward", x.shape())?;
    let (rows, cols) = x.shape();
    let (k, half) = (kernel.size, kernel.half());
    let src = x.as_slice();
    let g = grad_out.as_slice();
    let mut grad_input = vec![0.0; rows * cols];
    let mut grad_taps = vec![0.0; k * k];
    let mut grad_bias = 0.0;
    for i in 0..rows {
        let (a_lo, a_hi) = tap_range(i, half, k, rows);
        for j in 0..cols {
            let go = g[i * cols + j];
            grad_bias += go;
            if go == 0.0 {
                continue;
            }
            let (b_lo, b_hi) = tap_range(j, half, k, cols);
            for a in a_lo..a_hi {
                let src_row = (i + a - half) * cols;
                for b in b_lo..b_hi {
                    let s = src_row + j + b - half;
                    grad_taps[a * k + b] += go * src[s];
                    grad_input[s] += go * kernel.taps[a * k + b];
                }
            }
        }
    }
    if !grad_bias.is_finite() || grad_taps.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("conv_same_backward"));
    }
    Ok(ConvGrads {
        input: Grid::from_vec(rows, cols, grad_input)
            .map_err(|_| Error::NonFinite("conv_same_backward"))?,
        taps: grad_taps,
        bias: grad_bias,
    })
}

/// Unpadded ("valid") cross-correlation: output is `(rows-k+1) × (cols-k+1)`
/// and never reads outside the input.
pub fn conv_valid_forward(x: &Grid, kernel: &Kernel) -> Result<Grid> {
    check_size(kernel.size)?;
    let (rows, cols) = x.shape();
    let k = kernel.size;
    if rows < k || cols < k {
        return Err(Error::Config(alloc::format!(
            "valid convolution needs at least {k}x{k} input, got {rows}x{cols}"
        )));
    }
    let (out_rows, out_cols) = (rows - k + 1, cols - k + 1);
    Grid::from_fn(out_rows, out_cols, |i, j| {
        let mut acc = kernel.bias;
        for a in 0..k {
            for b in 0..k {
                acc += kernel.tap(a, b) * x.get(i + a, j + b);
            }
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct summation straight from the definition, with explicit bounds checks.
    fn brute_force(x: &Grid, kernel: &Kernel) -> Grid {
        let k = kernel.size() as isize;
        let p = (k - 1) / 2;
        Grid::from_fn(x.rows(), x.cols(), |i, j| {
            let mut acc = kernel.bias;
            for a in 0..k {
                for b in 0..k {
                    let r = i as isize + a - p;
                    let c = j as isize + b - p;
                    if r >= 0 && c >= 0 && (r as usize) < x.rows() && (c as usize) < x.cols() {
                        acc += kernel.tap(a as usize, b as usize) * x.get(r as usize, c as usize);
                    }
                }
            }
            acc
        })
        .unwrap()
    }

    fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Grid {
        Grid::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn random_kernel(rng: &mut ChaCha8Rng, size: usize) -> Kernel {
        let taps = (0..size * size).map(|_| rng.random_range(-1.0..1.0)).collect();
        Kernel::new(size, taps, rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn even_kernel_is_config_error() {
        assert!(matches!(Kernel::zeros(4), Err(Error::Config(_))));
        assert!(matches!(Kernel::zeros(0), Err(Error::Config(_))));
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_grid(&mut rng, 4, 3);
        let out = conv_same_forward(&x, &Kernel::identity(5).unwrap()).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn zero_kernel_emits_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_grid(&mut rng, 6, 2);
        let mut kernel = Kernel::zeros(5).unwrap();
        kernel.bias = 7.0;
        let out = conv_same_forward(&x, &kernel).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn averaging_kernel_matches_hand_sums() {
        let x = Grid::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]).unwrap();
        let kernel = Kernel::new(3, alloc::vec![1.0 / 9.0; 9], 0.0).unwrap();
        let out = conv_same_forward(&x, &kernel).unwrap();
        assert_eq!(out, brute_force(&x, &kernel));
        approx::assert_abs_diff_eq!(out.get(1, 1), 5.0, epsilon = 1e-15);
        approx::assert_abs_diff_eq!(out.get(0, 0), (1.0 + 2.0 + 4.0 + 5.0) / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn forward_matches_brute_force_on_random_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(rows, cols, k) in &[(1, 1, 3), (2, 7, 5), (8, 3, 5), (5, 5, 3), (3, 1, 7)] {
            let x = random_grid(&mut rng, rows, cols);
            let kernel = random_kernel(&mut rng, k);
            let got = conv_same_forward(&x, &kernel).unwrap();
            assert!(got.max_abs_diff(&brute_force(&x, &kernel)).unwrap() < 1e-14);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut x = Grid::zeros(3, 3).unwrap();
        x.as_mut_slice()[4] = f64::INFINITY;
        assert!(matches!(
            conv_same_forward(&x, &Kernel::identity(3).unwrap()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn backward_zero_grad_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_grid(&mut rng, 6, 4);
        let kernel = random_kernel(&mut rng, 3);
        let grads = conv_same_backward(&x, &kernel, &Grid::zeros(6, 4).unwrap()).unwrap();
        assert!(grads.input.as_slice().iter().all(|&v| v == 0.0));
        assert!(grads.taps.iter().all(|&v| v == 0.0));
        assert_eq!(grads.bias, 0.0);
    }

    #[test]
    fn backward_identity_passes_gradient_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_grid(&mut rng, 5, 3);
        let g = random_grid(&mut rng, 5, 3);
        let grads = conv_same_backward(&x, &Kernel::identity(5).unwrap(), &g).unwrap();
        assert_eq!(grads.input, g);
    }

    #[test]
    fn backward_shape_mismatch() {
        let x = Grid::zeros(4, 3).unwrap();
        let g = Grid::zeros(3, 4).unwrap();
        assert!(matches!(
            conv_same_backward(&x, &Kernel::identity(3).unwrap(), &g),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn tap_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_grid(&mut rng, 6, 4);
        let kernel = random_kernel(&mut rng, 3);
        let g = random_grid(&mut rng, 6, 4);
        let grads = conv_same_backward(&x, &kernel, &g).unwrap();
        let h = 1e-6;
        let objective = |kern: &Kernel| brute_force(&x, kern).dot(&g).unwrap();
        for t in 0..9 {
            let mut plus = kernel.clone();
            plus.taps[t] += h;
            let mut minus = kernel.clone();
            minus.taps[t] -= h;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let rel = (grads.taps[t] - numeric).abs() / numeric.abs().max(grads.taps[t].abs());
            assert!(rel < 1e-6, "tap {t}: analytic {} numeric {numeric}", grads.taps[t]);
        }
    }

    #[test]
    fn interior_translation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = 5;
        let base: Vec<f64> = (0..21 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Grid::from_vec(20, 3, base[..60].to_vec()).unwrap();
        let shifted = Grid::from_vec(20, 3, base[3..63].to_vec()).unwrap();
        let kernel = random_kernel(&mut rng, k);
        let y = conv_same_forward(&x, &kernel).unwrap();
        let ys = conv_same_forward(&shifted, &kernel).unwrap();
        // Channel axis is padded too, so only the centre column is border-free.
        let c = 1;
        for i in (k - 1)..(20 - k) {
            assert_eq!(ys.get(i, c), y.get(i + 1, c));
        }
    }

    #[test]
    fn zero_padding_leaves_positional_signature() {
        let x = Grid::filled(12, 7, 2.5).unwrap();
        let taps = (0..25).map(|t| 0.1 + 0.01 * t as f64).collect();
        let kernel = Kernel::new(5, taps, 0.0).unwrap();
        let y = conv_same_forward(&x, &kernel).unwrap();
        let interior = y.get(5, 3);
        for i in 2..10 {
            for j in 2..5 {
                assert!((y.get(i, j) - interior).abs() < 1e-12);
            }
        }
        assert!((y.get(0, 0) - interior).abs() > 1e-6);
        assert!((y.get(11, 3) - interior).abs() > 1e-6);
    }

    #[test]
    fn valid_conv_matches_same_conv_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_grid(&mut rng, 10, 7);
        let kernel = random_kernel(&mut rng, 5);
        let same = conv_same_forward(&x, &kernel).unwrap();
        let valid = conv_valid_forward(&x, &kernel).unwrap();
        assert_eq!(valid.shape(), (6, 3));
        for i in 0..6 {
            for j in 0..3 {
                assert!((valid.get(i, j) - same.get(i + 2, j + 2)).abs() < 1e-14);
            }
        }
        assert!(conv_valid_forward(&Grid::zeros(10, 3).unwrap(), &kernel).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn linear_in_input_when_bias_is_zero(
                seed in any::<u64>(),
                rows in 1usize..12,
                cols in 1usize..8,
                alpha in -3.0f64..3.0,
                beta in -3.0f64..3.0,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = random_grid(&mut rng, rows, cols);
                let y = random_grid(&mut rng, rows, cols);
                let mut kernel = random_kernel(&mut rng, 5);
                kernel.bias = 0.0;
                let combo = x.scale(alpha).unwrap().add(&y.scale(beta).unwrap()).unwrap();
                let lhs = conv_same_forward(&combo, &kernel).unwrap();
                let rhs = conv_same_forward(&x, &kernel).unwrap().scale(alpha).unwrap()
                    .add(&conv_same_forward(&y, &kernel).unwrap().scale(beta).unwrap()).unwrap();
                prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
            }
        }
    }
}
