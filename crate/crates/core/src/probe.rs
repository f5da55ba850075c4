//! Positional-information probe.
//!
//! Features are the frozen block's convolution outputs for a window. A
//! linear readout, fitted in closed form by ridge regression, maps the
//! flattened features to every position of a fixed positional target grid.
//! The control evaluates the same readout after permuting the time axis of
//! the features.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use rand::seq::SliceRandom;

use crate::conv::conv_same_forward;
use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{ArmaParams, Variant};
use crate::revin::revin_normalize;
use crate::rng::{stream_rng, Stream};

pub const DEFAULT_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProbeKind {
    LinearIndex,
    Gradation,
    Sinusoid,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 3] = [ProbeKind::LinearIndex, ProbeKind::Gradation, ProbeKind::Sinusoid];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::LinearIndex => "linear_index",
            ProbeKind::Gradation => "gradation",
            ProbeKind::Sinusoid => "sinusoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTarget {
    pub kind: ProbeKind,
    pub grid: Grid,
}

/// Positional target over an `L × C` window:
/// - linear index: `i / (L-1)`
/// - gradation: `(i / (L-1) + j / (C-1)) / 2`, needs `C >= 2`
/// - sinusoid: `sin(2π i / L)`, one period per window
pub fn gen_target(kind: ProbeKind, lookback: usize, channels: usize) -> Result<ProbeTarget> {
    if lookback < 2 || channels == 0 {
        return Err(Error::Config(alloc::format!(
            "probe targets need L >= 2 and C >= 1, got {lookback}x{channels}"
        )));
    }
    if kind == ProbeKind::Gradation && channels < 2 {
        return Err(Error::Config("gradation target needs at least two channels".into()));
    }
    let last_row = (lookback - 1) as f64;
    let grid = match kind {
        ProbeKind::LinearIndex => Grid::from_fn(lookback, channels, |i, _| i as f64 / last_row)?,
        ProbeKind::Gradation => {
            let last_col = (channels - 1) as f64;
            Grid::from_fn(lookback, channels, |i, j| (i as f64 / last_row + j as f64 / last_col) / 2.0)?
        }
        ProbeKind::Sinusoid => Grid::from_fn(lookback, channels, |i, _| {
            libm::sin(2.0 * PI * i as f64 / lookback as f64)
        })?,
    };
    Ok(ProbeTarget { kind, grid })
}

/// Convolution outputs of the frozen block for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    pub ar: Grid,
    pub ma: Grid,
}

impl FeatureMaps {
    /// AR map then MA map, each row-major.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.ar.len() + self.ma.len());
        out.extend_from_slice(self.ar.as_slice());
        out.extend_from_slice(self.ma.as_slice());
        out
    }

    /// Row `i` of each map becomes row `perm[i]` of the source.
    pub fn permute_time(&self, perm: &[usize]) -> Result<Self> {
        let permute = |g: &Grid| -> Result<Grid> {
            if perm.len() != g.rows() {
                return Err(Error::Contract("permutation length differs from map rows".into()));
            }
            Grid::from_fn(g.rows(), g.cols(), |i, j| g.get(perm[i], j))
        };
        Ok(Self {
            ar: permute(&self.ar)?,
            ma: permute(&self.ma)?,
        })
    }
}

/// `y_ar_hist` and `y_ma_hist` for one window. Projections and the RevIN
/// inverse are not involved; `frozen` is only read.
pub fn extract_features(variant: Variant, frozen: &ArmaParams, x: &Grid) -> Result<FeatureMaps> {
    x.ensure_shape("extract_features", (frozen.lookback(), frozen.channels()))?;
    let (x_norm, _) = revin_normalize(x, frozen.revin_eps, &frozen.revin_gamma, &frozen.revin_beta)?;
    let ar = conv_same_forward(&x_norm, &frozen.ar_kernel)?;
    let ma = match variant {
        Variant::Arma => conv_same_forward(&x_norm.sub(&ar)?, &frozen.ma_kernel)?,
        Variant::CnnOnly => Grid::zeros(x.rows(), x.cols())?,
    };
    Ok(FeatureMaps { ar, ma })
}

/// Comparison features without time-axis padding: the AR map restricted to
/// the centre rows whose receptive field never reaches past either end of
/// the window. Rows touching the zero padding are cropped; the channel axis
/// is kept whole because the positional targets vary along time.
pub fn extract_features_unpadded(frozen: &ArmaParams, x: &Grid) -> Result<Grid> {
    let (x_norm, _) = revin_normalize(x, frozen.revin_eps, &frozen.revin_gamma, &frozen.revin_beta)?;
    let half = frozen.kernel_size() / 2;
    if x.rows() <= 2 * half {
        return Err(Error::Config(alloc::format!(
            "window of {} steps has no rows clear of a size-{} kernel's padding",
            x.rows(),
            frozen.kernel_size()
        )));
    }
    conv_same_forward(&x_norm, &frozen.ar_kernel)?.slice_rows(half, x.rows() - 2 * half)
}

/// Linear readout: for each output position `p`,
/// `pred[p] = weights[p] · features + bias[p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PemParams {
    pub rows: usize,
    pub cols: usize,
    pub feature_dim: usize,
    /// `(rows·cols) × feature_dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl PemParams {
    pub fn outputs(&self) -> usize {
        self.rows * self.cols
    }

    pub fn predict(&self, features: &[f64]) -> Result<Grid> {
        if features.len() != self.feature_dim {
            return Err(Error::Shape {
                op: "PemParams::predict",
                expected: (self.feature_dim, 1),
                found: (features.len(), 1),
            });
        }
        let data = self
            .weights
            .chunks(self.feature_dim)
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(features).map(|(a, f)| a * f).sum::<f64>())
            .collect();
        Grid::from_vec(self.rows, self.cols, data).map_err(|_| Error::NonFinite("PemParams::predict"))
    }

    pub fn weight_norm(&self) -> f64 {
        libm::sqrt(self.weights.iter().chain(&self.bias).map(|w| w * w).sum())
    }
}

/// In-place Cholesky factorization of a symmetric positive definite `n × n`
/// matrix (lower triangle), then solves for each of `nrhs` right-hand-side
/// columns stored row-major as `n × nrhs`.
pub fn cholesky_solve(matrix: &mut [f64], n: usize, rhs: &mut [f64], nrhs: usize) -> Result<()> {
    if matrix.len() != n * n || rhs.len() != n * nrhs {
        return Err(Error::Contract("cholesky_solve dimension mismatch".into()));
    }
    for j in 0..n {
        let mut d = matrix[j * n + j];
        for k in 0..j {
            d -= matrix[j * n + k] * matrix[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::Contract(alloc::format!(
                "normal matrix is not positive definite at pivot {j}"
            )));
        }
        let d = libm::sqrt(d);
        matrix[j * n + j] = d;
        for i in j + 1..n {
            let mut s = matrix[i * n + j];
            for k in 0..j {
                s -= matrix[i * n + k] * matrix[j * n + k];
            }
            matrix[i * n + j] = s / d;
        }
    }
    for c in 0..nrhs {
        // L y = b
        for i in 0..n {
            let mut s = rhs[i * nrhs + c];
            for k in 0..i {
                s -= matrix[i * n + k] * rhs[k * nrhs + c];
            }
            rhs[i * nrhs + c] = s / matrix[i * n + i];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = rhs[i * nrhs + c];
            for k in i + 1..n {
                s -= matrix[k * n + i] * rhs[k * nrhs + c];
            }
            rhs[i * nrhs + c] = s / matrix[i * n + i];
        }
    }
    Ok(())
}

/// `AᵀA + ridge·I` for the design matrix `A = [features | 1]`.
fn normal_matrix(features: &[Vec<f64>], ridge: f64) -> Result<(Vec<f64>, usize)> {
    let f = features.first().map(Vec::len).ok_or_else(|| Error::Contract("no probe windows".into()))?;
    if features.iter().any(|v| v.len() != f) {
        return Err(Error::Contract("feature vectors differ in length".into()));
    }
    if !(ridge > 0.0) {
        return Err(Error::Config("ridge term must be positive".into()));
    }
    let n = f + 1;
    let mut gram = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for feat in features {
        row[..f].copy_from_slice(feat);
        row[f] = 1.0;
        for i in 0..n {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            let dst = &mut gram[i * n..i * n + i + 1];
            for (g, &rk) in dst.iter_mut().zip(&row[..=i]) {
                *g += ri * rk;
            }
        }
    }
    for i in 0..n {
        gram[i * n + i] += ridge;
        for k in 0..i {
            gram[k * n + i] = gram[i * n + k];
        }
    }
    Ok((gram, n))
}

fn unpack(solution: &[f64], n: usize, outputs: usize, rows: usize, cols: usize) -> PemParams {
    let f = n - 1;
    let mut weights = vec![0.0; outputs * f];
    let mut bias = vec![0.0; outputs];
    for p in 0..outputs {
        for k in 0..f {
            weights[p * f + k] = solution[k * outputs + p];
        }
        bias[p] = solution[f * outputs + p];
    }
    PemParams {
        rows,
        cols,
        feature_dim: f,
        weights,
        bias,
    }
}

/// Ridge fit with a separate target grid per window (`targets[w]` is the
/// flattened `rows × cols` target of window `w`).
pub fn fit_pem_multi(features: &[Vec<f64>], targets: &[Vec<f64>], rows: usize, cols: usize, ridge: f64) -> Result<PemParams> {
    if features.len() != targets.len() {
        return Err(Error::Contract("one target per feature vector required".into()));
    }
    let outputs = rows * cols;
    if targets.iter().any(|t| t.len() != outputs) {
        return Err(Error::Contract("target grid size mismatch".into()));
    }
    let (mut gram, n) = normal_matrix(features, ridge)?;
    let f = n - 1;
    let mut rhs = vec![0.0; n * outputs];
    for (feat, target) in features.iter().zip(targets) {
        for k in 0..=f {
            let a = if k < f { feat[k] } else { 1.0 };
            if a == 0.0 {
                continue;
            }
            for (r, t) in rhs[k * outputs..(k + 1) * outputs].iter_mut().zip(target) {
                *r += a * t;
            }
        }
    }
    cholesky_solve(&mut gram, n, &mut rhs, outputs)?;
    Ok(unpack(&rhs, n, outputs, rows, cols))
}

/// Ridge fit of every target position on the flattened features. The target
/// is the same for every window, so all positions share one solve:
/// `weights[p] = target[p] · (AᵀA + λI)⁻¹ Aᵀ1`.
pub fn fit_pem(features: &[Vec<f64>], target: &ProbeTarget, ridge: f64) -> Result<PemParams> {
    let (mut gram, n) = normal_matrix(features, ridge)?;
    let f = n - 1;
    let mut z = vec![0.0; n];
    for feat in features {
        for (zk, a) in z[..f].iter_mut().zip(feat) {
            *zk += a;
        }
        z[f] += 1.0;
    }
    cholesky_solve(&mut gram, n, &mut z, 1)?;
    let t = target.grid.as_slice();
    let outputs = t.len();
    let mut weights = vec![0.0; outputs * f];
    let mut bias = vec![0.0; outputs];
    for (p, &tp) in t.iter().enumerate() {
        for (w, zk) in weights[p * f..(p + 1) * f].iter_mut().zip(&z[..f]) {
            *w = tp * zk;
        }
        bias[p] = tp * z[f];
    }
    Ok(PemParams {
        rows: target.grid.rows(),
        cols: target.grid.cols(),
        feature_dim: f,
        weights,
        bias,
    })
}

/// Mean absolute error over every window and position.
pub fn eval_pem(pem: &PemParams, features: &[Vec<f64>], target: &ProbeTarget) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::Contract("no probe windows to evaluate".into()));
    }
    target.grid.ensure_shape("eval_pem", (pem.rows, pem.cols))?;
    let mut total = 0.0;
    for feat in features {
        let pred = pem.predict(feat)?;
        total += pred
            .as_slice()
            .iter()
            .zip(target.grid.as_slice())
            .map(|(p, t)| libm::fabs(p - t))
            .sum::<f64>();
    }
    Ok(total / (features.len() * pem.outputs()) as f64)
}

/// A seeded random permutation of `0..len` from the probe-control stream.
pub fn control_permutation(seed: u64, len: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut stream_rng(seed, Stream::ProbeControl));
    perm
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeReport {
    pub kind: ProbeKind,
    pub mae: f64,
    pub control_mae: f64,
    #[cfg_attr(feature = "serde", serde(rename = "L"))]
    pub lookback: usize,
    #[cfg_attr(feature = "serde", serde(rename = "C"))]
    pub channels: usize,
}

fn collect_features(variant: Variant, frozen: &ArmaParams, windows: &WindowSet) -> Result<Vec<FeatureMaps>> {
    windows
        .iter()
        .map(|pair| extract_features(variant, frozen, &pair?.x))
        .collect()
}

/// Fits the readout on `train` windows and reports its MAE on `test`
/// windows, plus the MAE after permuting the features' time axis.
pub fn run_probe(
    variant: Variant,
    frozen: &ArmaParams,
    train: &WindowSet,
    test: &WindowSet,
    kind: ProbeKind,
    seed: u64,
) -> Result<ProbeReport> {
    let (lookback, channels) = (frozen.lookback(), frozen.channels());
    let target = gen_target(kind, lookback, channels)?;
    let train_feats: Vec<Vec<f64>> = collect_features(variant, frozen, train)?.iter().map(FeatureMaps::flatten).collect();
    let test_maps = collect_features(variant, frozen, test)?;
    let pem = fit_pem(&train_feats, &target, DEFAULT_RIDGE)?;
    let test_feats: Vec<Vec<f64>> = test_maps.iter().map(FeatureMaps::flatten).collect();
    let mae = eval_pem(&pem, &test_feats, &target)?;
    let perm = control_permutation(seed, lookback);
    let control: Vec<Vec<f64>> = test_maps
        .iter()
        .map(|m| m.permute_time(&perm).map(|p| p.flatten()))
        .collect::<Result<_>>()?;
    let control_mae = eval_pem(&pem, &control, &target)?;
    Ok(ProbeReport {
        kind,
        mae,
        control_mae,
        lookback,
        channels,
    })
}

/// Probe MAE using padded vs unpadded AR features only, for the
/// padding-attribution comparison. Returns `(padded, unpadded)`.
pub fn padding_comparison(frozen: &ArmaParams, train: &WindowSet, test: &WindowSet, kind: ProbeKind) -> Result<(f64, f64)> {
    let target = gen_target(kind, frozen.lookback(), frozen.channels())?;
    let padded = |w: &WindowSet| -> Result<Vec<Vec<f64>>> {
        w.iter()
            .map(|p| extract_features(Variant::CnnOnly, frozen, &p?.x).map(|m| m.ar.into_vec()))
            .collect()
    };
    let unpadded = |w: &WindowSet| -> Result<Vec<Vec<f64>>> {
        w.iter()
            .map(|p| extract_features_unpadded(frozen, &p?.x).map(Grid::into_vec))
            .collect()
    };
    let pem = fit_pem(&padded(train)?, &target, DEFAULT_RIDGE)?;
    let padded_mae = eval_pem(&pem, &padded(test)?, &target)?;
    let pem_u = fit_pem(&unpadded(train)?, &target, DEFAULT_RIDGE)?;
    let unpadded_mae = eval_pem(&pem_u, &unpadded(test)?, &target)?;
    Ok((padded_mae, unpadded_mae))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{arma_forward, init_params};
    use crate::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn target_shapes_and_corners() {
        let lin = gen_target(ProbeKind::LinearIndex, 96, 7).unwrap();
        assert!(lin.grid.row(0).iter().all(|&v| v == 0.0));
        assert!(lin.grid.row(95).iter().all(|&v| v == 1.0));
        let sin = gen_target(ProbeKind::Sinusoid, 96, 7).unwrap();
        assert!(sin.grid.row(0).iter().all(|&v| v == 0.0));
        assert!(sin.grid.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
        let grad = gen_target(ProbeKind::Gradation, 96, 7).unwrap();
        assert_eq!(grad.grid.get(95, 6), 1.0);
        assert_eq!(grad.grid.get(0, 0), 0.0);
        assert!(grad.grid.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(gen_target(ProbeKind::Gradation, 96, 1).is_err());
        assert_eq!(gen_target(ProbeKind::Sinusoid, 10, 3).unwrap(), gen_target(ProbeKind::Sinusoid, 10, 3).unwrap());
    }

    fn random_window(rng: &mut ChaCha8Rng, l: usize, c: usize) -> Grid {
        Grid::from_fn(l, c, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn features_match_forward_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = init_params(3, 12, 4, 5, 3).unwrap();
        let x = random_window(&mut rng, 12, 3);
        let maps = extract_features(Variant::Arma, &params, &x).unwrap();
        let (_, cache) = arma_forward(&x, &params).unwrap();
        assert_eq!(maps.ar, cache.y_ar_hist);
        assert_eq!(maps.ma, cache.y_ma_hist);
    }

    #[test]
    fn zero_and_identity_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_window(&mut rng, 10, 2);
        let mut params = ArmaParams::zeros(10, 2, 3, 2).unwrap();
        let maps = extract_features(Variant::Arma, &params, &x).unwrap();
        assert!(maps.flatten().iter().all(|&v| v == 0.0));
        params.ar_kernel = Kernel::identity(3).unwrap();
        let maps = extract_features(Variant::Arma, &params, &x).unwrap();
        let (_, cache) = arma_forward(&x, &params).unwrap();
        assert_eq!(maps.ar, cache.x_norm);
    }

    #[test]
    fn zero_target_gives_negligible_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let feats: Vec<Vec<f64>> = (0..40).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let target = ProbeTarget {
            kind: ProbeKind::LinearIndex,
            grid: Grid::zeros(2, 2).unwrap(),
        };
        let pem = fit_pem(&feats, &target, DEFAULT_RIDGE).unwrap();
        assert!(pem.weight_norm() < 1e-3);
    }

    #[test]
    fn realizable_target_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let feats: Vec<Vec<f64>> = (0..60).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        // Position p copies feature coordinate (p + 3) % 8.
        let targets: Vec<Vec<f64>> = feats.iter().map(|f| (0..6).map(|p| f[(p + 3) % 8]).collect()).collect();
        let pem = fit_pem_multi(&feats, &targets, 3, 2, DEFAULT_RIDGE).unwrap();
        let mut err = 0.0;
        for (f, t) in feats.iter().zip(&targets) {
            let pred = pem.predict(f).unwrap();
            err += pred.as_slice().iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>();
        }
        assert!(err / (60.0 * 6.0) < 1e-6);
    }

    /// Dense normal equations solved by Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn gauss_oracle(features: &[Vec<f64>], y: &[f64], ridge: f64) -> Vec<f64> {
        let n = features[0].len() + 1;
        let mut a = vec![vec![0.0; n + 1]; n];
        for (f, &t) in features.iter().zip(y) {
            let row: Vec<f64> = f.iter().copied().chain(core::iter::once(1.0)).collect();
            for i in 0..n {
                for k in 0..n {
                    a[i][k] += row[i] * row[k];
                }
                a[i][n] += row[i] * t;
            }
        }
        for i in 0..n {
            a[i][i] += ridge;
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap()).unwrap();
            a.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let factor = a[r][col] / a[col][col];
                    for k in col..=n {
                        a[r][k] -= factor * a[col][k];
                    }
                }
            }
        }
        (0..n).map(|i| a[i][n] / a[i][i]).collect()
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn ridge_matches_normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let feats: Vec<Vec<f64>> = (0..25).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = feats.iter().map(|f| 0.3 * f[0] - 1.2 * f[2] + 0.5 + rng.random_range(-0.1..0.1)).collect();
        let targets: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
        let pem = fit_pem_multi(&feats, &targets, 1, 1, 0.1).unwrap();
        let oracle = gauss_oracle(&feats, &y, 0.1);
        for k in 0..4 {
            assert!((pem.weights[k] - oracle[k]).abs() < 1e-10);
        }
        assert!((pem.bias[0] - oracle[4]).abs() < 1e-10);
    }

    #[test]
    fn shared_solve_equals_multi_target_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let feats: Vec<Vec<f64>> = (0..30).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let target = gen_target(ProbeKind::Gradation, 3, 2).unwrap();
        let fixed = fit_pem(&feats, &target, 1e-3).unwrap();
        let multi = fit_pem_multi(&feats, &vec![target.grid.as_slice().to_vec(); 30], 3, 2, 1e-3).unwrap();
        for (a, b) in fixed.weights.iter().chain(&fixed.bias).zip(multi.weights.iter().chain(&multi.bias)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_readout_has_zero_error() {
        let target = gen_target(ProbeKind::LinearIndex, 4, 2).unwrap();
        let pem = PemParams {
            rows: 4,
            cols: 2,
            feature_dim: 3,
            weights: vec![0.0; 8 * 3],
            bias: target.grid.as_slice().to_vec(),
        };
        assert_eq!(eval_pem(&pem, &[vec![1.0, 2.0, 3.0]], &target).unwrap(), 0.0);
    }

    #[test]
    fn permutation_is_seeded() {
        let p = control_permutation(9, 20);
        assert_eq!(p, control_permutation(9, 20));
        let mut sorted = p.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
        let maps = FeatureMaps {
            ar: Grid::from_fn(3, 1, |i, _| i as f64).unwrap(),
            ma: Grid::from_fn(3, 1, |i, _| 10.0 * i as f64).unwrap(),
        };
        let permuted = maps.permute_time(&[2, 0, 1]).unwrap();
        assert_eq!(permuted.ar.as_slice(), &[2.0, 0.0, 1.0]);
        assert_eq!(permuted.ma.as_slice(), &[20.0, 0.0, 10.0]);
    }

    #[test]
    fn frozen_params_unchanged_by_probe() {
        let table = crate::data::synth_trend_shift(1, 120, 3, 60, 0.05).unwrap();
        let windows = crate::data::make_windows(&table, 16, 4, 1).unwrap();
        let params = init_params(2, 16, 4, 5, 3).unwrap();
        let before = params.clone();
        let report = run_probe(Variant::Arma, &params, &windows, &windows, ProbeKind::LinearIndex, 1).unwrap();
        assert_eq!(params, before);
        assert!(report.mae.is_finite() && report.control_mae.is_finite());
        assert_eq!((report.lookback, report.channels), (16, 3));
    }
}
