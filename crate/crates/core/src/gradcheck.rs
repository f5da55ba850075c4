//! Central-difference gradient checking.
//!
//! Only the scalar objective is evaluated here; nothing from the backward
//! passes is reused, so a match is independent evidence.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::{conv_same_backward, conv_same_forward, Kernel};
use crate::error::Result;
use crate::grid::Grid;
use crate::model::{backward, forward, init_params, ArmaParams, ParamGroup, Variant};
use crate::projection::{time_project_backward, time_project_forward, Projection};
use crate::revin::{revin_denormalize, revin_denormalize_backward, revin_normalize, revin_normalize_backward, RevInState, DEFAULT_EPS};

/// Acceptance rule for one partial derivative: relative error below `rel`,
/// or absolute error below `abs` when both values have magnitude below one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub const STANDARD: Tolerance = Tolerance { rel: 1e-4, abs: 1e-7 };

    pub fn accepts(&self, analytic: f64, numeric: f64) -> bool {
        let mag = libm::fmax(libm::fabs(analytic), libm::fabs(numeric));
        let err = libm::fabs(analytic - numeric);
        if mag < 1.0 {
            err < self.abs
        } else {
            err / mag < self.rel
        }
    }
}

/// `(f(θ + h·e_i) - f(θ - h·e_i)) / 2h` for every coordinate of `theta`.
/// `theta` is restored before returning.
pub fn central_differences(theta: &mut [f64], step: f64, mut objective: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + step;
        let plus = objective(theta);
        theta[i] = orig - step;
        let minus = objective(theta);
        theta[i] = orig;
        out.push((plus - minus) / (2.0 * step));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub label: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Summary of one comparison between analytic and numeric gradients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub mismatches: Vec<Mismatch>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn compare(&mut self, label: &str, analytic: &[f64], numeric: &[f64], tol: Tolerance) {
        assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch for {label}");
        for (index, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
            self.checked += 1;
            let mag = libm::fmax(libm::fabs(a), libm::fabs(n));
            if mag > 0.0 {
                self.max_rel_error = libm::fmax(self.max_rel_error, libm::fabs(a - n) / mag);
            }
            if !tol.accepts(a, n) {
                self.mismatches.push(Mismatch {
                    label: label.into(),
                    index,
                    analytic: a,
                    numeric: n,
                });
            }
        }
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.checked += other.checked;
        self.max_rel_error = libm::fmax(self.max_rel_error, other.max_rel_error);
        self.mismatches.extend(other.mismatches);
    }
}

/// One configuration of the gradient suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteCase {
    pub seed: u64,
    pub lookback: usize,
    pub channels: usize,
    pub kernel_size: usize,
    pub horizon: usize,
}

pub const SUITE_LOOKBACKS: [usize; 3] = [4, 8, 96];
pub const SUITE_CHANNELS: [usize; 3] = [1, 3, 7];
pub const SUITE_KERNELS: [usize; 2] = [3, 5];
pub const SUITE_HORIZONS: [usize; 2] = [2, 24];
pub const SUITE_STEP: f64 = 1e-5;

/// Twenty configurations cycling through every lookback/channel pair, both
/// kernel sizes and both horizons (including the largest combination).
pub fn suite_cases(base_seed: u64) -> Vec<SuiteCase> {
    (0..20u64)
        .map(|i| {
            let i_us = i as usize;
            SuiteCase {
                seed: base_seed.wrapping_add(i),
                lookback: SUITE_LOOKBACKS[i_us % 3],
                channels: SUITE_CHANNELS[(i_us / 3) % 3],
                kernel_size: SUITE_KERNELS[(i_us / 9) % 2],
                horizon: SUITE_HORIZONS[i_us % 2],
            }
        })
        .collect()
}

fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<Grid> {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Grid::from_vec(rows, cols, data)
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// A random window with distinct per-channel level and scale, so RevIN
/// statistics are far from degenerate.
fn random_window(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<Grid> {
    let level = random_vec(rng, cols, -3.0, 3.0);
    let scale = random_vec(rng, cols, 0.5, 2.0);
    let noise = random_grid(rng, rows, cols)?;
    Grid::from_fn(rows, cols, |i, j| level[j] + scale[j] * noise.get(i, j))
}

/// Parameters with every group perturbed away from its initial value.
pub fn random_params(rng: &mut ChaCha8Rng, case: &SuiteCase) -> Result<ArmaParams> {
    let mut params = init_params(case.seed, case.lookback, case.horizon, case.kernel_size, case.channels)?;
    for group in ParamGroup::ALL {
        for v in params.group_mut(group).iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    Ok(params)
}

fn dot(a: &Grid, b: &Grid) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// Check every backward op of one configuration against central
/// differences of the scalar `Σ r ⊙ output` for a fixed random `r`.
pub fn check_case(case: &SuiteCase) -> Result<CheckReport> {
    let tol = Tolerance::STANDARD;
    let h = SUITE_STEP;
    let (l, c, t) = (case.lookback, case.channels, case.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut report = CheckReport::default();

    // Convolution.
    let x = random_grid(&mut rng, l, c)?;
    let taps = random_vec(&mut rng, case.kernel_size * case.kernel_size, -0.5, 0.5);
    let kernel = Kernel::new(case.kernel_size, taps, rng.random_range(-0.5..0.5))?;
    let r = random_grid(&mut rng, l, c)?;
    let grads = conv_same_backward(&x, &kernel, &r)?;
    let conv_obj = |x: &Grid, k: &Kernel| conv_same_forward(x, k).map(|y| dot(&y, &r)).unwrap_or(f64::NAN);
    let mut xs = x.as_slice().to_vec();
    let num = central_differences(&mut xs, h, |v| conv_obj(&Grid::from_vec(l, c, v.to_vec()).unwrap(), &kernel));
    report.compare("conv.input", grads.input.as_slice(), &num, tol);
    let mut ts = kernel.taps.clone();
    let num = central_differences(&mut ts, h, |v| {
        let mut k = kernel.clone();
        k.taps.copy_from_slice(v);
        conv_obj(&x, &k)
    });
    report.compare("conv.taps", &grads.taps, &num, tol);
    let num = central_differences(&mut [kernel.bias], h, |v| {
        let mut k = kernel.clone();
        k.bias = v[0];
        conv_obj(&x, &k)
    });
    report.compare("conv.bias", &[grads.bias], &num, tol);

    // Time projection.
    let proj = Projection::new(t, l, random_vec(&mut rng, t * l, -0.5, 0.5), random_vec(&mut rng, t, -0.5, 0.5))?;
    let r = random_grid(&mut rng, t, c)?;
    let grads = time_project_backward(&x, &proj, &r)?;
    let proj_obj = |x: &Grid, p: &Projection| time_project_forward(x, p).map(|y| dot(&y, &r)).unwrap_or(f64::NAN);
    let num = central_differences(&mut xs, h, |v| proj_obj(&Grid::from_vec(l, c, v.to_vec()).unwrap(), &proj));
    report.compare("projection.input", grads.input.as_slice(), &num, tol);
    let mut ws = proj.weights.clone();
    let num = central_differences(&mut ws, h, |v| {
        let mut p = proj.clone();
        p.weights.copy_from_slice(v);
        proj_obj(&x, &p)
    });
    report.compare("projection.weights", &grads.weights, &num, tol);
    let mut bs = proj.step_bias.clone();
    let num = central_differences(&mut bs, h, |v| {
        let mut p = proj.clone();
        p.step_bias.copy_from_slice(v);
        proj_obj(&x, &p)
    });
    report.compare("projection.step_bias", &grads.step_bias, &num, tol);

    // RevIN normalization (statistics depend on the input).
    let window = random_window(&mut rng, l, c)?;
    let gamma = random_vec(&mut rng, c, 0.5, 1.5);
    let beta = random_vec(&mut rng, c, -0.5, 0.5);
    let r = random_grid(&mut rng, l, c)?;
    let (_, state) = revin_normalize(&window, DEFAULT_EPS, &gamma, &beta)?;
    let grads = revin_normalize_backward(&window, &state, &r)?;
    let norm_obj = |x: &Grid, g: &[f64], b: &[f64]| {
        revin_normalize(x, DEFAULT_EPS, g, b).map(|(y, _)| dot(&y, &r)).unwrap_or(f64::NAN)
    };
    let mut ws = window.as_slice().to_vec();
    let num = central_differences(&mut ws, h, |v| norm_obj(&Grid::from_vec(l, c, v.to_vec()).unwrap(), &gamma, &beta));
    report.compare("revin_norm.input", grads.input.as_slice(), &num, tol);
    let num = central_differences(&mut gamma.clone(), h, |v| norm_obj(&window, v, &beta));
    report.compare("revin_norm.gamma", &grads.gamma, &num, tol);
    let num = central_differences(&mut beta.clone(), h, |v| norm_obj(&window, &gamma, v));
    report.compare("revin_norm.beta", &grads.beta, &num, tol);

    // RevIN denormalization (statistics held fixed).
    let y = random_grid(&mut rng, t, c)?;
    let r = random_grid(&mut rng, t, c)?;
    let grads = revin_denormalize_backward(&y, &state, &r)?;
    let denorm_obj = |y: &Grid, s: &RevInState| revin_denormalize(y, s).map(|o| dot(&o, &r)).unwrap_or(f64::NAN);
    let mut ys = y.as_slice().to_vec();
    let num = central_differences(&mut ys, h, |v| denorm_obj(&Grid::from_vec(t, c, v.to_vec()).unwrap(), &state));
    report.compare("revin_denorm.input", grads.input.as_slice(), &num, tol);
    let num = central_differences(&mut state.gamma.clone(), h, |v| {
        let mut s = state.clone();
        s.gamma.copy_from_slice(v);
        denorm_obj(&y, &s)
    });
    report.compare("revin_denorm.gamma", &grads.gamma, &num, tol);
    let num = central_differences(&mut state.beta.clone(), h, |v| {
        let mut s = state.clone();
        s.beta.copy_from_slice(v);
        denorm_obj(&y, &s)
    });
    report.compare("revin_denorm.beta", &grads.beta, &num, tol);

    // Whole block, both variants.
    let params = random_params(&mut rng, case)?;
    let r = random_grid(&mut rng, t, c)?;
    for variant in [Variant::Arma, Variant::CnnOnly] {
        report.merge(check_block(variant, &params, &window, &r, tol)?);
    }
    Ok(report)
}

/// Compares [`backward`] against central differences of `Σ r ⊙ forward(x)`
/// for every parameter group the variant uses.
pub fn check_block(variant: Variant, params: &ArmaParams, x: &Grid, r: &Grid, tol: Tolerance) -> Result<CheckReport> {
    let (_, cache) = forward(variant, x, params)?;
    let grads = backward(r, &cache, params)?;
    let mut report = CheckReport::default();
    for group in ParamGroup::ALL.into_iter().filter(|&g| variant.uses(g)) {
        let mut theta = params.group(group).to_vec();
        let mut probe = params.clone();
        let num = central_differences(&mut theta, SUITE_STEP, |v| {
            probe.group_mut(group).copy_from_slice(v);
            forward(variant, x, &probe).map(|(y, _)| dot(&y, r)).unwrap_or(f64::NAN)
        });
        let label = alloc::format!("{}.{}", variant.name(), group.name());
        report.compare(&label, grads.group(group), &num, tol);
    }
    Ok(report)
}

/// Runs [`check_case`] over [`suite_cases`], returning one report per case.
pub fn run_gradient_suite(base_seed: u64) -> Result<Vec<(SuiteCase, CheckReport)>> {
    suite_cases(base_seed)
        .into_iter()
        .map(|case| check_case(&case).map(|r| (case, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let mut theta = alloc::vec![1.0, -2.0, 0.5];
        let g = central_differences(&mut theta, 1e-5, |t| t.iter().map(|v| v * v).sum());
        assert_eq!(theta, alloc::vec![1.0, -2.0, 0.5]);
        for (a, b) in g.iter().zip([2.0, -4.0, 1.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn tolerance_switches_on_magnitude() {
        let tol = Tolerance::STANDARD;
        assert!(tol.accepts(10.0, 10.0005));
        assert!(!tol.accepts(10.0, 10.01));
        assert!(tol.accepts(0.5, 0.5 + 5e-8));
        assert!(!tol.accepts(0.5, 0.5 + 5e-7));
    }

    #[test]
    fn suite_covers_every_axis_value() {
        let cases = suite_cases(0);
        assert_eq!(cases.len(), 20);
        for l in SUITE_LOOKBACKS {
            for c in SUITE_CHANNELS {
                assert!(cases.iter().any(|k| k.lookback == l && k.channels == c));
            }
        }
        assert!(cases.iter().any(|k| (k.lookback, k.channels, k.kernel_size, k.horizon) == (96, 7, 5, 24)));
        for k in SUITE_KERNELS {
            assert!(cases.iter().any(|c| c.kernel_size == k));
        }
    }

    #[test]
    fn small_case_passes() {
        let case = SuiteCase { seed: 3, lookback: 8, channels: 3, kernel_size: 3, horizon: 4 };
        let report = check_case(&case).unwrap();
        assert!(report.passed(), "{:?}", report.mismatches);
        assert!(report.checked > 100);
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let mut report = CheckReport::default();
        report.compare("x", &[1.0, 2.0], &[1.0, 2.1], Tolerance::STANDARD);
        assert!(!report.passed());
        assert_eq!(report.mismatches[0].index, 1);
    }
}
