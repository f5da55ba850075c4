//! Correlation and error metrics.

use alloc::vec::Vec;

use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::model::{decompose_forecast, forward, ArmaParams, Variant};

/// Sample Pearson correlation. Errors with [`Error::UndefinedCorrelation`]
/// when either input has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            op: "pearson",
            expected: (a.len(), 1),
            found: (b.len(), 1),
        });
    }
    if a.len() < 2 {
        return Err(Error::Contract("pearson needs at least two samples".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    let r = sab / libm::sqrt(saa * sbb);
    Ok(r.clamp(-1.0, 1.0))
}

/// Error metrics over a window set, in the data's (standardized) units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    pub windows: usize,
}

/// Correlation of each component forecast with the targets. `None` marks an
/// undefined correlation (constant component).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComponentCorrelations {
    pub ar: Option<f64>,
    pub ma: Option<f64>,
}

/// Flattens every window's AR and MA forecast contributions (output units)
/// and correlates each against the flattened targets.
pub fn component_correlations(variant: Variant, params: &ArmaParams, windows: &WindowSet) -> Result<ComponentCorrelations> {
    let mut ar = Vec::new();
    let mut ma = Vec::new();
    let mut target = Vec::new();
    for pair in windows.iter() {
        let pair = pair?;
        let (_, cache) = forward(variant, &pair.x, params)?;
        let (y_ar, y_ma) = decompose_forecast(&cache, params)?;
        ar.extend_from_slice(y_ar.as_slice());
        ma.extend_from_slice(y_ma.as_slice());
        target.extend_from_slice(pair.y.as_slice());
    }
    let defined = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(ComponentCorrelations {
        ar: defined(pearson(&ar, &target))?,
        ma: defined(pearson(&ma, &target))?,
    })
}

/// Naive forecast that repeats each window's last observed row over the
/// whole horizon.
pub fn repeat_last_baseline(windows: &WindowSet) -> Result<MetricsReport> {
    if windows.is_empty() {
        return Err(Error::Contract("cannot evaluate on an empty window set".into()));
    }
    let (mut se, mut ae, mut count) = (0.0, 0.0, 0usize);
    for pair in windows.iter() {
        let pair = pair?;
        let last = pair.x.row(pair.x.rows() - 1);
        for t in 0..pair.y.rows() {
            for (p, y) in last.iter().zip(pair.y.row(t)) {
                se += (p - y) * (p - y);
                ae += libm::fabs(p - y);
            }
        }
        count += pair.y.len();
    }
    Ok(MetricsReport {
        mse: se / count as f64,
        mae: ae / count as f64,
        windows: windows.len(),
    })
}
