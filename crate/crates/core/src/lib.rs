//! Convolutional AR/MA forecasting block.
//!
//! The block runs two same-padded convolutions over a lookback window: the AR
//! path fits the window directly, the MA path fits what the AR path left
//! behind, and each path is projected onto the forecast horizon before the two
//! are summed with a per-step bias. Inputs and outputs pass through reversible
//! instance normalization.
//!
//! Everything here is pure computation over [`Grid`]s and needs only `alloc`.
//! File formats, the CLI and wall-clock timing live in the `arma-cli` crate.
#![no_std]
// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod conv;
pub mod data;
mod error;
pub mod gradcheck;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod probe;
pub mod projection;
pub mod revin;
pub mod rng;
pub mod trainer;

pub use conv::{conv_same_backward, conv_same_forward, ConvGrads, Kernel};
pub use error::{Error, Result};
pub use grid::Grid;
pub use model::{ArmaParams, ForwardCache, ParamGrads, ParamGroup, Variant};
pub use projection::{time_project_backward, time_project_forward, Projection, ProjectionGrads};
pub use revin::RevInState;
