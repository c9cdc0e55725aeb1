//! Differentiable control-point image warping.
//!
//! The core is a thin-plate spline fitted in closed form from control points
//! ([`tps`]), evaluated into a dense inverse-mapping grid and resampled
//! bilinearly ([`sampler`]). [`warp_grad`] differentiates the whole chain with
//! respect to the image and the control points, [`backends`] provides the
//! projective, dense-grid and landmark alternatives, and [`losses`] holds the
//! adversarial, identity-mapping and normalization arithmetic used around the
//! warp. [`fitdemo`] recovers a warp by gradient descent, and [`io`] covers
//! file formats, face alignment and the command line.

// `!(x > bound)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backends;
pub mod error;
pub mod fitdemo;
pub mod image;
pub mod io;
pub mod losses;
pub mod sampler;
pub mod synth;
pub mod tps;
pub mod warp_grad;

pub use crate::error::{Error, Result};
pub use crate::image::{FlowField, Image, Vec2};
pub use crate::tps::{evaluate, fit, kernel, ControlPointSet, TpsParameters};
