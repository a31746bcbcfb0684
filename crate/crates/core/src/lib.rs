//! Obstacle-aware swarm trail detection over RGB-D keyframes.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod config;
pub mod dataset;
pub mod detector;
pub mod eval;
pub mod geom;
pub mod keyframe;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod validator;

#[cfg(test)]
mod test_support;
