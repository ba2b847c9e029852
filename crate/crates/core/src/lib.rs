//! Factor-graph active SLAM for spacecraft proximity operations.
//!
//! A chaser spacecraft on a Clohessy-Wiltshire relative orbit observes a
//! synthetic landmark scene with a pinhole camera. Poses and landmarks are
//! estimated jointly by nonlinear least squares over a factor graph, and the
//! camera pointing target is chosen to maximize the expected information gain
//! of the predicted future belief.

// Negated comparisons are how NaN inputs get rejected alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant)]

pub mod camera;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod noise;
pub mod planner;
pub mod pose;
pub mod scene;

pub use error::{Error, Result};
