//! Inf-convolution based sample-and-hold stabilization under controlled
//! computational uncertainty.
//!
//! The controller replaces a nonsmooth control Lyapunov function `V` by its
//! Moreau envelope, computes an approximate envelope minimizer and a control
//! with deliberately bounded suboptimality, and holds that control over each
//! sampling interval. [`bounds`] computes sampling times, accuracies and
//! noise levels under which the closed loop is practically stable.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod clf;
pub mod cli;
pub mod config;
pub mod controller;
pub mod endi;
pub mod error;
pub mod infconv;
pub mod linalg;
pub mod optim;
pub mod sampling;
pub mod sim;
pub mod systems;
pub mod validate;

pub use error::{Error, Result};
pub use linalg::{BoxSet, ControlVec, StateVec};
