//! Phase-profile optimization.

mod gradients;
mod pga;

pub use gradients::{
    angle_derivatives, finite_diff_gradient, grad_clb_rx, grad_clb_tx, grad_ebmin, grad_s0, max_relative_error,
    Gradient, Objective, Problem,
};
pub use pga::{multi_start, projected_gradient_ascent, IterationRecord, OptimizerState, PgaOptions, StopReason};
