//! Capacity analysis and phase optimization for holographic MIMO links
//! with stacked intelligent metasurfaces (SIMs) at both ends.
//!
//! The crate is organized bottom-up:
//!
//! - [`scene`]: geometry, diffraction couplings, spatial correlation, path loss
//! - [`simstack`]: per-layer phase profiles and the composite responses `P`, `D`
//! - [`channel`]: seeded Kronecker-correlated Rayleigh draws and `H = D G P`
//! - [`metrics`]: ergodic capacity (Monte Carlo and closed-form bound) and
//!   low-SNR metrics
//! - [`optimizer`]: Wirtinger gradients and projected gradient ascent
//! - [`experiments`]: scenario runners, CSV/gnuplot output and the
//!   validation report

pub mod channel;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod scene;
pub mod simstack;

pub use error::{Error, Result};
