//! Capacity and low-SNR metrics.

mod capacity;
mod lowsnr;
mod special;

pub use capacity::{
    capacity_lower_bound, ergodic_capacity_mc, iid_lower_bound, instantaneous_capacity, lower_bound_from_exponent,
    wishart_logdet_mean, BoundTerms, FadingModel, LowerBound, McEstimate,
};
pub use lowsnr::{
    dispersion, gain_traces, low_snr_capacity, low_snr_matrices, min_energy_per_bit, min_energy_per_bit_from_traces,
    wideband_slope, wideband_slope_from_dispersions, EnergyPerBit,
};
pub use special::{digamma, EULER_GAMMA};

use serde::Serialize;

/// One row of a capacity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityReport {
    pub snr_db: f64,
    pub c_lb: f64,
    pub c_mc: f64,
    pub ci: f64,
    pub v_term: f64,
    pub ebn0min_db: f64,
    pub ebn0min_linear: f64,
    pub s0: f64,
    pub trials: usize,
    pub seed: u64,
}

impl CapacityReport {
    pub const CSV_HEADER: &'static str = "snr_db,c_lb,c_mc,ci,ebn0min_db,s0,trials,seed";

    /// The bound must not exceed the simulated capacity beyond its
    /// confidence half-width.
    pub fn bound_holds(&self) -> bool {
        self.c_lb <= self.c_mc + self.ci
    }
}
