//! Low-SNR figures of merit: dispersion, minimum energy per bit and
//! wideband slope. These use the channel-gain-normalized fading (unit
//! per-entry variance), so they compare directly against unit-gain iid
//! channels.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scene::{linear_to_db, SceneMatrices};
use crate::simstack::CompositeResponse;

/// `ζ(A) = dim(A) · tr(A²) / tr(A)²`.
pub fn dispersion(a: &CMat) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("dispersion needs a square matrix".into()));
    }
    let tr = linalg::trace(a);
    if tr.norm() == 0.0 {
        return Err(Error::InvalidArgument("dispersion of a zero-trace matrix".into()));
    }
    let tr2 = linalg::trace_of_product(a, a);
    Ok((a.nrows() as f64 * tr2 / (tr * tr)).re)
}

/// `X_T = R_T P Pᴴ` (M×M) and `X_R = R_R Dᴴ D` (N×N).
pub fn low_snr_matrices(scene: &SceneMatrices, composite: &CompositeResponse) -> (CMat, CMat) {
    let p = &composite.p;
    let d = &composite.d;
    (&scene.r_t * p * p.adjoint(), &scene.r_r * d.adjoint() * d)
}

/// `tr(R_T P Pᴴ)` and `tr(R_R Dᴴ D)`, both real and non-negative.
pub fn gain_traces(scene: &SceneMatrices, composite: &CompositeResponse) -> (f64, f64) {
    let p = &composite.p;
    let d = &composite.d;
    let t_tx = linalg::trace(&(p.adjoint() * &scene.r_t * p)).re;
    let t_rx = linalg::trace(&(d * &scene.r_r * d.adjoint())).re;
    (t_tx, t_rx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPerBit {
    pub linear: f64,
    pub db: f64,
}

impl EnergyPerBit {
    pub fn from_linear(linear: f64) -> Self {
        Self { linear, db: linear_to_db(linear) }
    }
}

pub fn min_energy_per_bit_from_traces(n_t: usize, t_tx: f64, t_rx: f64) -> Result<EnergyPerBit> {
    if !(t_tx > 0.0 && t_rx > 0.0) {
        return Err(Error::InvalidArgument(format!("gain traces must be positive, got {t_tx}, {t_rx}")));
    }
    Ok(EnergyPerBit::from_linear(n_t as f64 * LN_2 / (t_tx * t_rx)))
}

/// `N_t ln2 / (tr(R_T P Pᴴ) tr(R_R Dᴴ D))`.
pub fn min_energy_per_bit(scene: &SceneMatrices, composite: &CompositeResponse) -> Result<EnergyPerBit> {
    let (t_tx, t_rx) = gain_traces(scene, composite);
    min_energy_per_bit_from_traces(scene.n_t(), t_tx, t_rx)
}

pub fn wideband_slope_from_dispersions(n_t: usize, n_r: usize, zeta_tx: f64, zeta_rx: f64) -> Result<f64> {
    let (nt, nr) = (n_t as f64, n_r as f64);
    let denom = nt * zeta_tx + nr * zeta_rx;
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::NonFinite("wideband slope denominator".into()));
    }
    Ok(2.0 * nt * nr / denom)
}

/// `2 N_t N_r / (N_t ζ(R_T P Pᴴ) + N_r ζ(R_R Dᴴ D))`.
pub fn wideband_slope(scene: &SceneMatrices, composite: &CompositeResponse) -> Result<f64> {
    let (x_t, x_r) = low_snr_matrices(scene, composite);
    wideband_slope_from_dispersions(scene.n_t(), scene.n_r(), dispersion(&x_t)?, dispersion(&x_r)?)
}

/// `S0 · log2((Eb/N0) / (Eb/N0)_min)`, floored at zero.
pub fn low_snr_capacity(eb_n0: f64, s0: f64, eb_n0_min: f64) -> f64 {
    if eb_n0 <= eb_n0_min {
        return 0.0;
    }
    s0 * (eb_n0 / eb_n0_min).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVec};

    fn real_diag(v: &[f64]) -> CMat {
        linalg::diag(&CVec::from_iterator(v.len(), v.iter().map(|&x| c(x, 0.0))))
    }

    #[test]
    fn dispersion_reference_values() {
        for n in 1..6 {
            assert!((dispersion(&linalg::identity(n)).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((dispersion(&real_diag(&[2.0, 0.0])).unwrap() - 2.0).abs() < 1e-15);
        assert!((dispersion(&real_diag(&[1.0, 1.0, 1.0, 0.0])).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(dispersion(&real_diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn rank_one_dispersion_is_dimension() {
        let v = CMat::from_fn(6, 1, |i, _| c(i as f64 + 1.0, 0.5));
        let a = &v * v.adjoint();
        assert!((dispersion(&a).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn identity_reductions() {
        let scene = SceneMatrices::identity(4, 2, 1, 1, 1.0).unwrap();
        let comp = CompositeResponse::from_matrices(linalg::identity(4), linalg::identity(2));
        let eb = min_energy_per_bit(&scene, &comp).unwrap();
        assert!((eb.linear - LN_2 / 2.0).abs() < 1e-15);
        assert!((eb.linear - 0.3466).abs() < 1e-4);
        let s0 = wideband_slope(&scene, &comp).unwrap();
        assert!((s0 - 16.0 / 6.0).abs() < 1e-14);

        let scene8 = SceneMatrices::identity(8, 8, 1, 1, 1.0).unwrap();
        let comp8 = CompositeResponse::from_matrices(linalg::identity(8), linalg::identity(8));
        assert!((wideband_slope(&scene8, &comp8).unwrap() - 8.0).abs() < 1e-14);
        assert!((min_energy_per_bit(&scene8, &comp8).unwrap().db - (-10.6227)).abs() < 1e-3);
    }

    #[test]
    fn scaling_p_divides_energy_per_bit() {
        let scene = SceneMatrices::identity(3, 2, 1, 1, 1.0).unwrap();
        let p = CMat::from_fn(3, 3, |i, j| c(1.0 + i as f64, j as f64 - 0.3));
        let d = CMat::from_fn(2, 2, |i, j| c(0.5 + j as f64, i as f64));
        let base = min_energy_per_bit(&scene, &CompositeResponse::from_matrices(p.clone(), d.clone())).unwrap();
        let scale = c(1.5, -2.0);
        let scaled = min_energy_per_bit(&scene, &CompositeResponse::from_matrices(p * scale, d)).unwrap();
        assert!((scaled.linear * scale.norm_sqr() / base.linear - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rank_one_transmit_lowers_slope() {
        let scene = SceneMatrices::identity(4, 4, 1, 1, 1.0).unwrap();
        let v = CMat::from_fn(4, 1, |i, _| c(1.0, i as f64));
        let p = &v * v.adjoint();
        let rank_one = wideband_slope(&scene, &CompositeResponse::from_matrices(p, linalg::identity(4))).unwrap();
        let ident = wideband_slope(&scene, &CompositeResponse::from_matrices(linalg::identity(4), linalg::identity(4)))
            .unwrap();
        assert!(rank_one < ident);
        assert!((ident - 4.0).abs() < 1e-14);
    }

    #[test]
    fn low_snr_capacity_curve() {
        assert_eq!(low_snr_capacity(0.5, 8.0, 0.5), 0.0);
        assert!((low_snr_capacity(1.0, 8.0, 0.5) - 8.0).abs() < 1e-15);
        assert_eq!(low_snr_capacity(0.2, 8.0, 0.5), 0.0);
    }

    #[test]
    fn zero_trace_rejected() {
        assert!(min_energy_per_bit_from_traces(2, 0.0, 1.0).is_err());
    }
}
