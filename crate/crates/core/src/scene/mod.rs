//! Deterministic link quantities: geometry, diffraction couplings, spatial
//! correlation and path loss.

mod config;
mod geometry;

use std::f64::consts::PI;

pub use config::{db_to_linear, linear_to_db, SystemConfig, SPEED_OF_LIGHT};
pub use geometry::{build_layout, grid_shape, Point, SceneLayout};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};

/// Rayleigh–Sommerfeld transmission coefficients from every `src` point to
/// every `dst` point (rows index `dst`).
///
/// Entry `(n, m)` is `(A·cos χ / d)(1/(2πd) − j/λ)·e^{j2πd/λ}` with `d` the
/// distance from `src[m]` to `dst[n]` and `cos χ = |n̂·(dst − src)| / d`.
pub fn coupling_matrix(
    src: &[Point],
    dst: &[Point],
    normal: &Point,
    wavelength: f64,
    element_area: f64,
) -> Result<CMat> {
    let unit = normal.normalize();
    let mut out = CMat::zeros(dst.len(), src.len());
    for (n, q) in dst.iter().enumerate() {
        for (m, p) in src.iter().enumerate() {
            let delta = q - p;
            let d = delta.norm();
            if d <= 0.0 {
                return Err(Error::DegenerateGeometry { src: m, dst: n });
            }
            let cos_chi = unit.dot(&delta).abs() / d;
            let amp = element_area * cos_chi / d;
            let near = c(1.0 / (2.0 * PI * d), -1.0 / wavelength);
            let phase = 2.0 * PI * d / wavelength;
            out[(n, m)] = near * c(phase.cos(), phase.sin()) * amp;
        }
    }
    Ok(out)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let a = PI * x;
        a.sin() / a
    }
}

/// Isotropic-scattering correlation `sinc(2‖p_i − p_j‖/λ)`, with slightly
/// negative eigenvalues clipped to zero.
pub fn correlation_matrix(positions: &[Point], wavelength: f64) -> Result<CMat> {
    let n = positions.len();
    let raw = CMat::from_fn(n, n, |i, j| {
        let d = (positions[i] - positions[j]).norm();
        c(sinc(2.0 * d / wavelength), 0.0)
    });
    let mut r = linalg::clip_psd(&raw)?;
    for i in 0..n {
        r[(i, i)] = c(1.0, 0.0);
    }
    Ok(r)
}

/// Principal square root of a Hermitian PSD matrix.
pub fn matrix_sqrt_psd(r: &CMat) -> Result<CMat> {
    linalg::psd_sqrt(r)
}

/// Linear path gain `(λ/4π)² · d^{−b}`.
pub fn path_loss(distance: f64, exponent: f64, wavelength: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {distance}")));
    }
    Ok((wavelength / (4.0 * PI)).powi(2) * distance.powf(-exponent))
}

/// Everything about the link that does not depend on the phase profiles or
/// on the fading draw.
#[derive(Debug, Clone)]
pub struct SceneMatrices {
    /// `w[0]`: M×N_t (antennas → layer 1); `w[l]`: M×M (layer l → layer l+1).
    pub w: Vec<CMat>,
    /// `u[0]`: N_r×N (layer 1 → antennas); `u[k]`: N×N (layer k+1 → layer k).
    pub u: Vec<CMat>,
    pub r_t: CMat,
    pub r_r: CMat,
    pub r_t_sqrt: CMat,
    pub r_r_sqrt: CMat,
    pub logdet_r_t: f64,
    pub logdet_r_r: f64,
    pub beta: f64,
}

impl SceneMatrices {
    pub fn build(config: &SystemConfig) -> Result<Self> {
        let layout = build_layout(config)?;
        Self::from_layout(config, &layout)
    }

    pub fn from_layout(config: &SystemConfig, layout: &SceneLayout) -> Result<Self> {
        let lambda = config.wavelength;
        let area = config.element_area;

        let mut w = Vec::with_capacity(config.layers_tx);
        let mut prev = &layout.tx_antenna_positions;
        for (layer, normal) in layout.tx_layer_positions.iter().zip(&layout.tx_layer_normals) {
            w.push(coupling_matrix(prev, layer, normal, lambda, area)?);
            prev = layer;
        }

        let mut u = Vec::with_capacity(config.layers_rx);
        let mut next = &layout.rx_antenna_positions;
        for (layer, normal) in layout.rx_layer_positions.iter().zip(&layout.rx_layer_normals) {
            u.push(coupling_matrix(layer, next, normal, lambda, area)?);
            next = layer;
        }

        let r_t = correlation_matrix(&layout.tx_layer_positions[0], lambda)?;
        let r_r = correlation_matrix(&layout.rx_layer_positions[0], lambda)?;
        let beta = path_loss(config.link_distance, config.pathloss_exponent, lambda)?;
        Self::from_parts(w, u, r_t, r_r, beta)
    }

    /// Assembles a scene from explicit matrices (used for reduced and
    /// synthetic configurations).
    pub fn from_parts(w: Vec<CMat>, u: Vec<CMat>, r_t: CMat, r_r: CMat, beta: f64) -> Result<Self> {
        if w.is_empty() || u.is_empty() {
            return Err(Error::InvalidArgument("need at least one layer per side".into()));
        }
        let m = w[0].nrows();
        for (i, wl) in w.iter().enumerate().skip(1) {
            if wl.shape() != (m, m) {
                return Err(Error::DimensionMismatch {
                    context: "transmit coupling",
                    expected: format!("{m}x{m}"),
                    got: format!("{}x{} at layer {}", wl.nrows(), wl.ncols(), i + 1),
                });
            }
        }
        let n = u[0].ncols();
        for (i, uk) in u.iter().enumerate().skip(1) {
            if uk.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    context: "receive coupling",
                    expected: format!("{n}x{n}"),
                    got: format!("{}x{} at layer {}", uk.nrows(), uk.ncols(), i + 1),
                });
            }
        }
        if r_t.shape() != (m, m) || r_r.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                context: "correlation",
                expected: format!("{m}x{m} and {n}x{n}"),
                got: format!("{:?} and {:?}", r_t.shape(), r_r.shape()),
            });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("path loss must be positive, got {beta}")));
        }
        let r_t_sqrt = matrix_sqrt_psd(&r_t)?;
        let r_r_sqrt = matrix_sqrt_psd(&r_r)?;
        let logdet_r_t = linalg::hermitian_logdet_eig(&r_t)?.ok_or(Error::SingularCorrelation("transmit"))?;
        let logdet_r_r = linalg::hermitian_logdet_eig(&r_r)?.ok_or(Error::SingularCorrelation("receive"))?;
        Ok(Self { w, u, r_t, r_r, r_t_sqrt, r_r_sqrt, logdet_r_t, logdet_r_r, beta })
    }

    /// Identity couplings and correlations: `M = N_t`, `N = N_r`.
    pub fn identity(n_t: usize, n_r: usize, layers_tx: usize, layers_rx: usize, beta: f64) -> Result<Self> {
        Self::from_parts(
            vec![linalg::identity(n_t); layers_tx],
            vec![linalg::identity(n_r); layers_rx],
            linalg::identity(n_t),
            linalg::identity(n_r),
            beta,
        )
    }

    pub fn n_t(&self) -> usize {
        self.w[0].ncols()
    }

    pub fn n_r(&self) -> usize {
        self.u[0].nrows()
    }

    /// Meta-atoms per transmit layer.
    pub fn m(&self) -> usize {
        self.w[0].nrows()
    }

    /// Meta-atoms per receive layer.
    pub fn n(&self) -> usize {
        self.u[0].ncols()
    }

    pub fn layers_tx(&self) -> usize {
        self.w.len()
    }

    pub fn layers_rx(&self) -> usize {
        self.u.len()
    }

    pub fn s(&self) -> usize {
        self.m().min(self.n())
    }

    pub fn t(&self) -> usize {
        self.m().max(self.n())
    }

    /// Per-entry variance of the inter-SIM fading, `β / M`.
    pub fn entry_variance(&self) -> f64 {
        self.beta / self.m() as f64
    }
}
