//! Element placement for both metasurface stacks and their antenna arrays.
//!
//! Layers lie in the x–z plane and are stacked along +y. The transmit
//! antennas sit at y = 0 with transmit layer `l` at `l · gap_tx`; the
//! outermost receive layer (index K) faces the transmitter at
//! `T_tx + d`, and the receive antennas sit one gap behind receive layer 1.

use nalgebra::Vector3;

use super::config::SystemConfig;
use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

#[derive(Debug, Clone)]
pub struct SceneLayout {
    pub tx_antenna_positions: Vec<Point>,
    pub rx_antenna_positions: Vec<Point>,
    /// `tx_layer_positions[l - 1]` holds layer `l`.
    pub tx_layer_positions: Vec<Vec<Point>>,
    /// `rx_layer_positions[k - 1]` holds layer `k`.
    pub rx_layer_positions: Vec<Vec<Point>>,
    pub tx_layer_normals: Vec<Point>,
    pub rx_layer_normals: Vec<Point>,
}

/// Most-square `(rows, cols)` factorization with `rows ≤ cols`.
pub fn grid_shape(count: usize) -> Result<(usize, usize)> {
    if count == 0 {
        return Err(Error::InvalidArgument("per-layer element count must be positive".into()));
    }
    let mut rows = (count as f64).sqrt().floor() as usize;
    while rows > 1 && !count.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    Ok((rows, count / rows))
}

/// Planar grid centred on `(0, y, altitude)`; columns run along x, rows
/// along z.
fn planar_grid(count: usize, spacing: f64, y: f64, altitude: f64) -> Result<Vec<Point>> {
    let (rows, cols) = grid_shape(count)?;
    let x0 = (cols as f64 - 1.0) / 2.0;
    let z0 = (rows as f64 - 1.0) / 2.0;
    let mut points = Vec::with_capacity(count);
    for r in 0..rows {
        for col in 0..cols {
            points.push(Point::new((col as f64 - x0) * spacing, y, altitude + (r as f64 - z0) * spacing));
        }
    }
    Ok(points)
}

fn linear_array(count: usize, spacing: f64, y: f64, altitude: f64) -> Vec<Point> {
    let x0 = (count as f64 - 1.0) / 2.0;
    (0..count).map(|i| Point::new((i as f64 - x0) * spacing, y, altitude)).collect()
}

pub fn build_layout(config: &SystemConfig) -> Result<SceneLayout> {
    config.validate()?;
    let spacing = config.element_spacing;
    let z = config.altitude_m;
    let gap_tx = config.layer_gap_tx();
    let gap_rx = config.layer_gap_rx();

    let tx_layer_positions = (1..=config.layers_tx)
        .map(|l| planar_grid(config.m_tx, spacing, l as f64 * gap_tx, z))
        .collect::<Result<Vec<_>>>()?;

    let rx_outer = config.sim_thickness_tx + config.link_distance;
    let k_total = config.layers_rx;
    let rx_layer_positions = (1..=k_total)
        .map(|k| planar_grid(config.n_rx, spacing, rx_outer + (k_total - k) as f64 * gap_rx, z))
        .collect::<Result<Vec<_>>>()?;

    let normal = Point::new(0.0, 1.0, 0.0);
    Ok(SceneLayout {
        tx_antenna_positions: linear_array(config.n_t, spacing, 0.0, z),
        rx_antenna_positions: linear_array(config.n_r, spacing, rx_outer + k_total as f64 * gap_rx, z),
        tx_layer_positions,
        rx_layer_positions,
        tx_layer_normals: vec![normal; config.layers_tx],
        rx_layer_normals: vec![normal; config.layers_rx],
    })
}
