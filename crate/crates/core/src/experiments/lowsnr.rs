//! Low-SNR capacity versus energy per bit: the second-order analytic
//! expansion plus Monte Carlo points.
//!
//! Both use a unit-variance `G̃` (no path loss), matching the convention of
//! the minimum energy per bit. Monte Carlo points map SNR to energy per bit
//! by `Eb/N0 = ρ / C(ρ)` with `C` in bit/s/Hz.

use std::fmt::Write as _;

use serde::Serialize;

use super::output::{gnuplot_header, write_files, Cell, Csv};
use super::{build_scene, par_map, realize, Artifacts, Curve, ExperimentSpec};
use crate::channel::stream_seed;
use crate::error::Result;
use crate::metrics::{self, FadingModel};
use crate::scene::{db_to_linear, linear_to_db};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowSnrCurve {
    pub curve: Curve,
    pub ebn0min_linear: f64,
    pub ebn0min_db: f64,
    pub s0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowSnrRow {
    pub curve: Curve,
    /// `false` for the analytic expansion, `true` for Monte Carlo points.
    pub simulated: bool,
    /// SNR of a Monte Carlo point.
    pub snr_db: Option<f64>,
    pub ebn0_db: f64,
    /// bit/s/Hz
    pub capacity: f64,
    pub ci: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowSnr {
    pub curves: Vec<LowSnrCurve>,
    pub rows: Vec<LowSnrRow>,
}

impl LowSnr {
    /// Writes `low_snr.csv` and `low_snr.gp` into the spec's output
    /// directory, if any.
    pub fn write(&self, spec: &ExperimentSpec) -> Result<Artifacts> {
        let csv_name = "low_snr.csv";
        write_files(
            spec,
            &[(csv_name.to_string(), self.csv(spec)), ("low_snr.gp".to_string(), self.plot_script(spec, csv_name))],
        )
    }

    pub const CSV_HEADER: &'static str = "curve,kind,snr_db,ebn0_db,capacity,ci,ebn0min_db,s0";

    pub fn curve(&self, curve: Curve) -> Option<&LowSnrCurve> {
        self.curves.iter().find(|c| c.curve == curve)
    }

    pub fn csv(&self, spec: &ExperimentSpec) -> String {
        let notes = vec!["Eb/N0 of Monte Carlo points = rho / C(rho), unit-variance fading".to_string()];
        let mut csv = Csv::new(spec, &notes, Self::CSV_HEADER);
        for r in &self.rows {
            let c = self.curve(r.curve).expect("row curve summarized");
            csv.row(&[
                Cell::Text(r.curve.name()),
                Cell::Text(if r.simulated { "mc" } else { "analytic" }),
                r.snr_db.map_or(Cell::Empty, Cell::Num),
                Cell::Num(r.ebn0_db),
                Cell::Num(r.capacity),
                r.ci.map_or(Cell::Empty, Cell::Num),
                Cell::Num(c.ebn0min_db),
                Cell::Num(c.s0),
            ]);
        }
        csv.finish()
    }

    pub fn plot_script(&self, spec: &ExperimentSpec, csv_name: &str) -> String {
        let mut gp = gnuplot_header(spec, csv_name, "Eb/N0 (dB)", "capacity (bit/s/Hz)");
        let mut plots = Vec::new();
        for c in &self.curves {
            let sel = |kind: &str| format!("(strcol(1) eq '{}' && strcol(2) eq '{kind}'", c.curve);
            plots.push(format!(
                "data using 4:({} ? $5 : NaN) with lines title 'analytic {}'",
                sel("analytic") + ")",
                c.curve
            ));
            plots.push(format!("data using 4:({} ? $5 : NaN) with points title 'MC {}'", sel("mc") + ")", c.curve));
        }
        writeln!(gp, "plot {}", plots.join(", \\\n     ")).unwrap();
        gp
    }
}

/// Eb/N0_min, wideband slope and capacity curves for each requested curve
/// on the configured link (phases optimized at `reference_snr_db`, default
/// the configured `P/σ²`).
pub fn low_snr(spec: &ExperimentSpec) -> Result<LowSnr> {
    spec.validate()?;
    let scene = build_scene(&spec.config, "low_snr")?;
    let reference_rho = db_to_linear(spec.reference_snr_db.unwrap_or(spec.config.snr_db()));
    let rhos: Vec<f64> = spec.snr_grid_db.iter().map(|&x| db_to_linear(x)).collect();
    let seed = stream_seed(spec.seed, 0);
    let mc_seed = stream_seed(seed, 1000);

    let results = par_map(spec.curves.len(), |i| {
        let curve = spec.curves[i];
        let run = || -> Result<(LowSnrCurve, Vec<LowSnrRow>)> {
            let realized = realize(spec, &scene, curve, reference_rho, seed)?;
            let count = realized.composites.len() as f64;
            let mut eb = 0.0;
            let mut s0 = 0.0;
            let mut c_mc = vec![0.0; rhos.len()];
            let mut ci_sq = vec![0.0; rhos.len()];
            for comp in &realized.composites {
                eb += metrics::min_energy_per_bit(&realized.scene, comp)?.linear / count;
                s0 += metrics::wideband_slope(&realized.scene, comp)? / count;
                let model = FadingModel::sim_with_variance(&realized.scene, comp, 1.0);
                for (k, est) in model.ergodic_capacity(&rhos, spec.trials, mc_seed)?.iter().enumerate() {
                    c_mc[k] += est.mean / count;
                    ci_sq[k] += (est.ci_halfwidth / count).powi(2);
                }
            }
            let summary = LowSnrCurve { curve, ebn0min_linear: eb, ebn0min_db: linear_to_db(eb), s0 };
            let mut rows: Vec<LowSnrRow> = spec
                .ebn0_grid_db
                .iter()
                .map(|&x| LowSnrRow {
                    curve,
                    simulated: false,
                    snr_db: None,
                    ebn0_db: x,
                    capacity: metrics::low_snr_capacity(db_to_linear(x), s0, eb),
                    ci: None,
                })
                .collect();
            rows.extend(rhos.iter().enumerate().map(|(k, &rho)| LowSnrRow {
                curve,
                simulated: true,
                snr_db: Some(spec.snr_grid_db[k]),
                ebn0_db: linear_to_db(rho / c_mc[k]),
                capacity: c_mc[k],
                ci: Some(ci_sq[k].sqrt()),
            }));
            Ok((summary, rows))
        };
        run().map_err(|e| e.context(format!("low_snr curve {curve}")))
    });

    let mut curves = Vec::new();
    let mut rows = Vec::new();
    for r in results {
        let (c, r) = r?;
        curves.push(c);
        rows.extend(r);
    }
    Ok(LowSnr { curves, rows })
}

/// [`low_snr`] plus `low_snr.csv` and `low_snr.gp`.
pub fn run_low_snr(spec: &ExperimentSpec) -> Result<Artifacts> {
    low_snr(spec).map_err(|e| e.context("low_snr"))?.write(spec)
}
