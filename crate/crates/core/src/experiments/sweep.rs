//! Capacity versus SNR for several meta-atom counts and three curves.

use std::fmt::Write as _;

use serde::Serialize;

use super::output::{gnuplot_header, write_files, Cell, Csv};
use super::{build_scene, par_map, realize, Artifacts, Curve, ExperimentSpec, Realized};
use crate::channel::stream_seed;
use crate::error::Result;
use crate::metrics::{self, CapacityReport, FadingModel};
use crate::optimizer::StopReason;
use crate::scene::{db_to_linear, linear_to_db};

/// One CSV row: a curve of one `(M, N)` pair at one SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub n: usize,
    pub curve: super::Curve,
    #[serde(flatten)]
    pub report: CapacityReport,
}

/// Per-curve facts that do not depend on the SNR grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSummary {
    pub m: usize,
    pub n: usize,
    pub curve: Curve,
    pub reference_snr_db: f64,
    /// Bound at the reference SNR (mean over profiles for random phases).
    pub c_lb_ref: f64,
    /// `ln V` at the reference SNR (mean over profiles).
    pub ln_v: f64,
    pub iterations: Option<usize>,
    pub status: Option<StopReason>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySweep {
    pub rows: Vec<SweepRow>,
    pub curves: Vec<CurveSummary>,
}

impl CapacitySweep {
    /// Writes `capacity_sweep.csv` and `capacity_sweep.gp` into the spec's output
    /// directory, if any.
    pub fn write(&self, spec: &ExperimentSpec) -> Result<Artifacts> {
        let csv_name = "capacity_sweep.csv";
        write_files(
            spec,
            &[
                (csv_name.to_string(), self.csv(spec)),
                ("capacity_sweep.gp".to_string(), self.plot_script(spec, csv_name)),
            ],
        )
    }

    pub const CSV_HEADER: &'static str = "m,n,curve,snr_db,c_lb,c_mc,ci,ebn0min_db,s0,trials,seed";

    pub fn row(&self, m: usize, n: usize, curve: Curve, snr_db: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.m == m && r.n == n && r.curve == curve && r.report.snr_db == snr_db)
    }

    pub fn summary(&self, m: usize, n: usize, curve: Curve) -> Option<&CurveSummary> {
        self.curves.iter().find(|c| c.m == m && c.n == n && c.curve == curve)
    }

    pub fn csv(&self, spec: &ExperimentSpec) -> String {
        let notes: Vec<String> = self
            .curves
            .iter()
            .map(|c| {
                let opt = match (c.iterations, c.status) {
                    (Some(i), Some(s)) => format!(" iterations={i} status={}", status_name(s)),
                    _ => String::new(),
                };
                format!(
                    "curve m={} n={} {} reference_snr_db={} c_lb_ref={} ln_v={}{opt}",
                    c.m,
                    c.n,
                    c.curve,
                    super::format_number(c.reference_snr_db),
                    super::format_number(c.c_lb_ref),
                    super::format_number(c.ln_v),
                )
            })
            .collect();
        let mut csv = Csv::new(spec, &notes, Self::CSV_HEADER);
        for r in &self.rows {
            let p = &r.report;
            csv.row(&[
                Cell::Int(r.m as u64),
                Cell::Int(r.n as u64),
                Cell::Text(r.curve.name()),
                Cell::Num(p.snr_db),
                Cell::Num(p.c_lb),
                Cell::Num(p.c_mc),
                Cell::Num(p.ci),
                Cell::Num(p.ebn0min_db),
                Cell::Num(p.s0),
                Cell::Int(p.trials as u64),
                Cell::Int(p.seed),
            ]);
        }
        csv.finish()
    }

    pub fn plot_script(&self, spec: &ExperimentSpec, csv_name: &str) -> String {
        let mut gp = gnuplot_header(spec, csv_name, "SNR (dB)", "capacity (bit/s/Hz)");
        writeln!(gp, "set logscale y").unwrap();
        let mut plots = Vec::new();
        for c in &self.curves {
            let sel = format!("($1=={} && $2=={} && strcol(3) eq '{}'", c.m, c.n, c.curve);
            plots.push(format!(
                "data using 4:({sel}) ? $5 : NaN) with lines title 'C_LB {} ({},{})'",
                c.curve, c.m, c.n
            ));
            plots.push(format!(
                "data using 4:({sel}) ? $6 : NaN):({sel}) ? $7 : NaN) with yerrorbars title 'MC {} ({},{})'",
                c.curve, c.m, c.n
            ));
        }
        writeln!(gp, "plot {}", plots.join(", \\\n     ")).unwrap();
        gp
    }
}

fn status_name(s: StopReason) -> &'static str {
    match s {
        StopReason::Converged => "converged",
        StopReason::MaxIterations => "max_iterations",
        StopReason::Stalled => "stalled",
    }
}

/// Optimizes (or draws) each curve's phases at the reference SNR, then
/// evaluates the bound and Monte Carlo capacity over the SNR grid.
///
/// Pair `p` uses stream `p` of `spec.seed`; within a pair every curve
/// shares the same Monte Carlo stream (common random numbers).
pub fn capacity_sweep(spec: &ExperimentSpec) -> Result<CapacitySweep> {
    spec.validate()?;
    let reference_db = spec.sweep_reference_db();
    let reference_rho = db_to_linear(reference_db);
    let rhos: Vec<f64> = spec.snr_grid_db.iter().map(|&x| db_to_linear(x)).collect();

    let tasks: Vec<(usize, Curve)> =
        (0..spec.mn_pairs.len()).flat_map(|p| spec.curves.iter().map(move |&c| (p, c))).collect();
    let results = par_map(tasks.len(), |i| {
        let (p, curve) = tasks[i];
        let (m, n) = spec.mn_pairs[p];
        let what = format!("capacity_sweep pair ({m}, {n}) curve {curve}");
        let run = || -> Result<(Vec<SweepRow>, CurveSummary)> {
            let cfg = spec.config_for_pair(m, n)?;
            let scene = build_scene(&cfg, &what)?;
            let pair_seed = stream_seed(spec.seed, p as u64);
            let realized = realize(spec, &scene, curve, reference_rho, pair_seed)?;
            evaluate_curve(spec, &realized, (m, n), reference_db, &rhos, stream_seed(pair_seed, 1000))
        };
        run().map_err(|e| e.context(what.clone()))
    });

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for r in results {
        let (r_rows, summary) = r?;
        rows.extend(r_rows);
        curves.push(summary);
    }
    Ok(CapacitySweep { rows, curves })
}

fn evaluate_curve(
    spec: &ExperimentSpec,
    realized: &Realized,
    (m, n): (usize, usize),
    reference_db: f64,
    rhos: &[f64],
    mc_seed: u64,
) -> Result<(Vec<SweepRow>, CurveSummary)> {
    let scene = &realized.scene;
    let count = realized.composites.len() as f64;
    let mut c_lb = vec![0.0; rhos.len()];
    let mut c_mc = vec![0.0; rhos.len()];
    let mut ci_sq = vec![0.0; rhos.len()];
    let mut v_term = 0.0;
    let mut ln_v = 0.0;
    let mut c_lb_ref = 0.0;
    let mut eb = 0.0;
    let mut s0 = 0.0;
    for comp in &realized.composites {
        for (k, &rho) in rhos.iter().enumerate() {
            c_lb[k] += metrics::capacity_lower_bound(scene, comp, rho)?.value / count;
        }
        let reference = metrics::capacity_lower_bound(scene, comp, db_to_linear(reference_db))?;
        c_lb_ref += reference.value / count;
        ln_v += reference.ln_v / count;
        v_term += reference.v() / count;
        let mc = FadingModel::sim(scene, comp).ergodic_capacity(rhos, spec.trials, mc_seed)?;
        for (k, est) in mc.iter().enumerate() {
            c_mc[k] += est.mean / count;
            // the average of independent-profile estimates
            ci_sq[k] += (est.ci_halfwidth / count).powi(2);
        }
        eb += metrics::min_energy_per_bit(scene, comp)?.linear / count;
        s0 += metrics::wideband_slope(scene, comp)? / count;
    }
    let rows = rhos
        .iter()
        .enumerate()
        .map(|(k, _)| SweepRow {
            m,
            n,
            curve: realized.curve,
            report: CapacityReport {
                snr_db: spec.snr_grid_db[k],
                c_lb: c_lb[k],
                c_mc: c_mc[k],
                ci: ci_sq[k].sqrt(),
                v_term,
                ebn0min_db: linear_to_db(eb),
                ebn0min_linear: eb,
                s0,
                trials: spec.trials,
                seed: spec.seed,
            },
        })
        .collect();
    let summary = CurveSummary {
        m,
        n,
        curve: realized.curve,
        reference_snr_db: reference_db,
        c_lb_ref,
        ln_v,
        iterations: realized.optimizer.as_ref().map(|s| s.iteration),
        status: realized.optimizer.as_ref().map(|s| s.status),
    };
    Ok((rows, summary))
}

/// [`capacity_sweep`] plus `capacity_sweep.csv` and `capacity_sweep.gp`.
pub fn run_capacity_sweep(spec: &ExperimentSpec) -> Result<Artifacts> {
    capacity_sweep(spec).map_err(|e| e.context("capacity_sweep"))?.write(spec)
}
