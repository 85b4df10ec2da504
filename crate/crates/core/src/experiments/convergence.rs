//! Objective value per iteration of projected gradient ascent from several
//! random initializations.

use std::fmt::Write as _;

use serde::Serialize;

use super::output::{format_number, gnuplot_header, write_files, Cell, Csv};
use super::{build_scene, realize, Artifacts, Curve, ExperimentSpec};
use crate::channel::stream_seed;
use crate::error::Result;
use crate::optimizer::{multi_start, OptimizerState, Problem, StopReason};
use crate::scene::db_to_linear;

/// Relative change below which a trajectory counts as stabilized.
pub const STABILIZATION_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StartSummary {
    pub start: usize,
    pub initial: f64,
    pub final_value: f64,
    pub iterations: usize,
    pub status: StopReason,
    /// First iteration with relative change below [`STABILIZATION_TOL`].
    pub stabilization: Option<usize>,
    /// No step decreased (or, for minimization, increased) the objective.
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct Convergence {
    pub runs: Vec<OptimizerState>,
    pub starts: Vec<StartSummary>,
    pub reference_snr_db: f64,
    /// Mean objective over `random_profiles` random phase profiles.
    pub random_mean: f64,
}

impl Convergence {
    /// Writes `convergence.csv` and `convergence.gp` into the spec's output
    /// directory, if any.
    pub fn write(&self, spec: &ExperimentSpec) -> Result<Artifacts> {
        let csv_name = "convergence.csv";
        write_files(
            spec,
            &[(csv_name.to_string(), self.csv(spec)), ("convergence.gp".to_string(), self.plot_script(spec, csv_name))],
        )
    }

    pub const CSV_HEADER: &'static str = "start,iter,objective,step_tx,step_rx";

    pub fn best(&self) -> f64 {
        let maximize = self.runs.first().is_none_or(|r| r.objective.maximize());
        let values = self.starts.iter().map(|s| s.final_value);
        if maximize {
            values.fold(f64::NEG_INFINITY, f64::max)
        } else {
            values.fold(f64::INFINITY, f64::min)
        }
    }

    /// Largest relative gap between any start's final value and the best.
    pub fn spread(&self) -> f64 {
        let best = self.best();
        self.starts.iter().map(|s| (s.final_value - best).abs() / best.abs()).fold(0.0, f64::max)
    }

    pub fn csv(&self, spec: &ExperimentSpec) -> String {
        let mut notes = vec![format!(
            "objective={} reference_snr_db={} random_mean={}",
            spec.objective.name(),
            format_number(self.reference_snr_db),
            format_number(self.random_mean)
        )];
        for s in &self.starts {
            notes.push(format!(
                "start={} final={} iterations={} stabilized_at={} monotone={}",
                s.start,
                format_number(s.final_value),
                s.iterations,
                s.stabilization.map_or("none".to_string(), |i| i.to_string()),
                s.monotone
            ));
        }
        let mut csv = Csv::new(spec, &notes, Self::CSV_HEADER);
        for (k, run) in self.runs.iter().enumerate() {
            for rec in &run.trajectory {
                csv.row(&[
                    Cell::Int(k as u64),
                    Cell::Int(rec.iter as u64),
                    Cell::Num(rec.objective),
                    Cell::Num(rec.step_tx),
                    Cell::Num(rec.step_rx),
                ]);
            }
        }
        csv.finish()
    }

    pub fn plot_script(&self, spec: &ExperimentSpec, csv_name: &str) -> String {
        let mut gp = gnuplot_header(spec, csv_name, "iteration", spec.objective.name());
        let plots: Vec<String> = (0..self.runs.len())
            .map(|k| format!("data using 2:($1=={k} ? $3 : NaN) with linespoints title 'start {k}'"))
            .collect();
        writeln!(gp, "plot {}", plots.join(", \\\n     ")).unwrap();
        gp
    }
}

/// Runs the optimizer from `spec.starts` random initializations on the
/// configured link at `reference_snr_db` (default the configured `P/σ²`).
pub fn convergence(spec: &ExperimentSpec) -> Result<Convergence> {
    spec.validate()?;
    let scene = build_scene(&spec.config, "convergence")?;
    let reference_snr_db = spec.reference_snr_db.unwrap_or(spec.config.snr_db());
    let problem = Problem::new(&scene, spec.objective, db_to_linear(reference_snr_db));
    let runs = multi_start(&problem, spec.starts, stream_seed(spec.seed, 0), &spec.pga)?;

    let random = realize(spec, &scene, Curve::RandomPhase, problem.rho, stream_seed(spec.seed, 1))?;
    let mut random_mean = 0.0;
    for comp in &random.composites {
        random_mean += problem.evaluate_composite(comp)? / random.composites.len() as f64;
    }

    let starts = runs
        .iter()
        .enumerate()
        .map(|(k, run)| {
            let values = run.values();
            StartSummary {
                start: k,
                initial: values[0],
                final_value: run.objective_value,
                iterations: run.iteration,
                status: run.status,
                stabilization: run.stabilization_iteration(STABILIZATION_TOL),
                monotone: values.windows(2).all(|w| !run.objective.improves(w[0], w[1])),
            }
        })
        .collect();
    Ok(Convergence { runs, starts, reference_snr_db, random_mean })
}

/// [`convergence`] plus `convergence.csv` and `convergence.gp`.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<Artifacts> {
    convergence(spec).map_err(|e| e.context("convergence"))?.write(spec)
}
