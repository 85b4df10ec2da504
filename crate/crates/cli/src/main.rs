//! `simcap`: runs one experiment scenario and writes its CSV, gnuplot
//! script or validation report.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use simcap::experiments::{self, Curve, ExperimentSpec, Outcome, Scenario};
use simcap::optimizer::Objective;
use simcap::scene::SystemConfig;

mod grid;

use grid::{Grid, Pairs};

#[derive(Debug, Parser)]
#[command(
    name = "simcap",
    version,
    about = "Capacity, low-SNR and optimizer studies of stacked-metasurface MIMO links"
)]
struct Args {
    /// capacity_sweep, low_snr, convergence or validate
    scenario: Scenario,

    /// JSON link configuration; absent fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one configuration field, e.g. `--set m_tx=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = grid::parse_override)]
    overrides: Vec<(String, String)>,

    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Master seed; defaults to the configuration's `seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<usize>,

    /// Optimizer objective: clb (maximize the capacity bound), ebmin
    /// (minimize Eb/N0_min) or s0 (maximize the wideband slope).
    #[arg(long)]
    objective: Option<Objective>,

    /// Optimizer iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,

    /// Relative-change stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Initial normalized step.
    #[arg(long)]
    step: Option<f64>,

    /// Only halve rejected steps; never grow accepted ones.
    #[arg(long)]
    no_expand: bool,

    /// Random starts for the convergence scenario.
    #[arg(long)]
    starts: Option<usize>,

    /// Random phase profiles averaged by the random-phase curve.
    #[arg(long)]
    random_profiles: Option<usize>,

    /// SNR grid in dB: `start:stop:step` (inclusive) or a comma list.
    #[arg(long, value_parser = grid::parse_grid, allow_hyphen_values = true)]
    snr_grid: Option<Grid>,

    /// Eb/N0 grid in dB for the analytic low-SNR curves.
    #[arg(long, value_parser = grid::parse_grid, allow_hyphen_values = true)]
    ebn0_grid: Option<Grid>,

    /// `(M, N)` pairs for the capacity sweep, e.g. `40x100,20x100`.
    #[arg(long, value_parser = grid::parse_pairs)]
    pairs: Option<Pairs>,

    /// Comma list of curves: optimized, random_phase, iid_baseline.
    #[arg(long, value_delimiter = ',')]
    curves: Option<Vec<Curve>>,

    /// SNR (dB) at which phases are optimized.
    #[arg(long, allow_hyphen_values = true)]
    reference_snr: Option<f64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn build_spec(args: &Args) -> Result<ExperimentSpec, String> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?,
        None => String::new(),
    };
    let config = SystemConfig::from_json_with_overrides(&text, &args.overrides).map_err(|e| e.to_string())?;
    let mut spec = ExperimentSpec::new(args.scenario, config).with_output_dir(&args.out);
    spec.config_path = args.config.as_ref().map(|p| p.display().to_string());
    spec.overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if let Some(objective) = args.objective {
        spec.objective = objective;
    }
    if let Some(max_iters) = args.max_iters {
        spec.pga.max_iters = max_iters;
    }
    if let Some(tol) = args.tol {
        spec.pga.tol = tol;
    }
    if let Some(step) = args.step {
        spec.pga.step = step;
    }
    spec.pga.expand = !args.no_expand;
    if let Some(starts) = args.starts {
        spec.starts = starts;
    }
    if let Some(n) = args.random_profiles {
        spec.random_profiles = n;
    }
    if let Some(Grid(grid)) = &args.snr_grid {
        spec.snr_grid_db = grid.clone();
    }
    if let Some(Grid(grid)) = &args.ebn0_grid {
        spec.ebn0_grid_db = grid.clone();
    }
    if let Some(Pairs(pairs)) = &args.pairs {
        spec.mn_pairs = pairs.clone();
    }
    if let Some(curves) = &args.curves {
        spec.curves = curves.clone();
    }
    spec.reference_snr_db = args.reference_snr.or(spec.reference_snr_db);
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn print_outcome(outcome: &Outcome) {
    match outcome {
        Outcome::CapacitySweep(sweep) => {
            for c in &sweep.curves {
                println!(
                    "({:>3}, {:>3}) {:<13} C_LB at {} dB = {:.6e} bit/s/Hz",
                    c.m, c.n, c.curve, c.reference_snr_db, c.c_lb_ref
                );
            }
        }
        Outcome::LowSnr(low) => {
            for c in &low.curves {
                println!("{:<13} Eb/N0_min = {:8.3} dB  S0 = {:.4}", c.curve, c.ebn0min_db, c.s0);
            }
        }
        Outcome::Convergence(conv) => {
            for s in &conv.starts {
                let stab = s.stabilization.map_or("-".to_string(), |i| i.to_string());
                println!(
                    "start {}: {:.6e} -> {:.6e} in {} iterations ({:?}, stabilized at {stab})",
                    s.start, s.initial, s.final_value, s.iterations, s.status
                );
            }
            println!(
                "best {:.6e}, random mean {:.6e}, spread {:.2}%",
                conv.best(),
                conv.random_mean,
                100.0 * conv.spread()
            );
        }
        Outcome::Validate(report) => {
            for (name, r) in &report.checks {
                let verdict = if r.pass { "PASS" } else { "FAIL" };
                match &r.error {
                    Some(e) => println!("{verdict} {name:<28} error: {e}"),
                    None => println!("{verdict} {name:<28} {:.3e} (threshold {:.0e})", r.metric, r.threshold),
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("simcap: {e}");
            return ExitCode::from(2);
        }
    }
    let spec = match build_spec(&args) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("simcap: {e}");
            return ExitCode::from(2);
        }
    };
    match experiments::execute(&spec) {
        Ok((outcome, artifacts)) => {
            print_outcome(&outcome);
            for path in &artifacts.files {
                println!("wrote {}", path.display());
            }
            match outcome {
                Outcome::Validate(report) if !report.all_pass() => ExitCode::FAILURE,
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("simcap: {e}");
            ExitCode::FAILURE
        }
    }
}
