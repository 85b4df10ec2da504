//! Scenario runners behind the command-line tool: capacity sweeps, low-SNR
//! curves, optimizer convergence and the validation report.
//!
//! Every runner is a pure function of its [`ExperimentSpec`]: randomness is
//! derived from `spec.seed` through indexed streams and parallel work is
//! collected in index order, so outputs are byte-identical across runs and
//! worker counts.

mod convergence;
mod lowsnr;
mod output;
mod sweep;
mod validate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::channel::stream_rng;
use crate::error::{Error, Result};
use crate::optimizer::{projected_gradient_ascent, Objective, OptimizerState, PgaOptions, Problem};
use crate::scene::{SceneMatrices, SystemConfig};
use crate::simstack::{CompositeResponse, PhaseProfile};

pub use convergence::{convergence, run_convergence, Convergence, StartSummary};
pub use lowsnr::{low_snr, run_low_snr, LowSnr, LowSnrCurve, LowSnrRow};
pub use output::{format_number, Artifacts};
pub use sweep::{capacity_sweep, run_capacity_sweep, CapacitySweep, CurveSummary, SweepRow};
pub use validate::{
    bound_validity_case, check_names, run_check, run_validate, validate, CheckResult, ValidationReport, FD_STEP,
    GRADIENT_PROBES, MAX_REDRAWS, RANDOM_BOUND_CONFIGS, WISHART_DRAWS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    CapacitySweep,
    LowSnr,
    Convergence,
    Validate,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::CapacitySweep, Scenario::LowSnr, Scenario::Convergence, Scenario::Validate];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::CapacitySweep => "capacity_sweep",
            Scenario::LowSnr => "low_snr",
            Scenario::Convergence => "convergence",
            Scenario::Validate => "validate",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

/// Which link a curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    /// Phases optimized at the reference SNR.
    Optimized,
    /// Average over independent uniformly random phase profiles.
    RandomPhase,
    /// `P = D = I`, `R = I`: an `N_r × N_t` iid channel with the same
    /// per-entry fading variance as the SIM link.
    IidBaseline,
}

impl Curve {
    pub const ALL: [Curve; 3] = [Curve::Optimized, Curve::RandomPhase, Curve::IidBaseline];

    pub fn name(&self) -> &'static str {
        match self {
            Curve::Optimized => "optimized",
            Curve::RandomPhase => "random_phase",
            Curve::IidBaseline => "iid_baseline",
        }
    }
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Curve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Curve::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown curve '{s}' (optimized, random_phase, iid_baseline)"))
        })
    }
}

/// Everything a scenario run depends on.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    #[serde(skip)]
    pub config: SystemConfig,
    /// Where the config came from; informational only.
    pub config_path: Option<String>,
    pub overrides: Vec<(String, String)>,
    /// SNR grid `10 log10 ρ`. For the capacity sweep this is `P/σ²` with
    /// the physical path loss in the channel; for the low-SNR scenario it
    /// refers to the unit-variance channel.
    pub snr_grid_db: Vec<f64>,
    pub ebn0_grid_db: Vec<f64>,
    pub mn_pairs: Vec<(usize, usize)>,
    pub curves: Vec<Curve>,
    /// SNR at which phases are optimized; `None` means mid-grid for the
    /// sweep and the configured `P/σ²` otherwise.
    pub reference_snr_db: Option<f64>,
    pub objective: Objective,
    pub pga: PgaOptions,
    pub starts: usize,
    /// Number of random profiles averaged by the random-phase curve.
    pub random_profiles: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
    /// Added (relative to the finite-difference scale) to every analytic
    /// angle derivative in the gradient checks; a negative control for the
    /// validation report.
    #[serde(skip)]
    #[doc(hidden)]
    pub gradient_bias: f64,
}

impl ExperimentSpec {
    /// Scenario defaults around `config`; the seed defaults to
    /// `config.seed`.
    pub fn new(scenario: Scenario, config: SystemConfig) -> Self {
        let snr_grid_db = match scenario {
            Scenario::LowSnr => (0..=8).map(|i| -20.0 + 2.5 * i as f64).collect(),
            _ => (0..=6).map(|i| 100.0 + 10.0 * i as f64).collect(),
        };
        let seed = config.seed;
        Self {
            scenario,
            mn_pairs: vec![(40, 100), (20, 100), (40, 50)],
            config,
            config_path: None,
            overrides: Vec::new(),
            snr_grid_db,
            ebn0_grid_db: (0..=36).map(|i| -12.0 + i as f64).collect(),
            curves: Curve::ALL.to_vec(),
            reference_snr_db: None,
            objective: Objective::Clb,
            pga: PgaOptions::default(),
            starts: 5,
            random_profiles: 10,
            trials: 1000,
            seed,
            output_dir: None,
            gradient_bias: 0.0,
        }
    }

    pub fn with_output_dir(mut self, dir: impl AsRef<Path>) -> Self {
        self.output_dir = Some(dir.as_ref().to_path_buf());
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        for (name, grid) in [("snr_grid_db", &self.snr_grid_db), ("ebn0_grid_db", &self.ebn0_grid_db)] {
            if grid.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} is empty")));
            }
            if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and strictly increasing")));
            }
        }
        if self.mn_pairs.is_empty() || self.mn_pairs.iter().any(|&(m, n)| m == 0 || n == 0) {
            return Err(Error::InvalidConfig("every (M, N) pair must be positive".into()));
        }
        if self.curves.is_empty() {
            return Err(Error::InvalidConfig("no curves selected".into()));
        }
        if self.trials < 2 {
            return Err(Error::InvalidConfig("need at least 2 Monte Carlo trials".into()));
        }
        if self.starts == 0 || self.random_profiles == 0 {
            return Err(Error::InvalidConfig("starts and random_profiles must be positive".into()));
        }
        if !(self.pga.step > 0.0) || !(self.pga.tol >= 0.0) {
            return Err(Error::InvalidConfig("optimizer step must be positive and tol non-negative".into()));
        }
        if let Some(r) = self.reference_snr_db {
            if !r.is_finite() {
                return Err(Error::InvalidConfig("reference SNR must be finite".into()));
            }
        }
        Ok(())
    }

    /// Mid-grid SNR unless overridden.
    pub fn sweep_reference_db(&self) -> f64 {
        self.reference_snr_db.unwrap_or(self.snr_grid_db[self.snr_grid_db.len() / 2])
    }

    /// `config` with the per-layer meta-atom counts replaced.
    pub fn config_for_pair(&self, m: usize, n: usize) -> Result<SystemConfig> {
        let mut cfg = self.config.clone();
        cfg.m_tx = m;
        cfg.n_rx = n;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Scene for `config`, with scenario context on failure.
fn build_scene(config: &SystemConfig, what: &str) -> Result<SceneMatrices> {
    SceneMatrices::build(config).map_err(|e| e.context(format!("building scene for {what}")))
}

/// Maps `f` over `0..n`, in parallel when enabled, returning results in
/// index order.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// A curve made concrete: the scene it lives on and the composite
/// responses it averages over.
pub(crate) struct Realized {
    pub curve: Curve,
    pub scene: SceneMatrices,
    pub composites: Vec<CompositeResponse>,
    pub optimizer: Option<OptimizerState>,
}

/// Builds one curve on `scene`. Stream 0 of `seed` initializes the
/// optimizer; streams `1..=random_profiles` draw the random profiles.
pub(crate) fn realize(
    spec: &ExperimentSpec,
    scene: &SceneMatrices,
    curve: Curve,
    reference_rho: f64,
    seed: u64,
) -> Result<Realized> {
    match curve {
        Curve::Optimized => {
            let problem = Problem::new(scene, spec.objective, reference_rho);
            let init = PhaseProfile::random(scene, &mut stream_rng(seed, 0));
            let state =
                projected_gradient_ascent(&problem, init, &spec.pga).map_err(|e| e.context("optimizing phases"))?;
            let comp = CompositeResponse::compose(&state.profile, scene)?;
            Ok(Realized { curve, scene: scene.clone(), composites: vec![comp], optimizer: Some(state) })
        }
        Curve::RandomPhase => {
            let composites = (0..spec.random_profiles)
                .map(|j| {
                    let profile = PhaseProfile::random(scene, &mut stream_rng(seed, 1 + j as u64));
                    CompositeResponse::compose(&profile, scene)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Realized { curve, scene: scene.clone(), composites, optimizer: None })
        }
        Curve::IidBaseline => {
            let iid = iid_scene(scene)?;
            let comp = CompositeResponse::compose(&PhaseProfile::zeros_for(&iid), &iid)?;
            Ok(Realized { curve, scene: iid, composites: vec![comp], optimizer: None })
        }
    }
}

/// `N_r × N_t` channel with `P = D = I`, `R = I` and the same per-entry
/// fading variance `β/M` as `scene`.
pub fn iid_scene(scene: &SceneMatrices) -> Result<SceneMatrices> {
    let (n_t, n_r) = (scene.n_t(), scene.n_r());
    SceneMatrices::identity(n_t, n_r, 1, 1, scene.entry_variance() * n_t as f64)
}

/// In-memory result of one scenario.
#[derive(Debug, Clone)]
pub enum Outcome {
    CapacitySweep(CapacitySweep),
    LowSnr(LowSnr),
    Convergence(Convergence),
    Validate(ValidationReport),
}

/// Runs whichever scenario `spec` names, writes its files and returns the
/// result alongside the written paths.
pub fn execute(spec: &ExperimentSpec) -> Result<(Outcome, Artifacts)> {
    let name = spec.scenario.name();
    Ok(match spec.scenario {
        Scenario::CapacitySweep => {
            let r = capacity_sweep(spec).map_err(|e| e.context(name))?;
            let files = r.write(spec)?;
            (Outcome::CapacitySweep(r), files)
        }
        Scenario::LowSnr => {
            let r = low_snr(spec).map_err(|e| e.context(name))?;
            let files = r.write(spec)?;
            (Outcome::LowSnr(r), files)
        }
        Scenario::Convergence => {
            let r = convergence(spec).map_err(|e| e.context(name))?;
            let files = r.write(spec)?;
            (Outcome::Convergence(r), files)
        }
        Scenario::Validate => {
            let (files, report) = run_validate(spec)?;
            (Outcome::Validate(report), files)
        }
    })
}

/// Runs whichever scenario `spec` names and writes its files.
pub fn run(spec: &ExperimentSpec) -> Result<Artifacts> {
    execute(spec).map(|(_, files)| files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        for c in Curve::ALL {
            assert_eq!(c.name().parse::<Curve>().unwrap(), c);
        }
        assert!("fig1".parse::<Scenario>().is_err());
    }

    #[test]
    fn defaults_are_valid() {
        for s in Scenario::ALL {
            ExperimentSpec::new(s, SystemConfig::default()).validate().unwrap();
        }
        let spec = ExperimentSpec::new(Scenario::CapacitySweep, SystemConfig::default());
        assert_eq!(spec.sweep_reference_db(), 130.0);
        assert!((spec.sweep_reference_db() - spec.config.snr_db()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_grids_and_pairs() {
        let mut spec = ExperimentSpec::new(Scenario::CapacitySweep, SystemConfig::default());
        spec.snr_grid_db = vec![0.0, 10.0, 10.0];
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(Scenario::CapacitySweep, SystemConfig::default());
        spec.mn_pairs = vec![(40, 0)];
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(Scenario::CapacitySweep, SystemConfig::default());
        spec.trials = 1;
        assert!(spec.validate().is_err());
    }
}
