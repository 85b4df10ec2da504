//! Every numerical oracle in one machine-readable report.
//!
//! Each check yields a scalar `metric` and passes when
//! `metric ≤ threshold`. Failures are report entries, not errors.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use rand::Rng;
use serde::Serialize;

use super::output::write_files;
use super::{par_map, Artifacts, ExperimentSpec};
use crate::channel::{self, stream_rng, stream_seed};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::metrics::{self, FadingModel};
use crate::optimizer::{
    angle_derivatives, finite_diff_gradient, max_relative_error, projected_gradient_ascent, Objective, PgaOptions,
    Problem,
};
use crate::scene::{SceneMatrices, SystemConfig};
use crate::simstack::{angles_to_weights, max_modulus_deviation, CompositeResponse, PhaseProfile, Side};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub pass: bool,
    pub metric: f64,
    pub threshold: f64,
    /// Why the check could not be evaluated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckResult {
    /// Passes when `metric ≤ threshold`; a non-finite metric fails.
    pub fn at_most(metric: f64, threshold: f64) -> Self {
        Self { pass: metric <= threshold, metric, threshold, error: None }
    }

    fn errored(e: Error) -> Self {
        Self { pass: false, metric: f64::NAN, threshold: f64::NAN, error: Some(e.to_string()) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: BTreeMap<String, CheckResult>,
    pub config: SystemConfig,
    pub seed: u64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Central-difference step (radians). Large enough that rounding in the
/// bound's exponent, whose constant part is of order 10³ at realistic path
/// loss, stays well below the truncation error.
pub const FD_STEP: f64 = 1e-4;
/// Finite-difference probes per objective.
pub const GRADIENT_PROBES: usize = 20;
/// Draws per Wishart case.
pub const WISHART_DRAWS: usize = 100_000;
/// Draws for the correlation-imprint check.
pub const IMPRINT_DRAWS: usize = 100_000;
/// Seeds for the per-realization Minkowski check.
pub const MINKOWSKI_SEEDS: usize = 1000;
/// Randomized configurations in the bound-validity sweep.
pub const RANDOM_BOUND_CONFIGS: usize = 10;

type Check = (&'static str, fn(&ExperimentSpec, u64) -> Result<CheckResult>);

const CHECKS: [Check; 12] = [
    ("gradient_clb", |s, seed| gradient_check(s, seed, Objective::Clb, 1e-5)),
    ("gradient_ebmin", |s, seed| gradient_check(s, seed, Objective::Ebmin, 1e-5)),
    ("gradient_s0", |s, seed| gradient_check(s, seed, Objective::S0, 1e-4)),
    ("wishart_identity", wishart_check),
    ("minkowski_per_realization", minkowski_check),
    ("identity_closed_form", identity_closed_form),
    ("identity_bound_validity", identity_bound_validity),
    ("bound_validity", bound_validity),
    ("correlation_imprint", correlation_imprint),
    ("dispersion_bounds", dispersion_bounds),
    ("low_snr_iid_reduction", low_snr_reduction),
    ("optimizer_monotone_feasible", optimizer_monotone),
];

/// Names of all checks, in report order of evaluation.
pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|(name, _)| *name)
}

/// Runs the single check `name` exactly as [`validate`] would.
pub fn run_check(spec: &ExperimentSpec, name: &str) -> Option<CheckResult> {
    let i = CHECKS.iter().position(|(n, _)| *n == name)?;
    Some(CHECKS[i].1(spec, stream_seed(spec.seed, i as u64)).unwrap_or_else(CheckResult::errored))
}

/// Runs every check; check `i` draws its randomness from stream `i` of
/// `spec.seed`.
pub fn validate(spec: &ExperimentSpec) -> ValidationReport {
    let results = par_map(CHECKS.len(), |i| {
        let (_, check) = CHECKS[i];
        check(spec, stream_seed(spec.seed, i as u64)).unwrap_or_else(CheckResult::errored)
    });
    let checks = CHECKS.iter().map(|(name, _)| name.to_string()).zip(results).collect();
    ValidationReport { checks, config: spec.config.clone(), seed: spec.seed }
}

/// [`validate`] plus `report.json`.
pub fn run_validate(spec: &ExperimentSpec) -> Result<(Artifacts, ValidationReport)> {
    let report = validate(spec);
    let artifacts = write_files(spec, &[("report.json".to_string(), report.to_json())])?;
    Ok((artifacts, report))
}

/// Small physical link with random sizes; every layer count ≥ 2 so each
/// objective depends on at least one layer per side.
fn random_small_config(rng: &mut impl Rng) -> Result<SystemConfig> {
    let n_t = rng.random_range(2..=4);
    let n_r = rng.random_range(2..=4);
    let text = format!(
        r#"{{"n_t": {n_t}, "n_r": {n_r}, "m_tx": {}, "n_rx": {}, "layers_tx": {}, "layers_rx": {}}}"#,
        rng.random_range(n_t + 2..=16),
        rng.random_range(n_r + 2..=20),
        rng.random_range(2..=3),
        rng.random_range(2..=3),
    );
    SystemConfig::from_json_str(&text)
}

/// Probe `k`: a random small link and phase profile on which `objective`
/// is defined (rank-deficient draws are redrawn).
fn gradient_probe(seed: u64, k: usize, objective: Objective) -> Result<(SceneMatrices, PhaseProfile, f64)> {
    let probe_seed = stream_seed(seed, k as u64);
    let mut last_err = None;
    for attempt in 0..MAX_REDRAWS {
        let mut rng = stream_rng(probe_seed, attempt);
        let cfg = random_small_config(&mut rng)?;
        let scene = SceneMatrices::build(&cfg)?;
        let profile = PhaseProfile::random(&scene, &mut rng);
        match Problem::new(&scene, objective, cfg.snr_linear()).evaluate(&profile) {
            Ok(_) => return Ok((scene, profile, cfg.snr_linear())),
            Err(e @ Error::RankDeficient(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt").context(format!("gradient probe {k}")))
}

/// Analytic angle derivatives against central differences over every layer
/// of both stacks. Errors are relative to the largest finite-difference
/// entry of the probe, since layers the objective ignores have an
/// identically zero gradient.
fn gradient_check(spec: &ExperimentSpec, seed: u64, objective: Objective, threshold: f64) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for k in 0..GRADIENT_PROBES {
        let (scene, profile, rho) = gradient_probe(seed, k, objective)?;
        let problem = Problem::new(&scene, objective, rho);
        let grad = problem.gradient(&profile)?;
        let mut pairs = Vec::new();
        for side in [Side::Transmit, Side::Receive] {
            for layer in 1..=profile.layers(side).len() {
                let analytic = angle_derivatives(&profile.layers(side)[layer - 1], &grad.side(side)[layer - 1]);
                let fd = finite_diff_gradient(|p| problem.evaluate(p), &profile, side, layer, FD_STEP)?;
                pairs.push((analytic, fd));
            }
        }
        let scale = pairs.iter().flat_map(|(_, fd)| fd.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        for (analytic, fd) in &pairs {
            let biased: Vec<f64> = analytic.iter().map(|a| a + spec.gradient_bias * scale).collect();
            worst = worst.max(max_relative_error(&biased, fd, scale));
        }
    }
    Ok(CheckResult::at_most(worst, threshold))
}

/// Sums `per_chunk(i)` over `chunks` chunks in index order.
fn chunked_sum<F>(chunks: usize, per_chunk: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let parts = par_map(chunks, per_chunk);
    let mut total: Vec<f64> = Vec::new();
    for part in parts {
        let part = part?;
        if total.is_empty() {
            total = vec![0.0; part.len()];
        }
        total.iter_mut().zip(&part).for_each(|(t, p)| *t += p);
    }
    Ok(total)
}

/// `E[ln det(G̃ᴴG̃)]` against its digamma closed form for unit-variance
/// `t × s` matrices. The metric is the relative error of the geometric
/// mean determinant `exp(E ln det)`, the quantity that enters the bound.
fn wishart_check(_: &ExperimentSpec, seed: u64) -> Result<CheckResult> {
    const CHUNKS: usize = 100;
    let mut worst = 0.0f64;
    for (case, &(s, t)) in [(2usize, 2usize), (2, 4), (4, 8)].iter().enumerate() {
        let case_seed = stream_seed(seed, case as u64);
        let per = WISHART_DRAWS / CHUNKS;
        let total = chunked_sum(CHUNKS, |chunk| {
            let mut acc = 0.0;
            for i in 0..per {
                let mut rng = stream_rng(case_seed, (chunk * per + i) as u64);
                let g = channel::fill_gaussian(&mut rng, t, s, 1.0);
                acc += linalg::hermitian_logdet(&(g.adjoint() * &g)).ok_or(Error::RankDeficient("Wishart sample"))?;
            }
            Ok(vec![acc])
        })?;
        let mc = total[0] / (per * CHUNKS) as f64;
        let exact = metrics::wishart_logdet_mean(s, t, 1.0)?;
        worst = worst.max(((mc - exact).exp() - 1.0).abs());
    }
    Ok(CheckResult::at_most(worst, 0.01))
}

/// `det(I + (ρ/n) H Hᴴ)^{1/n} ≥ 1 + (ρ/n) det(H Hᴴ)^{1/n}` for every draw
/// of a 2×2 identity-coupled link. Metric: largest relative violation.
fn minkowski_check(_: &ExperimentSpec, seed: u64) -> Result<CheckResult> {
    let scene = SceneMatrices::identity(2, 2, 1, 1, 2.0)?;
    let comp = CompositeResponse::compose(&PhaseProfile::zeros_for(&scene), &scene)?;
    let n = 2.0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..MINKOWSKI_SEEDS {
        let draw = channel::ChannelDraw::draw(&scene, &comp, stream_seed(seed, i as u64))?;
        let hh = &draw.h * draw.h.adjoint();
        for rho in [0.1, 1.0, 10.0, 1000.0] {
            let lhs_mat = linalg::identity(2) + &hh * c(rho / n, 0.0);
            let lhs = (linalg::hermitian_logdet_eig(&lhs_mat)?.unwrap_or(f64::NEG_INFINITY) / n).exp();
            let det_hh = linalg::hermitian_logdet_eig(&hh)?.map_or(0.0, |l| (l / n).exp());
            let rhs = 1.0 + rho / n * det_hh;
            worst = worst.max((rhs - lhs) / rhs);
        }
    }
    Ok(CheckResult::at_most(worst, 1e-12))
}

/// `n log2(1 + (ρ/n) exp((1/n) Σψ(n − i)))`: the bound for an `n × n`
/// unit-variance iid channel.
fn iid_closed_form(n: usize, rho: f64) -> Result<f64> {
    let mut psi = 0.0;
    for i in 0..n {
        psi += metrics::digamma((n - i) as f64)?;
    }
    let nf = n as f64;
    Ok(nf * (1.0 + rho / nf * (psi / nf).exp()).log2())
}

fn identity_link(n: usize) -> Result<(SceneMatrices, CompositeResponse)> {
    // β/M = 1 with M = n
    let scene = SceneMatrices::identity(n, n, 1, 1, n as f64)?;
    let comp = CompositeResponse::compose(&PhaseProfile::zeros_for(&scene), &scene)?;
    Ok((scene, comp))
}

fn identity_closed_form(_: &ExperimentSpec, _: u64) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for n in [2, 4] {
        let (scene, comp) = identity_link(n)?;
        for rho in [0.1, 1.0, 10.0] {
            let bound = metrics::capacity_lower_bound(&scene, &comp, rho)?.value;
            worst = worst.max((bound - iid_closed_form(n, rho)?).abs());
        }
    }
    Ok(CheckResult::at_most(worst, 1e-12))
}

fn identity_bound_validity(spec: &ExperimentSpec, seed: u64) -> Result<CheckResult> {
    let rhos = [0.1, 1.0, 10.0];
    let mut worst = f64::NEG_INFINITY;
    for n in [2, 4] {
        let (scene, comp) = identity_link(n)?;
        let mc = FadingModel::sim(&scene, &comp).ergodic_capacity(&rhos, spec.trials, stream_seed(seed, n as u64))?;
        for (k, &rho) in rhos.iter().enumerate() {
            let bound = metrics::capacity_lower_bound(&scene, &comp, rho)?.value;
            worst = worst.max(bound - mc[k].mean - mc[k].ci_halfwidth);
        }
    }
    Ok(CheckResult::at_most(worst, 0.0))
}

/// Redraws allowed when a random phase profile or configuration yields a
/// rank-deficient composite (the bound is undefined there).
pub const MAX_REDRAWS: u64 = 20;

/// Case `k` of the bound-validity sweep: the spec's own config for `k = 0`,
/// otherwise random `M ∈ [8, 48]`, `N ∈ [8, 64]`, `N_t = N_r ∈ {2, 4, 8}`,
/// all with random phases. Attempts whose composite is rank-deficient are
/// redrawn (phases, and for `k > 0` the configuration too); the number of
/// redraws is returned alongside.
pub fn bound_validity_case(
    spec: &ExperimentSpec,
    seed: u64,
    k: usize,
) -> Result<(SystemConfig, SceneMatrices, CompositeResponse, u64)> {
    let case_seed = stream_seed(seed, k as u64);
    let mut last_err = None;
    for attempt in 0..MAX_REDRAWS {
        let mut rng = stream_rng(case_seed, attempt);
        let mut cfg = spec.config.clone();
        if k > 0 {
            let antennas = [2, 4, 8][rng.random_range(0..3)];
            cfg.n_t = antennas;
            cfg.n_r = antennas;
            cfg.m_tx = rng.random_range(8..=48);
            cfg.n_rx = rng.random_range(8..=64);
            cfg.validate()?;
        }
        let scene = SceneMatrices::build(&cfg)?;
        let profile = PhaseProfile::random(&scene, &mut rng);
        let comp = CompositeResponse::compose(&profile, &scene)?;
        match metrics::BoundTerms::compute(&scene, &comp) {
            Ok(_) => return Ok((cfg, scene, comp, attempt)),
            Err(e @ Error::RankDeficient(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt").context(format!("bound-validity case {k}")))
}

/// `C_LB ≤ MC + CI` with random phases at the configured SNR. Metric:
/// largest `C_LB − (mean + half-width)`.
fn bound_validity(spec: &ExperimentSpec, seed: u64) -> Result<CheckResult> {
    let margins = par_map(RANDOM_BOUND_CONFIGS + 1, |k| -> Result<f64> {
        let (cfg, scene, comp, _) = bound_validity_case(spec, seed, k)?;
        let rho = cfg.snr_linear();
        let bound = metrics::capacity_lower_bound(&scene, &comp, rho)?.value;
        let mc = metrics::ergodic_capacity_mc(&scene, &comp, rho, spec.trials, stream_seed(seed, 1000 + k as u64))?;
        Ok(bound - mc.mean - mc.ci_halfwidth)
    });
    let mut worst = f64::NEG_INFINITY;
    for m in margins {
        worst = worst.max(m?);
    }
    Ok(CheckResult::at_most(worst, 0.0))
}

/// Sample row and column covariances of `G` on an 8×8 link converge to
/// `β R_R` and `(β/M) N R_T`. Metric: larger Frobenius-relative error.
fn correlation_imprint(spec: &ExperimentSpec, seed: u64) -> Result<CheckResult> {
    const CHUNKS: usize = 100;
    let mut cfg = spec.config.clone();
    cfg.m_tx = 8;
    cfg.n_rx = 8;
    cfg.n_t = 2;
    cfg.n_r = 2;
    let scene = SceneMatrices::build(&cfg)?;
    let (m, n) = (scene.m(), scene.n());
    let var = scene.entry_variance();
    let per = IMPRINT_DRAWS / CHUNKS;
    let total = chunked_sum(CHUNKS, |chunk| {
        let mut rows = CMat::zeros(n, n);
        let mut cols = CMat::zeros(m, m);
        for i in 0..per {
            let g_tilde = channel::draw_gtilde(stream_seed(seed, (chunk * per + i) as u64), n, m, var)?;
            let g = channel::correlate(&g_tilde, &scene)?;
            rows += &g * g.adjoint();
            cols += g.adjoint() * &g;
        }
        Ok(rows.iter().chain(cols.iter()).flat_map(|z| [z.re, z.im]).collect())
    })?;
    let draws = (per * CHUNKS) as f64;
    let unpack = |offset: usize, dim: usize| {
        CMat::from_iterator(
            dim,
            dim,
            (0..dim * dim).map(|k| c(total[offset + 2 * k], total[offset + 2 * k + 1]) / draws),
        )
    };
    let rows = unpack(0, n);
    let cols = unpack(2 * n * n, m);
    let err_r = linalg::rel_frobenius_error(&(rows / c(var * m as f64, 0.0)), &scene.r_r);
    let err_t = linalg::rel_frobenius_error(&(cols / c(var * n as f64, 0.0)), &scene.r_t);
    Ok(CheckResult::at_most(err_r.max(err_t), 0.05))
}

/// `ζ(I) = 1`, `ζ(diag(2, 0)) = 2` and `1 ≤ ζ ≤ n` on random PSD
/// matrices. Metric: largest violation.
fn dispersion_bounds(_: &ExperimentSpec, seed: u64) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for n in [1, 3, 8] {
        worst = worst.max((metrics::dispersion(&linalg::identity(n))? - 1.0).abs());
    }
    let d = linalg::diag(&linalg::CVec::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]));
    worst = worst.max((metrics::dispersion(&d)? - 2.0).abs());
    for k in 0..100 {
        let mut rng = stream_rng(seed, k);
        let n = rng.random_range(1..=8);
        let rank = rng.random_range(1..=n);
        let a = channel::fill_gaussian(&mut rng, n, rank, 1.0);
        let zeta = metrics::dispersion(&(&a * a.adjoint()))?;
        worst = worst.max(1.0 - zeta).max(zeta - n as f64);
    }
    Ok(CheckResult::at_most(worst, 1e-12))
}

/// Identity links: `Eb/N0_min = ln2 / N_r`, `S0 = 2 N_t N_r / (N_t + N_r)`.
fn low_snr_reduction(_: &ExperimentSpec, _: u64) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for (n_t, n_r) in [(1, 1), (2, 2), (2, 4), (4, 8), (8, 8)] {
        let scene = SceneMatrices::identity(n_t, n_r, 2, 2, 1.0)?;
        let comp = CompositeResponse::compose(&PhaseProfile::zeros_for(&scene), &scene)?;
        let eb = metrics::min_energy_per_bit(&scene, &comp)?.linear;
        let s0 = metrics::wideband_slope(&scene, &comp)?;
        let (t, r) = (n_t as f64, n_r as f64);
        worst = worst.max((eb - LN_2 / r).abs()).max((s0 - 2.0 * t * r / (t + r)).abs());
    }
    Ok(CheckResult::at_most(worst, 1e-12))
}

/// Short runs of every objective on a small link: no step moves the
/// objective the wrong way and every iterate stays unit-modulus. Metric:
/// number of violations.
fn optimizer_monotone(_: &ExperimentSpec, seed: u64) -> Result<CheckResult> {
    let cfg =
        SystemConfig::from_json_str(r#"{"n_t": 2, "n_r": 2, "m_tx": 9, "n_rx": 12, "layers_tx": 3, "layers_rx": 2}"#)?;
    let scene = SceneMatrices::build(&cfg)?;
    let opts = PgaOptions { max_iters: 20, ..PgaOptions::default() };
    let mut violations = 0usize;
    for (k, objective) in [Objective::Clb, Objective::Ebmin, Objective::S0].into_iter().enumerate() {
        let problem = Problem::new(&scene, objective, cfg.snr_linear());
        let init = PhaseProfile::random(&scene, &mut stream_rng(seed, k as u64));
        let state = projected_gradient_ascent(&problem, init, &opts)?;
        let values = state.values();
        violations += values.windows(2).filter(|w| objective.improves(w[0], w[1])).count();
        for side in [Side::Transmit, Side::Receive] {
            for angles in state.profile.layers(side) {
                if max_modulus_deviation(&angles_to_weights(angles)) > 1e-15 {
                    violations += 1;
                }
            }
        }
    }
    Ok(CheckResult::at_most(violations as f64, 0.0))
}
