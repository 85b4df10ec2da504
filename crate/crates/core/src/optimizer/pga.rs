//! Projected gradient ascent over all layer phase vectors at once.

use serde::Serialize;

use super::gradients::{angle_derivatives, Gradient, Objective, Problem};
use crate::channel::stream_rng;
use crate::error::{Error, Result};
use crate::linalg::{c, CVec};
use crate::simstack::{angles_to_weights, project_unit_modulus, CompositeResponse, PhaseProfile, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgaOptions {
    pub max_iters: usize,
    /// Stop once `|f_i − f_{i−1}| ≤ tol · |f_{i−1}|`.
    pub tol: f64,
    /// Initial step; the raw gradient of each side is divided by its
    /// largest entry magnitude before scaling by this.
    pub step: f64,
    pub max_halvings: usize,
    /// When the initial step is accepted outright, keep doubling it while
    /// the objective keeps improving (at most `max_halvings` times).
    pub expand: bool,
    /// Relative stationarity threshold on `max_m |∂f/∂θ_m| / |f|`.
    pub stationary_tol: f64,
}

impl Default for PgaOptions {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-5, step: 1.0, max_halvings: 30, expand: true, stationary_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Backtracking exhausted without improvement.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    /// Effective multiplier μ applied to the raw transmit gradient.
    pub step_tx: f64,
    pub step_rx: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub profile: PhaseProfile,
    pub objective: Objective,
    pub objective_value: f64,
    pub iteration: usize,
    pub step_sizes: [f64; 2],
    /// Entry 0 is the initial point.
    pub trajectory: Vec<IterationRecord>,
    pub status: StopReason,
}

impl OptimizerState {
    pub fn values(&self) -> Vec<f64> {
        self.trajectory.iter().map(|r| r.objective).collect()
    }

    /// First iteration whose relative change drops below `tol`, if any.
    pub fn stabilization_iteration(&self, tol: f64) -> Option<usize> {
        self.trajectory
            .windows(2)
            .find(|w| (w[1].objective - w[0].objective).abs() <= tol * w[0].objective.abs())
            .map(|w| w[1].iter)
    }
}

fn step_side(profile: &mut PhaseProfile, base: &PhaseProfile, grad: &Gradient, side: Side, mu: f64) {
    if mu == 0.0 {
        return;
    }
    for (layer, g) in grad.side(side).iter().enumerate() {
        let phi = angles_to_weights(&base.layers(side)[layer]);
        let moved: CVec = &phi + g * c(mu, 0.0);
        profile.set_from_weights(side, layer + 1, &project_unit_modulus(&moved));
    }
}

fn relative_slope(profile: &PhaseProfile, grad: &Gradient, value: f64) -> f64 {
    let mut worst = 0.0f64;
    for side in [Side::Transmit, Side::Receive] {
        for (angles, g) in profile.layers(side).iter().zip(grad.side(side)) {
            for d in angle_derivatives(angles, g) {
                worst = worst.max(d.abs());
            }
        }
    }
    worst / value.abs().max(f64::MIN_POSITIVE)
}

/// Simultaneous projected gradient steps on every transmit and receive
/// layer with halving until the objective strictly improves; a step accepted
/// outright is optionally grown by doubling while it keeps improving.
pub fn projected_gradient_ascent(problem: &Problem, init: PhaseProfile, opts: &PgaOptions) -> Result<OptimizerState> {
    if !(opts.step > 0.0) || !(opts.tol >= 0.0) {
        return Err(Error::InvalidArgument("step must be positive and tol non-negative".into()));
    }
    init.check_dimensions(problem.scene)?;
    let objective = problem.objective;
    let sign = if objective.maximize() { 1.0 } else { -1.0 };

    let mut profile = init;
    let mut value = problem.evaluate(&profile)?;
    let mut trajectory = vec![IterationRecord { iter: 0, objective: value, step_tx: 0.0, step_rx: 0.0 }];
    let mut steps = [0.0, 0.0];
    let mut status = StopReason::MaxIterations;

    for iter in 1..=opts.max_iters {
        let comp = CompositeResponse::compose(&profile, problem.scene)?;
        let mut grad = problem.gradient_with(&profile, &comp)?;
        if sign < 0.0 {
            for g in grad.tx.iter_mut().chain(grad.rx.iter_mut()) {
                g.iter_mut().for_each(|z| *z = -*z);
            }
        }
        if relative_slope(&profile, &grad, value) <= opts.stationary_tol {
            trajectory.push(IterationRecord { iter, objective: value, step_tx: 0.0, step_rx: 0.0 });
            status = StopReason::Converged;
            break;
        }
        let scale_tx = grad.max_abs(Side::Transmit);
        let scale_rx = grad.max_abs(Side::Receive);
        let trial_at = |factor: f64| -> Result<Option<(PhaseProfile, f64, f64, f64)>> {
            let mu_tx = if scale_tx > 0.0 { factor / scale_tx } else { 0.0 };
            let mu_rx = if scale_rx > 0.0 { factor / scale_rx } else { 0.0 };
            let mut candidate = profile.clone();
            step_side(&mut candidate, &profile, &grad, Side::Transmit, mu_tx);
            step_side(&mut candidate, &profile, &grad, Side::Receive, mu_rx);
            match problem.evaluate(&candidate) {
                Ok(v) => Ok(Some((candidate, v, mu_tx, mu_rx))),
                // a rank-deficient trial point is just a rejected step
                Err(Error::RankDeficient(_)) => Ok(None),
                Err(e) => Err(e.context(format!("iteration {iter}"))),
            }
        };
        let mut factor = opts.step;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            if let Some(t) = trial_at(factor)?.filter(|t| objective.improves(t.1, value)) {
                accepted = Some(t);
                break;
            }
            factor *= 0.5;
        }
        if opts.expand && accepted.is_some() && factor == opts.step {
            for _ in 0..opts.max_halvings {
                factor *= 2.0;
                let best = accepted.as_ref().map_or(value, |t: &(PhaseProfile, f64, f64, f64)| t.1);
                match trial_at(factor)?.filter(|t| objective.improves(t.1, best)) {
                    Some(t) => accepted = Some(t),
                    None => break,
                }
            }
        }
        let Some((candidate, trial, mu_tx, mu_rx)) = accepted else {
            status = StopReason::Stalled;
            break;
        };
        let delta = (trial - value).abs();
        let previous = value;
        profile = candidate;
        value = trial;
        steps = [mu_tx, mu_rx];
        trajectory.push(IterationRecord { iter, objective: value, step_tx: mu_tx, step_rx: mu_rx });
        if delta <= opts.tol * previous.abs() {
            status = StopReason::Converged;
            break;
        }
    }

    let iteration = trajectory.last().map(|r| r.iter).unwrap_or(0);
    Ok(OptimizerState { profile, objective, objective_value: value, iteration, step_sizes: steps, trajectory, status })
}

/// Independent runs from `starts` random initializations; start `k` draws
/// its phases from stream `k` of `seed`.
pub fn multi_start(problem: &Problem, starts: usize, seed: u64, opts: &PgaOptions) -> Result<Vec<OptimizerState>> {
    let run = |k: usize| {
        let init = PhaseProfile::random(problem.scene, &mut stream_rng(seed, k as u64));
        projected_gradient_ascent(problem, init, opts)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..starts).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..starts).map(run).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{SceneMatrices, SystemConfig};
    use crate::simstack::max_modulus_deviation;

    fn small_scene() -> SceneMatrices {
        let cfg = SystemConfig::from_json_str(
            r#"{"m_tx": 12, "n_rx": 16, "n_t": 4, "n_r": 4, "layers_tx": 2, "layers_rx": 2}"#,
        )
        .unwrap();
        SceneMatrices::build(&cfg).unwrap()
    }

    fn assert_monotone(state: &OptimizerState) {
        for w in state.trajectory.windows(2) {
            if state.objective.maximize() {
                assert!(w[1].objective >= w[0].objective);
            } else {
                assert!(w[1].objective <= w[0].objective);
            }
        }
    }

    #[test]
    fn all_objectives_monotone_and_feasible() {
        let scene = small_scene();
        let rho = SystemConfig::default().snr_linear();
        for objective in [Objective::Clb, Objective::Ebmin, Objective::S0] {
            let problem = Problem::new(&scene, objective, rho);
            let init = PhaseProfile::random(&scene, &mut stream_rng(4, 0));
            let start = problem.evaluate(&init).unwrap();
            let opts = PgaOptions { max_iters: 15, ..Default::default() };
            let state = projected_gradient_ascent(&problem, init, &opts).unwrap();
            assert_monotone(&state);
            assert!(state.iteration <= 15);
            assert!(objective.improves(state.objective_value, start), "{objective:?} did not improve");
            for side in [Side::Transmit, Side::Receive] {
                for angles in state.profile.layers(side) {
                    assert!(max_modulus_deviation(&angles_to_weights(angles)) <= 2.0 * f64::EPSILON);
                }
            }
        }
    }

    #[test]
    fn stationary_start_stops_after_one_iteration() {
        let scene = SceneMatrices::identity(3, 3, 1, 1, 1.0).unwrap();
        let problem = Problem::new(&scene, Objective::S0, 0.0);
        let init = PhaseProfile::random(&scene, &mut stream_rng(2, 0));
        let state = projected_gradient_ascent(&problem, init, &PgaOptions::default()).unwrap();
        assert_eq!(state.iteration, 1);
        assert_eq!(state.status, StopReason::Converged);
        assert!((state.trajectory[1].objective - state.trajectory[0].objective).abs() < 1e-5);
    }

    #[test]
    fn bad_options_rejected() {
        let scene = SceneMatrices::identity(2, 2, 1, 1, 1.0).unwrap();
        let problem = Problem::new(&scene, Objective::Clb, 1.0);
        let opts = PgaOptions { step: 0.0, ..Default::default() };
        assert!(projected_gradient_ascent(&problem, PhaseProfile::zeros_for(&scene), &opts).is_err());
    }

    #[test]
    fn multi_start_is_deterministic() {
        let scene = small_scene();
        let problem = Problem::new(&scene, Objective::Ebmin, 0.0);
        let opts = PgaOptions { max_iters: 5, ..Default::default() };
        let a = multi_start(&problem, 3, 9, &opts).unwrap();
        let b = multi_start(&problem, 3, 9, &opts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values(), y.values());
        }
    }
}
