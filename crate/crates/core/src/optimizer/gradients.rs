//! Closed-form Wirtinger gradients of the three design objectives with
//! respect to every layer's phase weights, plus the finite-difference
//! oracle used to check them.
//!
//! Every objective `f` is real-valued, so its differential w.r.t. a
//! composite matrix can be written `df = 2 Re tr(K dX)`. Since
//! `dP = left_l · diag(dφ^l) · right_l`, the holomorphic derivative is
//! `∂f/∂φ^l = diag(right_l K left_l)` and the ascent direction returned here
//! is its conjugate `∂f/∂φ̄^l`. Angle derivatives follow from
//! `∂f/∂θ_m = 2 Im(φ̄_m · ∂f/∂φ̄_m)`.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::metrics::{self, BoundTerms};
use crate::scene::SceneMatrices;
use crate::simstack::{
    angles_to_weights, receive_layer_diagonals, transmit_layer_diagonals, CompositeResponse, PhaseProfile, Side,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Maximize the capacity lower bound.
    Clb,
    /// Minimize the minimum energy per bit.
    Ebmin,
    /// Maximize the wideband slope.
    S0,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Clb => "clb",
            Objective::Ebmin => "ebmin",
            Objective::S0 => "s0",
        }
    }

    pub fn maximize(&self) -> bool {
        !matches!(self, Objective::Ebmin)
    }

    /// `true` when `candidate` strictly improves on `current`.
    pub fn improves(&self, candidate: f64, current: f64) -> bool {
        if self.maximize() {
            candidate > current
        } else {
            candidate < current
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clb" => Ok(Objective::Clb),
            "ebmin" => Ok(Objective::Ebmin),
            "s0" => Ok(Objective::S0),
            other => Err(Error::InvalidArgument(format!("unknown objective '{other}' (clb, ebmin, s0)"))),
        }
    }
}

/// An objective bound to a scene and operating SNR.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub scene: &'a SceneMatrices,
    pub objective: Objective,
    /// Linear SNR; only the capacity bound depends on it.
    pub rho: f64,
}

/// Per-layer conjugate Wirtinger derivatives (`tx[l - 1]`, `rx[k - 1]`).
#[derive(Debug, Clone)]
pub struct Gradient {
    pub tx: Vec<CVec>,
    pub rx: Vec<CVec>,
}

impl Gradient {
    pub fn side(&self, side: Side) -> &[CVec] {
        match side {
            Side::Transmit => &self.tx,
            Side::Receive => &self.rx,
        }
    }

    pub fn max_abs(&self, side: Side) -> f64 {
        self.side(side).iter().flat_map(|v| v.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl<'a> Problem<'a> {
    pub fn new(scene: &'a SceneMatrices, objective: Objective, rho: f64) -> Self {
        Self { scene, objective, rho }
    }

    pub fn evaluate(&self, profile: &PhaseProfile) -> Result<f64> {
        let comp = CompositeResponse::compose(profile, self.scene)?;
        self.evaluate_composite(&comp)
    }

    pub fn evaluate_composite(&self, comp: &CompositeResponse) -> Result<f64> {
        let value = match self.objective {
            Objective::Clb => metrics::capacity_lower_bound(self.scene, comp, self.rho)?.value,
            Objective::Ebmin => metrics::min_energy_per_bit(self.scene, comp)?.linear,
            Objective::S0 => metrics::wideband_slope(self.scene, comp)?,
        };
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{} objective", self.objective.name())));
        }
        Ok(value)
    }

    /// `(K_P, K_D)` with `df = 2 Re tr(K_P dP) + 2 Re tr(K_D dD)`.
    fn sensitivity(&self, comp: &CompositeResponse) -> Result<(CMat, CMat)> {
        let scene = self.scene;
        let p = &comp.p;
        let d = &comp.d;
        match self.objective {
            Objective::Clb => {
                let terms = BoundTerms::compute(scene, comp)?;
                let lb = metrics::lower_bound_from_exponent(self.rho, scene.n_t(), terms.sum())?;
                let scale = c(lb.gradient_scale(self.rho, scene.n_t()), 0.0);
                let inv_p = linalg::hermitian_inverse(&comp.gram_p)
                    .ok_or(Error::RankDeficient("transmit Gram PᴴP is singular"))?;
                let inv_d = linalg::hermitian_inverse(&comp.gram_d)
                    .ok_or(Error::RankDeficient("receive Gram DDᴴ is singular"))?;
                Ok((inv_p * p.adjoint() * scale, d.adjoint() * inv_d * scale))
            }
            Objective::Ebmin => {
                let (t_tx, t_rx) = metrics::gain_traces(scene, comp);
                let eb = metrics::min_energy_per_bit_from_traces(scene.n_t(), t_tx, t_rx)?.linear;
                let k_p = p.adjoint() * &scene.r_t * c(-eb / t_tx, 0.0);
                let k_d = &scene.r_r * d.adjoint() * c(-eb / t_rx, 0.0);
                Ok((k_p, k_d))
            }
            Objective::S0 => {
                let (n_t, n_r) = (scene.n_t() as f64, scene.n_r() as f64);
                // Transmit: X = R_T P Pᴴ, tr(X^k) = tr((Pᴴ R_T P)^k).
                let ph_rt = p.adjoint() * &scene.r_t; // N_t×M
                let small_t = &ph_rt * p; // N_t×N_t
                let a_t = linalg::trace(&small_t).re;
                let b_t = linalg::trace_of_product(&small_t, &small_t).re;
                // Receive: Y = R_R Dᴴ D, tr(Y^k) = tr((D R_R Dᴴ)^k).
                let rr_dh = &scene.r_r * d.adjoint(); // N×N_r
                let small_r = d * &rr_dh; // N_r×N_r
                let a_r = linalg::trace(&small_r).re;
                let b_r = linalg::trace_of_product(&small_r, &small_r).re;
                if !(a_t > 0.0 && a_r > 0.0) {
                    return Err(Error::InvalidArgument("zero gain trace in wideband slope".into()));
                }
                let (m, n) = (scene.m() as f64, scene.n() as f64);
                let zeta_t = m * b_t / (a_t * a_t);
                let zeta_r = n * b_r / (a_r * a_r);
                let s0 = metrics::wideband_slope_from_dispersions(scene.n_t(), scene.n_r(), zeta_t, zeta_r)?;
                // dS0 = −S0²/(2 N_t N_r) (N_t dζ_T + N_r dζ_R)
                // dζ = dim · (d tr(X²)/a² − 2 b d tr(X)/a³)
                // d tr(X) ↔ Pᴴ R_T, d tr(X²) ↔ 2 Pᴴ R_T P Pᴴ R_T
                let coef_t = -s0 * s0 / (2.0 * n_r) * m;
                let k_p = (&small_t * &ph_rt * c(2.0 / (a_t * a_t), 0.0)
                    - &ph_rt * c(2.0 * b_t / (a_t * a_t * a_t), 0.0))
                    * c(coef_t, 0.0);
                let coef_r = -s0 * s0 / (2.0 * n_t) * n;
                let k_d = (&rr_dh * &small_r * c(2.0 / (a_r * a_r), 0.0)
                    - &rr_dh * c(2.0 * b_r / (a_r * a_r * a_r), 0.0))
                    * c(coef_r, 0.0);
                Ok((k_p, k_d))
            }
        }
    }

    /// Conjugate Wirtinger gradient for every layer on both sides.
    pub fn gradient(&self, profile: &PhaseProfile) -> Result<Gradient> {
        let comp = CompositeResponse::compose(profile, self.scene)?;
        self.gradient_with(profile, &comp)
    }

    pub fn gradient_with(&self, profile: &PhaseProfile, comp: &CompositeResponse) -> Result<Gradient> {
        let (k_p, k_d) = self.sensitivity(comp)?;
        let conj = |v: Vec<CVec>| v.into_iter().map(|g| g.map(|z| z.conj())).collect::<Vec<_>>();
        Ok(Gradient {
            tx: conj(transmit_layer_diagonals(profile, self.scene, &k_p)),
            rx: conj(receive_layer_diagonals(profile, self.scene, &k_d)),
        })
    }

    /// Gradient of a single layer (1-based).
    pub fn layer_gradient(&self, profile: &PhaseProfile, side: Side, layer: usize) -> Result<CVec> {
        let count = profile.layers(side).len();
        if layer == 0 || layer > count {
            return Err(Error::LayerOutOfRange { index: layer, count });
        }
        let mut grad = self.gradient(profile)?;
        Ok(match side {
            Side::Transmit => grad.tx.swap_remove(layer - 1),
            Side::Receive => grad.rx.swap_remove(layer - 1),
        })
    }
}

pub fn grad_clb_tx(profile: &PhaseProfile, scene: &SceneMatrices, rho: f64, layer: usize) -> Result<CVec> {
    Problem::new(scene, Objective::Clb, rho).layer_gradient(profile, Side::Transmit, layer)
}

pub fn grad_clb_rx(profile: &PhaseProfile, scene: &SceneMatrices, rho: f64, layer: usize) -> Result<CVec> {
    Problem::new(scene, Objective::Clb, rho).layer_gradient(profile, Side::Receive, layer)
}

pub fn grad_ebmin(profile: &PhaseProfile, scene: &SceneMatrices, side: Side, layer: usize) -> Result<CVec> {
    Problem::new(scene, Objective::Ebmin, 0.0).layer_gradient(profile, side, layer)
}

pub fn grad_s0(profile: &PhaseProfile, scene: &SceneMatrices, side: Side, layer: usize) -> Result<CVec> {
    Problem::new(scene, Objective::S0, 0.0).layer_gradient(profile, side, layer)
}

/// Maps conjugate Wirtinger derivatives to derivatives w.r.t. the phase
/// angles: `∂f/∂θ_m = 2 Im(φ̄_m g_m)`.
pub fn angle_derivatives(angles: &[f64], grad: &CVec) -> Vec<f64> {
    let phi = angles_to_weights(angles);
    phi.iter().zip(grad.iter()).map(|(p, g)| 2.0 * (p.conj() * g).im).collect()
}

/// Central differences `(f(θ + h e_m) − f(θ − h e_m)) / 2h` over every angle
/// of one layer.
pub fn finite_diff_gradient<F>(f: F, profile: &PhaseProfile, side: Side, layer: usize, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&PhaseProfile) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let count = profile.layers(side).len();
    if layer == 0 || layer > count {
        return Err(Error::LayerOutOfRange { index: layer, count });
    }
    let len = profile.layers(side)[layer - 1].len();
    let mut probe = profile.clone();
    let mut out = Vec::with_capacity(len);
    for m in 0..len {
        let base = profile.layers(side)[layer - 1][m];
        probe.layers_mut(side)[layer - 1][m] = base + h;
        let up = f(&probe)?;
        probe.layers_mut(side)[layer - 1][m] = base - h;
        let down = f(&probe)?;
        probe.layers_mut(side)[layer - 1][m] = base;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `max_m |a_m − b_m| / max(max_m |b_m|, floor)`.
///
/// Some layers carry an identically zero gradient (the bound ignores the
/// outermost layers, whose phases cancel in `PᴴP` and `DDᴴ`); `floor` keeps
/// the ratio meaningful there; the largest derivative over all layers is a
/// natural choice.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = b.iter().fold(floor.abs(), |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SystemConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_hpd(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        let a = random_matrix(rng, n, n);
        let mut r = &a * a.adjoint() + linalg::identity(n) * c(0.5, 0.0);
        // unit diagonal like a correlation matrix
        let d: Vec<f64> = (0..n).map(|i| r[(i, i)].re.sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                r[(i, j)] /= d[i] * d[j];
            }
        }
        r
    }

    fn synthetic_scene(seed: u64) -> SceneMatrices {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_t, m, l, n_r, n, k) = (2, 5, 3, 3, 6, 2);
        let mut w = vec![random_matrix(&mut rng, m, n_t)];
        for _ in 1..l {
            w.push(random_matrix(&mut rng, m, m));
        }
        let mut u = vec![random_matrix(&mut rng, n_r, n)];
        for _ in 1..k {
            u.push(random_matrix(&mut rng, n, n));
        }
        let r_t = random_hpd(&mut rng, m);
        let r_r = random_hpd(&mut rng, n);
        SceneMatrices::from_parts(w, u, r_t, r_r, 0.3).unwrap()
    }

    fn check_against_fd(problem: &Problem, profile: &PhaseProfile, tol: f64) {
        let grad = problem.gradient(profile).unwrap();
        let mut pairs = Vec::new();
        for side in [Side::Transmit, Side::Receive] {
            for layer in 1..=profile.layers(side).len() {
                let analytic = angle_derivatives(&profile.layers(side)[layer - 1], &grad.side(side)[layer - 1]);
                let fd = finite_diff_gradient(|p| problem.evaluate(p), profile, side, layer, 1e-6).unwrap();
                pairs.push((side, layer, analytic, fd));
            }
        }
        // layers the objective ignores are compared against the overall gradient scale
        let floor = pairs.iter().flat_map(|(_, _, _, fd)| fd.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        for (side, layer, analytic, fd) in pairs {
            let err = max_relative_error(&analytic, &fd, floor);
            assert!(err < tol, "{:?} {side:?} layer {layer}: rel err {err:.3e}", problem.objective);
        }
    }

    #[test]
    fn all_objectives_match_finite_differences_on_synthetic_scene() {
        for seed in 0..3 {
            let scene = synthetic_scene(seed);
            let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(seed + 100));
            check_against_fd(&Problem::new(&scene, Objective::Clb, 5.0), &profile, 1e-5);
            check_against_fd(&Problem::new(&scene, Objective::Ebmin, 0.0), &profile, 1e-5);
            check_against_fd(&Problem::new(&scene, Objective::S0, 0.0), &profile, 1e-4);
        }
    }

    #[test]
    fn bound_gradient_matches_fd_on_small_physical_scene() {
        let cfg = SystemConfig::from_json_str(
            r#"{"m_tx": 12, "n_rx": 16, "n_t": 4, "n_r": 4, "layers_tx": 2, "layers_rx": 3}"#,
        )
        .unwrap();
        let scene = SceneMatrices::build(&cfg).unwrap();
        let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(3));
        check_against_fd(&Problem::new(&scene, Objective::Clb, cfg.snr_linear()), &profile, 1e-5);
    }

    #[test]
    fn bound_ignores_outermost_layers() {
        let scene = synthetic_scene(4);
        let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(1));
        let problem = Problem::new(&scene, Objective::Clb, 2.0);
        let g = problem.gradient(&profile).unwrap();
        let scale = g.max_abs(Side::Transmit).max(g.max_abs(Side::Receive));
        // only a radial component remains, which the projection discards
        let tx = angle_derivatives(profile.tx.last().unwrap(), g.tx.last().unwrap());
        let rx = angle_derivatives(profile.rx.last().unwrap(), g.rx.last().unwrap());
        assert!(tx.iter().chain(&rx).all(|d| d.abs() < 1e-12 * scale));
    }

    #[test]
    fn zero_snr_gives_zero_bound_gradient() {
        let scene = synthetic_scene(1);
        let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(2));
        let g = Problem::new(&scene, Objective::Clb, 0.0).gradient(&profile).unwrap();
        assert_eq!(g.max_abs(Side::Transmit), 0.0);
        assert_eq!(g.max_abs(Side::Receive), 0.0);
    }

    #[test]
    fn single_identity_layer_bound_has_no_tangential_gradient() {
        let scene = SceneMatrices::identity(4, 4, 1, 1, 1.0).unwrap();
        let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(8));
        let g = grad_clb_tx(&profile, &scene, 3.0, 1).unwrap();
        let phi = profile.weights(Side::Transmit, 1).unwrap();
        let rotation: f64 = phi.iter().zip(g.iter()).map(|(p, g)| (p.conj() * g * c(0.0, 1.0)).re).sum();
        assert!(rotation.abs() < 1e-10);
        for d in angle_derivatives(&profile.tx[0], &g) {
            assert!(d.abs() < 1e-12);
        }
        let grx = grad_clb_rx(&profile, &scene, 3.0, 1).unwrap();
        for d in angle_derivatives(&profile.rx[0], &grx) {
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_square_stack_has_no_ebmin_tangential_gradient() {
        // unitary W (DFT), R = I: tr(P Pᴴ) is phase-independent
        let n = 4;
        let dft = CMat::from_fn(n, n, |i, j| {
            let a = -std::f64::consts::TAU * (i * j) as f64 / n as f64;
            c(a.cos(), a.sin()) / (n as f64).sqrt()
        });
        let scene = SceneMatrices::from_parts(
            vec![dft.clone(), dft.clone()],
            vec![dft.clone()],
            linalg::identity(n),
            linalg::identity(n),
            1.0,
        )
        .unwrap();
        let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(5));
        for layer in 1..=2 {
            let g = grad_ebmin(&profile, &scene, Side::Transmit, layer).unwrap();
            for d in angle_derivatives(&profile.tx[layer - 1], &g) {
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_square_is_stationary_for_s0() {
        let scene = SceneMatrices::identity(3, 3, 2, 2, 1.0).unwrap();
        let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(6));
        let problem = Problem::new(&scene, Objective::S0, 0.0);
        assert!((problem.evaluate(&profile).unwrap() - 3.0).abs() < 1e-12);
        let g = problem.gradient(&profile).unwrap();
        for side in [Side::Transmit, Side::Receive] {
            for (angles, grad) in profile.layers(side).iter().zip(g.side(side)) {
                for d in angle_derivatives(angles, grad) {
                    assert!(d.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn finite_difference_of_cosine() {
        // f(θ) = cos θ_1 on a one-element single-layer profile
        let scene = SceneMatrices::identity(1, 1, 1, 1, 1.0).unwrap();
        let mut profile = PhaseProfile::zeros_for(&scene);
        profile.tx[0][0] = 0.8;
        let f = |p: &PhaseProfile| Ok(p.tx[0][0].cos());
        let mut errors = Vec::new();
        for h in [1e-2, 1e-3] {
            let d = finite_diff_gradient(f, &profile, Side::Transmit, 1, h).unwrap()[0];
            let err = (d + 0.8f64.sin()).abs();
            assert!(err < h * h);
            errors.push(err);
        }
        // second-order: 10× smaller step, ~100× smaller error
        let ratio = errors[0] / errors[1];
        assert!((50.0..200.0).contains(&ratio), "ratio {ratio}");
        assert!(finite_diff_gradient(f, &profile, Side::Transmit, 1, 0.0).is_err());
        assert!(finite_diff_gradient(f, &profile, Side::Transmit, 2, 1e-3).is_err());
    }

    #[test]
    fn objective_parsing() {
        assert_eq!("clb".parse::<Objective>().unwrap(), Objective::Clb);
        assert_eq!("ebmin".parse::<Objective>().unwrap(), Objective::Ebmin);
        assert_eq!("s0".parse::<Objective>().unwrap(), Objective::S0);
        assert!("capacity".parse::<Objective>().is_err());
        assert!(Objective::Ebmin.improves(1.0, 2.0));
        assert!(Objective::Clb.improves(2.0, 1.0));
    }
}
