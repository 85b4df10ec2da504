//! Phase profiles of both metasurface stacks and the composite responses
//! `P = Φ^L W^L ⋯ Φ^1 W^1` and `D = U^1 Ξ^1 ⋯ U^K Ξ^K`.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::scene::SceneMatrices;

/// Per-layer phase angles in radians. Complex weights are derived on
/// demand, so they are unit-modulus by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseProfile {
    /// `tx[l - 1]` holds θ^l (length M).
    pub tx: Vec<Vec<f64>>,
    /// `rx[k - 1]` holds ϑ^k (length N).
    pub rx: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Transmit,
    Receive,
}

impl PhaseProfile {
    pub fn zeros(layers_tx: usize, m: usize, layers_rx: usize, n: usize) -> Self {
        Self { tx: vec![vec![0.0; m]; layers_tx], rx: vec![vec![0.0; n]; layers_rx] }
    }

    pub fn zeros_for(scene: &SceneMatrices) -> Self {
        Self::zeros(scene.layers_tx(), scene.m(), scene.layers_rx(), scene.n())
    }

    /// Independent uniform phases on [0, 2π).
    pub fn random<R: Rng + ?Sized>(scene: &SceneMatrices, rng: &mut R) -> Self {
        let mut draw = |len: usize| (0..len).map(|_| rng.random::<f64>() * TAU).collect::<Vec<_>>();
        let tx = (0..scene.layers_tx()).map(|_| draw(scene.m())).collect();
        let rx = (0..scene.layers_rx()).map(|_| draw(scene.n())).collect();
        Self { tx, rx }
    }

    pub fn layers(&self, side: Side) -> &[Vec<f64>] {
        match side {
            Side::Transmit => &self.tx,
            Side::Receive => &self.rx,
        }
    }

    pub fn layers_mut(&mut self, side: Side) -> &mut [Vec<f64>] {
        match side {
            Side::Transmit => &mut self.tx,
            Side::Receive => &mut self.rx,
        }
    }

    /// Unit-modulus weights `e^{jθ}` of one layer (1-based index).
    pub fn weights(&self, side: Side, layer: usize) -> Result<CVec> {
        let layers = self.layers(side);
        if layer == 0 || layer > layers.len() {
            return Err(Error::LayerOutOfRange { index: layer, count: layers.len() });
        }
        Ok(angles_to_weights(&layers[layer - 1]))
    }

    /// Sets one layer's angles from unit-modulus weights.
    pub fn set_from_weights(&mut self, side: Side, layer: usize, weights: &CVec) {
        self.layers_mut(side)[layer - 1] = weights.iter().map(|w| w.arg().rem_euclid(TAU)).collect();
    }

    pub fn check_dimensions(&self, scene: &SceneMatrices) -> Result<()> {
        let ok_tx = self.tx.len() == scene.layers_tx() && self.tx.iter().all(|v| v.len() == scene.m());
        let ok_rx = self.rx.len() == scene.layers_rx() && self.rx.iter().all(|v| v.len() == scene.n());
        if ok_tx && ok_rx {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context: "phase profile",
                expected: format!(
                    "{}x{} transmit, {}x{} receive",
                    scene.layers_tx(),
                    scene.m(),
                    scene.layers_rx(),
                    scene.n()
                ),
                got: format!("{} transmit layers, {} receive layers", self.tx.len(), self.rx.len()),
            })
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profile serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn angles_to_weights(angles: &[f64]) -> CVec {
    CVec::from_iterator(angles.len(), angles.iter().map(|&t| c(t.cos(), t.sin())))
}

/// Entrywise projection onto the unit circle; zero maps to `1 + 0j`.
pub fn project_unit_modulus(v: &CVec) -> CVec {
    v.map(|z| {
        let r = z.norm();
        if r == 0.0 || !r.is_finite() {
            c(1.0, 0.0)
        } else {
            z / r
        }
    })
}

/// `P = Φ^L W^L ⋯ Φ^1 W^1` (M×N_t).
pub fn compose_transmit(profile: &PhaseProfile, scene: &SceneMatrices) -> Result<CMat> {
    profile.check_dimensions(scene)?;
    let mut p = linalg::scale_rows(&angles_to_weights(&profile.tx[0]), &scene.w[0]);
    for (w, theta) in scene.w.iter().zip(&profile.tx).skip(1) {
        p = linalg::scale_rows(&angles_to_weights(theta), &(w * &p));
    }
    Ok(p)
}

/// `D = U^1 Ξ^1 U^2 Ξ^2 ⋯ U^K Ξ^K` (N_r×N).
pub fn compose_receive(profile: &PhaseProfile, scene: &SceneMatrices) -> Result<CMat> {
    profile.check_dimensions(scene)?;
    let mut d = linalg::scale_cols(&scene.u[0], &angles_to_weights(&profile.rx[0]));
    for (u, theta) in scene.u.iter().zip(&profile.rx).skip(1) {
        d = linalg::scale_cols(&(d * u), &angles_to_weights(theta));
    }
    Ok(d)
}

/// Composite responses and their invertible Gram orientations.
#[derive(Debug, Clone)]
pub struct CompositeResponse {
    pub p: CMat,
    pub d: CMat,
    /// `PᴴP` (N_t×N_t).
    pub gram_p: CMat,
    /// `DDᴴ` (N_r×N_r).
    pub gram_d: CMat,
}

impl CompositeResponse {
    pub fn compose(profile: &PhaseProfile, scene: &SceneMatrices) -> Result<Self> {
        let p = compose_transmit(profile, scene)?;
        let d = compose_receive(profile, scene)?;
        Ok(Self::from_matrices(p, d))
    }

    pub fn from_matrices(p: CMat, d: CMat) -> Self {
        let gram_p = p.adjoint() * &p;
        let gram_d = &d * d.adjoint();
        Self { p, d, gram_p, gram_d }
    }
}

/// Factors around one layer: `P = left · diag(φ^l) · right` on the transmit
/// side, `D = left · diag(ξ^k) · right` on the receive side.
#[derive(Debug, Clone)]
pub struct PartialPair {
    pub left: CMat,
    pub right: CMat,
}

/// Transmit: `left = Φ^L W^L ⋯ Φ^{l+1} W^{l+1}`, `right = W^l Φ^{l−1} ⋯ Φ^1 W^1`.
/// Receive: `left = U^1 Ξ^1 ⋯ U^k`, `right = U^{k+1} Ξ^{k+1} ⋯ U^K Ξ^K`.
pub fn partial_products(
    profile: &PhaseProfile,
    scene: &SceneMatrices,
    side: Side,
    layer: usize,
) -> Result<PartialPair> {
    profile.check_dimensions(scene)?;
    match side {
        Side::Transmit => {
            let total = scene.layers_tx();
            if layer == 0 || layer > total {
                return Err(Error::LayerOutOfRange { index: layer, count: total });
            }
            let mut right = scene.w[0].clone();
            for idx in 1..layer {
                right = &scene.w[idx] * linalg::scale_rows(&angles_to_weights(&profile.tx[idx - 1]), &right);
            }
            let mut left = linalg::identity(scene.m());
            for idx in layer..total {
                left = linalg::scale_rows(&angles_to_weights(&profile.tx[idx]), &scene.w[idx]) * left;
            }
            Ok(PartialPair { left, right })
        }
        Side::Receive => {
            let total = scene.layers_rx();
            if layer == 0 || layer > total {
                return Err(Error::LayerOutOfRange { index: layer, count: total });
            }
            let mut left = scene.u[0].clone();
            for idx in 1..layer {
                left = linalg::scale_cols(&left, &angles_to_weights(&profile.rx[idx - 1])) * &scene.u[idx];
            }
            let mut right = linalg::identity(scene.n());
            for idx in (layer..total).rev() {
                right = linalg::scale_cols(&scene.u[idx], &angles_to_weights(&profile.rx[idx])) * right;
            }
            Ok(PartialPair { left, right })
        }
    }
}

/// `diag(right_l · kp · left_l)` for every transmit layer l = 1..L, where
/// `kp` is N_t×M.
///
/// Runs in O(L·M²·N_t) by carrying `kp · left_l` and `right_l` recursively.
pub(crate) fn transmit_layer_diagonals(profile: &PhaseProfile, scene: &SceneMatrices, kp: &CMat) -> Vec<CVec> {
    let total = scene.layers_tx();
    let weights: Vec<CVec> = profile.tx.iter().map(|t| angles_to_weights(t)).collect();
    // kp · left_l, built from l = L downwards.
    let mut k_left = vec![CMat::zeros(0, 0); total];
    k_left[total - 1] = kp.clone();
    for idx in (0..total - 1).rev() {
        // left_{l} = left_{l+1} Φ^{l+1} W^{l+1}
        let next = &k_left[idx + 1];
        k_left[idx] = linalg::scale_cols(next, &weights[idx + 1]) * &scene.w[idx + 1];
    }
    let mut out = Vec::with_capacity(total);
    let mut right = scene.w[0].clone();
    for idx in 0..total {
        if idx > 0 {
            right = &scene.w[idx] * linalg::scale_rows(&weights[idx - 1], &right);
        }
        out.push(linalg::diag_of_product(&right, &k_left[idx]));
    }
    out
}

/// Receive-side counterpart: `kd` is N×N_r, returns `diag(right_k · kd · left_k)`.
pub(crate) fn receive_layer_diagonals(profile: &PhaseProfile, scene: &SceneMatrices, kd: &CMat) -> Vec<CVec> {
    let total = scene.layers_rx();
    let weights: Vec<CVec> = profile.rx.iter().map(|t| angles_to_weights(t)).collect();
    // right_k · kd, built from k = K downwards.
    let mut right_k = vec![CMat::zeros(0, 0); total];
    right_k[total - 1] = kd.clone();
    for idx in (0..total - 1).rev() {
        // right_k = U^{k+1} Ξ^{k+1} right_{k+1}
        right_k[idx] = linalg::scale_cols(&scene.u[idx + 1], &weights[idx + 1]) * &right_k[idx + 1];
    }
    let mut out = Vec::with_capacity(total);
    let mut left = scene.u[0].clone();
    for idx in 0..total {
        if idx > 0 {
            left = linalg::scale_cols(&left, &weights[idx - 1]) * &scene.u[idx];
        }
        out.push(linalg::diag_of_product(&right_k[idx], &left));
    }
    out
}

pub fn max_modulus_deviation(v: &CVec) -> f64 {
    v.iter().map(|z: &C64| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneMatrices;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_scene(seed: u64, n_t: usize, m: usize, l: usize, n_r: usize, n: usize, k: usize) -> SceneMatrices {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = vec![random_matrix(&mut rng, m, n_t)];
        for _ in 1..l {
            w.push(random_matrix(&mut rng, m, m));
        }
        let mut u = vec![random_matrix(&mut rng, n_r, n)];
        for _ in 1..k {
            u.push(random_matrix(&mut rng, n, n));
        }
        SceneMatrices::from_parts(w, u, linalg::identity(m), linalg::identity(n), 1.0).unwrap()
    }

    #[test]
    fn single_identity_layer_is_identity() {
        let scene = SceneMatrices::identity(3, 3, 1, 1, 1.0).unwrap();
        let profile = PhaseProfile::zeros_for(&scene);
        assert_eq!(compose_transmit(&profile, &scene).unwrap(), linalg::identity(3));
        assert_eq!(compose_receive(&profile, &scene).unwrap(), linalg::identity(3));
    }

    #[test]
    fn phases_accumulate_across_layers() {
        let scene = SceneMatrices::identity(3, 3, 2, 1, 1.0).unwrap();
        let mut profile = PhaseProfile::zeros_for(&scene);
        for layer in &mut profile.tx {
            layer.iter_mut().for_each(|t| *t = std::f64::consts::FRAC_PI_2);
        }
        let p = compose_transmit(&profile, &scene).unwrap();
        assert!(linalg::rel_frobenius_error(&p, &(-linalg::identity(3))) < 1e-15);
    }

    #[test]
    fn common_receive_shift_factors_out() {
        let scene = random_scene(3, 2, 5, 2, 3, 6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let profile = PhaseProfile::random(&scene, &mut rng);
        let d = compose_receive(&profile, &scene).unwrap();
        let shift = 0.7;
        let mut shifted = profile.clone();
        shifted.rx.iter_mut().flatten().for_each(|t| *t += shift);
        let ds = compose_receive(&shifted, &scene).unwrap();
        let k = scene.layers_rx() as f64;
        let factor = c((k * shift).cos(), (k * shift).sin());
        assert!(linalg::rel_frobenius_error(&ds, &(d * factor)) < 1e-12);
    }

    #[test]
    fn partial_products_reassemble() {
        let scene = random_scene(5, 3, 6, 3, 2, 7, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let profile = PhaseProfile::random(&scene, &mut rng);
        let p = compose_transmit(&profile, &scene).unwrap();
        let d = compose_receive(&profile, &scene).unwrap();
        for l in 1..=3 {
            let pair = partial_products(&profile, &scene, Side::Transmit, l).unwrap();
            let phi = profile.weights(Side::Transmit, l).unwrap();
            let re = &pair.left * linalg::scale_rows(&phi, &pair.right);
            assert!(linalg::rel_frobenius_error(&re, &p) < 1e-12, "tx layer {l}");
        }
        for k in 1..=4 {
            let pair = partial_products(&profile, &scene, Side::Receive, k).unwrap();
            let xi = profile.weights(Side::Receive, k).unwrap();
            let re = linalg::scale_cols(&pair.left, &xi) * &pair.right;
            assert!(linalg::rel_frobenius_error(&re, &d) < 1e-12, "rx layer {k}");
        }
    }

    #[test]
    fn partial_product_edges() {
        let scene = random_scene(7, 2, 4, 3, 2, 4, 2);
        let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(1));
        let last = partial_products(&profile, &scene, Side::Transmit, 3).unwrap();
        assert_eq!(last.left, linalg::identity(4));
        let first = partial_products(&profile, &scene, Side::Transmit, 1).unwrap();
        assert_eq!(first.right, scene.w[0]);
        let rx_last = partial_products(&profile, &scene, Side::Receive, 2).unwrap();
        assert_eq!(rx_last.right, linalg::identity(4));
        assert!(matches!(partial_products(&profile, &scene, Side::Transmit, 4), Err(Error::LayerOutOfRange { .. })));
        assert!(partial_products(&profile, &scene, Side::Receive, 0).is_err());
    }

    #[test]
    fn recursive_diagonals_match_explicit_partials() {
        let scene = random_scene(13, 3, 5, 3, 2, 6, 3);
        let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(2));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let kp = random_matrix(&mut rng, 3, 5);
        let kd = random_matrix(&mut rng, 6, 2);
        let tx = transmit_layer_diagonals(&profile, &scene, &kp);
        for l in 1..=3 {
            let pair = partial_products(&profile, &scene, Side::Transmit, l).unwrap();
            let explicit = (&pair.right * &kp * &pair.left).diagonal();
            assert!((&tx[l - 1] - explicit).norm() < 1e-12);
        }
        let rx = receive_layer_diagonals(&profile, &scene, &kd);
        for k in 1..=3 {
            let pair = partial_products(&profile, &scene, Side::Receive, k).unwrap();
            let explicit = (&pair.right * &kd * &pair.left).diagonal();
            assert!((&rx[k - 1] - explicit).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_reference_values() {
        let v = CVec::from_vec(vec![c(2.0, 0.0), c(3.0, 4.0), c(0.0, 0.0)]);
        let p = project_unit_modulus(&v);
        assert_eq!(p[0], c(1.0, 0.0));
        assert!((p[1] - c(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(p[2], c(1.0, 0.0));
    }

    #[test]
    fn default_geometry_gram_is_nonsingular() {
        let cfg = crate::scene::SystemConfig::default();
        let scene = SceneMatrices::build(&cfg).unwrap();
        let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(21));
        let comp = CompositeResponse::compose(&profile, &scene).unwrap();
        assert!(linalg::hermitian_logdet(&comp.gram_p).is_some());
        assert!(linalg::hermitian_logdet(&comp.gram_d).is_some());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let scene = SceneMatrices::identity(3, 3, 2, 2, 1.0).unwrap();
        let profile = PhaseProfile::zeros(2, 4, 2, 3);
        assert!(matches!(compose_transmit(&profile, &scene), Err(Error::DimensionMismatch { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn projection_is_unit_modulus(re in proptest::collection::vec(-1e6f64..1e6, 1..40),
                                          im in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
                let n = re.len().min(im.len());
                let v = CVec::from_fn(n, |i, _| c(re[i], im[i]));
                let p = project_unit_modulus(&v);
                prop_assert!(max_modulus_deviation(&p) <= 2.0 * f64::EPSILON);
            }

            #[test]
            fn profile_json_round_trip_is_bit_exact(angles in proptest::collection::vec(0.0f64..TAU, 1..20)) {
                let profile = PhaseProfile { tx: vec![angles.clone(); 2], rx: vec![angles.iter().rev().cloned().collect()] };
                let back = PhaseProfile::from_json(&profile.to_json()).unwrap();
                for (a, b) in profile.tx.iter().flatten().zip(back.tx.iter().flatten()) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
                prop_assert_eq!(back, profile);
            }

            #[test]
            fn reassembly_holds_on_random_stacks(seed in 0u64..1000) {
                let scene = random_scene(seed, 2, 4, 3, 2, 5, 3);
                let profile = PhaseProfile::random(&scene, &mut ChaCha8Rng::seed_from_u64(seed + 1));
                let p = compose_transmit(&profile, &scene).unwrap();
                let d = compose_receive(&profile, &scene).unwrap();
                for l in 1..=3 {
                    let pair = partial_products(&profile, &scene, Side::Transmit, l).unwrap();
                    let phi = profile.weights(Side::Transmit, l).unwrap();
                    prop_assert!(linalg::rel_frobenius_error(&(&pair.left * linalg::scale_rows(&phi, &pair.right)), &p) < 1e-12);
                    let pair = partial_products(&profile, &scene, Side::Receive, l).unwrap();
                    let xi = profile.weights(Side::Receive, l).unwrap();
                    prop_assert!(linalg::rel_frobenius_error(&(linalg::scale_cols(&pair.left, &xi) * &pair.right), &d) < 1e-12);
                }
            }
        }
    }
}
