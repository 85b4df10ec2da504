//! Instantaneous and ergodic capacity, and the closed-form lower bound.

use std::f64::consts::LN_2;

use crate::channel::{self, stream_rng};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::metrics::special::digamma;
use crate::scene::SceneMatrices;
use crate::simstack::CompositeResponse;

/// `log2 det(I + (ρ/N_t) HᴴH)` in bits/s/Hz.
pub fn instantaneous_capacity(h: &CMat, rho: f64, n_t: usize) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("snr must be non-negative, got {rho}")));
    }
    if !linalg::is_finite(h) {
        return Err(Error::NonFinite("channel matrix".into()));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let cols = h.ncols();
    let mut a = h.adjoint() * h * c(rho / n_t as f64, 0.0);
    for i in 0..cols {
        a[(i, i)] += c(1.0, 0.0);
    }
    let logdet = linalg::hermitian_logdet(&a).ok_or_else(|| Error::NonFinite("capacity log-determinant".into()))?;
    Ok((logdet / LN_2).max(0.0))
}

/// Monte Carlo estimate with its 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub ci_halfwidth: f64,
    pub trials: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, ci_halfwidth: 1.96 * (var / n).sqrt(), trials: samples.len() }
    }
}

/// Channel of the form `H = A G̃ B` with iid CN(0, variance) `G̃`; both the
/// SIM link (`A = D R_R^{1/2}`, `B = R_T^{1/2} P`) and plain iid channels
/// (`A = B = I`) fit.
#[derive(Debug, Clone)]
pub struct FadingModel {
    pub left: CMat,
    pub right: CMat,
    pub variance: f64,
}

impl FadingModel {
    pub fn sim(scene: &SceneMatrices, composite: &CompositeResponse) -> Self {
        Self::sim_with_variance(scene, composite, scene.entry_variance())
    }

    pub fn sim_with_variance(scene: &SceneMatrices, composite: &CompositeResponse, variance: f64) -> Self {
        Self { left: &composite.d * &scene.r_r_sqrt, right: &scene.r_t_sqrt * &composite.p, variance }
    }

    /// `n_r × n_t` iid channel.
    pub fn iid(n_r: usize, n_t: usize, variance: f64) -> Self {
        Self { left: linalg::identity(n_r), right: linalg::identity(n_t), variance }
    }

    pub fn n_t(&self) -> usize {
        self.right.ncols()
    }

    pub fn draw(&self, master_seed: u64, trial: u64) -> CMat {
        let mut rng = stream_rng(master_seed, trial);
        let g = channel::fill_gaussian(&mut rng, self.left.ncols(), self.right.nrows(), self.variance);
        &self.left * g * &self.right
    }

    /// Per-trial capacities at each SNR in `rhos`; trial `i` uses stream `i`
    /// of `master_seed` regardless of scheduling.
    pub fn capacity_samples(&self, rhos: &[f64], trials: usize, master_seed: u64) -> Result<Vec<Vec<f64>>> {
        let n_t = self.n_t();
        let one = |i: usize| -> Result<Vec<f64>> {
            let h = self.draw(master_seed, i as u64);
            rhos.iter().map(|&rho| instantaneous_capacity(&h, rho, n_t)).collect()
        };
        #[cfg(feature = "parallel")]
        let per_trial: Vec<Result<Vec<f64>>> = {
            use rayon::prelude::*;
            (0..trials).into_par_iter().map(one).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let per_trial: Vec<Result<Vec<f64>>> = (0..trials).map(one).collect();

        let mut by_rho = vec![Vec::with_capacity(trials); rhos.len()];
        for row in per_trial {
            for (k, v) in row?.into_iter().enumerate() {
                by_rho[k].push(v);
            }
        }
        Ok(by_rho)
    }

    pub fn ergodic_capacity(&self, rhos: &[f64], trials: usize, master_seed: u64) -> Result<Vec<McEstimate>> {
        if trials < 2 {
            return Err(Error::InvalidArgument("need at least 2 trials".into()));
        }
        Ok(self.capacity_samples(rhos, trials, master_seed)?.iter().map(|s| McEstimate::from_samples(s)).collect())
    }
}

/// Ergodic capacity of the SIM link by Monte Carlo.
pub fn ergodic_capacity_mc(
    scene: &SceneMatrices,
    composite: &CompositeResponse,
    rho: f64,
    trials: usize,
    master_seed: u64,
) -> Result<McEstimate> {
    let model = FadingModel::sim(scene, composite);
    Ok(model.ergodic_capacity(&[rho], trials, master_seed)?[0])
}

/// `E[ln det(GᴴG)]` (nats) for the s×s Gram of an iid complex Gaussian
/// matrix with `t` degrees of freedom and the given per-entry variance:
/// `Σ_{i<s} ψ(t − i) + s ln(variance)`.
pub fn wishart_logdet_mean(s: usize, t: usize, entry_variance: f64) -> Result<f64> {
    if s == 0 || s > t {
        return Err(Error::InvalidArgument(format!("need 1 ≤ s ≤ t, got s = {s}, t = {t}")));
    }
    if !(entry_variance > 0.0) {
        return Err(Error::InvalidArgument("entry variance must be positive".into()));
    }
    let mut acc = 0.0;
    for i in 0..s {
        acc += digamma((t - i) as f64)?;
    }
    Ok(acc + s as f64 * entry_variance.ln())
}

/// Relative pivot threshold below which a composite Gram is treated as
/// rank-deficient.
pub const GRAM_RCOND: f64 = 1e-13;

/// Additive pieces of the exponent of the lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// Wishart term including the variance correction.
    pub wishart: f64,
    pub logdet_gram_p: f64,
    pub logdet_gram_d: f64,
    pub logdet_r_t: f64,
    pub logdet_r_r: f64,
}

impl BoundTerms {
    pub fn compute(scene: &SceneMatrices, composite: &CompositeResponse) -> Result<Self> {
        Self::with_variance(scene, composite, scene.entry_variance())
    }

    pub fn with_variance(scene: &SceneMatrices, composite: &CompositeResponse, entry_variance: f64) -> Result<Self> {
        let logdet_gram_p = linalg::hermitian_logdet_checked(&composite.gram_p, GRAM_RCOND)
            .ok_or(Error::RankDeficient("transmit Gram PᴴP is singular"))?;
        let logdet_gram_d = linalg::hermitian_logdet_checked(&composite.gram_d, GRAM_RCOND)
            .ok_or(Error::RankDeficient("receive Gram DDᴴ is singular"))?;
        Ok(Self {
            wishart: wishart_logdet_mean(scene.s(), scene.t(), entry_variance)?,
            logdet_gram_p,
            logdet_gram_d,
            logdet_r_t: scene.logdet_r_t,
            logdet_r_r: scene.logdet_r_r,
        })
    }

    pub fn sum(&self) -> f64 {
        self.wishart + self.logdet_gram_p + self.logdet_gram_d + self.logdet_r_t + self.logdet_r_r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    /// bits/s/Hz
    pub value: f64,
    /// `ln V`, kept separately because `V` underflows at realistic path loss.
    pub ln_v: f64,
}

impl LowerBound {
    pub fn v(&self) -> f64 {
        self.ln_v.exp()
    }

    /// `ρV / (ln2 · N_t · (1 + ρV/N_t))`, the common factor of all bound
    /// gradients.
    pub fn gradient_scale(&self, rho: f64, n_t: usize) -> f64 {
        if rho == 0.0 {
            return 0.0;
        }
        let nt = n_t as f64;
        // x = ρV/N_t evaluated in the log domain
        let x = (rho.ln() - nt.ln() + self.ln_v).exp();
        x / (LN_2 * (1.0 + x))
    }
}

/// `N_t log2(1 + (ρ/N_t) exp(exponent / N_t))`.
pub fn lower_bound_from_exponent(rho: f64, n_t: usize, exponent: f64) -> Result<LowerBound> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("snr must be non-negative, got {rho}")));
    }
    if !exponent.is_finite() {
        return Err(Error::NonFinite("lower-bound exponent".into()));
    }
    let nt = n_t as f64;
    let ln_v = exponent / nt;
    let value = if rho == 0.0 {
        0.0
    } else {
        let x = (rho.ln() - nt.ln() + ln_v).exp();
        nt * x.ln_1p() / LN_2
    };
    Ok(LowerBound { value, ln_v })
}

/// Closed-form lower bound on the ergodic capacity of the SIM link.
pub fn capacity_lower_bound(scene: &SceneMatrices, composite: &CompositeResponse, rho: f64) -> Result<LowerBound> {
    let terms = BoundTerms::compute(scene, composite)?;
    lower_bound_from_exponent(rho, scene.n_t(), terms.sum())
}

/// The bound for an `n × n` iid channel with per-entry variance `var`
/// (no metasurfaces, no correlation).
pub fn iid_lower_bound(n: usize, var: f64, rho: f64) -> Result<LowerBound> {
    lower_bound_from_exponent(rho, n, wishart_logdet_mean(n, n, var)?)
}
