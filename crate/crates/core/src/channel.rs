//! Correlated Rayleigh fading between the two stacks and the end-to-end
//! channel `H = D G P`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::scene::SceneMatrices;
use crate::simstack::CompositeResponse;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent stream under `master`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, index))
}

/// Fills a `rows × cols` matrix with iid CN(0, variance) entries.
pub fn fill_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, variance: f64) -> CMat {
    let sd = (variance / 2.0).sqrt();
    // Column-major fill keeps the draw order fixed.
    let mut out = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out[(i, j)] = c(sd * re, sd * im);
        }
    }
    out
}

/// iid CN(0, variance) matrix, deterministic in `seed`.
pub fn draw_gtilde(seed: u64, rows: usize, cols: usize, variance: f64) -> Result<CMat> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(fill_gaussian(&mut rng, rows, cols, variance))
}

/// One fading realization.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub g_tilde: CMat,
    pub g: CMat,
    pub h: CMat,
    pub seed: u64,
}

impl ChannelDraw {
    pub fn draw(scene: &SceneMatrices, composite: &CompositeResponse, seed: u64) -> Result<Self> {
        let g_tilde = draw_gtilde(seed, scene.n(), scene.m(), scene.entry_variance())?;
        let g = correlate(&g_tilde, scene)?;
        let h = assemble_h(&g_tilde, composite, scene)?;
        Ok(Self { g_tilde, g, h, seed })
    }
}

/// `G = R_R^{1/2} G̃ R_T^{1/2}`.
pub fn correlate(g_tilde: &CMat, scene: &SceneMatrices) -> Result<CMat> {
    if g_tilde.shape() != (scene.n(), scene.m()) {
        return Err(Error::DimensionMismatch {
            context: "fading matrix",
            expected: format!("{}x{}", scene.n(), scene.m()),
            got: format!("{}x{}", g_tilde.nrows(), g_tilde.ncols()),
        });
    }
    Ok(&scene.r_r_sqrt * g_tilde * &scene.r_t_sqrt)
}

/// `H = D (R_R^{1/2} G̃ R_T^{1/2}) P`.
pub fn assemble_h(g_tilde: &CMat, composite: &CompositeResponse, scene: &SceneMatrices) -> Result<CMat> {
    let g = correlate(g_tilde, scene)?;
    if composite.d.ncols() != g.nrows() || g.ncols() != composite.p.nrows() {
        return Err(Error::DimensionMismatch {
            context: "channel chain",
            expected: format!("D: _x{}, P: {}x_", g.nrows(), g.ncols()),
            got: format!("D: {:?}, P: {:?}", composite.d.shape(), composite.p.shape()),
        });
    }
    Ok(&composite.d * g * &composite.p)
}
