//! Expected improvement, its log transform, the discreteness constraint on
//! latent points, and the discrete pre-image solve.

use crate::error::{Error, Result};
use crate::gp::{CategoricalQuery, GpModel, LatentMap};

/// Degenerate-prediction threshold: below this posterior sd the improvement
/// is taken deterministically.
const SD_FLOOR: f64 = 1e-12;

/// Everything the acquisition operations need, bound to one trained model.
pub struct AcquisitionContext<'a> {
    model: &'a GpModel,
    y_min: f64,
    epsilon: f64,
    /// Per flattened latent dimension: empirical coordinate range across
    /// levels (floored), used to normalize the constraint distance.
    latent_scale: Vec<f64>,
}

impl<'a> AcquisitionContext<'a> {
    /// Binds the context to a model. `epsilon` is the relaxation constant of
    /// the discreteness constraint and must be 0 or 0.01.
    pub fn new(model: &'a GpModel, epsilon: f64) -> Result<Self> {
        if !(epsilon == 0.0 || epsilon == 0.01) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be 0 or 0.01, got {epsilon}"
            )));
        }
        let latent_scale = model
            .latent_map()
            .map(|m| m.coordinate_ranges())
            .unwrap_or_default();
        Ok(Self {
            model,
            y_min: model.y_min(),
            epsilon,
            latent_scale,
        })
    }

    pub fn model(&self) -> &GpModel {
        self.model
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn latent_scale(&self) -> &[f64] {
        &self.latent_scale
    }

    fn latent_map(&self) -> Result<&LatentMap> {
        self.model.latent_map().ok_or(Error::UnsupportedMode(
            "latent acquisition on a compound-symmetry model",
        ))
    }

    /// The box of the relaxed latent search: per-dimension hull of the level
    /// images.
    pub fn latent_box(&self) -> Result<Vec<(f64, f64)>> {
        Ok(self.latent_map()?.bounding_box())
    }

    /// Dimension of the weight parameterization of the latent hull: one
    /// weight per level of each variable.
    pub fn hull_dims(&self) -> Result<usize> {
        Ok(self.latent_map()?.level_counts().iter().sum())
    }

    /// Maps hull weights (one nonnegative weight per level, per variable)
    /// onto a latent point: each variable's block is normalized to the
    /// simplex and combined over its level images. An all-zero block falls
    /// back to uniform weights.
    ///
    /// The posterior mean is linear in the latent point, so improvement
    /// concentrates at hull vertices, which are exactly the level images;
    /// searching the hull keeps the relaxed maximizer compatible with the
    /// mapping functions.
    pub fn hull_to_latent(&self, w: &[f64]) -> Result<Vec<f64>> {
        let map = self.latent_map()?;
        let expected: usize = map.level_counts().iter().sum();
        if w.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} hull weights, got {}",
                w.len()
            )));
        }
        let mut out = Vec::with_capacity(map.total_dims());
        let mut offset = 0;
        for j in 0..map.n_vars() {
            let m = map.level_counts()[j];
            let q = map.q(j);
            let block = &w[offset..offset + m];
            let sum: f64 = block.iter().sum();
            let mut point = vec![0.0; q];
            for (k, &wk) in block.iter().enumerate() {
                let weight = if sum > 1e-12 { wk / sum } else { 1.0 / m as f64 };
                for (d, pd) in point.iter_mut().enumerate() {
                    *pd += weight * map.row(j, k + 1)[d];
                }
            }
            out.extend_from_slice(&point);
            offset += m;
        }
        Ok(out)
    }

    /// Expected improvement at a mixed point.
    pub fn ei_mixed(&self, x: &[f64], u: &[usize]) -> Result<f64> {
        let (mean, sd) = self.model.posterior(x, CategoricalQuery::Levels(u))?;
        Ok(ei_closed_form(mean, sd, self.y_min))
    }

    /// Expected improvement at a relaxed latent point.
    pub fn ei_latent(&self, x: &[f64], l: &[f64]) -> Result<f64> {
        let (mean, sd) = self.model.posterior(x, CategoricalQuery::Latent(l))?;
        Ok(ei_closed_form(mean, sd, self.y_min))
    }

    /// Relaxed acquisition objective `f^(t) = -log(1 + EI)`, always <= 0 and
    /// decreasing in EI.
    pub fn f_t(&self, x: &[f64], l: &[f64]) -> Result<f64> {
        Ok(f_of_ei(self.ei_latent(x, l)?))
    }

    /// Discreteness constraint `g^(t)(l)`: scaled distance from `l` to the
    /// closest level image, minus epsilon.
    ///
    /// The latent blocks of distinct variables are disjoint coordinates, so
    /// the minimum over all level combinations decomposes into independent
    /// per-variable minima combined in quadrature.
    pub fn g_t(&self, l: &[f64]) -> Result<f64> {
        let map = self.latent_map()?;
        if l.len() != map.total_dims() {
            return Err(Error::InvalidArgument(format!(
                "expected {} latent coordinates, got {}",
                map.total_dims(),
                l.len()
            )));
        }
        let mut total = 0.0;
        let mut offset = 0;
        for j in 0..map.n_vars() {
            let q = map.q(j);
            let lj = &l[offset..offset + q];
            let scale = &self.latent_scale[offset..offset + q];
            let mut best = f64::INFINITY;
            for level in 1..=map.level_counts()[j] {
                let phi = map.row(j, level);
                let d2: f64 = lj
                    .iter()
                    .zip(phi)
                    .zip(scale)
                    .map(|((a, b), s)| {
                        let d = (a - b) / s;
                        d * d
                    })
                    .sum();
                if d2 < best {
                    best = d2;
                }
            }
            total += best;
            offset += q;
        }
        Ok(total.sqrt() - self.epsilon)
    }

    /// Discrete pre-image: the level combination whose image maximizes EI at
    /// the fixed continuous point, by exhaustive enumeration. Ties resolve to
    /// the lexicographically smallest combination.
    pub fn preimage(&self, x: &[f64]) -> Result<Vec<usize>> {
        let map = self.latent_map()?;
        let mut best_u: Option<Vec<usize>> = None;
        let mut best_ei = f64::NEG_INFINITY;
        let mut u: Vec<usize> = vec![1; map.n_vars()];
        loop {
            let ei = self.ei_latent(x, &map.image(&u))?;
            if ei > best_ei {
                best_ei = ei;
                best_u = Some(u.clone());
            }
            if !next_combination(&mut u, map.level_counts()) {
                break;
            }
        }
        Ok(best_u.unwrap())
    }
}

/// Lexicographic odometer over level combinations; returns false after the
/// last one.
pub(crate) fn next_combination(u: &mut [usize], level_counts: &[usize]) -> bool {
    for j in (0..u.len()).rev() {
        if u[j] < level_counts[j] {
            u[j] += 1;
            for uj in u.iter_mut().skip(j + 1) {
                *uj = 1;
            }
            return true;
        }
    }
    false
}

/// Closed-form expected improvement for a Gaussian prediction.
pub fn ei_closed_form(mean: f64, sd: f64, y_min: f64) -> f64 {
    if sd < SD_FLOOR {
        return (y_min - mean).max(0.0);
    }
    let z = (y_min - mean) / sd;
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let cdf = 0.5 * (1.0 + statrs::function::erf::erf(z / std::f64::consts::SQRT_2));
    ((y_min - mean) * cdf + sd * phi).max(0.0)
}

/// `-log(1 + ei)`.
pub fn f_of_ei(ei: f64) -> f64 {
    -(1.0 + ei).ln()
}
