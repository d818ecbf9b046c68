//! Seeded design-of-experiments generation.
//!
//! Initial designs are Latin hypercubes on the continuous part with balanced,
//! shuffled level assignments on the categorical part, picked as the best of
//! several candidates under the maximin mixed-distance criterion.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::problem::{MixedPoint, MixedProblem};

/// Number of candidate designs scored by [`maximin_lhs_mixed`].
pub const DEFAULT_DESIGN_RESTARTS: usize = 50;

/// A scored initial design.
#[derive(Debug, Clone)]
pub struct Design {
    pub points: Vec<MixedPoint>,
    pub seed: u64,
    /// Maximin separation: minimum pairwise mixed distance of the design.
    pub criterion_value: f64,
}

/// Stratified Latin hypercube sample on `[0,1]^dim`: in every column, exactly
/// one value falls in each interval `[(i-1)/n, i/n)`.
pub fn lhs_continuous(n: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "lhs_continuous requires n >= 1 and dim >= 1, got n={n}, dim={dim}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(lhs_with_rng(n, dim, &mut rng))
}

pub(crate) fn lhs_with_rng(n: usize, dim: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        cols.push(
            strata
                .iter()
                .map(|&s| (s as f64 + rng.gen::<f64>()) / n as f64)
                .collect(),
        );
    }
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// Latin hypercube over an arbitrary box. Zero-width dimensions collapse to
/// their fixed coordinate.
pub fn lhs_box(n: usize, bounds: &[(f64, f64)], rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    if n == 0 || bounds.is_empty() {
        return vec![Vec::new(); n];
    }
    let unit = lhs_with_rng(n, bounds.len(), rng);
    unit.into_iter()
        .map(|row| {
            row.iter()
                .zip(bounds)
                .map(|(v, &(lo, hi))| lo + v * (hi - lo))
                .collect()
        })
        .collect()
}

/// Best-of-`DEFAULT_DESIGN_RESTARTS` mixed Latin hypercube under the maximin
/// criterion.
///
/// Categorical columns cycle the levels `1..=m_j` over a shuffled order, so
/// every level appears `floor(n/m_j)` or `ceil(n/m_j)` times.
pub fn maximin_lhs_mixed(problem: &dyn MixedProblem, n: usize, seed: u64) -> Result<Design> {
    maximin_lhs_mixed_with_restarts(problem, n, seed, DEFAULT_DESIGN_RESTARTS)
}

/// As [`maximin_lhs_mixed`] with an explicit candidate count. Candidates are
/// generated from a deterministic seed stream, so the best over `r` candidates
/// can only improve as `r` grows.
pub fn maximin_lhs_mixed_with_restarts(
    problem: &dyn MixedProblem,
    n: usize,
    seed: u64,
    restarts: usize,
) -> Result<Design> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "maximin design requires n >= 2, got {n}"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let mut master = ChaCha20Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<MixedPoint>)> = None;
    for _ in 0..restarts {
        let candidate_seed = master.next_u64();
        let mut rng = ChaCha20Rng::seed_from_u64(candidate_seed);
        let points = candidate_design(problem, n, &mut rng);
        let crit = min_pairwise_distance(&points);
        // Ties broken by candidate index: strict improvement only.
        if best.as_ref().map_or(true, |(b, _)| crit > *b) {
            best = Some((crit, points));
        }
    }
    let (criterion_value, points) = best.unwrap();
    Ok(Design {
        points,
        seed,
        criterion_value,
    })
}

fn candidate_design(problem: &dyn MixedProblem, n: usize, rng: &mut ChaCha20Rng) -> Vec<MixedPoint> {
    let n_c = problem.n_continuous();
    let xs = if n_c > 0 {
        lhs_with_rng(n, n_c, rng)
    } else {
        vec![Vec::new(); n]
    };
    let mut level_cols: Vec<Vec<usize>> = Vec::new();
    for &m in problem.level_counts() {
        let mut col: Vec<usize> = (0..n).map(|i| (i % m) + 1).collect();
        col.shuffle(rng);
        level_cols.push(col);
    }
    (0..n)
        .map(|i| MixedPoint::new(xs[i].clone(), level_cols.iter().map(|c| c[i]).collect()))
        .collect()
}

fn min_pairwise_distance(points: &[MixedPoint]) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = points[i].mixed_distance(&points[j]);
            if d < min {
                min = d;
            }
        }
    }
    min
}
