//! Mixed continuous/categorical search-space abstraction.
//!
//! A problem couples `n_c` continuous variables, rescaled to the unit cube,
//! with `n_d` categorical variables where variable `j` takes one of `m_j`
//! levels encoded `1..=m_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the mixed space: continuous coordinates in `[0,1]^{n_c}` plus
/// one 1-based level index per categorical variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedPoint {
    pub x: Vec<f64>,
    pub u: Vec<usize>,
}

impl MixedPoint {
    pub fn new(x: Vec<f64>, u: Vec<usize>) -> Self {
        Self { x, u }
    }

    /// Mixed distance: Euclidean on the continuous part concatenated with a
    /// 0/1 mismatch coordinate per categorical variable.
    pub fn mixed_distance(&self, other: &Self) -> f64 {
        let cont: f64 = self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let cat = self.u.iter().zip(&other.u).filter(|(a, b)| a != b).count() as f64;
        (cont + cat).sqrt()
    }
}

/// A deterministic objective over a mixed space.
///
/// `evaluate` must be a pure function: identical inputs yield bit-identical
/// outputs, so problems can be shared across worker threads.
pub trait MixedProblem: Send + Sync {
    /// Short identifier used by the CLI and config files.
    fn name(&self) -> &str;

    /// Number of continuous variables.
    fn n_continuous(&self) -> usize;

    /// Level counts `m_1..m_{n_d}`, one per categorical variable.
    fn level_counts(&self) -> &[usize];

    /// Objective value at a valid point.
    fn evaluate(&self, p: &MixedPoint) -> Result<f64>;

    /// Known optimum (point, published objective value), if any. Stored for
    /// metric reporting only; algorithms never read it.
    fn known_optimum(&self) -> Option<(MixedPoint, f64)> {
        None
    }

    /// Initial design size. Default: `4 * n_c * n_d * max(m_j)`.
    fn doe_size(&self) -> usize {
        let max_m = self.level_counts().iter().copied().max().unwrap_or(0);
        4 * self.n_continuous() * self.level_counts().len() * max_m
    }

    fn n_categorical(&self) -> usize {
        self.level_counts().len()
    }

    /// Check that `p` has matching lengths, continuous coordinates inside
    /// `[0,1]` and level indices inside `1..=m_j`.
    fn validate(&self, p: &MixedPoint) -> Result<()> {
        if p.x.len() != self.n_continuous() {
            return Err(Error::OutOfDomain(format!(
                "{}: expected {} continuous coordinates, got {}",
                self.name(),
                self.n_continuous(),
                p.x.len()
            )));
        }
        if p.u.len() != self.n_categorical() {
            return Err(Error::OutOfDomain(format!(
                "{}: expected {} level indices, got {}",
                self.name(),
                self.n_categorical(),
                p.u.len()
            )));
        }
        for (i, &xi) in p.x.iter().enumerate() {
            if !(0.0..=1.0).contains(&xi) || !xi.is_finite() {
                return Err(Error::OutOfDomain(format!(
                    "{}: x[{i}] = {xi} outside [0,1]",
                    self.name()
                )));
            }
        }
        for (j, (&uj, &mj)) in p.u.iter().zip(self.level_counts()).enumerate() {
            if uj < 1 || uj > mj {
                return Err(Error::OutOfDomain(format!(
                    "{}: u[{j}] = {uj} outside 1..={mj}",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}
