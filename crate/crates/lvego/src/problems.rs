//! The four benchmark objectives: discretized Branin-Hoo, discretized
//! Goldstein-Price, partially discretized Hartmann-6 and an Euler-Bernoulli
//! beam sizing problem.
//!
//! Each is a classical continuous test function where one or two inputs have
//! been restricted to a catalog of levels; continuous inputs are taken in
//! `[0,1]` and rescaled internally.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::problem::{MixedPoint, MixedProblem};

/// Ids of the built-in benchmarks, in canonical order.
pub const BENCHMARK_IDS: [&str; 4] = ["branin", "goldstein", "hartmann", "beam"];

/// Look up a benchmark problem by id.
pub fn by_id(id: &str) -> Result<&'static dyn MixedProblem> {
    match id {
        "branin" => Ok(&Branin),
        "goldstein" => Ok(&Goldstein),
        "hartmann" => Ok(&Hartmann6),
        "beam" => Ok(&BeamBending),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// All built-in benchmarks.
pub fn all() -> Vec<&'static dyn MixedProblem> {
    BENCHMARK_IDS.iter().map(|id| by_id(id).unwrap()).collect()
}

/// Branin-Hoo with `x_2` restricted to four levels.
///
/// The level values are the exact thirds `{0, 1/3, 2/3, 1}` and the quadratic
/// coefficient is the standard `5.1/(4 pi^2)`: this reproduces the published
/// optimum value 2.79118, reached at `(x_1, u) = (0.15870, 3)`.
pub struct Branin;

const BRANIN_LEVELS: [f64; 4] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];

impl Branin {
    fn raw(x1: f64, x2: f64) -> f64 {
        let b = 5.1 / (4.0 * PI * PI);
        let c = 5.0 / PI;
        let r = 6.0;
        let s = 10.0;
        let t = 1.0 / (8.0 * PI);
        (x2 - b * x1 * x1 + c * x1 - r).powi(2) + s * (1.0 - t) * x1.cos() + s
    }
}

impl MixedProblem for Branin {
    fn name(&self) -> &str {
        "branin"
    }
    fn n_continuous(&self) -> usize {
        1
    }
    fn level_counts(&self) -> &[usize] {
        &[4]
    }
    fn evaluate(&self, p: &MixedPoint) -> Result<f64> {
        self.validate(p)?;
        let x1 = -5.0 + 15.0 * p.x[0];
        let x2 = 15.0 * BRANIN_LEVELS[p.u[0] - 1];
        Ok(Self::raw(x1, x2))
    }
    fn known_optimum(&self) -> Option<(MixedPoint, f64)> {
        Some((MixedPoint::new(vec![0.15869983], vec![3]), 2.79118))
    }
}

/// Goldstein-Price with `x_2` restricted to five levels `{0, 1/4, 1/2, 3/4, 1}`.
///
/// The optimum sits at `(x_1, u) = (0.5, 2)` with value 3, i.e. the continuous
/// optimum `x' = (0, -1)`.
pub struct Goldstein;

const GOLDSTEIN_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

impl Goldstein {
    fn raw(x1: f64, x2: f64) -> f64 {
        let a = 1.0
            + (x1 + x2 + 1.0).powi(2)
                * (19.0 - 14.0 * x1 + 3.0 * x1 * x1 - 14.0 * x2 + 6.0 * x1 * x2 + 3.0 * x2 * x2);
        let b = 30.0
            + (2.0 * x1 - 3.0 * x2).powi(2)
                * (18.0 - 32.0 * x1 + 12.0 * x1 * x1 + 48.0 * x2 - 36.0 * x1 * x2
                    + 27.0 * x2 * x2);
        a * b
    }
}

impl MixedProblem for Goldstein {
    fn name(&self) -> &str {
        "goldstein"
    }
    fn n_continuous(&self) -> usize {
        1
    }
    fn level_counts(&self) -> &[usize] {
        &[5]
    }
    fn evaluate(&self, p: &MixedPoint) -> Result<f64> {
        self.validate(p)?;
        let x1 = -2.0 + 4.0 * p.x[0];
        let x2 = -2.0 + 4.0 * GOLDSTEIN_LEVELS[p.u[0] - 1];
        Ok(Self::raw(x1, x2))
    }
    fn known_optimum(&self) -> Option<(MixedPoint, f64)> {
        Some((MixedPoint::new(vec![0.5], vec![2]), 3.0))
    }
    // Tabulated design size (the sizing table counts this case as n_c = 2).
    fn doe_size(&self) -> usize {
        40
    }
}

/// Hartmann-6 with `x_5` and `x_6` restricted to 5 and 4 levels.
pub struct Hartmann6;

const HART_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HART_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HART_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];
const HART_U1: [f64; 5] = [0.350, 0.257, 0.477, 0.312, 0.657];
const HART_U2: [f64; 4] = [0.150, 0.657, 0.512, 0.741];

impl Hartmann6 {
    fn raw(x: &[f64; 6]) -> f64 {
        let mut sum = 0.0;
        for i in 0..4 {
            let mut inner = 0.0;
            for j in 0..6 {
                let d = x[j] - HART_P[i][j];
                inner += HART_A[i][j] * d * d;
            }
            sum += HART_ALPHA[i] * (-inner).exp();
        }
        -sum
    }
}

impl MixedProblem for Hartmann6 {
    fn name(&self) -> &str {
        "hartmann"
    }
    fn n_continuous(&self) -> usize {
        4
    }
    fn level_counts(&self) -> &[usize] {
        &[5, 4]
    }
    fn evaluate(&self, p: &MixedPoint) -> Result<f64> {
        self.validate(p)?;
        let x = [
            p.x[0],
            p.x[1],
            p.x[2],
            p.x[3],
            HART_U1[p.u[0] - 1],
            HART_U2[p.u[1] - 1],
        ];
        Ok(Self::raw(&x))
    }
    fn known_optimum(&self) -> Option<(MixedPoint, f64)> {
        Some((
            MixedPoint::new(vec![0.202, 0.150, 0.477, 0.275], vec![4, 2]),
            -3.32237,
        ))
    }
}

/// Clamped beam sizing: deflection plus a weight penalty, with the normalized
/// moment of inertia picked from a 12-profile catalog.
///
/// `L = 10 + 10 x_1`, `S = 1 + x_2`, objective
/// `P L^3 / (3 E S^2 I~) + alpha L S` with `P = 600`, `E = 600`, `alpha = 60`
/// treated as dimensionless constants.
pub struct BeamBending;

const BEAM_INERTIA: [f64; 12] = [
    0.083, 0.139, 0.380, 0.080, 0.133, 0.363, 0.086, 0.136, 0.360, 0.092, 0.138, 0.369,
];

impl MixedProblem for BeamBending {
    fn name(&self) -> &str {
        "beam"
    }
    fn n_continuous(&self) -> usize {
        2
    }
    fn level_counts(&self) -> &[usize] {
        &[12]
    }
    fn evaluate(&self, p: &MixedPoint) -> Result<f64> {
        self.validate(p)?;
        let length = 10.0 + 10.0 * p.x[0];
        let section = 1.0 + p.x[1];
        let inertia = BEAM_INERTIA[p.u[0] - 1];
        let deflection = 600.0 * length.powi(3) / (3.0 * 600.0 * section * section * inertia);
        Ok(deflection + 60.0 * length * section)
    }
    fn known_optimum(&self) -> Option<(MixedPoint, f64)> {
        Some((MixedPoint::new(vec![0.0, 0.43], vec![3]), 1287.385))
    }
}
