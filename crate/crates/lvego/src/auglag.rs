//! Augmented Lagrangians for the discreteness constraint and the global and
//! local dual schemes that pick the multiplier and penalty.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::doe::lhs_box;
use crate::error::{Error, Result};
use crate::optimizers::{local_minimize, LocalSearchConfig};

/// Lagrange multiplier and penalty parameter driving a constrained
/// acquisition solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: f64,
    pub rho: f64,
}

impl DualState {
    /// Starting state of the local dual scheme.
    pub fn initial() -> Self {
        Self {
            lambda: 0.0,
            rho: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho must be > 0, got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Which constraint form the Lagrangian penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// `h(x) = 0`, penalized with the Hestenes form.
    Equality,
    /// `g(x) <= 0`, penalized with the Rockafellar form.
    Inequality,
}

/// Rockafellar augmented Lagrangian for an inequality constraint `g <= 0`:
/// `f - lambda^2/(2 rho)` on the inactive branch `g <= -lambda/rho`, else
/// `f + lambda g + rho g^2 / 2`.
pub fn al_rockafellar(f: f64, g: f64, s: &DualState) -> f64 {
    if g <= -s.lambda / s.rho {
        f - s.lambda * s.lambda / (2.0 * s.rho)
    } else {
        f + s.lambda * g + 0.5 * s.rho * g * g
    }
}

/// Hestenes augmented Lagrangian for an equality constraint `h = 0`:
/// `f + lambda h + rho h^2 / 2`.
pub fn al_hestenes(f: f64, h: f64, s: &DualState) -> f64 {
    f + s.lambda * h + 0.5 * s.rho * h * h
}

/// Value of the augmented Lagrangian for the given constraint kind.
pub fn al_value(kind: ConstraintKind, f: f64, g: f64, s: &DualState) -> f64 {
    match kind {
        ConstraintKind::Equality => al_hestenes(f, g, s),
        ConstraintKind::Inequality => al_rockafellar(f, g, s),
    }
}

/// Optimal squared slack `s^2 = max(0, -lambda/rho - g)` of the
/// slack-variable reformulation.
pub fn optimal_slack(g: f64, s: &DualState) -> f64 {
    (-s.lambda / s.rho - g).max(0.0)
}

/// One local dual update from the constraint value at the previous solution:
/// `lambda' = lambda + rho (g + max(0, -lambda/rho - g))`, computed through
/// its algebraic simplification `max(0, lambda + rho g)` which cannot go
/// negative under rounding; `rho` doubles while infeasible.
pub fn local_dual_step(prev: &DualState, g_prev: f64) -> DualState {
    DualState {
        lambda: (prev.lambda + prev.rho * g_prev).max(0.0),
        rho: if g_prev <= 0.0 {
            prev.rho
        } else {
            2.0 * prev.rho
        },
    }
}

/// Approximate dual value over a fixed sample: the lower front
/// `min_i L_A(f_i, g_i; lambda, rho)`.
pub fn approximate_dual_value(
    kind: ConstraintKind,
    fs: &[f64],
    gs: &[f64],
    lambda: f64,
    rho: f64,
) -> f64 {
    let s = DualState { lambda, rho };
    fs.iter()
        .zip(gs)
        .map(|(&f, &g)| al_value(kind, f, g, &s))
        .fold(f64::INFINITY, f64::min)
}

/// Settings of the global dual scheme.
#[derive(Debug, Clone)]
pub struct GlobalDualConfig {
    /// Size of the dual sample; half of it is made feasible.
    pub n_doe: usize,
    /// Multiplier grid size (one zero entry plus log-spaced values).
    pub n_lambda: usize,
    /// Penalty grid size.
    pub n_rho: usize,
    /// Log-spaced penalty range.
    pub rho_bounds: (f64, f64),
    /// Multiplier range relative to the objective spread over the sample.
    pub lambda_rel_bounds: (f64, f64),
    /// Fine-tuning local search.
    pub finetune: LocalSearchConfig,
}

impl Default for GlobalDualConfig {
    fn default() -> Self {
        Self {
            n_doe: 100,
            n_lambda: 100,
            n_rho: 20,
            rho_bounds: (1e-2, 1e4),
            lambda_rel_bounds: (1e-3, 10.0),
            finetune: LocalSearchConfig::default(),
        }
    }
}

impl GlobalDualConfig {
    /// The fixed penalty grid.
    pub fn rho_grid(&self) -> Vec<f64> {
        log_spaced(self.n_rho, self.rho_bounds.0, self.rho_bounds.1)
    }

    /// The multiplier grid for an observed objective spread.
    pub fn lambda_grid(&self, delta_f: f64) -> Vec<f64> {
        let spread = delta_f.max(1e-9);
        let mut grid = vec![0.0];
        grid.extend(log_spaced(
            self.n_lambda - 1,
            self.lambda_rel_bounds.0 * spread,
            self.lambda_rel_bounds.1 * spread,
        ));
        grid
    }
}

fn log_spaced(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| 10f64.powf(llo + (lhi - llo) * k as f64 / (n - 1) as f64))
        .collect()
}

/// Result of the global dual scheme.
#[derive(Debug, Clone)]
pub struct GlobalDualSolve {
    /// Fine-tuned minimizer of the augmented Lagrangian over the box.
    pub point: Vec<f64>,
    pub value: f64,
    pub dual: DualState,
    /// No penalty on the grid yielded a feasible dual argmin; the largest one
    /// was used instead.
    pub fallback: bool,
    /// Sample point selected by the dual enumeration.
    pub dual_point: Vec<f64>,
    /// Constraint value at the fine-tuned point (diagnostic re-test).
    pub finetune_constraint: f64,
}

/// Global dual scheme over black-box `f` and `g` on a box.
///
/// A sample of `n_doe` points is drawn by Latin hypercube; `make_feasible`
/// projects half of them onto the constraint manifold (it receives the LHS
/// point and may rewrite coordinates). The dual is approximated by the lower
/// front over the sample and maximized in `lambda` by enumeration; the
/// penalty is the smallest grid value whose dual argmin is feasible. The
/// returned candidate minimizes the Lagrangian at the selected multipliers,
/// fine-tuned by the restarted local search warm-started at the dual argmin.
pub fn global_dual_solve(
    kind: ConstraintKind,
    f: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    make_feasible: &mut dyn FnMut(&mut Vec<f64>, &mut ChaCha20Rng),
    warm_starts: &[Vec<f64>],
    cfg: &GlobalDualConfig,
    seed: u64,
) -> Result<GlobalDualSolve> {
    if cfg.n_doe < 2 || cfg.n_lambda < 2 || cfg.n_rho < 1 {
        return Err(Error::InvalidArgument(
            "global dual scheme needs n_doe >= 2, n_lambda >= 2, n_rho >= 1".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sample = lhs_box(cfg.n_doe, bounds, &mut rng);
    let n_feasible = cfg.n_doe / 2;
    for point in sample.iter_mut().take(n_feasible) {
        make_feasible(point, &mut rng);
    }
    let fs: Vec<f64> = sample.iter().map(|p| f(p)).collect();
    let gs: Vec<f64> = sample.iter().map(|p| g(p)).collect();
    if fs.iter().chain(&gs).any(|v| !v.is_finite()) {
        return Err(Error::OptimizerFailed(
            "non-finite objective or constraint over the dual sample".into(),
        ));
    }
    let f_max = fs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f_min = fs.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambdas = cfg.lambda_grid(f_max - f_min);
    let rhos = cfg.rho_grid();

    // For each penalty (ascending), re-maximize the approximate dual in
    // lambda and test the feasibility of its argmin sample point.
    let mut chosen: Option<(DualState, usize)> = None;
    let mut last: Option<(DualState, usize)> = None;
    for &rho in &rhos {
        let mut best_lambda = lambdas[0];
        let mut best_dual = f64::NEG_INFINITY;
        let mut best_point = 0usize;
        for &lambda in &lambdas {
            let s = DualState { lambda, rho };
            let mut min_val = f64::INFINITY;
            let mut min_idx = 0usize;
            for (i, (&fv, &gv)) in fs.iter().zip(&gs).enumerate() {
                let v = al_value(kind, fv, gv, &s);
                if v < min_val {
                    min_val = v;
                    min_idx = i;
                }
            }
            if min_val > best_dual {
                best_dual = min_val;
                best_lambda = lambda;
                best_point = min_idx;
            }
        }
        let state = DualState {
            lambda: best_lambda,
            rho,
        };
        last = Some((state, best_point));
        if gs[best_point] <= 0.0 {
            chosen = Some((state, best_point));
            break;
        }
    }
    let (dual, dual_idx, fallback) = match chosen {
        Some((s, i)) => (s, i, false),
        None => {
            let (s, i) = last.unwrap();
            (s, i, true)
        }
    };

    let lagrangian = |p: &[f64]| al_value(kind, f(p), g(p), &dual);
    let mut warm = vec![sample[dual_idx].clone()];
    warm.extend(warm_starts.iter().cloned());
    let tuned = local_minimize(&lagrangian, bounds, &cfg.finetune, rng.next_u64(), &warm)?;
    let finetune_constraint = g(&tuned.x);
    Ok(GlobalDualSolve {
        value: tuned.value,
        point: tuned.x,
        dual,
        fallback,
        dual_point: sample[dual_idx].clone(),
        finetune_constraint,
    })
}
