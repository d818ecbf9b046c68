//! Inner optimizers: restarted derivative-free local search over boxes, and
//! the mixed (mu+lambda) evolution strategy.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::doe::lhs_box;
use crate::error::{Error, Result};
use crate::problem::{MixedPoint, MixedProblem};

/// Configuration of the restarted local search.
#[derive(Debug, Clone)]
pub struct LocalSearchConfig {
    pub restarts: usize,
    pub max_evals_per_restart: usize,
    /// Initial poll step as a fraction of the box width per dimension.
    pub initial_step: f64,
    /// Termination threshold on the poll step, as a fraction of box width.
    pub tol: f64,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_evals_per_restart: 300,
            initial_step: 0.25,
            tol: 1e-6,
        }
    }
}

impl LocalSearchConfig {
    pub fn with_restarts(restarts: usize) -> Self {
        Self {
            restarts,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_evals_per_restart == 0 {
            return Err(Error::InvalidArgument(
                "max_evals_per_restart must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of [`local_minimize`].
#[derive(Debug, Clone)]
pub struct LocalMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective value at each restart's start point (finite starts only).
    pub start_values: Vec<f64>,
    pub evaluations: usize,
}

/// Restarted compass (pattern) search with step halving over a box.
///
/// Starts are Latin hypercube samples; `warm_starts` occupy the first restart
/// slots (clipped to the box). Polling is opportunistic: the first improving
/// coordinate move is taken, and the step halves after a full cycle without
/// improvement. A restart aborts if the objective returns a non-finite value;
/// the search fails only if every restart aborts before producing a value.
pub fn local_minimize(
    f: &dyn Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    cfg: &LocalSearchConfig,
    seed: u64,
    warm_starts: &[Vec<f64>],
) -> Result<LocalMinimum> {
    cfg.validate()?;
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "invalid bound ({lo}, {hi})"
            )));
        }
    }
    let dim = bounds.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut starts: Vec<Vec<f64>> = warm_starts
        .iter()
        .take(cfg.restarts)
        .map(|w| clip_to(w, bounds))
        .collect();
    if starts.len() < cfg.restarts {
        starts.extend(lhs_box(cfg.restarts - starts.len(), bounds, &mut rng));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut start_values = Vec::new();
    let mut total_evals = 0usize;
    for start in &starts {
        let (outcome, evals) = compass_descent(f, bounds, cfg, start);
        total_evals += evals;
        if let Some((value, x, f_start)) = outcome {
            start_values.push(f_start);
            if best.as_ref().map_or(true, |(b, _)| value < *b) {
                best = Some((value, x));
            }
        }
    }
    let (value, x) = best.ok_or_else(|| {
        Error::OptimizerFailed(format!(
            "all {} restarts aborted on non-finite objective values",
            cfg.restarts
        ))
    })?;
    let _ = dim;
    Ok(LocalMinimum {
        x,
        value,
        start_values,
        evaluations: total_evals,
    })
}

fn clip_to(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
        .collect()
}

/// One descent; returns ((best value, best point, start value), evals used)
/// or (None, evals) if the start itself was non-finite.
fn compass_descent(
    f: &dyn Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    cfg: &LocalSearchConfig,
    start: &[f64],
) -> (Option<(f64, Vec<f64>, f64)>, usize) {
    let dim = bounds.len();
    let widths: Vec<f64> = bounds.iter().map(|&(lo, hi)| hi - lo).collect();
    let active: Vec<usize> = (0..dim).filter(|&d| widths[d] > 1e-15).collect();

    let mut x = start.to_vec();
    let mut fx = f(&x);
    let mut evals = 1usize;
    if !fx.is_finite() {
        return (None, evals);
    }
    let f_start = fx;
    if active.is_empty() {
        return (Some((fx, x, f_start)), evals);
    }
    let mut steps: Vec<f64> = widths.iter().map(|w| cfg.initial_step * w).collect();
    let mut last_dim = 0usize;

    'outer: while evals < cfg.max_evals_per_restart {
        for offset in 0..active.len() {
            let d = active[(last_dim + offset) % active.len()];
            for dir in [1.0, -1.0] {
                let cand = (x[d] + dir * steps[d]).clamp(bounds[d].0, bounds[d].1);
                if cand == x[d] {
                    continue;
                }
                let mut y = x.clone();
                y[d] = cand;
                let fy = f(&y);
                evals += 1;
                if !fy.is_finite() {
                    // Abort the restart, keeping the best point found so far.
                    return (Some((fx, x, f_start)), evals);
                }
                if fy < fx {
                    x = y;
                    fx = fy;
                    last_dim = (last_dim + offset) % active.len();
                    continue 'outer;
                }
                if evals >= cfg.max_evals_per_restart {
                    break 'outer;
                }
            }
        }
        // Full poll cycle without improvement: shrink.
        for d in &active {
            steps[*d] *= 0.5;
        }
        if active.iter().all(|&d| steps[d] < cfg.tol * widths[d]) {
            break;
        }
    }
    (Some((fx, x, f_start)), evals)
}

/// (mu+lambda) evolution strategy settings for mixed spaces.
#[derive(Debug, Clone)]
pub struct EsConfig {
    pub mu: usize,
    pub lambda: usize,
    pub initial_sigma: f64,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            mu: 5,
            lambda: 10,
            initial_sigma: 0.3,
        }
    }
}

/// One evaluated individual.
#[derive(Debug, Clone)]
pub struct EsEvaluation {
    pub point: MixedPoint,
    pub value: f64,
}

/// Generic (mu+lambda)-ES over a mixed box: Gaussian mutation on continuous
/// genes with a population step size adapted by the 1/5 success rule, and
/// per-gene uniform level resampling with probability `1/n_d` on categorical
/// genes. Stops after exactly `budget` objective evaluations and returns every
/// evaluation in order.
pub fn mixed_es_search(
    n_c: usize,
    level_counts: &[usize],
    f: &mut dyn FnMut(&MixedPoint) -> Result<f64>,
    budget: usize,
    seed: u64,
    cfg: &EsConfig,
) -> Result<Vec<EsEvaluation>> {
    if cfg.mu == 0 || cfg.lambda == 0 {
        return Err(Error::InvalidArgument("mu and lambda must be >= 1".into()));
    }
    if budget < cfg.mu {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} below population size {}",
            cfg.mu
        )));
    }
    let n_d = level_counts.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut trace: Vec<EsEvaluation> = Vec::with_capacity(budget);

    let sample = |rng: &mut ChaCha20Rng| -> MixedPoint {
        let x: Vec<f64> = (0..n_c).map(|_| rng.gen()).collect();
        let u: Vec<usize> = level_counts.iter().map(|&m| rng.gen_range(1..=m)).collect();
        MixedPoint::new(x, u)
    };

    let mut population: Vec<EsEvaluation> = Vec::with_capacity(cfg.mu);
    for _ in 0..cfg.mu {
        if trace.len() >= budget {
            break;
        }
        let p = sample(&mut rng);
        let value = f(&p)?;
        let e = EsEvaluation { point: p, value };
        trace.push(e.clone());
        population.push(e);
    }
    population.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());

    let mut sigma = cfg.initial_sigma;
    let resample_prob = if n_d > 0 { 1.0 / n_d as f64 } else { 0.0 };

    while trace.len() < budget {
        let gen_size = cfg.lambda.min(budget - trace.len());
        let mut offspring: Vec<EsEvaluation> = Vec::with_capacity(gen_size);
        let mut successes = 0usize;
        for _ in 0..gen_size {
            let parent = &population[rng.gen_range(0..population.len())];
            let mut x = parent.point.x.clone();
            for xi in &mut x {
                let step: f64 = rng.sample(rand_distr::StandardNormal);
                *xi = (*xi + sigma * step).clamp(0.0, 1.0);
            }
            let mut u = parent.point.u.clone();
            for (j, uj) in u.iter_mut().enumerate() {
                if rng.gen::<f64>() < resample_prob {
                    *uj = rng.gen_range(1..=level_counts[j]);
                }
            }
            let point = MixedPoint::new(x, u);
            let value = f(&point)?;
            if value < parent.value {
                successes += 1;
            }
            let e = EsEvaluation { point, value };
            trace.push(e.clone());
            offspring.push(e);
        }
        population.extend(offspring);
        population.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
        population.truncate(cfg.mu);
        // 1/5 success rule on the offspring batch.
        let rate = successes as f64 / gen_size as f64;
        if rate > 0.2 {
            sigma = (sigma / 0.85).min(1.0);
        } else if rate < 0.2 {
            sigma = (sigma * 0.85).max(1e-3);
        }
    }
    Ok(trace)
}

/// Mixed-space evolution strategy applied directly to a problem objective.
/// Used as the metamodel-free baseline; see `algorithms::run_ms_es` for the
/// run-history wrapper.
pub fn mixed_es(
    problem: &dyn MixedProblem,
    budget: usize,
    seed: u64,
) -> Result<Vec<EsEvaluation>> {
    let mut f = |p: &MixedPoint| problem.evaluate(p);
    mixed_es_search(
        problem.n_continuous(),
        problem.level_counts(),
        &mut f,
        budget,
        seed,
        &EsConfig::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Branin;

    #[test]
    fn convex_1d_is_minimized() {
        let f = |x: &[f64]| (x[0] - 0.3) * (x[0] - 0.3);
        let got = local_minimize(&f, &[(0.0, 1.0)], &LocalSearchConfig::default(), 1, &[]).unwrap();
        assert!((got.x[0] - 0.3).abs() <= 1e-4, "x = {}", got.x[0]);
    }

    #[test]
    fn flat_objective_returns_a_box_point() {
        let f = |_: &[f64]| 2.5;
        let got = local_minimize(&f, &[(0.0, 1.0), (-1.0, 4.0)], &LocalSearchConfig::default(), 2, &[])
            .unwrap();
        assert_eq!(got.value, 2.5);
        assert!((0.0..=1.0).contains(&got.x[0]));
        assert!((-1.0..=4.0).contains(&got.x[1]));
    }

    #[test]
    fn rosenbrock_improves_on_every_start() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
        };
        let got = local_minimize(&f, &[(0.0, 1.0), (0.0, 1.0)], &LocalSearchConfig::default(), 3, &[])
            .unwrap();
        assert_eq!(got.start_values.len(), 10);
        for s in &got.start_values {
            assert!(got.value <= *s);
        }
    }

    #[test]
    fn result_stays_in_box() {
        let f = |x: &[f64]| -(x[0] + x[1]);
        let bounds = [(0.2, 0.7), (-3.0, -1.0)];
        let got = local_minimize(&f, &bounds, &LocalSearchConfig::default(), 4, &[]).unwrap();
        for (v, &(lo, hi)) in got.x.iter().zip(&bounds) {
            assert!(*v >= lo && *v <= hi);
        }
        assert!((got.x[0] - 0.7).abs() < 1e-9);
        assert!((got.x[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn warm_start_is_used() {
        let f = |x: &[f64]| (x[0] - 0.5).powi(2);
        let cfg = LocalSearchConfig {
            restarts: 1,
            max_evals_per_restart: 1,
            ..Default::default()
        };
        let got = local_minimize(&f, &[(0.0, 1.0)], &cfg, 5, &[vec![0.123]]).unwrap();
        assert_eq!(got.x, vec![0.123]);
    }

    #[test]
    fn aborts_on_non_finite_everywhere() {
        let f = |_: &[f64]| f64::NAN;
        let got = local_minimize(&f, &[(0.0, 1.0)], &LocalSearchConfig::default(), 6, &[]);
        assert!(got.is_err());
    }

    #[test]
    fn zero_width_dimension_is_held_fixed() {
        let f = |x: &[f64]| x[0] * x[0] + (x[1] - 2.0).powi(2);
        let got = local_minimize(&f, &[(2.0, 2.0), (0.0, 4.0)], &LocalSearchConfig::default(), 7, &[])
            .unwrap();
        assert_eq!(got.x[0], 2.0);
        assert!((got.x[1] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn es_exhausts_budget_exactly_and_is_deterministic() {
        let trace = mixed_es(&Branin, 23, 11).unwrap();
        assert_eq!(trace.len(), 23);
        let again = mixed_es(&Branin, 23, 11).unwrap();
        for (a, b) in trace.iter().zip(&again) {
            assert_eq!(a.point, b.point);
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }

    #[test]
    fn es_best_so_far_is_monotone() {
        let mut f = |p: &MixedPoint| Ok(p.x.iter().map(|v| v * v).sum::<f64>() + p.u[0] as f64);
        let trace = mixed_es_search(2, &[3], &mut f, 100, 3, &EsConfig::default()).unwrap();
        let mut best = f64::INFINITY;
        let mut bests = Vec::new();
        for e in &trace {
            best = best.min(e.value);
            bests.push(best);
        }
        for w in bests.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn es_rejects_budget_below_population() {
        assert!(mixed_es(&Branin, 3, 0).is_err());
    }
}
