//! The outer optimization loops: mixed-kriging EGO with an evolution-strategy
//! acquisition search, vanilla latent-variable EGO with a discrete pre-image,
//! its augmented-Lagrangian variants, the no-refit ablation, and the pure
//! evolution-strategy baseline.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionContext;
use crate::auglag::{
    al_value, global_dual_solve, local_dual_step, ConstraintKind, DualState, GlobalDualConfig,
};
use crate::doe::maximin_lhs_mixed;
use crate::error::{Error, Result};
use crate::gp::{fit_with_options, GpModel, GpParams, LatentMap, ModelConfig, TrainingData};
use crate::optimizers::{local_minimize, mixed_es_search, EsConfig, LocalSearchConfig};
use crate::problem::{MixedPoint, MixedProblem};

/// Ids of the implemented algorithms, in canonical order.
pub const ALGORITHM_IDS: [&str; 8] = [
    "ms-mkes",
    "ms-es",
    "lv-ego",
    "nr-lv-ego",
    "alv-ego-ge",
    "alv-ego-gi",
    "alv-ego-le",
    "alv-ego-li",
];

/// Acquisition-search restarts (the relaxed EI / Lagrangian maximization).
const ACQ_RESTARTS: usize = 10;
/// EI evaluations granted to the evolution-strategy acquisition search.
const MKES_EI_BUDGET: usize = 3000;
/// Proposals closer than this mixed distance to an existing point are
/// perturbed before evaluation.
const DUPLICATE_TOL: f64 = 1e-9;

/// Dual multipliers recorded at one iteration of an augmented-Lagrangian run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualRecord {
    pub lambda: f64,
    pub rho: f64,
    /// Constraint value at the accepted relaxed solution.
    pub constraint: f64,
    /// Set when no penalty on the grid yielded a feasible dual argmin.
    pub fallback: bool,
}

/// One objective evaluation of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based evaluation index; the run's logical timestamp.
    pub t: usize,
    pub point: MixedPoint,
    pub y: f64,
    pub best_so_far: f64,
    /// Whether this iteration re-estimated the model hyperparameters.
    pub refit: bool,
    /// Hash of the latent map used at this iteration, if any.
    pub latent_hash: Option<String>,
    /// Latent map snapshot for correlation diagnostics, if any.
    pub latent: Option<LatentMap>,
    pub dual: Option<DualRecord>,
}

/// Complete, serializable record of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub problem: String,
    pub algorithm: String,
    pub seed: u64,
    pub doe_size: usize,
    pub budget: usize,
    /// True when the run stopped early after a model-fit failure.
    pub aborted: bool,
    pub records: Vec<IterationRecord>,
}

impl RunHistory {
    fn new(problem: &str, algorithm: &str, seed: u64, doe_size: usize, budget: usize) -> Self {
        Self {
            problem: problem.to_string(),
            algorithm: algorithm.to_string(),
            seed,
            doe_size,
            budget,
            aborted: false,
            records: Vec::with_capacity(budget),
        }
    }

    fn push(&mut self, point: MixedPoint, y: f64) {
        self.push_full(point, y, false, None, None);
    }

    fn push_full(
        &mut self,
        point: MixedPoint,
        y: f64,
        refit: bool,
        latent: Option<&LatentMap>,
        dual: Option<DualRecord>,
    ) {
        let best_so_far = self.records.last().map_or(y, |r| r.best_so_far.min(y));
        self.records.push(IterationRecord {
            t: self.records.len() + 1,
            point,
            y,
            best_so_far,
            refit,
            latent_hash: latent.map(|m| format!("{:016x}", m.hash64())),
            latent: latent.cloned(),
            dual,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Best evaluated point and value over the whole history.
    pub fn best(&self) -> Option<(&MixedPoint, f64)> {
        self.records
            .iter()
            .min_by(|a, b| a.y.partial_cmp(&b.y).unwrap())
            .map(|r| (&r.point, r.y))
    }

    pub fn final_best(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.best_so_far)
    }

    pub fn best_so_far_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_so_far).collect()
    }

    pub fn evaluated_points(&self) -> impl Iterator<Item = &MixedPoint> {
        self.records.iter().map(|r| &r.point)
    }

    pub fn objective_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.y)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Initial design size for a problem.
pub fn doe_size(problem: &dyn MixedProblem) -> usize {
    problem.doe_size()
}

/// Runs the algorithm with the given id.
pub fn run_algorithm(
    id: &str,
    problem: &dyn MixedProblem,
    budget: usize,
    seed: u64,
) -> Result<RunHistory> {
    match id {
        "ms-mkes" => run_ms_mkes(problem, budget, seed),
        "ms-es" => run_ms_es(problem, budget, seed),
        "lv-ego" => run_lv_ego(problem, budget, seed, true),
        "nr-lv-ego" => run_lv_ego(problem, budget, seed, false),
        "alv-ego-ge" => run_alv_ego(problem, budget, seed, DualScheme::Global, ConstraintKind::Equality),
        "alv-ego-gi" => run_alv_ego(problem, budget, seed, DualScheme::Global, ConstraintKind::Inequality),
        "alv-ego-le" => run_alv_ego(problem, budget, seed, DualScheme::Local, ConstraintKind::Equality),
        "alv-ego-li" => run_alv_ego(problem, budget, seed, DualScheme::Local, ConstraintKind::Inequality),
        other => Err(Error::UnknownAlgorithm(other.to_string())),
    }
}

/// How the Lagrange multipliers are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualScheme {
    Global,
    Local,
}

// ---------------------------------------------------------------------------
// Shared loop machinery.

struct LoopState {
    history: RunHistory,
    data: TrainingData,
    rng: ChaCha20Rng,
}

/// Evaluates the seeded initial design and assembles the starting history.
fn init_loop(
    problem: &dyn MixedProblem,
    algorithm: &str,
    budget: usize,
    seed: u64,
) -> Result<LoopState> {
    let n_doe = problem.doe_size();
    if budget <= n_doe {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} must exceed the initial design size {n_doe}"
        )));
    }
    let design = maximin_lhs_mixed(problem, n_doe, seed)?;
    let mut history = RunHistory::new(problem.name(), algorithm, seed, n_doe, budget);
    for p in &design.points {
        let y = problem.evaluate(p)?;
        history.push(p.clone(), y);
    }
    let data = data_from_history(problem, &history)?;
    Ok(LoopState {
        history,
        data,
        rng: ChaCha20Rng::seed_from_u64(seed.wrapping_add(0x9e3779b97f4a7c15)),
    })
}

fn data_from_history(problem: &dyn MixedProblem, history: &RunHistory) -> Result<TrainingData> {
    TrainingData::new(
        history.records.iter().map(|r| r.point.x.clone()).collect(),
        history.records.iter().map(|r| r.point.u.clone()).collect(),
        history.records.iter().map(|r| r.y).collect(),
        problem.level_counts().to_vec(),
    )
}

/// Perturbs a proposal that collides with an already evaluated point:
/// uniform +-0.05 on each continuous coordinate, clipped, a few times.
fn dedupe_proposal(
    mut candidate: MixedPoint,
    existing: &[MixedPoint],
    rng: &mut ChaCha20Rng,
) -> MixedPoint {
    for _ in 0..10 {
        let clash = existing
            .iter()
            .any(|q| q.mixed_distance(&candidate) <= DUPLICATE_TOL);
        if !clash {
            return candidate;
        }
        for xi in &mut candidate.x {
            *xi = (*xi + rng.gen_range(-0.05..=0.05)).clamp(0.0, 1.0);
        }
    }
    candidate
}

/// Fits with a warm start, retrying once from fresh restart points on
/// failure. `Ok(None)` means both attempts failed and the run should abort.
fn fit_or_retry(
    data: &TrainingData,
    config: ModelConfig,
    rng: &mut ChaCha20Rng,
    warm: Option<&GpParams>,
) -> Option<GpModel> {
    let seed_a = rng.next_u64();
    let seed_b = rng.next_u64();
    match fit_with_options(data, config, seed_a, warm) {
        Ok(m) => Some(m),
        Err(_) => fit_with_options(data, config, seed_b, None).ok(),
    }
}

fn evaluate_and_push(
    problem: &dyn MixedProblem,
    state: &mut LoopState,
    candidate: MixedPoint,
    refit: bool,
    latent: Option<&LatentMap>,
    dual: Option<DualRecord>,
) -> Result<()> {
    let existing: Vec<MixedPoint> = state
        .history
        .records
        .iter()
        .map(|r| r.point.clone())
        .collect();
    let point = dedupe_proposal(candidate, &existing, &mut state.rng);
    let y = problem.evaluate(&point)?;
    state.history.push_full(point, y, refit, latent, dual);
    state.data = data_from_history(problem, &state.history)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// MS-MKES: mixed kriging with compound-symmetry kernels, EI maximized by the
// mixed evolution strategy.

pub fn run_ms_mkes(problem: &dyn MixedProblem, budget: usize, seed: u64) -> Result<RunHistory> {
    let mut state = init_loop(problem, "ms-mkes", budget, seed)?;
    let mut prev_params: Option<GpParams> = None;
    while state.history.len() < budget {
        let model = match fit_or_retry(
            &state.data,
            ModelConfig::compound(),
            &mut state.rng,
            prev_params.as_ref(),
        ) {
            Some(m) => m,
            None => {
                state.history.aborted = true;
                return Ok(state.history);
            }
        };
        prev_params = Some(model.params().clone());
        let ctx = AcquisitionContext::new(&model, 0.0)?;
        let es_seed = state.rng.next_u64();
        let mut neg_ei = |p: &MixedPoint| -> Result<f64> { Ok(-ctx.ei_mixed(&p.x, &p.u)?) };
        let trace = mixed_es_search(
            problem.n_continuous(),
            problem.level_counts(),
            &mut neg_ei,
            MKES_EI_BUDGET,
            es_seed,
            &EsConfig::default(),
        )?;
        let best = trace
            .iter()
            .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
            .expect("nonempty ES trace");
        evaluate_and_push(problem, &mut state, best.point.clone(), true, None, None)?;
    }
    Ok(state.history)
}

/// Metamodel-free baseline: the mixed evolution strategy on the objective.
/// The `doe_size` field is set to the problem's design size so target metrics
/// line up across algorithms, although the strategy has no design phase.
pub fn run_ms_es(problem: &dyn MixedProblem, budget: usize, seed: u64) -> Result<RunHistory> {
    let n_doe = problem.doe_size();
    if budget <= n_doe {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} must exceed the initial design size {n_doe}"
        )));
    }
    let trace = crate::optimizers::mixed_es(problem, budget, seed)?;
    let mut history = RunHistory::new(problem.name(), "ms-es", seed, n_doe, budget);
    for e in trace {
        history.push(e.point, e.value);
    }
    Ok(history)
}

// ---------------------------------------------------------------------------
// Vanilla LV-EGO and the non-refitted ablation.

/// Latent-variable EGO: fit a latent GP, maximize EI in the relaxed
/// continuous space, recover the discrete component by exhaustive pre-image,
/// evaluate. With `refit_each_iter = false` the hyperparameters and latent
/// map are estimated once on the initial design and the posterior is only
/// re-conditioned afterwards.
pub fn run_lv_ego(
    problem: &dyn MixedProblem,
    budget: usize,
    seed: u64,
    refit_each_iter: bool,
) -> Result<RunHistory> {
    let algorithm = if refit_each_iter { "lv-ego" } else { "nr-lv-ego" };
    let mut state = init_loop(problem, algorithm, budget, seed)?;
    let mut model: Option<GpModel> = None;
    let mut prev_proposal: Option<Vec<f64>> = None;
    while state.history.len() < budget {
        let refit = refit_each_iter || model.is_none();
        let current = if refit {
            let warm = model.as_ref().map(|m| m.params().clone());
            match fit_or_retry(
                &state.data,
                ModelConfig::latent(),
                &mut state.rng,
                warm.as_ref(),
            ) {
                Some(m) => m,
                None => {
                    state.history.aborted = true;
                    return Ok(state.history);
                }
            }
        } else {
            match model.as_ref().unwrap().recondition(&state.data) {
                Ok(m) => m,
                Err(_) => {
                    state.history.aborted = true;
                    return Ok(state.history);
                }
            }
        };

        let ctx = AcquisitionContext::new(&current, 0.0)?;
        let n_c = problem.n_continuous();
        // The relaxed EI search runs over the latent hull in level-weight
        // coordinates.
        let bounds: Vec<(f64, f64)> = vec![(0.0, 1.0); n_c + ctx.hull_dims()?];
        let objective = |p: &[f64]| {
            let l = match ctx.hull_to_latent(&p[n_c..]) {
                Ok(l) => l,
                Err(_) => return f64::INFINITY,
            };
            match ctx.ei_latent(&p[..n_c], &l) {
                Ok(ei) => -ei,
                Err(_) => f64::INFINITY,
            }
        };
        let acq_seed = state.rng.next_u64();
        let mut warm: Vec<Vec<f64>> = prev_proposal.iter().cloned().collect();
        // Also restart once from the incumbent's hull coordinates.
        if let Some((best_point, _)) = state.history.best() {
            let mut w = best_point.x.clone();
            let mut offset = n_c;
            for (&m, &uj) in problem.level_counts().iter().zip(&best_point.u) {
                let mut block = vec![0.0; m];
                block[uj - 1] = 1.0;
                w.extend_from_slice(&block);
                offset += m;
            }
            let _ = offset;
            warm.push(w);
        }
        let sol = local_minimize(
            &objective,
            &bounds,
            &LocalSearchConfig::with_restarts(ACQ_RESTARTS),
            acq_seed,
            &warm,
        )?;
        prev_proposal = Some(sol.x.clone());
        let x_next = sol.x[..n_c].to_vec();
        let u_next = ctx.preimage(&x_next)?;
        let latent = current.latent_map().cloned();
        evaluate_and_push(
            problem,
            &mut state,
            MixedPoint::new(x_next, u_next),
            refit,
            latent.as_ref(),
            None,
        )?;
        model = Some(current);
    }
    Ok(state.history)
}

// ---------------------------------------------------------------------------
// ALV-EGO: the relaxed acquisition problem solved under the discreteness
// constraint with an augmented Lagrangian.

/// Augmented-Lagrangian latent-variable EGO. `scheme` picks how the
/// multipliers are estimated (grid-maximized approximate dual vs incremental
/// updates); `constraint` picks the relaxation (`Equality`: eps = 0 with the
/// Hestenes form, `Inequality`: eps = 0.01 with the Rockafellar form).
pub fn run_alv_ego(
    problem: &dyn MixedProblem,
    budget: usize,
    seed: u64,
    scheme: DualScheme,
    constraint: ConstraintKind,
) -> Result<RunHistory> {
    let algorithm = match (scheme, constraint) {
        (DualScheme::Global, ConstraintKind::Equality) => "alv-ego-ge",
        (DualScheme::Global, ConstraintKind::Inequality) => "alv-ego-gi",
        (DualScheme::Local, ConstraintKind::Equality) => "alv-ego-le",
        (DualScheme::Local, ConstraintKind::Inequality) => "alv-ego-li",
    };
    let epsilon = match constraint {
        ConstraintKind::Equality => 0.0,
        ConstraintKind::Inequality => 0.01,
    };
    let mut state = init_loop(problem, algorithm, budget, seed)?;
    let n_c = problem.n_continuous();
    let mut prev_params: Option<GpParams> = None;
    let mut prev_proposal: Option<Vec<f64>> = None;
    // Local dual scheme state, updated from the previous iteration's
    // constraint value.
    let mut dual_state = DualState::initial();
    let mut g_prev: Option<f64> = None;

    while state.history.len() < budget {
        let model = match fit_or_retry(
            &state.data,
            ModelConfig::latent(),
            &mut state.rng,
            prev_params.as_ref(),
        ) {
            Some(m) => m,
            None => {
                state.history.aborted = true;
                return Ok(state.history);
            }
        };
        prev_params = Some(model.params().clone());
        let ctx = AcquisitionContext::new(&model, epsilon)?;
        let map = model.latent_map().expect("latent mode").clone();
        let mut bounds: Vec<(f64, f64)> = vec![(0.0, 1.0); n_c];
        bounds.extend(ctx.latent_box()?);

        let f = |p: &[f64]| ctx.f_t(&p[..n_c], &p[n_c..]).unwrap_or(f64::INFINITY);
        let g = |p: &[f64]| ctx.g_t(&p[n_c..]).unwrap_or(f64::INFINITY);

        // Warm start: the previous iteration's proposal.
        let warm: Vec<Vec<f64>> = prev_proposal.iter().cloned().collect();

        let (solution, dual_record) = match scheme {
            DualScheme::Global => {
                let dual_seed = state.rng.next_u64();
                let level_counts = problem.level_counts().to_vec();
                let map_ref = &map;
                let mut make_feasible = |p: &mut Vec<f64>, rng: &mut ChaCha20Rng| {
                    let u: Vec<usize> = level_counts.iter().map(|&m| rng.gen_range(1..=m)).collect();
                    let image = map_ref.image(&u);
                    p[n_c..].copy_from_slice(&image);
                };
                let cfg = GlobalDualConfig {
                    finetune: LocalSearchConfig::with_restarts(ACQ_RESTARTS),
                    ..Default::default()
                };
                // The fine-tune warm-starts at the dual argmin point only.
                let sol = global_dual_solve(
                    constraint,
                    &f,
                    &g,
                    &bounds,
                    &mut make_feasible,
                    &[],
                    &cfg,
                    dual_seed,
                )?;
                let record = DualRecord {
                    lambda: sol.dual.lambda,
                    rho: sol.dual.rho,
                    constraint: sol.finetune_constraint,
                    fallback: sol.fallback,
                };
                (sol.point, record)
            }
            DualScheme::Local => {
                if let Some(gp) = g_prev.take() {
                    dual_state = local_dual_step(&dual_state, gp);
                }
                let s = dual_state;
                let lagrangian = |p: &[f64]| al_value(constraint, f(p), g(p), &s);
                let acq_seed = state.rng.next_u64();
                let sol = local_minimize(
                    &lagrangian,
                    &bounds,
                    &LocalSearchConfig::with_restarts(ACQ_RESTARTS),
                    acq_seed,
                    &warm,
                )?;
                let g_here = g(&sol.x);
                g_prev = Some(g_here);
                let record = DualRecord {
                    lambda: s.lambda,
                    rho: s.rho,
                    constraint: g_here,
                    fallback: false,
                };
                (sol.x, record)
            }
        };
        prev_proposal = Some(solution.clone());
        let x_next = solution[..n_c].to_vec();
        // The pre-image runs unconditionally: even with eps = 0 the solver
        // may not land exactly on a level image.
        let u_next = ctx.preimage(&x_next)?;
        evaluate_and_push(
            problem,
            &mut state,
            MixedPoint::new(x_next, u_next),
            true,
            Some(&map),
            Some(dual_record),
        )?;
    }
    Ok(state.history)
}
