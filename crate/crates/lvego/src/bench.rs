//! Experiment harness: repeated seeded runs over problems x algorithms,
//! a file-backed result store, convergence metrics and plot-ready exports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run_algorithm, RunHistory};
use crate::error::{Error, Result};
use crate::problems;

/// Campaign description, loadable from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub problems: Vec<String>,
    pub algorithms: Vec<String>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Evaluations granted on top of the initial design.
    #[serde(default = "default_budget_extra")]
    pub budget_extra: usize,
}

fn default_reps() -> usize {
    10
}

fn default_budget_extra() -> usize {
    50
}

impl CampaignConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn validate(&self) -> Result<()> {
        if self.problems.is_empty() || self.algorithms.is_empty() || self.reps == 0 {
            return Err(Error::InvalidArgument(
                "campaign needs problems, algorithms and reps >= 1".into(),
            ));
        }
        for p in &self.problems {
            problems::by_id(p)?;
        }
        for a in &self.algorithms {
            if !crate::algorithms::ALGORITHM_IDS.contains(&a.as_str()) {
                return Err(Error::UnknownAlgorithm(a.clone()));
            }
        }
        Ok(())
    }
}

/// File-stem id of one run.
pub fn run_id(problem: &str, algorithm: &str, seed: u64) -> String {
    format!("{problem}-{algorithm}-{seed}")
}

/// Outcome of one campaign job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub problem: String,
    pub algorithm: String,
    pub seed: u64,
    pub file: Option<String>,
    pub error: Option<String>,
}

/// Index of a persisted campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub config: CampaignConfig,
    pub runs: Vec<RunOutcome>,
}

/// Executes every (problem x algorithm x repetition) job with seeds
/// `base_seed + rep` and persists one JSON history per run plus a manifest.
/// Individual run failures are recorded and do not stop the campaign.
pub fn run_campaign(config: &CampaignConfig, store_dir: &Path) -> Result<CampaignManifest> {
    config.validate()?;
    std::fs::create_dir_all(store_dir)?;
    let jobs: Vec<(String, String, u64)> = config
        .problems
        .iter()
        .flat_map(|p| {
            config.algorithms.iter().flat_map(move |a| {
                (0..config.reps).map(move |rep| (p.clone(), a.clone(), config.base_seed + rep as u64))
            })
        })
        .collect();

    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|(problem_id, algorithm, seed)| {
            let result = problems::by_id(problem_id).and_then(|problem| {
                let budget = problem.doe_size() + config.budget_extra;
                run_algorithm(algorithm, problem, budget, *seed)
            });
            match result {
                Ok(history) => {
                    let file = format!("{}.json", run_id(problem_id, algorithm, *seed));
                    let write = history
                        .to_json()
                        .and_then(|json| Ok(std::fs::write(store_dir.join(&file), json)?));
                    match write {
                        Ok(()) => RunOutcome {
                            problem: problem_id.clone(),
                            algorithm: algorithm.clone(),
                            seed: *seed,
                            file: Some(file),
                            error: None,
                        },
                        Err(e) => RunOutcome {
                            problem: problem_id.clone(),
                            algorithm: algorithm.clone(),
                            seed: *seed,
                            file: None,
                            error: Some(e.to_string()),
                        },
                    }
                }
                Err(e) => RunOutcome {
                    problem: problem_id.clone(),
                    algorithm: algorithm.clone(),
                    seed: *seed,
                    file: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let manifest = CampaignManifest {
        config: config.clone(),
        runs: outcomes,
    };
    std::fs::write(
        store_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// In-memory view over persisted run histories.
#[derive(Debug, Clone)]
pub struct ResultStore {
    runs: Vec<RunHistory>,
}

impl ResultStore {
    pub fn from_runs(runs: Vec<RunHistory>) -> Self {
        Self { runs }
    }

    /// Loads every run file (everything but `manifest.json`) from a store
    /// directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut runs = Vec::new();
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && p.file_name().is_some_and(|n| n != "manifest.json")
            })
            .collect();
        entries.sort();
        for path in entries {
            let text = std::fs::read_to_string(&path)?;
            runs.push(RunHistory::from_json(&text)?);
        }
        if runs.is_empty() {
            return Err(Error::EmptyStore);
        }
        Ok(Self { runs })
    }

    pub fn runs(&self) -> &[RunHistory] {
        &self.runs
    }

    pub fn get(&self, id: &str) -> Option<&RunHistory> {
        self.runs
            .iter()
            .find(|r| run_id(&r.problem, &r.algorithm, r.seed) == id)
    }

    /// Completed (non-aborted) runs of one problem.
    fn complete_for_problem(&self, problem: &str) -> Vec<&RunHistory> {
        self.runs
            .iter()
            .filter(|r| r.problem == problem && !r.aborted)
            .collect()
    }

    fn complete_for_pair(&self, problem: &str, algorithm: &str) -> Vec<&RunHistory> {
        self.runs
            .iter()
            .filter(|r| r.problem == problem && r.algorithm == algorithm && !r.aborted)
            .collect()
    }

    fn problem_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.runs.iter().map(|r| r.problem.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    fn algorithm_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.runs.iter().map(|r| r.algorithm.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Empirical quantile with linear interpolation on the sorted sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Difficulty targets of one problem: quantiles of every objective value
/// found by every algorithm over all repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub q10: f64,
    pub q25: f64,
    pub q50: f64,
}

impl TargetSet {
    pub fn levels(&self) -> [(&'static str, f64); 3] {
        [("q10", self.q10), ("q25", self.q25), ("q50", self.q50)]
    }
}

/// Pools every objective value of every completed run on the problem and
/// returns the 10%, 25% and 50% empirical quantiles.
pub fn compute_targets(store: &ResultStore, problem: &str) -> Result<TargetSet> {
    let runs = store.complete_for_problem(problem);
    let mut pool: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.objective_values().collect::<Vec<f64>>())
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptyStore);
    }
    pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(TargetSet {
        q10: quantile(&pool, 0.10),
        q25: quantile(&pool, 0.25),
        q50: quantile(&pool, 0.50),
    })
}

/// Targets for every problem present in a store.
pub fn compute_all_targets(store: &ResultStore) -> Result<BTreeMap<String, TargetSet>> {
    let mut map = BTreeMap::new();
    for problem in store.problem_ids() {
        let t = compute_targets(store, &problem)?;
        map.insert(problem, t);
    }
    Ok(map)
}

/// Per-target metrics of one (problem, algorithm) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub level: String,
    pub target: f64,
    /// First post-design iteration at which the median best-so-far reaches
    /// the target (1-based), if it ever does.
    pub iterations_to_median_success: Option<usize>,
    /// Fraction of runs whose final best reaches the target.
    pub success_rate: f64,
}

/// Convergence metrics of one (problem, algorithm) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub problem: String,
    pub algorithm: String,
    pub doe_size: usize,
    /// Median best-so-far per evaluation index (1-based).
    pub median_curve: Vec<f64>,
    /// Interquartile range of best-so-far per evaluation index.
    pub iqr_curve: Vec<f64>,
    pub targets: Vec<TargetMetrics>,
}

/// Target metrics averaged over problems, per algorithm and level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub algorithm: String,
    pub level: String,
    pub mean_success_rate: f64,
    /// Mean iterations to median success, with unreached targets counted as
    /// the full post-design budget.
    pub mean_iterations_to_median_success: f64,
}

/// Full metrics report; recomputable from persisted histories alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub targets: BTreeMap<String, TargetSet>,
    pub pairs: Vec<PairMetrics>,
    pub averaged: Vec<AveragedMetrics>,
}

/// Computes every metric family from a store and precomputed targets.
pub fn compute_metrics(
    store: &ResultStore,
    targets: &BTreeMap<String, TargetSet>,
) -> Result<MetricsReport> {
    let mut pairs = Vec::new();
    for problem in store.problem_ids() {
        let target_set = targets.get(&problem).ok_or_else(|| {
            Error::InvalidArgument(format!("no targets computed for problem {problem}"))
        })?;
        for algorithm in store.algorithm_ids() {
            let runs = store.complete_for_pair(&problem, &algorithm);
            if runs.is_empty() {
                continue;
            }
            pairs.push(pair_metrics(&problem, &algorithm, &runs, target_set));
        }
    }
    let averaged = averaged_metrics(&pairs);
    Ok(MetricsReport {
        targets: targets.clone(),
        pairs,
        averaged,
    })
}

fn pair_metrics(
    problem: &str,
    algorithm: &str,
    runs: &[&RunHistory],
    targets: &TargetSet,
) -> PairMetrics {
    let doe_size = runs.iter().map(|r| r.doe_size).min().unwrap_or(0);
    let horizon = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    let curves: Vec<Vec<f64>> = runs.iter().map(|r| r.best_so_far_curve()).collect();
    let mut median_curve = Vec::with_capacity(horizon);
    let mut iqr_curve = Vec::with_capacity(horizon);
    for i in 0..horizon {
        let mut vals: Vec<f64> = curves.iter().map(|c| c[i]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        median_curve.push(quantile(&vals, 0.5));
        iqr_curve.push(quantile(&vals, 0.75) - quantile(&vals, 0.25));
    }
    let finals: Vec<f64> = runs.iter().map(|r| r.final_best()).collect();
    let targets = targets
        .levels()
        .iter()
        .map(|&(level, target)| {
            let iterations_to_median_success = median_curve[doe_size.min(horizon)..]
                .iter()
                .position(|&m| m <= target)
                .map(|k| k + 1);
            let hits = finals.iter().filter(|&&f| f <= target).count();
            TargetMetrics {
                level: level.to_string(),
                target,
                iterations_to_median_success,
                success_rate: hits as f64 / finals.len() as f64,
            }
        })
        .collect();
    PairMetrics {
        problem: problem.to_string(),
        algorithm: algorithm.to_string(),
        doe_size,
        median_curve,
        iqr_curve,
        targets,
    }
}

fn averaged_metrics(pairs: &[PairMetrics]) -> Vec<AveragedMetrics> {
    let mut algorithms: Vec<String> = pairs.iter().map(|p| p.algorithm.clone()).collect();
    algorithms.sort();
    algorithms.dedup();
    let mut out = Vec::new();
    for algorithm in &algorithms {
        for level in ["q10", "q25", "q50"] {
            let mut rates = Vec::new();
            let mut iters = Vec::new();
            for pair in pairs.iter().filter(|p| &p.algorithm == algorithm) {
                let post_budget = pair.median_curve.len().saturating_sub(pair.doe_size);
                if let Some(tm) = pair.targets.iter().find(|t| t.level == level) {
                    rates.push(tm.success_rate);
                    iters.push(
                        tm.iterations_to_median_success.unwrap_or(post_budget) as f64,
                    );
                }
            }
            if rates.is_empty() {
                continue;
            }
            out.push(AveragedMetrics {
                algorithm: algorithm.clone(),
                level: level.to_string(),
                mean_success_rate: rates.iter().sum::<f64>() / rates.len() as f64,
                mean_iterations_to_median_success: iters.iter().sum::<f64>()
                    / iters.len() as f64,
            });
        }
    }
    out
}

/// CSV header of the per-iteration curve export.
pub const CURVES_CSV_HEADER: &str = "problem,algorithm,iteration,statistic,value";

/// Writes `curves.csv`, `targets.csv` and `averaged.csv` into `dir`.
pub fn export_csv(report: &MetricsReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut curves = String::from(CURVES_CSV_HEADER);
    curves.push('\n');
    for pair in &report.pairs {
        for (stat, curve) in [("median", &pair.median_curve), ("iqr", &pair.iqr_curve)] {
            for (i, v) in curve.iter().enumerate() {
                curves.push_str(&format!(
                    "{},{},{},{},{}\n",
                    pair.problem,
                    pair.algorithm,
                    i + 1,
                    stat,
                    v
                ));
            }
        }
    }
    let curves_path = dir.join("curves.csv");
    std::fs::write(&curves_path, curves)?;

    let mut targets =
        String::from("problem,algorithm,level,target,iterations_to_median_success,success_rate\n");
    for pair in &report.pairs {
        for t in &pair.targets {
            targets.push_str(&format!(
                "{},{},{},{},{},{}\n",
                pair.problem,
                pair.algorithm,
                t.level,
                t.target,
                t.iterations_to_median_success
                    .map_or(String::from("unreached"), |k| k.to_string()),
                t.success_rate
            ));
        }
    }
    let targets_path = dir.join("targets.csv");
    std::fs::write(&targets_path, targets)?;

    let mut averaged =
        String::from("algorithm,level,mean_success_rate,mean_iterations_to_median_success\n");
    for a in &report.averaged {
        averaged.push_str(&format!(
            "{},{},{},{}\n",
            a.algorithm, a.level, a.mean_success_rate, a.mean_iterations_to_median_success
        ));
    }
    let averaged_path = dir.join("averaged.csv");
    std::fs::write(&averaged_path, averaged)?;
    Ok(vec![curves_path, targets_path, averaged_path])
}

/// Writes the full report as one JSON document.
pub fn export_json(report: &MetricsReport, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
    Ok(path)
}

/// Re-imports a JSON report (round-trips [`export_json`] exactly).
pub fn import_json(path: &Path) -> Result<MetricsReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Per-iteration categorical correlation matrices of one run as CSV
/// (`iteration,variable,row,col,value`), from the latent snapshots in the
/// run history.
pub fn latent_correlation_csv(store: &ResultStore, id: &str) -> Result<String> {
    let run = store
        .get(id)
        .ok_or_else(|| Error::InvalidArgument(format!("no run `{id}` in the store")))?;
    let mut out = String::from("iteration,variable,row,col,value\n");
    let mut any = false;
    for record in &run.records {
        if let Some(map) = &record.latent {
            any = true;
            for j in 0..map.n_vars() {
                let m = map.level_counts()[j];
                let r = map.correlation_matrix(j)?;
                for k in 0..m {
                    for l in 0..m {
                        out.push_str(&format!(
                            "{},{},{},{},{}\n",
                            record.t,
                            j + 1,
                            k + 1,
                            l + 1,
                            r[k * m + l]
                        ));
                    }
                }
            }
        }
    }
    if !any {
        return Err(Error::UnsupportedMode(
            "run carries no latent snapshots (not a latent-variable algorithm)",
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::run_lv_ego;
    use crate::problems::Branin;

    fn tiny_config() -> CampaignConfig {
        CampaignConfig {
            problems: vec!["branin".into()],
            algorithms: vec!["lv-ego".into(), "ms-es".into()],
            reps: 3,
            base_seed: 100,
            budget_extra: 2,
        }
    }

    #[test]
    fn quantile_linear_interpolation() {
        let vals: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(quantile(&vals, 0.5), 50.5);
        assert_eq!(quantile(&vals, 0.0), 1.0);
        assert_eq!(quantile(&vals, 1.0), 100.0);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
    }

    #[test]
    fn campaign_writes_expected_files_and_is_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        let manifest = run_campaign(&cfg, dir_a.path()).unwrap();
        assert_eq!(manifest.runs.len(), 6);
        assert!(manifest.runs.iter().all(|r| r.error.is_none()));
        let files: Vec<_> = std::fs::read_dir(dir_a.path()).unwrap().collect();
        assert_eq!(files.len(), 7); // 6 runs + manifest

        run_campaign(&cfg, dir_b.path()).unwrap();
        let mut names: Vec<String> = std::fs::read_dir(dir_a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        for name in names {
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical campaigns");
        }
    }

    #[test]
    fn campaign_records_individual_failures_and_continues() {
        // budget_extra = 0 makes every run fail its budget precondition.
        let dir = tempfile::tempdir().unwrap();
        let cfg = CampaignConfig {
            budget_extra: 0,
            ..tiny_config()
        };
        let manifest = run_campaign(&cfg, dir.path()).unwrap();
        assert_eq!(manifest.runs.len(), 6);
        assert!(manifest.runs.iter().all(|r| r.error.is_some()));
    }

    #[test]
    fn campaign_validates_ids() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        cfg.problems = vec!["nope".into()];
        assert!(run_campaign(&cfg, dir.path()).is_err());
        let mut cfg = tiny_config();
        cfg.algorithms = vec!["nope".into()];
        assert!(run_campaign(&cfg, dir.path()).is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg =
            CampaignConfig::from_json(r#"{"problems":["branin"],"algorithms":["lv-ego"]}"#)
                .unwrap();
        assert_eq!(cfg.reps, 10);
        assert_eq!(cfg.base_seed, 0);
        assert_eq!(cfg.budget_extra, 50);
    }

    #[test]
    fn targets_pool_all_values() {
        // A single run with constant value c: all targets equal c.
        let mut h = run_lv_ego(&Branin, 17, 3, true).unwrap();
        for r in &mut h.records {
            r.y = 4.25;
            r.best_so_far = 4.25;
        }
        let store = ResultStore::from_runs(vec![h]);
        let t = compute_targets(&store, "branin").unwrap();
        assert_eq!(t.q10, 4.25);
        assert_eq!(t.q25, 4.25);
        assert_eq!(t.q50, 4.25);
        assert!(compute_targets(&store, "goldstein").is_err());
    }

    #[test]
    fn targets_match_sort_based_oracle() {
        let runs: Vec<_> = (0..4)
            .map(|rep| run_lv_ego(&Branin, 18, 200 + rep, true).unwrap())
            .collect();
        let store = ResultStore::from_runs(runs.clone());
        let t = compute_targets(&store, "branin").unwrap();
        // Independent sort-and-index oracle.
        let mut pool: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.records.iter().map(|rec| rec.y))
            .collect();
        pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = pool.len();
        let oracle = |p: f64| {
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            pool[lo] + (h - lo as f64) * (pool[(lo + 1).min(n - 1)] - pool[lo])
        };
        assert!((t.q50 - oracle(0.5)).abs() < 1e-12);
        assert!((t.q10 - oracle(0.1)).abs() < 1e-12);
        // Lower quantiles are harder targets for minimization.
        assert!(t.q10 <= t.q25 && t.q25 <= t.q50);
    }

    #[test]
    fn metrics_degenerate_cases() {
        let h = run_lv_ego(&Branin, 17, 5, true).unwrap();
        let curve = h.best_so_far_curve();
        let store = ResultStore::from_runs(vec![h.clone(), h.clone(), h]);
        let targets = compute_all_targets(&store).unwrap();
        let report = compute_metrics(&store, &targets).unwrap();
        let pair = &report.pairs[0];
        // Median of identical runs is the run's own curve; IQR is zero.
        assert_eq!(pair.median_curve, curve);
        assert!(pair.iqr_curve.iter().all(|&v| v == 0.0));
        // Success rate definition: every run reaches the median target here.
        let q50 = pair.targets.iter().find(|t| t.level == "q50").unwrap();
        assert_eq!(q50.success_rate, 1.0);
    }

    #[test]
    fn success_rate_zero_when_targets_unreachable() {
        let mut h = run_lv_ego(&Branin, 17, 7, true).unwrap();
        let store_targets = TargetSet {
            q10: -1e9,
            q25: -1e9,
            q50: -1e9,
        };
        let mut targets = BTreeMap::new();
        targets.insert("branin".to_string(), store_targets);
        h.records.last_mut().unwrap().best_so_far = 10.0;
        let store = ResultStore::from_runs(vec![h]);
        let report = compute_metrics(&store, &targets).unwrap();
        for t in &report.pairs[0].targets {
            assert_eq!(t.success_rate, 0.0);
            assert!(t.iterations_to_median_success.is_none());
        }
    }

    #[test]
    fn csv_export_schema_and_row_count() {
        let cfg = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        run_campaign(&cfg, dir.path()).unwrap();
        let store = ResultStore::load(dir.path()).unwrap();
        let targets = compute_all_targets(&store).unwrap();
        let report = compute_metrics(&store, &targets).unwrap();
        let out = tempfile::tempdir().unwrap();
        let files = export_csv(&report, out.path()).unwrap();
        let curves = std::fs::read_to_string(&files[0]).unwrap();
        let mut lines = curves.lines();
        assert_eq!(lines.next().unwrap(), CURVES_CSV_HEADER);
        // problems x algorithms x iterations x statistics data rows.
        let expected: usize = report
            .pairs
            .iter()
            .map(|p| p.median_curve.len() + p.iqr_curve.len())
            .sum();
        assert_eq!(lines.count(), expected);
        assert_eq!(expected, 1 * 2 * 18 * 2);
    }

    #[test]
    fn json_report_round_trips() {
        let cfg = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        run_campaign(&cfg, dir.path()).unwrap();
        let store = ResultStore::load(dir.path()).unwrap();
        let targets = compute_all_targets(&store).unwrap();
        let report = compute_metrics(&store, &targets).unwrap();
        let out = tempfile::tempdir().unwrap();
        let path = export_json(&report, out.path()).unwrap();
        let back = import_json(&path).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn latent_diagnostics_csv() {
        let h = run_lv_ego(&Branin, 18, 9, true).unwrap();
        let id = run_id(&h.problem, &h.algorithm, h.seed);
        let store = ResultStore::from_runs(vec![h]);
        let csv = latent_correlation_csv(&store, &id).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,variable,row,col,value");
        // Two post-design iterations, one variable with 4 levels each.
        assert_eq!(lines.len(), 1 + 2 * 16);
        // Diagonal entries are 1 (no collapsed level in practice).
        assert!(lines[1].starts_with("17,1,1,1,"));

        // A run without snapshots is refused.
        let es = crate::algorithms::run_ms_es(&Branin, 17, 2).unwrap();
        let id = run_id(&es.problem, &es.algorithm, es.seed);
        let store = ResultStore::from_runs(vec![es]);
        assert!(latent_correlation_csv(&store, &id).is_err());
        assert!(latent_correlation_csv(&store, "missing").is_err());
    }
}
