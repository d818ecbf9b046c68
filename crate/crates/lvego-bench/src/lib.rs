//! Shared fixtures for the criterion benchmarks.

use lvego::doe::maximin_lhs_mixed;
use lvego::gp::{fit, GpModel, ModelMode, TrainingData};
use lvego::problems::by_id;

/// Evaluated design of the given size on a benchmark problem.
pub fn training_data(problem_id: &str, n: usize, seed: u64) -> TrainingData {
    let problem = by_id(problem_id).unwrap();
    let design = maximin_lhs_mixed(problem, n, seed).unwrap();
    let y: Vec<f64> = design
        .points
        .iter()
        .map(|p| problem.evaluate(p).unwrap())
        .collect();
    TrainingData::new(
        design.points.iter().map(|p| p.x.clone()).collect(),
        design.points.iter().map(|p| p.u.clone()).collect(),
        y,
        problem.level_counts().to_vec(),
    )
    .unwrap()
}

/// A trained latent model on the given benchmark.
pub fn trained_model(problem_id: &str, n: usize, seed: u64) -> GpModel {
    fit(&training_data(problem_id, n, seed), ModelMode::Latent, seed).unwrap()
}
