//! Hyper-parameter grid search with curriculum-aware selection.
//!
//! A curriculum's apparent benefit often evaporates once the baseline is
//! allowed its own learning-rate sweep, so the grid treats the curriculum
//! choice as just another axis: every (γ, batch size, curriculum) cell is
//! trained over the same seeds and scored on a selection split that stays
//! disjoint from the dev split used for reporting.

use crate::datasets::Dataset;

use super::training::{train_runs, CurriculumSource, RunSpec};
use super::HarnessError;

/// One curriculum arm of the grid, with a stable label for the result table.
#[derive(Debug, Clone)]
pub struct GridCandidate {
    pub label: String,
    pub curriculum: CurriculumSource,
}

impl GridCandidate {
    pub fn new(curriculum: CurriculumSource) -> Self {
        GridCandidate {
            label: curriculum.label(),
            curriculum,
        }
    }
}

/// The axes of the sweep. Every combination is trained.
#[derive(Debug, Clone)]
pub struct GridSpace {
    pub gammas: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub curricula: Vec<GridCandidate>,
}

/// One (cell, seed) outcome.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub gamma: f64,
    pub batch_size: usize,
    pub curriculum: String,
    pub seed: u64,
    /// Accuracy on the selection split; 0.0 when the run aborted.
    pub selection_accuracy: f64,
    pub steps_to_convergence: Option<u64>,
    pub aborted: bool,
}

/// Per-cell aggregate over seeds.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub gamma: f64,
    pub batch_size: usize,
    pub curriculum: String,
    pub mean_selection_accuracy: f64,
    /// Mean steps to convergence, counting non-converged or aborted runs as
    /// `total_steps + 1`.
    pub mean_convergence_steps: f64,
}

/// The full table plus the winning cell.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best: GridCell,
    pub cells: Vec<GridCell>,
    pub rows: Vec<GridRow>,
}

/// Splits a dev set into (selection half, reporting half). The selection half
/// is the first ⌊n/2⌋ examples; scores that drive the grid choice never see
/// the reporting half.
pub fn split_for_selection(dev: &Dataset) -> (Dataset, Dataset) {
    let cut = dev.len() / 2;
    let selection: Vec<_> = dev.examples[..cut].to_vec();
    let report: Vec<_> = dev.examples[cut..].to_vec();
    (
        Dataset {
            examples: selection,
            feature_dim: dev.feature_dim,
            class_count: dev.class_count,
        },
        Dataset {
            examples: report,
            feature_dim: dev.feature_dim,
            class_count: dev.class_count,
        },
    )
}

/// Sweeps every cell of `space` over `seeds`, scoring on `selection`.
///
/// The winner maximizes mean selection accuracy; exact ties fall to the
/// lower mean convergence-step count, then to enumeration order
/// (γ outermost, then batch size, then curriculum).
pub fn grid_search(
    base: &RunSpec,
    space: &GridSpace,
    seeds: &[u64],
    jobs: usize,
    train: &Dataset,
    selection: &Dataset,
) -> Result<GridOutcome, HarnessError> {
    if space.gammas.is_empty() {
        return Err(HarnessError::EmptyGrid("gammas"));
    }
    if space.batch_sizes.is_empty() {
        return Err(HarnessError::EmptyGrid("batch_sizes"));
    }
    if space.curricula.is_empty() {
        return Err(HarnessError::EmptyGrid("curricula"));
    }
    if seeds.is_empty() {
        return Err(HarnessError::EmptyGrid("seeds"));
    }

    let penalty_steps = (base.total_steps + 1) as f64;
    let mut rows = Vec::new();
    let mut cells = Vec::new();

    for &gamma in &space.gammas {
        for &batch_size in &space.batch_sizes {
            for candidate in &space.curricula {
                let mut spec = base.clone();
                spec.adam.gamma = gamma;
                spec.batch_size = batch_size;
                spec.curriculum = candidate.curriculum.clone();

                let runs = train_runs(&spec, seeds, jobs, train, selection)?;

                let mut acc_sum = 0.0;
                let mut step_sum = 0.0;
                for (run, &seed) in runs.iter().zip(seeds) {
                    let aborted = run.aborted.is_some();
                    let selection_accuracy = if aborted {
                        0.0
                    } else {
                        run.final_dev_accuracy
                    };
                    acc_sum += selection_accuracy;
                    step_sum += run
                        .steps_to_convergence
                        .map(|s| s as f64)
                        .unwrap_or(penalty_steps);
                    rows.push(GridRow {
                        gamma,
                        batch_size,
                        curriculum: candidate.label.clone(),
                        seed,
                        selection_accuracy,
                        steps_to_convergence: run.steps_to_convergence,
                        aborted,
                    });
                }
                cells.push(GridCell {
                    gamma,
                    batch_size,
                    curriculum: candidate.label.clone(),
                    mean_selection_accuracy: acc_sum / seeds.len() as f64,
                    mean_convergence_steps: step_sum / seeds.len() as f64,
                });
            }
        }
    }

    let mut best = 0;
    for (i, cell) in cells.iter().enumerate().skip(1) {
        let b = &cells[best];
        if cell.mean_selection_accuracy > b.mean_selection_accuracy
            || (cell.mean_selection_accuracy == b.mean_selection_accuracy
                && cell.mean_convergence_steps < b.mean_convergence_steps)
        {
            best = i;
        }
    }

    Ok(GridOutcome {
        best: cells[best].clone(),
        cells,
        rows,
    })
}
