//! Fixed (non-learned) curricula: step-indexed weighting policies, difficulty
//! orderings with a growing-prefix schedule, weighted losses, and the weight
//! statistics the traces report.
//!
//! Two families live here:
//!
//! * **Toy policies** map the step index alone to a loss weight in `[0, 1]`.
//!   They exist to drive the optimizer with known weight *trajectories* —
//!   ramps up, ramps down, a constant, a sigmoid switch — so update-size
//!   effects can be attributed to the trajectory shape.
//! * **Hand-crafted curricula** sort a dataset by a difficulty measure
//!   (sequence length or reference loss) and train on a prefix whose size
//!   grows on a step schedule, sampling uniformly with replacement from the
//!   currently available portion.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::{AutogradError, Graph, NodeId, Tensor};
use crate::datasets::{uniform_batch_indices, Dataset, Example};
use crate::model::Mlp;

#[derive(Debug, Error)]
pub enum CurriculaError {
    #[error("invalid policy parameter: {0}")]
    InvalidPolicy(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("example {index} lacks the `{measure}` difficulty score")]
    MissingScore { index: usize, measure: &'static str },
    #[error("example {index} has non-finite `{measure}` score {value}")]
    NonFiniteScore {
        index: usize,
        measure: &'static str,
        value: f64,
    },
    #[error("cannot sample from an empty dataset")]
    EmptyDataset,
    #[error("cannot ablate an empty batch")]
    EmptyBatch,
    #[error("batch weights must lie in [0, 1]: entry {index} is {value}")]
    WeightOutOfRange { index: usize, value: f64 },
    #[error("correlation undefined: {0}")]
    DegenerateCorrelation(&'static str),
    #[error(transparent)]
    Autograd(#[from] AutogradError),
}

fn default_linear_kappa() -> f64 {
    2000.0
}

fn default_sigmoid_kappa() -> f64 {
    0.005
}

fn default_sigmoid_lambda() -> f64 {
    1000.0
}

/// A loss weight as a function of the step index only. All four shapes map
/// into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ToyPolicy {
    /// `clamp(i / kappa, 0, 1)`: ramps from 0 up to 1 over `kappa` steps.
    LinearUp {
        #[serde(default = "default_linear_kappa")]
        kappa: f64,
    },
    /// `clamp(1 - i / kappa, 0, 1)`: ramps from 1 down to 0 over `kappa` steps.
    LinearDown {
        #[serde(default = "default_linear_kappa")]
        kappa: f64,
    },
    /// Always `0.5`: a curriculum that rescales but never *changes*, the
    /// control arm for scale-invariance checks.
    Constant,
    /// `1 / (1 + exp(-(i - lambda) * kappa))`: a smooth switch centered at
    /// step `lambda` with slope `kappa`.
    Sigmoid {
        #[serde(default = "default_sigmoid_kappa")]
        kappa: f64,
        #[serde(default = "default_sigmoid_lambda")]
        lambda: f64,
    },
}

impl ToyPolicy {
    pub fn linear_up() -> Self {
        ToyPolicy::LinearUp {
            kappa: default_linear_kappa(),
        }
    }

    pub fn linear_down() -> Self {
        ToyPolicy::LinearDown {
            kappa: default_linear_kappa(),
        }
    }

    pub fn sigmoid() -> Self {
        ToyPolicy::Sigmoid {
            kappa: default_sigmoid_kappa(),
            lambda: default_sigmoid_lambda(),
        }
    }

    /// Stable snake_case name, matching the serialized `kind` tag.
    pub fn name(&self) -> &'static str {
        match self {
            ToyPolicy::LinearUp { .. } => "linear_up",
            ToyPolicy::LinearDown { .. } => "linear_down",
            ToyPolicy::Constant => "constant",
            ToyPolicy::Sigmoid { .. } => "sigmoid",
        }
    }

    pub fn validate(&self) -> Result<(), CurriculaError> {
        match *self {
            ToyPolicy::LinearUp { kappa } | ToyPolicy::LinearDown { kappa } => {
                if !(kappa > 0.0) || !kappa.is_finite() {
                    return Err(CurriculaError::InvalidPolicy(format!(
                        "linear ramp needs kappa > 0, got {}",
                        kappa
                    )));
                }
            }
            ToyPolicy::Sigmoid { kappa, lambda } => {
                if !(kappa > 0.0) || !kappa.is_finite() || !lambda.is_finite() {
                    return Err(CurriculaError::InvalidPolicy(format!(
                        "sigmoid needs kappa > 0 and finite lambda, got kappa = {}, lambda = {}",
                        kappa, lambda
                    )));
                }
            }
            ToyPolicy::Constant => {}
        }
        Ok(())
    }

    /// The weight at step `i`.
    pub fn weight(&self, i: u64) -> f64 {
        let i = i as f64;
        match *self {
            ToyPolicy::LinearUp { kappa } => (i / kappa).clamp(0.0, 1.0),
            ToyPolicy::LinearDown { kappa } => (1.0 - i / kappa).clamp(0.0, 1.0),
            ToyPolicy::Constant => 0.5,
            ToyPolicy::Sigmoid { kappa, lambda } => {
                1.0 / (1.0 + (-((i - lambda) * kappa)).exp())
            }
        }
    }
}

/// Replaces every weight in the batch by the batch mean — the ablation that
/// keeps each step's total weight while deleting all *per-example*
/// differentiation. What survives this ablation is a step-size effect, not an
/// example-selection effect.
pub fn batch_mean_ablation(weights: &[f64]) -> Result<Vec<f64>, CurriculaError> {
    if weights.is_empty() {
        return Err(CurriculaError::EmptyBatch);
    }
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    Ok(vec![mean; weights.len()])
}

/// Growing-prefix schedule: the available portion starts at `start_portion`
/// and gains `step_size` every `increment` steps, capped at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFunction {
    pub start_portion: f64,
    pub step_size: f64,
    pub increment: u64,
}

impl ScheduleFunction {
    pub fn new(start_portion: f64, step_size: f64, increment: u64) -> Result<Self, CurriculaError> {
        let s = ScheduleFunction {
            start_portion,
            step_size,
            increment,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CurriculaError> {
        if !(self.start_portion > 0.0 && self.start_portion <= 1.0) {
            return Err(CurriculaError::InvalidSchedule(format!(
                "start_portion must lie in (0, 1], got {}",
                self.start_portion
            )));
        }
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(CurriculaError::InvalidSchedule(format!(
                "step_size must be finite and >= 0, got {}",
                self.step_size
            )));
        }
        if self.increment == 0 {
            return Err(CurriculaError::InvalidSchedule(
                "increment must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Fraction of the ordered dataset available at step `i`:
    /// `min(1, start + step_size * floor(i / increment))`.
    pub fn available_portion(&self, i: u64) -> f64 {
        let raised = self.start_portion + self.step_size * (i / self.increment) as f64;
        raised.min(1.0)
    }

    /// First step at which the whole dataset is available.
    pub fn saturation_step(&self) -> u64 {
        if self.start_portion >= 1.0 {
            return 0;
        }
        if self.step_size == 0.0 {
            return u64::MAX;
        }
        let raises = ((1.0 - self.start_portion) / self.step_size).ceil() as u64;
        raises * self.increment
    }
}

/// Number of leading examples available under `portion`: `ceil(portion * n)`,
/// at least 1. Products within one float ulp of an integer snap to it first,
/// so `0.4 * 10` yields 4 rather than `ceil(4.000000000000001) = 5`.
pub fn prefix_len(n: usize, portion: f64) -> usize {
    let raw = portion * n as f64;
    let snapped = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (snapped as usize).clamp(1, n)
}

/// Difficulty measures a dataset can carry per example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyMeasure {
    /// The `sequence_length` field (variable-length tasks).
    SequenceLength,
    /// The `reference_loss` field: cross-entropy under a trained reference
    /// model (or a CSV `difficulty` column).
    ReferenceLoss,
}

impl DifficultyMeasure {
    pub fn name(&self) -> &'static str {
        match self {
            DifficultyMeasure::SequenceLength => "sequence_length",
            DifficultyMeasure::ReferenceLoss => "reference_loss",
        }
    }

    /// The example's score under this measure.
    pub fn score(&self, index: usize, example: &Example) -> Result<f64, CurriculaError> {
        let value = match self {
            DifficultyMeasure::SequenceLength => example.sequence_length.map(|l| l as f64),
            DifficultyMeasure::ReferenceLoss => example.reference_loss,
        };
        let value = value.ok_or(CurriculaError::MissingScore {
            index,
            measure: self.name(),
        })?;
        if !value.is_finite() {
            return Err(CurriculaError::NonFiniteScore {
                index,
                measure: self.name(),
                value,
            });
        }
        Ok(value)
    }
}

/// One entry of an ordered dataset: the example, its difficulty score, and
/// where it sat in the original dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedExample {
    pub example: Example,
    pub score: f64,
    pub original_index: usize,
}

/// A dataset sorted ascending by difficulty (stable: ties keep their original
/// relative order).
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedDataset {
    pub entries: Vec<OrderedExample>,
    pub feature_dim: usize,
    pub class_count: usize,
}

impl OrderedDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Features of selected entries as an `[idx.len(), feature_dim]` tensor.
    pub fn feature_matrix_of(&self, idx: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(idx.len() * self.feature_dim);
        for &i in idx {
            data.extend_from_slice(&self.entries[i].example.features);
        }
        Tensor::from_vec(vec![idx.len(), self.feature_dim], data)
    }

    pub fn labels_of(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.entries[i].example.label).collect()
    }
}

/// Sorts ascending by the requested measure. Every example must carry it.
pub fn order_by_difficulty(
    ds: &Dataset,
    measure: DifficultyMeasure,
) -> Result<OrderedDataset, CurriculaError> {
    let mut entries = ds
        .examples
        .iter()
        .enumerate()
        .map(|(index, example)| {
            Ok(OrderedExample {
                score: measure.score(index, example)?,
                example: example.clone(),
                original_index: index,
            })
        })
        .collect::<Result<Vec<_>, CurriculaError>>()?;
    // Scores are finite by construction, so the comparison is total; Vec's
    // stable sort preserves the original order among ties.
    entries.sort_by(|a, b| a.score.partial_cmp(&b.score).unwrap());
    Ok(OrderedDataset {
        entries,
        feature_dim: ds.feature_dim,
        class_count: ds.class_count,
    })
}

/// Draws a batch (indices into `ordered.entries`) uniformly with replacement
/// from the prefix the schedule exposes at step `i`.
pub fn sample_batch(
    ordered: &OrderedDataset,
    schedule: &ScheduleFunction,
    i: u64,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, CurriculaError> {
    if ordered.is_empty() {
        return Err(CurriculaError::EmptyDataset);
    }
    let prefix = prefix_len(ordered.len(), schedule.available_portion(i));
    Ok(uniform_batch_indices(prefix, batch_size, rng))
}

/// Mean of elementwise `weights * losses` as a graph node — the training
/// objective every curriculum variant optimizes. Checks that weights lie in
/// `[0, 1]` and shapes agree.
pub fn weighted_loss(
    graph: &mut Graph,
    losses: NodeId,
    weights: NodeId,
) -> Result<NodeId, CurriculaError> {
    if let Some((index, &value)) = graph
        .value(weights)
        .data()
        .iter()
        .enumerate()
        .find(|(_, w)| !(0.0..=1.0).contains(*w))
    {
        return Err(CurriculaError::WeightOutOfRange { index, value });
    }
    let product = graph.mul(weights, losses)?;
    Ok(graph.mean(product))
}

/// Batch-weight statistics reported in traces: the mean and the coefficient
/// of variation (population standard deviation over mean; 0 when the mean is
/// 0). The latter measures how *differentiated* the weights are, independent
/// of their overall level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStats {
    pub mean: f64,
    pub sigma_normal: f64,
}

pub fn weight_stats(weights: &[f64]) -> WeightStats {
    assert!(!weights.is_empty(), "weight_stats of an empty batch");
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return WeightStats {
            mean,
            sigma_normal: 0.0,
        };
    }
    let var = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
    WeightStats {
        mean,
        sigma_normal: var.sqrt() / mean,
    }
}

/// Pearson correlation, or `None` when either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "pearson needs paired samples");
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation between per-example difficulty scores and the l2 norm
/// of each example's loss gradient at the given model. This is the quantity
/// that decides whether an easy-first ordering feeds the optimizer rising or
/// falling gradient magnitudes.
pub fn difficulty_gradient_correlation(
    ds: &Dataset,
    model: &Mlp,
    measure: DifficultyMeasure,
) -> Result<f64, CurriculaError> {
    if ds.is_empty() {
        return Err(CurriculaError::EmptyDataset);
    }
    let scores = ds
        .examples
        .iter()
        .enumerate()
        .map(|(i, ex)| measure.score(i, ex))
        .collect::<Result<Vec<_>, _>>()?;
    let norms: Vec<f64> = ds
        .examples
        .iter()
        .map(|ex| model.example_grad_norm(ex))
        .collect();
    pearson(&scores, &norms).ok_or(CurriculaError::DegenerateCorrelation(
        "difficulty scores or gradient norms have zero variance",
    ))
}
