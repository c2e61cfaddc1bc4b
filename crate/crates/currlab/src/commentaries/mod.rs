//! Learned loss-weighting: a teacher network trained by differentiating
//! through student training.
//!
//! The outer loop repeats three moves. Build a short *practice* run — a
//! student trained for a few Adam steps on teacher-weighted losses — entirely
//! as graph nodes ([`unroll`]); evaluate the resulting student on a held-out
//! development set with plain unweighted cross-entropy; and backpropagate
//! that single scalar through the whole unrolled optimization to get exact
//! gradients for the teacher, which one (ordinary, out-of-graph) Adam step
//! then applies. Because the student's gradients inside the practice run are
//! themselves graph nodes, the teacher feels both how weights shift *which*
//! examples matter and how they shift the *size* of Adam's normalized
//! updates.

pub mod teacher;
pub mod unroll;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::{AutogradError, Graph, NodeId, Tensor};
use crate::curricula::CurriculaError;
use crate::datasets::{Dataset, DatasetError};
use crate::model::Mlp;
use crate::optim::{adam_step, global_update_norm, AdamConfig, AdamState, OptimError};

pub use teacher::{load_teacher, save_teacher, teacher_forward, TeacherParams};
pub use unroll::{
    estimate_unroll_scalars, graph_adam_step, unrolled_practice_training, GraphAdamState,
    PracticeConfig, UnrolledPractice,
};

#[derive(Debug, Error)]
pub enum CommentariesError {
    #[error("invalid teacher-training config: {0}")]
    InvalidConfig(String),
    #[error("teacher expects {expected} raw features, got {got}")]
    TeacherInput { expected: usize, got: usize },
    #[error(
        "unrolled practice run needs about {required} stored scalars (~{approx_mib} MiB of \
         values), over the budget of {budget}; shorten the unroll, shrink the batch or student, \
         or raise the budget"
    )]
    UnrollBudget {
        required: usize,
        budget: usize,
        approx_mib: usize,
    },
    #[error("teacher file {path}: {source}")]
    TeacherIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("teacher file is not usable: {0}")]
    TeacherFormat(String),
    #[error("practice run produced a non-finite development loss ({value}); step skipped")]
    NonFiniteDevLoss { value: f64 },
    #[error(transparent)]
    Autograd(#[from] AutogradError),
    #[error(transparent)]
    Curricula(#[from] CurriculaError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl CommentariesError {
    /// Errors that abort one outer iteration but not the whole pretraining
    /// run: a practice rollout that went non-finite.
    pub fn is_skippable(&self) -> bool {
        matches!(
            self,
            CommentariesError::NonFiniteDevLoss { .. }
                | CommentariesError::Optim(OptimError::NonFiniteGradient { .. })
        )
    }
}

/// How each outer iteration seeds its practice student.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum StudentSeedPolicy {
    /// A different student per outer iteration (`base + iteration`), so the
    /// teacher cannot overfit one initialization.
    Fresh { base: u64 },
    /// The same student every iteration; useful for deterministic debugging.
    Fixed { seed: u64 },
}

impl StudentSeedPolicy {
    pub fn seed_for(&self, iteration: u64) -> u64 {
        match self {
            StudentSeedPolicy::Fresh { base } => base.wrapping_add(iteration),
            StudentSeedPolicy::Fixed { seed } => *seed,
        }
    }
}

fn default_outer_adam() -> AdamConfig {
    AdamConfig::default()
}

fn default_student_seeds() -> StudentSeedPolicy {
    StudentSeedPolicy::Fresh { base: 1 }
}

/// Outer-loop settings for teacher pretraining.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherTrainConfig {
    pub outer_iterations: u64,
    #[serde(default = "default_outer_adam")]
    pub outer_adam: AdamConfig,
    pub teacher_hidden: usize,
    pub teacher_seed: u64,
    #[serde(default = "default_student_seeds")]
    pub student_seeds: StudentSeedPolicy,
}

/// What one outer step observed.
#[derive(Debug, Clone, Copy)]
pub struct OuterStepReport {
    /// Development loss of the practice-trained student, before the teacher
    /// update.
    pub dev_loss: f64,
    /// Global l2 norm of the teacher gradient.
    pub teacher_grad_norm: f64,
}

/// One teacher update: unroll a practice run, measure the trained student on
/// `dev` with the plain mean cross-entropy, backpropagate into the teacher,
/// and apply one Adam step to it.
///
/// On a skippable error ([`CommentariesError::is_skippable`]) the teacher and
/// optimizer state are left untouched.
pub fn teacher_outer_step(
    teacher: &mut TeacherParams,
    outer_state: &mut AdamState,
    outer_adam: &AdamConfig,
    practice: &PracticeConfig,
    train: &Dataset,
    dev: &Dataset,
    student_seed: u64,
) -> Result<OuterStepReport, CommentariesError> {
    if dev.is_empty() {
        return Err(CommentariesError::InvalidConfig(
            "development set is empty".into(),
        ));
    }
    if dev.feature_dim != practice.student.input_dim {
        return Err(CommentariesError::InvalidConfig(format!(
            "student expects {} input features, development set has {}",
            practice.student.input_dim, dev.feature_dim
        )));
    }
    if dev.class_count > practice.student.output_dim {
        return Err(CommentariesError::InvalidConfig(format!(
            "development set has {} classes, student only emits {} logits",
            dev.class_count, practice.student.output_dim
        )));
    }

    let mut graph = Graph::new();
    let phi: Vec<NodeId> = teacher
        .mlp
        .params()
        .into_iter()
        .map(|t| graph.leaf(t))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(student_seed);
    let unrolled = unrolled_practice_training(&mut graph, &phi, practice, train, &mut rng)?;

    let x = graph.leaf(dev.feature_matrix());
    let logits = Mlp::forward_graph(&mut graph, &unrolled.theta, x)?;
    let dev_labels: Vec<usize> = dev.examples.iter().map(|e| e.label).collect();
    let losses = graph.softmax_cross_entropy(logits, &dev_labels)?;
    let dev_loss = graph.mean(losses);

    let value = graph.value(dev_loss).scalar_value();
    if !value.is_finite() {
        return Err(CommentariesError::NonFiniteDevLoss { value });
    }

    let grad_map = graph.backward(dev_loss)?;
    let grads: Vec<Tensor> = phi
        .iter()
        .map(|&id| grad_map.get_or_zeros(&graph, id))
        .collect();
    let mut params = teacher.mlp.params();
    adam_step(outer_adam, outer_state, &mut params, &grads, outer_adam.gamma)?;
    teacher.mlp.set_params(&params);

    Ok(OuterStepReport {
        dev_loss: value,
        teacher_grad_norm: global_update_norm(&grads),
    })
}

/// A pretrained teacher plus the outer-loop history.
#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub teacher: TeacherParams,
    /// `(iteration, dev_loss)` for every completed outer step.
    pub dev_losses: Vec<(u64, f64)>,
    /// Iterations skipped because the practice rollout went non-finite.
    pub skipped: Vec<u64>,
}

/// Runs the full outer loop: initialize a teacher, then repeatedly update it
/// through unrolled practice runs. Skippable failures are recorded and the
/// loop continues; anything else aborts.
pub fn pretrain_teacher(
    cfg: &TeacherTrainConfig,
    practice: &PracticeConfig,
    train: &Dataset,
    dev: &Dataset,
) -> Result<PretrainOutcome, CommentariesError> {
    if cfg.teacher_hidden == 0 {
        return Err(CommentariesError::InvalidConfig(
            "teacher hidden width must be at least 1".into(),
        ));
    }
    cfg.outer_adam.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.teacher_seed);
    let mut teacher = TeacherParams::init(train.feature_dim, cfg.teacher_hidden, &mut rng);
    let mut outer_state = AdamState::new(&teacher.mlp.params());

    let mut dev_losses = Vec::new();
    let mut skipped = Vec::new();
    for iteration in 0..cfg.outer_iterations {
        let seed = cfg.student_seeds.seed_for(iteration);
        match teacher_outer_step(
            &mut teacher,
            &mut outer_state,
            &cfg.outer_adam,
            practice,
            train,
            dev,
            seed,
        ) {
            Ok(report) => dev_losses.push((iteration, report.dev_loss)),
            Err(e) if e.is_skippable() => skipped.push(iteration),
            Err(e) => return Err(e),
        }
    }

    Ok(PretrainOutcome {
        teacher,
        dev_losses,
        skipped,
    })
}

/// Trains a fresh student under the frozen teacher with full instrumentation:
/// an ordinary (non-differentiable) training loop of any length, with the
/// teacher's weights applied to each batch. `ablated` replaces each batch's
/// weights by their mean, keeping only the weights' time course. Delegates to
/// the harness training loop, so the trace schema and determinism guarantees
/// are exactly those of any other instrumented run.
pub fn evaluate_teacher(
    teacher: &TeacherParams,
    run: &crate::harness::RunSpec,
    ablated: bool,
    train: &Dataset,
    dev: &Dataset,
) -> Result<crate::harness::RunResult, crate::harness::HarnessError> {
    let mut spec = run.clone();
    spec.curriculum = crate::harness::CurriculumSource::Teacher {
        teacher: teacher.clone(),
        ablated,
    };
    crate::harness::train_run(&spec, train, dev)
}
