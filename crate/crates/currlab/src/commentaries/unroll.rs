//! Differentiable practice training: a short Adam run on a student model,
//! built entirely as graph nodes so the final student parameters remain a
//! function of the teacher parameters.
//!
//! Each inner step samples a batch, weights the per-example losses with the
//! teacher's output, emits the weighted-loss gradient as graph nodes, and
//! applies an in-graph Adam step whose arithmetic mirrors
//! [`crate::optim::adam_step`] operation for operation. Because every
//! intermediate stays in the graph, one numeric backward pass from a
//! development loss on the final parameters yields exact teacher gradients
//! through the whole optimization — including the gradient-weighting path
//! that makes loss weights matter to Adam's normalized update sizes.

use rand::{Rng, SeedableRng};

use crate::autograd::{Graph, NodeId, Tensor};
use crate::curricula::weighted_loss;
use crate::datasets::{uniform_batch_indices, Dataset};
use crate::model::{Mlp, MlpSpec};
use crate::optim::{AdamConfig, OptimError};

use super::teacher::teacher_forward;
use super::CommentariesError;

/// In-graph Adam moments: node ids for `m` and `v` plus the step counter.
#[derive(Debug, Clone)]
pub struct GraphAdamState {
    m: Vec<NodeId>,
    v: Vec<NodeId>,
    step: u64,
}

impl GraphAdamState {
    /// Zero moment leaves shaped like the given parameter nodes.
    pub fn new(graph: &mut Graph, params: &[NodeId]) -> Self {
        let zeros_like = |graph: &mut Graph, ids: &[NodeId]| {
            ids.iter()
                .map(|&p| {
                    let shape = graph.value(p).shape().to_vec();
                    graph.leaf(Tensor::zeros(shape))
                })
                .collect()
        };
        GraphAdamState {
            m: zeros_like(graph, params),
            v: zeros_like(graph, params),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam step built as graph nodes. Returns the updated parameter nodes;
/// the moment nodes in `state` are replaced by their updated versions.
///
/// The emitted arithmetic reproduces [`crate::optim::adam_step`] exactly —
/// same operation order, same bias-correction scalars — so an unrolled run
/// with all-one weights matches a plain training loop bit for bit.
pub fn graph_adam_step(
    graph: &mut Graph,
    config: &AdamConfig,
    state: &mut GraphAdamState,
    params: &[NodeId],
    grads: &[NodeId],
    lr: f64,
) -> Result<Vec<NodeId>, OptimError> {
    config.validate()?;
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(OptimError::ParamCount {
            expected: state.m.len(),
            got: params.len().max(grads.len()),
        });
    }
    for (i, (&p, &g)) in params.iter().zip(grads).enumerate() {
        if graph.value(p).shape() != graph.value(g).shape() {
            return Err(OptimError::GradientShape {
                param_index: i,
                expected: graph.value(p).shape().to_vec(),
                got: graph.value(g).shape().to_vec(),
            });
        }
        if let Some(offset) = graph.value(g).data().iter().position(|x| !x.is_finite()) {
            return Err(OptimError::NonFiniteGradient {
                param_index: i,
                offset,
            });
        }
    }

    state.step += 1;
    let i = state.step;
    let bias1 = 1.0 - config.beta1.powi(i as i32);
    let bias2 = 1.0 - config.beta2.powi(i as i32);

    let mut next = Vec::with_capacity(params.len());
    for (k, (&p, &g)) in params.iter().zip(grads).enumerate() {
        let m_scaled = graph.scalar_mul(state.m[k], config.beta1);
        let g_scaled = graph.scalar_mul(g, 1.0 - config.beta1);
        let m_new = graph.add(m_scaled, g_scaled).expect("m shapes agree");

        let g_sq = graph.square(g);
        let v_scaled = graph.scalar_mul(state.v[k], config.beta2);
        let g_sq_scaled = graph.scalar_mul(g_sq, 1.0 - config.beta2);
        let v_new = graph.add(v_scaled, g_sq_scaled).expect("v shapes agree");

        let m_hat = graph.scalar_div(m_new, bias1);
        let v_hat = graph.scalar_div(v_new, bias2);
        let v_root = graph.sqrt(v_hat);
        let denom = graph.scalar_add(v_root, config.epsilon);
        let delta = graph.div(m_hat, denom).expect("delta shapes agree");
        let step_term = graph.scalar_mul(delta, lr);
        let p_new = graph.sub(p, step_term).expect("param shapes agree");

        state.m[k] = m_new;
        state.v[k] = v_new;
        next.push(p_new);
    }
    Ok(next)
}

fn default_scalar_budget() -> usize {
    64_000_000
}

/// Configuration for one unrolled practice run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PracticeConfig {
    pub student: MlpSpec,
    /// Inner optimization steps to unroll.
    pub inner_steps: u64,
    pub batch_size: usize,
    #[serde(default)]
    pub inner_adam: AdamConfig,
    /// Upper bound on stored graph scalars for the whole unroll. The backward
    /// pass roughly doubles peak memory, so keep this well under available
    /// RAM divided by 16 bytes.
    #[serde(default = "default_scalar_budget")]
    pub scalar_budget: usize,
}

impl PracticeConfig {
    /// Default Adam settings and a 64M-scalar budget (about 512 MiB of node
    /// values).
    pub fn new(student: MlpSpec, inner_steps: u64, batch_size: usize) -> Self {
        PracticeConfig {
            student,
            inner_steps,
            batch_size,
            inner_adam: AdamConfig::default(),
            scalar_budget: default_scalar_budget(),
        }
    }

    fn validate(&self, train: &Dataset) -> Result<(), CommentariesError> {
        self.inner_adam.validate()?;
        if self.batch_size == 0 {
            return Err(CommentariesError::InvalidConfig(
                "practice batch size must be at least 1".into(),
            ));
        }
        if train.is_empty() {
            return Err(CommentariesError::InvalidConfig(
                "practice training set is empty".into(),
            ));
        }
        if train.feature_dim != self.student.input_dim {
            return Err(CommentariesError::InvalidConfig(format!(
                "student expects {} input features, dataset has {}",
                self.student.input_dim, train.feature_dim
            )));
        }
        if train.class_count > self.student.output_dim {
            return Err(CommentariesError::InvalidConfig(format!(
                "dataset has {} classes, student only emits {} logits",
                train.class_count, self.student.output_dim
            )));
        }
        Ok(())
    }
}

/// Result of an unrolled practice run: node ids into the graph it was built
/// on.
#[derive(Debug, Clone)]
pub struct UnrolledPractice {
    /// Final student parameters, canonical `[w1, b1, w2, b2]` order.
    pub theta: Vec<NodeId>,
    /// The initial parameter leaves, before any step.
    pub init_theta: Vec<NodeId>,
    /// Teacher weight node for each inner step, shape `[batch_size]`.
    pub weight_nodes: Vec<NodeId>,
}

/// One inner step: sample a batch, weight the losses, emit gradients, apply
/// the in-graph Adam step. Shared by the real unroll and the budget
/// estimator so the estimate never drifts from the construction.
#[allow(clippy::too_many_arguments)]
fn unroll_step(
    graph: &mut Graph,
    teacher_ids: &[NodeId],
    theta: &[NodeId],
    state: &mut GraphAdamState,
    cfg: &PracticeConfig,
    train: &Dataset,
    progress: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<NodeId>, NodeId), CommentariesError> {
    let idx = uniform_batch_indices(train.len(), cfg.batch_size, rng);
    let features = train.feature_matrix_of(&idx);
    let labels = train.labels_of(&idx);

    // Teacher input: features plus the progress coordinate, as one constant.
    let width = train.feature_dim + 1;
    let mut aug = Vec::with_capacity(idx.len() * width);
    for row in 0..idx.len() {
        aug.extend_from_slice(
            &features.data()[row * train.feature_dim..(row + 1) * train.feature_dim],
        );
        aug.push(progress);
    }
    let aug_id = graph.leaf(Tensor::from_vec(vec![idx.len(), width], aug));
    let weights = teacher_forward(graph, teacher_ids, aug_id)?;

    let x = graph.leaf(features);
    let logits = Mlp::forward_graph(graph, theta, x)?;
    let losses = graph.softmax_cross_entropy(logits, &labels)?;
    let loss = weighted_loss(graph, losses, weights)?;

    let grads = graph.grad_as_graph(loss, theta)?;
    let next = graph_adam_step(graph, &cfg.inner_adam, state, theta, &grads, cfg.inner_adam.gamma)?;
    Ok((next, weights))
}

/// Predicts how many scalars a full unroll would store, by building a single
/// throwaway step and extrapolating. Exact up to the (constant) per-step
/// layout, so it can gate the real construction honestly.
pub fn estimate_unroll_scalars(
    cfg: &PracticeConfig,
    train: &Dataset,
    teacher_hidden: usize,
) -> Result<usize, CommentariesError> {
    let mut scratch = Graph::new();
    let teacher_spec = MlpSpec::new(train.feature_dim + 1, teacher_hidden, 1);
    let teacher_ids: Vec<NodeId> = [
        Tensor::zeros(vec![teacher_spec.input_dim, teacher_spec.hidden_dim]),
        Tensor::zeros(vec![teacher_spec.hidden_dim]),
        Tensor::zeros(vec![teacher_spec.hidden_dim, 1]),
        Tensor::zeros(vec![1]),
    ]
    .into_iter()
    .map(|t| scratch.leaf(t))
    .collect();
    let theta: Vec<NodeId> = [
        Tensor::zeros(vec![cfg.student.input_dim, cfg.student.hidden_dim]),
        Tensor::zeros(vec![cfg.student.hidden_dim]),
        Tensor::zeros(vec![cfg.student.hidden_dim, cfg.student.output_dim]),
        Tensor::zeros(vec![cfg.student.output_dim]),
    ]
    .into_iter()
    .map(|t| scratch.leaf(t))
    .collect();
    let mut state = GraphAdamState::new(&mut scratch, &theta);
    let base = scratch.scalar_count();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    unroll_step(
        &mut scratch,
        &teacher_ids,
        &theta,
        &mut state,
        cfg,
        train,
        0.0,
        &mut rng,
    )?;
    let per_step = scratch.scalar_count() - base;
    Ok(base + per_step * cfg.inner_steps as usize)
}

/// Builds an entire practice-training run as graph nodes.
///
/// Draw order on `rng`: the student initialization first, then one batch of
/// indices per inner step — the same order a plain training loop uses, so an
/// unrolled run and a conventional run from identically seeded RNGs visit
/// identical batches.
///
/// The run is refused up front if its predicted graph size exceeds
/// `cfg.scalar_budget`, with the estimate in the error.
pub fn unrolled_practice_training(
    graph: &mut Graph,
    teacher_ids: &[NodeId],
    cfg: &PracticeConfig,
    train: &Dataset,
    rng: &mut impl Rng,
) -> Result<UnrolledPractice, CommentariesError> {
    cfg.validate(train)?;
    assert_eq!(teacher_ids.len(), 4, "expected [w1, b1, w2, b2] teacher nodes");
    let teacher_in = graph.value(teacher_ids[0]).shape()[0];
    if teacher_in != train.feature_dim + 1 {
        return Err(CommentariesError::TeacherInput {
            expected: teacher_in - 1,
            got: train.feature_dim,
        });
    }

    if cfg.inner_steps > 0 {
        let teacher_hidden = graph.value(teacher_ids[0]).shape()[1];
        let required = estimate_unroll_scalars(cfg, train, teacher_hidden)?;
        if required > cfg.scalar_budget {
            return Err(CommentariesError::UnrollBudget {
                required,
                budget: cfg.scalar_budget,
                approx_mib: (required * 8) >> 20,
            });
        }
    }

    let student = Mlp::init(cfg.student, rng);
    let init_theta: Vec<NodeId> = student.params().into_iter().map(|t| graph.leaf(t)).collect();
    let mut theta = init_theta.clone();
    let mut state = GraphAdamState::new(graph, &theta);
    let mut weight_nodes = Vec::with_capacity(cfg.inner_steps as usize);

    for t in 0..cfg.inner_steps {
        let progress = t as f64 / cfg.inner_steps as f64;
        let (next, weights) =
            unroll_step(graph, teacher_ids, &theta, &mut state, cfg, train, progress, rng)?;
        theta = next;
        weight_nodes.push(weights);
    }

    Ok(UnrolledPractice {
        theta,
        init_theta,
        weight_nodes,
    })
}
