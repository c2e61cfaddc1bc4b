//! The student architecture: a two-layer tanh MLP over fixed-length feature
//! vectors, with helpers for both graph-based training passes and plain
//! evaluation passes.
//!
//! The same four-tensor parameter list `[w1, b1, w2, b2]` is used everywhere a
//! parameter vector is expected (optimizer states, gradient lists, unrolled
//! graphs), always in that order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{AutogradError, Graph, NodeId, Tensor};
use crate::datasets::{Dataset, Example};

/// Layer sizes for [`Mlp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        MlpSpec {
            input_dim,
            hidden_dim,
            output_dim,
        }
    }

    /// Total scalar parameter count across both layers.
    pub fn param_count(&self) -> usize {
        self.input_dim * self.hidden_dim
            + self.hidden_dim
            + self.hidden_dim * self.output_dim
            + self.output_dim
    }
}

/// A two-layer tanh MLP: `logits = tanh(x w1 + b1) w2 + b2`.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl Mlp {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights, zero biases.
    /// Consumes exactly `input_dim*hidden + hidden*output` RNG draws, in
    /// row-major w1-then-w2 order, so two models built from identically
    /// seeded RNGs are bitwise equal.
    pub fn init(spec: MlpSpec, rng: &mut impl Rng) -> Self {
        let mut uniform_layer = |rows: usize, cols: usize| {
            let bound = 1.0 / (rows as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            Tensor::from_vec(vec![rows, cols], data)
        };
        let w1 = uniform_layer(spec.input_dim, spec.hidden_dim);
        let w2 = uniform_layer(spec.hidden_dim, spec.output_dim);
        Mlp {
            spec,
            w1,
            b1: Tensor::zeros(vec![spec.hidden_dim]),
            w2,
            b2: Tensor::zeros(vec![spec.output_dim]),
        }
    }

    /// Parameters in canonical order.
    pub fn params(&self) -> Vec<Tensor> {
        vec![
            self.w1.clone(),
            self.b1.clone(),
            self.w2.clone(),
            self.b2.clone(),
        ]
    }

    /// Replaces the parameters from a canonical-order list.
    pub fn set_params(&mut self, params: &[Tensor]) {
        assert_eq!(params.len(), 4, "expected [w1, b1, w2, b2]");
        self.w1 = params[0].clone();
        self.b1 = params[1].clone();
        self.w2 = params[2].clone();
        self.b2 = params[3].clone();
    }

    /// Builds the forward pass on a graph from already-inserted parameter
    /// nodes (canonical order) and an input batch node of shape
    /// `[batch, input_dim]`. Returns the `[batch, output_dim]` logits node.
    pub fn forward_graph(
        graph: &mut Graph,
        params: &[NodeId],
        x: NodeId,
    ) -> Result<NodeId, AutogradError> {
        assert_eq!(params.len(), 4, "expected [w1, b1, w2, b2] nodes");
        let h = graph.matmul(x, params[0])?;
        let h = graph.add_row_vec(h, params[1])?;
        let h = graph.tanh(h);
        let logits = graph.matmul(h, params[2])?;
        graph.add_row_vec(logits, params[3])
    }

    /// Inserts this model's parameters as leaves and builds the forward pass.
    pub fn forward_fresh(
        &self,
        graph: &mut Graph,
        x: NodeId,
    ) -> Result<(Vec<NodeId>, NodeId), AutogradError> {
        let ids: Vec<NodeId> = self.params().into_iter().map(|t| graph.leaf(t)).collect();
        let logits = Self::forward_graph(graph, &ids, x)?;
        Ok((ids, logits))
    }

    /// Plain (graph-free) logits for a feature batch.
    pub fn logits(&self, xs: &Tensor) -> Tensor {
        let h = xs.matmul(&self.w1).add_row_vec(&self.b1).map(f64::tanh);
        h.matmul(&self.w2).add_row_vec(&self.b2)
    }

    /// Fraction of examples whose argmax logit hits the label.
    pub fn accuracy(&self, ds: &Dataset) -> f64 {
        if ds.examples.is_empty() {
            return 0.0;
        }
        let logits = self.logits(&ds.feature_matrix());
        let c = self.spec.output_dim;
        let mut hits = 0usize;
        for (i, ex) in ds.examples.iter().enumerate() {
            let row = &logits.data()[i * c..(i + 1) * c];
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(j, _)| j)
                .unwrap();
            if argmax == ex.label {
                hits += 1;
            }
        }
        hits as f64 / ds.examples.len() as f64
    }

    /// Mean cross-entropy over a dataset.
    pub fn mean_cross_entropy(&self, ds: &Dataset) -> f64 {
        self.cross_entropies(ds).iter().sum::<f64>() / ds.examples.len() as f64
    }

    /// Per-example cross-entropy `logsumexp(logits) - logits[label]`.
    pub fn cross_entropies(&self, ds: &Dataset) -> Vec<f64> {
        let logits = self.logits(&ds.feature_matrix());
        let c = self.spec.output_dim;
        ds.examples
            .iter()
            .enumerate()
            .map(|(i, ex)| {
                let row = &logits.data()[i * c..(i + 1) * c];
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
                lse - row[ex.label]
            })
            .collect()
    }

    /// l2 norm of the full-parameter gradient of this single example's
    /// cross-entropy loss at the current weights.
    pub fn example_grad_norm(&self, example: &Example) -> f64 {
        let mut graph = Graph::new();
        let x = graph.leaf(Tensor::from_vec(
            vec![1, self.spec.input_dim],
            example.features.clone(),
        ));
        let (ids, logits) = self.forward_fresh(&mut graph, x).expect("consistent dims");
        let losses = graph
            .softmax_cross_entropy(logits, &[example.label])
            .expect("single-example loss");
        let loss = graph.mean(losses);
        let grads = graph.backward(loss).expect("scalar loss");
        let tensors: Vec<Tensor> = ids
            .iter()
            .map(|id| grads.get_or_zeros(&graph, *id))
            .collect();
        crate::optim::global_update_norm(&tensors)
    }
}
