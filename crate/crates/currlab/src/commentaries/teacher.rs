//! The teacher network: a small MLP that maps an example plus the current
//! training progress to a loss weight in `(0, 1)`.
//!
//! Input convention: the raw feature vector concatenated with one extra
//! scalar, the fraction of practice training already completed (`t / total`).
//! The progress coordinate is what lets a teacher express *schedules* ("easy
//! examples early, everything late") rather than static per-example weights.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{AutogradError, Graph, NodeId, Tensor};
use crate::model::{Mlp, MlpSpec};

use super::CommentariesError;

/// Teacher parameters: a two-layer tanh MLP with a single output unit; the
/// weight is the sigmoid of that unit.
#[derive(Debug, Clone)]
pub struct TeacherParams {
    pub mlp: Mlp,
}

impl TeacherParams {
    /// Random initialization for raw examples of `feature_dim` features (the
    /// progress coordinate is added internally).
    pub fn init(feature_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        TeacherParams {
            mlp: Mlp::init(MlpSpec::new(feature_dim + 1, hidden_dim, 1), rng),
        }
    }

    /// A teacher whose weight is exactly 1.0 for every input: all weights
    /// zero, output bias large enough that the sigmoid rounds to 1.0 in
    /// float64. Useful as a do-nothing teacher that must reproduce baseline
    /// training bit for bit.
    pub fn saturated(feature_dim: usize, hidden_dim: usize) -> Self {
        let spec = MlpSpec::new(feature_dim + 1, hidden_dim, 1);
        TeacherParams {
            mlp: Mlp {
                spec,
                w1: Tensor::zeros(vec![spec.input_dim, hidden_dim]),
                b1: Tensor::zeros(vec![hidden_dim]),
                w2: Tensor::zeros(vec![hidden_dim, 1]),
                b2: Tensor::from_vec(vec![1], vec![40.0]),
            },
        }
    }

    /// Raw feature dimension this teacher expects (without the progress
    /// coordinate).
    pub fn feature_dim(&self) -> usize {
        self.mlp.spec.input_dim - 1
    }

    /// Stacks a feature batch with the progress coordinate into the
    /// `[batch, feature_dim + 1]` teacher input.
    pub fn augment(&self, features: &Tensor, progress: f64) -> Result<Tensor, CommentariesError> {
        let (batch, dim) = features.dims2();
        if dim != self.feature_dim() {
            return Err(CommentariesError::TeacherInput {
                expected: self.feature_dim(),
                got: dim,
            });
        }
        let width = dim + 1;
        let mut data = Vec::with_capacity(batch * width);
        for row in 0..batch {
            data.extend_from_slice(&features.data()[row * dim..(row + 1) * dim]);
            data.push(progress);
        }
        Ok(Tensor::from_vec(vec![batch, width], data))
    }

    /// Plain (graph-free) weights for a feature batch at the given progress.
    pub fn weights(&self, features: &Tensor, progress: f64) -> Result<Vec<f64>, CommentariesError> {
        let aug = self.augment(features, progress)?;
        let logits = self.mlp.logits(&aug);
        Ok(logits
            .data()
            .iter()
            .map(|x| 1.0 / (1.0 + (-x).exp()))
            .collect())
    }
}

/// Builds the teacher forward pass on a graph from parameter nodes (canonical
/// `[w1, b1, w2, b2]` order) and an augmented-input node of shape
/// `[batch, feature_dim + 1]`. Returns the `[batch]` weight node.
pub fn teacher_forward(
    graph: &mut Graph,
    teacher_params: &[NodeId],
    augmented_input: NodeId,
) -> Result<NodeId, AutogradError> {
    let batch = graph.value(augmented_input).shape()[0];
    let logits = Mlp::forward_graph(graph, teacher_params, augmented_input)?;
    let weights = graph.sigmoid(logits);
    graph.reshape(weights, vec![batch])
}

/// On-disk teacher format: a versioned JSON object with explicit dimensions
/// and flat row-major weight arrays.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TeacherFile {
    format: String,
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

const TEACHER_FORMAT: &str = "currlab-teacher";
const TEACHER_VERSION: u32 = 1;

/// Serializes a teacher to the versioned JSON format.
pub fn save_teacher(teacher: &TeacherParams, path: &Path) -> Result<(), CommentariesError> {
    let spec = teacher.mlp.spec;
    let file = TeacherFile {
        format: TEACHER_FORMAT.to_string(),
        version: TEACHER_VERSION,
        input_dim: spec.input_dim,
        hidden_dim: spec.hidden_dim,
        w1: teacher.mlp.w1.data().to_vec(),
        b1: teacher.mlp.b1.data().to_vec(),
        w2: teacher.mlp.w2.data().to_vec(),
        b2: teacher.mlp.b2.data().to_vec(),
    };
    let json = serde_json::to_string_pretty(&file).expect("teacher serializes");
    std::fs::write(path, json).map_err(|source| CommentariesError::TeacherIo {
        path: path.display().to_string(),
        source,
    })
}

/// Loads and validates a teacher saved by [`save_teacher`].
pub fn load_teacher(path: &Path) -> Result<TeacherParams, CommentariesError> {
    let text = std::fs::read_to_string(path).map_err(|source| CommentariesError::TeacherIo {
        path: path.display().to_string(),
        source,
    })?;
    let file: TeacherFile = serde_json::from_str(&text)
        .map_err(|e| CommentariesError::TeacherFormat(e.to_string()))?;
    if file.format != TEACHER_FORMAT {
        return Err(CommentariesError::TeacherFormat(format!(
            "expected format `{}`, found `{}`",
            TEACHER_FORMAT, file.format
        )));
    }
    if file.version != TEACHER_VERSION {
        return Err(CommentariesError::TeacherFormat(format!(
            "unsupported version {} (this build reads {})",
            file.version, TEACHER_VERSION
        )));
    }
    if file.input_dim < 2 || file.hidden_dim == 0 {
        return Err(CommentariesError::TeacherFormat(format!(
            "degenerate dimensions: input {}, hidden {}",
            file.input_dim, file.hidden_dim
        )));
    }
    let check = |name: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(CommentariesError::TeacherFormat(format!(
                "{} holds {} values, dimensions require {}",
                name, got, want
            )))
        }
    };
    check("w1", file.w1.len(), file.input_dim * file.hidden_dim)?;
    check("b1", file.b1.len(), file.hidden_dim)?;
    check("w2", file.w2.len(), file.hidden_dim)?;
    check("b2", file.b2.len(), 1)?;
    let spec = MlpSpec::new(file.input_dim, file.hidden_dim, 1);
    Ok(TeacherParams {
        mlp: Mlp {
            spec,
            w1: Tensor::from_vec(vec![file.input_dim, file.hidden_dim], file.w1),
            b1: Tensor::from_vec(vec![file.hidden_dim], file.b1),
            w2: Tensor::from_vec(vec![file.hidden_dim, 1], file.w2),
            b2: Tensor::from_vec(vec![1], file.b2),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(rows: usize, dim: usize) -> Tensor {
        let data = (0..rows * dim).map(|i| (i as f64 * 0.37).sin()).collect();
        Tensor::from_vec(vec![rows, dim], data)
    }

    #[test]
    fn zero_teacher_emits_half_everywhere() {
        let mut teacher = TeacherParams::init(3, 4, &mut ChaCha8Rng::seed_from_u64(1));
        teacher.mlp.w2 = Tensor::zeros(vec![4, 1]);
        teacher.mlp.b2 = Tensor::zeros(vec![1]);
        let w = teacher.weights(&batch(5, 3), 0.25).unwrap();
        assert!(w.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn saturated_teacher_emits_exactly_one() {
        let teacher = TeacherParams::saturated(3, 4);
        let w = teacher.weights(&batch(7, 3), 0.9).unwrap();
        assert!(w.iter().all(|&x| x == 1.0), "{:?}", w);
    }

    #[test]
    fn graph_weights_match_plain_weights() {
        let teacher = TeacherParams::init(4, 6, &mut ChaCha8Rng::seed_from_u64(3));
        let features = batch(5, 4);
        let plain = teacher.weights(&features, 0.5).unwrap();

        let mut graph = Graph::new();
        let ids: Vec<NodeId> = teacher
            .mlp
            .params()
            .into_iter()
            .map(|t| graph.leaf(t))
            .collect();
        let aug = teacher.augment(&features, 0.5).unwrap();
        let aug_id = graph.leaf(aug);
        let weights = teacher_forward(&mut graph, &ids, aug_id).unwrap();
        assert_eq!(graph.value(weights).shape(), &[5]);
        for (a, b) in graph.value(weights).data().iter().zip(&plain) {
            assert!((a - b).abs() < 1e-15);
        }
        // In (0, 1) by construction.
        assert!(plain.iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn teacher_gradients_match_finite_differences() {
        let teacher = TeacherParams::init(3, 5, &mut ChaCha8Rng::seed_from_u64(9));
        let features = batch(4, 3);
        let params = teacher.mlp.params();

        let eval = |vals: &[Tensor]| {
            let mut graph = Graph::new();
            let ids: Vec<NodeId> = vals.iter().map(|t| graph.leaf(t.clone())).collect();
            let mut t = teacher.clone();
            t.mlp.set_params(vals);
            let aug = t.augment(&features, 0.3).unwrap();
            let aug_id = graph.leaf(aug);
            let w = teacher_forward(&mut graph, &ids, aug_id).unwrap();
            let loss = graph.mean(w);
            (graph, ids, loss)
        };
        let (graph, ids, loss) = eval(&params);
        let grads = graph.backward(loss).unwrap();
        let fd = crate::autograd::finite_difference_gradient(
            |vals| {
                let (graph, _, loss) = eval(vals);
                graph.value(loss).scalar_value()
            },
            &params,
            1e-6,
        );
        for (id, f) in ids.iter().zip(&fd) {
            let a = grads.get_or_zeros(&graph, *id);
            for (x, y) in a.data().iter().zip(f.data()) {
                assert!((x - y).abs() < 1e-6, "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let teacher = TeacherParams::init(3, 4, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(
            teacher.weights(&batch(5, 6), 0.0),
            Err(CommentariesError::TeacherInput {
                expected: 3,
                got: 6
            })
        ));
    }

    #[test]
    fn save_load_round_trip_preserves_weights() {
        let teacher = TeacherParams::init(5, 8, &mut ChaCha8Rng::seed_from_u64(17));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("teacher.json");
        save_teacher(&teacher, &path).unwrap();
        let loaded = load_teacher(&path).unwrap();
        assert_eq!(teacher.mlp.w1, loaded.mlp.w1);
        assert_eq!(teacher.mlp.b1, loaded.mlp.b1);
        assert_eq!(teacher.mlp.w2, loaded.mlp.w2);
        assert_eq!(teacher.mlp.b2, loaded.mlp.b2);
    }

    #[test]
    fn corrupted_teacher_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("teacher.json");

        std::fs::write(&path, "{\"format\":\"currlab-teacher\"").unwrap();
        assert!(matches!(
            load_teacher(&path),
            Err(CommentariesError::TeacherFormat(_))
        ));

        // Right shape, wrong array length.
        let teacher = TeacherParams::init(3, 4, &mut ChaCha8Rng::seed_from_u64(1));
        save_teacher(&teacher, &path).unwrap();
        let mut json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        json["w1"].as_array_mut().unwrap().pop();
        std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        match load_teacher(&path) {
            Err(CommentariesError::TeacherFormat(msg)) => assert!(msg.contains("w1"), "{}", msg),
            other => panic!("expected format error, got {:?}", other),
        }

        std::fs::write(&path, "{}").unwrap();
        assert!(load_teacher(&path).is_err());
    }
}
