//! Is the teacher's gradient exact? Backpropagation through an unrolled
//! training run, checked against central finite differences.
//!
//! The teacher's training signal is ∂(dev loss)/∂(teacher parameters), where
//! the dev loss is measured on a student produced by several *graph-recorded*
//! Adam steps. Every piece of those steps — weighted batch losses, moment
//! updates, the √v + ε normalization — is built from differentiable graph
//! operations, so the chain rule runs through the whole optimization. This
//! example perturbs every teacher coordinate and compares.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use currlab::autograd::{finite_difference_gradient, Graph, NodeId, Tensor};
use currlab::commentaries::{unrolled_practice_training, PracticeConfig, TeacherParams};
use currlab::datasets::{split, SyntheticSpec, TaskKind};
use currlab::model::{Mlp, MlpSpec};
use currlab::optim::AdamConfig;

fn main() {
    let data = SyntheticSpec {
        kind: TaskKind::Blobs,
        n: 60,
        classes: 2,
        feature_dim: 2,
        noise: 0.5,
        length_range: (4, 16),
        seed: 11,
    }
    .generate()
    .expect("generate");
    let (train, dev, _) = split(&data, [0.7, 0.2, 0.1], 3).expect("split");

    let practice = PracticeConfig {
        student: MlpSpec::new(2, 4, 2),
        inner_steps: 3,
        batch_size: 6,
        inner_adam: AdamConfig::with_gamma(0.05),
        scalar_budget: 64_000_000,
    };
    println!(
        "student: 2->4->2 ({} parameters), {} unrolled Adam steps, dev loss on {} examples",
        practice.student.param_count(),
        practice.inner_steps,
        dev.len()
    );

    // The dev loss as a function of the teacher parameters, rebuilt from
    // scratch for every probe so finite differences rerun the whole pipeline.
    let dev_loss_graph = |phi: &[Tensor]| -> (Graph, Vec<NodeId>, NodeId) {
        let mut graph = Graph::new();
        let teacher_ids: Vec<NodeId> = phi.iter().map(|t| graph.leaf(t.clone())).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let unrolled =
            unrolled_practice_training(&mut graph, &teacher_ids, &practice, &train, &mut rng)
                .expect("unroll");
        let x = graph.leaf(dev.feature_matrix());
        let logits = Mlp::forward_graph(&mut graph, &unrolled.theta, x).expect("forward");
        let labels: Vec<usize> = dev.examples.iter().map(|e| e.label).collect();
        let losses = graph.softmax_cross_entropy(logits, &labels).expect("loss");
        let loss = graph.mean(losses);
        (graph, teacher_ids, loss)
    };

    let mut worst = 0.0_f64;
    for draw in 1u64..=10 {
        let teacher = TeacherParams::init(2, 2, &mut ChaCha8Rng::seed_from_u64(draw));
        let phi = teacher.mlp.params();

        let (graph, teacher_ids, loss) = dev_loss_graph(&phi);
        let grads = graph.backward(loss).expect("backward");
        let fd = finite_difference_gradient(
            |values| {
                let (g, _, l) = dev_loss_graph(values);
                g.value(l).scalar_value()
            },
            &phi,
            1e-5,
        );

        let mut max_rel = 0.0_f64;
        let mut coords = 0;
        for (&id, approx) in teacher_ids.iter().zip(&fd) {
            let exact = grads.get_or_zeros(&graph, id);
            for (a, b) in exact.data().iter().zip(approx.data()) {
                let scale = a.abs().max(b.abs()).max(1e-4);
                max_rel = max_rel.max((a - b).abs() / scale);
                coords += 1;
            }
        }
        worst = worst.max(max_rel);
        println!(
            "draw {draw:>2}: {coords} coordinates, max relative error {max_rel:.2e}"
        );
    }
    println!("\nworst relative error across draws: {worst:.2e} (tolerance 1e-3)");
}
