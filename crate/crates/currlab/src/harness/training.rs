//! Instrumented training runs: one seeded, fully deterministic optimization
//! of a student model under a configurable curriculum, recording a trace row
//! at every evaluation point.
//!
//! All curriculum kinds funnel through the same weighted-loss arithmetic
//! (`mean(weights * losses)`), so runs that happen to produce identical
//! weights — a baseline and a saturated teacher, say — produce bitwise
//! identical traces under the same seed.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, NodeId, Tensor};
use crate::commentaries::TeacherParams;
use crate::curricula::{
    batch_mean_ablation, order_by_difficulty, sample_batch, weight_stats, weighted_loss,
    DifficultyMeasure, ScheduleFunction, ToyPolicy,
};
use crate::datasets::{uniform_batch_indices, Dataset};
use crate::model::{Mlp, MlpSpec};
use crate::optim::{adam_step, AdamConfig, AdamState, LrSchedule};

use super::trace::{steps_to_convergence, TraceRow, CONVERGENCE_FRACTION};
use super::HarnessError;

/// Where a run's loss weights and batch pools come from.
#[derive(Debug, Clone)]
pub enum CurriculumSource {
    /// Uniform batches, weight 1 everywhere.
    Baseline,
    /// Uniform batches; one step-indexed weight applied to the whole batch.
    Toy(ToyPolicy),
    /// Weight 1, but batches drawn from a growing difficulty-ordered prefix.
    HandCrafted {
        schedule: ScheduleFunction,
        measure: DifficultyMeasure,
    },
    /// Per-example weights from a trained teacher; `ablated` replaces each
    /// batch's weights by their mean, keeping time structure only.
    Teacher {
        teacher: TeacherParams,
        ablated: bool,
    },
}

impl CurriculumSource {
    /// Short label for summaries and file names.
    pub fn label(&self) -> String {
        match self {
            CurriculumSource::Baseline => "baseline".into(),
            CurriculumSource::Toy(p) => format!("toy-{}", p.name()),
            CurriculumSource::HandCrafted { measure, .. } => {
                format!("handcrafted-{}", measure.name())
            }
            CurriculumSource::Teacher { ablated: false, .. } => "teacher".into(),
            CurriculumSource::Teacher { ablated: true, .. } => "teacher-ablated".into(),
        }
    }
}

/// Everything one training run depends on. Two runs with equal specs produce
/// bitwise identical results.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub student: MlpSpec,
    pub adam: AdamConfig,
    pub lr: LrSchedule,
    pub batch_size: usize,
    pub total_steps: u64,
    /// Record a trace row every this many steps (plus step 0 and the final
    /// step).
    pub eval_interval: u64,
    pub seed: u64,
    pub curriculum: CurriculumSource,
}

/// Why a run stopped early.
#[derive(Debug, Clone)]
pub struct AbortInfo {
    /// The step that failed (its row is not recorded).
    pub step: u64,
    pub detail: String,
}

/// A finished (or aborted) run. The trace is always populated up to the last
/// healthy evaluation point, so diverged runs remain inspectable.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub trace: Vec<TraceRow>,
    /// Dev accuracy at the last recorded row.
    pub final_dev_accuracy: f64,
    /// First recorded step at 98% of final dev accuracy; `None` for aborted
    /// runs.
    pub steps_to_convergence: Option<u64>,
    /// The trained model (at abort time, the last finite parameters).
    pub model: Mlp,
    pub aborted: Option<AbortInfo>,
}

impl RunResult {
    /// Mean update norm over all post-initialization rows — the per-run
    /// scalar the boost-ratio comparisons use.
    pub fn mean_update_norm(&self) -> f64 {
        let steps: Vec<f64> = self
            .trace
            .iter()
            .filter(|r| r.step > 0)
            .map(|r| r.update_norm)
            .collect();
        if steps.is_empty() {
            0.0
        } else {
            steps.iter().sum::<f64>() / steps.len() as f64
        }
    }
}

fn validate(spec: &RunSpec, train: &Dataset, dev: &Dataset) -> Result<(), HarnessError> {
    spec.adam.validate()?;
    if spec.batch_size == 0 {
        return Err(HarnessError::InvalidConfig("batch size must be at least 1".into()));
    }
    if spec.eval_interval == 0 {
        return Err(HarnessError::InvalidConfig(
            "eval interval must be at least 1".into(),
        ));
    }
    if train.is_empty() || dev.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "train and dev splits must both be non-empty".into(),
        ));
    }
    for (name, ds) in [("train", train), ("dev", dev)] {
        if ds.feature_dim != spec.student.input_dim {
            return Err(HarnessError::InvalidConfig(format!(
                "student expects {} input features, {} split has {}",
                spec.student.input_dim, name, ds.feature_dim
            )));
        }
        if ds.class_count > spec.student.output_dim {
            return Err(HarnessError::InvalidConfig(format!(
                "{} split has {} classes, student only emits {} logits",
                name, ds.class_count, spec.student.output_dim
            )));
        }
    }
    if let CurriculumSource::Teacher { teacher, .. } = &spec.curriculum {
        if teacher.feature_dim() != train.feature_dim {
            return Err(HarnessError::InvalidConfig(format!(
                "teacher expects {} raw features, dataset has {}",
                teacher.feature_dim(),
                train.feature_dim
            )));
        }
    }
    if let CurriculumSource::Toy(policy) = &spec.curriculum {
        policy.validate()?;
    }
    if let CurriculumSource::HandCrafted { schedule, .. } = &spec.curriculum {
        schedule.validate()?;
    }
    Ok(())
}

/// Runs one seeded training loop to completion (or divergence).
///
/// RNG draw order: student initialization first, then one batch of indices
/// per step — matching the differentiable unroll, so a teacher evaluation and
/// a practice run from the same seed visit the same batches.
pub fn train_run(spec: &RunSpec, train: &Dataset, dev: &Dataset) -> Result<RunResult, HarnessError> {
    validate(spec, train, dev)?;

    let ordered = match &spec.curriculum {
        CurriculumSource::HandCrafted { measure, .. } => {
            Some(order_by_difficulty(train, *measure)?)
        }
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut model = Mlp::init(spec.student, &mut rng);
    let mut params = model.params();
    let mut state = AdamState::new(&params);

    let portion_at = |i: u64| match &spec.curriculum {
        CurriculumSource::HandCrafted { schedule, .. } => schedule.available_portion(i),
        _ => 1.0,
    };

    let mut trace: Vec<TraceRow> = Vec::new();
    let mut abort: Option<AbortInfo> = None;

    // Initialization row: metrics of the untrained model, zero step
    // quantities.
    let train_loss = model.mean_cross_entropy(train);
    let dev_accuracy = model.accuracy(dev);
    if !train_loss.is_finite() {
        return Err(HarnessError::InvalidConfig(
            "initial training loss is not finite; check the dataset".into(),
        ));
    }
    trace.push(TraceRow {
        step: 0,
        train_loss,
        dev_accuracy,
        update_norm: 0.0,
        m_norm: 0.0,
        v_norm: 0.0,
        mean_weight: 0.0,
        sigma_normal: 0.0,
        lr: 0.0,
        portion: portion_at(0),
    });

    'steps: for s in 1..=spec.total_steps {
        let i = s - 1; // 0-based curriculum index

        let (features, labels) = match (&spec.curriculum, &ordered) {
            (CurriculumSource::HandCrafted { schedule, .. }, Some(ord)) => {
                let idx = sample_batch(ord, schedule, i, spec.batch_size, &mut rng)?;
                (ord.feature_matrix_of(&idx), ord.labels_of(&idx))
            }
            _ => {
                let idx = uniform_batch_indices(train.len(), spec.batch_size, &mut rng);
                (train.feature_matrix_of(&idx), train.labels_of(&idx))
            }
        };

        let weights: Vec<f64> = match &spec.curriculum {
            CurriculumSource::Baseline | CurriculumSource::HandCrafted { .. } => {
                vec![1.0; spec.batch_size]
            }
            CurriculumSource::Toy(policy) => vec![policy.weight(i); spec.batch_size],
            CurriculumSource::Teacher { teacher, ablated } => {
                let progress = i as f64 / spec.total_steps as f64;
                let w = teacher.weights(&features, progress)?;
                if *ablated {
                    batch_mean_ablation(&w)?
                } else {
                    w
                }
            }
        };
        let stats = weight_stats(&weights);

        let mut g = Graph::new();
        let ids: Vec<NodeId> = params.iter().map(|t| g.leaf(t.clone())).collect();
        let x = g.leaf(features);
        let logits = Mlp::forward_graph(&mut g, &ids, x)?;
        let losses = g.softmax_cross_entropy(logits, &labels)?;
        let w_id = g.leaf(Tensor::from_vec(vec![weights.len()], weights));
        let loss = weighted_loss(&mut g, losses, w_id)?;

        let loss_value = g.value(loss).scalar_value();
        if !loss_value.is_finite() {
            abort = Some(AbortInfo {
                step: s,
                detail: format!("batch loss became {}", loss_value),
            });
            break 'steps;
        }

        let grad_map = g.backward(loss)?;
        let grads: Vec<Tensor> = ids.iter().map(|&id| grad_map.get_or_zeros(&g, id)).collect();
        let lr = spec.lr.at(spec.adam.gamma, s);
        let record = match adam_step(&spec.adam, &mut state, &mut params, &grads, lr) {
            Ok(r) => r,
            Err(e) => {
                abort = Some(AbortInfo {
                    step: s,
                    detail: e.to_string(),
                });
                break 'steps;
            }
        };

        if s % spec.eval_interval == 0 || s == spec.total_steps {
            model.set_params(&params);
            let train_loss = model.mean_cross_entropy(train);
            let dev_accuracy = model.accuracy(dev);
            let row = TraceRow {
                step: s,
                train_loss,
                dev_accuracy,
                update_norm: record.update_norm,
                m_norm: record.m_norm,
                v_norm: record.v_norm,
                mean_weight: stats.mean,
                sigma_normal: stats.sigma_normal,
                lr,
                portion: portion_at(i),
            };
            let finite = [
                row.train_loss,
                row.dev_accuracy,
                row.update_norm,
                row.m_norm,
                row.v_norm,
            ]
            .iter()
            .all(|v| v.is_finite());
            if !finite {
                abort = Some(AbortInfo {
                    step: s,
                    detail: "evaluation metrics became non-finite".into(),
                });
                break 'steps;
            }
            trace.push(row);
        }
    }

    model.set_params(&params);
    let final_dev_accuracy = trace.last().expect("initialization row exists").dev_accuracy;
    let steps = if abort.is_some() {
        None
    } else {
        steps_to_convergence(&trace, CONVERGENCE_FRACTION)
    };
    Ok(RunResult {
        seed: spec.seed,
        trace,
        final_dev_accuracy,
        steps_to_convergence: steps,
        model,
        aborted: abort,
    })
}

/// Runs the same spec across many seeds, optionally on `jobs` threads. Runs
/// are independent, so results are identical regardless of `jobs`; they are
/// returned in seed-list order.
pub fn train_runs(
    spec: &RunSpec,
    seeds: &[u64],
    jobs: usize,
    train: &Dataset,
    dev: &Dataset,
) -> Result<Vec<RunResult>, HarnessError> {
    let specs: Vec<RunSpec> = seeds
        .iter()
        .map(|&seed| RunSpec {
            seed,
            ..spec.clone()
        })
        .collect();
    if jobs <= 1 || specs.len() <= 1 {
        return specs.iter().map(|s| train_run(s, train, dev)).collect();
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunResult, HarnessError>>>> =
        Mutex::new((0..specs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(specs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= specs.len() {
                    break;
                }
                let result = train_run(&specs[k], train, dev);
                slots.lock().expect("result mutex")[k] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("result mutex")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{Example, SyntheticSpec, TaskKind};

    fn blobs(n: usize, seed: u64) -> Dataset {
        SyntheticSpec {
            kind: TaskKind::Blobs,
            n,
            classes: 2,
            feature_dim: 2,
            noise: 0.5,
            length_range: (4, 16),
            seed,
        }
        .generate()
        .unwrap()
    }

    fn base_spec(seed: u64) -> RunSpec {
        RunSpec {
            student: MlpSpec::new(2, 6, 2),
            adam: AdamConfig::with_gamma(0.02),
            lr: LrSchedule::Constant,
            batch_size: 8,
            total_steps: 120,
            eval_interval: 30,
            seed,
            curriculum: CurriculumSource::Baseline,
        }
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let train = blobs(40, 1);
        let dev = blobs(20, 2);
        let spec = base_spec(7);
        let a = train_run(&spec, &train, &dev).unwrap();
        let b = train_run(&spec, &train, &dev).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.model.w1, b.model.w1);
        assert_eq!(a.final_dev_accuracy, b.final_dev_accuracy);
    }

    #[test]
    fn zero_steps_yield_initialization_row_only() {
        let train = blobs(40, 1);
        let dev = blobs(20, 2);
        let mut spec = base_spec(7);
        spec.total_steps = 0;
        let r = train_run(&spec, &train, &dev).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.trace[0].step, 0);
        assert_eq!(r.trace[0].update_norm, 0.0);
        assert_eq!(r.trace[0].lr, 0.0);
        assert!(r.trace[0].train_loss.is_finite());
        assert_eq!(r.steps_to_convergence, Some(0));
    }

    #[test]
    fn trace_rows_land_on_interval_and_final_step() {
        let train = blobs(40, 1);
        let dev = blobs(20, 2);
        let mut spec = base_spec(3);
        spec.total_steps = 70;
        spec.eval_interval = 30;
        let r = train_run(&spec, &train, &dev).unwrap();
        let steps: Vec<u64> = r.trace.iter().map(|t| t.step).collect();
        assert_eq!(steps, vec![0, 30, 60, 70]);
        assert!(steps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn saturated_teacher_run_equals_baseline_bitwise() {
        let train = blobs(40, 1);
        let dev = blobs(20, 2);
        let spec = base_spec(11);
        let baseline = train_run(&spec, &train, &dev).unwrap();

        let mut teacher_spec = spec.clone();
        teacher_spec.curriculum = CurriculumSource::Teacher {
            teacher: TeacherParams::saturated(2, 4),
            ablated: false,
        };
        let teacher = train_run(&teacher_spec, &train, &dev).unwrap();
        // Identical weights (exactly 1.0), identical batches, identical
        // arithmetic: the traces must agree bit for bit...
        for (a, b) in baseline.trace.iter().zip(&teacher.trace) {
            assert_eq!(
                (a.step, a.train_loss, a.dev_accuracy, a.update_norm),
                (b.step, b.train_loss, b.dev_accuracy, b.update_norm)
            );
        }
        // ...except the recorded weight dispersion labels the arms: both are
        // degenerate here (constant weights), so even those agree.
        assert_eq!(baseline.trace, teacher.trace);
        assert_eq!(baseline.model.w2, teacher.model.w2);
    }

    #[test]
    fn constant_half_policy_matches_baseline_accuracy_trajectory() {
        let train = blobs(60, 1);
        let dev = blobs(30, 2);
        let spec = base_spec(13);
        let baseline = train_run(&spec, &train, &dev).unwrap();

        let mut half = spec.clone();
        half.curriculum = CurriculumSource::Toy(ToyPolicy::Constant);
        let halved = train_run(&half, &train, &dev).unwrap();

        assert_eq!(baseline.trace.len(), halved.trace.len());
        for (a, b) in baseline.trace.iter().zip(&halved.trace) {
            assert!(
                (a.dev_accuracy - b.dev_accuracy).abs() < 1e-6,
                "step {}: {} vs {}",
                a.step,
                a.dev_accuracy,
                b.dev_accuracy
            );
            let rel = (a.update_norm - b.update_norm).abs() / a.update_norm.max(1e-12);
            assert!(a.step == 0 || rel < 1e-6, "step {}: relative gap {}", a.step, rel);
        }
    }

    #[test]
    fn recorded_norms_match_recomputation() {
        let train = blobs(30, 1);
        let dev = blobs(15, 2);
        let mut spec = base_spec(17);
        spec.total_steps = 5;
        spec.eval_interval = 1;
        spec.curriculum = CurriculumSource::Toy(ToyPolicy::LinearUp { kappa: 4.0 });
        let run = train_run(&spec, &train, &dev).unwrap();

        // Replay the exact loop with the library primitives and compare every
        // recorded quantity.
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut model = Mlp::init(spec.student, &mut rng);
        let mut params = model.params();
        let mut state = AdamState::new(&params);
        for s in 1..=spec.total_steps {
            let idx = uniform_batch_indices(train.len(), spec.batch_size, &mut rng);
            let w = (s - 1) as f64 / 4.0;
            let mut g = Graph::new();
            let ids: Vec<NodeId> = params.iter().map(|t| g.leaf(t.clone())).collect();
            let x = g.leaf(train.feature_matrix_of(&idx));
            let logits = Mlp::forward_graph(&mut g, &ids, x).unwrap();
            let losses = g.softmax_cross_entropy(logits, &train.labels_of(&idx)).unwrap();
            let w_id = g.leaf(Tensor::filled(vec![idx.len()], w));
            let loss = weighted_loss(&mut g, losses, w_id).unwrap();
            let grad_map = g.backward(loss).unwrap();
            let grads: Vec<Tensor> = ids.iter().map(|&id| grad_map.get_or_zeros(&g, id)).collect();
            let rec = adam_step(&spec.adam, &mut state, &mut params, &grads, spec.adam.gamma)
                .unwrap();
            let row = &run.trace[s as usize];
            assert_eq!(row.step, s);
            assert_eq!(row.update_norm, rec.update_norm);
            assert_eq!(row.m_norm, rec.m_norm);
            assert_eq!(row.v_norm, rec.v_norm);
            assert_eq!(row.mean_weight, w);
            assert_eq!(row.sigma_normal, 0.0);
        }
        model.set_params(&params);
        assert_eq!(model.w1, run.model.w1);
        assert_eq!(model.b2, run.model.b2);
    }

    #[test]
    fn handcrafted_runs_restrict_then_open_the_pool() {
        let train = blobs(40, 1);
        // Attach synthetic difficulty: examples get increasing scores, so the
        // ordered prefix is deterministic.
        let mut examples = train.examples.clone();
        for (k, ex) in examples.iter_mut().enumerate() {
            ex.reference_loss = Some(k as f64);
        }
        let train = Dataset::new(examples, train.feature_dim, train.class_count);
        let dev = blobs(20, 2);

        let mut spec = base_spec(5);
        spec.total_steps = 40;
        spec.eval_interval = 10;
        spec.curriculum = CurriculumSource::HandCrafted {
            schedule: ScheduleFunction::new(0.25, 0.75, 20).unwrap(),
            measure: DifficultyMeasure::ReferenceLoss,
        };
        let r = train_run(&spec, &train, &dev).unwrap();
        let portions: Vec<f64> = r.trace.iter().map(|t| t.portion).collect();
        assert_eq!(portions, vec![0.25, 0.25, 0.25, 1.0, 1.0]);
        assert!(r.aborted.is_none());
    }

    #[test]
    fn missing_difficulty_scores_error_out() {
        let train = blobs(20, 1);
        let dev = blobs(10, 2);
        let mut spec = base_spec(5);
        spec.curriculum = CurriculumSource::HandCrafted {
            schedule: ScheduleFunction::new(0.5, 0.5, 10).unwrap(),
            measure: DifficultyMeasure::ReferenceLoss,
        };
        assert!(matches!(
            train_run(&spec, &train, &dev),
            Err(HarnessError::Curricula(_))
        ));
    }

    #[test]
    fn diverging_runs_abort_with_partial_trace() {
        let train = blobs(30, 1);
        let dev = blobs(10, 2);
        let mut spec = base_spec(23);
        // A learning rate near the float ceiling overflows the parameters
        // within a few steps; inf - inf in the logits then yields NaN.
        spec.adam = AdamConfig::with_gamma(1e307);
        spec.total_steps = 50;
        spec.eval_interval = 1;
        match train_run(&spec, &train, &dev) {
            Ok(r) => {
                let info = r.aborted.expect("run must abort on numeric blowup");
                assert!(info.step >= 1 && info.step <= 10, "aborted at {}", info.step);
                assert_eq!(r.steps_to_convergence, None);
                // Partial trace: only rows recorded before the aborting step,
                // and every recorded value is finite.
                assert!(r.trace.iter().all(|row| row.step < info.step));
                assert!(r
                    .trace
                    .iter()
                    .all(|row| row.train_loss.is_finite() && row.update_norm.is_finite()));
            }
            Err(e) => panic!("aborts are reported in the result, not as errors: {}", e),
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let train = blobs(20, 1);
        let dev = blobs(10, 2);
        let mut spec = base_spec(1);
        spec.batch_size = 0;
        assert!(matches!(
            train_run(&spec, &train, &dev),
            Err(HarnessError::InvalidConfig(_))
        ));
        let mut spec = base_spec(1);
        spec.eval_interval = 0;
        assert!(train_run(&spec, &train, &dev).is_err());
        let mut spec = base_spec(1);
        spec.student = MlpSpec::new(9, 4, 2);
        assert!(train_run(&spec, &train, &dev).is_err());
        let mut spec = base_spec(1);
        spec.curriculum = CurriculumSource::Teacher {
            teacher: TeacherParams::saturated(6, 3),
            ablated: false,
        };
        assert!(train_run(&spec, &train, &dev).is_err());
    }

    #[test]
    fn threaded_runs_match_sequential_runs() {
        let train = blobs(30, 1);
        let dev = blobs(15, 2);
        let mut spec = base_spec(0);
        spec.total_steps = 60;
        let seeds = [3u64, 9, 27, 81];
        let seq = train_runs(&spec, &seeds, 1, &train, &dev).unwrap();
        let par = train_runs(&spec, &seeds, 4, &train, &dev).unwrap();
        assert_eq!(seq.len(), par.len());
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.trace, b.trace);
        }
    }

    #[test]
    fn poisoned_dataset_is_caught_at_the_first_metric() {
        let dev = blobs(10, 2);
        // NaN, not infinity: an infinite feature would sanitize through tanh
        // (tanh(±inf) = ±1) and never reach the recorded metrics.
        let examples = vec![
            Example::plain(vec![f64::NAN, 0.0], 0),
            Example::plain(vec![0.0, 1.0], 1),
        ];
        let train = Dataset::new(examples, 2, 2);
        let spec = base_spec(1);
        assert!(matches!(
            train_run(&spec, &train, &dev),
            Err(HarnessError::InvalidConfig(_))
        ));
    }
}
