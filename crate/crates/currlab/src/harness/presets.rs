//! The frozen desk-scale presets shared by the examples, the CLI defaults,
//! and the acceptance checks.
//!
//! Everything here is a constant so that every entry point trains on the
//! same bytes: the two canonical datasets, the low/tuned learning-rate pair
//! (chosen once by `grid_search` and then frozen), and the run settings for
//! each experiment family.

use crate::commentaries::{PracticeConfig, StudentSeedPolicy, TeacherTrainConfig};
use crate::curricula::{ScheduleFunction, ToyPolicy};
use crate::datasets::{split, Dataset, SyntheticSpec, TaskKind};
use crate::model::MlpSpec;
use crate::optim::{AdamConfig, LrSchedule};

use super::training::{CurriculumSource, RunSpec};

/// Train/dev/test fractions used everywhere.
pub const SPLIT: [f64; 3] = [0.7, 0.2, 0.1];
/// Seed for the split shuffle.
pub const SPLIT_SEED: u64 = 7;

/// Learning rate far below the sweep winner, so the baseline undertrains
/// within the preset horizon — the regime where curriculum-induced
/// update-size boosts shift outcomes. Chosen by learning-rate sweep, then
/// frozen.
pub const GAMMA_LOW: f64 = 5e-5;
/// Learning rate the sweep actually selects on the blobs task.
pub const GAMMA_OPT: f64 = 3e-4;
/// The β value used for the equal-βs diagnostic.
pub const EQUAL_BETA: f64 = 0.99;
/// Learning rate for the convergence-ordering comparison on the easy blobs
/// variant: low enough that ramp transients shift convergence step counts.
pub const GAMMA_ORDERING: f64 = 2e-4;
/// Ramp length for the ordering comparison's linear toy policies: long
/// enough that the down-ramp's damping stretches measurably past the
/// baseline's convergence, short enough that its weights never freeze the
/// run before accuracy saturates.
pub const KAPPA_ORDERING: f64 = 1700.0;
/// Low learning rate for the sequence-length hand-crafted arm.
pub const GAMMA_HC_SEQLEN: f64 = 2e-4;
/// Low learning rate for the reference-loss hand-crafted arm.
pub const GAMMA_HC_REFLOSS: f64 = 3e-4;
/// Hidden width of the reference-loss scorer model.
pub const SCORER_HIDDEN: usize = 16;

/// Canonical Gaussian-clusters task: 600 points, 3 classes, 2 features.
pub fn blobs_spec() -> SyntheticSpec {
    SyntheticSpec {
        kind: TaskKind::Blobs,
        n: 600,
        classes: 3,
        feature_dim: 2,
        noise: 0.8,
        length_range: (4, 16),
        seed: 424242,
    }
}

/// Easy blobs variant for the convergence-ordering comparison: same shape as
/// [`blobs_spec`] but with little cluster overlap, so every run saturates at
/// the same accuracy and steps-to-convergence measures pure speed rather
/// than final quality.
pub fn ordering_blobs_spec() -> SyntheticSpec {
    SyntheticSpec {
        noise: 0.3,
        ..blobs_spec()
    }
}

/// Canonical variable-length sequence task: 600 mean-pooled bags, 3 classes,
/// 6 features, lengths 4–16 (the axis both difficulty measures track).
pub fn varlen_spec() -> SyntheticSpec {
    SyntheticSpec {
        kind: TaskKind::VarlenSequences,
        n: 600,
        classes: 3,
        feature_dim: 6,
        noise: 1.0,
        length_range: (4, 16),
        seed: 171717,
    }
}

fn splits_of(spec: &SyntheticSpec) -> (Dataset, Dataset, Dataset) {
    let data = spec.generate().expect("preset spec is valid");
    split(&data, SPLIT, SPLIT_SEED).expect("preset fractions are valid")
}

/// The blobs task, already split 70/20/10.
pub fn blobs_splits() -> (Dataset, Dataset, Dataset) {
    splits_of(&blobs_spec())
}

/// The easy ordering variant, already split 70/20/10.
pub fn ordering_blobs_splits() -> (Dataset, Dataset, Dataset) {
    splits_of(&ordering_blobs_spec())
}

/// The variable-length task, already split 70/20/10.
pub fn varlen_splits() -> (Dataset, Dataset, Dataset) {
    splits_of(&varlen_spec())
}

/// The variable-length task with reference losses filled in on the training
/// split — the form the hand-crafted experiments consume.
pub fn scored_varlen_splits() -> (Dataset, Dataset, Dataset) {
    let (train, dev, test) = varlen_splits();
    let train = crate::harness::config::reference_scores(&train, SCORER_HIDDEN)
        .expect("preset scorer settings are valid");
    (train, dev, test)
}

/// Horizon for the toy-policy and hand-crafted runs.
pub const RUN_STEPS: u64 = 2000;

/// A toy-policy run on blobs: 2→8→3 student, batch 16.
pub fn toy_run(policy: ToyPolicy, gamma: f64) -> RunSpec {
    RunSpec {
        student: MlpSpec::new(2, 8, 3),
        adam: AdamConfig::with_gamma(gamma),
        lr: LrSchedule::Constant,
        batch_size: 16,
        total_steps: RUN_STEPS,
        eval_interval: 50,
        seed: 0,
        curriculum: CurriculumSource::Toy(policy),
    }
}

/// The baseline twin of [`toy_run`].
pub fn baseline_run(gamma: f64) -> RunSpec {
    baseline_twin(&toy_run(ToyPolicy::Constant, gamma))
}

/// The same run with the curriculum stripped: identical task, architecture,
/// optimizer, horizon, and seeds, plain unweighted training.
pub fn baseline_twin(spec: &RunSpec) -> RunSpec {
    let mut twin = spec.clone();
    twin.curriculum = CurriculumSource::Baseline;
    twin
}

/// A convergence-ordering run on the easy blobs variant: like [`toy_run`]
/// but at [`GAMMA_ORDERING`] with a dense trace (a row every 10 steps, so
/// steps-to-convergence resolves to ±10).
pub fn ordering_run(policy: ToyPolicy) -> RunSpec {
    let mut spec = toy_run(policy, GAMMA_ORDERING);
    spec.eval_interval = 10;
    spec
}

/// The linear ramps for the ordering comparison, stretched to
/// [`KAPPA_ORDERING`] steps.
pub fn ordering_linear_up() -> ToyPolicy {
    ToyPolicy::LinearUp {
        kappa: KAPPA_ORDERING,
    }
}

/// Mirror image of [`ordering_linear_up`].
pub fn ordering_linear_down() -> ToyPolicy {
    ToyPolicy::LinearDown {
        kappa: KAPPA_ORDERING,
    }
}

/// Data schedule for the hand-crafted curricula: start with the easiest 20%,
/// add 20% every 300 steps, so the full set is available from step 1200 on.
pub fn handcrafted_schedule() -> ScheduleFunction {
    ScheduleFunction {
        start_portion: 0.2,
        step_size: 0.2,
        increment: 300,
    }
}

/// Step window of the schedule's first increment (before any new data).
pub const FIRST_INCREMENT_WINDOW: (u64, u64) = (1, 300);
/// Step window safely past the schedule's saturation at step 1200.
pub const POST_SATURATION_WINDOW: (u64, u64) = (1500, 2000);

/// Compressed data schedule for short-horizon runs: start with the easiest
/// 30%, add 10% every 25 steps, full set from step 175 on.
pub fn short_handcrafted_schedule() -> ScheduleFunction {
    ScheduleFunction {
        start_portion: 0.3,
        step_size: 0.1,
        increment: 25,
    }
}

/// A hand-crafted-curriculum run on the variable-length task: 6→16→3
/// student, batch 16, trace row every 10 steps (fine-grained enough to read
/// update-norm localization off the trace).
pub fn handcrafted_run(
    measure: crate::curricula::DifficultyMeasure,
    gamma: f64,
) -> RunSpec {
    RunSpec {
        student: MlpSpec::new(6, 16, 3),
        adam: AdamConfig::with_gamma(gamma),
        lr: LrSchedule::Constant,
        batch_size: 16,
        total_steps: RUN_STEPS,
        eval_interval: 10,
        seed: 0,
        curriculum: CurriculumSource::HandCrafted {
            schedule: handcrafted_schedule(),
            measure,
        },
    }
}

/// The canonical easiest-first arm ordered by sequence length: compressed
/// schedule over a 500-step horizon at [`GAMMA_HC_SEQLEN`].
pub fn seqlen_handcrafted_run() -> RunSpec {
    let mut spec = handcrafted_run(
        crate::curricula::DifficultyMeasure::SequenceLength,
        GAMMA_HC_SEQLEN,
    );
    spec.total_steps = 500;
    spec.curriculum = CurriculumSource::HandCrafted {
        schedule: short_handcrafted_schedule(),
        measure: crate::curricula::DifficultyMeasure::SequenceLength,
    };
    spec
}

/// The canonical easiest-first arm ordered by reference loss: the slow
/// schedule over the full horizon at [`GAMMA_HC_REFLOSS`].
pub fn refloss_handcrafted_run() -> RunSpec {
    handcrafted_run(
        crate::curricula::DifficultyMeasure::ReferenceLoss,
        GAMMA_HC_REFLOSS,
    )
}

/// Short training run used when relating difficulty to gradient norms on a
/// partially trained model: 300 plain Adam steps on the variable-length
/// task, matching the reference scorer's training length and rate.
pub fn difficulty_probe_run(seed: u64) -> RunSpec {
    RunSpec {
        student: MlpSpec::new(6, SCORER_HIDDEN, 3),
        adam: AdamConfig::with_gamma(0.05),
        lr: LrSchedule::Constant,
        batch_size: 32,
        total_steps: 300,
        eval_interval: 100,
        seed,
        curriculum: CurriculumSource::Baseline,
    }
}

/// Inner (practice-student) settings for teacher pretraining on blobs:
/// 2→8→3 student, 40 unrolled steps, batch 16, inner γ 0.02 — low enough
/// that the student is still mid-descent when practice ends, so shaping the
/// weight trajectory actually moves the development loss.
pub fn teacher_practice() -> PracticeConfig {
    let mut practice = PracticeConfig::new(MlpSpec::new(2, 8, 3), 40, 16);
    practice.inner_adam = AdamConfig::with_gamma(0.02);
    practice
}

/// Outer-loop settings for teacher pretraining: hidden width 8, outer
/// γ 0.02, and a practice-student stream derived from the teacher seed so
/// different teacher seeds are fully independent runs.
pub fn teacher_train(outer_iterations: u64, teacher_seed: u64) -> TeacherTrainConfig {
    TeacherTrainConfig {
        outer_iterations,
        outer_adam: AdamConfig::with_gamma(0.02),
        teacher_hidden: 8,
        teacher_seed,
        student_seeds: StudentSeedPolicy::Fresh {
            base: 1000 + 1000 * teacher_seed,
        },
    }
}

/// Evaluation run for a trained teacher: fresh 2→8→3 student on blobs,
/// 400 steps at the practice's inner rate, trace row every 10 steps.
pub fn teacher_eval_run(curriculum: CurriculumSource) -> RunSpec {
    RunSpec {
        student: MlpSpec::new(2, 8, 3),
        adam: AdamConfig::with_gamma(0.05),
        lr: LrSchedule::Constant,
        batch_size: 16,
        total_steps: 400,
        eval_interval: 10,
        seed: 0,
        curriculum,
    }
}

/// The seed list `1..=n` used for multi-seed comparisons.
pub fn eval_seeds(n: u64) -> Vec<u64> {
    (1..=n).collect()
}
