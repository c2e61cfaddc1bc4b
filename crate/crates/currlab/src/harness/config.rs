//! Declarative experiment configuration.
//!
//! One JSON document describes one experiment: where the data comes from,
//! which curriculum (if any) shapes training, and the optimizer/run settings.
//! Every field has a default, so `{}` is a valid config (a baseline blobs
//! run); unknown keys are rejected everywhere so typos fail loudly instead of
//! silently reverting to defaults.
//!
//! ```json
//! {
//!   "data": { "synthetic": { "kind": "blobs", "n": 600, "classes": 3,
//!                            "feature_dim": 2, "noise": 0.8, "seed": 424242 } },
//!   "curriculum": { "toy": { "policy": { "kind": "linear_up", "kappa": 500 } } },
//!   "adam": { "gamma": 0.002 },
//!   "batch_size": 32,
//!   "total_steps": 2000,
//!   "eval_interval": 50,
//!   "seeds": [1, 2, 3]
//! }
//! ```

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::commentaries::load_teacher;
use crate::curricula::{DifficultyMeasure, ScheduleFunction, ToyPolicy};
use crate::datasets::{
    compute_reference_losses, load_csv, split, Dataset, SyntheticSpec, TaskKind,
};
use crate::model::{Mlp, MlpSpec};
use crate::optim::{AdamConfig, LrSchedule};

use super::training::{CurriculumSource, RunSpec};
use super::HarnessError;

/// Seed for the fixed reference model that scores examples when a config asks
/// for reference-loss ordering but the dataset carries no difficulty column.
pub const REFERENCE_MODEL_SEED: u64 = 90210;

/// Where the examples come from: generated on the fly or read from CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// `{"synthetic": {"kind": "blobs", ...}}`
    Synthetic(SyntheticSpec),
    /// `{"csv": {"path": "data/train.csv"}}`
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
}

/// `{"toy": {"policy": {"kind": "linear_up", "kappa": 500}}}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySpec {
    pub policy: ToyPolicy,
}

/// `{"hand_crafted": {"start_portion": 0.2, "step_size": 0.2,
///   "increment": 300, "measure": "sequence_length"}}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandCraftedSpec {
    pub start_portion: f64,
    pub step_size: f64,
    pub increment: u64,
    pub measure: DifficultyMeasure,
}

/// `{"teacher": {"path": "teacher.json", "ablated": false}}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub ablated: bool,
}

/// Exactly one curriculum choice. `"none"` trains the plain baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumSpec {
    None,
    Toy(ToySpec),
    HandCrafted(HandCraftedSpec),
    Teacher(TeacherSpec),
}

impl Default for CurriculumSpec {
    fn default() -> Self {
        CurriculumSpec::None
    }
}

/// The whole experiment as one JSON document. Defaults (used when a key is
/// absent):
///
/// | field           | default                                    |
/// |-----------------|--------------------------------------------|
/// | `data`          | synthetic blobs: n=600, 3 classes, 2 dims, noise 0.8, seed 424242 |
/// | `curriculum`    | `"none"`                                   |
/// | `adam`          | γ=1e-3, β₁=0.9, β₂=0.999, ε=1e-8           |
/// | `lr_schedule`   | `{"kind": "constant"}`                     |
/// | `batch_size`    | 32                                         |
/// | `total_steps`   | 2000                                       |
/// | `eval_interval` | 50                                         |
/// | `seeds`         | `[1]`                                      |
/// | `student_hidden`| 16                                         |
/// | `split`         | `[0.7, 0.2, 0.1]` (train/dev/test)         |
/// | `split_seed`    | 7                                          |
/// | `jobs`          | 1                                          |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub curriculum: CurriculumSpec,
    pub adam: AdamConfig,
    pub lr_schedule: LrSchedule,
    pub batch_size: usize,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub seeds: Vec<u64>,
    pub student_hidden: usize,
    pub split: [f64; 3],
    pub split_seed: u64,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(SyntheticSpec {
                kind: TaskKind::Blobs,
                n: 600,
                classes: 3,
                feature_dim: 2,
                noise: 0.8,
                length_range: (4, 16),
                seed: 424242,
            }),
            curriculum: CurriculumSpec::None,
            adam: AdamConfig::default(),
            lr_schedule: LrSchedule::Constant,
            batch_size: 32,
            total_steps: 2000,
            eval_interval: 50,
            seeds: vec![1],
            student_hidden: 16,
            split: [0.7, 0.2, 0.1],
            split_seed: 7,
            jobs: 1,
        }
    }
}

/// A config made concrete: data loaded and split, teacher file loaded,
/// missing difficulty scores computed, run settings assembled.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    pub spec: RunSpec,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

impl ExperimentConfig {
    /// Parses a JSON document. Unknown keys anywhere are an error.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text)
            .map_err(|e| HarnessError::InvalidConfig(format!("config JSON: {}", e)))
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| HarnessError::ConfigFile {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    /// Loads the data, splits it, materializes the curriculum (reading the
    /// teacher file and filling missing reference losses where needed), and
    /// returns everything a run needs.
    pub fn resolve(&self) -> Result<ResolvedExperiment, HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "seeds must list at least one seed".into(),
            ));
        }
        if self.jobs == 0 {
            return Err(HarnessError::InvalidConfig("jobs must be >= 1".into()));
        }

        let data = match &self.data {
            DataSource::Synthetic(spec) => spec.generate()?,
            DataSource::Csv(src) => load_csv(&src.path)?,
        };
        let (mut train, dev, test) = split(&data, self.split, self.split_seed)?;

        let curriculum = match &self.curriculum {
            CurriculumSpec::None => CurriculumSource::Baseline,
            CurriculumSpec::Toy(toy) => CurriculumSource::Toy(toy.policy),
            CurriculumSpec::HandCrafted(hc) => {
                if hc.measure == DifficultyMeasure::ReferenceLoss
                    && train.examples.iter().any(|e| e.reference_loss.is_none())
                {
                    train = reference_scores(&train, self.student_hidden)?;
                }
                CurriculumSource::HandCrafted {
                    schedule: ScheduleFunction {
                        start_portion: hc.start_portion,
                        step_size: hc.step_size,
                        increment: hc.increment,
                    },
                    measure: hc.measure,
                }
            }
            CurriculumSpec::Teacher(t) => CurriculumSource::Teacher {
                teacher: load_teacher(&t.path)?,
                ablated: t.ablated,
            },
        };

        let spec = RunSpec {
            student: MlpSpec::new(train.feature_dim, self.student_hidden, train.class_count),
            adam: self.adam,
            lr: self.lr_schedule,
            batch_size: self.batch_size,
            total_steps: self.total_steps,
            eval_interval: self.eval_interval,
            seed: self.seeds[0],
            curriculum,
        };
        Ok(ResolvedExperiment {
            train,
            dev,
            test,
            spec,
            seeds: self.seeds.clone(),
            jobs: self.jobs,
        })
    }
}

/// Number of optimizer steps used to train the reference scorer.
const REFERENCE_TRAIN_STEPS: u64 = 300;

/// Scores every example with the cross-entropy of a small reference model
/// trained on the same examples (fixed seed, 300 Adam steps at γ = 0.05),
/// filling the `reference_loss` field the difficulty ordering reads. The
/// scorer must be *trained*: an untrained model's losses measure little
/// beyond its random initialization.
pub fn reference_scores(ds: &Dataset, hidden: usize) -> Result<Dataset, HarnessError> {
    let model = train_reference_model(ds, hidden)?;
    Ok(compute_reference_losses(ds, &model)?)
}

fn train_reference_model(ds: &Dataset, hidden: usize) -> Result<Mlp, HarnessError> {
    use crate::autograd::{Graph, NodeId};
    use crate::datasets::uniform_batch_indices;
    use crate::optim::{adam_step, AdamState};

    let spec = MlpSpec::new(ds.feature_dim, hidden, ds.class_count);
    let mut rng = ChaCha8Rng::seed_from_u64(REFERENCE_MODEL_SEED);
    let mut model = Mlp::init(spec, &mut rng);
    let mut params = model.params();
    let mut state = AdamState::new(&params);
    let config = AdamConfig::with_gamma(0.05);
    let batch_size = ds.len().min(32);
    for _ in 1..=REFERENCE_TRAIN_STEPS {
        let idx = uniform_batch_indices(ds.len(), batch_size, &mut rng);
        let mut g = Graph::new();
        let ids: Vec<NodeId> = params.iter().map(|t| g.leaf(t.clone())).collect();
        let x = g.leaf(ds.feature_matrix_of(&idx));
        let logits = Mlp::forward_graph(&mut g, &ids, x).map_err(HarnessError::from)?;
        let losses = g
            .softmax_cross_entropy(logits, &ds.labels_of(&idx))
            .map_err(HarnessError::from)?;
        let loss = g.mean(losses);
        let grad_map = g.backward(loss).map_err(HarnessError::from)?;
        let grads: Vec<_> = ids.iter().map(|&id| grad_map.get_or_zeros(&g, id)).collect();
        adam_step(&config, &mut state, &mut params, &grads, config.gamma)
            .map_err(HarnessError::from)?;
    }
    model.set_params(&params);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commentaries::{save_teacher, TeacherParams};

    #[test]
    fn empty_document_is_the_default_baseline() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.total_steps, 2000);
        assert_eq!(cfg.eval_interval, 50);
        assert_eq!(cfg.seeds, vec![1]);
        assert_eq!(cfg.curriculum, CurriculumSpec::None);

        let r = cfg.resolve().unwrap();
        assert_eq!(r.train.len() + r.dev.len() + r.test.len(), 600);
        assert_eq!(r.spec.student.input_dim, 2);
        assert_eq!(r.spec.student.output_dim, 3);
        assert!(matches!(r.spec.curriculum, CurriculumSource::Baseline));
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        assert!(ExperimentConfig::from_json(r#"{"btach_size": 8}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"adam": {"gamma": 0.1, "momentum": 0.9}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"curriculum": {"toy": {"policy": {"kind": "linear_up", "kapa": 3}}}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"data": {"synthetic": {"kind": "blobs", "n": 100, "classes": 2,
                 "feature_dim": 2, "seed": 1, "nois": 0.5}}}"#
        )
        .is_err());
    }

    #[test]
    fn curriculum_variants_round_trip_and_resolve() {
        let text = r#"{
            "curriculum": {"toy": {"policy": {"kind": "sigmoid", "kappa": 0.02, "lambda": 400}}},
            "seeds": [3, 4],
            "total_steps": 10
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let round = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, round);
        let r = cfg.resolve().unwrap();
        assert_eq!(r.seeds, vec![3, 4]);
        assert!(matches!(
            r.spec.curriculum,
            CurriculumSource::Toy(ToyPolicy::Sigmoid { .. })
        ));

        let text = r#"{
            "data": {"synthetic": {"kind": "varlen_sequences", "n": 120, "classes": 3,
                     "feature_dim": 4, "seed": 5}},
            "curriculum": {"hand_crafted": {"start_portion": 0.25, "step_size": 0.25,
                           "increment": 10, "measure": "sequence_length"}},
            "total_steps": 5
        }"#;
        let r = ExperimentConfig::from_json(text).unwrap().resolve().unwrap();
        assert!(matches!(
            r.spec.curriculum,
            CurriculumSource::HandCrafted { .. }
        ));
    }

    #[test]
    fn reference_loss_ordering_gets_scores_computed_on_demand() {
        let text = r#"{
            "curriculum": {"hand_crafted": {"start_portion": 0.5, "step_size": 0.5,
                           "increment": 10, "measure": "reference_loss"}},
            "total_steps": 5
        }"#;
        let r = ExperimentConfig::from_json(text).unwrap().resolve().unwrap();
        assert!(
            r.train.examples.iter().all(|e| e.reference_loss.is_some()),
            "resolution must fill missing difficulty scores"
        );
        // Deterministic: resolving twice gives identical scores.
        let r2 = ExperimentConfig::from_json(text).unwrap().resolve().unwrap();
        assert_eq!(r.train, r2.train);
    }

    #[test]
    fn teacher_config_loads_the_saved_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("teacher.json");
        save_teacher(&TeacherParams::saturated(2, 4), &path).unwrap();
        let text = format!(
            r#"{{"curriculum": {{"teacher": {{"path": {:?}, "ablated": true}}}}, "total_steps": 3}}"#,
            path.to_str().unwrap()
        );
        let r = ExperimentConfig::from_json(&text).unwrap().resolve().unwrap();
        match &r.spec.curriculum {
            CurriculumSource::Teacher { teacher, ablated } => {
                assert!(ablated);
                assert_eq!(teacher.feature_dim(), 2);
            }
            other => panic!("expected teacher curriculum, got {:?}", other.label()),
        }

        let missing = format!(
            r#"{{"curriculum": {{"teacher": {{"path": {:?}}}}}}}"#,
            dir.path().join("absent.json").to_str().unwrap()
        );
        assert!(ExperimentConfig::from_json(&missing).unwrap().resolve().is_err());
    }

    #[test]
    fn bad_run_parameters_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"seeds": []}"#)
            .unwrap()
            .resolve()
            .is_err());
        assert!(ExperimentConfig::from_json(r#"{"jobs": 0}"#)
            .unwrap()
            .resolve()
            .is_err());
        assert!(ExperimentConfig::from_json(r#"{"split": [0.9, 0.2, 0.1]}"#)
            .unwrap()
            .resolve()
            .is_err());
    }
}
