//! Synthetic classification tasks with controlled difficulty structure, CSV
//! import/export, and deterministic splits.
//!
//! Two generators:
//!
//! * **blobs** — Gaussian clusters around class centers that are pairwise at
//!   least 2.0 apart. With `noise = 0` every point sits on its center and a
//!   max-margin linear rule is perfect; with `noise >= 1.0` (the standard
//!   deviation reaching half the minimum center separation) clusters overlap
//!   substantially and the task stops being linearly separable.
//! * **varlen sequences** — each example pools `len` random tokens into a
//!   mean vector and adds a class-direction signal scaled by `2/sqrt(len)`.
//!   Pooling averages token noise down by `sqrt(len)` as well, so the
//!   signal-to-noise ratio is length-independent while the *scale* of the
//!   whole input shrinks with length. Consequences used elsewhere: longer
//!   examples produce smaller gradients on a fresh model, and lower-confidence
//!   (higher cross-entropy) predictions under a trained model — a clean
//!   difficulty axis for curricula.
//!
//! Everything is deterministic given the spec's seed.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::Tensor;
use crate::model::Mlp;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv header: {0}")]
    MalformedHeader(String),
    #[error("malformed csv row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("csv file has no data rows")]
    NoRows,
    #[error("split fractions {0:?} must be non-negative and sum to 1")]
    BadFractions([f64; 3]),
    #[error("model expects {expected} input features, dataset has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// One labeled example. `sequence_length` is set by the variable-length
/// generator; `reference_loss` is filled by [`compute_reference_losses`] or
/// read from a CSV `difficulty` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
    pub sequence_length: Option<u32>,
    pub reference_loss: Option<f64>,
}

impl Example {
    pub fn plain(features: Vec<f64>, label: usize) -> Self {
        Example {
            features,
            label,
            sequence_length: None,
            reference_loss: None,
        }
    }
}

/// An in-memory dataset: examples plus the dimensions every example must obey.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub feature_dim: usize,
    pub class_count: usize,
}

impl Dataset {
    /// Panics if any example disagrees with the declared dimensions — that is
    /// a construction bug, not an input error.
    pub fn new(examples: Vec<Example>, feature_dim: usize, class_count: usize) -> Self {
        for (i, ex) in examples.iter().enumerate() {
            assert_eq!(
                ex.features.len(),
                feature_dim,
                "example {} has {} features, dataset declares {}",
                i,
                ex.features.len(),
                feature_dim
            );
            assert!(
                ex.label < class_count,
                "example {} label {} out of range for {} classes",
                i,
                ex.label,
                class_count
            );
        }
        Dataset {
            examples,
            feature_dim,
            class_count,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// All features stacked into an `[n, feature_dim]` tensor.
    pub fn feature_matrix(&self) -> Tensor {
        let mut data = Vec::with_capacity(self.examples.len() * self.feature_dim);
        for ex in &self.examples {
            data.extend_from_slice(&ex.features);
        }
        Tensor::from_vec(vec![self.examples.len(), self.feature_dim], data)
    }

    /// Features of selected examples as an `[idx.len(), feature_dim]` tensor.
    pub fn feature_matrix_of(&self, idx: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(idx.len() * self.feature_dim);
        for &i in idx {
            data.extend_from_slice(&self.examples[i].features);
        }
        Tensor::from_vec(vec![idx.len(), self.feature_dim], data)
    }

    pub fn labels_of(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.examples[i].label).collect()
    }

    /// A new dataset holding clones of the selected examples, in order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
            feature_dim: self.feature_dim,
            class_count: self.class_count,
        }
    }
}

/// Which synthetic task to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Blobs,
    VarlenSequences,
}

/// Parameters for the synthetic generators. `noise` scales the Gaussian
/// perturbations (cluster spread for blobs, token spread for sequences);
/// `length_range` is inclusive and only read by the sequence task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: TaskKind,
    pub n: usize,
    pub classes: usize,
    pub feature_dim: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_length_range")]
    pub length_range: (u32, u32),
    pub seed: u64,
}

fn default_noise() -> f64 {
    1.0
}

fn default_length_range() -> (u32, u32) {
    (4, 16)
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), DatasetError> {
        if self.classes < 2 {
            return Err(DatasetError::InvalidSpec(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.n < 2 * self.classes {
            return Err(DatasetError::InvalidSpec(format!(
                "need at least 2 examples per class: n = {}, classes = {}",
                self.n, self.classes
            )));
        }
        if self.feature_dim == 0 {
            return Err(DatasetError::InvalidSpec("feature_dim must be >= 1".into()));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(DatasetError::InvalidSpec(format!(
                "noise must be finite and >= 0, got {}",
                self.noise
            )));
        }
        if self.kind == TaskKind::VarlenSequences {
            let (lo, hi) = self.length_range;
            if lo < 1 || lo > hi {
                return Err(DatasetError::InvalidSpec(format!(
                    "length_range must satisfy 1 <= lo <= hi, got ({}, {})",
                    lo, hi
                )));
            }
        }
        Ok(())
    }

    /// Dispatches to the generator for `kind`.
    pub fn generate(&self) -> Result<Dataset, DatasetError> {
        match self.kind {
            TaskKind::Blobs => gen_blobs(self),
            TaskKind::VarlenSequences => gen_varlen_sequences(self),
        }
    }
}

/// Standard normal draw via Box-Muller; two uniform draws per sample keeps
/// the consumption pattern simple and deterministic.
fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Samples `classes` direction vectors of norm `radius` whose pairwise
/// distances are at least `radius`, retrying the whole set on failure.
fn separated_centers(
    rng: &mut impl Rng,
    classes: usize,
    dim: usize,
    radius: f64,
) -> Result<Vec<Vec<f64>>, DatasetError> {
    const ATTEMPTS: usize = 200;
    for _ in 0..ATTEMPTS {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(classes);
        for _ in 0..classes {
            let raw: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-9 {
                break;
            }
            centers.push(raw.iter().map(|x| x * radius / norm).collect());
        }
        if centers.len() < classes {
            continue;
        }
        let ok = (0..classes).all(|i| {
            (i + 1..classes).all(|j| {
                let d2: f64 = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2.sqrt() >= radius
            })
        });
        if ok {
            return Ok(centers);
        }
    }
    Err(DatasetError::InvalidSpec(format!(
        "could not place {} separated class centers in {} dimensions",
        classes, dim
    )))
}

/// Gaussian clusters: class centers of norm 2.0 with pairwise separation at
/// least 2.0, labels assigned round-robin, features `center + noise * N(0, I)`.
pub fn gen_blobs(spec: &SyntheticSpec) -> Result<Dataset, DatasetError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = separated_centers(&mut rng, spec.classes, spec.feature_dim, 2.0)?;
    let examples = (0..spec.n)
        .map(|i| {
            let label = i % spec.classes;
            let features = centers[label]
                .iter()
                .map(|c| c + spec.noise * gauss(&mut rng))
                .collect();
            Example::plain(features, label)
        })
        .collect();
    Ok(Dataset::new(examples, spec.feature_dim, spec.classes))
}

/// Mean-pooled token sequences with a `2/sqrt(len)`-scaled class signal; see
/// the module docs for why this yields a length-based difficulty axis.
pub fn gen_varlen_sequences(spec: &SyntheticSpec) -> Result<Dataset, DatasetError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let directions = separated_centers(&mut rng, spec.classes, spec.feature_dim, 1.0)?;
    let (lo, hi) = spec.length_range;
    let examples = (0..spec.n)
        .map(|i| {
            let label = i % spec.classes;
            let len = rng.gen_range(lo..=hi);
            let mut pooled = vec![0.0; spec.feature_dim];
            for _ in 0..len {
                for slot in pooled.iter_mut() {
                    *slot += spec.noise * gauss(&mut rng);
                }
            }
            let signal = 2.0 / (len as f64).sqrt();
            let features = pooled
                .iter()
                .zip(&directions[label])
                .map(|(p, d)| p / len as f64 + signal * d)
                .collect();
            Example {
                features,
                label,
                sequence_length: Some(len),
                reference_loss: None,
            }
        })
        .collect();
    Ok(Dataset::new(examples, spec.feature_dim, spec.classes))
}

/// Returns a copy of the dataset with each example's `reference_loss` set to
/// its cross-entropy under `model`; everything else is unchanged.
pub fn compute_reference_losses(ds: &Dataset, model: &Mlp) -> Result<Dataset, DatasetError> {
    if model.spec.input_dim != ds.feature_dim {
        return Err(DatasetError::DimensionMismatch {
            expected: model.spec.input_dim,
            got: ds.feature_dim,
        });
    }
    if model.spec.output_dim != ds.class_count {
        return Err(DatasetError::DimensionMismatch {
            expected: model.spec.output_dim,
            got: ds.class_count,
        });
    }
    let losses = model.cross_entropies(ds);
    let mut out = ds.clone();
    for (ex, loss) in out.examples.iter_mut().zip(losses) {
        ex.reference_loss = Some(loss);
    }
    Ok(out)
}

/// Writes `label,f0,...,f{k-1}` rows, appending a `sequence_length` column
/// and/or a `difficulty` column (the reference-loss slot) when any example
/// carries them; absent per-example values become empty cells.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let with_len = ds.examples.iter().any(|e| e.sequence_length.is_some());
    let with_difficulty = ds.examples.iter().any(|e| e.reference_loss.is_some());

    let mut out = String::from("label");
    for j in 0..ds.feature_dim {
        write!(out, ",f{}", j).unwrap();
    }
    if with_len {
        out.push_str(",sequence_length");
    }
    if with_difficulty {
        out.push_str(",difficulty");
    }
    out.push('\n');
    for ex in &ds.examples {
        write!(out, "{}", ex.label).unwrap();
        for f in &ex.features {
            write!(out, ",{:?}", f).unwrap();
        }
        if with_len {
            match ex.sequence_length {
                Some(l) => write!(out, ",{}", l).unwrap(),
                None => out.push(','),
            }
        }
        if with_difficulty {
            match ex.reference_loss {
                Some(d) => write!(out, ",{:?}", d).unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err)
}

/// Loads a dataset written by [`write_csv`] (or hand-made in the same shape):
/// a `label` column, contiguous `f0..f{k-1}` feature columns, and optional
/// `sequence_length` / `difficulty` columns in any order. The `difficulty`
/// column fills each example's `reference_loss`.
pub fn load_csv(path: &Path) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let header = lines
        .next()
        .ok_or_else(|| DatasetError::MalformedHeader("empty file".into()))?;

    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut label_col = None;
    let mut len_col = None;
    let mut difficulty_col = None;
    let mut feature_cols: Vec<(usize, usize)> = Vec::new(); // (feature index, column)
    for (col, name) in names.iter().enumerate() {
        match *name {
            "label" if label_col.is_none() => label_col = Some(col),
            "sequence_length" if len_col.is_none() => len_col = Some(col),
            "difficulty" if difficulty_col.is_none() => difficulty_col = Some(col),
            _ => {
                let idx: Option<usize> = name.strip_prefix('f').and_then(|s| s.parse().ok());
                match idx {
                    Some(i) => feature_cols.push((i, col)),
                    None => {
                        return Err(DatasetError::MalformedHeader(format!(
                            "unrecognized or duplicate column `{}`",
                            name
                        )))
                    }
                }
            }
        }
    }
    let label_col =
        label_col.ok_or_else(|| DatasetError::MalformedHeader("missing `label` column".into()))?;
    feature_cols.sort();
    let feature_dim = feature_cols.len();
    let contiguous = feature_cols
        .iter()
        .enumerate()
        .all(|(expect, (idx, _))| *idx == expect);
    if feature_dim == 0 || !contiguous {
        return Err(DatasetError::MalformedHeader(
            "feature columns must be f0..f{k-1} with no gaps".into(),
        ));
    }

    let mut examples = Vec::new();
    for (line_idx, line) in lines.enumerate() {
        let line_no = line_idx + 2; // header is line 1
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(DatasetError::MalformedRow {
                line: line_no,
                reason: format!("expected {} fields, got {}", names.len(), fields.len()),
            });
        }
        let bad = |reason: String| DatasetError::MalformedRow {
            line: line_no,
            reason,
        };
        let label: usize = fields[label_col]
            .parse()
            .map_err(|_| bad(format!("label `{}` is not an index", fields[label_col])))?;
        let mut features = Vec::with_capacity(feature_dim);
        for (fi, col) in &feature_cols {
            let v: f64 = fields[*col]
                .parse()
                .map_err(|_| bad(format!("feature f{} `{}` is not a number", fi, fields[*col])))?;
            features.push(v);
        }
        let sequence_length = match len_col.map(|c| fields[c]) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse()
                    .map_err(|_| bad(format!("sequence_length `{}` is not an integer", s)))?,
            ),
        };
        let reference_loss = match difficulty_col.map(|c| fields[c]) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse()
                    .map_err(|_| bad(format!("difficulty `{}` is not a number", s)))?,
            ),
        };
        examples.push(Example {
            features,
            label,
            sequence_length,
            reference_loss,
        });
    }
    if examples.is_empty() {
        return Err(DatasetError::NoRows);
    }
    let class_count = examples.iter().map(|e| e.label).max().unwrap() + 1;
    Ok(Dataset::new(examples, feature_dim, class_count))
}

/// Shuffles with the seed and partitions into (train, dev, test) by the
/// largest-remainder method: each split gets `floor(fraction * n)` examples
/// and the leftovers go to the splits with the largest fractional parts
/// (ties toward the earlier split). Splits are disjoint and exhaustive.
pub fn split(
    ds: &Dataset,
    fractions: [f64; 3],
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), DatasetError> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| *f < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadFractions(fractions));
    }
    let n = ds.len();
    let mut counts = [0usize; 3];
    let mut remainders = [0.0f64; 3];
    for (i, f) in fractions.iter().enumerate() {
        let raw = f * n as f64;
        counts[i] = raw.floor() as usize;
        remainders[i] = raw - raw.floor();
    }
    let mut leftover = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        remainders[b]
            .partial_cmp(&remainders[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates, back to front.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }

    let train = ds.subset(&indices[..counts[0]]);
    let dev = ds.subset(&indices[counts[0]..counts[0] + counts[1]]);
    let test = ds.subset(&indices[counts[0] + counts[1]..]);
    Ok((train, dev, test))
}

/// `batch_size` indices drawn uniformly with replacement from `0..n`. This is
/// the one batch-sampling routine every training loop shares, so identical
/// seeds consume identical draws everywhere.
pub fn uniform_batch_indices(n: usize, batch_size: usize, rng: &mut impl Rng) -> Vec<usize> {
    assert!(n > 0, "cannot sample from an empty pool");
    (0..batch_size).map(|_| rng.gen_range(0..n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MlpSpec;
    use crate::optim::{adam_step, AdamConfig, AdamState};

    fn blob_spec(noise: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            kind: TaskKind::Blobs,
            n: 240,
            classes: 3,
            feature_dim: 4,
            noise,
            length_range: (4, 16),
            seed,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            gen_blobs(&blob_spec(0.8, 42)).unwrap(),
            gen_blobs(&blob_spec(0.8, 42)).unwrap()
        );
        let spec = SyntheticSpec {
            kind: TaskKind::VarlenSequences,
            ..blob_spec(1.0, 7)
        };
        assert_eq!(
            gen_varlen_sequences(&spec).unwrap(),
            gen_varlen_sequences(&spec).unwrap()
        );
    }

    #[test]
    fn noiseless_blobs_are_linearly_separable_with_margin() {
        let ds = gen_blobs(&blob_spec(0.0, 3)).unwrap();
        // Recover the centers from the data itself (noise 0 puts every point
        // exactly on its center), then check that projecting on each
        // center-difference direction separates the classes with a margin.
        let mut centers = vec![vec![0.0; ds.feature_dim]; ds.class_count];
        for ex in &ds.examples {
            centers[ex.label] = ex.features.clone();
        }
        for a in 0..ds.class_count {
            for b in a + 1..ds.class_count {
                let dir: Vec<f64> = centers[a]
                    .iter()
                    .zip(&centers[b])
                    .map(|(x, y)| x - y)
                    .collect();
                let project = |f: &[f64]| -> f64 { f.iter().zip(&dir).map(|(x, d)| x * d).sum() };
                let min_a = ds
                    .examples
                    .iter()
                    .filter(|e| e.label == a)
                    .map(|e| project(&e.features))
                    .fold(f64::INFINITY, f64::min);
                let max_b = ds
                    .examples
                    .iter()
                    .filter(|e| e.label == b)
                    .map(|e| project(&e.features))
                    .fold(f64::NEG_INFINITY, f64::max);
                // Separation 2.0 along a length-2.0 direction: margin 4.
                assert!(
                    min_a - max_b >= 3.99,
                    "classes {} and {} overlap: {} vs {}",
                    a,
                    b,
                    min_a,
                    max_b
                );
            }
        }
    }

    #[test]
    fn moderate_noise_blobs_are_learnable_to_ninety_percent() {
        let ds = gen_blobs(&blob_spec(0.5, 11)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mlp = Mlp::init(MlpSpec::new(4, 16, 3), &mut rng);
        let config = AdamConfig::with_gamma(0.05);
        let mut params = mlp.params();
        let mut state = AdamState::new(&params);
        let xs = ds.feature_matrix();
        let labels: Vec<usize> = ds.examples.iter().map(|e| e.label).collect();
        for _ in 0..300 {
            let mut graph = crate::autograd::Graph::new();
            let x = graph.leaf(xs.clone());
            let ids: Vec<_> = params.iter().map(|t| graph.leaf(t.clone())).collect();
            let logits = Mlp::forward_graph(&mut graph, &ids, x).unwrap();
            let losses = graph.softmax_cross_entropy(logits, &labels).unwrap();
            let loss = graph.mean(losses);
            let grads_map = graph.backward(loss).unwrap();
            let grads: Vec<Tensor> = ids
                .iter()
                .map(|id| grads_map.get_or_zeros(&graph, *id))
                .collect();
            adam_step(&config, &mut state, &mut params, &grads, config.gamma).unwrap();
        }
        mlp.set_params(&params);
        assert!(
            mlp.accuracy(&ds) >= 0.9,
            "full-batch training reached only {}",
            mlp.accuracy(&ds)
        );
    }

    #[test]
    fn varlen_lengths_cover_range_and_scale_shrinks() {
        let spec = SyntheticSpec {
            kind: TaskKind::VarlenSequences,
            n: 600,
            length_range: (4, 64),
            ..blob_spec(1.0, 19)
        };
        let ds = gen_varlen_sequences(&spec).unwrap();
        let lens: Vec<u32> = ds.examples.iter().map(|e| e.sequence_length.unwrap()).collect();
        assert!(lens.iter().all(|&l| (4..=64).contains(&l)));
        assert!(lens.iter().any(|&l| l <= 8) && lens.iter().any(|&l| l >= 60));
        // Mean feature magnitude of the shortest quartile should clearly
        // exceed that of the longest quartile (input scale ~ 1/sqrt(len)).
        let mean_scale = |pred: &dyn Fn(u32) -> bool| {
            let sel: Vec<f64> = ds
                .examples
                .iter()
                .filter(|e| pred(e.sequence_length.unwrap()))
                .flat_map(|e| e.features.iter().map(|f| f.abs()))
                .collect();
            sel.iter().sum::<f64>() / sel.len() as f64
        };
        let short = mean_scale(&|l| l <= 8);
        let long = mean_scale(&|l| l >= 48);
        assert!(
            short > 1.8 * long,
            "short-scale {} vs long-scale {}",
            short,
            long
        );
    }

    #[test]
    fn reference_losses_of_zeroed_model_equal_ln_classes() {
        let ds = gen_blobs(&blob_spec(0.5, 23)).unwrap();
        let mut mlp = Mlp::init(MlpSpec::new(4, 8, 3), &mut ChaCha8Rng::seed_from_u64(2));
        mlp.w2 = Tensor::zeros(vec![8, 3]);
        mlp.b2 = Tensor::zeros(vec![3]);
        let with_losses = compute_reference_losses(&ds, &mlp).unwrap();
        for ex in &with_losses.examples {
            assert!((ex.reference_loss.unwrap() - 3.0_f64.ln()).abs() < 1e-12);
        }
        // Recomputation is exact.
        let again = compute_reference_losses(&ds, &mlp).unwrap();
        assert_eq!(with_losses, again);
    }

    #[test]
    fn reference_losses_reject_dimension_mismatch() {
        let ds = gen_blobs(&blob_spec(0.5, 23)).unwrap();
        let mlp = Mlp::init(MlpSpec::new(7, 8, 3), &mut ChaCha8Rng::seed_from_u64(2));
        assert!(matches!(
            compute_reference_losses(&ds, &mlp),
            Err(DatasetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let spec = SyntheticSpec {
            kind: TaskKind::VarlenSequences,
            ..blob_spec(1.0, 31)
        };
        let mut ds = gen_varlen_sequences(&spec).unwrap();
        for (i, ex) in ds.examples.iter_mut().enumerate() {
            ex.reference_loss = Some(0.1 * i as f64 + 0.017);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_csv(&ds, &path).unwrap();
        let loaded = load_csv(&path).unwrap();
        assert_eq!(ds, loaded);
    }

    #[test]
    fn malformed_csv_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "label,f0,f1\n0,0.5,1.0\n1,oops,1.0\n").unwrap();
        match load_csv(&path) {
            Err(DatasetError::MalformedRow { line: 3, reason }) => {
                assert!(reason.contains("oops"), "{}", reason)
            }
            other => panic!("expected row error, got {:?}", other),
        }
        std::fs::write(&path, "label,f0,volume\n0,0.5,1.0\n").unwrap();
        assert!(matches!(
            load_csv(&path),
            Err(DatasetError::MalformedHeader(_))
        ));
    }

    #[test]
    fn split_uses_largest_remainder_counts() {
        let examples = (0..103)
            .map(|i| Example::plain(vec![i as f64], i % 2))
            .collect();
        let ds = Dataset::new(examples, 1, 2);
        let (train, dev, test) = split(&ds, [0.7, 0.2, 0.1], 5).unwrap();
        assert_eq!((train.len(), dev.len(), test.len()), (72, 21, 10));

        let (all, none1, none2) = split(&ds, [1.0, 0.0, 0.0], 5).unwrap();
        assert_eq!((all.len(), none1.len(), none2.len()), (103, 0, 0));
    }

    #[test]
    fn split_is_disjoint_exhaustive_and_seeded() {
        let examples = (0..57)
            .map(|i| Example::plain(vec![i as f64, -(i as f64)], i % 3))
            .collect();
        let ds = Dataset::new(examples, 2, 3);
        let (a, b, c) = split(&ds, [0.6, 0.25, 0.15], 99).unwrap();
        let mut seen: Vec<f64> = a
            .examples
            .iter()
            .chain(&b.examples)
            .chain(&c.examples)
            .map(|e| e.features[0])
            .collect();
        seen.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let expected: Vec<f64> = (0..57).map(|i| i as f64).collect();
        assert_eq!(seen, expected);

        let (a2, _, _) = split(&ds, [0.6, 0.25, 0.15], 99).unwrap();
        assert_eq!(a, a2);

        assert!(matches!(
            split(&ds, [0.5, 0.2, 0.2], 1),
            Err(DatasetError::BadFractions(_))
        ));
    }

    #[test]
    fn batch_indices_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let idx = uniform_batch_indices(17, 500, &mut rng);
        assert_eq!(idx.len(), 500);
        assert!(idx.iter().all(|&i| i < 17));
        // With replacement: 500 draws from 17 must repeat.
        let mut uniq = idx.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert!(uniq.len() < idx.len());
    }
}
