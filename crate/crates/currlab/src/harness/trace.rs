//! Training traces: the per-step instrumentation rows every run records, the
//! CSV schema they serialize to, and the convergence metric defined on them.

use std::io::Write;
use std::path::Path;

use super::HarnessError;

/// One recorded instrumentation point. Norms are measured before the learning
/// rate is applied; `mean_weight` and `sigma_normal` describe the loss weights
/// of the batch that produced this step's update (zero on the initialization
/// row, which precedes any batch).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Optimizer steps completed.
    pub step: u64,
    /// Mean unweighted cross-entropy over the full training split.
    pub train_loss: f64,
    /// Accuracy over the full dev split.
    pub dev_accuracy: f64,
    /// l2 norm of the normalized update `m_hat / (sqrt(v_hat) + eps)`.
    pub update_norm: f64,
    pub m_norm: f64,
    pub v_norm: f64,
    /// Mean loss weight in the step's batch.
    pub mean_weight: f64,
    /// Coefficient of variation of the batch weights.
    pub sigma_normal: f64,
    /// Learning rate applied at this step.
    pub lr: f64,
    /// Fraction of the (difficulty-ordered) data available to this step.
    pub portion: f64,
}

const HEADER: &str =
    "step,train_loss,dev_accuracy,update_norm,m_norm,v_norm,mean_weight,sigma_normal,lr,portion";

/// Writes rows in the fixed column order, formatting floats so a read-back
/// reproduces them exactly. An empty trace yields a header-only file.
pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<(), HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = Vec::with_capacity(64 * (rows.len() + 1));
    writeln!(out, "{}", HEADER).map_err(io_err)?;
    for r in rows {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.step,
            r.train_loss,
            r.dev_accuracy,
            r.update_norm,
            r.m_norm,
            r.v_norm,
            r.mean_weight,
            r.sigma_normal,
            r.lr,
            r.portion
        )
        .map_err(io_err)?;
    }
    std::fs::write(path, out).map_err(io_err)
}

/// Reads a trace written by [`write_trace_csv`].
pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let bad = |line: usize, reason: String| HarnessError::MalformedTrace {
        path: path.display().to_string(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        Some((_, h)) => return Err(bad(1, format!("unexpected header `{}`", h))),
        None => return Err(bad(1, "empty file".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(bad(idx + 1, format!("expected 10 fields, got {}", fields.len())));
        }
        let f = |k: usize| -> Result<f64, HarnessError> {
            fields[k]
                .parse::<f64>()
                .map_err(|e| bad(idx + 1, format!("field {}: {}", k, e)))
        };
        rows.push(TraceRow {
            step: fields[0]
                .parse::<u64>()
                .map_err(|e| bad(idx + 1, format!("step: {}", e)))?,
            train_loss: f(1)?,
            dev_accuracy: f(2)?,
            update_norm: f(3)?,
            m_norm: f(4)?,
            v_norm: f(5)?,
            mean_weight: f(6)?,
            sigma_normal: f(7)?,
            lr: f(8)?,
            portion: f(9)?,
        });
    }
    Ok(rows)
}

/// First recorded step whose dev accuracy reaches `fraction` of the final
/// row's dev accuracy. `None` for an empty trace.
pub fn steps_to_convergence(rows: &[TraceRow], fraction: f64) -> Option<u64> {
    let last = rows.last()?;
    let threshold = fraction * last.dev_accuracy;
    rows.iter().find(|r| r.dev_accuracy >= threshold).map(|r| r.step)
}

/// The default convergence fraction: 98% of final dev accuracy.
pub const CONVERGENCE_FRACTION: f64 = 0.98;

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, acc: f64) -> TraceRow {
        TraceRow {
            step,
            train_loss: 1.0 / (step + 1) as f64,
            dev_accuracy: acc,
            update_norm: 0.123456789012345 * (step + 1) as f64,
            m_norm: 0.1,
            v_norm: 0.01,
            mean_weight: 0.5,
            sigma_normal: 0.25,
            lr: 1e-3,
            portion: 1.0,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows: Vec<TraceRow> = (0..7).map(|s| row(s * 50, 0.1 + s as f64 / 8.0)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&rows, &path).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn empty_trace_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("step,train_loss"));
        assert!(read_trace_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn malformed_traces_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        std::fs::write(&path, format!("{}\n0,1,2,3\n", super::HEADER)).unwrap();
        match read_trace_csv(&path) {
            Err(HarnessError::MalformedTrace { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed-trace error, got {:?}", other.map(|_| ())),
        }
        std::fs::write(&path, "nope\n").unwrap();
        assert!(matches!(
            read_trace_csv(&path),
            Err(HarnessError::MalformedTrace { line: 1, .. })
        ));
    }

    #[test]
    fn convergence_uses_fraction_of_final_accuracy() {
        // Accuracies (0.5, 0.9, 0.97, 0.99, 0.99) at steps (0, 100, ..., 400):
        // the threshold is 0.98 * 0.99 = 0.9702, first reached at step 300.
        let accs = [0.5, 0.9, 0.97, 0.99, 0.99];
        let rows: Vec<TraceRow> = accs
            .iter()
            .enumerate()
            .map(|(i, &a)| row(100 * i as u64, a))
            .collect();
        assert_eq!(steps_to_convergence(&rows, CONVERGENCE_FRACTION), Some(300));

        // Monotone trace ending at 1.0: first step at or above 0.98.
        let rows: Vec<TraceRow> = [0.2, 0.5, 0.979, 0.981, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &a)| row(10 * i as u64, a))
            .collect();
        assert_eq!(steps_to_convergence(&rows, CONVERGENCE_FRACTION), Some(30));

        assert_eq!(steps_to_convergence(&[], CONVERGENCE_FRACTION), None);
        // A single row converges at itself.
        assert_eq!(steps_to_convergence(&rows[..1], CONVERGENCE_FRACTION), Some(0));
    }
}
