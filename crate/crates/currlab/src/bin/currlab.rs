//! Command-line front end for the currlab library.
//!
//! Every subcommand is a thin wrapper over one library entry point: the
//! single-parameter simulation, config-driven training runs, teacher
//! pretraining and evaluation, the equal-β diagnostic, grid search, and
//! synthetic data generation. Experiment subcommands take a JSON config
//! (`--config`); without one they fall back to a built-in preset so every
//! command runs out of the box.
//!
//! Artifacts (trace CSVs, summary CSVs, optional SVG plots) land under the
//! directory named by `CURRLAB_OUT`, default `currlab-out`.
//!
//! Exit codes: 0 on success, 2 when an experiment finished but at least one
//! training run aborted on a numeric blowup, 1 for usage or I/O errors.

use std::error::Error;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use currlab::commentaries::{pretrain_teacher, save_teacher};
use currlab::curricula::ToyPolicy;
use currlab::datasets::{write_csv, SyntheticSpec, TaskKind};
use currlab::harness::config::{reference_scores, TeacherSpec, ToySpec};
use currlab::harness::{
    beta_diagnostic, emit_plot, grid_search, out_dir, presets, split_for_selection, summarize,
    train_runs, welch_t_test, BetaSetting, CurriculumSource, CurriculumSpec, ExperimentConfig,
    GridCandidate, GridSpace, PlotSeries, ResolvedExperiment, RunResult, RunSpec,
};
use currlab::minimal_example::{boost_ratio, simulate_single_param, GradientSchedule};
use currlab::optim::AdamConfig;

/// Desk-scale experiments on curriculum learning and Adam.
#[derive(Parser)]
#[command(name = "currlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one Adam-updated parameter under prescribed gradient schedules
    MinimalExample(MinimalExampleArgs),
    /// Train under a step-indexed loss-weight policy, next to its baseline twin
    Toy(ExperimentArgs),
    /// Train with a difficulty-ordered growing-prefix curriculum
    Handcrafted(ExperimentArgs),
    /// Pretrain a teacher by differentiating through unrolled practice runs
    Teach(TeachArgs),
    /// Evaluate a saved teacher against its ablation and a plain baseline
    Evaluate(EvaluateArgs),
    /// Re-run a curriculum and its baseline under default and equalized betas
    DiagnoseBeta(DiagnoseBetaArgs),
    /// Sweep learning rate x batch size x curriculum on a selection split
    Grid(GridArgs),
    /// Generate a synthetic dataset as CSV
    GenData(GenDataArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; a built-in preset when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also render an SVG plot next to the CSVs
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct MinimalExampleArgs {
    /// Ramp length for the rising and falling schedules
    #[arg(long, default_value_t = 1000)]
    ramp_steps: u64,
    /// Total simulated steps
    #[arg(long, default_value_t = 8000)]
    steps: u64,
    /// Set beta2 = beta1 instead of the Adam defaults
    #[arg(long)]
    equal_betas: bool,
    /// Also render the update-size curves as SVG
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct TeachArgs {
    /// Outer optimization iterations
    #[arg(long, default_value_t = 100)]
    iterations: u64,
    /// Teacher initialization seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Where to save the trained teacher (default: <out>/teach/teacher.json)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render the outer dev-loss curve as SVG
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Teacher JSON produced by `teach`; optional if the config names one
    #[arg(long)]
    teacher: Option<PathBuf>,
    /// JSON experiment config; a built-in preset when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also render the teacher's weight statistics as SVG
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct DiagnoseBetaArgs {
    /// JSON experiment config; a built-in preset when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// The shared moment decay for the equalized setting
    #[arg(long, default_value_t = 0.99)]
    equal_beta: f64,
}

#[derive(Args)]
struct GridArgs {
    /// JSON experiment config for the base run; a built-in preset when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated learning rates to sweep
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    )]
    gammas: Vec<f64>,
    /// Comma-separated batch sizes to sweep (default: the config's batch size)
    #[arg(long, value_delimiter = ',')]
    batch_sizes: Vec<usize>,
    /// Also render mean selection accuracy per cell as SVG
    #[arg(long)]
    plot: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Blobs,
    VarlenSequences,
}

#[derive(Args)]
struct GenDataArgs {
    /// Task family
    #[arg(long, value_enum, default_value = "blobs")]
    kind: DataKind,
    /// Number of examples
    #[arg(long, default_value_t = 600)]
    n: usize,
    /// Number of classes
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Feature dimension (sequence tasks embed into this many summary features)
    #[arg(long, default_value_t = 2)]
    feature_dim: usize,
    /// Gaussian perturbation scale
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Minimum sequence length (sequences only)
    #[arg(long, default_value_t = 4)]
    length_lo: u32,
    /// Maximum sequence length (sequences only)
    #[arg(long, default_value_t = 16)]
    length_hi: u32,
    /// Generator seed
    #[arg(long, default_value_t = 424242)]
    seed: u64,
    /// Fill the difficulty column with reference-model losses
    #[arg(long)]
    scored: bool,
    /// Output file (default: <out>/gen-data/dataset.csv)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Preset for `toy`: the weight ramp at the rate where its gap is largest
/// while the baseline still trains well.
const DEFAULT_TOY_CONFIG: &str = r#"{
  "data": {"synthetic": {"kind": "blobs", "n": 600, "classes": 3, "feature_dim": 2,
           "noise": 0.8, "seed": 424242}},
  "curriculum": {"toy": {"policy": {"kind": "linear_up", "kappa": 2000}}},
  "adam": {"gamma": 0.0003},
  "batch_size": 16,
  "total_steps": 2000,
  "eval_interval": 50,
  "seeds": [1, 2, 3, 4, 5],
  "student_hidden": 8
}"#;

/// Preset for `handcrafted`: easy-first ordering by sequence length on the
/// variable-length task, with the growing prefix reaching the full set early.
const DEFAULT_HANDCRAFTED_CONFIG: &str = r#"{
  "data": {"synthetic": {"kind": "varlen_sequences", "n": 600, "classes": 3, "feature_dim": 6,
           "noise": 1.0, "length_range": [4, 16], "seed": 171717}},
  "curriculum": {"hand_crafted": {"start_portion": 0.3, "step_size": 0.1,
                 "increment": 25, "measure": "sequence_length"}},
  "adam": {"gamma": 0.0002},
  "batch_size": 16,
  "total_steps": 500,
  "eval_interval": 10,
  "seeds": [1, 2, 3, 4, 5],
  "student_hidden": 16
}"#;

/// Preset for `diagnose-beta`: the weight ramp at a deliberately starved
/// learning rate, where the update-size boost dominates the outcome.
const DEFAULT_DIAGNOSE_CONFIG: &str = r#"{
  "data": {"synthetic": {"kind": "blobs", "n": 600, "classes": 3, "feature_dim": 2,
           "noise": 0.8, "seed": 424242}},
  "curriculum": {"toy": {"policy": {"kind": "linear_up", "kappa": 2000}}},
  "adam": {"gamma": 0.00005},
  "batch_size": 16,
  "total_steps": 2000,
  "eval_interval": 50,
  "seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
  "student_hidden": 8
}"#;

/// Preset for `grid`: a plain baseline on the blobs task; the sweep supplies
/// the learning rates.
const DEFAULT_GRID_CONFIG: &str = r#"{
  "data": {"synthetic": {"kind": "blobs", "n": 600, "classes": 3, "feature_dim": 2,
           "noise": 0.8, "seed": 424242}},
  "batch_size": 16,
  "total_steps": 2000,
  "eval_interval": 50,
  "seeds": [1, 2, 3],
  "student_hidden": 8
}"#;

/// Preset for `evaluate`: the run settings teachers are trained against.
const DEFAULT_EVALUATE_CONFIG: &str = r#"{
  "data": {"synthetic": {"kind": "blobs", "n": 600, "classes": 3, "feature_dim": 2,
           "noise": 0.8, "seed": 424242}},
  "adam": {"gamma": 0.05},
  "batch_size": 16,
  "total_steps": 400,
  "eval_interval": 10,
  "seeds": [1, 2, 3, 4, 5, 6, 7, 8],
  "student_hidden": 8
}"#;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::MinimalExample(args) => cmd_minimal_example(&args),
        Command::Toy(args) => cmd_family(&args, "toy", DEFAULT_TOY_CONFIG),
        Command::Handcrafted(args) => cmd_family(&args, "handcrafted", DEFAULT_HANDCRAFTED_CONFIG),
        Command::Teach(args) => cmd_teach(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::DiagnoseBeta(args) => cmd_diagnose_beta(&args),
        Command::Grid(args) => cmd_grid(&args),
        Command::GenData(args) => cmd_gen_data(&args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e);
            std::process::exit(1);
        }
    }
}

type CliResult = Result<i32, Box<dyn Error>>;

fn load_config(path: &Option<PathBuf>, fallback: &str) -> Result<ExperimentConfig, Box<dyn Error>> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::from_json(fallback)?),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Box<dyn Error>> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Runs one arm over all seeds and writes each run's trace CSV.
fn run_arm(
    spec: &RunSpec,
    resolved: &ResolvedExperiment,
    dir: &Path,
    label: &str,
) -> Result<Vec<RunResult>, Box<dyn Error>> {
    let results = train_runs(
        spec,
        &resolved.seeds,
        resolved.jobs,
        &resolved.train,
        &resolved.dev,
    )?;
    for r in &results {
        let path = dir.join(format!("trace_{}_seed{}.csv", label, r.seed));
        currlab::harness::write_trace_csv(&r.trace, &path)?;
    }
    Ok(results)
}

/// Writes the per-experiment summary: one row per (arm, seed).
fn write_summary(arms: &[(String, Vec<RunResult>)], path: &Path) -> Result<(), Box<dyn Error>> {
    let mut out =
        String::from("arm,seed,final_dev_accuracy,steps_to_convergence,mean_update_norm,aborted_at_step\n");
    for (label, results) in arms {
        for r in results {
            let conv = r
                .steps_to_convergence
                .map(|s| s.to_string())
                .unwrap_or_default();
            let abort = r
                .aborted
                .as_ref()
                .map(|a| a.step.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{:?},{},{:?},{}",
                label,
                r.seed,
                r.final_dev_accuracy,
                conv,
                r.mean_update_norm(),
                abort
            );
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn print_arm(label: &str, results: &[RunResult]) {
    let accs: Vec<f64> = results.iter().map(|r| r.final_dev_accuracy).collect();
    let s = summarize(&accs);
    let converged: Vec<f64> = results
        .iter()
        .filter_map(|r| r.steps_to_convergence.map(|c| c as f64))
        .collect();
    let mut line = format!(
        "  {:<22} final dev accuracy {:.4} +/- {:.4} over {} seeds",
        label, s.mean, s.std, s.n
    );
    if converged.is_empty() {
        line.push_str(", no run converged");
    } else {
        let _ = write!(
            line,
            ", converged {}/{} (mean step {:.1})",
            converged.len(),
            results.len(),
            summarize(&converged).mean
        );
    }
    let aborted = results.iter().filter(|r| r.aborted.is_some()).count();
    if aborted > 0 {
        let _ = write!(line, ", {} aborted", aborted);
    }
    println!("{}", line);
}

fn print_gap(treatment: &[RunResult], control: &[RunResult]) {
    let a: Vec<f64> = treatment.iter().map(|r| r.final_dev_accuracy).collect();
    let b: Vec<f64> = control.iter().map(|r| r.final_dev_accuracy).collect();
    let gap = summarize(&a).mean - summarize(&b).mean;
    match welch_t_test(&a, &b) {
        Some(w) => println!(
            "  gap (curriculum - baseline) {:+.4}; Welch t = {:.3}, p = {:.4} ({})",
            gap,
            w.t,
            w.p_value,
            if w.significant() { "significant" } else { "not significant" }
        ),
        None => println!("  gap (curriculum - baseline) {:+.4}; too few seeds for a test", gap),
    }
}

/// Per-step mean of a trace column across runs, truncated to the shortest
/// trace so aborted runs do not distort the tail.
fn mean_trace(results: &[RunResult], column: impl Fn(&currlab::harness::TraceRow) -> f64) -> Vec<(f64, f64)> {
    let rows = match results.iter().map(|r| r.trace.len()).min() {
        Some(n) if n > 0 => n,
        _ => return Vec::new(),
    };
    (0..rows)
        .map(|i| {
            let step = results[0].trace[i].step as f64;
            let mean =
                results.iter().map(|r| column(&r.trace[i])).sum::<f64>() / results.len() as f64;
            (step, mean)
        })
        .collect()
}

fn exit_code(arms: &[(String, Vec<RunResult>)]) -> i32 {
    let aborted = arms
        .iter()
        .flat_map(|(_, results)| results.iter())
        .any(|r| r.aborted.is_some());
    if aborted {
        2
    } else {
        0
    }
}

/// `toy` and `handcrafted`: run the configured curriculum next to its
/// baseline twin and report the accuracy gap.
fn cmd_family(args: &ExperimentArgs, name: &str, fallback: &str) -> CliResult {
    let mut cfg = load_config(&args.config, fallback)?;
    match (&cfg.curriculum, name) {
        (CurriculumSpec::Toy(_), "toy") | (CurriculumSpec::HandCrafted(_), "handcrafted") => {}
        (CurriculumSpec::None, "toy") => {
            cfg.curriculum = CurriculumSpec::Toy(ToySpec {
                policy: ToyPolicy::LinearUp { kappa: 2000.0 },
            });
        }
        (other, _) => {
            return Err(format!(
                "the {} subcommand needs a {} curriculum in its config, got {:?}",
                name,
                if name == "toy" { "\"toy\"" } else { "\"hand_crafted\"" },
                curriculum_kind(other)
            )
            .into())
        }
    }
    let resolved = cfg.resolve()?;
    let dir = out_dir().join(name);
    ensure_dir(&dir)?;

    let label = resolved.spec.curriculum.label();
    println!(
        "{}: {} at gamma {}, batch {}, {} steps, {} seeds",
        name,
        label,
        resolved.spec.adam.gamma,
        resolved.spec.batch_size,
        resolved.spec.total_steps,
        resolved.seeds.len()
    );

    let curriculum = run_arm(&resolved.spec, &resolved, &dir, &label)?;
    let twin = presets::baseline_twin(&resolved.spec);
    let baseline = run_arm(&twin, &resolved, &dir, "baseline")?;

    print_arm(&label, &curriculum);
    print_arm("baseline", &baseline);
    print_gap(&curriculum, &baseline);

    let arms = vec![(label.clone(), curriculum), ("baseline".into(), baseline)];
    write_summary(&arms, &dir.join("summary.csv"))?;
    if args.plot {
        let series = vec![
            PlotSeries::new(label, mean_trace(&arms[0].1, |r| r.dev_accuracy)),
            PlotSeries::new("baseline", mean_trace(&arms[1].1, |r| r.dev_accuracy)),
        ];
        emit_plot(
            &series,
            &format!("{}: mean dev accuracy", name),
            "step",
            "dev accuracy",
            &dir.join("dev_accuracy.svg"),
        )?;
    }
    println!("  artifacts in {}", dir.display());
    Ok(exit_code(&arms))
}

fn curriculum_kind(spec: &CurriculumSpec) -> &'static str {
    match spec {
        CurriculumSpec::None => "none",
        CurriculumSpec::Toy(_) => "toy",
        CurriculumSpec::HandCrafted(_) => "hand_crafted",
        CurriculumSpec::Teacher(_) => "teacher",
    }
}

fn cmd_minimal_example(args: &MinimalExampleArgs) -> CliResult {
    let mut adam = AdamConfig::default();
    if args.equal_betas {
        adam.beta2 = adam.beta1;
    }
    let up = GradientSchedule::LinearUp {
        ramp_steps: args.ramp_steps,
        plateau: 1.0,
    };
    let flat = GradientSchedule::Constant { magnitude: 1.0 };
    let down = GradientSchedule::LinearDown {
        ramp_steps: args.ramp_steps,
        start: 1.0,
    };
    let up_records = simulate_single_param(&up, &adam, args.steps)?;
    let flat_records = simulate_single_param(&flat, &adam, args.steps)?;
    let down_records = simulate_single_param(&down, &adam, args.steps)?;

    let lo = (args.ramp_steps / 10).max(1);
    let hi = args.ramp_steps.min(args.steps);
    let ramp_window = (lo, hi);
    let late_window = (args.steps - args.steps / 4 + 1, args.steps);

    println!(
        "single parameter, {} steps, betas ({}, {})",
        args.steps, adam.beta1, adam.beta2
    );
    println!(
        "  rising/constant update ratio in steps [{}, {}]: {:.4}",
        ramp_window.0,
        ramp_window.1,
        boost_ratio(&up_records, &flat_records, ramp_window)?
    );
    println!(
        "  falling/constant update ratio in steps [{}, {}]: {:.4}",
        ramp_window.0,
        ramp_window.1,
        boost_ratio(&down_records, &flat_records, ramp_window)?
    );
    println!(
        "  rising/constant update ratio in steps [{}, {}]: {:.4}",
        late_window.0,
        late_window.1,
        boost_ratio(&up_records, &flat_records, late_window)?
    );
    let peak = up_records
        .iter()
        .max_by(|a, b| a.update_norm.total_cmp(&b.update_norm))
        .expect("at least one step");
    println!(
        "  rising schedule peaks at |update| = {:.4} on step {}",
        peak.update_norm, peak.step
    );

    let dir = out_dir().join("minimal-example");
    ensure_dir(&dir)?;
    let mut csv = String::from("step,rising,constant,falling\n");
    for i in 0..up_records.len() {
        let _ = writeln!(
            csv,
            "{},{:?},{:?},{:?}",
            up_records[i].step,
            up_records[i].update_norm,
            flat_records[i].update_norm,
            down_records[i].update_norm
        );
    }
    std::fs::write(dir.join("updates.csv"), csv)?;
    if args.plot {
        let stride = (args.steps / 800).max(1) as usize;
        let thin = |records: &[currlab::optim::UpdateRecord]| {
            records
                .iter()
                .step_by(stride)
                .map(|r| (r.step as f64, r.update_norm))
                .collect::<Vec<_>>()
        };
        let series = vec![
            PlotSeries::new("rising", thin(&up_records)),
            PlotSeries::new("constant", thin(&flat_records)),
            PlotSeries::new("falling", thin(&down_records)),
        ];
        emit_plot(
            &series,
            "normalized update size under prescribed gradient schedules",
            "step",
            "|update|",
            &dir.join("updates.svg"),
        )?;
    }
    println!("  artifacts in {}", dir.display());
    Ok(0)
}

fn cmd_teach(args: &TeachArgs) -> CliResult {
    let (train, dev, _) = presets::blobs_splits();
    let cfg = presets::teacher_train(args.iterations, args.seed);
    let practice = presets::teacher_practice();
    let outcome = pretrain_teacher(&cfg, &practice, &train, &dev)?;

    let dir = out_dir().join("teach");
    ensure_dir(&dir)?;
    let teacher_path = args
        .out
        .clone()
        .unwrap_or_else(|| dir.join("teacher.json"));
    if let Some(parent) = teacher_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_teacher(&outcome.teacher, &teacher_path)?;

    let mut csv = String::from("iteration,dev_loss\n");
    for (i, loss) in &outcome.dev_losses {
        let _ = writeln!(csv, "{},{:?}", i, loss);
    }
    std::fs::write(dir.join("outer_loss.csv"), csv)?;

    let n = outcome.dev_losses.len();
    println!(
        "teacher seed {}, {} outer iterations ({} skipped)",
        args.seed,
        args.iterations,
        outcome.skipped.len()
    );
    if n >= 10 {
        let decile = n / 10;
        let mean_of = |slice: &[(u64, f64)]| {
            slice.iter().map(|(_, l)| *l).sum::<f64>() / slice.len() as f64
        };
        println!(
            "  outer dev loss: first decile {:.4} -> last decile {:.4}",
            mean_of(&outcome.dev_losses[..decile]),
            mean_of(&outcome.dev_losses[n - decile..])
        );
    }
    if args.plot {
        let points: Vec<(f64, f64)> = outcome
            .dev_losses
            .iter()
            .map(|&(i, l)| (i as f64, l))
            .collect();
        emit_plot(
            &[PlotSeries::new("outer dev loss", points)],
            "teacher pretraining",
            "outer iteration",
            "dev loss after practice",
            &dir.join("outer_loss.svg"),
        )?;
    }
    println!("  teacher saved to {}", teacher_path.display());
    println!("  artifacts in {}", dir.display());
    Ok(0)
}

fn cmd_evaluate(args: &EvaluateArgs) -> CliResult {
    let mut cfg = load_config(&args.config, DEFAULT_EVALUATE_CONFIG)?;
    match (&args.teacher, &cfg.curriculum) {
        (Some(path), _) => {
            cfg.curriculum = CurriculumSpec::Teacher(TeacherSpec {
                path: path.clone(),
                ablated: false,
            });
        }
        (None, CurriculumSpec::Teacher(_)) => {}
        (None, _) => {
            return Err(
                "evaluate needs a teacher: pass --teacher or a config with a teacher curriculum"
                    .into(),
            )
        }
    }
    let resolved = cfg.resolve()?;
    let teacher = match &resolved.spec.curriculum {
        CurriculumSource::Teacher { teacher, .. } => teacher.clone(),
        _ => unreachable!("the curriculum was forced to a teacher above"),
    };

    let dir = out_dir().join("evaluate");
    ensure_dir(&dir)?;
    println!(
        "evaluating teacher over {} seeds at gamma {}, {} steps",
        resolved.seeds.len(),
        resolved.spec.adam.gamma,
        resolved.spec.total_steps
    );

    let mut spec = resolved.spec.clone();
    spec.curriculum = CurriculumSource::Teacher {
        teacher: teacher.clone(),
        ablated: false,
    };
    let plain = run_arm(&spec, &resolved, &dir, "teacher")?;
    spec.curriculum = CurriculumSource::Teacher {
        teacher,
        ablated: true,
    };
    let ablated = run_arm(&spec, &resolved, &dir, "teacher-ablated")?;
    spec.curriculum = CurriculumSource::Baseline;
    let baseline = run_arm(&spec, &resolved, &dir, "baseline")?;

    print_arm("teacher", &plain);
    print_arm("teacher-ablated", &ablated);
    print_arm("baseline", &baseline);

    let acc = |results: &[RunResult]| -> Vec<f64> {
        results.iter().map(|r| r.final_dev_accuracy).collect()
    };
    if let Some(w) = welch_t_test(&acc(&plain), &acc(&ablated)) {
        println!(
            "  teacher vs ablated: gap {:+.4}, p = {:.4} ({})",
            summarize(&acc(&plain)).mean - summarize(&acc(&ablated)).mean,
            w.p_value,
            if w.significant() { "weights carry signal beyond their mean" } else { "mean weight explains the effect" }
        );
    }
    if let Some(w) = welch_t_test(&acc(&plain), &acc(&baseline)) {
        println!(
            "  teacher vs baseline: gap {:+.4}, p = {:.4}",
            summarize(&acc(&plain)).mean - summarize(&acc(&baseline)).mean,
            w.p_value
        );
    }

    let arms = vec![
        ("teacher".to_string(), plain),
        ("teacher-ablated".to_string(), ablated),
        ("baseline".to_string(), baseline),
    ];
    write_summary(&arms, &dir.join("summary.csv"))?;
    if args.plot {
        let weights = mean_trace(&arms[0].1, |r| r.mean_weight);
        let sigma = mean_trace(&arms[0].1, |r| r.sigma_normal);
        let strip_init = |points: Vec<(f64, f64)>| {
            points.into_iter().filter(|&(step, _)| step >= 1.0).collect::<Vec<_>>()
        };
        emit_plot(
            &[
                PlotSeries::new("mean batch weight", strip_init(weights)),
                PlotSeries::new("weight dispersion", strip_init(sigma)),
            ],
            "teacher weight statistics over training",
            "step",
            "value",
            &dir.join("weight_stats.svg"),
        )?;
    }
    println!("  artifacts in {}", dir.display());
    Ok(exit_code(&arms))
}

fn cmd_diagnose_beta(args: &DiagnoseBetaArgs) -> CliResult {
    let cfg = load_config(&args.config, DEFAULT_DIAGNOSE_CONFIG)?;
    let resolved = cfg.resolve()?;
    let diagnostic = beta_diagnostic(
        &resolved.spec,
        &resolved.seeds,
        args.equal_beta,
        resolved.jobs,
        &resolved.train,
        &resolved.dev,
    )?;

    println!(
        "beta diagnostic: {} at gamma {}, {} seeds",
        resolved.spec.curriculum.label(),
        resolved.spec.adam.gamma,
        resolved.seeds.len()
    );
    print_setting(&diagnostic.default_betas);
    print_setting(&diagnostic.equal_betas);

    let dir = out_dir().join("diagnose-beta");
    ensure_dir(&dir)?;
    let mut csv = String::from("setting,beta1,beta2,arm,seed,final_dev_accuracy\n");
    for setting in [&diagnostic.default_betas, &diagnostic.equal_betas] {
        for (arm, accs) in [
            ("curriculum", &setting.curriculum_accuracies),
            ("baseline", &setting.baseline_accuracies),
        ] {
            for (seed, acc) in resolved.seeds.iter().zip(accs) {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{:?}",
                    setting.label, setting.beta1, setting.beta2, arm, seed, acc
                );
            }
        }
    }
    std::fs::write(dir.join("summary.csv"), csv)?;
    println!("  artifacts in {}", dir.display());

    let aborted =
        diagnostic.default_betas.aborted_runs + diagnostic.equal_betas.aborted_runs > 0;
    Ok(if aborted { 2 } else { 0 })
}

fn print_setting(setting: &BetaSetting) {
    println!(
        "  betas ({}, {}): curriculum {:.4} vs baseline {:.4}, boost ratio {:.3}",
        setting.beta1,
        setting.beta2,
        setting.curriculum_accuracy.mean,
        setting.baseline_accuracy.mean,
        setting.boost_ratio
    );
    match &setting.gap.welch {
        Some(w) => println!(
            "    gap {:+.4}, Welch t = {:.3}, p = {:.4} ({})",
            setting.gap.gap,
            w.t,
            w.p_value,
            if w.significant() { "significant" } else { "not significant" }
        ),
        None => println!("    gap {:+.4}, too few seeds for a test", setting.gap.gap),
    }
    if setting.aborted_runs > 0 {
        println!("    {} runs aborted", setting.aborted_runs);
    }
}

fn cmd_grid(args: &GridArgs) -> CliResult {
    let cfg = load_config(&args.config, DEFAULT_GRID_CONFIG)?;
    let resolved = cfg.resolve()?;
    let (selection, report) = split_for_selection(&resolved.dev);

    let mut curricula = vec![GridCandidate::new(CurriculumSource::Baseline)];
    if !matches!(resolved.spec.curriculum, CurriculumSource::Baseline) {
        curricula.push(GridCandidate::new(resolved.spec.curriculum.clone()));
    }
    let batch_sizes = if args.batch_sizes.is_empty() {
        vec![resolved.spec.batch_size]
    } else {
        args.batch_sizes.clone()
    };
    let space = GridSpace {
        gammas: args.gammas.clone(),
        batch_sizes,
        curricula,
    };
    let cells = space.gammas.len() * space.batch_sizes.len() * space.curricula.len();
    println!(
        "grid: {} cells x {} seeds, scored on a {}-example selection split",
        cells,
        resolved.seeds.len(),
        selection.len()
    );

    let outcome = grid_search(
        &resolved.spec,
        &space,
        &resolved.seeds,
        resolved.jobs,
        &resolved.train,
        &selection,
    )?;

    let dir = out_dir().join("grid");
    ensure_dir(&dir)?;
    let mut csv =
        String::from("gamma,batch_size,curriculum,mean_selection_accuracy,mean_convergence_steps\n");
    for cell in &outcome.cells {
        let _ = writeln!(
            csv,
            "{:?},{},{},{:?},{:?}",
            cell.gamma,
            cell.batch_size,
            cell.curriculum,
            cell.mean_selection_accuracy,
            cell.mean_convergence_steps
        );
    }
    std::fs::write(dir.join("cells.csv"), csv)?;
    let mut csv = String::from("gamma,batch_size,curriculum,seed,selection_accuracy,steps_to_convergence,aborted\n");
    for row in &outcome.rows {
        let conv = row
            .steps_to_convergence
            .map(|s| s.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            csv,
            "{:?},{},{},{},{:?},{},{}",
            row.gamma, row.batch_size, row.curriculum, row.seed, row.selection_accuracy, conv, row.aborted
        );
    }
    std::fs::write(dir.join("rows.csv"), csv)?;

    let best = &outcome.best;
    println!(
        "  winner: gamma {}, batch {}, {} (selection accuracy {:.4}, mean convergence step {:.1})",
        best.gamma, best.batch_size, best.curriculum, best.mean_selection_accuracy, best.mean_convergence_steps
    );

    // Re-score the winning cell on the held-back reporting half.
    let mut winner = resolved.spec.clone();
    winner.adam.gamma = best.gamma;
    winner.batch_size = best.batch_size;
    winner.curriculum = space
        .curricula
        .iter()
        .find(|c| c.label == best.curriculum)
        .expect("the winner came from the space")
        .curriculum
        .clone();
    let rescored = train_runs(
        &winner,
        &resolved.seeds,
        resolved.jobs,
        &resolved.train,
        &report,
    )?;
    let accs: Vec<f64> = rescored.iter().map(|r| r.final_dev_accuracy).collect();
    println!(
        "  winner on the reporting half: accuracy {:.4} +/- {:.4}",
        summarize(&accs).mean,
        summarize(&accs).std
    );

    if args.plot {
        let mut series = Vec::new();
        for &batch in &space.batch_sizes {
            for candidate in &space.curricula {
                let points: Vec<(f64, f64)> = outcome
                    .cells
                    .iter()
                    .filter(|c| c.batch_size == batch && c.curriculum == candidate.label)
                    .map(|c| (c.gamma.log10(), c.mean_selection_accuracy))
                    .collect();
                series.push(PlotSeries::new(
                    format!("batch {} / {}", batch, candidate.label),
                    points,
                ));
            }
        }
        emit_plot(
            &series,
            "grid: mean selection accuracy",
            "log10 gamma",
            "accuracy",
            &dir.join("grid.svg"),
        )?;
    }
    println!("  artifacts in {}", dir.display());
    Ok(0)
}

fn cmd_gen_data(args: &GenDataArgs) -> CliResult {
    let spec = SyntheticSpec {
        kind: match args.kind {
            DataKind::Blobs => TaskKind::Blobs,
            DataKind::VarlenSequences => TaskKind::VarlenSequences,
        },
        n: args.n,
        classes: args.classes,
        feature_dim: args.feature_dim,
        noise: args.noise,
        length_range: (args.length_lo, args.length_hi),
        seed: args.seed,
    };
    let mut ds = spec.generate()?;
    if args.scored {
        ds = reference_scores(&ds, presets::SCORER_HIDDEN)?;
    }
    let path = match &args.out {
        Some(p) => p.clone(),
        None => {
            let dir = out_dir().join("gen-data");
            ensure_dir(&dir)?;
            dir.join("dataset.csv")
        }
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_csv(&ds, &path)?;
    println!(
        "wrote {} examples ({} classes, {} features{}) to {}",
        ds.len(),
        ds.class_count,
        ds.feature_dim,
        if args.scored { ", difficulty-scored" } else { "" },
        path.display()
    );
    Ok(0)
}
