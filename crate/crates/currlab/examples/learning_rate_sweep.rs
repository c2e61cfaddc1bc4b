//! Sweeps the Adam step size on the Gaussian-clusters task and reports which
//! setting the selection split picks.
//!
//! The sweep scores each cell on the first half of the dev split only; the
//! second half stays untouched for reporting, so the picked rate is not
//! graded on the data that chose it. Artifacts (cell table CSV and an
//! accuracy-vs-rate plot) land under `$CURRLAB_OUT/learning_rate_sweep`.

use std::fs;
use std::io::Write as _;

use currlab::harness::grid::split_for_selection;
use currlab::harness::{self, grid_search, presets, train_runs, GridCandidate, GridSpace, PlotSeries};

fn main() {
    let (train, dev, _test) = presets::blobs_splits();
    let (selection, report) = split_for_selection(&dev);
    println!(
        "blobs task: {} train / {} selection / {} report examples",
        train.len(),
        selection.len(),
        report.len()
    );

    let base = presets::baseline_run(presets::GAMMA_OPT);
    let space = GridSpace {
        gammas: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
        batch_sizes: vec![16],
        curricula: vec![GridCandidate::new(harness::CurriculumSource::Baseline)],
    };
    let seeds = presets::eval_seeds(5);

    let outcome = grid_search(&base, &space, &seeds, 1, &train, &selection).expect("grid runs");

    println!("\n{:>10}  {:>8}  {:>14}  {:>12}", "gamma", "batch", "sel. accuracy", "conv. steps");
    for cell in &outcome.cells {
        println!(
            "{:>10}  {:>8}  {:>14.4}  {:>12.1}",
            cell.gamma, cell.batch_size, cell.mean_selection_accuracy, cell.mean_convergence_steps
        );
    }
    println!(
        "\nselected: gamma = {} (mean selection accuracy {:.4})",
        outcome.best.gamma, outcome.best.mean_selection_accuracy
    );

    // Re-score the winner on the held-back report half.
    let mut spec = base.clone();
    spec.adam.gamma = outcome.best.gamma;
    let runs = train_runs(&spec, &seeds, 1, &train, &report).expect("report runs");
    let accs: Vec<f64> = runs.iter().map(|r| r.final_dev_accuracy).collect();
    let summary = harness::summarize(&accs);
    println!(
        "report-half accuracy at the selected rate: {:.4} ± {:.4} over {} seeds",
        summary.mean, summary.std, summary.n
    );

    let dir = harness::out_dir().join("learning_rate_sweep");
    fs::create_dir_all(&dir).expect("create output dir");

    let mut csv = fs::File::create(dir.join("cells.csv")).expect("create cells.csv");
    writeln!(csv, "gamma,batch_size,curriculum,mean_selection_accuracy,mean_convergence_steps")
        .expect("write header");
    for cell in &outcome.cells {
        writeln!(
            csv,
            "{:?},{},{},{:?},{:?}",
            cell.gamma, cell.batch_size, cell.curriculum, cell.mean_selection_accuracy, cell.mean_convergence_steps
        )
        .expect("write cell");
    }

    let points: Vec<(f64, f64)> = outcome
        .cells
        .iter()
        .map(|c| (c.gamma.log10(), c.mean_selection_accuracy))
        .collect();
    harness::emit_plot(
        &[PlotSeries::new("selection accuracy", points)],
        "Accuracy across Adam step sizes",
        "log10 step size",
        "mean dev accuracy",
        &dir.join("sweep.svg"),
    )
    .expect("write plot");
    println!("artifacts in {}", dir.display());
}
