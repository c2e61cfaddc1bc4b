//! The whole phenomenon on one parameter: prescribed gradient-magnitude
//! schedules fed straight into Adam.
//!
//! A rising schedule makes the fast-decaying first moment outrun the
//! slow-decaying second moment, so normalized updates overshoot 1 while the
//! rise lasts; a falling schedule mirrors it downward; a constant schedule of
//! any scale settles at updates of exactly 1. Setting β₁ = β₂ removes the
//! decay asymmetry and the effect with it. Writes the update-norm traces as
//! an SVG under `$CURRLAB_OUT/single_parameter_boost`.

use std::fs;

use currlab::harness::{self, PlotSeries};
use currlab::minimal_example::{boost_ratio, simulate_single_param, GradientSchedule};
use currlab::optim::AdamConfig;

const HORIZON: u64 = 8000;

fn main() {
    let config = AdamConfig::default();
    let ramp = GradientSchedule::LinearUp {
        ramp_steps: 1000,
        plateau: 1.0,
    };
    let fall = GradientSchedule::LinearDown {
        ramp_steps: 2000,
        start: 1.0,
    };
    let flat = GradientSchedule::Constant { magnitude: 1.0 };

    let up = simulate_single_param(&ramp, &config, HORIZON).expect("simulate");
    let down = simulate_single_param(&fall, &config, HORIZON).expect("simulate");
    let base = simulate_single_param(&flat, &config, HORIZON).expect("simulate");

    let peak = up
        .iter()
        .map(|r| r.update_norm)
        .fold(f64::MIN, f64::max);
    println!("default betas (beta1 {}, beta2 {}):", config.beta1, config.beta2);
    println!("  rising-magnitude peak update: {:.4} (constant schedules sit at 1)", peak);
    println!(
        "  boost over the ramp  [100, 1000]: {:.4}",
        boost_ratio(&up, &base, (100, 1000)).expect("windows overlap")
    );
    println!(
        "  dip over the fall    [100, 1900]: {:.4}",
        boost_ratio(&down, &base, (100, 1900)).expect("windows overlap")
    );
    println!(
        "  long after the ramp [6000, 8000]: {:.4} (back to parity)",
        boost_ratio(&up, &base, (6000, 8000)).expect("windows overlap")
    );

    for beta in [0.9, 0.99] {
        let eq = config.with_equal_betas(beta);
        let up_eq = simulate_single_param(&ramp, &eq, HORIZON).expect("simulate");
        let base_eq = simulate_single_param(&flat, &eq, HORIZON).expect("simulate");
        let max_update = up_eq
            .iter()
            .chain(&base_eq)
            .map(|r| r.update_norm)
            .fold(f64::MIN, f64::max);
        println!(
            "beta1 = beta2 = {beta}: full-horizon boost {:.4}, max update {:.6} (bounded by 1)",
            boost_ratio(&up_eq, &base_eq, (1, HORIZON)).expect("windows overlap"),
            max_update
        );
    }

    let dir = harness::out_dir().join("single_parameter_boost");
    fs::create_dir_all(&dir).expect("create output dir");
    let series = |label: &str, records: &[currlab::optim::UpdateRecord]| {
        PlotSeries::new(
            label,
            records
                .iter()
                .step_by(10)
                .map(|r| (r.step as f64, r.update_norm))
                .collect(),
        )
    };
    harness::emit_plot(
        &[
            series("rising 0->1 over 1000", &up),
            series("falling 1->0 over 2000", &down),
            series("constant 1", &base),
        ],
        "Normalized Adam updates under gradient-magnitude schedules",
        "step",
        "|update| per step",
        &dir.join("updates.svg"),
    )
    .expect("write plot");
    println!("trace plot in {}", dir.display());
}
