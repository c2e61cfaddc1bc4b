//! The curriculum/Adam interaction reduced to one parameter.
//!
//! A curriculum, whatever its mechanism, ultimately changes the *magnitude
//! trajectory* of the gradients the optimizer sees. So strip everything else
//! away: a single parameter receives a prescribed gradient magnitude at every
//! step and Adam does its usual thing. The normalized update is
//! `m_hat / (sqrt(v_hat) + eps)`, and three regimes fall out:
//!
//! * constant magnitudes — the update settles at 1 regardless of the scale;
//! * rising magnitudes — the first moment (fast decay) tracks the rise ahead
//!   of the second moment (slow decay), so updates overshoot 1 while the rise
//!   lasts: easy-to-hard curricula act as a temporary learning-rate boost;
//! * falling magnitudes — the mirror image, updates dip below 1.
//!
//! Setting `beta1 = beta2` removes the decay-rate asymmetry and with it the
//! whole effect (and bounds the update by 1). [`boost_ratio`] quantifies a
//! schedule against a control as the ratio of mean update sizes over a step
//! window.

use thiserror::Error;

use crate::autograd::Tensor;
use crate::optim::{adam_step, AdamConfig, AdamState, UpdateRecord};

#[derive(Debug, Error)]
pub enum MinimalExampleError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("window [{lo}, {hi}] selects no simulated steps (run length {len})")]
    EmptyWindow { lo: u64, hi: u64, len: usize },
    #[error("control updates average to zero over the window; ratio undefined")]
    DegenerateControl,
}

/// Prescribed gradient-magnitude trajectories, indexed by 1-based step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientSchedule {
    /// `magnitude` at every step.
    Constant { magnitude: f64 },
    /// `plateau * min(i / ramp_steps, 1)`: linear rise, then flat.
    LinearUp { ramp_steps: u64, plateau: f64 },
    /// `start * max(1 - i / ramp_steps, 0)`: linear fall, then zero.
    LinearDown { ramp_steps: u64, start: f64 },
}

impl GradientSchedule {
    pub fn validate(&self) -> Result<(), MinimalExampleError> {
        let (steps, level) = match *self {
            GradientSchedule::Constant { magnitude } => (1, magnitude),
            GradientSchedule::LinearUp {
                ramp_steps,
                plateau,
            } => (ramp_steps, plateau),
            GradientSchedule::LinearDown { ramp_steps, start } => (ramp_steps, start),
        };
        if steps == 0 {
            return Err(MinimalExampleError::InvalidSchedule(
                "ramp_steps must be at least 1".into(),
            ));
        }
        if !(level > 0.0) || !level.is_finite() {
            return Err(MinimalExampleError::InvalidSchedule(format!(
                "gradient level must be positive and finite, got {}",
                level
            )));
        }
        Ok(())
    }

    /// Gradient magnitude at step `i >= 1`.
    pub fn magnitude(&self, i: u64) -> f64 {
        match *self {
            GradientSchedule::Constant { magnitude } => magnitude,
            GradientSchedule::LinearUp {
                ramp_steps,
                plateau,
            } => plateau * (i as f64 / ramp_steps as f64).min(1.0),
            GradientSchedule::LinearDown { ramp_steps, start } => {
                start * (1.0 - i as f64 / ramp_steps as f64).max(0.0)
            }
        }
    }
}

/// Runs Adam on one parameter for `steps` steps, feeding it the schedule's
/// magnitude as the gradient, and returns the per-step update records. The
/// interesting quantity is `update_norm`: for a single parameter it is
/// exactly the normalized update `|m_hat / (sqrt(v_hat) + eps)|`.
pub fn simulate_single_param(
    schedule: &GradientSchedule,
    config: &AdamConfig,
    steps: u64,
) -> Result<Vec<UpdateRecord>, MinimalExampleError> {
    schedule.validate()?;
    let mut params = vec![Tensor::scalar(0.0)];
    let mut state = AdamState::new(&params);
    let mut records = Vec::with_capacity(steps as usize);
    for i in 1..=steps {
        let grad = Tensor::scalar(schedule.magnitude(i));
        let record = adam_step(config, &mut state, &mut params, &[grad], config.gamma)
            .expect("prescribed gradients are finite");
        records.push(record);
    }
    Ok(records)
}

/// Ratio of mean update sizes, treatment over control, across the inclusive
/// 1-based step window `[lo, hi]`. Both runs must cover the window.
pub fn boost_ratio(
    treatment: &[UpdateRecord],
    control: &[UpdateRecord],
    window: (u64, u64),
) -> Result<f64, MinimalExampleError> {
    let (lo, hi) = window;
    let len = treatment.len().min(control.len());
    if lo == 0 || lo > hi || hi as usize > len {
        return Err(MinimalExampleError::EmptyWindow { lo, hi, len });
    }
    let mean = |records: &[UpdateRecord]| {
        let slice = &records[(lo - 1) as usize..hi as usize];
        slice.iter().map(|r| r.update_norm).sum::<f64>() / slice.len() as f64
    };
    let control_mean = mean(control);
    if control_mean == 0.0 {
        return Err(MinimalExampleError::DegenerateControl);
    }
    Ok(mean(treatment) / control_mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HORIZON: u64 = 8000;

    fn ramp() -> GradientSchedule {
        GradientSchedule::LinearUp {
            ramp_steps: 1000,
            plateau: 1.0,
        }
    }

    fn constant(magnitude: f64) -> GradientSchedule {
        GradientSchedule::Constant { magnitude }
    }

    #[test]
    fn constant_schedule_settles_at_unit_updates() {
        let records =
            simulate_single_param(&constant(1.0), &AdamConfig::default(), 500).unwrap();
        for r in &records {
            assert!((r.update_norm - 1.0).abs() < 1e-6, "step {}", r.step);
        }
    }

    #[test]
    fn update_sizes_ignore_the_gradient_scale() {
        let a = simulate_single_param(&constant(0.1), &AdamConfig::default(), 300).unwrap();
        let b = simulate_single_param(&constant(1.0), &AdamConfig::default(), 300).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.update_norm - y.update_norm).abs() < 1e-6);
        }
        let ratio = boost_ratio(&a, &b, (1, 300)).unwrap();
        assert!((ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rising_schedule_peak_matches_frozen_oracle() {
        let records = simulate_single_param(&ramp(), &AdamConfig::default(), HORIZON).unwrap();
        let (peak_idx, peak) = records
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.update_norm))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        // Frozen from an independent float64 simulation.
        assert_eq!(peak_idx + 1, 291, "peak step");
        assert!((peak - 1.6160196075637387).abs() < 1e-12, "peak {}", peak);
    }

    #[test]
    fn boost_ratios_match_frozen_oracles() {
        let config = AdamConfig::default();
        let up = simulate_single_param(&ramp(), &config, HORIZON).unwrap();
        let base = simulate_single_param(&constant(1.0), &config, HORIZON).unwrap();
        let down_schedule = GradientSchedule::LinearDown {
            ramp_steps: 2000,
            start: 1.0,
        };
        let down = simulate_single_param(&down_schedule, &config, HORIZON).unwrap();

        let boost_up = boost_ratio(&up, &base, (100, 1000)).unwrap();
        assert!((boost_up - 1.583555235903766).abs() < 1e-12, "{}", boost_up);
        assert!(boost_up >= 1.05);

        let boost_down = boost_ratio(&down, &base, (100, 1900)).unwrap();
        assert!(
            (boost_down - 0.6516621211296956).abs() < 1e-12,
            "{}",
            boost_down
        );
        assert!(boost_down < 0.95);
    }

    #[test]
    fn updates_return_to_parity_long_after_the_ramp() {
        let config = AdamConfig::default();
        let up = simulate_single_param(&ramp(), &config, HORIZON).unwrap();
        let base = simulate_single_param(&constant(1.0), &config, HORIZON).unwrap();
        // The ramp tops out at step 1000; five thousand steps later the
        // per-step ratio sits within 1% of 1.
        for (t, c) in up[5999..].iter().zip(&base[5999..]) {
            let ratio = t.update_norm / c.update_norm;
            assert!((ratio - 1.0).abs() < 0.01, "step {}: {}", t.step, ratio);
        }
        let late = boost_ratio(&up, &base, (6000, 8000)).unwrap();
        assert!((late - 1.0005352807275576).abs() < 1e-12, "{}", late);
    }

    #[test]
    fn equal_betas_erase_the_boost_and_bound_updates() {
        for (beta, frozen) in [(0.9, 0.9995488713602454), (0.99, 0.9951081768560844)] {
            let config = AdamConfig::default().with_equal_betas(beta);
            let up = simulate_single_param(&ramp(), &config, HORIZON).unwrap();
            let base = simulate_single_param(&constant(1.0), &config, HORIZON).unwrap();
            let boost = boost_ratio(&up, &base, (1, HORIZON)).unwrap();
            assert!((boost - frozen).abs() < 1e-12, "beta {}: {}", beta, boost);
            assert!((0.98..=1.02).contains(&boost), "beta {}: {}", beta, boost);
            for r in up.iter().chain(&base) {
                assert!(r.update_norm <= 1.0 + 1e-12, "step {}", r.step);
            }
        }
    }

    #[test]
    fn window_and_schedule_validation() {
        let config = AdamConfig::default();
        let records = simulate_single_param(&constant(1.0), &config, 10).unwrap();
        assert!(matches!(
            boost_ratio(&records, &records, (5, 1)),
            Err(MinimalExampleError::EmptyWindow { .. })
        ));
        assert!(matches!(
            boost_ratio(&records, &records, (1, 11)),
            Err(MinimalExampleError::EmptyWindow { .. })
        ));
        assert!(matches!(
            boost_ratio(&records, &records, (0, 5)),
            Err(MinimalExampleError::EmptyWindow { .. })
        ));
        assert!(simulate_single_param(
            &GradientSchedule::Constant { magnitude: 0.0 },
            &config,
            5
        )
        .is_err());
        assert!(simulate_single_param(
            &GradientSchedule::LinearUp {
                ramp_steps: 0,
                plateau: 1.0
            },
            &config,
            5
        )
        .is_err());

        // A schedule that reaches zero gradients drives updates to zero, so a
        // window past its end makes the *control* degenerate.
        let down = GradientSchedule::LinearDown {
            ramp_steps: 5,
            start: 1.0,
        };
        let zeroed = simulate_single_param(&down, &config, 4000).unwrap();
        let live = simulate_single_param(&constant(1.0), &config, 4000).unwrap();
        assert!(matches!(
            boost_ratio(&live, &zeroed, (3900, 4000)),
            Err(MinimalExampleError::DegenerateControl)
        ));
    }
}
