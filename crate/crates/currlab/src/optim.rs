//! Optimizers: bias-corrected Adam, SGD with momentum, and the square-root
//! decay learning-rate schedule.
//!
//! The Adam step here is deliberately bit-exact about its update rule, because
//! half the crate is about measuring the *size* of these updates:
//!
//! ```text
//! m <- b1 * m + (1 - b1) * g
//! v <- b2 * v + (1 - b2) * g^2
//! m_hat = m / (1 - b1^i)          (i counts steps from 1)
//! v_hat = v / (1 - b2^i)
//! delta = m_hat / (sqrt(v_hat) + eps)
//! theta <- theta - gamma * delta
//! ```
//!
//! Every step reports the l2 norms of `delta`, `m`, and `v` *before* the
//! learning rate is applied, so traces expose the normalized update size that
//! the curriculum analysis cares about: for a single parameter the stationary
//! value of `|delta|` is 1, schedules of increasing gradient magnitude push it
//! above 1, and `b1 = b2` bounds it by 1 from above.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::Tensor;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("gradient {param_index} has shape {got:?}, parameter has {expected:?}")]
    GradientShape {
        param_index: usize,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("state tracks {expected} parameters, step got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error(
        "non-finite gradient entry at parameter {param_index}, offset {offset}; state not modified"
    )]
    NonFiniteGradient { param_index: usize, offset: usize },
}

/// Adam hyperparameters. `gamma` is the base learning rate; the defaults for
/// the moment decays and the denominator offset are `0.9`, `0.999`, `1e-8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            gamma: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    /// Default moment decays with the given learning rate.
    pub fn with_gamma(gamma: f64) -> Self {
        AdamConfig {
            gamma,
            ..AdamConfig::default()
        }
    }

    /// Same config with both moment decays set to `beta` — the setting that
    /// neutralizes curriculum-induced update-size effects.
    pub fn with_equal_betas(self, beta: f64) -> Self {
        AdamConfig {
            beta1: beta,
            beta2: beta,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let ok = |x: f64| (0.0..1.0).contains(&x);
        if !ok(self.beta1) || !ok(self.beta2) {
            return Err(OptimError::InvalidConfig(format!(
                "betas must lie in [0, 1): got beta1 = {}, beta2 = {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(OptimError::InvalidConfig(format!(
                "gamma must be positive and finite: got {}",
                self.gamma
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(OptimError::InvalidConfig(format!(
                "epsilon must be positive and finite: got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// First and second moment accumulators plus the step counter. One state
/// follows one parameter list for the whole run.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    /// Zero moments shaped like `params`, step counter at 0.
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            step: 0,
        }
    }

    /// Steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }
}

/// What one optimizer step did: the step index it completed and the l2 norms
/// of the normalized update, first moment, and second moment, all measured
/// before the learning rate scales the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub step: u64,
    pub update_norm: f64,
    pub m_norm: f64,
    pub v_norm: f64,
    /// Learning rate actually applied this step.
    pub lr: f64,
}

fn check_grads(
    state_len: usize,
    params: &[Tensor],
    grads: &[Tensor],
) -> Result<(), OptimError> {
    if params.len() != state_len || grads.len() != state_len {
        return Err(OptimError::ParamCount {
            expected: state_len,
            got: params.len().max(grads.len()),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(OptimError::GradientShape {
                param_index: i,
                expected: p.shape().to_vec(),
                got: g.shape().to_vec(),
            });
        }
        if let Some(offset) = g.data().iter().position(|x| !x.is_finite()) {
            return Err(OptimError::NonFiniteGradient {
                param_index: i,
                offset,
            });
        }
    }
    Ok(())
}

/// One Adam step over a parameter list, in place. `lr` is the learning rate
/// for this step (a schedule may vary it; pass `config.gamma` for constant).
///
/// Gradients are validated *before* any state changes, so a non-finite
/// gradient leaves both the state and the parameters untouched.
pub fn adam_step(
    config: &AdamConfig,
    state: &mut AdamState,
    params: &mut [Tensor],
    grads: &[Tensor],
    lr: f64,
) -> Result<UpdateRecord, OptimError> {
    config.validate()?;
    check_grads(state.m.len(), params, grads)?;

    state.step += 1;
    let i = state.step;
    let bias1 = 1.0 - config.beta1.powi(i as i32);
    let bias2 = 1.0 - config.beta2.powi(i as i32);

    let mut update_sq = 0.0;
    let mut m_sq = 0.0;
    let mut v_sq = 0.0;
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let (pd, gd) = (p.data_mut(), g.data());
        let (md, vd) = (m.data_mut(), v.data_mut());
        for k in 0..pd.len() {
            md[k] = config.beta1 * md[k] + (1.0 - config.beta1) * gd[k];
            vd[k] = config.beta2 * vd[k] + (1.0 - config.beta2) * (gd[k] * gd[k]);
            let m_hat = md[k] / bias1;
            let v_hat = vd[k] / bias2;
            let delta = m_hat / (v_hat.sqrt() + config.epsilon);
            pd[k] -= lr * delta;
            update_sq += delta * delta;
            m_sq += md[k] * md[k];
            v_sq += vd[k] * vd[k];
        }
    }

    Ok(UpdateRecord {
        step: i,
        update_norm: update_sq.sqrt(),
        m_norm: m_sq.sqrt(),
        v_norm: v_sq.sqrt(),
        lr,
    })
}

/// Momentum buffer and step counter for [`sgd_momentum_step`].
#[derive(Debug, Clone)]
pub struct SgdMomentumState {
    momentum: Vec<Tensor>,
    step: u64,
}

impl SgdMomentumState {
    pub fn new(params: &[Tensor]) -> Self {
        SgdMomentumState {
            momentum: params
                .iter()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One SGD-with-momentum step: `mu <- beta * mu + (1 - beta) * g`, then
/// `theta <- theta - lr * mu`. The reference optimizer without second-moment
/// normalization, for isolating which effects are Adam-specific.
pub fn sgd_momentum_step(
    state: &mut SgdMomentumState,
    beta: f64,
    params: &mut [Tensor],
    grads: &[Tensor],
    lr: f64,
) -> Result<UpdateRecord, OptimError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(OptimError::InvalidConfig(format!(
            "momentum beta must lie in [0, 1): got {}",
            beta
        )));
    }
    check_grads(state.momentum.len(), params, grads)?;

    state.step += 1;
    let mut update_sq = 0.0;
    for ((p, g), mu) in params.iter_mut().zip(grads).zip(state.momentum.iter_mut()) {
        let (pd, gd, md) = (p.data_mut(), g.data(), mu.data_mut());
        for k in 0..pd.len() {
            md[k] = beta * md[k] + (1.0 - beta) * gd[k];
            pd[k] -= lr * md[k];
            update_sq += md[k] * md[k];
        }
    }
    let norm = update_sq.sqrt();
    Ok(UpdateRecord {
        step: state.step,
        update_norm: norm,
        m_norm: norm,
        v_norm: 0.0,
        lr,
    })
}

/// Learning-rate schedules on 1-based step indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    /// Always the base rate.
    Constant,
    /// Linear warmup to the base rate over `warmup` steps, then square-root
    /// decay: `gamma * min(i / warmup, sqrt(warmup / i))`.
    SqrtDecay { warmup: u64 },
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::Constant
    }
}

impl LrSchedule {
    /// The learning rate at step `i >= 1` given base rate `gamma`.
    pub fn at(&self, gamma: f64, i: u64) -> f64 {
        match *self {
            LrSchedule::Constant => gamma,
            LrSchedule::SqrtDecay { warmup } => {
                if warmup == 0 {
                    return gamma * (1.0 / (i as f64)).sqrt().min(1.0);
                }
                let i = i as f64;
                let w = warmup as f64;
                gamma * (i / w).min((w / i).sqrt())
            }
        }
    }
}

/// l2 norm over a whole parameter-update list, treating it as one flat vector.
pub fn global_update_norm(updates: &[Tensor]) -> f64 {
    updates
        .iter()
        .map(|t| t.data().iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(v: f64) -> Vec<Tensor> {
        vec![Tensor::scalar(v)]
    }

    /// Runs Adam on a single parameter with a prescribed gradient sequence,
    /// returning the normalized update sizes.
    fn adam_updates(config: &AdamConfig, grads: &[f64]) -> Vec<f64> {
        let mut params = scalar_params(0.0);
        let mut state = AdamState::new(&params);
        grads
            .iter()
            .map(|&g| {
                adam_step(
                    config,
                    &mut state,
                    &mut params,
                    &[Tensor::scalar(g)],
                    config.gamma,
                )
                .unwrap()
                .update_norm
            })
            .collect()
    }

    #[test]
    fn first_step_normalizes_any_gradient_to_almost_one() {
        // After bias correction, step 1 gives |delta| = g / (g + eps * k),
        // which is just below 1 for any positive gradient.
        let config = AdamConfig::default();
        for g in [0.5, 1.0, 3.0, 1e-3] {
            let d = adam_updates(&config, &[g])[0];
            assert!(d < 1.0 && d > 0.999, "g = {}: delta = {}", g, d);
        }
    }

    #[test]
    fn five_step_trace_matches_frozen_oracle() {
        // Frozen from an independent float64 simulation of the update rule,
        // gradients (1, 2, 0.5, 0.5, 3) at default hyperparameters.
        let expected = [
            0.9999999900000001,
            0.9651820197183435,
            0.8675672630088172,
            0.8183091018492401,
            0.8555822406002352,
        ];
        let got = adam_updates(&AdamConfig::default(), &[1.0, 2.0, 0.5, 0.5, 3.0]);
        for (g, e) in got.iter().zip(&expected) {
            // The oracle was evaluated at 50-digit precision; float64
            // accumulation order costs a few ulps.
            assert!((g - e).abs() < 1e-12, "{} vs {}", g, e);
        }
    }

    #[test]
    fn rising_gradients_push_updates_past_one() {
        // A sustained rise in gradient magnitude makes the first moment run
        // ahead of the slower second moment, so |delta| exceeds 1.
        let config = AdamConfig::default();
        let ramp: Vec<f64> = (1..=300).map(|i| (i as f64 / 100.0).min(1.0)).collect();
        let updates = adam_updates(&config, &ramp);
        let peak = updates.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 1.3, "ramp peak {}", peak);
    }

    #[test]
    fn equal_betas_bound_updates_by_one() {
        // With b1 = b2 the Cauchy-Schwarz bound |m_hat| <= sqrt(v_hat) holds
        // exactly, so |delta| <= 1 no matter the gradient history.
        for beta in [0.9, 0.99] {
            let config = AdamConfig::default().with_equal_betas(beta);
            let wild: Vec<f64> = (0..500u64)
                .map(|i| ((i * 2654435761 % 1000) as f64 / 100.0) - 5.0)
                .collect();
            for (i, d) in adam_updates(&config, &wild).iter().enumerate() {
                assert!(*d <= 1.0 + 1e-12, "step {}: |delta| = {}", i, d);
            }
        }
    }

    #[test]
    fn gradient_rescaling_barely_changes_updates() {
        // delta = m_hat / (sqrt(v_hat) + eps): scaling all gradients by c
        // cancels except through eps.
        let base: Vec<f64> = (1..=50).map(|i| ((i as f64) * 0.37).sin() + 1.5).collect();
        let config = AdamConfig::default();
        let reference = adam_updates(&config, &base);
        for c in [0.1, 10.0] {
            let scaled: Vec<f64> = base.iter().map(|g| g * c).collect();
            for (a, b) in adam_updates(&config, &scaled).iter().zip(&reference) {
                assert!((a - b).abs() < 1e-5, "c = {}: {} vs {}", c, a, b);
            }
        }
    }

    #[test]
    fn non_finite_gradient_leaves_state_untouched() {
        let config = AdamConfig::default();
        let mut params = vec![Tensor::from_vec(vec![2], vec![1.0, 2.0])];
        let mut state = AdamState::new(&params);
        adam_step(
            &config,
            &mut state,
            &mut params,
            &[Tensor::from_vec(vec![2], vec![0.5, -0.5])],
            config.gamma,
        )
        .unwrap();
        let before_params = params.clone();
        let before_m = state.m.clone();

        let err = adam_step(
            &config,
            &mut state,
            &mut params,
            &[Tensor::from_vec(vec![2], vec![0.5, f64::NAN])],
            config.gamma,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            OptimError::NonFiniteGradient {
                param_index: 0,
                offset: 1
            }
        ));
        assert_eq!(params, before_params);
        assert_eq!(state.m, before_m);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn gradient_shape_mismatch_is_reported() {
        let config = AdamConfig::default();
        let mut params = vec![Tensor::zeros(vec![2, 2])];
        let mut state = AdamState::new(&params);
        let err = adam_step(
            &config,
            &mut state,
            &mut params,
            &[Tensor::zeros(vec![4])],
            1e-3,
        )
        .unwrap_err();
        assert!(matches!(err, OptimError::GradientShape { .. }));
    }

    #[test]
    fn adam_step_is_deterministic() {
        let run = || {
            let config = AdamConfig::with_gamma(0.01);
            let mut params = vec![Tensor::from_vec(vec![3], vec![0.3, -0.8, 2.0])];
            let mut state = AdamState::new(&params);
            for i in 1..=20 {
                let g = Tensor::from_vec(vec![3], vec![0.1 * i as f64, -0.2, 0.05]);
                adam_step(&config, &mut state, &mut params, &[g], 0.01).unwrap();
            }
            params[0].data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sgd_with_zero_momentum_is_plain_descent() {
        let mut params = scalar_params(1.0);
        let mut state = SgdMomentumState::new(&params);
        let rec = sgd_momentum_step(
            &mut state,
            0.0,
            &mut params,
            &[Tensor::scalar(2.0)],
            0.1,
        )
        .unwrap();
        assert_eq!(params[0].scalar_value(), 1.0 - 0.1 * 2.0);
        assert_eq!(rec.update_norm, 2.0);
    }

    #[test]
    fn sgd_momentum_matches_hand_recurrence() {
        let beta = 0.9;
        let grads = [1.0, -0.5, 2.0, 0.25, 0.25];
        let mut params = scalar_params(0.0);
        let mut state = SgdMomentumState::new(&params);
        let mut mu = 0.0;
        let mut theta = 0.0;
        for &g in &grads {
            sgd_momentum_step(&mut state, beta, &mut params, &[Tensor::scalar(g)], 0.05)
                .unwrap();
            mu = beta * mu + (1.0 - beta) * g;
            theta -= 0.05 * mu;
            assert!((params[0].scalar_value() - theta).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_drives_sgd_momentum_to_fixed_point() {
        // With a constant gradient g the momentum converges to g itself.
        let mut params = scalar_params(0.0);
        let mut state = SgdMomentumState::new(&params);
        let mut norm = 0.0;
        for _ in 0..400 {
            norm = sgd_momentum_step(
                &mut state,
                0.9,
                &mut params,
                &[Tensor::scalar(3.0)],
                1e-4,
            )
            .unwrap()
            .update_norm;
        }
        assert!((norm - 3.0).abs() < 1e-10, "momentum norm {}", norm);
    }

    #[test]
    fn sqrt_decay_schedule_values() {
        let s = LrSchedule::SqrtDecay { warmup: 100 };
        // Linear ramp below the warmup knee.
        assert_eq!(s.at(1.0, 50), 0.5);
        // Exactly gamma at the knee.
        assert_eq!(s.at(1.0, 100), 1.0);
        // sqrt(100/400) = 1/2 afterwards.
        assert_eq!(s.at(1.0, 400), 0.5);
        assert_eq!(LrSchedule::Constant.at(0.3, 12345), 0.3);
    }

    #[test]
    fn global_norm_flattens_across_tensors() {
        let updates = [
            Tensor::from_vec(vec![2], vec![3.0, 0.0]),
            Tensor::from_vec(vec![1], vec![4.0]),
        ];
        assert_eq!(global_update_norm(&updates), 5.0);
    }
}
