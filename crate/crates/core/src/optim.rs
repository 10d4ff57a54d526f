//! Loss, optimizer, early stopping and the finite-difference checker shared by
//! every trainable model in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLIP, 1 - PROB_CLIP]` before the log.
pub const PROB_CLIP: f64 = 1e-12;

/// Binary cross-entropy and its derivative with respect to `p`.
pub fn bce_loss(p: f64, y: f64) -> (f64, f64) {
    let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = -y / p + (1.0 - y) / (1.0 - p);
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, tensor_lens: &[usize]) -> Self {
        AdamState {
            config,
            first: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Gradients are validated before anything is
/// written, so a rejected step leaves both parameters and state untouched.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Shape(format!(
            "adam: {} parameter tensors, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first[i].len() {
            return Err(Error::Shape(format!("adam: tensor {i} length mismatch")));
        }
    }
    if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteGradient);
    }

    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - beta1.powi(t);
    let bias2 = 1.0 - beta2.powi(t);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
            v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            p[j] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracks validation loss per epoch and keeps a snapshot of the best model.
#[derive(Debug, Clone)]
pub struct EarlyStopper<T> {
    pub patience: usize,
    pub min_delta: f64,
    best_loss: f64,
    best_epoch: Option<usize>,
    epochs_since: usize,
    epoch: usize,
    best: Option<T>,
}

impl<T> EarlyStopper<T> {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopper {
            patience,
            min_delta,
            best_loss: f64::INFINITY,
            best_epoch: None,
            epochs_since: 0,
            epoch: 0,
            best: None,
        }
    }

    /// An epoch counts as an improvement only if it beats the best loss by at
    /// least `min_delta`. `snapshot` is called only on improvement.
    pub fn update(&mut self, validation_loss: f64, snapshot: impl FnOnce() -> T) -> StopDecision {
        self.epoch += 1;
        let improved = if self.best_loss.is_infinite() {
            validation_loss.is_finite()
        } else {
            validation_loss <= self.best_loss - self.min_delta
        };
        if improved {
            self.best_loss = validation_loss;
            self.best_epoch = Some(self.epoch);
            self.epochs_since = 0;
            self.best = Some(snapshot());
            StopDecision::Continue
        } else {
            self.epochs_since += 1;
            if self.epochs_since > self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    /// 1-based epoch of the current snapshot.
    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.epochs_since
    }

    pub fn best(&self) -> Option<&T> {
        self.best.as_ref()
    }

    pub fn into_best(self) -> Option<T> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub passed: bool,
}

/// Relative error as used by the checker: `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central-difference check of every coordinate of `theta`.
pub fn grad_check(f: impl FnMut(&[f64]) -> f64, theta: &[f64], analytic: &[f64], h: f64, tol: f64) -> GradCheckReport {
    let coords: Vec<usize> = (0..theta.len()).collect();
    grad_check_coords(f, theta, analytic, &coords, h, tol)
}

/// Central-difference check restricted to `coords` (for large tensors).
pub fn grad_check_coords(
    mut f: impl FnMut(&[f64]) -> f64,
    theta: &[f64],
    analytic: &[f64],
    coords: &[usize],
    h: f64,
    tol: f64,
) -> GradCheckReport {
    assert_eq!(theta.len(), analytic.len(), "gradient length");
    let mut point = theta.to_vec();
    let mut worst = 0.0;
    let mut worst_index = None;
    for &i in coords {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point);
        point[i] = orig - h;
        let minus = f(&point);
        point[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        if err > worst || err.is_nan() {
            worst = err;
            worst_index = Some(i);
        }
    }
    GradCheckReport {
        max_relative_error: worst,
        worst_index,
        checked: coords.len(),
        passed: worst <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_reference_values() {
        let (l, _) = bce_loss(0.5, 1.0);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let (l, _) = bce_loss(1.0 - PROB_CLIP, 1.0);
        assert!(l >= 0.0 && l < 1e-11);
        let (l, _) = bce_loss(0.9, 0.0);
        assert!((l - 2.302585092994046).abs() < 1e-12);
    }

    #[test]
    fn bce_clamps_extremes() {
        let (l0, g0) = bce_loss(0.0, 1.0);
        assert!(l0.is_finite() && g0.is_finite());
        assert!((l0 - (-PROB_CLIP.ln())).abs() < 1e-9);
        let (l1, g1) = bce_loss(1.0, 0.0);
        assert!(l1.is_finite() && g1.is_finite());
    }

    #[test]
    fn bce_gradient_matches_finite_differences_on_grid() {
        for y in [0.0, 1.0] {
            for k in 1..=9 {
                let p = f64::from(k) / 10.0;
                let (_, g) = bce_loss(p, y);
                let report = grad_check(|t| bce_loss(t[0], y).0, &[p], &[g], 1e-6, 1e-8);
                assert!(report.passed, "p={p} y={y}: {report:?}");
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_a_fixpoint() {
        let mut theta = vec![0.3, -1.2, 4.0];
        let before = theta.clone();
        let mut state = AdamState::new(AdamConfig::default(), &[3]);
        adam_step(&mut [&mut theta], &[&[0.0; 3]], &mut state).unwrap();
        assert_eq!(theta, before);
        assert_eq!(state.timestep(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut theta = vec![0.0];
        let mut state = AdamState::new(AdamConfig::default(), &[1]);
        adam_step(&mut [&mut theta], &[&[1.0]], &mut state).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        assert!((theta[0] + 1e-3).abs() < 1e-10);
        assert_eq!(theta[0], -1e-3 / (1.0 + 1e-8));
    }

    #[test]
    fn adam_runs_are_bit_identical() {
        let run = || {
            let mut theta = vec![0.5, -0.25];
            let mut state = AdamState::new(AdamConfig::default(), &[2]);
            let mut traj = Vec::new();
            for k in 0..20 {
                let g = [theta[0] * 2.0 - f64::from(k) * 0.01, theta[1].sin()];
                adam_step(&mut [&mut theta], &[&g], &mut state).unwrap();
                traj.push(theta.clone());
            }
            traj
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn adam_first_step_scales_with_learning_rate() {
        let first_step = |lr: f64| {
            let mut theta = vec![0.0, 0.0, 0.0];
            let config = AdamConfig {
                learning_rate: lr,
                ..AdamConfig::default()
            };
            let mut state = AdamState::new(config, &[3]);
            adam_step(&mut [&mut theta], &[&[0.7, -3.0, 1e-4]], &mut state).unwrap();
            theta
        };
        let a = first_step(1e-3);
        let b = first_step(2e-3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn adam_rejects_nan_without_mutating() {
        let mut theta = vec![1.0, 2.0];
        let mut state = AdamState::new(AdamConfig::default(), &[2]);
        let err = adam_step(&mut [&mut theta], &[&[f64::NAN, 0.0]], &mut state).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient));
        assert_eq!(err.to_string(), "non-finite gradient");
        assert_eq!(theta, vec![1.0, 2.0]);
        assert_eq!(state.timestep(), 0);
    }

    #[test]
    fn early_stop_monotone_improvement() {
        let mut s = EarlyStopper::new(2, 1e-5);
        for (epoch, loss) in [1.0, 0.9, 0.8].into_iter().enumerate() {
            assert_eq!(s.update(loss, || epoch), StopDecision::Continue);
        }
        assert_eq!(s.best_loss(), 0.8);
        assert_eq!(s.best(), Some(&2));
    }

    #[test]
    fn early_stop_after_patience_exceeded() {
        let mut s = EarlyStopper::new(2, 1e-5);
        let decisions: Vec<StopDecision> = [1.0, 1.1, 1.2, 1.3]
            .into_iter()
            .enumerate()
            .map(|(epoch, loss)| s.update(loss, || epoch + 1))
            .collect();
        assert_eq!(
            decisions,
            vec![
                StopDecision::Continue,
                StopDecision::Continue,
                StopDecision::Continue,
                StopDecision::Stop
            ]
        );
        assert_eq!(s.best_epoch(), Some(1));
        assert_eq!(s.into_best(), Some(1));
    }

    #[test]
    fn early_stop_min_delta_boundary() {
        let mut s = EarlyStopper::new(3, 1e-5);
        s.update(1.0, || 0);
        s.update(1.0 - 5e-6, || 1);
        assert_eq!(s.epochs_since_improvement(), 1);
        assert_eq!(s.best(), Some(&0));
    }

    #[test]
    fn grad_check_reference_cases() {
        let r = grad_check(|t| t[0] * t[0], &[3.0], &[6.0], 1e-5, 1e-4);
        assert!(r.passed && r.max_relative_error < 1e-9, "{r:?}");

        let r = grad_check(|t| t[0] * t[0], &[3.0], &[12.0], 1e-5, 1e-4);
        assert!(!r.passed);

        let r = grad_check(|_| 4.0, &[1.0, 2.0], &[0.0, 0.0], 1e-5, 1e-4);
        assert!(r.passed);
        assert_eq!(r.max_relative_error, 0.0);
    }
}
