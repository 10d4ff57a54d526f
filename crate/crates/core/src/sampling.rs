//! Negative sampling: the noise distribution and the logistic pairwise loss
//! shared by skip-gram and both paragraph-vector variants.

use rand::distributions::{Distribution, WeightedIndex};

use crate::error::{Error, Result};
use crate::rng::StageRng;
use crate::tensor::{axpy, dot, sigmoid, Matrix};

/// Unigram counts raised to the 3/4 power.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    weights: WeightedIndex<f64>,
    probs: Vec<f64>,
}

impl NoiseDistribution {
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let raw: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("noise distribution has no mass".into()));
        }
        let weights =
            WeightedIndex::new(&raw).map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
        Ok(NoiseDistribution {
            weights,
            probs: raw.iter().map(|w| w / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Draws `k` noise words; draws that hit `target` are discarded, so fewer
    /// than `k` may be returned.
    pub fn draw(&self, rng: &mut StageRng, k: usize, target: usize, out: &mut Vec<usize>) {
        out.clear();
        for _ in 0..k {
            let w = self.weights.sample(rng);
            if w != target {
                out.push(w);
            }
        }
    }
}

/// `-ln σ(x)`, computed without overflow.
#[inline]
pub fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Logistic loss of one positive output plus its negatives against the hidden
/// vector `hidden`:
///
/// `L = -ln σ(u_pos·h) - Σ_neg ln σ(-u_neg·h)`
///
/// `d_hidden` accumulates ∂L/∂h computed with the current output rows.
/// `output_coeff(row, g)` is called once per output with the scalar
/// `g = σ(u·h) - label`; the gradient for that output row is `g·h`.
pub fn ns_loss(
    hidden: &[f64],
    outputs: &Matrix,
    positive: usize,
    negatives: &[usize],
    d_hidden: &mut [f64],
    mut output_coeff: impl FnMut(usize, f64),
) -> f64 {
    let mut loss = 0.0;
    for (row, label) in std::iter::once((positive, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0))) {
        let u = outputs.row(row);
        let score = dot(u, hidden);
        loss += if label == 1.0 {
            neg_log_sigmoid(score)
        } else {
            neg_log_sigmoid(-score)
        };
        let g = sigmoid(score) - label;
        axpy(g, u, d_hidden);
        output_coeff(row, g);
    }
    loss
}

/// Gradient-descent update for one prediction: output rows move immediately,
/// the returned delta must be applied by the caller to whatever produced
/// `hidden`. Returns the loss before the update.
pub fn ns_sgd_step(
    hidden: &[f64],
    outputs: &mut Matrix,
    positive: usize,
    negatives: &[usize],
    lr: f64,
    d_hidden: &mut [f64],
    coeffs: &mut Vec<(usize, f64)>,
) -> f64 {
    d_hidden.iter_mut().for_each(|v| *v = 0.0);
    coeffs.clear();
    let loss = ns_loss(hidden, outputs, positive, negatives, d_hidden, |row, g| {
        coeffs.push((row, g))
    });
    for &(row, g) in coeffs.iter() {
        axpy(-lr * g, hidden, outputs.row_mut(row));
    }
    loss
}

/// Expected negative-sampling loss of a (hidden, positive) pair under the noise
/// distribution: `-ln σ(u_pos·h) - k Σ_w P(w) ln σ(-u_w·h)`. Deterministic,
/// for monitoring convergence.
pub fn expected_ns_loss(hidden: &[f64], outputs: &Matrix, positive: usize, noise: &NoiseDistribution, k: usize) -> f64 {
    let mut loss = neg_log_sigmoid(dot(outputs.row(positive), hidden));
    for (w, &p) in noise.probs().iter().enumerate() {
        if p > 0.0 {
            loss += k as f64 * p * neg_log_sigmoid(-dot(outputs.row(w), hidden));
        }
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::grad_check;
    use crate::rng::{fill_uniform, rng_from_seed};

    #[test]
    fn neg_log_sigmoid_matches_naive_form() {
        for x in [-30.0, -2.0, -0.1, 0.0, 0.3, 5.0, 40.0] {
            let naive = -(1.0 / (1.0 + f64::exp(-x))).ln();
            assert!((neg_log_sigmoid(x) - naive).abs() < 1e-12, "x={x}");
        }
        assert!(neg_log_sigmoid(-1000.0).is_finite());
    }

    #[test]
    fn noise_probabilities_follow_three_quarter_power() {
        let noise = NoiseDistribution::from_counts(&[0, 16, 1]).unwrap();
        let total = 8.0 + 1.0;
        assert_eq!(noise.probs()[0], 0.0);
        assert!((noise.probs()[1] - 8.0 / total).abs() < 1e-15);
        assert!(NoiseDistribution::from_counts(&[0, 0]).is_err());
    }

    #[test]
    fn draws_never_return_the_target() {
        let noise = NoiseDistribution::from_counts(&[5, 5, 5]).unwrap();
        let mut rng = rng_from_seed(1);
        let mut out = Vec::new();
        for _ in 0..100 {
            noise.draw(&mut rng, 5, 1, &mut out);
            assert!(out.iter().all(|&w| w != 1));
        }
    }

    #[test]
    fn pairwise_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(17);
        for _ in 0..20 {
            let (v, d) = (7, 5);
            let mut out = Matrix::zeros(v, d);
            fill_uniform(&mut rng, 0.8, out.as_mut_slice());
            let mut h = vec![0.0; d];
            fill_uniform(&mut rng, 0.8, &mut h);
            let negatives = [2, 4, 6];

            let mut d_h = vec![0.0; d];
            let mut d_out = Matrix::zeros(v, d);
            ns_loss(&h, &out, 1, &negatives, &mut d_h, |row, g| {
                axpy(g, &h, d_out.row_mut(row))
            });

            let r = grad_check(
                |x| ns_loss(x, &out, 1, &negatives, &mut vec![0.0; d], |_, _| {}),
                &h,
                &d_h,
                1e-5,
                1e-4,
            );
            assert!(r.passed, "{r:?}");
            let r = grad_check(
                |x| {
                    let m = Matrix::from_vec(v, d, x.to_vec());
                    ns_loss(&h, &m, 1, &negatives, &mut vec![0.0; d], |_, _| {})
                },
                out.as_slice(),
                d_out.as_slice(),
                1e-5,
                1e-4,
            );
            assert!(r.passed, "{r:?}");
        }
    }
}
