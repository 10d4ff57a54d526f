//! Bidirectional LSTM binary classifier with full backpropagation through time.
//!
//! Both directions start from zero state. The forward direction reads rows
//! `0..n`, the backward direction reads rows `n-1..=0`; their final hidden
//! states are concatenated into a `2H` feature, passed through (inverted)
//! dropout during training, and scored by a sigmoid unit.

mod cell;
mod input;
mod io;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::rng::{fill_uniform, StageRng};
use crate::tensor::{dot, sigmoid, Matrix};

pub use cell::{lstm_cell_forward, CellCache, Gate, LstmDirectionParams};
pub use input::{build_input_matrix, InputMatrix, InputMode};
pub use io::{load_model, save_model};

use cell::{direction_backward, direction_forward, StepState};
use rand::Rng;

/// Hashes of the artifacts a model was trained against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatStamps {
    pub vocab_hash: u64,
    pub embedding_hash: u64,
    /// Zero in word-embedding-only mode.
    pub pv_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmModel {
    pub forward: LstmDirectionParams,
    pub backward: LstmDirectionParams,
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub dropout: f64,
    pub input_mode: InputMode,
    pub word_dim: usize,
    /// Paragraph-vector width; zero in word-embedding-only mode.
    pub pv_dim: usize,
    pub stamps: CompatStamps,
    version: u64,
}

/// Gradients mirror the model's parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmGradients {
    pub forward: LstmDirectionParams,
    pub backward: LstmDirectionParams,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl BiLstmGradients {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        BiLstmGradients {
            forward: LstmDirectionParams::zeros(hidden, input),
            backward: LstmDirectionParams::zeros(hidden, input),
            w_out: vec![0.0; 2 * hidden],
            b_out: 0.0,
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.forward.tensors();
        out.extend(self.backward.tensors());
        out.push(&self.w_out);
        out.push(std::slice::from_ref(&self.b_out));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.forward.tensors_mut();
        out.extend(self.backward.tensors_mut());
        out.push(&mut self.w_out);
        out.push(std::slice::from_mut(&mut self.b_out));
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn add_assign(&mut self, other: &BiLstmGradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct BiLstmCache {
    version: u64,
    x: InputMatrix,
    forward_states: Vec<StepState>,
    backward_states: Vec<StepState>,
    feature: Vec<f64>,
    mask: Option<Vec<f64>>,
    logit: f64,
    probability: f64,
}

impl BiLstmCache {
    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn logit(&self) -> f64 {
        self.logit
    }

    /// `[h_forward ∥ h_backward]` before dropout.
    pub fn feature(&self) -> &[f64] {
        &self.feature
    }

    pub fn mask(&self) -> Option<&[f64]> {
        self.mask.as_deref()
    }
}

impl BiLstmModel {
    /// Xavier-uniform weights, zero biases except forget-gate bias 1.0, zero
    /// output bias.
    pub fn new(
        input_mode: InputMode,
        word_dim: usize,
        pv_dim: usize,
        hidden: usize,
        dropout: f64,
        rng: &mut StageRng,
    ) -> Result<Self> {
        let mut model = Self::zeros(input_mode, word_dim, pv_dim, hidden, dropout)?;
        model.forward.init_xavier(rng);
        model.backward.init_xavier(rng);
        let limit = (6.0 / (2 * hidden + 1) as f64).sqrt();
        fill_uniform(rng, limit, &mut model.w_out);
        Ok(model)
    }

    /// All parameters zero.
    pub fn zeros(input_mode: InputMode, word_dim: usize, pv_dim: usize, hidden: usize, dropout: f64) -> Result<Self> {
        if hidden == 0 || word_dim == 0 {
            return Err(Error::InvalidArgument("hidden size and word dim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(format!("dropout {dropout} outside [0, 1)")));
        }
        let pv_dim = match input_mode {
            InputMode::WordEmbedding => 0,
            InputMode::ParagraphVector => {
                if pv_dim == 0 {
                    return Err(Error::InvalidArgument("paragraph vector mode needs pv_dim >= 1".into()));
                }
                pv_dim
            }
        };
        let input = word_dim + pv_dim;
        Ok(BiLstmModel {
            forward: LstmDirectionParams::zeros(hidden, input),
            backward: LstmDirectionParams::zeros(hidden, input),
            w_out: vec![0.0; 2 * hidden],
            b_out: 0.0,
            dropout,
            input_mode,
            word_dim,
            pv_dim,
            stamps: CompatStamps::default(),
            version: 0,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.forward.hidden()
    }

    pub fn input_size(&self) -> usize {
        self.forward.input()
    }

    /// Incremented on every mutable parameter access.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.forward.tensors().iter().map(|t| t.len()).collect();
        out.extend(self.backward.tensors().iter().map(|t| t.len()));
        out.push(self.w_out.len());
        out.push(1);
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.forward.tensors();
        out.extend(self.backward.tensors());
        out.push(&self.w_out);
        out.push(std::slice::from_ref(&self.b_out));
        out
    }

    /// Mutable views of every parameter tensor; invalidates outstanding caches.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out = self.forward.tensors_mut();
        out.extend(self.backward.tensors_mut());
        out.push(&mut self.w_out);
        out.push(std::slice::from_mut(&mut self.b_out));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &InputMatrix) -> Result<()> {
        if x.rows() == 0 {
            return Err(Error::InvalidArgument("empty input sequence".into()));
        }
        if x.cols() != self.input_size() {
            return Err(Error::Shape(format!(
                "input has {} columns, model expects {}",
                x.cols(),
                self.input_size()
            )));
        }
        if x.pv_dim() != self.pv_dim {
            return Err(Error::ModeMismatch(format!(
                "input carries a {}-wide paragraph vector, model expects {}",
                x.pv_dim(),
                self.pv_dim
            )));
        }
        Ok(())
    }

    /// Draws an inverted-dropout mask for the `2H` feature.
    pub fn dropout_mask(&self, rng: &mut StageRng) -> Vec<f64> {
        let keep = 1.0 - self.dropout;
        (0..2 * self.hidden_size())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }

    /// Forward pass. With `dropout_rng` the pass is in training mode and a
    /// fresh dropout mask is drawn; without it the pass is deterministic.
    pub fn forward(&self, x: &InputMatrix, dropout_rng: Option<&mut StageRng>) -> Result<(f64, BiLstmCache)> {
        let mask = dropout_rng.map(|rng| self.dropout_mask(rng));
        self.forward_with_mask(x, mask)
    }

    /// Forward pass with an explicit feature mask (training mode when `Some`).
    pub fn forward_with_mask(&self, x: &InputMatrix, mask: Option<Vec<f64>>) -> Result<(f64, BiLstmCache)> {
        self.check_input(x)?;
        let hidden = self.hidden_size();
        if let Some(m) = &mask {
            if m.len() != 2 * hidden {
                return Err(Error::Shape(format!(
                    "dropout mask has {} entries, expected {}",
                    m.len(),
                    2 * hidden
                )));
            }
        }
        let (fwd_rows, bwd_rows) = ordered_rows(x);
        let forward_states = direction_forward(&self.forward, &fwd_rows, x.pv_dim());
        let backward_states = direction_forward(&self.backward, &bwd_rows, x.pv_dim());

        let mut feature = Vec::with_capacity(2 * hidden);
        feature.extend_from_slice(&forward_states.last().expect("non-empty").h);
        feature.extend_from_slice(&backward_states.last().expect("non-empty").h);
        let logit = match &mask {
            Some(m) => {
                let dropped: Vec<f64> = feature.iter().zip(m).map(|(f, k)| f * k).collect();
                dot(&self.w_out, &dropped) + self.b_out
            }
            None => dot(&self.w_out, &feature) + self.b_out,
        };
        let probability = sigmoid(logit);
        Ok((
            probability,
            BiLstmCache {
                version: self.version,
                x: x.clone(),
                forward_states,
                backward_states,
                feature,
                mask,
                logit,
                probability,
            },
        ))
    }

    /// Probability with dropout off.
    pub fn probability(&self, x: &InputMatrix) -> Result<f64> {
        Ok(self.forward(x, None)?.0)
    }

    pub fn backward(&self, cache: &BiLstmCache, d_loss_d_p: f64) -> Result<BiLstmGradients> {
        let mut grads = BiLstmGradients::zeros(self.hidden_size(), self.input_size());
        self.backward_into(cache, d_loss_d_p, &mut grads)?;
        Ok(grads)
    }

    /// Accumulates (adds) the gradients of one example into `grads`.
    pub fn backward_into(&self, cache: &BiLstmCache, d_loss_d_p: f64, grads: &mut BiLstmGradients) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::StaleCache {
                cached: cache.version,
                current: self.version,
            });
        }
        let hidden = self.hidden_size();
        let p = cache.probability;
        let d_logit = d_loss_d_p * p * (1.0 - p);

        let mut d_feature = vec![0.0; 2 * hidden];
        for j in 0..2 * hidden {
            let keep = cache.mask.as_ref().map_or(1.0, |m| m[j]);
            grads.w_out[j] += d_logit * cache.feature[j] * keep;
            d_feature[j] = d_logit * self.w_out[j] * keep;
        }
        grads.b_out += d_logit;

        let (fwd_rows, bwd_rows) = ordered_rows(&cache.x);
        let prefix = cache.x.pv_dim();
        direction_backward(
            &self.forward,
            &cache.forward_states,
            &fwd_rows,
            prefix,
            &d_feature[..hidden],
            &mut grads.forward,
        );
        direction_backward(
            &self.backward,
            &cache.backward_states,
            &bwd_rows,
            prefix,
            &d_feature[hidden..],
            &mut grads.backward,
        );
        Ok(())
    }

    /// The same network with direction parameter sets and output-weight halves
    /// exchanged. On a reversed sequence it yields the same probability.
    pub fn swapped_directions(&self) -> Self {
        let hidden = self.hidden_size();
        let mut w_out = self.w_out[hidden..].to_vec();
        w_out.extend_from_slice(&self.w_out[..hidden]);
        BiLstmModel {
            forward: self.backward.clone(),
            backward: self.forward.clone(),
            w_out,
            ..self.clone()
        }
    }
}

fn ordered_rows(x: &InputMatrix) -> (Vec<&[f64]>, Vec<&[f64]>) {
    let forward: Vec<&[f64]> = (0..x.rows()).map(|t| x.row(t)).collect();
    let backward = forward.iter().rev().copied().collect();
    (forward, backward)
}

/// Label with ties (`p = 0.5`) resolved to positive, and the probability.
pub fn predict(model: &BiLstmModel, x: &InputMatrix) -> Result<(Label, f64)> {
    let p = model.probability(x)?;
    let label = if p >= 0.5 { Label::Positive } else { Label::Negative };
    Ok((label, p))
}

pub(crate) fn matrix_xavier(rng: &mut StageRng, m: &mut Matrix, fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    fill_uniform(rng, limit, m.as_mut_slice());
}
