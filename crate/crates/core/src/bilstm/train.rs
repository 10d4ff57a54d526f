//! Mini-batch Adam training with dropout and early stopping on validation loss.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Label};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::optim::{adam_step, bce_loss, AdamConfig, AdamState, EarlyStopper, StopDecision};
use crate::paragraph_vector::ParagraphVector;
use crate::rng::stage_rng;
use crate::tensor::Matrix;

use super::{BiLstmGradients, BiLstmModel, InputMatrix, InputMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub dropout: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    /// Stop as soon as validation accuracy reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_size: 128,
            dropout: 0.5,
            adam: AdamConfig::default(),
            batch_size: 32,
            max_epochs: 30,
            patience: 3,
            min_delta: 1e-5,
            seed: 0,
            target_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "hidden size, batch size and epochs must all be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// A document resolved to embedding rows, plus its paragraph vector in
/// pv-we mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub token_rows: Vec<usize>,
    pub pv: Option<ParagraphVector>,
    pub label: Label,
}

/// Examples whose input matrices are built on demand, so large corpora never
/// hold every `n × D` matrix at once.
#[derive(Debug, Clone)]
pub struct ExampleSet<'a> {
    embeddings: &'a EmbeddingMatrix,
    mode: InputMode,
    pv_dim: usize,
    examples: Vec<Example>,
}

impl<'a> ExampleSet<'a> {
    pub fn new(embeddings: &'a EmbeddingMatrix, mode: InputMode) -> Self {
        ExampleSet {
            embeddings,
            mode,
            pv_dim: 0,
            examples: Vec::new(),
        }
    }

    pub fn push(&mut self, doc: &Document, pv: Option<ParagraphVector>) -> Result<()> {
        if doc.tokens.is_empty() {
            return Err(Error::EmptyDocument { id: doc.id.clone() });
        }
        let pv = match (self.mode, pv) {
            (InputMode::WordEmbedding, _) => None,
            (InputMode::ParagraphVector, None) => {
                return Err(Error::ModeMismatch(format!(
                    "document {:?}: pv-we input needs a paragraph vector",
                    doc.id
                )))
            }
            (InputMode::ParagraphVector, Some(pv)) => {
                if self.examples.is_empty() {
                    self.pv_dim = pv.len();
                } else if pv.len() != self.pv_dim {
                    return Err(Error::Shape(format!(
                        "paragraph vector width {} differs from {}",
                        pv.len(),
                        self.pv_dim
                    )));
                }
                Some(pv)
            }
        };
        let vocab = self.embeddings.vocab();
        self.examples.push(Example {
            token_rows: doc.tokens.iter().map(|t| vocab.index_or_unk(t)).collect(),
            pv,
            label: doc.label,
        });
        Ok(())
    }

    pub fn mode(&self) -> InputMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn word_dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn pv_dim(&self) -> usize {
        self.pv_dim
    }

    pub fn label(&self, i: usize) -> Label {
        self.examples[i].label
    }

    pub fn input(&self, i: usize) -> InputMatrix {
        let ex = &self.examples[i];
        let pv: &[f64] = ex.pv.as_ref().map_or(&[], |p| p.as_slice());
        let table = self.embeddings.input();
        let mut m = Matrix::zeros(ex.token_rows.len(), pv.len() + table.cols());
        for (t, &r) in ex.token_rows.iter().enumerate() {
            let row = m.row_mut(t);
            row[..pv.len()].copy_from_slice(pv);
            row[pv.len()..].copy_from_slice(table.row(r));
        }
        InputMatrix::new(m, pv.len()).expect("pv fits in row")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    TargetAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainingReport {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Mean BCE and accuracy (p ≥ 0.5 counts as positive) with dropout off.
pub fn evaluate_set(model: &BiLstmModel, set: &ExampleSet) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty set".into()));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for i in 0..set.len() {
        let p = model.probability(&set.input(i))?;
        let y = set.label(i);
        loss += bce_loss(p, y.target()).0;
        if (p >= 0.5) == (y == Label::Positive) {
            correct += 1;
        }
    }
    let n = set.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn train_bilstm(
    train: &ExampleSet,
    validation: &ExampleSet,
    cfg: &TrainConfig,
) -> Result<(BiLstmModel, TrainingReport)> {
    train_bilstm_observed(train, validation, cfg, |_| {})
}

/// `observe` is called once per finished epoch.
pub fn train_bilstm_observed(
    train: &ExampleSet,
    validation: &ExampleSet,
    cfg: &TrainConfig,
    mut observe: impl FnMut(&EpochRecord),
) -> Result<(BiLstmModel, TrainingReport)> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::InvalidArgument(
            "training and validation sets must be non-empty".into(),
        ));
    }
    if train.mode() != validation.mode()
        || train.word_dim() != validation.word_dim()
        || train.pv_dim() != validation.pv_dim()
    {
        return Err(Error::ModeMismatch(
            "training and validation inputs differ in layout".into(),
        ));
    }

    let mut model = BiLstmModel::new(
        train.mode(),
        train.word_dim(),
        train.pv_dim(),
        cfg.hidden_size,
        cfg.dropout,
        &mut stage_rng(cfg.seed, "bilstm-init"),
    )?;
    let mut adam = AdamState::new(cfg.adam, &model.tensor_lens());
    let mut stopper = EarlyStopper::new(cfg.patience, cfg.min_delta);
    let mut shuffle_rng = stage_rng(cfg.seed, "bilstm-shuffle");
    let mut dropout_rng = stage_rng(cfg.seed, "bilstm-dropout");
    let mut grads = BiLstmGradients::zeros(model.hidden_size(), model.input_size());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            for &i in batch {
                let (p, cache) = model.forward(&train.input(i), Some(&mut dropout_rng))?;
                let (loss, d_p) = bce_loss(p, train.label(i).target());
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("training loss in epoch {epoch}")));
                }
                epoch_loss += loss;
                model.backward_into(&cache, d_p, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut model.tensors_mut(), &grads.tensors(), &mut adam)?;
        }
        let (validation_loss, validation_accuracy) = evaluate_set(&model, validation)?;
        if !validation_loss.is_finite() {
            return Err(Error::NonFinite(format!("validation loss in epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            validation_loss,
            validation_accuracy,
        };
        observe(&record);
        epochs.push(record);

        let decision = stopper.update(validation_loss, || model.clone());
        if cfg.target_accuracy.is_some_and(|t| validation_accuracy >= t) {
            stop_reason = StopReason::TargetAccuracy;
            break;
        }
        if decision == StopDecision::Stop {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    let best_epoch = stopper.best_epoch().unwrap_or(epochs.len());
    let model = stopper.into_best().unwrap_or(model);
    Ok((
        model,
        TrainingReport {
            epochs,
            best_epoch,
            stop_reason,
        },
    ))
}
