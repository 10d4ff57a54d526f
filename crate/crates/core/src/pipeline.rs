//! Trained models wrapped as document classifiers.

use crate::baseline::SvmClassifier;
use crate::bilstm::train::{train_bilstm_observed, EpochRecord, ExampleSet, TrainConfig, TrainingReport};
use crate::bilstm::{build_input_matrix, BiLstmModel, CompatStamps, InputMatrix, InputMode};
use crate::corpus::{Document, Label};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::evaluation::{DocumentClassifier, Prediction};
use crate::paragraph_vector::ParagraphVectorizer;

/// Bi-LSTM plus the embedding table (and paragraph-vector models in pv-we
/// mode) its inputs are built from.
#[derive(Debug, Clone)]
pub struct BiLstmClassifier {
    name: String,
    model: BiLstmModel,
    embeddings: EmbeddingMatrix,
    pv: Option<ParagraphVectorizer>,
}

pub fn stamps_for(embeddings: &EmbeddingMatrix, pv: Option<&ParagraphVectorizer>) -> CompatStamps {
    CompatStamps {
        vocab_hash: embeddings.vocab().hash(),
        embedding_hash: embeddings.content_hash(),
        pv_hash: pv.map_or(0, ParagraphVectorizer::content_hash),
    }
}

impl BiLstmClassifier {
    /// Checks that the artifacts are the ones the model was trained against.
    pub fn new(
        name: impl Into<String>,
        model: BiLstmModel,
        embeddings: EmbeddingMatrix,
        pv: Option<ParagraphVectorizer>,
    ) -> Result<Self> {
        let pv = match model.input_mode {
            InputMode::WordEmbedding => None,
            InputMode::ParagraphVector => {
                Some(pv.ok_or_else(|| Error::ModeMismatch("pv-we model needs paragraph vector models".into()))?)
            }
        };
        if embeddings.dim() != model.word_dim {
            return Err(Error::Incompatible(format!(
                "embedding dim {} but model expects {}",
                embeddings.dim(),
                model.word_dim
            )));
        }
        if let Some(pv) = &pv {
            if pv.dim() != model.pv_dim {
                return Err(Error::Incompatible(format!(
                    "paragraph vector dim {} but model expects {}",
                    pv.dim(),
                    model.pv_dim
                )));
            }
        }
        if stamps_for(&embeddings, pv.as_ref()) != model.stamps {
            return Err(Error::Incompatible(
                "model was trained against different embedding or paragraph vector files".into(),
            ));
        }
        Ok(BiLstmClassifier {
            name: name.into(),
            model,
            embeddings,
            pv,
        })
    }

    pub fn model(&self) -> &BiLstmModel {
        &self.model
    }

    pub fn input(&self, doc: &Document) -> Result<InputMatrix> {
        let pv = self.pv.as_ref().map(|v| v.infer(doc)).transpose()?;
        build_input_matrix(doc, &self.embeddings, pv.as_ref(), self.model.input_mode)
    }
}

impl DocumentClassifier for BiLstmClassifier {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict(&self, doc: &Document) -> Result<Prediction> {
        let (label, score) = crate::bilstm::predict(&self.model, &self.input(doc)?)?;
        Ok(Prediction { label, score })
    }
}

impl DocumentClassifier for SvmClassifier {
    fn name(&self) -> &str {
        "svm"
    }

    fn predict(&self, doc: &Document) -> Result<Prediction> {
        let (label, score) = SvmClassifier::predict(self, doc);
        Ok(Prediction { label, score })
    }
}

/// Resolves documents into training examples; in pv-we mode every
/// document's paragraph vector is inferred, exactly as at prediction time.
pub fn example_set<'a>(
    docs: &[Document],
    embeddings: &'a EmbeddingMatrix,
    pv: Option<&ParagraphVectorizer>,
    mode: InputMode,
) -> Result<ExampleSet<'a>> {
    let mut set = ExampleSet::new(embeddings, mode);
    for doc in docs {
        let v = match (mode, pv) {
            (InputMode::ParagraphVector, Some(pv)) => Some(pv.infer(doc)?),
            (InputMode::ParagraphVector, None) => {
                return Err(Error::ModeMismatch(
                    "pv-we training needs paragraph vector models".into(),
                ))
            }
            (InputMode::WordEmbedding, _) => None,
        };
        set.push(doc, v)?;
    }
    Ok(set)
}

/// Trains a Bi-LSTM and wraps it with its input artifacts.
pub fn train_classifier(
    name: impl Into<String>,
    train: &[Document],
    validation: &[Document],
    embeddings: EmbeddingMatrix,
    pv: Option<ParagraphVectorizer>,
    mode: InputMode,
    cfg: &TrainConfig,
    observe: impl FnMut(&EpochRecord),
) -> Result<(BiLstmClassifier, TrainingReport)> {
    let pv = if mode == InputMode::WordEmbedding { None } else { pv };
    let (mut model, report) = {
        let train_set = example_set(train, &embeddings, pv.as_ref(), mode)?;
        let val_set = example_set(validation, &embeddings, pv.as_ref(), mode)?;
        train_bilstm_observed(&train_set, &val_set, cfg, observe)?
    };
    model.stamps = stamps_for(&embeddings, pv.as_ref());
    Ok((BiLstmClassifier::new(name, model, embeddings, pv)?, report))
}

pub fn predict_all(model: &dyn DocumentClassifier, docs: &[Document]) -> Result<Vec<Label>> {
    docs.iter().map(|d| model.predict(d).map(|p| p.label)).collect()
}
