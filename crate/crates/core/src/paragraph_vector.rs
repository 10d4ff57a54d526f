//! Paragraph vectors: distributed memory (PV-DM) and distributed bag of words
//! (PV-DBOW), both trained with negative sampling, plus frozen-weight
//! inference for unseen documents.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Document, Vocabulary};
use crate::error::{Error, Result};
use crate::format::{read_file, write_atomic, Decoder, Encoder};
use crate::rng::{derive_seed, fill_uniform, rng_from_seed, string_hash, StageRng};
use crate::sampling::{ns_loss, ns_sgd_step, NoiseDistribution};
use crate::tensor::{axpy, Matrix};

const KIND: &[u8; 4] = b"PVMD";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PvMode {
    /// Distributed memory: predict a word from the document vector averaged
    /// with its context word vectors.
    Dm,
    /// Distributed bag of words: predict each word from the document vector alone.
    Dbow,
}

impl PvMode {
    fn tag(self) -> u8 {
        match self {
            PvMode::Dm => 0,
            PvMode::Dbow => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(PvMode::Dm),
            1 => Some(PvMode::Dbow),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvConfig {
    pub dim: usize,
    /// DM context radius; DBOW ignores it.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub seed: u64,
    pub infer_steps: usize,
    pub infer_learning_rate: f64,
    pub infer_min_learning_rate: f64,
}

impl Default for PvConfig {
    fn default() -> Self {
        PvConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 20,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            seed: 0,
            infer_steps: 50,
            infer_learning_rate: 0.025,
            infer_min_learning_rate: 0.0001,
        }
    }
}

impl PvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("paragraph vector config: {m}")));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate >= 0.0 && self.min_learning_rate >= 0.0) {
            return bad("learning rates must be >= 0");
        }
        if self.infer_steps == 0 {
            return bad("infer_steps must be >= 1");
        }
        Ok(())
    }
}

/// `[DM part ∥ DBOW part]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphVector {
    values: Vec<f64>,
    dm_dim: usize,
}

impl ParagraphVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dm_part(&self) -> &[f64] {
        &self.values[..self.dm_dim]
    }

    pub fn dbow_part(&self) -> &[f64] {
        &self.values[self.dm_dim..]
    }
}

pub fn concat_pv(dm: &[f64], dbow: &[f64]) -> ParagraphVector {
    let mut values = Vec::with_capacity(dm.len() + dbow.len());
    values.extend_from_slice(dm);
    values.extend_from_slice(dbow);
    ParagraphVector {
        values,
        dm_dim: dm.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvModel {
    mode: PvMode,
    config: PvConfig,
    vocab: Vocabulary,
    doc_ids: Vec<String>,
    id_to_row: HashMap<String, usize>,
    doc_vectors: Matrix,
    /// Context word vectors, DM only.
    word_vectors: Option<Matrix>,
    output: Matrix,
}

impl PvModel {
    pub fn mode(&self) -> PvMode {
        self.mode
    }

    pub fn config(&self) -> &PvConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_vector(&self, id: &str) -> Option<&[f64]> {
        self.id_to_row.get(id).map(|&r| self.doc_vectors.row(r))
    }

    pub fn doc_vectors(&self) -> &Matrix {
        &self.doc_vectors
    }

    pub fn word_vectors(&self) -> Option<&Matrix> {
        self.word_vectors.as_ref()
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn is_finite(&self) -> bool {
        self.doc_vectors.is_finite()
            && self.output.is_finite()
            && self.word_vectors.as_ref().is_none_or(Matrix::is_finite)
    }

    pub fn content_hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest length"))
    }

    /// Initial vector for a document: uniform in `[-0.5/p, 0.5/p]`, seeded by
    /// the model seed and the document id.
    pub fn initial_doc_vector(&self, id: &str) -> Vec<f64> {
        initial_doc_vector(&self.config, id)
    }

    /// Learns a vector for `doc` with every word and output weight frozen.
    /// The learning rate decays linearly from `lr` to
    /// `min(lr, infer_min_learning_rate)` across `steps` passes.
    pub fn infer(&self, doc: &Document, steps: usize, lr: f64) -> Result<Vec<f64>> {
        if steps == 0 {
            return Err(Error::InvalidArgument("inference needs at least one step".into()));
        }
        if !(lr >= 0.0) {
            return Err(Error::InvalidArgument("inference learning rate must be >= 0".into()));
        }
        let noise = NoiseDistribution::from_counts(self.vocab.counts())?;
        let ids = self.vocab.encode(&doc.tokens);
        let mut rng = doc_rng(&self.config, &doc.id, "pv-infer");
        let mut vector = self.initial_doc_vector(&doc.id);
        let end_lr = lr.min(self.config.infer_min_learning_rate);
        let dim = self.dim();
        let mut d_hidden = vec![0.0; dim];
        let mut hidden = vec![0.0; dim];
        let mut negatives = Vec::new();
        let mut context = Vec::new();
        for step in 0..steps {
            let alpha = lr - (lr - end_lr) * step as f64 / steps as f64;
            for t in 0..ids.len() {
                noise.draw(&mut rng, self.config.negatives, ids[t], &mut negatives);
                d_hidden.iter_mut().for_each(|v| *v = 0.0);
                let scale = match self.mode {
                    PvMode::Dbow => {
                        hidden.copy_from_slice(&vector);
                        1.0
                    }
                    PvMode::Dm => {
                        context_positions(&ids, t, self.config.window, &mut context);
                        let words = self.word_vectors.as_ref().expect("DM model has word vectors");
                        dm_hidden(&vector, words, &context, &mut hidden)
                    }
                };
                ns_loss(&hidden, &self.output, ids[t], &negatives, &mut d_hidden, |_, _| {});
                axpy(-alpha * scale, &d_hidden, &mut vector);
            }
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("inferred paragraph vector diverged".into()));
        }
        Ok(vector)
    }

    pub fn infer_default(&self, doc: &Document) -> Result<Vec<f64>> {
        self.infer(doc, self.config.infer_steps, self.config.infer_learning_rate)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut enc = Encoder::new(KIND);
        enc.u8(self.mode.tag());
        for v in [c.dim, c.window, c.negatives, c.epochs, c.infer_steps] {
            enc.u64(v as u64);
        }
        enc.u64(c.seed);
        for v in [
            c.learning_rate,
            c.min_learning_rate,
            c.infer_learning_rate,
            c.infer_min_learning_rate,
        ] {
            enc.f64(v);
        }
        enc.u64(self.vocab.hash());
        crate::corpus::encode_vocab(&mut enc, &self.vocab);
        enc.u64(self.doc_ids.len() as u64);
        for id in &self.doc_ids {
            enc.str(id);
        }
        enc.f64s(self.doc_vectors.as_slice());
        if let Some(w) = &self.word_vectors {
            enc.f64s(w.as_slice());
        }
        enc.f64s(self.output.as_slice());
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, KIND, "paragraph vector")?;
        let mode = PvMode::from_tag(dec.u8()?).ok_or_else(|| dec.corrupt("unknown mode tag"))?;
        let mut ints = [0usize; 5];
        for v in &mut ints {
            *v = dec.u64()? as usize;
        }
        let [dim, window, negatives, epochs, infer_steps] = ints;
        let seed = dec.u64()?;
        let config = PvConfig {
            dim,
            window,
            negatives,
            epochs,
            learning_rate: dec.f64()?,
            min_learning_rate: dec.f64()?,
            seed,
            infer_steps,
            infer_learning_rate: dec.f64()?,
            infer_min_learning_rate: dec.f64()?,
        };
        let recorded_hash = dec.u64()?;
        let vocab = crate::corpus::decode_vocab(&mut dec)?;
        if vocab.hash() != recorded_hash {
            return Err(Error::Incompatible("paragraph vector vocabulary hash mismatch".into()));
        }
        let n_docs = dec.len(8)?;
        let mut doc_ids = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            doc_ids.push(dec.str()?);
        }
        let id_to_row = id_table(&doc_ids)?;
        let cells = |rows: usize| {
            rows.checked_mul(dim)
                .ok_or_else(|| Error::corrupt("paragraph vector", "size overflow"))
        };
        let doc_vectors = Matrix::from_vec(n_docs, dim, dec.f64s(cells(n_docs)?)?);
        let word_vectors = match mode {
            PvMode::Dm => Some(Matrix::from_vec(vocab.len(), dim, dec.f64s(cells(vocab.len())?)?)),
            PvMode::Dbow => None,
        };
        let output = Matrix::from_vec(vocab.len(), dim, dec.f64s(cells(vocab.len())?)?);
        dec.finish()?;
        config.validate()?;
        Ok(PvModel {
            mode,
            config,
            vocab,
            doc_ids,
            id_to_row,
            doc_vectors,
            word_vectors,
            output,
        })
    }
}

pub fn save_pv(model: &PvModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &model.to_bytes())
}

pub fn load_pv(path: impl AsRef<Path>) -> Result<PvModel> {
    PvModel::from_bytes(&read_file(path)?)
}

fn id_table(ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut table = HashMap::with_capacity(ids.len());
    for (row, id) in ids.iter().enumerate() {
        if table.insert(id.clone(), row).is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(table)
}

fn doc_rng(config: &PvConfig, id: &str, label: &str) -> StageRng {
    rng_from_seed(derive_seed(config.seed ^ string_hash(id), label))
}

fn initial_doc_vector(config: &PvConfig, id: &str) -> Vec<f64> {
    let mut v = vec![0.0; config.dim];
    fill_uniform(&mut doc_rng(config, id, "pv-doc-init"), 0.5 / config.dim as f64, &mut v);
    v
}

/// Positions within `window` of `t`, excluding `t`.
fn context_positions(ids: &[usize], t: usize, window: usize, out: &mut Vec<usize>) {
    out.clear();
    let lo = t.saturating_sub(window);
    let hi = (t + window + 1).min(ids.len());
    out.extend((lo..hi).filter(|&j| j != t).map(|j| ids[j]));
}

/// Averages the document vector with the context word vectors into `hidden`
/// and returns the averaging factor `1 / (1 + |context|)`, which is also the
/// chain-rule factor from `hidden` back to each averaged input.
pub fn dm_hidden(doc_vector: &[f64], words: &Matrix, context: &[usize], hidden: &mut [f64]) -> f64 {
    hidden.copy_from_slice(doc_vector);
    for &w in context {
        axpy(1.0, words.row(w), hidden);
    }
    let scale = 1.0 / (1 + context.len()) as f64;
    hidden.iter_mut().for_each(|v| *v *= scale);
    scale
}

/// Loss and exact gradients of one PV prediction, for verification.
#[derive(Debug, Clone)]
pub struct PvStepGradients {
    pub loss: f64,
    pub d_doc: Vec<f64>,
    /// Gradient for each context word vector (identical for all of them; DM only).
    pub d_context_word: Vec<f64>,
    /// Gradient of the full output matrix.
    pub d_output: Matrix,
}

/// Gradients of a single PV-DM (`words` = Some) or PV-DBOW (`words` = None)
/// prediction of `target` with the given negatives.
pub fn pv_step_gradients(
    doc_vector: &[f64],
    words: Option<(&Matrix, &[usize])>,
    output: &Matrix,
    target: usize,
    negatives: &[usize],
) -> PvStepGradients {
    let dim = doc_vector.len();
    let mut hidden = vec![0.0; dim];
    let scale = match words {
        Some((m, ctx)) => dm_hidden(doc_vector, m, ctx, &mut hidden),
        None => {
            hidden.copy_from_slice(doc_vector);
            1.0
        }
    };
    let mut d_hidden = vec![0.0; dim];
    let mut d_output = Matrix::zeros(output.rows(), output.cols());
    let loss = ns_loss(&hidden, output, target, negatives, &mut d_hidden, |row, g| {
        axpy(g, &hidden, d_output.row_mut(row))
    });
    let d_doc: Vec<f64> = d_hidden.iter().map(|v| v * scale).collect();
    PvStepGradients {
        loss,
        d_context_word: if words.is_some() { d_doc.clone() } else { vec![0.0; dim] },
        d_doc,
        d_output,
    }
}

pub fn train_pv(docs: &[Document], vocab: &Vocabulary, mode: PvMode, cfg: &PvConfig) -> Result<PvModel> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::InvalidArgument(
            "paragraph vectors need at least one document".into(),
        ));
    }
    let doc_ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
    let id_to_row = id_table(&doc_ids)?;

    let dim = cfg.dim;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "pv-train"));
    let mut doc_vectors = Matrix::zeros(docs.len(), dim);
    for (row, doc) in docs.iter().enumerate() {
        doc_vectors
            .row_mut(row)
            .copy_from_slice(&initial_doc_vector(cfg, &doc.id));
    }
    let mut word_vectors = match mode {
        PvMode::Dm => {
            let mut w = Matrix::zeros(vocab.len(), dim);
            fill_uniform(&mut rng, 0.5 / dim as f64, w.as_mut_slice());
            Some(w)
        }
        PvMode::Dbow => None,
    };
    let mut output = Matrix::zeros(vocab.len(), dim);

    let noise = NoiseDistribution::from_counts(vocab.counts())?;
    let encoded: Vec<Vec<usize>> = docs.iter().map(|d| vocab.encode(&d.tokens)).collect();
    let words_per_epoch: usize = encoded.iter().map(Vec::len).sum();
    let total_words = (words_per_epoch * cfg.epochs).max(1) as f64;
    let mut processed = 0usize;

    let mut hidden = vec![0.0; dim];
    let mut d_hidden = vec![0.0; dim];
    let mut coeffs = Vec::new();
    let mut negatives = Vec::new();
    let mut context = Vec::new();

    for _epoch in 0..cfg.epochs {
        for (row, ids) in encoded.iter().enumerate() {
            let alpha =
                cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * (processed as f64 / total_words);
            processed += ids.len();
            for t in 0..ids.len() {
                noise.draw(&mut rng, cfg.negatives, ids[t], &mut negatives);
                match mode {
                    PvMode::Dbow => {
                        hidden.copy_from_slice(doc_vectors.row(row));
                        ns_sgd_step(
                            &hidden,
                            &mut output,
                            ids[t],
                            &negatives,
                            alpha,
                            &mut d_hidden,
                            &mut coeffs,
                        );
                        axpy(-alpha, &d_hidden, doc_vectors.row_mut(row));
                    }
                    PvMode::Dm => {
                        let words = word_vectors.as_mut().expect("DM model has word vectors");
                        context_positions(ids, t, cfg.window, &mut context);
                        let scale = dm_hidden(doc_vectors.row(row), &*words, &context, &mut hidden);
                        ns_sgd_step(
                            &hidden,
                            &mut output,
                            ids[t],
                            &negatives,
                            alpha,
                            &mut d_hidden,
                            &mut coeffs,
                        );
                        axpy(-alpha * scale, &d_hidden, doc_vectors.row_mut(row));
                        for &w in &context {
                            axpy(-alpha * scale, &d_hidden, words.row_mut(w));
                        }
                    }
                }
            }
        }
    }

    let model = PvModel {
        mode,
        config: cfg.clone(),
        vocab: vocab.clone(),
        doc_ids,
        id_to_row,
        doc_vectors,
        word_vectors,
        output,
    };
    if !model.is_finite() {
        return Err(Error::NonFinite("paragraph vector weights diverged".into()));
    }
    Ok(model)
}

/// A trained DM/DBOW pair producing concatenated paragraph vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParagraphVectorizer {
    pub dm: PvModel,
    pub dbow: PvModel,
}

impl ParagraphVectorizer {
    pub fn new(dm: PvModel, dbow: PvModel) -> Result<Self> {
        if dm.mode != PvMode::Dm || dbow.mode != PvMode::Dbow {
            return Err(Error::ModeMismatch("vectorizer needs one DM and one DBOW model".into()));
        }
        Ok(ParagraphVectorizer { dm, dbow })
    }

    pub fn dim(&self) -> usize {
        self.dm.dim() + self.dbow.dim()
    }

    /// Inferred `[DM ∥ DBOW]` vector using each model's configured inference
    /// schedule.
    pub fn infer(&self, doc: &Document) -> Result<ParagraphVector> {
        Ok(concat_pv(&self.dm.infer_default(doc)?, &self.dbow.infer_default(doc)?))
    }

    pub fn content_hash(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(self.dm.content_hash().to_le_bytes());
        hasher.update(self.dbow.content_hash().to_le_bytes());
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest length"))
    }
}
