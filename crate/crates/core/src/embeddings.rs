//! Skip-gram word embeddings trained with negative sampling.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Document, Vocabulary};
use crate::error::{Error, Result};
use crate::format::{read_file, write_atomic, Decoder, Encoder};
use crate::rng::{fill_uniform, rng_from_seed};
use crate::sampling::{expected_ns_loss, ns_sgd_step, NoiseDistribution};
use crate::tensor::{axpy, Matrix};

const KIND: &[u8; 4] = b"EMBD";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Context radius on each side of the center word.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Learning rate decays linearly to this value over training.
    pub min_learning_rate: f64,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 500,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            subsample: 1e-3,
            seed: 0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("embedding config: {m}")));
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
        if !(self.learning_rate > 0.0) || !(self.min_learning_rate >= 0.0) {
            return bad("learning rate must be > 0");
        }
        if !(self.subsample >= 0.0) {
            return bad("subsample threshold must be >= 0");
        }
        Ok(())
    }
}

/// Input (word) and output (context) vectors, one row per vocabulary entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vocabulary,
    input: Matrix,
    output: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(vocab: Vocabulary, input: Matrix, output: Matrix) -> Result<Self> {
        if input.rows() != vocab.len() || output.rows() != vocab.len() || input.cols() != output.cols() {
            return Err(Error::Shape(format!(
                "embedding: vocab {} rows, input {}x{}, output {}x{}",
                vocab.len(),
                input.rows(),
                input.cols(),
                output.rows(),
                output.cols()
            )));
        }
        Ok(EmbeddingMatrix { vocab, input, output })
    }

    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// Word vector for `token`; out-of-vocabulary tokens get the UNK row.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.input.row(self.vocab.index_or_unk(token))
    }

    pub fn is_finite(&self) -> bool {
        self.input.is_finite() && self.output.is_finite()
    }

    /// Digest of the vocabulary and all values.
    pub fn content_hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest length"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(KIND);
        enc.u64(self.dim() as u64);
        enc.u64(self.vocab.len() as u64);
        enc.u64(self.vocab.hash());
        crate::corpus::encode_vocab(&mut enc, &self.vocab);
        enc.f64s(self.input.as_slice());
        enc.f64s(self.output.as_slice());
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, KIND, "embedding")?;
        let dim = dec.u64()? as usize;
        let n = dec.u64()? as usize;
        let recorded_hash = dec.u64()?;
        let vocab = crate::corpus::decode_vocab(&mut dec)?;
        if vocab.len() != n {
            return Err(dec.corrupt(format!("header says {n} words, table has {}", vocab.len())));
        }
        if vocab.hash() != recorded_hash {
            return Err(Error::Incompatible("embedding vocabulary hash mismatch".into()));
        }
        let cells = n.checked_mul(dim).ok_or_else(|| dec.corrupt("dimension overflow"))?;
        let input = Matrix::from_vec(n, dim, dec.f64s(cells)?);
        let output = Matrix::from_vec(n, dim, dec.f64s(cells)?);
        dec.finish()?;
        EmbeddingMatrix::new(vocab, input, output)
    }
}

pub fn save_embeddings(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &matrix.to_bytes())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::from_bytes(&read_file(path)?)
}

/// Loads and checks that the file was trained against `vocab` with `dim`.
pub fn load_embeddings_for(path: impl AsRef<Path>, vocab: &Vocabulary, dim: usize) -> Result<EmbeddingMatrix> {
    let m = load_embeddings(path)?;
    if m.vocab.hash() != vocab.hash() {
        return Err(Error::Incompatible("embedding vocabulary hash mismatch".into()));
    }
    if m.dim() != dim {
        return Err(Error::Incompatible(format!(
            "embedding dim {} != expected {dim}",
            m.dim()
        )));
    }
    Ok(m)
}

pub fn train_skipgram(docs: &[Document], vocab: &Vocabulary, cfg: &EmbeddingConfig) -> Result<EmbeddingMatrix> {
    train_skipgram_observed(docs, vocab, cfg, |_, _, _| {})
}

/// Like [`train_skipgram`], calling `observe(epoch, mean_sampled_loss, model)`
/// after each epoch.
pub fn train_skipgram_observed(
    docs: &[Document],
    vocab: &Vocabulary,
    cfg: &EmbeddingConfig,
    mut observe: impl FnMut(usize, f64, &EmbeddingMatrix),
) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::InvalidArgument("skip-gram needs at least one document".into()));
    }
    let encoded: Vec<Vec<usize>> = docs.iter().map(|d| vocab.encode(&d.tokens)).collect();
    if encoded.iter().all(|d| d.len() < 2) {
        return Err(Error::NoTrainingPairs);
    }

    let mut rng = rng_from_seed(cfg.seed);
    let dim = cfg.dim;
    let mut input = Matrix::zeros(vocab.len(), dim);
    fill_uniform(&mut rng, 0.5 / dim as f64, input.as_mut_slice());
    let output = Matrix::zeros(vocab.len(), dim);
    let mut model = EmbeddingMatrix::new(vocab.clone(), input, output)?;

    let noise = NoiseDistribution::from_counts(vocab.counts())?;
    let total_count: u64 = vocab.counts().iter().sum();
    let keep_prob: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| subsample_keep_probability(c, total_count, cfg.subsample))
        .collect();

    let words_per_epoch: usize = encoded.iter().map(Vec::len).sum();
    let total_words = (words_per_epoch * cfg.epochs).max(1) as f64;
    let mut processed = 0usize;

    let mut d_hidden = vec![0.0; dim];
    let mut hidden = vec![0.0; dim];
    let mut coeffs = Vec::new();
    let mut negatives = Vec::with_capacity(cfg.negatives);
    let mut kept = Vec::new();

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        let mut pairs = 0usize;
        for doc in &encoded {
            kept.clear();
            for &w in doc {
                if keep_prob[w] >= 1.0 || rng.gen::<f64>() < keep_prob[w] {
                    kept.push(w);
                }
            }
            let lr = cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * (processed as f64 / total_words);
            processed += doc.len();
            for (i, &center) in kept.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window + 1).min(kept.len());
                for (j, &context) in kept.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    noise.draw(&mut rng, cfg.negatives, context, &mut negatives);
                    hidden.copy_from_slice(model.input.row(center));
                    epoch_loss += ns_sgd_step(
                        &hidden,
                        &mut model.output,
                        context,
                        &negatives,
                        lr,
                        &mut d_hidden,
                        &mut coeffs,
                    );
                    axpy(-lr, &d_hidden, model.input.row_mut(center));
                    pairs += 1;
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::NonFinite("skip-gram weights diverged".into()));
        }
        observe(epoch, epoch_loss / pairs.max(1) as f64, &model);
    }
    Ok(model)
}

fn subsample_keep_probability(count: u64, total: u64, threshold: f64) -> f64 {
    if threshold <= 0.0 || count == 0 {
        return 1.0;
    }
    let scaled = threshold * total as f64;
    let c = count as f64;
    ((c / scaled).sqrt() + 1.0) * scaled / c
}

/// Mean expected negative-sampling loss over every (center, context) pair of
/// `docs`, without subsampling. Deterministic.
pub fn skipgram_objective(model: &EmbeddingMatrix, docs: &[Document], window: usize, negatives: usize) -> Result<f64> {
    let noise = NoiseDistribution::from_counts(model.vocab.counts())?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for doc in docs {
        let ids = model.vocab.encode(&doc.tokens);
        for (i, &center) in ids.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window + 1).min(ids.len());
            for (j, &context) in ids.iter().enumerate().take(hi).skip(lo) {
                if j != i {
                    total += expected_ns_loss(model.input.row(center), &model.output, context, &noise, negatives);
                    pairs += 1;
                }
            }
        }
    }
    if pairs == 0 {
        return Err(Error::NoTrainingPairs);
    }
    Ok(total / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, Label};
    use crate::tensor::cosine;

    fn doc(id: usize, text: &str) -> Document {
        Document::new(
            format!("d{id}"),
            text.split_whitespace().map(String::from).collect(),
            Label::Positive,
        )
    }

    fn small_cfg() -> EmbeddingConfig {
        EmbeddingConfig {
            dim: 8,
            window: 2,
            epochs: 3,
            subsample: 0.0,
            seed: 5,
            ..EmbeddingConfig::default()
        }
    }

    #[test]
    fn single_token_documents_give_no_pairs() {
        let docs = vec![doc(0, "a"), doc(1, "b")];
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let err = train_skipgram(&docs, &vocab, &small_cfg()).unwrap_err();
        assert!(matches!(err, Error::NoTrainingPairs));
        assert_eq!(err.to_string(), "no training pairs could be formed from the corpus");
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let vocab = build_vocabulary(&[doc(0, "a b")], 1).unwrap();
        assert!(train_skipgram(&[], &vocab, &small_cfg()).is_err());
    }

    #[test]
    fn config_validation() {
        for broken in [
            EmbeddingConfig { dim: 0, ..small_cfg() },
            EmbeddingConfig {
                window: 0,
                ..small_cfg()
            },
            EmbeddingConfig {
                negatives: 0,
                ..small_cfg()
            },
            EmbeddingConfig {
                epochs: 0,
                ..small_cfg()
            },
            EmbeddingConfig {
                learning_rate: 0.0,
                ..small_cfg()
            },
        ] {
            assert!(broken.validate().is_err());
        }
    }

    #[test]
    fn training_is_bit_reproducible() {
        let docs = vec![doc(0, "a b c d e"), doc(1, "b c a e"), doc(2, "e d c")];
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let cfg = EmbeddingConfig {
            subsample: 1e-3,
            ..small_cfg()
        };
        let a = train_skipgram(&docs, &vocab, &cfg).unwrap();
        let b = train_skipgram(&docs, &vocab, &cfg).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert!(a.is_finite());
        assert_eq!(a.dim(), 8);
    }

    #[test]
    fn lookup_falls_back_to_unk() {
        let docs = vec![doc(0, "a b a c")];
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let m = train_skipgram(&docs, &vocab, &small_cfg()).unwrap();
        assert_eq!(m.lookup("a"), m.input().row(vocab.index("a").unwrap()));
        assert_eq!(m.lookup("zzz"), m.input().row(0));
        assert_eq!(m.lookup("zzz"), m.lookup("qqq"));
    }

    #[test]
    fn synonyms_end_closer_than_antonyms() {
        // "good" and "great" occur in identical contexts; "bad" never does.
        let mut docs = Vec::new();
        let pos_ctx = ["the food was X today", "service felt X here", "really X place"];
        let neg_ctx = ["the room is X again", "staff were X and rude", "so X experience"];
        for r in 0..10 {
            for (k, c) in pos_ctx.iter().enumerate() {
                docs.push(doc(docs.len(), &c.replace('X', "good")));
                docs.push(doc(docs.len(), &c.replace('X', "great")));
                let _ = (r, k);
            }
            for c in neg_ctx {
                docs.push(doc(docs.len(), &c.replace('X', "bad")));
            }
        }
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let cfg = EmbeddingConfig {
            dim: 16,
            window: 2,
            epochs: 50,
            subsample: 0.0,
            seed: 3,
            ..EmbeddingConfig::default()
        };
        let m = train_skipgram(&docs, &vocab, &cfg).unwrap();
        let good = m.lookup("good");
        assert!(cosine(good, m.lookup("great")) > cosine(good, m.lookup("bad")));
    }

    #[test]
    fn expected_objective_decreases_every_epoch_at_small_fixed_rate() {
        let sentences = [
            "saya suka makan nasi goreng",
            "nasi goreng di sini enak",
            "kopi di sini pahit",
            "saya tidak suka kopi pahit",
            "pelayanan cepat dan ramah",
            "pelayanan lambat sekali",
            "tempatnya bersih dan nyaman",
            "tempatnya kotor",
            "harga murah rasa enak",
            "harga mahal rasa biasa",
            "kami pesan ayam bakar",
            "ayam bakar enak sekali",
            "teh manis dingin segar",
            "teh terlalu manis",
            "pengiriman cepat sekali",
            "pengiriman lambat dan mahal",
            "makanan datang dingin",
            "porsi besar dan murah",
            "saya akan datang lagi",
            "tidak akan datang lagi",
        ];
        let docs: Vec<Document> = sentences.iter().enumerate().map(|(i, s)| doc(i, s)).collect();
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let cfg = EmbeddingConfig {
            dim: 10,
            window: 2,
            epochs: 15,
            learning_rate: 0.01,
            min_learning_rate: 0.01,
            subsample: 0.0,
            seed: 8,
            ..EmbeddingConfig::default()
        };
        let mut objectives = Vec::new();
        train_skipgram_observed(&docs, &vocab, &cfg, |_, _, m| {
            objectives.push(skipgram_objective(m, &docs, cfg.window, cfg.negatives).unwrap());
        })
        .unwrap();
        for w in objectives.windows(2) {
            assert!(w[1] <= w[0], "objective rose: {objectives:?}");
        }
    }

    #[test]
    fn save_load_round_trip_and_corruption() {
        let docs = vec![doc(0, "a b c a b"), doc(1, "c c b")];
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let m = train_skipgram(&docs, &vocab, &small_cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        save_embeddings(&m, &path).unwrap();
        let loaded = load_embeddings(&path).unwrap();
        assert_eq!(loaded.to_bytes(), m.to_bytes());
        assert_eq!(loaded, m);
        load_embeddings_for(&path, &vocab, 8).unwrap();
        assert!(matches!(
            load_embeddings_for(&path, &vocab, 9),
            Err(Error::Incompatible(_))
        ));

        let bytes = m.to_bytes();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = load_embeddings(&path).unwrap_err();
        assert!(err.to_string().starts_with("corrupt embedding file"), "{err}");

        let other = build_vocabulary(&[doc(0, "x y")], 1).unwrap();
        save_embeddings(&m, &path).unwrap();
        assert!(matches!(
            load_embeddings_for(&path, &other, 8),
            Err(Error::Incompatible(_))
        ));

        // Flip a byte inside the stored vocabulary so it no longer matches the
        // recorded hash.
        let mut tampered = bytes.clone();
        let needle = [1u8, 0, 0, 0, 0, 0, 0, 0, b'a'];
        let pos = tampered.windows(needle.len()).position(|w| w == needle).unwrap();
        tampered[pos + 8] = b'z';
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&tampered),
            Err(Error::Incompatible(_))
        ));
    }
}
