//! TF-IDF features with a linear SVM trained by Pegasos (stochastic
//! sub-gradient descent on the hinge loss).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Label};
use crate::error::{Error, Result};
use crate::format::{read_file, write_atomic, Decoder, Encoder};
use crate::rng::stage_rng;

const KIND: &[u8; 4] = b"SVMB";

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).map(|(&i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

/// Term table and inverse document frequencies from a training corpus.
/// Features are ordered lexicographically by term.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
    n_docs: usize,
}

pub fn fit_tfidf(docs: &[Document]) -> Result<TfidfModel> {
    if docs.is_empty() {
        return Err(Error::InvalidArgument("cannot fit tf-idf on an empty corpus".into()));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = docs.len() as f64;
    let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
    let idf = df.values().map(|&d| (n / d as f64).ln()).collect();
    Ok(TfidfModel::from_parts(terms, idf, docs.len()))
}

impl TfidfModel {
    fn from_parts(terms: Vec<String>, idf: Vec<f64>, n_docs: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfidfModel {
            terms,
            index,
            idf,
            n_docs,
        }
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index.get(term).map(|&i| self.idf[i])
    }

    /// Raw count times idf; terms unseen at fit time are dropped.
    pub fn transform_raw(&self, doc: &Document) -> SparseVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in &doc.tokens {
            if let Some(&i) = self.index.get(t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let (indices, values) = counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).unzip();
        SparseVector { indices, values }
    }

    /// [`transform_raw`](Self::transform_raw) scaled to unit L2 norm (a zero
    /// vector stays zero).
    pub fn transform(&self, doc: &Document) -> SparseVector {
        let mut v = self.transform_raw(doc);
        let norm = v.norm();
        if norm > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

pub fn transform_tfidf(model: &TfidfModel, docs: &[Document]) -> Vec<SparseVector> {
    docs.iter().map(|d| model.transform(d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

/// `margin(x) = w·x + b`; non-negative margins are positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn margin(&self, x: &SparseVector) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }

    pub fn predict(&self, x: &SparseVector) -> (Label, f64) {
        let m = self.margin(x);
        let label = if m >= 0.0 { Label::Positive } else { Label::Negative };
        (label, m)
    }

    /// `λ/2 (‖w‖² + b²) + mean hinge loss`, the objective Pegasos minimizes
    /// here (the bias is regularized like an ordinary weight).
    pub fn objective(&self, xs: &[SparseVector], labels: &[Label], lambda: f64) -> f64 {
        let reg = self.weights.iter().map(|w| w * w).sum::<f64>() + self.bias * self.bias;
        let hinge: f64 = xs
            .iter()
            .zip(labels)
            .map(|(x, &y)| (1.0 - sign(y) * self.margin(x)).max(0.0))
            .sum();
        0.5 * lambda * reg + hinge / xs.len() as f64
    }
}

fn sign(y: Label) -> f64 {
    match y {
        Label::Positive => 1.0,
        Label::Negative => -1.0,
    }
}

/// Pegasos with step size `1/(λt)`. The weight vector is kept as `scale · v`
/// so each step costs O(nnz).
pub fn train_svm(xs: &[SparseVector], labels: &[Label], dim: usize, cfg: &SvmConfig) -> Result<LinearSvm> {
    if xs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} vectors but {} labels",
            xs.len(),
            labels.len()
        )));
    }
    if !(cfg.lambda > 0.0) || cfg.epochs == 0 {
        return Err(Error::InvalidArgument("svm needs lambda > 0 and epochs >= 1".into()));
    }
    if !labels.contains(&Label::Positive) || !labels.contains(&Label::Negative) {
        return Err(Error::InvalidArgument(
            "svm training data must contain both classes".into(),
        ));
    }
    if let Some(bad) = xs.iter().flat_map(|x| &x.indices).find(|&&i| i >= dim) {
        return Err(Error::Shape(format!("feature index {bad} outside dimension {dim}")));
    }

    let mut v = vec![0.0; dim];
    let mut v_bias = 0.0;
    let mut scale = 1.0;
    let mut rng = stage_rng(cfg.seed, "svm-shuffle");
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut t = 0u64;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (cfg.lambda * t as f64);
            let y = sign(labels[i]);
            let margin = y * scale * (xs[i].dot_dense(&v) + v_bias);
            let shrink = 1.0 - eta * cfg.lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                v_bias = 0.0;
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for (&j, &x) in xs[i].indices.iter().zip(&xs[i].values) {
                    v[j] += step * x;
                }
                v_bias += step;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|x| *x *= scale);
                v_bias *= scale;
                scale = 1.0;
            }
        }
    }
    let weights: Vec<f64> = v.iter().map(|x| x * scale).collect();
    let bias = v_bias * scale;
    if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("svm weights".into()));
    }
    Ok(LinearSvm { weights, bias })
}

/// TF-IDF transform plus the SVM trained on its output.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmClassifier {
    pub tfidf: TfidfModel,
    pub svm: LinearSvm,
}

impl SvmClassifier {
    pub fn fit(docs: &[Document], cfg: &SvmConfig) -> Result<Self> {
        let tfidf = fit_tfidf(docs)?;
        let xs = transform_tfidf(&tfidf, docs);
        let labels: Vec<Label> = docs.iter().map(|d| d.label).collect();
        let svm = train_svm(&xs, &labels, tfidf.dim(), cfg)?;
        Ok(SvmClassifier { tfidf, svm })
    }

    pub fn predict(&self, doc: &Document) -> (Label, f64) {
        self.svm.predict(&self.tfidf.transform(doc))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(KIND);
        enc.u64(self.tfidf.n_docs as u64);
        enc.u64(self.tfidf.dim() as u64);
        for (term, &idf) in self.tfidf.terms.iter().zip(&self.tfidf.idf) {
            enc.str(term);
            enc.f64(idf);
        }
        enc.f64s(&self.svm.weights);
        enc.f64(self.svm.bias);
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, KIND, "svm")?;
        let n_docs = dec.u64()? as usize;
        let dim = dec.len(16)?;
        let mut terms = Vec::with_capacity(dim);
        let mut idf = Vec::with_capacity(dim);
        for _ in 0..dim {
            terms.push(dec.str()?);
            idf.push(dec.f64()?);
        }
        if terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(dec.corrupt("terms are not strictly sorted"));
        }
        let weights = dec.f64s(dim)?;
        let bias = dec.f64()?;
        dec.finish()?;
        Ok(SvmClassifier {
            tfidf: TfidfModel::from_parts(terms, idf, n_docs),
            svm: LinearSvm { weights, bias },
        })
    }
}

pub fn save_svm(model: &SvmClassifier, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &model.to_bytes())
}

pub fn load_svm(path: impl AsRef<Path>) -> Result<SvmClassifier> {
    SvmClassifier::from_bytes(&read_file(path)?)
}
