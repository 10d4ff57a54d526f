//! Labeled documents: normalization, JSONL loading, splitting and statistics.

mod normalize;
pub mod synth;
mod vocab;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub use normalize::{normalize, NormalizationTable, SENTENCE_TERMINATORS};
pub use synth::{synth_corpus, synth_corpus_annotated, PositionMode, SynthDocument};
pub use vocab::{build_vocabulary, Vocabulary, UNK_TOKEN};
pub(crate) use vocab::{decode_vocab, encode_vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// positive = 1, negative = 0
    pub fn value(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn from_value(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "positive" => Some(Label::Positive),
            "negative" => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn target(self) -> f64 {
        f64::from(self.value())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: Label,
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, label: Label) -> Self {
        Document {
            id: id.into(),
            tokens,
            label,
        }
    }

    /// Builds a document by normalizing `text`; rejects it if nothing survives.
    pub fn from_text(id: impl Into<String>, text: &str, label: Label, table: &NormalizationTable) -> Result<Self> {
        let id = id.into();
        let tokens = normalize(text, table);
        if tokens.is_empty() {
            return Err(Error::EmptyDocument { id });
        }
        Ok(Document { id, tokens, label })
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// One line of the external corpus format.
#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    text: String,
    label: String,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    load_corpus_with(path, &NormalizationTable::default())
}

pub fn load_corpus_with(path: impl AsRef<Path>, table: &NormalizationTable) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), table).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses JSONL records; blank lines are skipped, line numbers are 1-based.
pub fn parse_corpus(reader: impl BufRead, table: &NormalizationTable) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let label = Label::parse(&record.label).ok_or_else(|| Error::UnknownLabel {
            line: line_no,
            label: record.label.clone(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        docs.push(Document::from_text(record.id, &record.text, label, table)?);
    }
    Ok(docs)
}

pub fn corpus_to_jsonl(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        let record = Record {
            id: doc.id.clone(),
            text: doc.text(),
            label: doc.label.as_str().to_string(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(corpus_to_jsonl(docs).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Seeded shuffle, then the first `round(fraction * N)` documents become the
/// validation set.
pub fn split(docs: &[Document], validation_fraction: f64, seed: u64) -> Result<(Vec<Document>, Vec<Document>)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {validation_fraction} outside (0, 1)"
        )));
    }
    if docs.len() < 2 {
        return Err(Error::InvalidArgument("split needs at least two documents".into()));
    }
    let n_val = (validation_fraction * docs.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let validation = order[..n_val].iter().map(|&i| docs[i].clone()).collect();
    let train = order[n_val..].iter().map(|&i| docs[i].clone()).collect();
    Ok((train, validation))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub positive: usize,
    pub negative: usize,
    pub total: usize,
    pub vocab_size: usize,
    pub max_sequence_length: usize,
}

/// `vocab_size` counts distinct tokens (no frequency threshold).
pub fn corpus_stats(docs: &[Document]) -> CorpusStats {
    let positive = docs.iter().filter(|d| d.label == Label::Positive).count();
    let distinct: HashSet<&str> = docs.iter().flat_map(|d| d.tokens.iter().map(String::as_str)).collect();
    CorpusStats {
        positive,
        negative: docs.len() - positive,
        total: docs.len(),
        vocab_size: distinct.len(),
        max_sequence_length: docs.iter().map(|d| d.tokens.len()).max().unwrap_or(0),
    }
}
