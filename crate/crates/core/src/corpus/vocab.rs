use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::Document;
use crate::error::{Error, Result};
use crate::format::{Decoder, Encoder};

/// Placeholder for out-of-vocabulary tokens. Normalized tokens never contain
/// angle brackets, so it cannot collide with a real token.
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ index tables. Index 0 is always [`UNK_TOKEN`]; its count is the
/// number of occurrences that fell below `min_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index_to_token: Vec<String>,
    counts: Vec<u64>,
    token_to_index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from stored (token, count) rows; row 0 must be UNK.
    pub fn from_entries(entries: Vec<(String, u64)>, min_count: u64) -> Result<Self> {
        match entries.first() {
            Some((tok, _)) if tok == UNK_TOKEN => {}
            _ => return Err(Error::corrupt("vocabulary", "first entry must be <unk>")),
        }
        let mut token_to_index = HashMap::with_capacity(entries.len());
        for (i, (tok, _)) in entries.iter().enumerate().skip(1) {
            if tok == UNK_TOKEN || token_to_index.insert(tok.clone(), i).is_some() {
                return Err(Error::corrupt("vocabulary", format!("duplicate token {tok:?}")));
            }
        }
        let (index_to_token, counts) = entries.into_iter().unzip();
        Ok(Vocabulary {
            index_to_token,
            counts,
            token_to_index,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    /// Never true: UNK is always present.
    pub fn is_empty(&self) -> bool {
        self.index_to_token.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn index_or_unk(&self, token: &str) -> usize {
        self.index(token).unwrap_or(0)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.index_to_token[index]
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.index_or_unk(t)).collect()
    }

    /// Hash of the index → token table; artifacts record it to detect pairing
    /// with the wrong vocabulary.
    pub fn hash(&self) -> u64 {
        let mut hasher = Sha256::new();
        for tok in &self.index_to_token {
            hasher.update((tok.len() as u64).to_le_bytes());
            hasher.update(tok.as_bytes());
        }
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest length"))
    }
}

pub(crate) fn encode_vocab(enc: &mut Encoder, vocab: &Vocabulary) {
    enc.u64(vocab.min_count);
    enc.u64(vocab.len() as u64);
    for (tok, &count) in vocab.index_to_token.iter().zip(&vocab.counts) {
        enc.str(tok);
        enc.u64(count);
    }
}

pub(crate) fn decode_vocab(dec: &mut Decoder<'_>) -> Result<Vocabulary> {
    let min_count = dec.u64()?;
    let n = dec.len(16)?;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let tok = dec.str()?;
        entries.push((tok, dec.u64()?));
    }
    Vocabulary::from_entries(entries, min_count)
}

/// Indices are assigned by descending frequency, ties broken lexicographically.
pub fn build_vocabulary(docs: &[Document], min_count: u64) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::InvalidArgument("vocabulary needs at least one document".into()));
    }
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be positive".into()));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for tok in docs.iter().flat_map(|d| d.tokens.iter()) {
        *freq.entry(tok.as_str()).or_default() += 1;
    }
    let mut kept: Vec<(&str, u64)> = Vec::new();
    let mut unk = 0;
    for (tok, n) in freq {
        if n >= min_count {
            kept.push((tok, n));
        } else {
            unk += n;
        }
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let entries = std::iter::once((UNK_TOKEN.to_string(), unk))
        .chain(kept.into_iter().map(|(t, n)| (t.to_string(), n)))
        .collect();
    Vocabulary::from_entries(entries, min_count)
}
