//! Templated review-like documents with a single sentiment-carrying sentence
//! whose position is controlled, for exercising position sensitivity of
//! sequence classifiers without a real annotated corpus.

use std::ops::Range;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Document, Label};
use crate::error::Error;
use crate::rng::{rng_from_seed, StageRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionMode {
    SentimentFirst,
    SentimentMiddle,
    SentimentLast,
    Mixed,
}

impl FromStr for PositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sentiment-first" | "first" => Ok(PositionMode::SentimentFirst),
            "sentiment-middle" | "middle" => Ok(PositionMode::SentimentMiddle),
            "sentiment-last" | "last" => Ok(PositionMode::SentimentLast),
            "mixed" => Ok(PositionMode::Mixed),
            other => Err(Error::InvalidArgument(format!("unknown position mode {other:?}"))),
        }
    }
}

/// A generated document plus the token range of its carrier sentence
/// (terminator included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthDocument {
    pub document: Document,
    pub carrier: Range<usize>,
}

const SUBJECTS: &[&str] = &[
    "makanannya",
    "pelayanannya",
    "tempatnya",
    "pengirimannya",
    "aplikasinya",
    "kamarnya",
    "minumannya",
    "harganya",
    "stafnya",
    "suasananya",
];

const INTENSIFIERS: &[&str] = &["sangat", "cukup", "benar", "terlalu", "agak"];

const POSITIVE: &[&str] = &[
    "enak",
    "lezat",
    "bagus",
    "ramah",
    "cepat",
    "bersih",
    "mantap",
    "nyaman",
    "memuaskan",
    "sempurna",
];

const NEGATIVE: &[&str] = &[
    "buruk",
    "lambat",
    "kotor",
    "jelek",
    "hambar",
    "basi",
    "kasar",
    "mengecewakan",
    "payah",
    "parah",
];

const CLOSERS: &[&str] = &["sekali", "banget", "pokoknya", "memang"];

const POSITIVE_CODAS: &[&str] = &["puas", "rekomendasi", "suka", "balik", "lagi", "worth"];

const NEGATIVE_CODAS: &[&str] = &["kecewa", "kapok", "menyesal", "rugi", "zonk", "tidak", "lagi"];

const FILLER_OPENERS: &[&str] = &[
    "kemarin", "tadi", "minggu", "lalu", "hari", "ini", "waktu", "itu", "akhirnya", "pagi",
];

const FILLER_ACTORS: &[&str] = &["saya", "kami", "teman", "keluarga", "pacar", "adik", "kakak"];

const FILLER_VERBS: &[&str] = &[
    "pergi",
    "datang",
    "pesan",
    "membeli",
    "mencoba",
    "memesan",
    "menunggu",
    "membayar",
    "melihat",
    "mengantar",
];

const FILLER_OBJECTS: &[&str] = &[
    "nasi", "goreng", "kopi", "teh", "paket", "tiket", "hotel", "kamar", "menu", "mie", "ayam", "roti", "jus", "taksi",
    "kereta", "bakso", "sate", "soto",
];

const FILLER_TAILS: &[&str] = &[
    "lewat", "aplikasi", "bersama", "di", "mall", "dekat", "rumah", "jam", "tujuh", "malam", "siang", "kantor",
    "sebelum", "pulang", "untuk", "acara", "kampus",
];

fn pick<'a>(rng: &mut StageRng, bank: &[&'a str]) -> &'a str {
    bank.choose(rng).copied().expect("phrase banks are non-empty")
}

/// `subject [intensifier] polar [dan polar] [closer] [coda coda] .` where
/// every polar word and coda agrees with `label`.
fn carrier_sentence(rng: &mut StageRng, label: Label) -> Vec<String> {
    let (polar, codas) = match label {
        Label::Positive => (POSITIVE, POSITIVE_CODAS),
        Label::Negative => (NEGATIVE, NEGATIVE_CODAS),
    };
    let mut out = vec![pick(rng, SUBJECTS).to_string()];
    if rng.gen_bool(0.6) {
        out.push(pick(rng, INTENSIFIERS).to_string());
    }
    let first = pick(rng, polar);
    out.push(first.to_string());
    if rng.gen_bool(0.5) {
        let second = loop {
            let w = pick(rng, polar);
            if w != first {
                break w;
            }
        };
        out.push("dan".to_string());
        out.push(second.to_string());
    }
    if rng.gen_bool(0.5) {
        out.push(pick(rng, CLOSERS).to_string());
    }
    if rng.gen_bool(0.6) {
        out.push(pick(rng, codas).to_string());
        out.push(pick(rng, codas).to_string());
    }
    out.push(".".to_string());
    out
}

fn filler_sentence(rng: &mut StageRng) -> Vec<String> {
    let mut out = Vec::new();
    if rng.gen_bool(0.5) {
        out.push(pick(rng, FILLER_OPENERS).to_string());
    }
    out.push(pick(rng, FILLER_ACTORS).to_string());
    out.push(pick(rng, FILLER_VERBS).to_string());
    out.push(pick(rng, FILLER_OBJECTS).to_string());
    for _ in 0..rng.gen_range(0..=2) {
        out.push(pick(rng, FILLER_TAILS).to_string());
    }
    out.push(".".to_string());
    out
}

/// True if `token` is one of the polar words carrier sentences are built from.
pub fn is_polar_word(token: &str) -> bool {
    POSITIVE.contains(&token) || NEGATIVE.contains(&token)
}

pub fn synth_corpus(n_docs: usize, mode: PositionMode, seed: u64) -> Vec<Document> {
    synth_corpus_annotated(n_docs, mode, seed)
        .into_iter()
        .map(|s| s.document)
        .collect()
}

/// Labels alternate before a final seeded shuffle, so classes are balanced
/// within one. Each document has 3 to 5 sentences, one of them the carrier.
pub fn synth_corpus_annotated(n_docs: usize, mode: PositionMode, seed: u64) -> Vec<SynthDocument> {
    let mut rng = rng_from_seed(seed);
    let mut docs = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
        let n_sentences = rng.gen_range(3..=5);
        let position = match mode {
            PositionMode::SentimentFirst => 0,
            PositionMode::SentimentLast => n_sentences - 1,
            PositionMode::SentimentMiddle => rng.gen_range(1..n_sentences - 1),
            PositionMode::Mixed => match rng.gen_range(0..3) {
                0 => 0,
                1 => rng.gen_range(1..n_sentences - 1),
                _ => n_sentences - 1,
            },
        };
        let mut tokens = Vec::new();
        let mut carrier = 0..0;
        for s in 0..n_sentences {
            if s == position {
                let start = tokens.len();
                tokens.extend(carrier_sentence(&mut rng, label));
                carrier = start..tokens.len();
            } else {
                tokens.extend(filler_sentence(&mut rng));
            }
        }
        docs.push(SynthDocument {
            document: Document::new(format!("synth-{seed}-{i:05}"), tokens, label),
            carrier,
        });
    }
    docs.shuffle(&mut rng);
    docs
}
