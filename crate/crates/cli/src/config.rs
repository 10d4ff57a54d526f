//! Flat `key = value` settings. Every key is also a `--key` flag; flags win
//! over the config file, which wins over the built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::exit::CliError;

/// `(key, default, help)`. An empty default means "unset".
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "global seed; per-stage seeds are derived from it"),
    ("out", "run", "directory holding corpora, artifacts and reports"),
    ("input", "", "raw JSONL corpus for preprocess, or documents for predict"),
    ("test-input", "", "raw JSONL test corpus for preprocess"),
    ("norm-table", "", "TSV normalization table (slang<TAB>canonical)"),
    ("test", "", "test corpus (default <out>/test.jsonl)"),
    (
        "carriers",
        "",
        "carrier spans for case-study (default <out>/carriers.jsonl)",
    ),
    ("text", "", "single document to classify with predict"),
    ("mode", "", "model: we, pv-we or svm (synth: sentiment position)"),
    (
        "validation-fraction",
        "0.1",
        "share of the corpus held out for validation",
    ),
    ("min-count", "1", "minimum token count for the vocabulary"),
    ("embedding-dim", "500", "word embedding width"),
    ("window", "5", "context window for embeddings and paragraph vectors"),
    ("negatives", "5", "negative samples per positive pair"),
    ("embedding-epochs", "5", "skip-gram epochs"),
    ("subsample", "0.001", "frequent-word subsampling threshold (0 disables)"),
    ("pv-dim", "100", "width of each paragraph vector model"),
    ("pv-epochs", "20", "paragraph vector epochs"),
    ("infer-steps", "50", "paragraph vector inference steps"),
    ("hidden-size", "128", "LSTM hidden units per direction"),
    ("epochs", "30", "maximum classifier epochs"),
    ("patience", "3", "epochs without validation improvement before stopping"),
    (
        "min-delta",
        "0.00001",
        "smallest validation loss drop counted as improvement",
    ),
    ("dropout", "0.5", "dropout rate on the Bi-LSTM feature"),
    ("learning-rate", "0.001", "Adam learning rate"),
    ("batch-size", "32", "examples per Adam step"),
    (
        "target-accuracy",
        "",
        "stop once validation accuracy reaches this value",
    ),
    ("svm-lambda", "0.0001", "SVM regularization strength"),
    ("svm-epochs", "20", "SVM passes over the data"),
    ("n", "1000", "synth: number of training documents"),
    ("test-n", "", "synth: number of test documents (default n/5)"),
    ("position", "mixed", "synth: sentiment position of training documents"),
    (
        "test-position",
        "",
        "synth: sentiment position of test documents (default position)",
    ),
];

#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

pub fn parse_config_text(text: &str, origin: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("{}:{}: expected key = value", origin.display(), i + 1)))?;
        let key = key.trim();
        if !known(key) {
            return Err(CliError::usage(format!(
                "{}:{}: unknown key {key:?}",
                origin.display(),
                i + 1
            )));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn resolve(config: Option<&Path>, flags: BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = KEYS
            .iter()
            .filter(|(_, d, _)| !d.is_empty())
            .map(|(k, d, _)| (k.to_string(), d.to_string()))
            .collect();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("cannot read config {}: {e}", path.display())))?;
            values.extend(parse_config_text(&text, path)?);
        }
        values.extend(flags);
        Ok(Settings { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(known(key), "unregistered key {key}");
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::usage(format!("invalid value {v:?} for {key}: {e}")))
            })
            .transpose()
    }

    /// Keys with defaults always resolve.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.opt(key)?
            .ok_or_else(|| CliError::usage(format!("missing required setting {key}")))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    pub fn out(&self) -> PathBuf {
        self.path("out").unwrap_or_else(|| PathBuf::from("run"))
    }
}
