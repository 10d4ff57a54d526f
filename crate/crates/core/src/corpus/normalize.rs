use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Sentence terminators survive normalization as standalone tokens so that
/// sentence boundaries remain recoverable downstream.
pub const SENTENCE_TERMINATORS: [char; 3] = ['.', '!', '?'];

fn is_terminator(c: char) -> bool {
    SENTENCE_TERMINATORS.contains(&c)
}

/// Text emoticons such as `:)`, `:-D`, `;p`, `<3`: an eye/heart symbol with at
/// most one alphanumeric mouth character.
fn is_text_emoticon(chunk: &str) -> bool {
    chunk.chars().count() >= 2
        && chunk.chars().any(|c| matches!(c, ':' | ';' | '=' | '<'))
        && chunk.chars().filter(|c| c.is_alphanumeric()).count() <= 1
}

/// Surface form → canonical form substitutions (slang, abbreviations).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizationTable {
    entries: HashMap<String, String>,
}

impl NormalizationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: &str, canonical: &str) {
        self.entries.insert(surface.to_lowercase(), canonical.to_lowercase());
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.entries.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Two-column TSV: `surface<TAB>canonical`. Blank lines and `#` comments
    /// are ignored.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut table = Self::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut cols = trimmed.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(surface), Some(canonical), None)
                    if !surface.trim().is_empty() && !canonical.trim().is_empty() =>
                {
                    table.insert(surface.trim(), canonical.trim());
                }
                _ => {
                    return Err(Error::MalformedLine {
                        line: idx + 1,
                        message: "expected two tab-separated columns".into(),
                    })
                }
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }
}

impl<S: AsRef<str>, T: AsRef<str>> FromIterator<(S, T)> for NormalizationTable {
    fn from_iter<I: IntoIterator<Item = (S, T)>>(iter: I) -> Self {
        let mut table = Self::new();
        for (s, t) in iter {
            table.insert(s.as_ref(), t.as_ref());
        }
        table
    }
}

/// Lowercases, drops text emoticons and symbol-only chunks, splits on whitespace
/// and punctuation, and maps each word through `table`.
///
/// Alphanumeric runs become words. Apostrophes are deleted in place
/// (`don't` → `dont`); any other non-alphanumeric codepoint (emoji,
/// punctuation, symbols) separates words. Runs of `.`/`!`/`?` collapse into a
/// single terminator token. A chunk with no alphanumeric content is kept only
/// when it is made purely of terminators.
pub fn normalize(raw_text: &str, table: &NormalizationTable) -> Vec<String> {
    let lowered = raw_text.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lowered.split_whitespace() {
        if is_text_emoticon(chunk) {
            continue;
        }
        if !chunk.chars().any(char::is_alphanumeric) {
            if let Some(first) = chunk.chars().next().filter(|_| chunk.chars().all(is_terminator)) {
                tokens.push(first.to_string());
            }
            continue;
        }
        let mut word = String::new();
        let mut last_was_terminator = false;
        for c in chunk.chars() {
            if c.is_alphanumeric() {
                word.push(c);
                last_was_terminator = false;
            } else if c == '\'' || c == '\u{2019}' {
                // elided, does not split
            } else if is_terminator(c) {
                flush(&mut word, &mut tokens, table);
                if !last_was_terminator {
                    tokens.push(c.to_string());
                    last_was_terminator = true;
                }
            } else {
                flush(&mut word, &mut tokens, table);
                last_was_terminator = false;
            }
        }
        flush(&mut word, &mut tokens, table);
    }
    tokens
}

fn flush(word: &mut String, tokens: &mut Vec<String>, table: &NormalizationTable) {
    if word.is_empty() {
        return;
    }
    let canonical = table.get(word.as_str()).map(str::to_owned);
    tokens.push(canonical.unwrap_or_else(|| std::mem::take(word)));
    word.clear();
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lowercases_and_drops_emoticons() {
        assert_eq!(
            normalize("Saya SUKA :)", &NormalizationTable::new()),
            toks(&["saya", "suka"])
        );
    }

    #[test]
    fn applies_table_substitutions() {
        let table: NormalizationTable = [("gue", "saya")].into_iter().collect();
        assert_eq!(normalize("gue", &table), toks(&["saya"]));

        let table: NormalizationTable = [("tdk", "tidak"), ("bgt", "banget")].into_iter().collect();
        assert_eq!(normalize("tdk enak bgt", &table), toks(&["tidak", "enak", "banget"]));
    }

    #[test]
    fn strips_emoji_and_keeps_sentence_ends() {
        let t = NormalizationTable::new();
        assert_eq!(normalize("Enak😋 banget!!! 👍", &t), toks(&["enak", "banget", "!"]));
        assert_eq!(normalize("stroberi. pas", &t), toks(&["stroberi", ".", "pas"]));
        assert_eq!(normalize("larut-larut ...", &t), toks(&["larut", "larut", "."]));
        assert_eq!(normalize("don't", &t), toks(&["dont"]));
    }

    #[test]
    fn nothing_surviving_yields_empty() {
        assert!(normalize(":) ;-( <3 ^_^ :-D :p", &NormalizationTable::new()).is_empty());
        assert!(normalize("   ", &NormalizationTable::new()).is_empty());
    }

    #[test]
    fn parses_tsv_tables() {
        let t = NormalizationTable::parse_tsv("# slang\ngue\tsaya\n\nBGT\tbanget\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("bgt"), Some("banget"));
        assert!(NormalizationTable::parse_tsv("one-column\n").is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(text in "[a-zA-Z0-9 .!?,:;()'\\-😀é]{0,60}") {
            let table: NormalizationTable =
                [("gue", "saya"), ("tdk", "tidak"), ("bgt", "banget")].into_iter().collect();
            let once = normalize(&text, &table);
            let twice = normalize(&once.join(" "), &table);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn normalized_tokens_are_nonempty_and_lowercase(text in "\\PC{0,40}") {
            for tok in normalize(&text, &NormalizationTable::new()) {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.chars().any(char::is_whitespace));
                prop_assert_eq!(tok.to_lowercase(), tok.clone());
            }
        }
    }
}
