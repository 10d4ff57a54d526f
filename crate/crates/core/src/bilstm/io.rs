use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{read_file, write_atomic, Decoder, Encoder};

use super::{BiLstmModel, CompatStamps, InputMode};

const KIND: &[u8; 4] = b"LSTM";

impl BiLstmModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(KIND);
        enc.u8(self.input_mode.tag());
        enc.u64(self.hidden_size() as u64);
        enc.u64(self.word_dim as u64);
        enc.u64(self.pv_dim as u64);
        enc.f64(self.dropout);
        enc.u64(self.stamps.vocab_hash);
        enc.u64(self.stamps.embedding_hash);
        enc.u64(self.stamps.pv_hash);
        for t in self.tensors() {
            enc.f64s(t);
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, KIND, "classifier")?;
        let tag = dec.u8()?;
        let mode = InputMode::from_tag(tag).ok_or_else(|| dec.corrupt(format!("unknown input mode tag {tag}")))?;
        let hidden = dec.u64()? as usize;
        let word_dim = dec.u64()? as usize;
        let pv_dim = dec.u64()? as usize;
        let dropout = dec.f64()?;
        let stamps = CompatStamps {
            vocab_hash: dec.u64()?,
            embedding_hash: dec.u64()?,
            pv_hash: dec.u64()?,
        };
        let cells = word_dim
            .checked_add(pv_dim)
            .and_then(|d| d.checked_add(hidden)?.checked_add(1))
            .and_then(|d| d.checked_mul(hidden.checked_mul(8)?))
            .and_then(|c| c.checked_add(hidden.checked_mul(2)?.checked_add(1)?));
        if cells.is_none_or(|c| c.saturating_mul(8) > bytes.len()) {
            return Err(dec.corrupt("header dimensions exceed file size"));
        }
        let mut model =
            BiLstmModel::zeros(mode, word_dim, pv_dim, hidden, dropout).map_err(|e| dec.corrupt(e.to_string()))?;
        model.stamps = stamps;
        for t in model.tensors_mut() {
            let values = dec.f64s(t.len())?;
            t.copy_from_slice(&values);
        }
        dec.finish()?;
        model.version = 0;
        if !model.is_finite() {
            return Err(Error::NonFinite("classifier parameters".into()));
        }
        Ok(model)
    }
}

pub fn save_model(model: &BiLstmModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &model.to_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BiLstmModel> {
    BiLstmModel::from_bytes(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn model() -> BiLstmModel {
        let mut m = BiLstmModel::new(InputMode::ParagraphVector, 3, 2, 4, 0.5, &mut rng_from_seed(3)).unwrap();
        m.stamps = CompatStamps {
            vocab_hash: 1,
            embedding_hash: 2,
            pv_hash: 3,
        };
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let back = BiLstmModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.tensors(), m.tensors());
        assert_eq!(back.stamps, m.stamps);
        assert_eq!(back.input_mode, m.input_mode);
        assert_eq!(back.dropout, m.dropout);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = model().to_bytes();
        for cut in [3, 12, 30, bytes.len() - 1] {
            assert!(
                matches!(BiLstmModel::from_bytes(&bytes[..cut]), Err(Error::Corrupt { .. })),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn wrong_kind_is_incompatible() {
        let mut bytes = model().to_bytes();
        bytes[8..12].copy_from_slice(b"EMBD");
        assert!(matches!(BiLstmModel::from_bytes(&bytes), Err(Error::Incompatible(_))));
    }
}
