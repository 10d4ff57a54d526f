use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::paragraph_vector::ParagraphVector;
use crate::tensor::Matrix;

/// Which features make up each timestep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputMode {
    /// Row `t` is the embedding of token `t`.
    #[serde(rename = "we")]
    WordEmbedding,
    /// Row `t` is `[paragraph vector ∥ embedding of token t]`.
    #[serde(rename = "pv-we")]
    ParagraphVector,
}

impl InputMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::WordEmbedding => "we",
            InputMode::ParagraphVector => "pv-we",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            InputMode::WordEmbedding => 0,
            InputMode::ParagraphVector => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(InputMode::WordEmbedding),
            1 => Some(InputMode::ParagraphVector),
            _ => None,
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "we" => Ok(InputMode::WordEmbedding),
            "pv-we" | "pvwe" => Ok(InputMode::ParagraphVector),
            other => Err(Error::InvalidArgument(format!(
                "unknown input mode {other:?} (expected we or pv-we)"
            ))),
        }
    }
}

/// Sequence of `n` rows; the first `pv_dim` columns of every row hold the
/// paragraph vector.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    matrix: Matrix,
    pv_dim: usize,
}

impl InputMatrix {
    pub fn new(matrix: Matrix, pv_dim: usize) -> Result<Self> {
        if pv_dim > matrix.cols() {
            return Err(Error::Shape(format!(
                "pv_dim {pv_dim} exceeds {} columns",
                matrix.cols()
            )));
        }
        Ok(InputMatrix { matrix, pv_dim })
    }

    pub fn word_only(matrix: Matrix) -> Self {
        InputMatrix { matrix, pv_dim: 0 }
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn pv_dim(&self) -> usize {
        self.pv_dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.matrix.row(t)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Same rows in reverse order.
    pub fn reversed(&self) -> Self {
        let n = self.rows();
        let mut m = Matrix::zeros(n, self.cols());
        for t in 0..n {
            m.row_mut(t).copy_from_slice(self.row(n - 1 - t));
        }
        InputMatrix {
            matrix: m,
            pv_dim: self.pv_dim,
        }
    }
}

pub fn build_input_matrix(
    doc: &Document,
    embeddings: &EmbeddingMatrix,
    pv: Option<&ParagraphVector>,
    mode: InputMode,
) -> Result<InputMatrix> {
    if doc.tokens.is_empty() {
        return Err(Error::EmptyDocument { id: doc.id.clone() });
    }
    let pv = match (mode, pv) {
        (InputMode::ParagraphVector, None) => {
            return Err(Error::ModeMismatch(format!(
                "document {:?}: pv-we input needs a paragraph vector",
                doc.id
            )))
        }
        (InputMode::ParagraphVector, Some(pv)) => pv.as_slice(),
        (InputMode::WordEmbedding, _) => &[],
    };
    let word_dim = embeddings.dim();
    let cols = pv.len() + word_dim;
    let mut m = Matrix::zeros(doc.tokens.len(), cols);
    for (t, token) in doc.tokens.iter().enumerate() {
        let row = m.row_mut(t);
        row[..pv.len()].copy_from_slice(pv);
        row[pv.len()..].copy_from_slice(embeddings.lookup(token));
    }
    Ok(InputMatrix {
        matrix: m,
        pv_dim: pv.len(),
    })
}
