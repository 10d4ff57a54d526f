//! Document sentiment classification with a bidirectional LSTM whose per-token
//! inputs can be augmented with a document-level paragraph vector, plus a
//! TF-IDF + linear SVM baseline and an evaluation harness.

pub mod baseline;
pub mod bilstm;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod format;
pub mod optim;
pub mod paragraph_vector;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod tensor;

pub use error::{Error, Result};
