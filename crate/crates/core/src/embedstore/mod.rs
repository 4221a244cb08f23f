//! Per-layer token embeddings: the SPE1 container, layer mixing and
//! synthetic tree-shaped embeddings.

mod mix;
mod oracle;
mod spe1;

use ndarray::{Array3, ArrayView2, ArrayView3, Axis};
use thiserror::Error;

pub use mix::{mix_layers, MixWeights};
pub use oracle::synth_oracle_embeddings;
pub use spe1::{read_embeddings, read_embeddings_file, write_embeddings, write_embeddings_file, MAGIC, VERSION};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("not an SPE1 stream (magic {found:?})")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported SPE1 version {0}")]
    UnsupportedVersion(u32),
    #[error("stream truncated in header")]
    TruncatedHeader,
    #[error("stream truncated in record for sentence {sentence}")]
    Truncated { sentence: usize },
    #[error("non-finite value in sentence {sentence}")]
    NonFinite { sentence: usize },
    #[error("sentence {sentence}: sent_id is not valid UTF-8")]
    BadSentId { sentence: usize },
    #[error("record shape {found:?} does not match layers={layers} dim={dim}")]
    Shape {
        found: Vec<usize>,
        layers: usize,
        dim: usize,
    },
    #[error("{what}: expected {expected}, found {found}")]
    Mismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("sentence {index}: embeddings are for {found:?}, treebank has {expected:?}")]
    Misaligned {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("oracle embeddings need dim >= {required}, got {dim}")]
    DimTooSmall { required: usize, dim: usize },
    #[error("noise standard deviation must be finite and >= 0, got {0}")]
    BadNoise(f64),
    #[error("invalid gold tree for sentence {sent_id}: {message}")]
    InvalidTree { sent_id: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Embeddings of one sentence, shaped `[layer][token][component]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceEmbeddings {
    pub sent_id: String,
    data: Array3<f32>,
}

impl SentenceEmbeddings {
    pub fn data(&self) -> ArrayView3<'_, f32> {
        self.data.view()
    }

    pub fn layer(&self, layer: usize) -> ArrayView2<'_, f32> {
        self.data.index_axis(Axis(0), layer)
    }

    pub fn n_tokens(&self) -> usize {
        self.data.shape()[1]
    }
}

/// A set of sentence embeddings sharing layer count and dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    layers: usize,
    dim: usize,
    sentences: Vec<SentenceEmbeddings>,
}

impl EmbeddingSet {
    pub fn new(layers: usize, dim: usize) -> Self {
        EmbeddingSet {
            layers,
            dim,
            sentences: Vec::new(),
        }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[SentenceEmbeddings] {
        &self.sentences
    }

    pub fn get(&self, index: usize) -> Option<&SentenceEmbeddings> {
        self.sentences.get(index)
    }

    /// Append a sentence, checking its shape and that all values are finite.
    pub fn push(&mut self, sent_id: impl Into<String>, data: Array3<f32>) -> Result<(), EmbeddingError> {
        let shape = data.shape();
        if shape[0] != self.layers || shape[2] != self.dim {
            return Err(EmbeddingError::Shape {
                found: shape.to_vec(),
                layers: self.layers,
                dim: self.dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                sentence: self.sentences.len(),
            });
        }
        self.sentences.push(SentenceEmbeddings {
            sent_id: sent_id.into(),
            data,
        });
        Ok(())
    }

    /// Keep only the first `n` sentences.
    pub fn truncate(&mut self, n: usize) {
        self.sentences.truncate(n);
    }

    /// Subset by sentence index, in the given order.
    pub fn select(&self, indices: &[usize]) -> EmbeddingSet {
        EmbeddingSet {
            layers: self.layers,
            dim: self.dim,
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
        }
    }

    /// Check that record `i` carries the id and token count of `sentences[i]`.
    pub fn check_aligned(&self, sentences: &[crate::treebank::Sentence]) -> Result<(), EmbeddingError> {
        if sentences.len() != self.sentences.len() {
            return Err(EmbeddingError::Mismatch {
                what: "sentence count",
                expected: sentences.len(),
                found: self.sentences.len(),
            });
        }
        for (index, (s, e)) in sentences.iter().zip(&self.sentences).enumerate() {
            if s.sent_id != e.sent_id || s.len() != e.n_tokens() {
                return Err(EmbeddingError::Misaligned {
                    index,
                    expected: format!("{} ({} tokens)", s.sent_id, s.len()),
                    found: format!("{} ({} tokens)", e.sent_id, e.n_tokens()),
                });
            }
        }
        Ok(())
    }
}
