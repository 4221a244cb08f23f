use ndarray::{Array2, Array3, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingSet};
use crate::scalar::Scalar;

/// Scalar layer-mix weights. The effective weights are the softmax of
/// `raw`, so a mix is always a convex combination of layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixWeights<T> {
    pub raw: Vec<T>,
}

impl<T: Scalar> MixWeights<T> {
    pub fn uniform(layers: usize) -> Self {
        MixWeights {
            raw: vec![T::zero(); layers],
        }
    }

    /// All mass on `layer`: the softmax limit with every other raw weight
    /// at negative infinity.
    pub fn one_hot(layers: usize, layer: usize) -> Self {
        let mut raw = vec![T::neg_infinity(); layers];
        raw[layer] = T::zero();
        MixWeights { raw }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn normalized(&self) -> Vec<T> {
        let max = self
            .raw
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = self.raw.iter().map(|&r| (r - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    /// Weighted sum over the layer axis of an `L x n x d` tensor.
    pub fn apply(&self, layers: ArrayView3<'_, T>) -> Array2<T> {
        let weights = self.normalized();
        let (_, n, d) = layers.dim();
        let mut out = Array2::zeros((n, d));
        for (w, layer) in weights.iter().zip(layers.axis_iter(Axis(0))) {
            if *w != T::zero() {
                out.scaled_add(*w, &layer);
            }
        }
        out
    }
}

/// Collapse every sentence to a single mixed layer.
pub fn mix_layers<T: Scalar>(set: &EmbeddingSet, weights: &MixWeights<T>) -> Result<EmbeddingSet, EmbeddingError> {
    if weights.len() != set.layers() {
        return Err(EmbeddingError::Mismatch {
            what: "mix weight count",
            expected: set.layers(),
            found: weights.len(),
        });
    }
    let mut out = EmbeddingSet::new(1, set.dim());
    for sentence in set.sentences() {
        let data = sentence.data().mapv(T::from_f32_lossless);
        let mixed = weights.apply(data.view());
        let mixed = mixed.mapv(|v| v.to_f32().unwrap_or(f32::NAN));
        let (n, d) = mixed.dim();
        let data = Array3::from_shape_vec((1, n, d), mixed.into_raw_vec_and_offset().0)
            .expect("shape preserved");
        out.push(sentence.sent_id.clone(), data)?;
    }
    Ok(out)
}
