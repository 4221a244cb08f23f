use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{EmbeddingError, EmbeddingSet};
use crate::treebank::{validate_tree, Sentence};

/// Single-layer embeddings whose geometry encodes the gold trees.
///
/// Each non-root arc gets its own standard basis vector and a token's
/// vector is the sum of the basis vectors on its path from the root. With
/// no noise, squared Euclidean distance between tokens equals their tree
/// distance and the squared norm equals depth. Gaussian noise with
/// standard deviation `noise_sd` is added per component.
pub fn synth_oracle_embeddings(
    sentences: &[Sentence],
    dim: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<EmbeddingSet, EmbeddingError> {
    if !noise_sd.is_finite() || noise_sd < 0.0 {
        return Err(EmbeddingError::BadNoise(noise_sd));
    }
    let required = sentences.iter().map(|s| s.len().saturating_sub(1)).max().unwrap_or(0);
    if dim < required {
        return Err(EmbeddingError::DimTooSmall { required, dim });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).map_err(|_| EmbeddingError::BadNoise(noise_sd))?;
    let mut set = EmbeddingSet::new(1, dim);

    for sentence in sentences {
        let tree = validate_tree(sentence).map_err(|e| EmbeddingError::InvalidTree {
            sent_id: sentence.sent_id.clone(),
            message: e.to_string(),
        })?;
        let n = tree.len();

        // Basis index of the arc entering each non-root token.
        let mut basis = vec![None; n];
        let mut next = 0;
        for (i, slot) in basis.iter_mut().enumerate() {
            if tree.heads()[i] != 0 {
                *slot = Some(next);
                next += 1;
            }
        }

        let mut data = Array3::<f32>::zeros((1, n, dim));
        for token in 0..n {
            let mut cur = token;
            while let Some(b) = basis[cur] {
                data[[0, token, b]] += 1.0;
                cur = tree.heads()[cur] - 1;
            }
        }
        if noise_sd > 0.0 {
            for v in data.iter_mut() {
                *v += noise.sample(&mut rng) as f32;
            }
        }
        set.push(sentence.sent_id.clone(), data)?;
    }
    Ok(set)
}
