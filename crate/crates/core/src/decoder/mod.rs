//! Tree decoding from probe predictions.
//!
//! Predicted distances `E` and depths `D` become arc scores: a token may
//! head another only if it is shallower, with score `-E[i][j]`. The
//! pseudo-root gets a single arc, into the shallowest token. The best
//! arborescence under those scores is the predicted tree.

mod cle;

use ndarray::{ArrayView1, ArrayView2, ArrayView3};
use thiserror::Error;

pub use cle::cle_decode;

use crate::probes::{predict_geometry, ProbeError, ProbeParams};
use crate::scalar::Scalar;
use crate::treebank::{DepTree, TreeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("cannot decode an empty sentence")]
    Empty,
    #[error("score matrix admits no spanning arborescence")]
    NoArborescence,
    #[error("distance matrix is {rows}x{cols} but there are {n} depths")]
    Shape { rows: usize, cols: usize, n: usize },
    #[error("non-finite predicted depth or distance")]
    NonFinite,
    #[error("decoded heads are not a tree: {0}")]
    InvalidTree(TreeError),
    #[error("{0}")]
    Probe(String),
}

impl From<ProbeError> for DecodeError {
    fn from(e: ProbeError) -> Self {
        DecodeError::Probe(e.to_string())
    }
}

/// Arc scores over `n + 1` vertices, vertex 0 being the pseudo-root.
/// `None` marks a forbidden arc.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix<S> {
    size: usize,
    cells: Vec<Option<S>>,
}

impl<S: Copy> ScoreMatrix<S> {
    /// All arcs forbidden, for `n_tokens` tokens.
    pub fn forbidden(n_tokens: usize) -> Self {
        let size = n_tokens + 1;
        ScoreMatrix {
            size,
            cells: vec![None; size * size],
        }
    }

    pub fn n_tokens(&self) -> usize {
        self.size - 1
    }

    /// Score of arc `head -> dependent`.
    pub fn get(&self, head: usize, dependent: usize) -> Option<S> {
        self.cells[head * self.size + dependent]
    }

    /// Allow arc `head -> dependent` with `score`. Arcs into the
    /// pseudo-root and self-loops stay forbidden.
    pub fn set(&mut self, head: usize, dependent: usize, score: S) {
        assert!(dependent != 0 && head != dependent, "arc {head}->{dependent} is never allowed");
        self.cells[head * self.size + dependent] = Some(score);
    }

    pub fn forbid(&mut self, head: usize, dependent: usize) {
        self.cells[head * self.size + dependent] = None;
    }

    /// Total score of the tree given by `heads`, or `None` if it uses a
    /// forbidden arc.
    pub fn tree_score(&self, heads: &[usize]) -> Option<S>
    where
        S: std::ops::Add<Output = S>,
    {
        let mut arcs = heads.iter().enumerate().map(|(i, &h)| self.get(h, i + 1));
        let first = arcs.next()??;
        arcs.try_fold(first, |acc, s| s.map(|s| acc + s))
    }
}

/// `i` may head `j` when `depth[i] < depth[j]`, or when the depths tie
/// and `i` comes first.
fn may_head<T: PartialOrd>(depth: ArrayView1<'_, T>, i: usize, j: usize) -> bool {
    depth[i] < depth[j] || (depth[i] == depth[j] && i < j)
}

/// Score matrix from predicted squared distances and depths.
pub fn build_score_matrix<T: Scalar>(
    distances: ArrayView2<'_, T>,
    depths: ArrayView1<'_, T>,
) -> Result<ScoreMatrix<T>, DecodeError> {
    let n = depths.len();
    if distances.dim() != (n, n) {
        let (rows, cols) = distances.dim();
        return Err(DecodeError::Shape { rows, cols, n });
    }
    if n == 0 {
        return Err(DecodeError::Empty);
    }
    if depths.iter().chain(distances.iter()).any(|v| !v.is_finite()) {
        return Err(DecodeError::NonFinite);
    }
    let mut m = ScoreMatrix::forbidden(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && may_head(depths, i, j) {
                m.set(i + 1, j + 1, -distances[[i, j]]);
            }
        }
    }
    // Earliest token among those with minimal depth.
    let root = (1..n).fold(0, |best, i| if depths[i] < depths[best] { i } else { best });
    m.set(0, root + 1, T::zero());
    Ok(m)
}

/// Predict geometry for one `L x n x d` record and decode a tree.
pub fn decode_sentence<T: Scalar>(params: &ProbeParams<T>, layers: ArrayView3<'_, f32>) -> Result<DepTree, DecodeError> {
    let (distances, depths) = predict_geometry(params, layers)?;
    let matrix = build_score_matrix(distances.view(), depths.view())?;
    cle_decode(&matrix)
}
