//! Probe objectives and their analytic gradients.
//!
//! For a sentence of `n` tokens with vectors `H` (`n x d`) and a probe
//! `B` (`k x d`), let `P = H Bᵀ`. The distance objective is
//! `(1/n²) Σ_{i,j} |d_T(i,j) - ‖P_i - P_j‖²|` over ordered pairs; the
//! depth objective is `(1/n) Σ_i |depth(i) - ‖P_i‖²|` (or the squared
//! residual). Batch losses are means of per-sentence losses.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use super::ProbeError;
use crate::embedstore::MixWeights;
use crate::scalar::Scalar;
use crate::treebank::TreeGeometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Distance,
    Depth,
}

impl ProbeKind {
    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Distance => "distance",
            ProbeKind::Depth => "depth",
        }
    }
}

/// How depth residuals are penalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Residual {
    #[default]
    Absolute,
    Squared,
}

/// One sentence: gold geometry plus `n x d` token vectors.
#[derive(Clone, Copy, Debug)]
pub struct ProbeSample<'a, T> {
    pub geometry: &'a TreeGeometry,
    pub vectors: ArrayView2<'a, T>,
}

pub(crate) struct Terms<T> {
    pub loss: T,
    pub grad_b: Array2<T>,
    /// Gradient with respect to the token vectors, `n x d`.
    pub grad_h: Array2<T>,
}

fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

pub(crate) fn check_dims<T>(b: ArrayView2<'_, T>, vectors: ArrayView2<'_, T>, n: usize) -> Result<(), ProbeError> {
    if vectors.ncols() != b.ncols() {
        return Err(ProbeError::DimMismatch {
            what: "vector dimension",
            expected: b.ncols(),
            found: vectors.ncols(),
        });
    }
    if vectors.nrows() != n {
        return Err(ProbeError::DimMismatch {
            what: "token count",
            expected: n,
            found: vectors.nrows(),
        });
    }
    Ok(())
}

pub(crate) fn distance_terms<T: Scalar>(
    b: ArrayView2<'_, T>,
    h: ArrayView2<'_, T>,
    geometry: &TreeGeometry,
    with_grad: bool,
) -> Terms<T> {
    let n = h.nrows();
    let p = h.dot(&b.t());
    let norm = T::lit((n * n) as f64);
    let mut loss = T::zero();
    // Graph Laplacian of the residual signs.
    let mut lap = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &p.row(i) - &p.row(j);
            let residual = T::lit(geometry.distance[[i, j]] as f64) - diff.dot(&diff);
            loss += residual.abs() + residual.abs();
            let s = sign(residual);
            lap[[i, j]] -= s;
            lap[[j, i]] -= s;
            lap[[i, i]] += s;
            lap[[j, j]] += s;
        }
    }
    let loss = loss / norm;
    if !with_grad {
        return Terms {
            loss,
            grad_b: Array2::zeros((0, 0)),
            grad_h: Array2::zeros((0, 0)),
        };
    }
    let scale = -T::lit(4.0) / norm;
    let lap_p = lap.dot(&p);
    let grad_b = p.t().dot(&lap).dot(&h) * scale;
    let grad_h = lap_p.dot(&b) * scale;
    Terms { loss, grad_b, grad_h }
}

pub(crate) fn depth_terms<T: Scalar>(
    b: ArrayView2<'_, T>,
    h: ArrayView2<'_, T>,
    geometry: &TreeGeometry,
    residual_kind: Residual,
    with_grad: bool,
) -> Terms<T> {
    let n = h.nrows();
    let p = h.dot(&b.t());
    let norm = T::lit(n as f64);
    let mut loss = T::zero();
    let mut coeff = Array1::<T>::zeros(n);
    for i in 0..n {
        let row = p.row(i);
        let residual = T::lit(geometry.depth[i] as f64) - row.dot(&row);
        match residual_kind {
            Residual::Absolute => {
                loss += residual.abs();
                coeff[i] = sign(residual);
            }
            Residual::Squared => {
                loss += residual * residual;
                coeff[i] = residual + residual;
            }
        }
    }
    let loss = loss / norm;
    if !with_grad {
        return Terms {
            loss,
            grad_b: Array2::zeros((0, 0)),
            grad_h: Array2::zeros((0, 0)),
        };
    }
    let scale = -T::lit(2.0) / norm;
    let weighted = &p * &coeff.view().insert_axis(Axis(1));
    let grad_b = weighted.t().dot(&h) * scale;
    let grad_h = weighted.dot(&b) * scale;
    Terms { loss, grad_b, grad_h }
}

pub(crate) fn terms<T: Scalar>(
    kind: ProbeKind,
    b: ArrayView2<'_, T>,
    h: ArrayView2<'_, T>,
    geometry: &TreeGeometry,
    residual: Residual,
    with_grad: bool,
) -> Terms<T> {
    match kind {
        ProbeKind::Distance => distance_terms(b, h, geometry, with_grad),
        ProbeKind::Depth => depth_terms(b, h, geometry, residual, with_grad),
    }
}

fn batch_loss<T: Scalar>(
    kind: ProbeKind,
    b: ArrayView2<'_, T>,
    batch: &[ProbeSample<'_, T>],
    residual: Residual,
) -> Result<T, ProbeError> {
    if batch.is_empty() {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for sample in batch {
        check_dims(b, sample.vectors, sample.geometry.len())?;
        total += terms(kind, b, sample.vectors, sample.geometry, residual, false).loss;
    }
    Ok(total / T::lit(batch.len() as f64))
}

/// Mean per-sentence distance loss.
pub fn distance_loss<T: Scalar>(b: ArrayView2<'_, T>, batch: &[ProbeSample<'_, T>]) -> Result<T, ProbeError> {
    batch_loss(ProbeKind::Distance, b, batch, Residual::Absolute)
}

/// Mean per-sentence depth loss with absolute residuals.
pub fn depth_loss<T: Scalar>(b: ArrayView2<'_, T>, batch: &[ProbeSample<'_, T>]) -> Result<T, ProbeError> {
    batch_loss(ProbeKind::Depth, b, batch, Residual::Absolute)
}

/// Batch loss with the chosen depth residual.
pub fn probe_loss<T: Scalar>(
    kind: ProbeKind,
    b: ArrayView2<'_, T>,
    batch: &[ProbeSample<'_, T>],
    residual: Residual,
) -> Result<T, ProbeError> {
    batch_loss(kind, b, batch, residual)
}

/// Batch loss and its gradient with respect to `b`.
pub fn probe_loss_grad<T: Scalar>(
    kind: ProbeKind,
    b: ArrayView2<'_, T>,
    batch: &[ProbeSample<'_, T>],
    residual: Residual,
) -> Result<(T, Array2<T>), ProbeError> {
    let mut total = T::zero();
    let mut grad = Array2::zeros(b.raw_dim());
    for sample in batch {
        check_dims(b, sample.vectors, sample.geometry.len())?;
        let t = terms(kind, b, sample.vectors, sample.geometry, residual, true);
        total += t.loss;
        grad += &t.grad_b;
    }
    if batch.is_empty() {
        return Ok((total, grad));
    }
    let count = T::lit(batch.len() as f64);
    Ok((total / count, grad / count))
}

/// One sentence with all layers, for layer-mix training: `L x n x d`.
#[derive(Clone, Copy, Debug)]
pub struct LayeredSample<'a, T> {
    pub geometry: &'a TreeGeometry,
    pub layers: ArrayView3<'a, T>,
}

/// Chain rule through the softmax mix: gradient with respect to the raw
/// weights given the gradient with respect to the mixed vectors.
pub(crate) fn mix_gradient<T: Scalar>(
    normalized: &[T],
    layers: ArrayView3<'_, T>,
    grad_h: ArrayView2<'_, T>,
) -> Vec<T> {
    let per_layer: Vec<T> = layers
        .axis_iter(Axis(0))
        .map(|layer| (&layer * &grad_h).sum())
        .collect();
    let mean: T = normalized.iter().zip(&per_layer).map(|(&w, &g)| w * g).sum();
    normalized
        .iter()
        .zip(&per_layer)
        .map(|(&w, &g)| w * (g - mean))
        .collect()
}

/// Batch loss of a mixed-layer probe with gradients for `b` and the raw
/// mix weights.
pub fn mixed_loss_grad<T: Scalar>(
    kind: ProbeKind,
    b: ArrayView2<'_, T>,
    mix: &MixWeights<T>,
    batch: &[LayeredSample<'_, T>],
    residual: Residual,
) -> Result<(T, Array2<T>, Vec<T>), ProbeError> {
    let normalized = mix.normalized();
    let mut total = T::zero();
    let mut grad_b = Array2::zeros(b.raw_dim());
    let mut grad_mix = vec![T::zero(); mix.len()];
    for sample in batch {
        if sample.layers.len_of(Axis(0)) != mix.len() {
            return Err(ProbeError::DimMismatch {
                what: "layer count",
                expected: mix.len(),
                found: sample.layers.len_of(Axis(0)),
            });
        }
        let h = mix.apply(sample.layers);
        check_dims(b, h.view(), sample.geometry.len())?;
        let t = terms(kind, b, h.view(), sample.geometry, residual, true);
        total += t.loss;
        grad_b += &t.grad_b;
        for (acc, g) in grad_mix
            .iter_mut()
            .zip(mix_gradient(&normalized, sample.layers, t.grad_h.view()))
        {
            *acc += g;
        }
    }
    if batch.is_empty() {
        return Ok((total, grad_b, grad_mix));
    }
    let count = T::lit(batch.len() as f64);
    Ok((
        total / count,
        grad_b / count,
        grad_mix.into_iter().map(|g| g / count).collect(),
    ))
}

/// Residuals `d_T(i,j) - ‖B(h_i - h_j)‖²` for `i < j`, used to keep
/// finite-difference checks away from the kinks of the L1 objective.
pub fn distance_residuals<T: Scalar>(b: ArrayView2<'_, T>, sample: &ProbeSample<'_, T>) -> Vec<T> {
    let p = sample.vectors.dot(&b.t());
    let n = p.nrows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &p.row(i) - &p.row(j);
            out.push(T::lit(sample.geometry.distance[[i, j]] as f64) - diff.dot(&diff));
        }
    }
    out
}

/// Residuals `depth(i) - ‖B h_i‖²`.
pub fn depth_residuals<T: Scalar>(b: ArrayView2<'_, T>, sample: &ProbeSample<'_, T>) -> Vec<T> {
    let p = sample.vectors.dot(&b.t());
    p.rows()
        .into_iter()
        .zip(&sample.geometry.depth)
        .map(|(row, &d)| T::lit(d as f64) - row.dot(&row))
        .collect()
}

/// Squared-norm predictions `‖B h_i‖²` for each row of `h`.
pub(crate) fn squared_norms<T: Scalar>(b: ArrayView2<'_, T>, h: ArrayView2<'_, T>) -> Array1<T> {
    let p = h.dot(&b.t());
    p.rows().into_iter().map(|r: ArrayView1<'_, T>| r.dot(&r)).collect()
}
