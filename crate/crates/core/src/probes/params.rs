use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use super::loss::{squared_norms, ProbeKind};
use super::ProbeError;
use crate::embedstore::MixWeights;
use crate::scalar::Scalar;

/// Which representation a probe reads: one encoder layer or a learned mix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerSelector {
    Index(usize),
    Mix,
}

impl fmt::Display for LayerSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSelector::Index(i) => write!(f, "{i}"),
            LayerSelector::Mix => f.write_str("mix"),
        }
    }
}

impl FromStr for LayerSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("mix") {
            return Ok(LayerSelector::Mix);
        }
        s.parse::<usize>()
            .map(LayerSelector::Index)
            .map_err(|_| format!("layer must be an index or \"mix\", got {s:?}"))
    }
}

/// Trained distance and depth probes.
///
/// `b_dist` and `b_depth` are `rank x dim`. With [`LayerSelector::Mix`]
/// each probe carries its own mix weights, trained jointly with it.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeParams<T> {
    pub rank: usize,
    pub dim: usize,
    pub b_dist: Array2<T>,
    pub b_depth: Array2<T>,
    pub layer: LayerSelector,
    pub mix_dist: Option<MixWeights<T>>,
    pub mix_depth: Option<MixWeights<T>>,
}

#[derive(Serialize, Deserialize)]
struct ParamsJson {
    rank: usize,
    dim: usize,
    b_dist: Vec<Vec<f64>>,
    b_depth: Vec<Vec<f64>>,
    mix: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mix_depth: Option<Vec<f64>>,
    #[serde(default)]
    layer: Option<usize>,
}

fn rows<T: Scalar>(m: &Array2<T>) -> Vec<Vec<f64>> {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.to_f64_lossy()).collect())
        .collect()
}

fn matrix<T: Scalar>(rows: &[Vec<f64>], rank: usize, dim: usize, what: &'static str) -> Result<Array2<T>, ProbeError> {
    if rows.len() != rank || rows.iter().any(|r| r.len() != dim) {
        return Err(ProbeError::InvalidParams(format!("{what} must be {rank}x{dim}")));
    }
    let flat: Vec<T> = rows.iter().flatten().map(|&v| T::lit(v)).collect();
    Ok(Array2::from_shape_vec((rank, dim), flat).expect("shape checked"))
}

impl<T: Scalar> ProbeParams<T> {
    /// Probes on a single layer with the given transforms.
    pub fn new(b_dist: Array2<T>, b_depth: Array2<T>, layer: usize) -> Result<Self, ProbeError> {
        let params = ProbeParams {
            rank: b_dist.nrows(),
            dim: b_dist.ncols(),
            b_dist,
            b_depth,
            layer: LayerSelector::Index(layer),
            mix_dist: None,
            mix_depth: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// Identity transforms on layer 0.
    pub fn identity(dim: usize) -> Self {
        ProbeParams::new(Array2::eye(dim), Array2::eye(dim), 0).expect("identity is valid")
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        let (k, d) = (self.rank, self.dim);
        if k == 0 || k > d {
            return Err(ProbeError::InvalidParams(format!("rank {k} must be in 1..={d}")));
        }
        for (what, b) in [("b_dist", &self.b_dist), ("b_depth", &self.b_depth)] {
            if b.dim() != (k, d) {
                return Err(ProbeError::InvalidParams(format!("{what} must be {k}x{d}")));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(ProbeError::InvalidParams(format!("{what} has non-finite entries")));
            }
        }
        let mixed = self.layer == LayerSelector::Mix;
        for (what, mix) in [("mix", &self.mix_dist), ("mix_depth", &self.mix_depth)] {
            match mix {
                Some(m) if !mixed => {
                    return Err(ProbeError::InvalidParams(format!("{what} given for a single-layer probe")));
                }
                Some(m) if m.raw.iter().any(|v| !v.is_finite()) => {
                    return Err(ProbeError::InvalidParams(format!("{what} has non-finite entries")));
                }
                None if mixed => {
                    return Err(ProbeError::InvalidParams(format!("{what} missing for a mixed probe")));
                }
                _ => {}
            }
        }
        if let (Some(a), Some(b)) = (&self.mix_dist, &self.mix_depth) {
            if a.len() != b.len() {
                return Err(ProbeError::InvalidParams("mix weight lengths differ".into()));
            }
        }
        Ok(())
    }

    pub fn transform(&self, kind: ProbeKind) -> &Array2<T> {
        match kind {
            ProbeKind::Distance => &self.b_dist,
            ProbeKind::Depth => &self.b_depth,
        }
    }

    pub fn mix(&self, kind: ProbeKind) -> Option<&MixWeights<T>> {
        match kind {
            ProbeKind::Distance => self.mix_dist.as_ref(),
            ProbeKind::Depth => self.mix_depth.as_ref(),
        }
    }

    /// The `n x d` vectors probe `kind` reads from an `L x n x d` record.
    pub fn vectors(&self, kind: ProbeKind, layers: ArrayView3<'_, f32>) -> Result<Array2<T>, ProbeError> {
        let (n_layers, _, d) = layers.dim();
        if d != self.dim {
            return Err(ProbeError::DimMismatch {
                what: "embedding dimension",
                expected: self.dim,
                found: d,
            });
        }
        match self.layer {
            LayerSelector::Index(l) => {
                if l >= n_layers {
                    return Err(ProbeError::LayerOutOfRange { layer: l, layers: n_layers });
                }
                Ok(layers.index_axis(Axis(0), l).mapv(T::from_f32_lossless))
            }
            LayerSelector::Mix => {
                let mix = self.mix(kind).expect("validated mixed probe");
                if mix.len() != n_layers {
                    return Err(ProbeError::DimMismatch {
                        what: "layer count",
                        expected: mix.len(),
                        found: n_layers,
                    });
                }
                Ok(mix.apply(layers.mapv(T::from_f32_lossless).view()))
            }
        }
    }

    pub fn to_json(&self) -> String {
        let json = ParamsJson {
            rank: self.rank,
            dim: self.dim,
            b_dist: rows(&self.b_dist),
            b_depth: rows(&self.b_depth),
            mix: self
                .mix_dist
                .as_ref()
                .map(|m| m.raw.iter().map(|v| v.to_f64_lossy()).collect()),
            mix_depth: self
                .mix_depth
                .as_ref()
                .map(|m| m.raw.iter().map(|v| v.to_f64_lossy()).collect()),
            layer: match self.layer {
                LayerSelector::Index(l) => Some(l),
                LayerSelector::Mix => None,
            },
        };
        serde_json::to_string_pretty(&json).expect("plain data serializes")
    }

    /// Parse the JSON form. A missing `layer` means layer 0, or the mix
    /// when `mix` is present; a missing `mix_depth` reuses `mix`.
    pub fn from_json(text: &str) -> Result<Self, ProbeError> {
        let json: ParamsJson =
            serde_json::from_str(text).map_err(|e| ProbeError::InvalidParams(e.to_string()))?;
        let to_mix = |v: Vec<f64>| MixWeights {
            raw: v.into_iter().map(T::lit).collect(),
        };
        let layer = match (&json.mix, json.layer) {
            (Some(_), _) => LayerSelector::Mix,
            (None, l) => LayerSelector::Index(l.unwrap_or(0)),
        };
        let mix_depth = json.mix_depth.or_else(|| json.mix.clone());
        let params = ProbeParams {
            rank: json.rank,
            dim: json.dim,
            b_dist: matrix(&json.b_dist, json.rank, json.dim, "b_dist")?,
            b_depth: matrix(&json.b_depth, json.rank, json.dim, "b_depth")?,
            layer,
            mix_dist: json.mix.map(to_mix),
            mix_depth: mix_depth.map(to_mix),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Predicted squared distances `E` (`n x n`) and depths `D` (length `n`)
/// for one sentence record shaped `L x n x d`.
pub fn predict_geometry<T: Scalar>(
    params: &ProbeParams<T>,
    layers: ArrayView3<'_, f32>,
) -> Result<(Array2<T>, Array1<T>), ProbeError> {
    let h_dist = params.vectors(ProbeKind::Distance, layers)?;
    let h_depth = params.vectors(ProbeKind::Depth, layers)?;
    let p = h_dist.dot(&params.b_dist.t());
    let n = p.nrows();
    let mut e = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &p.row(i) - &p.row(j);
            let v = diff.dot(&diff);
            e[[i, j]] = v;
            e[[j, i]] = v;
        }
    }
    let d = squared_norms(params.b_depth.view(), h_depth.view());
    Ok((e, d))
}
