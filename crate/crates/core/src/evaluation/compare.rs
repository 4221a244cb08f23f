use serde::Serialize;

use super::stats::{pearson_corr, wilcoxon_signed_rank, PearsonResult, WilcoxonResult};
use super::EvalError;

/// One named score, e.g. a sentence's UAS under one annotation scheme.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedItem {
    pub id: String,
    pub a: f64,
    pub b: f64,
}

/// Paired comparison of two systems scored on the same items.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedComparison {
    pub items: Vec<PairedItem>,
    /// Mean of `b - a`.
    pub mean_difference: f64,
    pub wilcoxon: Option<WilcoxonResult>,
    /// Correlation of `b - a` with the covariate, when one was given.
    pub pearson: Option<PearsonResult>,
    /// Why a test was not run.
    pub notes: Vec<String>,
}

/// Compare paired scores `a` and `b`, given as `(id, score)` in the same
/// item order. Tests that cannot run on the data are reported in
/// `notes`; only misaligned inputs are errors.
pub fn compare_frameworks(
    a: &[(String, f64)],
    b: &[(String, f64)],
    covariate: Option<&[f64]>,
) -> Result<PairedComparison, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::CountMismatch {
            gold: a.len(),
            pred: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::NoItems);
    }
    for (index, ((ida, _), (idb, _))) in a.iter().zip(b).enumerate() {
        if ida != idb {
            return Err(EvalError::Misaligned {
                index,
                a: ida.clone(),
                b: idb.clone(),
            });
        }
    }
    if let Some(c) = covariate {
        if c.len() != a.len() {
            return Err(EvalError::CountMismatch {
                gold: a.len(),
                pred: c.len(),
            });
        }
    }

    let xs: Vec<f64> = a.iter().map(|(_, v)| *v).collect();
    let ys: Vec<f64> = b.iter().map(|(_, v)| *v).collect();
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let diffs: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - x).collect();
    let mean_difference = diffs.iter().sum::<f64>() / diffs.len() as f64;

    let mut notes = Vec::new();
    let wilcoxon = match wilcoxon_signed_rank(&xs, &ys) {
        Ok(w) => Some(w),
        Err(EvalError::NoNonZeroPairs) => {
            notes.push("no difference".to_owned());
            None
        }
        Err(e @ EvalError::TooFewPairs { .. }) => {
            notes.push(format!("wilcoxon skipped: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let pearson = match covariate {
        None => None,
        Some(c) => match pearson_corr(&diffs, c) {
            Ok(p) => Some(p),
            Err(e @ (EvalError::ConstantInput | EvalError::TooFewPairs { .. })) => {
                notes.push(format!("pearson skipped: {e}"));
                None
            }
            Err(e) => return Err(e),
        },
    };

    let items = a
        .iter()
        .zip(&ys)
        .map(|((id, x), y)| PairedItem {
            id: id.clone(),
            a: *x,
            b: *y,
        })
        .collect();
    Ok(PairedComparison {
        items,
        mean_difference,
        wilcoxon,
        pearson,
        notes,
    })
}
