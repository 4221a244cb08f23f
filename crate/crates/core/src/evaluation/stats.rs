use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

use super::EvalError;

/// Largest number of non-zero pairs tested with the exact null
/// distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;
pub const WILCOXON_MIN_PAIRS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Approx,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// Smaller of the positive and negative rank sums.
    pub statistic: f64,
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub method: WilcoxonMethod,
}

/// Ranks `1..=n` of `values` (ascending) with ties sharing their mean
/// rank, doubled so that every rank is an integer. Also returns the
/// sizes of the tie groups.
fn doubled_ranks(values: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0u64; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Mean of ranks start+1..=end, doubled.
        let doubled = (start + 1 + end) as u64;
        for &k in &order[start..end] {
            ranks[k] = doubled;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// `P(T <= t)` for the signed-rank sum of the given doubled ranks under
/// the symmetric null, each rank being positive with probability 1/2.
fn exact_cdf(doubled: &[u64], t: u64) -> f64 {
    let total: u64 = doubled.iter().sum();
    let mut dist = vec![0.0f64; total as usize + 1];
    dist[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let p = dist[s] * 0.5;
            dist[s] = p;
            dist[s + r] += p;
        }
        reach += r;
    }
    dist[..=(t as usize).min(reach)].iter().sum()
}

/// Two-sided Wilcoxon signed-rank test on the paired differences `b - a`.
///
/// Zero differences are dropped and tied absolute differences share
/// their mean rank. With at most [`WILCOXON_EXACT_MAX`] pairs left the
/// p-value comes from the exact null distribution; otherwise from the
/// normal approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::CountMismatch {
            gold: a.len(),
            pred: b.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Err(EvalError::NoNonZeroPairs);
    }
    if n < WILCOXON_MIN_PAIRS {
        return Err(EvalError::TooFewPairs {
            found: n,
            required: WILCOXON_MIN_PAIRS,
        });
    }

    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (doubled, ties) = doubled_ranks(&magnitudes);
    let plus: u64 = doubled.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total: u64 = doubled.iter().sum();
    let doubled_t = plus.min(total - plus);
    let statistic = doubled_t as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX {
        let p = (2.0 * exact_cdf(&doubled, doubled_t)).min(1.0);
        return Ok(WilcoxonResult {
            statistic,
            p_value: p,
            n,
            method: WilcoxonMethod::Exact,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 2.0;
    let se = ((nf * (nf + 1.0) * (2.0 * nf + 1.0) - tie_term) / 24.0).sqrt();
    let offset = statistic - mean;
    let z = (offset - 0.5 * offset.signum()) / se;
    let p = (2.0 * Normal::standard().sf(z.abs())).min(1.0);
    Ok(WilcoxonResult {
        statistic,
        p_value: p,
        n,
        method: WilcoxonMethod::Approx,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PearsonResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Sample correlation of `x` and `y` with a two-sided p-value from the
/// t distribution on `n - 2` degrees of freedom.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<PearsonResult, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::CountMismatch {
            gold: x.len(),
            pred: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(EvalError::TooFewPairs { found: n, required: 3 });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ConstantInput);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let rest = 1.0 - r * r;
    let p = if rest <= 0.0 { 0.0 } else { beta_reg(df / 2.0, 0.5, rest) };
    Ok(PearsonResult { r, p_value: p, n })
}
