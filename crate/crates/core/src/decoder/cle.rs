//! Chu-Liu/Edmonds maximum spanning arborescence.
//!
//! Dense recursive formulation: every non-root vertex takes its best
//! incoming arc; a resulting cycle is contracted into one vertex whose
//! incoming arc scores are adjusted by the score of the cycle arc they
//! would replace, and the contracted problem is solved and expanded.
//! Only addition, subtraction and comparison of scores are needed, so exact
//! rational scores work as well as floats.

use std::ops::{Add, Sub};

use super::{DecodeError, ScoreMatrix};
use crate::treebank::DepTree;

type Dense<S> = Vec<Vec<Option<S>>>;

/// Index of the best-scoring present entry; earliest index wins ties.
fn best_parent<S: Copy + PartialOrd>(scores: &Dense<S>, v: usize) -> Option<usize> {
    let mut best: Option<(usize, S)> = None;
    for (u, row) in scores.iter().enumerate() {
        if u == v {
            continue;
        }
        if let Some(s) = row[v] {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((u, s));
            }
        }
    }
    best.map(|(u, _)| u)
}

/// Vertices of a cycle in the parent map (vertex 0 has no parent).
fn find_cycle(parent: &[usize]) -> Option<Vec<usize>> {
    let n = parent.len();
    let mut mark = vec![usize::MAX; n];
    for start in 1..n {
        let mut v = start;
        while v != 0 && mark[v] == usize::MAX {
            mark[v] = start;
            v = parent[v];
        }
        if v != 0 && mark[v] == start {
            let mut cycle = vec![v];
            let mut u = parent[v];
            while u != v {
                cycle.push(u);
                u = parent[u];
            }
            return Some(cycle);
        }
    }
    None
}

/// Parent of every vertex (entry 0 is unused) in a maximum arborescence
/// rooted at vertex 0, or `None` if no spanning arborescence exists.
fn arborescence<S>(scores: &Dense<S>) -> Option<Vec<usize>>
where
    S: Copy + PartialOrd + Sub<Output = S>,
{
    let n = scores.len();
    let mut parent = vec![0; n];
    for (v, p) in parent.iter_mut().enumerate().skip(1) {
        *p = best_parent(scores, v)?;
    }
    let Some(cycle) = find_cycle(&parent) else {
        return Some(parent);
    };

    let mut in_cycle = vec![false; n];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    // Vertices outside the cycle keep their relative order; the cycle
    // becomes the last vertex of the contracted graph.
    let outside: Vec<usize> = (0..n).filter(|&v| !in_cycle[v]).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &v) in outside.iter().enumerate() {
        index[v] = i;
    }
    let c = outside.len();
    let m = c + 1;

    let mut contracted: Dense<S> = vec![vec![None; m]; m];
    let mut enters_at = vec![usize::MAX; m];
    let mut leaves_from = vec![usize::MAX; m];
    for &u in &outside {
        for &w in &outside {
            contracted[index[u]][index[w]] = scores[u][w];
        }
        // Arc into the cycle at v replaces v's cycle arc.
        let mut best: Option<(usize, S)> = None;
        for &v in &cycle {
            let Some(s) = scores[u][v] else { continue };
            let kept = scores[parent[v]][v].expect("cycle arc present");
            let adjusted = s - kept;
            if best.is_none_or(|(_, b)| adjusted > b) {
                best = Some((v, adjusted));
            }
        }
        if let Some((v, s)) = best {
            contracted[index[u]][c] = Some(s);
            enters_at[index[u]] = v;
        }
        if u != 0 {
            let mut best: Option<(usize, S)> = None;
            for &x in &cycle {
                if let Some(s) = scores[x][u] {
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((x, s));
                    }
                }
            }
            if let Some((x, s)) = best {
                contracted[c][index[u]] = Some(s);
                leaves_from[index[u]] = x;
            }
        }
    }

    let sub = arborescence(&contracted)?;
    let mut result = parent.clone();
    for &w in outside.iter().skip(1) {
        let p = sub[index[w]];
        result[w] = if p == c { leaves_from[index[w]] } else { outside[p] };
    }
    let entry_parent = sub[c];
    result[enters_at[entry_parent]] = outside[entry_parent];
    Some(result)
}

/// Maximum-score arborescence rooted at the pseudo-root with exactly one
/// pseudo-root arc, as token heads.
///
/// If the unconstrained optimum attaches several tokens to the
/// pseudo-root, the problem is solved again once per allowed root arc with
/// all other root arcs removed, and the best of those is kept (earliest
/// root token on ties).
pub fn cle_decode<S>(matrix: &ScoreMatrix<S>) -> Result<DepTree, DecodeError>
where
    S: Copy + PartialOrd + Sub<Output = S> + Add<Output = S>,
{
    let n = matrix.n_tokens();
    if n == 0 {
        return Err(DecodeError::Empty);
    }
    let mut dense: Dense<S> = (0..=n)
        .map(|i| (0..=n).map(|j| matrix.get(i, j)).collect())
        .collect();
    let parent = arborescence(&dense).ok_or(DecodeError::NoArborescence)?;
    let root_children = parent[1..].iter().filter(|&&p| p == 0).count();
    let heads = if root_children == 1 {
        parent[1..].to_vec()
    } else {
        let root_row = dense[0].clone();
        let mut best: Option<(Vec<usize>, S)> = None;
        for (r, score) in root_row.iter().enumerate() {
            if score.is_none() {
                continue;
            }
            dense[0] = vec![None; n + 1];
            dense[0][r] = *score;
            let Some(candidate) = arborescence(&dense) else { continue };
            let heads = candidate[1..].to_vec();
            let total = matrix.tree_score(&heads).expect("arborescence uses allowed arcs");
            if best.as_ref().is_none_or(|(_, b)| total > *b) {
                best = Some((heads, total));
            }
        }
        best.ok_or(DecodeError::NoArborescence)?.0
    };
    DepTree::from_heads(heads).map_err(DecodeError::InvalidTree)
}
