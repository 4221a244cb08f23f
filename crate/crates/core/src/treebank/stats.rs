use serde::{Serialize, Serializer};
use thiserror::Error;

use super::conllu::Sentence;
use super::tree::{tree_geometry, validate_tree, TreeError};

/// UPOS tags counted as content words for the direct-relation statistic.
pub const CONTENT_UPOS: [&str; 3] = ["NOUN", "PROPN", "VERB"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("treebank is empty")]
    Empty,
    #[error("sentence {sent_id}: {source}")]
    InvalidTree { sent_id: String, source: TreeError },
}

fn round_to<S: Serializer>(value: f64, places: i32, s: S) -> Result<S::Ok, S::Error> {
    let scale = 10f64.powi(places);
    s.serialize_f64((value * scale).round() / scale)
}

fn pct<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
    round_to(*value, 2, s)
}

fn avg<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
    round_to(*value, 4, s)
}

/// Corpus-level shape statistics. Serialized with percentages rounded to
/// two places and averages to four.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreebankStats {
    pub n_sents: usize,
    pub n_tokens: usize,
    /// Non-root arcs.
    pub n_arcs: usize,
    #[serde(serialize_with = "pct")]
    pub pct_adp: f64,
    #[serde(serialize_with = "pct")]
    pub pct_aux: f64,
    #[serde(serialize_with = "pct")]
    pub pct_contrel: f64,
    #[serde(serialize_with = "avg")]
    pub mean_dep_len: f64,
    #[serde(serialize_with = "avg")]
    pub mean_height: f64,
}

fn is_content(upos: &str) -> bool {
    CONTENT_UPOS.contains(&upos)
}

fn percentage(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

fn mean(total: usize, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        total as f64 / count as f64
    }
}

pub fn treebank_stats(sentences: &[Sentence]) -> Result<TreebankStats, StatsError> {
    if sentences.is_empty() {
        return Err(StatsError::Empty);
    }

    // Integer accumulators keep the result independent of sentence order.
    let (mut n_tokens, mut n_adp, mut n_aux) = (0usize, 0usize, 0usize);
    let (mut n_arcs, mut n_contrel, mut len_total, mut height_total) = (0usize, 0, 0, 0);

    for sentence in sentences {
        let tree = validate_tree(sentence).map_err(|source| StatsError::InvalidTree {
            sent_id: sentence.sent_id.clone(),
            source,
        })?;
        let geometry = tree_geometry(&tree);

        n_tokens += sentence.len();
        n_adp += sentence.tokens.iter().filter(|t| t.upos == "ADP").count();
        n_aux += sentence.tokens.iter().filter(|t| t.upos == "AUX").count();
        height_total += geometry.height;
        len_total += geometry.arc_lengths.iter().sum::<usize>();
        n_arcs += geometry.arc_lengths.len();
        n_contrel += tree
            .arcs()
            .filter(|&(h, d)| {
                is_content(&sentence.tokens[h - 1].upos) && is_content(&sentence.tokens[d - 1].upos)
            })
            .count();
    }

    Ok(TreebankStats {
        n_sents: sentences.len(),
        n_tokens,
        n_arcs,
        pct_adp: percentage(n_adp, n_tokens),
        pct_aux: percentage(n_aux, n_tokens),
        pct_contrel: percentage(n_contrel, n_arcs),
        mean_dep_len: mean(len_total, n_arcs),
        mean_height: mean(height_total, sentences.len()),
    })
}

/// Per-sentence tree heights, in corpus order.
pub fn sentence_heights(sentences: &[Sentence]) -> Result<Vec<(String, usize)>, StatsError> {
    sentences
        .iter()
        .map(|s| {
            let tree = validate_tree(s).map_err(|source| StatsError::InvalidTree {
                sent_id: s.sent_id.clone(),
                source,
            })?;
            Ok((s.sent_id.clone(), tree.height()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::conllu::Token;

    #[test]
    fn single_noun() {
        let s = Sentence {
            sent_id: "a".into(),
            tokens: vec![Token::new(1, "dog", "NOUN", 0, "root")],
            comments: vec![],
        };
        let st = treebank_stats(&[s]).unwrap();
        assert_eq!(st.n_sents, 1);
        assert_eq!(st.pct_adp, 0.0);
        assert_eq!(st.mean_height, 0.0);
        assert_eq!(st.mean_dep_len, 0.0);
        assert_eq!(st.n_arcs, 0);
        assert_eq!(st.pct_contrel, 0.0);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(treebank_stats(&[]), Err(StatsError::Empty));
    }

    #[test]
    fn invalid_tree_names_sentence() {
        let s = Sentence {
            sent_id: "bad".into(),
            tokens: vec![
                Token::new(1, "a", "X", 0, "root"),
                Token::new(2, "b", "X", 0, "root"),
            ],
            comments: vec![],
        };
        let err = treebank_stats(&[s]).unwrap_err();
        assert!(matches!(err, StatsError::InvalidTree { ref sent_id, .. } if sent_id == "bad"));
    }

    #[test]
    fn serialized_rounding() {
        let st = TreebankStats {
            n_sents: 3,
            n_tokens: 3,
            n_arcs: 0,
            pct_adp: 100.0 / 3.0,
            pct_aux: 0.0,
            pct_contrel: 0.0,
            mean_dep_len: 2.0 / 3.0,
            mean_height: 0.0,
        };
        let v = serde_json::to_value(&st).unwrap();
        assert_eq!(v["pct_adp"], 33.33);
        assert_eq!(v["mean_dep_len"], 0.6667);
    }
}
