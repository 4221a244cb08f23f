use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::EvalError;
use crate::treebank::{validate_tree, DepTree, Sentence};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScoringOptions {
    /// Drop `PUNCT` tokens from every count.
    pub exclude_punct: bool,
}

impl ScoringOptions {
    fn mask(&self, sentence: &Sentence) -> Vec<bool> {
        sentence
            .tokens
            .iter()
            .map(|t| !(self.exclude_punct && t.is_punct()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Attachment {
    pub correct: usize,
    pub total: usize,
}

impl Attachment {
    /// Percentage correct; 0 when nothing was scored.
    pub fn percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }

    fn add(&mut self, other: Attachment) {
        self.correct += other.correct;
        self.total += other.total;
    }
}

/// Head agreement between two trees over tokens where `scored` holds
/// (all tokens when `None`). The root token counts when both trees make
/// it the root.
pub fn uas(gold: &DepTree, pred: &DepTree, scored: Option<&[bool]>) -> Result<Attachment, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            index: 0,
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut count = Attachment::default();
    for (i, (g, p)) in gold.heads().iter().zip(pred.heads()).enumerate() {
        if scored.is_some_and(|m| !m[i]) {
            continue;
        }
        count.total += 1;
        if g == p {
            count.correct += 1;
        }
    }
    Ok(count)
}

/// A gold sentence and its predicted tree.
struct Aligned<'a> {
    sentence: &'a Sentence,
    gold: DepTree,
    pred: &'a DepTree,
    mask: Vec<bool>,
}

fn align<'a>(
    gold: &'a [Sentence],
    pred: &'a [DepTree],
    options: &ScoringOptions,
) -> Result<Vec<Aligned<'a>>, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::CountMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    gold.iter()
        .zip(pred)
        .enumerate()
        .map(|(index, (sentence, pred))| {
            if sentence.len() != pred.len() {
                return Err(EvalError::LengthMismatch {
                    index,
                    gold: sentence.len(),
                    pred: pred.len(),
                });
            }
            let gold = validate_tree(sentence).map_err(|source| EvalError::InvalidGold {
                sent_id: sentence.sent_id.clone(),
                source,
            })?;
            Ok(Aligned {
                sentence,
                gold,
                pred,
                mask: options.mask(sentence),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosAccuracy {
    pub correct: usize,
    pub total: usize,
    /// Percentage.
    pub accuracy: f64,
}

fn per_pos(aligned: &[Aligned<'_>]) -> BTreeMap<String, PosAccuracy> {
    let mut counts: BTreeMap<String, Attachment> = BTreeMap::new();
    for a in aligned {
        for (i, token) in a.sentence.tokens.iter().enumerate() {
            if !a.mask[i] {
                continue;
            }
            let entry = counts.entry(token.upos.clone()).or_default();
            entry.total += 1;
            if a.gold.heads()[i] == a.pred.heads()[i] {
                entry.correct += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(tag, c)| {
            (
                tag,
                PosAccuracy {
                    correct: c.correct,
                    total: c.total,
                    accuracy: c.percent(),
                },
            )
        })
        .collect()
}

/// Attachment accuracy of tokens grouped by their gold UPOS tag.
pub fn per_pos_accuracy(
    gold: &[Sentence],
    pred: &[DepTree],
    options: &ScoringOptions,
) -> Result<BTreeMap<String, PosAccuracy>, EvalError> {
    Ok(per_pos(&align(gold, pred, options)?))
}

/// How arcs are assigned to bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BinMode {
    /// `|head - dependent|`; root attachments are not binned.
    DepLength,
    /// Edges from the artificial root to the dependent in its own tree:
    /// 1 for the root token, 2 for its dependents and so on.
    RootDistance,
}

const ARC_BINS: usize = 10;

fn arc_bin(value: usize) -> usize {
    value.clamp(1, ARC_BINS)
}

fn arc_bin_label(bin: usize) -> String {
    if bin >= ARC_BINS {
        format!("{ARC_BINS}+")
    } else {
        bin.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinScore {
    #[serde(skip)]
    pub bin: String,
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Arcs of `tree` as `(bin, head, dependent)`, skipping masked dependents.
fn binned_arcs(tree: &DepTree, mask: &[bool], mode: BinMode) -> Vec<(usize, usize, usize)> {
    let depths = tree.depths();
    tree.heads()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask[*i])
        .filter_map(|(i, &h)| {
            let dep = i + 1;
            match mode {
                BinMode::DepLength if h == 0 => None,
                BinMode::DepLength => Some((arc_bin(h.abs_diff(dep)), h, dep)),
                BinMode::RootDistance => Some((arc_bin(depths[i] + 1), h, dep)),
            }
        })
        .collect()
}

fn binned_f1(aligned: &[Aligned<'_>], mode: BinMode) -> Vec<BinScore> {
    let mut gold_n = [0usize; ARC_BINS + 1];
    let mut pred_n = [0usize; ARC_BINS + 1];
    let mut gold_hit = [0usize; ARC_BINS + 1];
    let mut pred_hit = [0usize; ARC_BINS + 1];
    for a in aligned {
        let gold = binned_arcs(&a.gold, &a.mask, mode);
        let pred = binned_arcs(a.pred, &a.mask, mode);
        let gold_set: HashSet<(usize, usize)> = gold.iter().map(|&(_, h, d)| (h, d)).collect();
        let pred_set: HashSet<(usize, usize)> = pred.iter().map(|&(_, h, d)| (h, d)).collect();
        for &(bin, h, d) in &gold {
            gold_n[bin] += 1;
            if pred_set.contains(&(h, d)) {
                gold_hit[bin] += 1;
            }
        }
        for &(bin, h, d) in &pred {
            pred_n[bin] += 1;
            if gold_set.contains(&(h, d)) {
                pred_hit[bin] += 1;
            }
        }
    }
    (1..=ARC_BINS)
        .filter(|&b| gold_n[b] + pred_n[b] > 0)
        .map(|b| {
            let precision = ratio(pred_hit[b], pred_n[b]);
            let recall = ratio(gold_hit[b], gold_n[b]);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            BinScore {
                bin: arc_bin_label(b),
                gold: gold_n[b],
                predicted: pred_n[b],
                correct: gold_hit[b],
                precision,
                recall,
                f1,
            }
        })
        .collect()
}

/// Precision, recall and F1 of directed arcs per bin. Gold arcs are binned
/// by gold geometry and predicted arcs by predicted geometry; empty bins
/// are omitted. `correct` counts gold arcs recovered in that bin.
pub fn binned_arc_f1(
    gold: &[Sentence],
    pred: &[DepTree],
    mode: BinMode,
    options: &ScoringOptions,
) -> Result<Vec<BinScore>, EvalError> {
    Ok(binned_f1(&align(gold, pred, options)?, mode))
}

const LENGTH_BINS: [(usize, usize, &str); 5] = [
    (1, 10, "1-10"),
    (11, 20, "11-20"),
    (21, 30, "21-30"),
    (31, 40, "31-40"),
    (41, usize::MAX, "41+"),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthBinScore {
    #[serde(skip)]
    pub bin: String,
    pub sentences: usize,
    pub correct: usize,
    pub total: usize,
    pub uas: f64,
}

fn by_length(aligned: &[Aligned<'_>]) -> Result<Vec<LengthBinScore>, EvalError> {
    let mut bins = vec![(0usize, Attachment::default()); LENGTH_BINS.len()];
    for a in aligned {
        let n = a.sentence.len();
        let k = LENGTH_BINS
            .iter()
            .position(|&(lo, hi, _)| n >= lo && n <= hi)
            .expect("bins cover all lengths >= 1");
        bins[k].0 += 1;
        bins[k].1.add(uas(&a.gold, a.pred, Some(&a.mask))?);
    }
    Ok(bins
        .into_iter()
        .zip(LENGTH_BINS)
        .filter(|((sentences, _), _)| *sentences > 0)
        .map(|((sentences, count), (_, _, label))| LengthBinScore {
            bin: label.to_owned(),
            sentences,
            correct: count.correct,
            total: count.total,
            uas: count.percent(),
        })
        .collect())
}

/// Micro-averaged UAS per sentence-length bin (token counts 1-10, 11-20,
/// 21-30, 31-40, 41+).
pub fn uas_by_sentence_length(
    gold: &[Sentence],
    pred: &[DepTree],
    options: &ScoringOptions,
) -> Result<Vec<LengthBinScore>, EvalError> {
    by_length(&align(gold, pred, options)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SentenceScore {
    pub sent_id: String,
    pub correct: usize,
    pub total: usize,
    pub uas: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_sentences: usize,
    /// Scored tokens (punctuation excluded when requested).
    pub n_tokens: usize,
    pub exclude_punct: bool,
    pub correct: usize,
    pub uas: f64,
    pub per_pos: BTreeMap<String, PosAccuracy>,
    #[serde(serialize_with = "as_bin_map")]
    pub f1_by_dep_length: Vec<BinScore>,
    #[serde(serialize_with = "as_bin_map")]
    pub f1_by_root_distance: Vec<BinScore>,
    #[serde(serialize_with = "as_bin_map")]
    pub uas_by_sent_length: Vec<LengthBinScore>,
    #[serde(skip)]
    pub per_sentence: Vec<SentenceScore>,
}

trait Labelled {
    fn label(&self) -> &str;
}

impl Labelled for BinScore {
    fn label(&self) -> &str {
        &self.bin
    }
}

impl Labelled for LengthBinScore {
    fn label(&self) -> &str {
        &self.bin
    }
}

/// Bins as a JSON object keyed by label, in bin order.
fn as_bin_map<B, S>(bins: &[B], serializer: S) -> Result<S::Ok, S::Error>
where
    B: Labelled + Serialize,
    S: Serializer,
{
    let mut map = serializer.serialize_map(Some(bins.len()))?;
    for b in bins {
        map.serialize_entry(b.label(), b)?;
    }
    map.end()
}

/// Every metric over an aligned gold/predicted corpus.
pub fn evaluate(gold: &[Sentence], pred: &[DepTree], options: &ScoringOptions) -> Result<EvalReport, EvalError> {
    let aligned = align(gold, pred, options)?;
    let mut total = Attachment::default();
    let mut per_sentence = Vec::with_capacity(aligned.len());
    for a in &aligned {
        let count = uas(&a.gold, a.pred, Some(&a.mask))?;
        total.add(count);
        per_sentence.push(SentenceScore {
            sent_id: a.sentence.sent_id.clone(),
            correct: count.correct,
            total: count.total,
            uas: count.percent(),
        });
    }
    Ok(EvalReport {
        n_sentences: aligned.len(),
        n_tokens: total.total,
        exclude_punct: options.exclude_punct,
        correct: total.correct,
        uas: total.percent(),
        per_pos: per_pos(&aligned),
        f1_by_dep_length: binned_f1(&aligned, BinMode::DepLength),
        f1_by_root_distance: binned_f1(&aligned, BinMode::RootDistance),
        uas_by_sent_length: by_length(&aligned)?,
        per_sentence,
    })
}

impl EvalReport {
    /// Flat `metric,key,field,value` rows, one per report cell.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["metric", "key", "field", "value"])?;
        let mut row = |metric: &str, key: &str, field: &str, value: f64| {
            w.write_record([metric, key, field, &value.to_string()])
        };
        row("uas", "", "correct", self.correct as f64)?;
        row("uas", "", "total", self.n_tokens as f64)?;
        row("uas", "", "value", self.uas)?;
        row("n_sentences", "", "value", self.n_sentences as f64)?;
        for (tag, acc) in &self.per_pos {
            row("per_pos", tag, "correct", acc.correct as f64)?;
            row("per_pos", tag, "total", acc.total as f64)?;
            row("per_pos", tag, "accuracy", acc.accuracy)?;
        }
        for (metric, bins) in [
            ("f1_by_dep_length", &self.f1_by_dep_length),
            ("f1_by_root_distance", &self.f1_by_root_distance),
        ] {
            for b in bins {
                row(metric, &b.bin, "gold", b.gold as f64)?;
                row(metric, &b.bin, "predicted", b.predicted as f64)?;
                row(metric, &b.bin, "precision", b.precision)?;
                row(metric, &b.bin, "recall", b.recall)?;
                row(metric, &b.bin, "f1", b.f1)?;
            }
        }
        for b in &self.uas_by_sent_length {
            row("uas_by_sent_length", &b.bin, "sentences", b.sentences as f64)?;
            row("uas_by_sent_length", &b.bin, "uas", b.uas)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `sent_id,value` rows of per-sentence UAS, the input format of
    /// paired comparisons.
    pub fn write_sentence_scores<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["sent_id", "value"])?;
        for s in &self.per_sentence {
            w.write_record([s.sent_id.as_str(), &s.uas.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
