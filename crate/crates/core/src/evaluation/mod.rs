//! Attachment scoring, stratified error analysis and paired significance
//! tests.

mod attachment;
mod compare;
mod stats;

use thiserror::Error;

pub use attachment::{
    binned_arc_f1, evaluate, per_pos_accuracy, uas, uas_by_sentence_length, Attachment, BinMode, BinScore, EvalReport,
    LengthBinScore, PosAccuracy, ScoringOptions, SentenceScore,
};
pub use compare::{compare_frameworks, PairedComparison, PairedItem};
pub use stats::{
    pearson_corr, wilcoxon_signed_rank, PearsonResult, WilcoxonMethod, WilcoxonResult, WILCOXON_EXACT_MAX,
    WILCOXON_MIN_PAIRS,
};

use crate::treebank::TreeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{gold} gold items but {pred} predicted")]
    CountMismatch { gold: usize, pred: usize },
    #[error("item {index}: gold has {gold} tokens, prediction has {pred}")]
    LengthMismatch { index: usize, gold: usize, pred: usize },
    #[error("gold sentence {sent_id}: {source}")]
    InvalidGold { sent_id: String, source: TreeError },
    #[error("item {index} is {a} in the first list but {b} in the second")]
    Misaligned { index: usize, a: String, b: String },
    #[error("no items to compare")]
    NoItems,
    #[error("no non-zero pairs")]
    NoNonZeroPairs,
    #[error("{found} usable pairs, at least {required} required")]
    TooFewPairs { found: usize, required: usize },
    #[error("correlation undefined for constant input")]
    ConstantInput,
    #[error("non-finite score")]
    NonFinite,
}
