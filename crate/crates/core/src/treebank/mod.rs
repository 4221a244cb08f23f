//! Treebank input/output, tree validation and corpus geometry.

mod conllu;
mod stats;
mod tree;

pub use conllu::{parse_conllu, read_conllu_file, write_conllu, ConlluError, Sentence, Token};
pub use stats::{sentence_heights, treebank_stats, StatsError, TreebankStats, CONTENT_UPOS};
pub use tree::{tree_geometry, validate_tree, DepTree, TreeError, TreeGeometry};
