//! Structural probes for dependency syntax in contextual embeddings.
//!
//! The pipeline reads CoNLL-U treebanks ([`treebank`]) and per-layer token
//! embeddings ([`embedstore`]), trains linear distance and depth probes
//! ([`probes`]), decodes rooted trees from probe predictions with a
//! maximum spanning arborescence ([`decoder`]) and scores them against
//! gold annotation ([`evaluation`]).
//!
//! Probe and decoder math is generic over [`Scalar`] (`f32`/`f64`); the
//! arborescence search itself only needs ordered addition and subtraction and runs
//! on exact rationals. The aliases below fix the scalar to `f64`, which is
//! what the command-line tool uses.

pub mod decoder;
pub mod embedstore;
pub mod evaluation;
pub mod probes;
pub mod scalar;
pub mod treebank;

pub use scalar::Scalar;

pub type ProbeParams64 = probes::ProbeParams<f64>;
pub type ProbeParams32 = probes::ProbeParams<f32>;
pub type TrainConfig64 = probes::TrainConfig<f64>;
pub type MixWeights64 = embedstore::MixWeights<f64>;
pub type ScoreMatrix64 = decoder::ScoreMatrix<f64>;

pub type ProbeDataset64 = probes::ProbeDataset<f64>;
pub type TrainOutcome64 = probes::TrainOutcome<f64>;
