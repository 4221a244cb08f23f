//! Probe training.
//!
//! The two probes are fitted independently with minibatch Adam. After
//! every epoch the full training loss is re-evaluated: an epoch that
//! raises it is rolled back and the learning rate halved, so the recorded
//! training curve never increases. An epoch that fails to improve the dev
//! loss also halves the learning rate, and `patience` such epochs in a row
//! stop training. The parameters with the best dev loss are returned.

use std::collections::HashSet;

use ndarray::{Array2, Array3, Axis};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::loss::{mix_gradient, terms, ProbeKind, Residual};
use super::params::{LayerSelector, ProbeParams};
use super::ProbeError;
use crate::embedstore::{EmbeddingSet, MixWeights};
use crate::scalar::Scalar;
use crate::treebank::{tree_geometry, validate_tree, Sentence, TreeGeometry};

/// Training-loss increases smaller than this are not treated as a regression.
const TRAIN_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig<T> {
    /// Probe rank; `None` uses the embedding dimension.
    pub rank: Option<usize>,
    pub learning_rate: T,
    /// Sentences per optimizer step.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Non-improving dev epochs tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub layer: LayerSelector,
    pub depth_residual: Residual,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            rank: None,
            learning_rate: T::lit(1e-3),
            batch_size: 20,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            layer: LayerSelector::Index(0),
            depth_residual: Residual::Absolute,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    fn validate(&self, dim: usize) -> Result<usize, ProbeError> {
        let rank = self.rank.unwrap_or(dim);
        let bad = |m: String| Err(ProbeError::InvalidConfig(m));
        if rank == 0 || rank > dim {
            return bad(format!("rank {rank} must be in 1..={dim}"));
        }
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive".into());
        }
        Ok(rank)
    }
}

/// Sentences paired with the embedding layers a probe will read.
#[derive(Clone, Debug)]
pub struct ProbeDataset<T> {
    items: Vec<ProbeItem<T>>,
    layer: LayerSelector,
    layers: usize,
    dim: usize,
}

#[derive(Clone, Debug)]
struct ProbeItem<T> {
    sent_id: String,
    geometry: TreeGeometry,
    /// `1 x n x d` for a single layer, `L x n x d` for a mix.
    vectors: Array3<T>,
}

impl<T: Scalar> ProbeDataset<T> {
    pub fn new(sentences: &[Sentence], embeddings: &EmbeddingSet, layer: LayerSelector) -> Result<Self, ProbeError> {
        embeddings.check_aligned(sentences)?;
        if let LayerSelector::Index(l) = layer {
            if l >= embeddings.layers() {
                return Err(ProbeError::LayerOutOfRange {
                    layer: l,
                    layers: embeddings.layers(),
                });
            }
        }
        let items = sentences
            .iter()
            .zip(embeddings.sentences())
            .map(|(s, e)| {
                let tree = validate_tree(s).map_err(|source| ProbeError::InvalidTree {
                    sent_id: s.sent_id.clone(),
                    source,
                })?;
                let vectors = match layer {
                    LayerSelector::Index(l) => e.layer(l).insert_axis(Axis(0)).mapv(T::from_f32_lossless),
                    LayerSelector::Mix => e.data().mapv(T::from_f32_lossless),
                };
                Ok(ProbeItem {
                    sent_id: s.sent_id.clone(),
                    geometry: tree_geometry(&tree),
                    vectors,
                })
            })
            .collect::<Result<Vec<_>, ProbeError>>()?;
        Ok(ProbeDataset {
            items,
            layer,
            layers: embeddings.layers(),
            dim: embeddings.dim(),
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub probe: ProbeKind,
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub learning_rate: f64,
    /// The epoch raised the training loss and was rolled back.
    pub rolled_back: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub params: ProbeParams<T>,
    pub curve: Vec<EpochRecord>,
    pub train_distance_loss: f64,
    pub dev_distance_loss: f64,
    pub train_depth_loss: f64,
    pub dev_depth_loss: f64,
}

#[derive(Clone)]
struct State<T> {
    b: Array2<T>,
    mix: Option<MixWeights<T>>,
}

#[derive(Clone)]
struct Adam<T> {
    m_b: Array2<T>,
    v_b: Array2<T>,
    m_mix: Vec<T>,
    v_mix: Vec<T>,
    step: i32,
}

struct Objective<'a, T> {
    kind: ProbeKind,
    residual: Residual,
    data: &'a ProbeDataset<T>,
}

impl<T: Scalar> Objective<'_, T> {
    fn item_vectors(&self, state: &State<T>, item: &ProbeItem<T>) -> Array2<T> {
        match &state.mix {
            Some(mix) => mix.apply(item.vectors.view()),
            None => item.vectors.index_axis(Axis(0), 0).to_owned(),
        }
    }

    fn loss(&self, state: &State<T>) -> T {
        if self.data.is_empty() {
            return T::zero();
        }
        let total: T = self
            .data
            .items
            .iter()
            .map(|item| {
                let h = self.item_vectors(state, item);
                terms(self.kind, state.b.view(), h.view(), &item.geometry, self.residual, false).loss
            })
            .sum();
        total / T::lit(self.data.len() as f64)
    }

    fn loss_grad(&self, state: &State<T>, batch: &[usize]) -> (T, Array2<T>, Vec<T>) {
        let mut loss = T::zero();
        let mut grad_b = Array2::zeros(state.b.raw_dim());
        let mut grad_mix = vec![T::zero(); state.mix.as_ref().map_or(0, |m| m.len())];
        let normalized = state.mix.as_ref().map(|m| m.normalized());
        for &idx in batch {
            let item = &self.data.items[idx];
            let h = self.item_vectors(state, item);
            let t = terms(self.kind, state.b.view(), h.view(), &item.geometry, self.residual, true);
            loss += t.loss;
            grad_b += &t.grad_b;
            if let Some(w) = &normalized {
                for (acc, g) in grad_mix
                    .iter_mut()
                    .zip(mix_gradient(w, item.vectors.view(), t.grad_h.view()))
                {
                    *acc += g;
                }
            }
        }
        let count = T::lit(batch.len() as f64);
        grad_mix.iter_mut().for_each(|g| *g = *g / count);
        (loss / count, grad_b / count, grad_mix)
    }
}

fn adam_update<T: Scalar>(
    param: &mut T,
    m: &mut T,
    v: &mut T,
    grad: T,
    lr: T,
    config: &TrainConfig<T>,
    correction1: T,
    correction2: T,
) {
    *m = config.beta1 * *m + (T::one() - config.beta1) * grad;
    *v = config.beta2 * *v + (T::one() - config.beta2) * grad * grad;
    let m_hat = *m / correction1;
    let v_hat = *v / correction2;
    *param -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
}

fn adam_step<T: Scalar>(
    state: &mut State<T>,
    adam: &mut Adam<T>,
    grad_b: &Array2<T>,
    grad_mix: &[T],
    lr: T,
    config: &TrainConfig<T>,
) {
    adam.step += 1;
    let c1 = T::one() - config.beta1.powi(adam.step);
    let c2 = T::one() - config.beta2.powi(adam.step);
    ndarray::Zip::from(&mut state.b)
        .and(&mut adam.m_b)
        .and(&mut adam.v_b)
        .and(grad_b)
        .for_each(|p, m, v, &g| adam_update(p, m, v, g, lr, config, c1, c2));
    if let Some(mix) = &mut state.mix {
        for (((p, m), v), &g) in mix
            .raw
            .iter_mut()
            .zip(&mut adam.m_mix)
            .zip(&mut adam.v_mix)
            .zip(grad_mix)
        {
            adam_update(p, m, v, g, lr, config, c1, c2);
        }
    }
}

fn init_transform<T: Scalar>(rng: &mut ChaCha8Rng, rank: usize, dim: usize) -> Array2<T> {
    let bound = 1.0 / (dim as f64).sqrt();
    Array2::from_shape_simple_fn((rank, dim), || T::lit(rng.random_range(-bound..=bound)))
}

struct Fitted<T> {
    state: State<T>,
    train_loss: f64,
    dev_loss: f64,
}

fn fit_probe<T: Scalar>(
    kind: ProbeKind,
    init: State<T>,
    train: &ProbeDataset<T>,
    dev: &ProbeDataset<T>,
    config: &TrainConfig<T>,
    rng: &mut ChaCha8Rng,
    curve: &mut Vec<EpochRecord>,
) -> Result<Fitted<T>, ProbeError> {
    let residual = match kind {
        ProbeKind::Distance => Residual::Absolute,
        ProbeKind::Depth => config.depth_residual,
    };
    let train_obj = Objective { kind, residual, data: train };
    // Without a dev split, model selection falls back to the training loss.
    let dev_obj = Objective {
        kind,
        residual,
        data: if dev.is_empty() { train } else { dev },
    };
    let finite = |loss: T, epoch: usize| {
        if loss.is_finite() {
            Ok(loss.to_f64_lossy())
        } else {
            Err(ProbeError::Diverged {
                probe: kind,
                epoch,
                loss: loss.to_f64_lossy(),
            })
        }
    };

    let mut state = init;
    let mut adam = Adam {
        m_b: Array2::zeros(state.b.raw_dim()),
        v_b: Array2::zeros(state.b.raw_dim()),
        m_mix: vec![T::zero(); state.mix.as_ref().map_or(0, |m| m.len())],
        v_mix: vec![T::zero(); state.mix.as_ref().map_or(0, |m| m.len())],
        step: 0,
    };
    let mut lr = config.learning_rate;
    let mut train_loss = finite(train_obj.loss(&state), 0)?;
    let mut best_dev = finite(dev_obj.loss(&state), 0)?;
    let mut best = state.clone();
    let mut best_train = train_loss;
    let mut stale = 0;
    curve.push(EpochRecord {
        probe: kind,
        epoch: 0,
        train_loss,
        dev_loss: best_dev,
        learning_rate: lr.to_f64_lossy(),
        rolled_back: false,
    });

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.max_epochs {
        let snapshot = (state.clone(), adam.clone());
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size) {
            let (loss, grad_b, grad_mix) = train_obj.loss_grad(&state, batch);
            finite(loss, epoch)?;
            adam_step(&mut state, &mut adam, &grad_b, &grad_mix, lr, config);
        }

        let epoch_loss = finite(train_obj.loss(&state), epoch)?;
        let rolled_back = epoch_loss > train_loss + TRAIN_TOLERANCE;
        let dev_loss = if rolled_back {
            (state, adam) = snapshot;
            lr = lr / T::lit(2.0);
            stale += 1;
            finite(dev_obj.loss(&state), epoch)?
        } else {
            train_loss = epoch_loss;
            let dev_loss = finite(dev_obj.loss(&state), epoch)?;
            if dev_loss < best_dev {
                best_dev = dev_loss;
                best = state.clone();
                best_train = train_loss;
                stale = 0;
            } else {
                lr = lr / T::lit(2.0);
                stale += 1;
            }
            dev_loss
        };
        curve.push(EpochRecord {
            probe: kind,
            epoch,
            train_loss,
            dev_loss,
            learning_rate: lr.to_f64_lossy(),
            rolled_back,
        });
        if stale >= config.patience {
            break;
        }
    }
    Ok(Fitted {
        state: best,
        train_loss: best_train,
        dev_loss: best_dev,
    })
}

/// Fit the distance and depth probes on `train`, selecting parameters by
/// loss on `dev`. Deterministic for a fixed `config.seed`.
pub fn train_probes<T: Scalar>(
    train: &ProbeDataset<T>,
    dev: &ProbeDataset<T>,
    config: &TrainConfig<T>,
) -> Result<TrainOutcome<T>, ProbeError> {
    if train.is_empty() {
        return Err(ProbeError::EmptyTrainingSet);
    }
    if train.layer != config.layer || dev.layer != config.layer {
        return Err(ProbeError::InvalidConfig(format!(
            "datasets were built for layer {}, config asks for {}",
            train.layer, config.layer
        )));
    }
    if !dev.is_empty() && (dev.dim != train.dim || dev.layers != train.layers) {
        return Err(ProbeError::DimMismatch {
            what: "dev embedding dimension",
            expected: train.dim,
            found: dev.dim,
        });
    }
    let train_ids: HashSet<&str> = train.items.iter().map(|i| i.sent_id.as_str()).collect();
    if let Some(item) = dev.items.iter().find(|i| train_ids.contains(i.sent_id.as_str())) {
        return Err(ProbeError::OverlappingSplits {
            sent_id: item.sent_id.clone(),
        });
    }
    let rank = config.validate(train.dim)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let b_dist = init_transform(&mut rng, rank, train.dim);
    let b_depth = init_transform(&mut rng, rank, train.dim);
    let mix = match config.layer {
        LayerSelector::Mix => Some(MixWeights::uniform(train.layers)),
        LayerSelector::Index(_) => None,
    };

    let mut curve = Vec::new();
    let dist = fit_probe(
        ProbeKind::Distance,
        State { b: b_dist, mix: mix.clone() },
        train,
        dev,
        config,
        &mut rng,
        &mut curve,
    )?;
    let depth = fit_probe(
        ProbeKind::Depth,
        State { b: b_depth, mix },
        train,
        dev,
        config,
        &mut rng,
        &mut curve,
    )?;

    let params = ProbeParams {
        rank,
        dim: train.dim,
        b_dist: dist.state.b,
        b_depth: depth.state.b,
        layer: config.layer,
        mix_dist: dist.state.mix,
        mix_depth: depth.state.mix,
    };
    params.validate()?;
    Ok(TrainOutcome {
        params,
        curve,
        train_distance_loss: dist.train_loss,
        dev_distance_loss: dist.dev_loss,
        train_depth_loss: depth.train_loss,
        dev_depth_loss: depth.dev_loss,
    })
}
