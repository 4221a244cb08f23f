use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};
use structprobe::decoder::decode_sentence;
use structprobe::embedstore::{read_embeddings_file, synth_oracle_embeddings, write_embeddings_file, EmbeddingSet};
use structprobe::evaluation::{compare_frameworks, evaluate, ScoringOptions};
use structprobe::probes::{train_probes, EpochRecord, TrainConfig};
use structprobe::treebank::{
    read_conllu_file, sentence_heights, treebank_stats, validate_tree, write_conllu, Sentence, Token,
};
use structprobe::{ProbeDataset64, ProbeParams64, TrainConfig64};

use crate::error::{require_file, CliError};
use crate::{CompareArgs, DecodeArgs, EvalArgs, StatsArgs, SynthArgs, TrainArgs};

fn read_treebank(path: &Path, max_sentences: Option<usize>) -> Result<Vec<Sentence>, CliError> {
    require_file(path)?;
    read_conllu_file(path, max_sentences).map_err(|e| CliError::data(path.display().to_string(), e))
}

fn read_spe1(path: &Path, max_sentences: Option<usize>) -> Result<EmbeddingSet, CliError> {
    require_file(path)?;
    let mut set = read_embeddings_file(path).map_err(|e| CliError::data(path.display().to_string(), e))?;
    if let Some(n) = max_sentences {
        set.truncate(n);
    }
    Ok(set)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline, to `output` or stdout.
fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    match output {
        Some(path) => write_file(path, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn write_csv<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>,
{
    let mut buf = Vec::new();
    fill(&mut buf).map_err(|e| CliError::data(path.display().to_string(), e))?;
    write_file(path, &buf)
}

pub fn stats(args: StatsArgs) -> Result<(), CliError> {
    let sentences = read_treebank(&args.treebank, args.max_sentences)?;
    let stats = treebank_stats(&sentences).map_err(|e| CliError::data(args.treebank.display().to_string(), e))?;
    if let Some(path) = &args.heights {
        let heights = sentence_heights(&sentences).map_err(|e| CliError::data("heights", e))?;
        write_csv(path, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["sent_id", "value"])?;
            for (id, h) in heights {
                w.write_record([id, h.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    emit_json(&stats, args.output.as_deref())
}

#[derive(Serialize)]
struct SynthSummary {
    sentences: usize,
    layers: usize,
    dim: usize,
    noise_sd: f64,
    seed: u64,
    bytes: u64,
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let sentences = read_treebank(&args.treebank, args.max_sentences)?;
    let dim = args
        .dim
        .unwrap_or_else(|| sentences.iter().map(|s| s.len().saturating_sub(1)).max().unwrap_or(0).max(1));
    let set = synth_oracle_embeddings(&sentences, dim, args.noise, args.seed)
        .map_err(|e| CliError::data(args.treebank.display().to_string(), e))?;
    let bytes = write_embeddings_file(&set, &args.output).map_err(|e| CliError::data(args.output.display().to_string(), e))?;
    emit_json(
        &SynthSummary {
            sentences: set.len(),
            layers: set.layers(),
            dim,
            noise_sd: args.noise,
            seed: args.seed,
            bytes,
        },
        None,
    )
}

#[derive(Serialize)]
struct TrainSummary {
    train_sentences: usize,
    dev_sentences: usize,
    layer: String,
    rank: usize,
    dim: usize,
    epochs: usize,
    train_distance_loss: f64,
    dev_distance_loss: f64,
    train_depth_loss: f64,
    dev_depth_loss: f64,
}

fn curve_csv(buf: &mut Vec<u8>, layer: &str, curve: &[EpochRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["layer", "epoch", "split", "metric", "value"])?;
    for r in curve {
        let metric = format!("{}_loss", r.probe.name());
        let epoch = r.epoch.to_string();
        w.write_record([layer, &epoch, "train", &metric, &r.train_loss.to_string()])?;
        w.write_record([layer, &epoch, "dev", &metric, &r.dev_loss.to_string()])?;
        let lr_metric = format!("{}_learning_rate", r.probe.name());
        w.write_record([layer, &epoch, "train", &lr_metric, &r.learning_rate.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let sentences = read_treebank(&args.treebank, args.max_sentences)?;
    let set = read_spe1(&args.embeddings, args.max_sentences)?;
    let dataset = |s: &[Sentence], e: &EmbeddingSet, what: &str| {
        ProbeDataset64::new(s, e, args.layer).map_err(|err| CliError::data(what.to_owned(), err))
    };

    let (train_set, dev_set) = match (&args.dev_treebank, &args.dev_embeddings) {
        (Some(tb), Some(emb)) => {
            let dev_sentences = read_treebank(tb, args.max_sentences)?;
            let dev_emb = read_spe1(emb, args.max_sentences)?;
            (
                dataset(&sentences, &set, "training data")?,
                dataset(&dev_sentences, &dev_emb, "dev data")?,
            )
        }
        _ => {
            if !(0.0..1.0).contains(&args.dev_fraction) {
                return Err(CliError::Invalid(format!(
                    "--dev-fraction must be in [0, 1), got {}",
                    args.dev_fraction
                )));
            }
            if set.len() != sentences.len() {
                return Err(CliError::data(
                    "training data",
                    format!("{} sentences but {} embedding records", sentences.len(), set.len()),
                ));
            }
            // The last sentences are held out, so the split needs no randomness.
            let n = sentences.len();
            let n_dev = ((n as f64) * args.dev_fraction).round() as usize;
            let cut = n - n_dev.min(n.saturating_sub(1));
            let train_idx: Vec<usize> = (0..cut).collect();
            let dev_idx: Vec<usize> = (cut..n).collect();
            (
                dataset(&sentences[..cut], &set.select(&train_idx), "training data")?,
                dataset(&sentences[cut..], &set.select(&dev_idx), "dev data")?,
            )
        }
    };

    let config = TrainConfig64 {
        rank: args.rank,
        learning_rate: args.lr,
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        patience: args.patience,
        seed: args.seed,
        layer: args.layer,
        depth_residual: args.depth_residual.into(),
        ..TrainConfig::default()
    };
    let outcome = train_probes(&train_set, &dev_set, &config).map_err(|e| CliError::data("training", e))?;

    write_file(&args.output, outcome.params.to_json().as_bytes())?;
    let layer = args.layer.to_string();
    if let Some(path) = &args.curve {
        write_csv(path, |buf| curve_csv(buf, &layer, &outcome.curve))?;
    }
    emit_json(
        &TrainSummary {
            train_sentences: train_set.len(),
            dev_sentences: dev_set.len(),
            layer,
            rank: outcome.params.rank,
            dim: outcome.params.dim,
            epochs: outcome.curve.iter().map(|r| r.epoch).max().unwrap_or(0),
            train_distance_loss: outcome.train_distance_loss,
            dev_distance_loss: outcome.dev_distance_loss,
            train_depth_loss: outcome.train_depth_loss,
            dev_depth_loss: outcome.dev_depth_loss,
        },
        None,
    )
}

#[derive(Serialize)]
struct DecodeSummary {
    sentences: usize,
    tokens: usize,
}

fn bare_sentence(sent_id: &str, heads: &[usize]) -> Sentence {
    Sentence {
        sent_id: sent_id.to_owned(),
        tokens: heads
            .iter()
            .enumerate()
            .map(|(i, &h)| Token::new(i + 1, "_", "_", h, "_"))
            .collect(),
        comments: vec![format!(" sent_id = {sent_id}")],
    }
}

pub fn decode(args: DecodeArgs, pool: &ThreadPool) -> Result<(), CliError> {
    require_file(&args.params)?;
    let text = fs::read_to_string(&args.params).map_err(|e| CliError::io(&args.params, e))?;
    let params = ProbeParams64::from_json(&text).map_err(|e| CliError::data(args.params.display().to_string(), e))?;
    let set = read_spe1(&args.embeddings, args.max_sentences)?;
    let treebank = match &args.treebank {
        Some(path) => {
            let sentences = read_treebank(path, args.max_sentences)?;
            set.check_aligned(&sentences)
                .map_err(|e| CliError::data(path.display().to_string(), e))?;
            Some(sentences)
        }
        None => None,
    };

    let trees = pool.install(|| {
        set.sentences()
            .par_iter()
            .map(|e| decode_sentence(&params, e.data()).map_err(|err| CliError::data(format!("sentence {}", e.sent_id), err)))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let predicted: Vec<Sentence> = match &treebank {
        Some(sentences) => sentences.iter().zip(&trees).map(|(s, t)| s.with_heads(t.heads())).collect(),
        None => set
            .sentences()
            .iter()
            .zip(&trees)
            .map(|(e, t)| bare_sentence(&e.sent_id, t.heads()))
            .collect(),
    };
    write_file(&args.output, write_conllu(&predicted).as_bytes())?;
    emit_json(
        &DecodeSummary {
            sentences: trees.len(),
            tokens: trees.iter().map(|t| t.len()).sum(),
        },
        None,
    )
}

pub fn eval(args: EvalArgs, pool: &ThreadPool) -> Result<(), CliError> {
    let gold = read_treebank(&args.gold, args.max_sentences)?;
    let pred = read_treebank(&args.pred, args.max_sentences)?;
    if gold.len() != pred.len() {
        return Err(CliError::data(
            "eval",
            format!("{} gold sentences but {} predicted", gold.len(), pred.len()),
        ));
    }
    if let Some((g, p)) = gold.iter().zip(&pred).find(|(g, p)| g.sent_id != p.sent_id) {
        return Err(CliError::data(
            "eval",
            format!("gold sentence {} is aligned with predicted sentence {}", g.sent_id, p.sent_id),
        ));
    }
    let trees = pool.install(|| {
        pred.par_iter()
            .map(|s| validate_tree(s).map_err(|e| CliError::data(format!("predicted sentence {}", s.sent_id), e)))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let options = ScoringOptions {
        exclude_punct: args.exclude_punct,
    };
    let report = evaluate(&gold, &trees, &options).map_err(|e| CliError::data("eval", e))?;
    if let Some(path) = &args.csv {
        write_csv(path, |buf| report.write_csv(buf))?;
    }
    if let Some(path) = &args.sentence_scores {
        write_csv(path, |buf| report.write_sentence_scores(buf))?;
    }
    emit_json(&report, args.output.as_deref())
}

#[derive(Deserialize)]
struct ScoreRow {
    sent_id: String,
    value: f64,
}

fn read_scores(path: &Path) -> Result<Vec<(String, f64)>, CliError> {
    require_file(path)?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::data(path.display().to_string(), e))?;
    reader
        .deserialize::<ScoreRow>()
        .map(|row| {
            row.map(|r| (r.sent_id, r.value))
                .map_err(|e| CliError::data(path.display().to_string(), e))
        })
        .collect()
}

fn aligned_values(base: &[(String, f64)], other: &[(String, f64)], what: &str) -> Result<Vec<f64>, CliError> {
    if base.len() != other.len() {
        return Err(CliError::data(
            what.to_owned(),
            format!("{} items but {} expected", other.len(), base.len()),
        ));
    }
    base.iter()
        .zip(other)
        .map(|((a, _), (b, v))| {
            if a == b {
                Ok(*v)
            } else {
                Err(CliError::data(what.to_owned(), format!("item {b} where {a} was expected")))
            }
        })
        .collect()
}

pub fn compare(args: CompareArgs) -> Result<(), CliError> {
    let a = read_scores(&args.a)?;
    let b = read_scores(&args.b)?;
    let covariate = match &args.covariate {
        Some(path) => {
            let mut values = aligned_values(&a, &read_scores(path)?, "covariate")?;
            if let Some(base) = &args.covariate_base {
                let base_values = aligned_values(&a, &read_scores(base)?, "covariate base")?;
                for (v, base) in values.iter_mut().zip(base_values) {
                    *v -= base;
                }
            }
            Some(values)
        }
        None => None,
    };
    let comparison = compare_frameworks(&a, &b, covariate.as_deref()).map_err(|e| CliError::data("compare", e))?;
    emit_json(&comparison, args.output.as_deref())
}
