#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, RngExt};
use structprobe::treebank::{read_conllu_file, Sentence, Token};

/// Heads of a uniformly random recursive tree over a shuffled token
/// order; crossing arcs are common.
pub fn random_heads<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        heads[order[k] - 1] = parent;
    }
    heads
}

const TAGS: [&str; 6] = ["NOUN", "VERB", "DET", "ADP", "AUX", "PUNCT"];

pub fn sentence(sent_id: &str, heads: &[usize]) -> Sentence {
    let tokens = heads
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let rel = if h == 0 { "root" } else { "dep" };
            Token::new(i + 1, format!("w{}", i + 1), TAGS[i % TAGS.len()], h, rel)
        })
        .collect();
    Sentence {
        sent_id: sent_id.to_owned(),
        tokens,
        comments: vec![format!(" sent_id = {sent_id}")],
    }
}

pub fn random_corpus<R: Rng>(rng: &mut R, count: usize, min_len: usize, max_len: usize) -> Vec<Sentence> {
    (0..count)
        .map(|i| {
            let n = rng.random_range(min_len..=max_len);
            sentence(&format!("r{i}"), &random_heads(rng, n))
        })
        .collect()
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn worked_example() -> (Sentence, Sentence) {
    let ud = read_conllu_file(fixture("fig1_ud.conllu"), None).expect("UD fixture");
    let sud = read_conllu_file(fixture("fig1_sud.conllu"), None).expect("SUD fixture");
    (ud[0].clone(), sud[0].clone())
}
