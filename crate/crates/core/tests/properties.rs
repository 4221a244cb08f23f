mod common;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structprobe::decoder::{build_score_matrix, cle_decode};
use structprobe::embedstore::synth_oracle_embeddings;
use structprobe::evaluation::{binned_arc_f1, evaluate, uas, wilcoxon_signed_rank, BinMode, ScoringOptions};
use structprobe::treebank::{
    parse_conllu, tree_geometry, treebank_stats, validate_tree, write_conllu, DepTree, Sentence, Token,
};

fn heads_strategy(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    (1..=max_len, any::<u64>()).prop_map(|(n, seed)| common::random_heads(&mut ChaCha8Rng::seed_from_u64(seed), n))
}

fn corpus_strategy(max_sents: usize, max_len: usize) -> impl Strategy<Value = Vec<Sentence>> {
    prop::collection::vec(heads_strategy(max_len), 1..=max_sents).prop_map(|all| {
        all.iter()
            .enumerate()
            .map(|(i, h)| common::sentence(&format!("s{i}"), h))
            .collect()
    })
}

fn field() -> impl Strategy<Value = Option<String>> {
    prop::option::of("[A-Za-z=|]{1,8}")
}

fn full_sentence() -> impl Strategy<Value = Sentence> {
    heads_strategy(12).prop_flat_map(|heads| {
        let n = heads.len();
        (
            Just(heads),
            prop::collection::vec(("[^\\s#]{1,6}", field(), "[A-Z]{2,5}", field(), field(), field(), field()), n),
            "[a-z0-9-]{1,10}",
        )
            .prop_map(|(heads, cols, id)| {
                let tokens = heads
                    .iter()
                    .zip(cols)
                    .enumerate()
                    .map(|(i, (&head, (form, lemma, upos, xpos, feats, deps, misc)))| Token {
                        id: i + 1,
                        form,
                        lemma,
                        upos,
                        xpos,
                        feats,
                        head,
                        deprel: if head == 0 { "root".into() } else { "dep".into() },
                        deps,
                        misc,
                    })
                    .collect();
                Sentence {
                    sent_id: id.clone(),
                    tokens,
                    comments: vec![format!(" sent_id = {id}"), " text = ...".into()],
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn conllu_roundtrip(sentences in prop::collection::vec(full_sentence(), 1..4)) {
        let text = write_conllu(&sentences);
        let parsed = parse_conllu(&text, None).unwrap();
        prop_assert_eq!(&parsed, &sentences);
        prop_assert_eq!(write_conllu(&parsed), text);
    }

    #[test]
    fn stats_ignore_sentence_order(corpus in corpus_strategy(12, 15), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = corpus.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(treebank_stats(&corpus).unwrap(), treebank_stats(&shuffled).unwrap());
    }

    #[test]
    fn oracle_geometry_is_exact(corpus in corpus_strategy(4, 14), extra in 0usize..4) {
        let dim = corpus.iter().map(Sentence::len).max().unwrap() + extra;
        let set = synth_oracle_embeddings(&corpus, dim, 0.0, 1).unwrap();
        for (sentence, emb) in corpus.iter().zip(set.sentences()) {
            let g = tree_geometry(&validate_tree(sentence).unwrap());
            let h = emb.layer(0);
            for i in 0..sentence.len() {
                let norm: f32 = h.row(i).iter().map(|v| v * v).sum();
                prop_assert_eq!(norm, g.depth[i] as f32);
                for j in 0..sentence.len() {
                    let d: f32 = (&h.row(i) - &h.row(j)).iter().map(|v| v * v).sum();
                    prop_assert_eq!(d, g.distance[[i, j]] as f32);
                }
            }
        }
    }

    #[test]
    fn decoded_output_is_a_tree(n in 1usize..12, seed in any::<u64>()) {
        use rand::RngExt;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = Array2::from_shape_simple_fn((n, n), || rng.random_range(0.0..5.0));
        // Coarse depths so ties occur.
        let d = Array1::from_shape_simple_fn(n, || rng.random_range(0..4) as f64);
        let m = build_score_matrix(e.view(), d.view()).unwrap();
        let tree = cle_decode(&m).unwrap();
        prop_assert!(DepTree::from_heads(tree.heads().to_vec()).is_ok());
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let first_min = d.iter().position(|&v| v == min).unwrap();
        prop_assert_eq!(tree.root(), first_min + 1);
        for (dep, &head) in tree.heads().iter().enumerate() {
            if head != 0 {
                prop_assert!(d[head - 1] <= d[dep]);
            }
        }

        // Shifting every depth, or every distance, by a constant leaves
        // the decoded tree unchanged.
        let shifted_d = &d + 3.25;
        let shifted_e = &e + 1.5;
        let again = cle_decode(&build_score_matrix(shifted_e.view(), shifted_d.view()).unwrap()).unwrap();
        prop_assert_eq!(again, tree);
    }

    #[test]
    fn wilcoxon_is_symmetric(pairs in prop::collection::vec((-50i32..50, -50i32..50), 5..40)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 4.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 4.0).collect();
        match (wilcoxon_signed_rank(&a, &b), wilcoxon_signed_rank(&b, &a)) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(x.statistic, y.statistic);
                prop_assert_eq!(x.p_value, y.p_value);
                prop_assert!((0.0..=1.0).contains(&x.p_value));
            }
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            _ => prop_assert!(false, "asymmetric outcome"),
        }
    }

    #[test]
    fn metric_invariants(corpus in corpus_strategy(6, 30), seed in any::<u64>(), punct in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred: Vec<DepTree> = corpus
            .iter()
            .map(|s| DepTree::from_heads(common::random_heads(&mut rng, s.len())).unwrap())
            .collect();
        let options = ScoringOptions { exclude_punct: punct };
        let report = evaluate(&corpus, &pred, &options).unwrap();

        // Correct count is n minus the Hamming distance of head vectors.
        let mut hamming = 0;
        let mut scored = 0;
        for (s, p) in corpus.iter().zip(&pred) {
            for (t, ph) in s.tokens.iter().zip(p.heads()) {
                if punct && t.is_punct() {
                    continue;
                }
                scored += 1;
                hamming += usize::from(t.head != *ph);
            }
        }
        prop_assert_eq!(report.n_tokens, scored);
        prop_assert_eq!(report.correct, scored - hamming);
        if !punct {
            let direct: usize = corpus
                .iter()
                .zip(&pred)
                .map(|(s, p)| uas(&validate_tree(s).unwrap(), p, None).unwrap().correct)
                .sum();
            prop_assert_eq!(direct, report.correct);
        }

        let pos_correct: usize = report.per_pos.values().map(|a| a.correct).sum();
        let pos_total: usize = report.per_pos.values().map(|a| a.total).sum();
        prop_assert_eq!(pos_correct, report.correct);
        prop_assert_eq!(pos_total, report.n_tokens);
        let len_total: usize = report.uas_by_sent_length.iter().map(|b| b.total).sum();
        prop_assert_eq!(len_total, report.n_tokens);

        // Root-distance bins partition every scored gold arc; length bins
        // partition the non-root ones.
        let by_depth = binned_arc_f1(&corpus, &pred, BinMode::RootDistance, &options).unwrap();
        let gold_arcs: usize = by_depth.iter().map(|b| b.gold).sum();
        prop_assert_eq!(gold_arcs, report.n_tokens);
        let recovered: usize = by_depth.iter().map(|b| b.correct).sum();
        prop_assert_eq!(recovered, report.correct);
        let by_len = binned_arc_f1(&corpus, &pred, BinMode::DepLength, &options).unwrap();
        let non_root = corpus
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| t.head != 0 && !(punct && t.is_punct()))
            .count();
        prop_assert_eq!(by_len.iter().map(|b| b.gold).sum::<usize>(), non_root);
        for b in by_depth.iter().chain(&by_len) {
            prop_assert!((0.0..=1.0).contains(&b.precision));
            prop_assert!((0.0..=1.0).contains(&b.recall));
            prop_assert!((0.0..=1.0).contains(&b.f1));
        }
        prop_assert!((0.0..=100.0).contains(&report.uas));
    }
}
