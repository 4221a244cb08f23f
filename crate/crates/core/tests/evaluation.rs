mod common;

use structprobe::evaluation::{
    binned_arc_f1, compare_frameworks, evaluate, per_pos_accuracy, uas, uas_by_sentence_length, BinMode, BinScore,
    ScoringOptions,
};
use structprobe::treebank::{validate_tree, DepTree, Sentence};

fn trees(sentences: &[Sentence]) -> Vec<DepTree> {
    sentences.iter().map(|s| validate_tree(s).unwrap()).collect()
}

fn bin<'a>(bins: &'a [BinScore], label: &str) -> &'a BinScore {
    bins.iter().find(|b| b.bin == label).unwrap_or_else(|| panic!("bin {label} missing"))
}

#[test]
fn worked_example_scheme_agreement() {
    let (ud, sud) = common::worked_example();
    let count = uas(&validate_tree(&ud).unwrap(), &validate_tree(&sud).unwrap(), None).unwrap();
    assert_eq!((count.correct, count.total), (5, 9));
    assert!((count.percent() - 55.555_555).abs() < 1e-4);
    let differing: Vec<usize> = ud
        .heads()
        .iter()
        .zip(sud.heads())
        .enumerate()
        .filter(|(_, (a, b))| *a != b)
        .map(|(i, _)| i + 1)
        .collect();
    assert_eq!(differing, vec![3, 4, 7, 9]);
}

#[test]
fn identical_and_one_wrong() {
    let (ud, _) = common::worked_example();
    let gold = validate_tree(&ud).unwrap();
    let same = uas(&gold, &gold, None).unwrap();
    assert_eq!((same.correct, same.total), (9, 9));
    assert_eq!(same.percent(), 100.0);

    // "from" attached to "the" instead of "room".
    let mut heads = ud.heads();
    heads[6] = 8;
    let pred = DepTree::from_heads(heads).unwrap();
    let count = uas(&gold, &pred, None).unwrap();
    assert_eq!((count.correct, count.total), (8, 9));

    let acc = per_pos_accuracy(&[ud.clone()], &[pred], &ScoringOptions::default()).unwrap();
    assert_eq!(acc["ADP"].accuracy, 0.0);
    for tag in ["DET", "NOUN", "AUX", "VERB"] {
        assert_eq!(acc[tag].accuracy, 100.0, "{tag}");
    }
    assert!(!acc.contains_key("PUNCT"));
}

#[test]
fn length_mismatch_rejected() {
    let a = DepTree::from_heads(vec![0, 1]).unwrap();
    let b = DepTree::from_heads(vec![0]).unwrap();
    assert!(uas(&a, &b, None).is_err());
    let (ud, _) = common::worked_example();
    assert!(evaluate(&[ud.clone(), ud], &[a], &ScoringOptions::default()).is_err());
}

#[test]
fn dep_length_bins_on_worked_example() {
    // UD gold, SUD as prediction: gold 4->9 (length 5) becomes 7->9 (length 2).
    let (ud, sud) = common::worked_example();
    let pred = trees(&[sud]);
    let bins = binned_arc_f1(&[ud], &pred, BinMode::DepLength, &ScoringOptions::default()).unwrap();
    let five = bin(&bins, "5");
    assert_eq!((five.gold, five.correct, five.predicted), (1, 0, 0));
    assert_eq!(five.recall, 0.0);
    let two = bin(&bins, "2");
    assert_eq!((two.gold, two.predicted), (3, 3));
    assert!((two.precision - 2.0 / 3.0).abs() < 1e-12);
    assert!(bins.iter().all(|b| b.bin != "4" && b.bin != "10+"));
}

#[test]
fn identical_corpora_score_perfectly() {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
    let corpus = common::random_corpus(&mut rng, 40, 1, 45);
    let report = evaluate(&corpus, &trees(&corpus), &ScoringOptions::default()).unwrap();
    assert_eq!(report.uas, 100.0);
    for b in report.f1_by_dep_length.iter().chain(&report.f1_by_root_distance) {
        assert_eq!(b.f1, 1.0, "bin {}", b.bin);
    }
    assert!(report.uas_by_sent_length.iter().all(|b| b.uas == 100.0));
}

#[test]
fn sentence_length_bins() {
    let nine = common::sentence("a", &[0, 1, 2, 3, 4, 5, 6, 7, 8]);
    let report = uas_by_sentence_length(&[nine.clone()], &trees(&[nine.clone()]), &ScoringOptions::default()).unwrap();
    assert_eq!(report.len(), 1);
    assert_eq!((report[0].bin.as_str(), report[0].uas), ("1-10", 100.0));

    // 9 tokens with 2 wrong, 5 tokens with 1 wrong, 15 tokens with 3 wrong.
    let five = common::sentence("b", &[0, 1, 2, 3, 4]);
    let fifteen_heads: Vec<usize> = (0..15).collect();
    let fifteen = common::sentence("c", &fifteen_heads);
    let gold = vec![nine, five, fifteen];
    let mut pred_heads = vec![
        vec![0, 1, 2, 3, 4, 5, 6, 1, 1],
        vec![0, 1, 2, 3, 1],
        fifteen_heads.clone(),
    ];
    pred_heads[2][5] = 1;
    pred_heads[2][9] = 1;
    pred_heads[2][14] = 2;
    let pred: Vec<DepTree> = pred_heads.into_iter().map(|h| DepTree::from_heads(h).unwrap()).collect();
    let bins = uas_by_sentence_length(&gold, &pred, &ScoringOptions::default()).unwrap();
    assert_eq!(bins.len(), 2);
    assert_eq!((bins[0].bin.as_str(), bins[0].correct, bins[0].total), ("1-10", 11, 14));
    assert!((bins[0].uas - 100.0 * 11.0 / 14.0).abs() < 1e-12);
    assert_eq!((bins[1].bin.as_str(), bins[1].correct, bins[1].total), ("11-20", 12, 15));
}

#[test]
fn punctuation_exclusion() {
    // Tags cycle NOUN VERB DET ADP AUX PUNCT, so token 6 is PUNCT.
    let gold = common::sentence("p", &[0, 1, 1, 1, 1, 1]);
    let pred = DepTree::from_heads(vec![0, 1, 1, 1, 1, 2]).unwrap();
    let all = evaluate(&[gold.clone()], &[pred.clone()], &ScoringOptions::default()).unwrap();
    assert_eq!((all.correct, all.n_tokens), (5, 6));
    let options = ScoringOptions { exclude_punct: true };
    let some = evaluate(&[gold], &[pred], &options).unwrap();
    assert_eq!((some.correct, some.n_tokens), (5, 5));
    assert!(!some.per_pos.contains_key("PUNCT"));
}

#[test]
fn report_serialization() {
    let (ud, sud) = common::worked_example();
    let report = evaluate(&[ud], &trees(&[sud]), &ScoringOptions::default()).unwrap();
    let json: serde_json::Value = serde_json::to_value(&report).unwrap();
    assert_eq!(json["n_tokens"], 9);
    assert_eq!(json["per_pos"]["ADP"]["total"], 1);
    let keys: Vec<&String> = json["f1_by_root_distance"].as_object().unwrap().keys().collect();
    assert_eq!(keys, ["1", "2", "3", "4", "5"]);
    assert!(json.get("per_sentence").is_none());

    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("metric,key,field,value\n"));
    assert!(text.contains("f1_by_dep_length,5,recall,0\n"));

    let mut scores = Vec::new();
    report.write_sentence_scores(&mut scores).unwrap();
    let text = String::from_utf8(scores).unwrap();
    assert!(text.starts_with("sent_id,value\nfig1,55.5"));
}

#[test]
fn framework_comparison_on_heights() {
    // Per-sentence difference constructed as an exact linear function of
    // the height difference.
    let a: Vec<(String, f64)> = (0..8).map(|i| (format!("s{i}"), 60.0 + i as f64)).collect();
    let height_diff: Vec<f64> = (0..8).map(|i| ((i * 5) % 7) as f64 - 3.0).collect();
    let b: Vec<(String, f64)> = a
        .iter()
        .zip(&height_diff)
        .map(|((id, v), h)| (id.clone(), v - 2.0 * h + 0.5))
        .collect();
    let cmp = compare_frameworks(&a, &b, Some(&height_diff)).unwrap();
    assert!((cmp.pearson.unwrap().r + 1.0).abs() < 1e-12);
    assert!(cmp.wilcoxon.is_some());
    assert_eq!(cmp.items.len(), 8);
}
