#[path = "support/scoring_oracle.rs"]
mod oracle;

use std::collections::HashMap;

use cryptolang_core::evaluation::{
    aggregate_accuracy, extract_translation, judge, normalize, GroupBy, MatchKind, ScoredRow,
};
use cryptolang_core::instance::{Direction, Modality, PartitionId, Track};
use cryptolang_core::keys::Matrix;
use proptest::prelude::*;

#[test]
fn library_agrees_with_naive_scorer() {
    let suite = oracle::synthetic_suite(11, 500);
    let mut kinds: HashMap<&str, usize> = HashMap::new();
    for (i, c) in suite.iter().enumerate() {
        let j = judge(
            &format!("c{i}"),
            c.partition.parse().unwrap(),
            c.direction.parse().unwrap(),
            &c.reference,
            c.ad_order.as_deref(),
            &c.completion,
        );
        let want = oracle::naive_score(c.partition, c.direction, &c.reference, c.ad_order.as_deref(), &c.completion);
        assert_eq!(j.score, want, "case {i} ({}): {c:?}", c.kind);
        *kinds.entry(c.kind).or_default() += 1;
    }
    // The suite exercises half credit and bag-of-words for real.
    let half = suite
        .iter()
        .filter(|c| oracle::naive_score(c.partition, c.direction, &c.reference, c.ad_order.as_deref(), &c.completion) == 50)
        .count();
    assert!(half > 0);
    assert!(kinds["permuted"] > 0 && kinds["ad_order"] > 0);
}

#[test]
fn half_credit_is_exclusive_to_english_to_conlang() {
    let c = "<translation>le chat noir</translation>";
    for direction in Direction::ALL {
        let j = judge("x", PartitionId::P5f, direction, "le noir chat", Some("le chat noir"), c);
        let expected = if direction == Direction::EngToArt { 50 } else { 0 };
        assert_eq!(j.score, expected);
        assert_eq!(j.match_kind == MatchKind::AdjectiveOrder, expected == 50);
    }
}

fn row(i: usize, partition: PartitionId, matrix: Matrix, score: u8) -> ScoredRow {
    ScoredRow {
        instance_id: format!("r{i}"),
        track: Track::Baseline,
        direction: Direction::ArtToEng,
        partition,
        modality: Modality::WIb,
        cot: true,
        matrix,
        score,
    }
}

proptest! {
    #[test]
    fn normalization_is_idempotent(s in "[a-zA-Z. \t]{0,30}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once.clone());
        prop_assert!(!once.contains('.') && !once.contains("  "));
    }

    #[test]
    fn extraction_finds_the_last_pair(a in "[a-z ]{0,10}", b in "[a-z ]{0,10}", junk in "[a-z ]{0,10}") {
        let text = format!("{junk}<translation>{a}</translation>{junk}<translation>{b}</translation>{junk}");
        prop_assert_eq!(extract_translation(&text), Some(b));
    }

    #[test]
    fn cell_means_match_brute_force(scores in proptest::collection::vec((0usize..3, 0u8..3), 1..60)) {
        let rows: Vec<ScoredRow> = scores
            .iter()
            .enumerate()
            .map(|(i, &(p, s))| row(i, [PartitionId::P1, PartitionId::P3, PartitionId::P6][p], Matrix::French, s * 50))
            .collect();
        let table = aggregate_accuracy(&rows, GroupBy::Condition).unwrap();
        for (key, cell) in &table.cells {
            let mine: Vec<f64> = rows.iter().filter(|r| r.partition == key.partition).map(|r| f64::from(r.score)).collect();
            prop_assert_eq!(cell.n, mine.len());
            prop_assert!((cell.mean - mine.iter().sum::<f64>() / mine.len() as f64).abs() < 1e-9);
        }
        let total: usize = table.cells.values().map(|c| c.n).sum();
        prop_assert_eq!(total, rows.len());
    }
}
