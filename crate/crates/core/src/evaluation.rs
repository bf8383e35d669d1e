//! Extraction, normalization and scoring of model completions, plus
//! accuracy aggregation into per-condition tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Direction, Modality, PartitionId, PromptInstance, Track};
use crate::keys::Matrix;

const OPEN_TAG: &str = "<translation>";
const CLOSE_TAG: &str = "</translation>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("instance {0:?} judged more than once")]
    DuplicateJudgment(String),
    #[error("no prompt instance for judgment {0:?}")]
    UnknownInstance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    AdjectiveOrder,
    BagOfWords,
    NoMatch,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub instance_id: String,
    #[serde(default, skip_serializing)]
    pub raw_completion: String,
    pub extracted: Option<String>,
    /// Percent credit: 0, 50 or 100.
    pub score: u8,
    pub match_kind: MatchKind,
}

/// Content of the last well-formed `<translation>…</translation>` pair.
pub fn extract_translation(completion: &str) -> Option<String> {
    let close = completion.rfind(CLOSE_TAG)?;
    let open = completion[..close].rfind(OPEN_TAG)?;
    Some(completion[open + OPEN_TAG.len()..close].to_string())
}

/// Lowercases, drops full stops and collapses whitespace.
pub fn normalize(candidate: &str) -> String {
    candidate
        .to_lowercase()
        .replace('.', "")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Exact match with optional half credit for an adjective-order error.
/// Inputs are expected to be normalized.
pub fn score_exact(candidate: &str, reference: &str, ad_order_ref: Option<&str>) -> (u8, MatchKind) {
    if candidate == reference {
        (100, MatchKind::Exact)
    } else if ad_order_ref.is_some_and(|r| r == candidate) {
        (50, MatchKind::AdjectiveOrder)
    } else {
        (0, MatchKind::NoMatch)
    }
}

/// Full credit iff the whitespace-token multisets coincide.
pub fn score_bag_of_words(candidate: &str, reference: &str) -> (u8, MatchKind) {
    fn bag(s: &str) -> Vec<&str> {
        let mut tokens: Vec<&str> = s.split_whitespace().collect();
        tokens.sort_unstable();
        tokens
    }
    if bag(candidate) == bag(reference) {
        (100, MatchKind::BagOfWords)
    } else {
        (0, MatchKind::NoMatch)
    }
}

/// Scores one completion against an instance's references.
///
/// Latin partitions use bag-of-words matching in both directions; the
/// adjective-order reference earns half credit only for eng→art.
pub fn judge(
    instance_id: &str,
    partition: PartitionId,
    direction: Direction,
    reference: &str,
    ad_order_ref: Option<&str>,
    completion: &str,
) -> Judgment {
    let extracted = extract_translation(completion);
    let (score, match_kind) = match &extracted {
        None => (0, MatchKind::Unparseable),
        Some(raw) => {
            let candidate = normalize(raw);
            let reference = normalize(reference);
            if partition.is_latin() {
                score_bag_of_words(&candidate, &reference)
            } else {
                let ad = (direction == Direction::EngToArt && partition.is_adjective())
                    .then(|| ad_order_ref.map(normalize))
                    .flatten();
                score_exact(&candidate, &reference, ad.as_deref())
            }
        }
    };
    Judgment {
        instance_id: instance_id.to_string(),
        raw_completion: completion.to_string(),
        extracted,
        score,
        match_kind,
    }
}

pub fn judge_instance(instance: &PromptInstance, completion: &str) -> Judgment {
    judge(
        &instance.instance_id,
        instance.partition,
        instance.direction,
        &instance.reference,
        instance.ad_order_error_reference.as_deref(),
        completion,
    )
}

/// A judgment joined with its experimental condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRow {
    pub instance_id: String,
    pub track: Track,
    pub direction: Direction,
    pub partition: PartitionId,
    pub modality: Modality,
    pub cot: bool,
    pub matrix: Matrix,
    pub score: u8,
}

impl ScoredRow {
    pub fn new(instance: &PromptInstance, judgment: &Judgment) -> Self {
        ScoredRow {
            instance_id: instance.instance_id.clone(),
            track: instance.track,
            direction: instance.direction,
            partition: instance.partition,
            modality: instance.modality,
            cot: instance.cot,
            matrix: instance.matrix,
            score: judgment.score,
        }
    }
}

/// Joins judgments with the dataset they score.
pub fn join_judgments(instances: &[PromptInstance], judgments: &[Judgment]) -> Result<Vec<ScoredRow>, EvalError> {
    let by_id: std::collections::HashMap<&str, &PromptInstance> =
        instances.iter().map(|i| (i.instance_id.as_str(), i)).collect();
    judgments
        .iter()
        .map(|j| {
            by_id
                .get(j.instance_id.as_str())
                .map(|inst| ScoredRow::new(inst, j))
                .ok_or_else(|| EvalError::UnknownInstance(j.instance_id.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub track: Track,
    pub direction: Direction,
    pub partition: PartitionId,
    pub modality: Modality,
    pub cot: bool,
    /// `None` when matrices are pooled.
    pub matrix: Option<Matrix>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mean: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    /// One cell per condition; cells spanning several matrices hold the
    /// equal-weight composite of the per-matrix means.
    Condition,
    ConditionAndMatrix,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccuracyTable {
    pub cells: BTreeMap<CellKey, Cell>,
}

/// Mean accuracy per cell.
pub fn aggregate_accuracy(rows: &[ScoredRow], group_by: GroupBy) -> Result<AccuracyTable, EvalError> {
    let mut seen = HashSet::new();
    let mut by_matrix: BTreeMap<CellKey, (f64, usize)> = BTreeMap::new();
    for r in rows {
        if !seen.insert(r.instance_id.as_str()) {
            return Err(EvalError::DuplicateJudgment(r.instance_id.clone()));
        }
        let key = CellKey {
            track: r.track,
            direction: r.direction,
            partition: r.partition,
            modality: r.modality,
            cot: r.cot,
            matrix: Some(r.matrix),
        };
        let acc = by_matrix.entry(key).or_default();
        acc.0 += f64::from(r.score);
        acc.1 += 1;
    }
    let split: BTreeMap<CellKey, Cell> = by_matrix
        .into_iter()
        .map(|(k, (sum, n))| (k, Cell { mean: sum / n as f64, n }))
        .collect();
    if group_by == GroupBy::ConditionAndMatrix {
        return Ok(AccuracyTable { cells: split });
    }
    let mut pooled: BTreeMap<CellKey, Vec<Cell>> = BTreeMap::new();
    for (k, cell) in split {
        pooled.entry(CellKey { matrix: None, ..k }).or_default().push(cell);
    }
    Ok(AccuracyTable {
        cells: pooled
            .into_iter()
            .map(|(k, parts)| {
                let mean = parts.iter().map(|c| c.mean).sum::<f64>() / parts.len() as f64;
                let n = parts.iter().map(|c| c.n).sum();
                (k, Cell { mean, n })
            })
            .collect(),
    })
}

/// Column order of the published accuracy tables.
pub const COLUMNS: [(Modality, bool); 6] = [
    (Modality::W, false),
    (Modality::W, true),
    (Modality::WIb, false),
    (Modality::WIb, true),
    (Modality::WG, false),
    (Modality::WG, true),
];

pub fn column_label(modality: Modality, cot: bool) -> String {
    format!("{modality} ({})", if cot { "CoT" } else { "no CoT" })
}

impl AccuracyTable {
    pub fn get(&self, key: &CellKey) -> Option<Cell> {
        self.cells.get(key).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// (track, direction, matrix) slices present in the table.
    pub fn slices(&self) -> Vec<(Track, Direction, Option<Matrix>)> {
        let mut out: Vec<_> = self.cells.keys().map(|k| (k.track, k.direction, k.matrix)).collect();
        out.dedup();
        out.sort();
        out.dedup();
        out
    }

    /// One table in the published layout: partitions as rows, the six
    /// modality/CoT columns, and an average row over the partitions
    /// present in each column. Missing cells print as `-`.
    pub fn render_tsv(&self, track: Track, direction: Direction, matrix: Option<Matrix>) -> String {
        let mut out = String::from("partition");
        for (m, cot) in COLUMNS {
            write!(out, "\t{}", column_label(m, cot)).unwrap();
        }
        out.push('\n');
        let mut column_values: Vec<Vec<f64>> = vec![Vec::new(); COLUMNS.len()];
        for partition in PartitionId::ALL {
            let row: Vec<Option<f64>> = COLUMNS
                .iter()
                .map(|&(modality, cot)| {
                    self.get(&CellKey {
                        track,
                        direction,
                        partition,
                        modality,
                        cot,
                        matrix,
                    })
                    .map(|c| c.mean)
                })
                .collect();
            if row.iter().all(Option::is_none) {
                continue;
            }
            out.push_str(partition.as_str());
            for (i, v) in row.iter().enumerate() {
                match v {
                    Some(v) => {
                        column_values[i].push(*v);
                        write!(out, "\t{v:.1}").unwrap();
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out.push_str("Average");
        for values in &column_values {
            if values.is_empty() {
                out.push_str("\t-");
            } else {
                write!(out, "\t{:.1}", values.iter().sum::<f64>() / values.len() as f64).unwrap();
            }
        }
        out.push('\n');
        out
    }
}
