//! Effect sizes, confidence-interval widths and true/reversed breakdowns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{aggregate_accuracy, AccuracyTable, CellKey, EvalError, GroupBy, ScoredRow};
use crate::keys::Matrix;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;
pub const DEFAULT_N_KEYS: usize = 200;
pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least two scores per sample, got {a} and {b}")]
    TooFewSamples { a: usize, b: usize },
    /// Zero pooled spread with different means; carries ±∞ as the effect.
    #[error("degenerate samples: zero pooled standard deviation with unequal means")]
    DegenerateSamples { sentinel: f64 },
    #[error("condition {condition:?} has {got} scores, expected {expected}")]
    MisalignedConditions { condition: String, got: usize, expected: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Bessel-corrected sample variance.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standardized mean difference with a pooled, Bessel-corrected SD.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewSamples { a: a.len(), b: b.len() });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0)).sqrt();
    let diff = mean(a) - mean(b);
    if pooled == 0.0 {
        if diff == 0.0 {
            return Ok(0.0);
        }
        return Err(StatsError::DegenerateSamples {
            sentinel: diff.signum() * f64::INFINITY,
        });
    }
    Ok(diff / pooled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub conditions: Vec<String>,
    /// `matrix[i][j]` is d(condition i, condition j).
    pub matrix: Vec<Vec<f64>>,
    pub sample_sizes: Vec<usize>,
}

/// Pairwise Cohen's d over conditions scored on the same instances.
/// Degenerate pairs hold their ±∞ sentinel.
pub fn effect_matrix(scores_by_condition: &[(String, Vec<f64>)]) -> Result<EffectReport, StatsError> {
    let expected = scores_by_condition.first().map_or(0, |(_, s)| s.len());
    for (name, s) in scores_by_condition {
        if s.len() != expected {
            return Err(StatsError::MisalignedConditions {
                condition: name.clone(),
                got: s.len(),
                expected,
            });
        }
    }
    let k = scores_by_condition.len();
    let mut matrix = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let d = match cohens_d(&scores_by_condition[i].1, &scores_by_condition[j].1) {
                Ok(d) => d,
                Err(StatsError::DegenerateSamples { sentinel }) => sentinel,
                Err(e) => return Err(e),
            };
            matrix[i][j] = d;
            matrix[j][i] = -d;
        }
    }
    Ok(EffectReport {
        conditions: scores_by_condition.iter().map(|(n, _)| n.clone()).collect(),
        matrix,
        sample_sizes: scores_by_condition.iter().map(|(_, s)| s.len()).collect(),
    })
}

impl EffectReport {
    /// Square table with condition labels on both axes.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("condition");
        for c in &self.conditions {
            write!(out, "\t{c}").unwrap();
        }
        out.push('\n');
        for (c, row) in self.conditions.iter().zip(&self.matrix) {
            out.push_str(c);
            for d in row {
                write!(out, "\t{d:.4}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Long-format grid (one `row col d` triple per line) for plotting.
    pub fn to_grid(&self) -> String {
        let mut out = String::from("row\tcol\td\n");
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                writeln!(out, "{i}\t{j}\t{d}").unwrap();
            }
        }
        out
    }
}

/// Width of the 95% percentile bootstrap interval of the mean.
pub fn bootstrap_ci_width(scores: &[f64], resamples: usize, rng: &mut impl Rng) -> f64 {
    if scores.len() < 2 || resamples == 0 {
        return 0.0;
    }
    let n = scores.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| scores[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    percentile(&means, 0.975) - percentile(&means, 0.025)
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Width of the normal-approximation 95% interval of the mean.
pub fn normal_ci_width(scores: &[f64]) -> f64 {
    if scores.len() < 2 {
        return 0.0;
    }
    2.0 * Z_95 * variance(scores).sqrt() / (scores.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Bootstrap,
    Normal,
}

#[derive(Debug, Clone)]
pub struct CiConfig {
    pub n_keys: usize,
    pub resamples: usize,
    pub method: CiMethod,
    pub seed: u64,
    pub parallelism: usize,
}

impl Default for CiConfig {
    fn default() -> Self {
        CiConfig {
            n_keys: DEFAULT_N_KEYS,
            resamples: DEFAULT_RESAMPLES,
            method: CiMethod::Bootstrap,
            seed: 0,
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceWidth {
    pub instance: usize,
    pub scored: usize,
    pub failures: usize,
    pub mean: f64,
    pub bootstrap_width: f64,
    pub normal_width: f64,
    /// Width under the configured method.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub per_instance: Vec<InstanceWidth>,
    /// Most frequent width after rounding to one decimal (ties: smallest).
    pub mode: f64,
    /// Set when some runner calls failed; widths then use the scores that
    /// did come back.
    pub partial: bool,
    pub errors: Vec<String>,
}

/// Most frequent value after rounding to one decimal; ties go to the
/// smallest value.
pub fn rounded_mode(values: &[f64]) -> f64 {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for v in values {
        *counts.entry((v * 10.0).round() as i64).or_default() += 1;
    }
    let mut best: Option<(i64, usize)> = None;
    for (k, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((k, c));
        }
    }
    best.map_or(0.0, |(k, _)| k as f64 / 10.0)
}

/// Re-scores each base instance under `n_keys` fresh encipherments and
/// reports the 95% CI width of its mean accuracy.
///
/// `runner(instance, key_index)` returns a percent score. Calls run on up to
/// `parallelism` threads.
pub fn ci_width_experiment<F>(n_instances: usize, config: &CiConfig, runner: F) -> CiReport
where
    F: Fn(usize, usize) -> Result<f64, String> + Sync,
{
    let jobs = n_instances * config.n_keys;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<f64, String>>>> = Mutex::new(vec![None; jobs]);
    std::thread::scope(|scope| {
        for _ in 0..config.parallelism.max(1).min(jobs.max(1)) {
            scope.spawn(|| loop {
                let job = next.fetch_add(1, Ordering::Relaxed);
                if job >= jobs {
                    break;
                }
                let r = runner(job / config.n_keys, job % config.n_keys);
                results.lock().expect("no panics while held")[job] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("threads joined");

    let mut per_instance = Vec::with_capacity(n_instances);
    let mut errors = Vec::new();
    for inst in 0..n_instances {
        let mut scores = Vec::with_capacity(config.n_keys);
        let mut failures = 0;
        for (k, r) in results[inst * config.n_keys..(inst + 1) * config.n_keys].iter().enumerate() {
            match r {
                Some(Ok(s)) => scores.push(*s),
                Some(Err(e)) => {
                    failures += 1;
                    errors.push(format!("instance {inst} key {k}: {e}"));
                }
                None => unreachable!("every job runs"),
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (inst as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let bootstrap_width = match config.method {
            CiMethod::Bootstrap => bootstrap_ci_width(&scores, config.resamples, &mut rng),
            // Skip the expensive resampling when it is not the reported width.
            CiMethod::Normal => f64::NAN,
        };
        let normal_width = normal_ci_width(&scores);
        per_instance.push(InstanceWidth {
            instance: inst,
            scored: scores.len(),
            failures,
            mean: if scores.is_empty() { f64::NAN } else { mean(&scores) },
            bootstrap_width,
            normal_width,
            width: match config.method {
                CiMethod::Bootstrap => bootstrap_width,
                CiMethod::Normal => normal_width,
            },
        });
    }
    let widths: Vec<f64> = per_instance.iter().map(|w| w.width).filter(|w| w.is_finite()).collect();
    CiReport {
        mode: rounded_mode(&widths),
        partial: !errors.is_empty(),
        per_instance,
        errors,
    }
}

/// French-derived accuracies split by matrix, with their composite.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBreakdown {
    pub french: AccuracyTable,
    pub reversed: AccuracyTable,
    /// Cell-wise mean of the two tables where both have the cell.
    pub composite: AccuracyTable,
}

impl MatrixBreakdown {
    pub fn french_empty(&self) -> bool {
        self.french.is_empty()
    }

    pub fn reversed_empty(&self) -> bool {
        self.reversed.is_empty()
    }
}

pub fn matrix_breakdown(rows: &[ScoredRow]) -> Result<MatrixBreakdown, StatsError> {
    let french_rows: Vec<ScoredRow> = rows.iter().filter(|r| r.matrix.is_french_derived()).cloned().collect();
    let split = aggregate_accuracy(&french_rows, GroupBy::ConditionAndMatrix)?;
    let mut french = AccuracyTable::default();
    let mut reversed = AccuracyTable::default();
    for (k, cell) in &split.cells {
        let pooled = CellKey { matrix: None, ..*k };
        match k.matrix {
            Some(Matrix::French) => french.cells.insert(pooled, *cell),
            Some(Matrix::ReversedFrench) => reversed.cells.insert(pooled, *cell),
            _ => None,
        };
    }
    let mut composite = AccuracyTable::default();
    for (k, f) in &french.cells {
        if let Some(r) = reversed.cells.get(k) {
            composite.cells.insert(
                *k,
                crate::evaluation::Cell {
                    mean: (f.mean + r.mean) / 2.0,
                    n: f.n + r.n,
                },
            );
        }
    }
    Ok(MatrixBreakdown {
        french,
        reversed,
        composite,
    })
}
