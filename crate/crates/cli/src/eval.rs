//! Inference, scoring and statistics subcommands.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use cryptolang_core::cipher::Inventory;
use cryptolang_core::dataset::{read_jsonl, read_test_set, write_jsonl, ResourcePack, TestSetBuilder};
use cryptolang_core::evaluation::{
    aggregate_accuracy, column_label, judge_instance, join_judgments, GroupBy, Judgment, COLUMNS,
};
use cryptolang_core::instance::{max_tokens_for, PartitionId, PromptInstance, Track, Variant};
use cryptolang_core::keys::{KeyRecord, Matrix, Purpose};
use cryptolang_core::stats::{ci_width_experiment, effect_matrix, matrix_breakdown, CiConfig, CiMethod};
use cryptolang_gateway::{
    replay_log, run_batch_blocking, GatewayConfig, InferenceRequest, InferenceResult, RetryPolicy, DEFAULT_TEMPERATURE,
    ENV_MODEL,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::util::{announce_seed, write_file};

pub const RAW_LOG: &str = "raw_log.jsonl";
pub const RESULTS: &str = "results.jsonl";
pub const JUDGMENTS: &str = "judgments.jsonl";

#[derive(Args)]
pub struct GatewayArgs {
    /// Concurrent requests.
    #[arg(long, default_value_t = 8)]
    parallelism: usize,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    /// Model id; overrides CRYPTOLANG_MODEL.
    #[arg(long)]
    model: Option<String>,
    /// Model id for fine_tuned-track prompts (default: --model).
    #[arg(long)]
    fine_tuned_model: Option<String>,
    /// Attempts per request, including the first.
    #[arg(long, default_value_t = 5)]
    max_attempts: u32,
}

impl GatewayArgs {
    fn config(&self) -> Result<GatewayConfig> {
        let config = GatewayConfig::from_lookup(|k| match (&self.model, k) {
            (Some(m), ENV_MODEL) => Some(m.clone()),
            _ => std::env::var(k).ok(),
        })?;
        Ok(config)
    }

    fn retry(&self) -> Result<RetryPolicy> {
        if self.max_attempts == 0 {
            bail!("--max-attempts must be at least 1");
        }
        Ok(RetryPolicy {
            max_attempts: self.max_attempts,
            ..RetryPolicy::default()
        })
    }

    fn request(&self, config: &GatewayConfig, id: String, instance: &PromptInstance) -> InferenceRequest {
        let model = match (instance.track, &self.fine_tuned_model) {
            (Track::FineTuned, Some(m)) => m.clone(),
            _ => config.model.clone(),
        };
        InferenceRequest {
            instance_id: id,
            model_id: model,
            system_prompt: instance.system_prompt.clone(),
            user_prompt: instance.prompt.clone(),
            temperature: self.temperature,
            max_tokens: max_tokens_for(instance.modality, instance.cot, instance.partition),
        }
    }
}

#[derive(Args)]
pub struct RunEvalArgs {
    /// Directory written by build-testset.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Only these variant slugs (repeatable), e.g. baseline__eng-art__w_g__cot.
    #[arg(long)]
    variant: Vec<String>,
    /// Only the first N instances of each partition and matrix in each
    /// variant.
    #[arg(long)]
    limit: Option<usize>,
    #[command(flatten)]
    gateway: GatewayArgs,
}

fn select(instances: Vec<PromptInstance>, variants: &[String], limit: Option<usize>) -> Result<Vec<PromptInstance>> {
    let known: Vec<String> = Variant::all().iter().map(Variant::slug).collect();
    for v in variants {
        if !known.contains(v) {
            bail!("unknown variant {v:?}");
        }
    }
    let mut taken: HashMap<(String, PartitionId, Matrix), usize> = HashMap::new();
    Ok(instances
        .into_iter()
        .filter(|i| {
            let slug = i.variant().slug();
            if !variants.is_empty() && !variants.contains(&slug) {
                return false;
            }
            let n = taken.entry((slug, i.partition, i.matrix)).or_default();
            *n += 1;
            limit.is_none_or(|l| *n <= l)
        })
        .collect())
}

pub fn run_eval(a: RunEvalArgs) -> Result<()> {
    let config = a.gateway.config()?;
    let retry = a.gateway.retry()?;
    let instances = read_test_set(&a.dataset).with_context(|| format!("reading dataset {}", a.dataset.display()))?;
    let instances = select(instances, &a.variant, a.limit)?;
    let requests: Vec<InferenceRequest> = instances
        .iter()
        .map(|i| a.gateway.request(&config, i.instance_id.clone(), i))
        .collect();
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let results = run_batch_blocking(&config, &requests, a.gateway.parallelism, &retry, &a.out.join(RAW_LOG))?;
    write_jsonl(&a.out.join(RESULTS), &results)?;
    let failed = results.iter().filter(|r| !r.is_ok()).count();
    println!("{} requests, {} failed; results in {}", results.len(), failed, a.out.display());
    Ok(())
}

#[derive(Args)]
pub struct ScoreArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// results.jsonl written by run-eval.
    #[arg(long, conflicts_with = "log", required_unless_present = "log")]
    results: Option<PathBuf>,
    /// Rebuild results from a raw response log instead.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Judges every successful result. Failed requests have no completion to
/// judge and are left out, with a count on stderr.
pub fn judge_results(instances: &[PromptInstance], results: &[InferenceResult]) -> Result<Vec<Judgment>> {
    let by_id: HashMap<&str, &PromptInstance> = instances.iter().map(|i| (i.instance_id.as_str(), i)).collect();
    let mut judgments = Vec::with_capacity(results.len());
    let mut failed = 0;
    for r in results {
        let instance = by_id
            .get(r.instance_id.as_str())
            .with_context(|| format!("result {:?} matches no dataset instance", r.instance_id))?;
        match &r.completion {
            Some(c) => judgments.push(judge_instance(instance, c)),
            None => failed += 1,
        }
    }
    if failed > 0 {
        eprintln!("warning: {failed} failed requests left unscored");
    }
    Ok(judgments)
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let instances = read_test_set(&a.dataset).with_context(|| format!("reading dataset {}", a.dataset.display()))?;
    let results: Vec<InferenceResult> = match (&a.results, &a.log) {
        (Some(path), _) => read_jsonl(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(path)) => replay_log(path)?,
        (None, None) => unreachable!("clap requires one"),
    };
    let judgments = judge_results(&instances, &results)?;
    let rows = join_judgments(&instances, &judgments)?;
    write_jsonl(&a.out.join(JUDGMENTS), &judgments)?;

    let table = aggregate_accuracy(&rows, GroupBy::Condition)?;
    for (track, direction, matrix) in table.slices() {
        debug_assert!(matrix.is_none());
        let path = a.out.join("accuracy").join(format!("{track}__{direction}.tsv"));
        write_file(&path, &table.render_tsv(track, direction, None))?;
    }
    let split = matrix_breakdown(&rows)?;
    for (name, t) in [
        ("french", &split.french),
        ("reversed_french", &split.reversed),
        ("composite", &split.composite),
    ] {
        for (track, direction, _) in t.slices() {
            let path = a.out.join("french_split").join(format!("{track}__{direction}__{name}.tsv"));
            write_file(&path, &t.render_tsv(track, direction, None))?;
        }
    }
    let mean = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| f64::from(r.score)).sum::<f64>() / rows.len() as f64
    };
    println!("{} judgments, overall mean {mean:.1}; tables in {}", judgments.len(), a.out.display());
    Ok(())
}

#[derive(Args)]
pub struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// judgments.jsonl written by score.
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Per direction: Cohen's d between every pair of (track, modality, CoT)
/// conditions, over the base instances scored under all of them.
pub fn stats(a: StatsArgs) -> Result<()> {
    let instances = read_test_set(&a.dataset).with_context(|| format!("reading dataset {}", a.dataset.display()))?;
    let judgments: Vec<Judgment> =
        read_jsonl(&a.judgments).with_context(|| format!("reading {}", a.judgments.display()))?;
    let by_id: HashMap<&str, &PromptInstance> = instances.iter().map(|i| (i.instance_id.as_str(), i)).collect();

    // base instance -> score, per condition, per direction
    type Scores = BTreeMap<String, f64>;
    let mut grouped: BTreeMap<String, BTreeMap<(Track, usize), Scores>> = BTreeMap::new();
    for j in &judgments {
        let inst = by_id
            .get(j.instance_id.as_str())
            .with_context(|| format!("judgment {:?} matches no dataset instance", j.instance_id))?;
        let column = COLUMNS
            .iter()
            .position(|&(m, c)| m == inst.modality && c == inst.cot)
            .expect("every modality/CoT pair is a column");
        grouped
            .entry(inst.direction.to_string())
            .or_default()
            .entry((inst.track, column))
            .or_default()
            .insert(inst.base_instance_id.clone(), f64::from(j.score));
    }
    if grouped.is_empty() {
        bail!("no judgments to compare");
    }
    for (direction, conditions) in grouped {
        let named: BTreeMap<String, Scores> = conditions
            .into_iter()
            .map(|((track, col), scores)| {
                let (m, cot) = COLUMNS[col];
                (format!("{track} {}", column_label(m, cot)), scores)
            })
            .collect();
        // Only base instances scored under every condition are comparable.
        let mut common: Vec<&String> = named.values().next().expect("non-empty").keys().collect();
        common.retain(|b| named.values().all(|s| s.contains_key(*b)));
        if common.len() < 2 {
            eprintln!("warning: {direction}: fewer than two base instances shared by all conditions; skipped");
            continue;
        }
        let columns: Vec<(String, Vec<f64>)> = named
            .iter()
            .map(|(name, s)| (name.clone(), common.iter().map(|b| s[*b]).collect()))
            .collect();
        let report = effect_matrix(&columns)?;
        write_file(&a.out.join(format!("effects__{direction}.tsv")), &report.to_tsv())?;
        write_file(&a.out.join(format!("effects__{direction}.grid.tsv")), &report.to_grid())?;
        println!(
            "{direction}: {} conditions over {} shared base instances",
            report.conditions.len(),
            common.len()
        );
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Runner {
    /// Independent 0/100 scores with a fixed success rate; no network.
    Bernoulli,
    /// Fresh keys rendered into real prompts and sent to the endpoint.
    Gateway,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Bootstrap,
    Normal,
}

#[derive(Args)]
pub struct CiArgs {
    #[arg(long, value_enum, default_value = "bernoulli")]
    runner: Runner,
    #[arg(long)]
    seed: u64,
    /// Base instances to re-encipher.
    #[arg(long, default_value_t = 20)]
    instances: usize,
    /// Fresh keys per base instance.
    #[arg(long, default_value_t = cryptolang_core::stats::DEFAULT_N_KEYS)]
    n_keys: usize,
    #[arg(long, default_value_t = cryptolang_core::stats::DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, value_enum, default_value = "bootstrap")]
    method: Method,
    /// Success rate of the bernoulli runner, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    accuracy: f64,
    /// Resource pack (gateway runner).
    #[arg(long, default_value = "resources")]
    resources: PathBuf,
    /// Prompt variant (gateway runner).
    #[arg(long, default_value = "baseline__eng-art__w_g__cot")]
    variant: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    gateway: GatewayArgs,
}

fn bernoulli_score(seed: u64, instance: usize, key: usize, p: f64) -> f64 {
    let stream = ((instance as u64) << 32) ^ key as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    if rng.random_bool(p) {
        100.0
    } else {
        0.0
    }
}

/// Requests for every (base instance, fresh key) pair, in job order.
fn ci_requests(
    a: &CiArgs,
    config: &GatewayConfig,
    builder: &TestSetBuilder<'_>,
    picked: &[usize],
    variant: &Variant,
) -> Result<Vec<(InferenceRequest, PromptInstance)>> {
    let inventory = Inventory::default();
    let mut out = Vec::with_capacity(picked.len() * a.n_keys);
    for &index in picked {
        let (base_id, _, matrix) = builder.base(index);
        for k in 0..a.n_keys {
            let id = format!("{base_id}#ci{k}");
            let record = KeyRecord::generate(&id, matrix, Purpose::Test, a.seed, &inventory)?;
            let instance = builder.instance_with_key(index, variant, &record)?;
            out.push((a.gateway.request(config, id, &instance), instance));
        }
    }
    Ok(out)
}

pub fn ci_experiment(a: CiArgs) -> Result<()> {
    announce_seed(a.seed);
    if a.n_keys == 0 || a.instances == 0 {
        bail!("--instances and --n-keys must be positive");
    }
    let config = CiConfig {
        n_keys: a.n_keys,
        resamples: a.resamples,
        method: match a.method {
            Method::Bootstrap => CiMethod::Bootstrap,
            Method::Normal => CiMethod::Normal,
        },
        seed: a.seed,
        parallelism: a.gateway.parallelism.max(1),
    };
    let (labels, report) = match a.runner {
        Runner::Bernoulli => {
            if !(0.0..=1.0).contains(&a.accuracy) {
                bail!("--accuracy must lie in [0, 1]");
            }
            let labels: Vec<String> = (0..a.instances).map(|i| format!("synthetic-{i}")).collect();
            let report = ci_width_experiment(a.instances, &config, |i, k| Ok(bernoulli_score(a.seed, i, k, a.accuracy)));
            (labels, report)
        }
        Runner::Gateway => {
            let variant = Variant::all()
                .into_iter()
                .find(|v| v.slug() == a.variant)
                .with_context(|| format!("unknown variant {:?}", a.variant))?;
            let gw = a.gateway.config()?;
            let retry = a.gateway.retry()?;
            let pack = ResourcePack::load(&a.resources)
                .with_context(|| format!("loading resource pack from {}", a.resources.display()))?;
            let builder = TestSetBuilder::new(&pack, a.seed)?;
            if a.instances > builder.len() {
                bail!("--instances {} exceeds the {} base instances", a.instances, builder.len());
            }
            let mut order: Vec<usize> = (0..builder.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(a.seed));
            let picked = &order[..a.instances];
            let jobs = ci_requests(&a, &gw, &builder, picked, &variant)?;
            let requests: Vec<InferenceRequest> = jobs.iter().map(|(r, _)| r.clone()).collect();
            std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            let results = run_batch_blocking(&gw, &requests, a.gateway.parallelism, &retry, &a.out.join(RAW_LOG))?;
            write_jsonl(&a.out.join(RESULTS), &results)?;
            let labels = picked.iter().map(|&i| builder.base(i).0.to_string()).collect();
            let report = ci_width_experiment(a.instances, &config, |i, k| {
                let job = i * a.n_keys + k;
                let r = &results[job];
                match &r.completion {
                    Some(c) => Ok(f64::from(judge_instance(&jobs[job].1, c).score)),
                    None => Err(r.error.clone().unwrap_or_default()),
                }
            });
            (labels, report)
        }
    };

    let mut tsv = String::from("instance\tbase_instance\tscored\tfailures\tmean\tbootstrap_width\tnormal_width\twidth\n");
    for w in &report.per_instance {
        writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            w.instance, labels[w.instance], w.scored, w.failures, w.mean, w.bootstrap_width, w.normal_width, w.width
        )
        .unwrap();
    }
    write_file(&a.out.join("ci_widths.tsv"), &tsv)?;
    for e in report.errors.iter().take(10) {
        eprintln!("warning: {e}");
    }
    println!(
        "mode of CI widths: {:.1} over {} instances x {} keys{}",
        report.mode,
        report.per_instance.len(),
        a.n_keys,
        if report.partial { " (partial: some runs failed)" } else { "" }
    );
    Ok(())
}
