//! `cryptolang`: key generation, encipherment, dataset assembly, inference,
//! scoring and statistics from one binary.

mod eval;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cryptolang_core::cipher::{decipher_segment, encipher_segment, Inventory};
use cryptolang_core::dataset::{
    build_training_course, test_base_instances, vary_grammar_excerpt, write_jsonl, write_test_set, ResourcePack,
    TestSetBuilder, DEFAULT_SYMBOLS,
};
use cryptolang_core::instance::PartitionId;
use cryptolang_core::keys::{assign_test_keys, load_keys, save_keys, KeyRecord, KeyStore, Matrix, Purpose};
use cryptolang_core::template::Template;

use util::{announce_seed, emit, load_key, write_file};

#[derive(Parser)]
#[command(name = "cryptolang", version, about = "Cipher-based conlang translation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a cipher key.
    GenKey(GenKeyArgs),
    /// Encipher text (or the @…@ spans of a template) under a key.
    Encipher(EncipherArgs),
    /// Decipher text under a key.
    Decipher(DecipherArgs),
    /// Expand the resource pack into the 24 test-set variant files.
    BuildTestset(BuildTestsetArgs),
    /// Build fine-tuning courses.
    BuildCourse(BuildCourseArgs),
    /// Print a grammar excerpt, canonical or randomly varied.
    VaryGrammar(VaryGrammarArgs),
    /// Send dataset prompts to a chat-completion endpoint.
    RunEval(eval::RunEvalArgs),
    /// Score completions and write accuracy tables.
    Score(eval::ScoreArgs),
    /// Effect-size matrices between experimental conditions.
    Stats(eval::StatsArgs),
    /// Confidence-interval width of accuracy across re-encipherments.
    CiExperiment(eval::CiArgs),
}

#[derive(Args)]
struct GenKeyArgs {
    #[arg(long)]
    seed: u64,
    /// french, reversed_french or latin.
    #[arg(long, default_value = "french")]
    matrix: Matrix,
    /// Instance id the key is derived for.
    #[arg(long, default_value = "key")]
    id: String,
    /// Write the key here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KeyArgs {
    /// Key as a JSON file path or inline JSON (a key or a key record).
    #[arg(long, conflicts_with = "keys", required_unless_present = "keys")]
    key: Option<String>,
    /// Key store written by build-testset; use with --id.
    #[arg(long, requires = "id")]
    keys: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
}

#[derive(Args)]
struct EncipherArgs {
    #[command(flatten)]
    key: KeyArgs,
    #[arg(long, conflicts_with = "template", required_unless_present = "template")]
    text: Option<String>,
    /// Render a template: only @…@ spans are enciphered.
    #[arg(long)]
    template: Option<String>,
}

#[derive(Args)]
struct DecipherArgs {
    #[command(flatten)]
    key: KeyArgs,
    #[arg(long)]
    text: String,
}

#[derive(Args)]
struct BuildTestsetArgs {
    /// Directory holding pack.toml.
    #[arg(long, default_value = "resources")]
    resources: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Reuse an existing key store instead of generating keys.
    #[arg(long)]
    keys: Option<PathBuf>,
    /// Worker threads for prompt assembly (default: all cores).
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct BuildCourseArgs {
    #[arg(long, default_value = "resources")]
    resources: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Course name or slug; repeatable. Default: every course in the pack.
    #[arg(long)]
    course: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct VaryGrammarArgs {
    #[arg(long, default_value = "resources")]
    resources: PathBuf,
    #[arg(long)]
    matrix: Matrix,
    #[arg(long)]
    partition: PartitionId,
    #[arg(long, required_unless_present = "canonical")]
    seed: Option<u64>,
    /// Print the fixed rendering used in test prompts.
    #[arg(long)]
    canonical: bool,
    /// Marker symbols to draw from.
    #[arg(long)]
    symbols: Option<String>,
}

fn resolve_key(args: &KeyArgs) -> Result<KeyRecord> {
    match (&args.key, &args.keys, &args.id) {
        (Some(k), _, _) => load_key(k),
        (None, Some(path), Some(id)) => {
            let store = KeyStore::new(load_keys(path).with_context(|| format!("reading {}", path.display()))?)?;
            store.get(id).cloned().with_context(|| format!("no key for {id:?} in {}", path.display()))
        }
        _ => bail!("give --key, or --keys with --id"),
    }
}

fn set_parallelism(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--parallelism must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load_pack(dir: &std::path::Path) -> Result<ResourcePack> {
    ResourcePack::load(dir).with_context(|| format!("loading resource pack from {}", dir.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenKey(a) => {
            announce_seed(a.seed);
            let record = KeyRecord::generate(&a.id, a.matrix, Purpose::Test, a.seed, &Inventory::default())?;
            let json = record.key.to_json() + "\n";
            match &a.out {
                Some(path) => write_file(path, &json)?,
                None => emit(&json)?,
            }
        }
        Command::Encipher(a) => {
            let record = resolve_key(&a.key)?;
            let out = match (&a.text, &a.template) {
                (Some(text), _) => encipher_segment(&record.key, text),
                (None, Some(t)) => Template::parse(t)?.render(&record.key),
                (None, None) => unreachable!("clap requires one"),
            };
            emit(&(out + "\n"))?;
        }
        Command::Decipher(a) => {
            let record = resolve_key(&a.key)?;
            emit(&(decipher_segment(&record.key, &a.text)? + "\n"))?;
        }
        Command::BuildTestset(a) => {
            announce_seed(a.seed);
            set_parallelism(a.parallelism)?;
            let pack = load_pack(&a.resources)?;
            let records = match &a.keys {
                Some(path) => load_keys(path).with_context(|| format!("reading {}", path.display()))?,
                None => assign_test_keys(&test_base_instances(&pack)?, a.seed, &Inventory::default())?,
            };
            let builder = TestSetBuilder::new(&pack, a.seed)?;
            let instances = builder.build(&KeyStore::new(records.clone())?)?;
            std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            if a.keys.is_none() {
                save_keys(&a.out.join("keys.jsonl"), &records)?;
            }
            write_test_set(&a.out, &instances)?;
            let latin = builder.base_instances().iter().filter(|(_, m)| *m == Matrix::Latin).count();
            println!(
                "{} base instances ({} Latin, {} French-derived), {} instances written to {}",
                builder.len(),
                latin,
                builder.len() - latin,
                instances.len(),
                a.out.display()
            );
        }
        Command::BuildCourse(a) => {
            announce_seed(a.seed);
            set_parallelism(a.parallelism)?;
            let pack = load_pack(&a.resources)?;
            let specs = if a.course.is_empty() {
                pack.courses.clone()
            } else {
                a.course
                    .iter()
                    .map(|name| pack.course(name).cloned().with_context(|| format!("no course named {name:?}")))
                    .collect::<Result<Vec<_>>>()?
            };
            for spec in &specs {
                let course = build_training_course(spec, &pack, a.seed)?;
                let slug = spec.slug();
                write_jsonl(&a.out.join(format!("{slug}.jsonl")), &course.instances)?;
                save_keys(&a.out.join(format!("{slug}.keys.jsonl")), &course.keys)?;
                println!("{}: {} instances", spec.name, course.instances.len());
            }
        }
        Command::VaryGrammar(a) => {
            let pack = load_pack(&a.resources)?;
            if !a.partition.admits(a.matrix) {
                bail!("partition {} is not built on {}", a.partition, a.matrix);
            }
            let excerpt = pack.excerpt(a.matrix, a.partition)?;
            let text = match a.seed {
                Some(seed) if !a.canonical => {
                    announce_seed(seed);
                    let symbols: Vec<char> = match &a.symbols {
                        Some(s) => s.chars().collect(),
                        None => DEFAULT_SYMBOLS.to_vec(),
                    };
                    vary_grammar_excerpt(&excerpt, seed, &symbols)?
                }
                _ => excerpt.canonical()?,
            };
            emit(&(text + "\n"))?;
        }
        Command::RunEval(a) => eval::run_eval(a)?,
        Command::Score(a) => eval::score(a)?,
        Command::Stats(a) => eval::stats(a)?,
        Command::CiExperiment(a) => eval::ci_experiment(a)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors exit with 2 from inside `parse`.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
