//! Fine-tuning courses: W+G prompts with fresh keys and freshly varied
//! grammar excerpts, paired with demonstration completions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grammar::DEFAULT_SYMBOLS;
use super::prompt::{assemble_prompt, PromptRequest};
use super::resources::{CourseSpec, PoolItem, ResourcePack};
use super::DatasetError;
use crate::cipher::Inventory;
use crate::instance::{Direction, Modality, PromptInstance, TrainingInstance, Track, SYSTEM_PROMPT};
use crate::keys::{derive_seed, KeyRecord, Matrix, Purpose};
use crate::template::Template;

/// Every eleventh instance takes the minority value of each 1:10 ratio.
const STRIPE: usize = 11;
const ART_ENG_SLOT: usize = 10;
const SPONTANEOUS_SLOT: usize = 5;
/// Attempts at drawing a grammar rendering that differs from the test one.
const MAX_VARIATION_TRIES: u64 = 16;

#[derive(Debug, Clone)]
pub struct TrainingCourse {
    pub spec: CourseSpec,
    pub instances: Vec<TrainingInstance>,
    /// The fresh key of each instance, in instance order.
    pub keys: Vec<KeyRecord>,
    /// Unrendered grammar block of each instance, for leakage checks.
    pub grammar_templates: Vec<String>,
}

/// Direction and reasoning mode of the `i`-th course instance.
pub fn striping(i: usize) -> (Direction, bool) {
    let direction = if i % STRIPE == ART_ENG_SLOT {
        Direction::ArtToEng
    } else {
        Direction::EngToArt
    };
    (direction, i % STRIPE != SPONTANEOUS_SLOT)
}

struct Built {
    instance: TrainingInstance,
    key: KeyRecord,
    grammar: String,
}

fn build_one(spec: &CourseSpec, pool: &[Vec<&PoolItem>], pack: &ResourcePack, seed: u64, i: usize) -> Result<Built, DatasetError> {
    let n = spec.partitions.len();
    let slot = (i / 2) % n;
    let partition = spec.partitions[slot];
    let matrix = if i.is_multiple_of(2) { Matrix::French } else { Matrix::ReversedFrench };
    let (direction, cot) = striping(i);
    let id = format!("{}-{i:05}", spec.slug());

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Purpose::Train, matrix, &format!("{id}#pick")));
    let candidates = &pool[slot];
    let item = candidates[rng.random_range(0..candidates.len())];
    let record = KeyRecord::generate(&id, matrix, Purpose::Train, seed, &Inventory::default())?;
    let key = &record.key;

    let excerpt = pack.excerpt(matrix, partition)?;
    let canonical = excerpt.canonical()?;
    let mut grammar = None;
    for attempt in 0..MAX_VARIATION_TRIES {
        let s = derive_seed(seed, Purpose::Train, matrix, &format!("{id}#grammar{attempt}"));
        let (text, _) = excerpt.vary(s, &DEFAULT_SYMBOLS)?;
        if text != canonical {
            grammar = Some(text);
            break;
        }
    }
    let grammar = grammar.ok_or_else(|| {
        DatasetError::InsufficientResources(format!(
            "grammar for {matrix} partition {partition} admits no rendering besides the test one"
        ))
    })?;

    let mut lemmas = item.lemmas.clone();
    lemmas.shuffle(&mut rng);
    let lines = pack.dictionary_lines(partition, &lemmas, direction);
    let segment = match direction {
        Direction::EngToArt => item.english.as_str(),
        Direction::ArtToEng => item.conlang_template.as_str(),
    };
    let prompt = assemble_prompt(&PromptRequest {
        matrix,
        direction,
        modality: Modality::WG,
        cot,
        segment,
        dictionary: &lines,
        grammar: Some(&grammar),
        ib_lines: None,
    })?;
    let target = match direction {
        Direction::EngToArt => Template::parse(&item.conlang_template)?.render(key),
        Direction::ArtToEng => item.english.to_lowercase(),
    };
    let completion = if cot {
        let demos = item.cot.get(&matrix).ok_or_else(|| {
            DatasetError::MissingResource(format!("{matrix} demonstrations for pool item {}", item.id))
        })?;
        Template::parse(demos.get(direction))?.render_with_case(key)
    } else {
        format!("<translation>{target}</translation>")
    };
    let instance = PromptInstance {
        instance_id: id.clone(),
        base_instance_id: item.id.clone(),
        partition,
        direction,
        modality: Modality::WG,
        cot,
        matrix,
        track: Track::FineTuned,
        system_prompt: SYSTEM_PROMPT.to_string(),
        prompt: Template::parse(&prompt)?.render_with_case(key),
        reference: target,
        ad_order_error_reference: None,
        key_ref: id,
    };
    Ok(Built {
        instance: TrainingInstance { instance, completion },
        key: record,
        grammar,
    })
}

/// Builds `spec.count` training instances. Partitions take turns in pairs
/// (one true-French, one reversed-French instance each).
pub fn build_training_course(spec: &CourseSpec, pack: &ResourcePack, master_seed: u64) -> Result<TrainingCourse, DatasetError> {
    let mut pool = Vec::with_capacity(spec.partitions.len());
    for &p in &spec.partitions {
        if p.is_latin() {
            return Err(DatasetError::InvalidResource {
                source_id: "courses".into(),
                item: spec.name.clone(),
                reason: format!("Latin partition {p} cannot be trained on"),
            });
        }
        let items: Vec<&PoolItem> = pack.training_pool.iter().filter(|it| it.partition == p).collect();
        if items.is_empty() {
            return Err(DatasetError::InsufficientResources(format!("no training pairs for partition {p}")));
        }
        pool.push(items);
    }
    let built = (0..spec.count)
        .into_par_iter()
        .map(|i| build_one(spec, &pool, pack, master_seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut course = TrainingCourse {
        spec: spec.clone(),
        instances: Vec::with_capacity(built.len()),
        keys: Vec::with_capacity(built.len()),
        grammar_templates: Vec::with_capacity(built.len()),
    };
    for b in built {
        course.instances.push(b.instance);
        course.keys.push(b.key);
        course.grammar_templates.push(b.grammar);
    }
    Ok(course)
}
