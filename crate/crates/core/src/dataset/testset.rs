//! Expansion of the test bitexts into the full variant grid.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grammar::extract_incidental_bitexts;
use super::prompt::{assemble_prompt, PromptRequest};
use super::resources::{ResourcePack, TestBitext};
use super::DatasetError;
use crate::instance::{Direction, Modality, PartitionId, PromptInstance, Variant, SYSTEM_PROMPT};
use crate::keys::{derive_seed, KeyRecord, KeyStore, Matrix, Purpose};
use crate::template::Template;

pub const BASES_PER_PARTITION: usize = 100;

/// Matrix of the `index`-th base instance of a partition: Latin partitions
/// are all Latin; French-derived ones put the first half on true French
/// and the second half on reversed French.
pub fn matrix_for(partition: PartitionId, index: usize) -> Matrix {
    if partition.is_latin() {
        Matrix::Latin
    } else if index < BASES_PER_PARTITION / 2 {
        Matrix::French
    } else {
        Matrix::ReversedFrench
    }
}

#[derive(Debug, Clone)]
struct Base<'a> {
    bitext: &'a TestBitext,
    matrix: Matrix,
}

/// Grammar material shared by every prompt of one (matrix, partition).
#[derive(Debug, Clone)]
struct GrammarBlock {
    canonical: String,
    ib_lines: Vec<String>,
}

/// Precomputed state for expanding a resource pack into prompts.
pub struct TestSetBuilder<'a> {
    pack: &'a ResourcePack,
    master_seed: u64,
    bases: Vec<Base<'a>>,
    grammar: HashMap<(Matrix, PartitionId), GrammarBlock>,
}

impl<'a> TestSetBuilder<'a> {
    /// Checks the pack holds exactly 100 bitexts per partition.
    pub fn new(pack: &'a ResourcePack, master_seed: u64) -> Result<Self, DatasetError> {
        let mut bases = Vec::with_capacity(PartitionId::ALL.len() * BASES_PER_PARTITION);
        let mut seen = std::collections::HashSet::new();
        for partition in PartitionId::ALL {
            let rows: Vec<&TestBitext> = pack.test_bitexts.iter().filter(|b| b.partition == partition).collect();
            if rows.len() != BASES_PER_PARTITION {
                return Err(DatasetError::CountMismatch {
                    what: format!("test bitexts in partition {partition}"),
                    expected: BASES_PER_PARTITION,
                    found: rows.len(),
                });
            }
            for (i, bitext) in rows.into_iter().enumerate() {
                if !seen.insert(bitext.id.as_str()) {
                    return Err(DatasetError::InvalidResource {
                        source_id: "test bitexts".into(),
                        item: bitext.id.clone(),
                        reason: "duplicate id".into(),
                    });
                }
                bases.push(Base {
                    bitext,
                    matrix: matrix_for(partition, i),
                });
            }
        }
        let mut grammar = HashMap::new();
        for partition in PartitionId::ALL {
            for matrix in Matrix::ALL.into_iter().filter(|&m| partition.admits(m)) {
                let excerpt = pack.excerpt(matrix, partition)?;
                let block = GrammarBlock {
                    canonical: excerpt.canonical()?,
                    ib_lines: extract_incidental_bitexts(&excerpt).iter().map(|b| b.line()).collect(),
                };
                if block.ib_lines.is_empty() {
                    return Err(DatasetError::InsufficientResources(format!(
                        "grammar excerpt for {matrix} partition {partition} has no example pairs"
                    )));
                }
                grammar.insert((matrix, partition), block);
            }
        }
        Ok(TestSetBuilder {
            pack,
            master_seed,
            bases,
            grammar,
        })
    }

    /// (base instance id, matrix) in partition order.
    pub fn base_instances(&self) -> Vec<(String, Matrix)> {
        self.bases.iter().map(|b| (b.bitext.id.clone(), b.matrix)).collect()
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    /// (id, partition, matrix) of base instance `index`.
    pub fn base(&self, index: usize) -> (&str, PartitionId, Matrix) {
        let b = &self.bases[index];
        (&b.bitext.id, b.bitext.partition, b.matrix)
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    /// The canonical grammar rendering used by W+G prompts.
    pub fn canonical_grammar(&self, matrix: Matrix, partition: PartitionId) -> Option<&str> {
        self.grammar.get(&(matrix, partition)).map(|g| g.canonical.as_str())
    }

    /// Dictionary headwords of a base instance in prompt order. The order is
    /// drawn once per base instance, so every variant lists them alike.
    fn lemma_order(&self, base: &Base<'_>) -> Vec<String> {
        let mut lemmas = base.bitext.lemma_ids();
        let seed = derive_seed(self.master_seed, Purpose::Test, base.matrix, &format!("{}#dictionary", base.bitext.id));
        lemmas.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        lemmas
    }

    /// The unrendered prompt of base instance `index` under `variant`.
    pub fn prompt_template(&self, index: usize, variant: &Variant) -> Result<String, DatasetError> {
        let base = &self.bases[index];
        let partition = base.bitext.partition;
        let lines = self.pack.dictionary_lines(partition, &self.lemma_order(base), variant.direction);
        let block = &self.grammar[&(base.matrix, partition)];
        let segment = match variant.direction {
            Direction::EngToArt => base.bitext.english.as_str(),
            Direction::ArtToEng => base.bitext.conlang_template.as_str(),
        };
        assemble_prompt(&PromptRequest {
            matrix: base.matrix,
            direction: variant.direction,
            modality: variant.modality,
            cot: variant.cot,
            segment,
            dictionary: &lines,
            grammar: (variant.modality == Modality::WG).then_some(block.canonical.as_str()),
            ib_lines: (variant.modality == Modality::WIb).then_some(block.ib_lines.as_slice()),
        })
    }

    fn key_for<'k>(&self, base: &Base<'_>, keys: &'k KeyStore) -> Result<&'k KeyRecord, DatasetError> {
        let id = &base.bitext.id;
        keys.get(id)
            .ok_or_else(|| DatasetError::MissingResource(format!("key for base instance {id}")))
    }

    /// One rendered prompt instance, under the key stored for its base.
    pub fn instance(&self, index: usize, variant: &Variant, keys: &KeyStore) -> Result<PromptInstance, DatasetError> {
        let record = self.key_for(&self.bases[index], keys)?;
        self.instance_with_key(index, variant, record)
    }

    /// One rendered prompt instance under an arbitrary key of the right
    /// matrix; `key_ref` names the record's id.
    pub fn instance_with_key(&self, index: usize, variant: &Variant, record: &KeyRecord) -> Result<PromptInstance, DatasetError> {
        let base = &self.bases[index];
        if record.matrix != base.matrix {
            return Err(DatasetError::InvalidResource {
                source_id: "key".into(),
                item: record.instance_id.clone(),
                reason: format!("key is for {}, instance needs {}", record.matrix, base.matrix),
            });
        }
        let key = &record.key;
        let bitext = base.bitext;
        let prompt = Template::parse(&self.prompt_template(index, variant)?)?.render_with_case(key);
        let (reference, ad_order_error_reference) = match variant.direction {
            Direction::EngToArt => (
                Template::parse(&bitext.conlang_template)?.render(key),
                match &bitext.ad_order_error_reference {
                    Some(t) => Some(Template::parse(t)?.render(key)),
                    None => None,
                },
            ),
            Direction::ArtToEng => (bitext.english.to_lowercase(), None),
        };
        Ok(PromptInstance {
            instance_id: format!("{}__{}", bitext.id, variant.slug()),
            base_instance_id: bitext.id.clone(),
            partition: bitext.partition,
            direction: variant.direction,
            modality: variant.modality,
            cot: variant.cot,
            matrix: base.matrix,
            track: variant.track,
            system_prompt: SYSTEM_PROMPT.to_string(),
            prompt,
            reference,
            ad_order_error_reference,
            key_ref: record.instance_id.clone(),
        })
    }

    /// The whole grid, variant-major, base instances in partition order.
    pub fn build(&self, keys: &KeyStore) -> Result<Vec<PromptInstance>, DatasetError> {
        let variants = Variant::all();
        let n = self.bases.len();
        let out = (0..variants.len() * n)
            .into_par_iter()
            .map(|k| self.instance(k % n, &variants[k / n], keys))
            .collect::<Result<Vec<_>, _>>()?;
        let expected = variants.len() * PartitionId::ALL.len() * BASES_PER_PARTITION;
        if out.len() != expected {
            return Err(DatasetError::CountMismatch {
                what: "prompt instances".into(),
                expected,
                found: out.len(),
            });
        }
        Ok(out)
    }
}

/// (id, matrix) of every test base instance, for key assignment.
pub fn test_base_instances(pack: &ResourcePack) -> Result<Vec<(String, Matrix)>, DatasetError> {
    Ok(TestSetBuilder::new(pack, 0)?.base_instances())
}

/// Expands the pack's 1,400 test bitexts into 33,600 prompts.
pub fn build_test_set(pack: &ResourcePack, keys: &KeyStore, master_seed: u64) -> Result<Vec<PromptInstance>, DatasetError> {
    TestSetBuilder::new(pack, master_seed)?.build(keys)
}
