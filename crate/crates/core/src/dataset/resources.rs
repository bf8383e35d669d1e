//! The resource pack: dictionaries, grammar books, test bitexts, the
//! training pool and course definitions, described by `pack.toml`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dictionary::{Dictionary, Family};
use super::grammar::{GrammarBook, GrammarExcerpt};
use super::{read_jsonl, read_text, read_tsv, DatasetError};
use crate::evaluation::extract_translation;
use crate::instance::{Direction, PartitionId};
use crate::keys::Matrix;
use crate::template::Template;

/// One test pair before expansion into prompt variants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestBitext {
    pub id: String,
    pub partition: PartitionId,
    pub conlang_template: String,
    pub english: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub ad_order_error_reference: Option<String>,
    /// Comma-separated dictionary headwords.
    pub lemmas: String,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|s| !s.trim().is_empty()))
}

fn split_lemmas(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
}

impl TestBitext {
    pub fn lemma_ids(&self) -> Vec<String> {
        split_lemmas(&self.lemmas)
    }
}

/// Chain-of-thought demonstrations for both directions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotDemos {
    pub eng_art: String,
    pub art_eng: String,
}

impl CotDemos {
    pub fn get(&self, direction: Direction) -> &str {
        match direction {
            Direction::EngToArt => &self.eng_art,
            Direction::ArtToEng => &self.art_eng,
        }
    }
}

/// A training pair with its demonstrations, one set per French matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolItem {
    pub id: String,
    pub partition: PartitionId,
    pub conlang_template: String,
    pub english: String,
    pub lemmas: Vec<String>,
    pub cot: BTreeMap<Matrix, CotDemos>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseSpec {
    pub name: String,
    pub partitions: Vec<PartitionId>,
    pub count: usize,
}

impl CourseSpec {
    /// Filename-safe form of the name, e.g. "course-1".
    pub fn slug(&self) -> String {
        self.name
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("-")
    }
}

#[derive(Debug, Deserialize)]
struct Files {
    french_dictionary: PathBuf,
    latin_dictionary: PathBuf,
    french_grammar: PathBuf,
    reversed_french_grammar: PathBuf,
    latin_grammar: PathBuf,
    test_bitexts: PathBuf,
    training_pool: PathBuf,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    files: Files,
    sections: BTreeMap<PartitionId, Vec<String>>,
    #[serde(default, rename = "course")]
    courses: Vec<CourseSpec>,
}

/// Everything the assembler reads, loaded once and validated.
#[derive(Debug, Clone)]
pub struct ResourcePack {
    pub root: PathBuf,
    pub french_dictionary: Dictionary,
    pub latin_dictionary: Dictionary,
    grammars: HashMap<Matrix, GrammarBook>,
    sections: BTreeMap<PartitionId, Vec<String>>,
    pub test_bitexts: Vec<TestBitext>,
    pub training_pool: Vec<PoolItem>,
    pub courses: Vec<CourseSpec>,
}

fn invalid(source_id: &str, item: &str, reason: impl Into<String>) -> DatasetError {
    DatasetError::InvalidResource {
        source_id: source_id.to_string(),
        item: item.to_string(),
        reason: reason.into(),
    }
}

impl ResourcePack {
    /// Loads `dir/pack.toml` and every file it names (paths relative to
    /// `dir`).
    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let manifest_path = dir.join("pack.toml");
        let manifest: Manifest = toml::from_str(&read_text(&manifest_path)?).map_err(|source| DatasetError::Toml {
            path: manifest_path.clone(),
            source,
        })?;
        let f = &manifest.files;
        let book = |path: &Path| -> Result<GrammarBook, DatasetError> {
            let full = dir.join(path);
            GrammarBook::parse(&path.display().to_string(), &read_text(&full)?)
        };
        let grammars = HashMap::from([
            (Matrix::French, book(&f.french_grammar)?),
            (Matrix::ReversedFrench, book(&f.reversed_french_grammar)?),
            (Matrix::Latin, book(&f.latin_grammar)?),
        ]);
        let pack = ResourcePack {
            root: dir.to_path_buf(),
            french_dictionary: Dictionary::load(Family::French, &dir.join(&f.french_dictionary))?,
            latin_dictionary: Dictionary::load(Family::Latin, &dir.join(&f.latin_dictionary))?,
            grammars,
            sections: manifest.sections,
            test_bitexts: read_tsv(&dir.join(&f.test_bitexts))?,
            training_pool: read_jsonl(&dir.join(&f.training_pool))?,
            courses: manifest.courses,
        };
        pack.validate()?;
        Ok(pack)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        for p in PartitionId::ALL {
            for m in Matrix::ALL.into_iter().filter(|&m| p.admits(m)) {
                self.excerpt(m, p)?;
            }
        }
        for b in &self.test_bitexts {
            let src = "test bitexts";
            Template::parse(&b.conlang_template)?;
            if b.ad_order_error_reference.is_some() != b.partition.is_adjective() {
                return Err(invalid(src, &b.id, "adjective-order reference must be present exactly for adjective partitions"));
            }
            if let Some(ad) = &b.ad_order_error_reference {
                Template::parse(ad)?;
            }
            self.check_lemmas(src, &b.id, b.partition, &b.lemma_ids())?;
        }
        for item in &self.training_pool {
            let src = "training pool";
            if item.partition.is_latin() {
                return Err(invalid(src, &item.id, "Latin pairs are not used for training"));
            }
            Template::parse(&item.conlang_template)?;
            self.check_lemmas(src, &item.id, item.partition, &item.lemmas)?;
            for m in [Matrix::French, Matrix::ReversedFrench] {
                let demos = item.cot.get(&m).ok_or_else(|| invalid(src, &item.id, format!("no demonstrations for {m}")))?;
                for d in Direction::ALL {
                    let text = demos.get(d);
                    Template::parse(text)?;
                    if extract_translation(text).is_none() {
                        return Err(invalid(src, &item.id, format!("{m} {d} demonstration has no translation tags")));
                    }
                }
            }
        }
        for c in &self.courses {
            if c.partitions.is_empty() || c.partitions.iter().any(|p| p.is_latin()) {
                return Err(invalid("courses", &c.name, "needs one or more French-derived partitions"));
            }
        }
        Ok(())
    }

    fn check_lemmas(&self, src: &str, id: &str, partition: PartitionId, lemmas: &[String]) -> Result<(), DatasetError> {
        if lemmas.is_empty() {
            return Err(invalid(src, id, "no dictionary lemmas"));
        }
        let dict = self.dictionary_for(partition);
        match lemmas.iter().find(|l| dict.get(l).is_none()) {
            Some(l) => Err(invalid(src, id, format!("lemma {l:?} not in the {} dictionary", dict.family))),
            None => Ok(()),
        }
    }

    pub fn dictionary_for(&self, partition: PartitionId) -> &Dictionary {
        if partition.is_latin() {
            &self.latin_dictionary
        } else {
            &self.french_dictionary
        }
    }

    pub fn grammar(&self, matrix: Matrix) -> &GrammarBook {
        &self.grammars[&matrix]
    }

    /// The grammar sections relevant to `partition`, from the book of
    /// `matrix`.
    pub fn excerpt(&self, matrix: Matrix, partition: PartitionId) -> Result<GrammarExcerpt, DatasetError> {
        let titles = self
            .sections
            .get(&partition)
            .ok_or_else(|| DatasetError::MissingResource(format!("grammar sections for partition {partition}")))?;
        self.grammar(matrix).excerpt(titles)
    }

    pub fn course(&self, name: &str) -> Option<&CourseSpec> {
        self.courses.iter().find(|c| c.name == name || c.slug() == name)
    }

    /// Entry lines for `lemmas`, formatted for `direction`.
    pub fn dictionary_lines(&self, partition: PartitionId, lemmas: &[String], direction: Direction) -> Vec<String> {
        let dict = self.dictionary_for(partition);
        lemmas
            .iter()
            .filter_map(|l| dict.get(l))
            .map(|e| e.render(dict.family, direction))
            .collect()
    }
}
