//! Bilingual dictionary templates and their prompt renderings.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::instance::Direction;
use crate::template::Template;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Adjective,
    Verb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Masc,
    Fem,
    Neuter,
    None,
}

/// How a lemma relates to the grammar book: illustrated in an example
/// pair (A), mentioned only in explanations (B), or absent (C).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    A,
    B,
    C,
}

/// Which dictionary a lemma belongs to; drives entry formatting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    French,
    Latin,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::French => "french",
            Family::Latin => "latin",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    /// Cleartext headword, unique within a dictionary.
    pub id: String,
    pub english_lemma: String,
    pub conlang_template: String,
    pub pos: Pos,
    pub gender: Gender,
    pub category: Category,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub paradigm: Option<String>,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|s| !s.trim().is_empty()))
}

impl DictionaryEntry {
    fn validate(&self, family: Family) -> Result<(), String> {
        let t = Template::parse(&self.conlang_template).map_err(|e| e.to_string())?;
        if t.encrypt_spans().is_empty() {
            return Err("conlang side has no encrypt span".into());
        }
        if family == Family::Latin && matches!(self.pos, Pos::Noun | Pos::Verb) && self.paradigm.is_none() {
            return Err("Latin nouns and verbs need a paradigm label".into());
        }
        if self.pos == Pos::Noun && self.gender == Gender::None {
            return Err("nouns need a gender".into());
        }
        if family == Family::French && self.gender == Gender::Neuter {
            return Err("French has no neuter nouns".into());
        }
        Ok(())
    }

    fn french_tag(&self) -> String {
        match self.pos {
            Pos::Noun => format!("{} n.", if self.gender == Gender::Fem { "fem." } else { "masc." }),
            Pos::Adjective => "adj.".to_string(),
            Pos::Verb => format!("{} v.", self.paradigm.as_deref().unwrap_or("")).trim_start().to_string(),
        }
    }

    fn latin_gender(&self) -> &'static str {
        match self.gender {
            Gender::Masc => " m.",
            Gender::Fem => " f.",
            Gender::Neuter => " n.",
            Gender::None => "",
        }
    }

    fn latin_tag(&self) -> String {
        match self.pos {
            Pos::Adjective => "adj.".to_string(),
            _ => self.paradigm.clone().unwrap_or_default(),
        }
    }

    fn english_display(&self) -> String {
        if self.pos == Pos::Verb {
            format!("to {}", self.english_lemma)
        } else {
            self.english_lemma.clone()
        }
    }

    /// The entry as one template line of a prompt's dictionary block.
    pub fn render(&self, family: Family, direction: Direction) -> String {
        let c = &self.conlang_template;
        match (family, direction) {
            (Family::French, Direction::EngToArt) => match self.pos {
                Pos::Verb => format!("{} (v.) : {c} ({})", self.english_lemma, self.french_tag()),
                _ => format!("{} : {c} ({})", self.english_lemma, self.french_tag()),
            },
            (Family::French, Direction::ArtToEng) => format!("{c} ({}): {}", self.french_tag(), self.english_display()),
            (Family::Latin, Direction::EngToArt) => match self.pos {
                Pos::Verb => format!("{} (v.) : {c} ({})", self.english_lemma, self.latin_tag()),
                _ => format!("{} : {c}{} ({})", self.english_lemma, self.latin_gender(), self.latin_tag()),
            },
            (Family::Latin, Direction::ArtToEng) => {
                format!("{c}{} ({}) : {}", self.latin_gender(), self.latin_tag(), self.english_display())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    pub family: Family,
    entries: Vec<DictionaryEntry>,
    index: HashMap<String, usize>,
}

impl Dictionary {
    pub fn new(family: Family, entries: Vec<DictionaryEntry>) -> Result<Self, DatasetError> {
        let mut index = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            e.validate(family).map_err(|reason| DatasetError::InvalidResource {
                source_id: format!("{family} dictionary"),
                item: e.id.clone(),
                reason,
            })?;
            if index.insert(e.id.clone(), i).is_some() {
                return Err(DatasetError::InvalidResource {
                    source_id: format!("{family} dictionary"),
                    item: e.id.clone(),
                    reason: "duplicate headword".into(),
                });
            }
        }
        Ok(Dictionary { family, entries, index })
    }

    /// Reads a tab-separated table with a header row.
    pub fn load(family: Family, path: &Path) -> Result<Self, DatasetError> {
        let entries = super::read_tsv(path)?;
        Self::new(family, entries)
    }

    pub fn get(&self, id: &str) -> Option<&DictionaryEntry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
