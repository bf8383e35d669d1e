//! Resource loading, prompt assembly, test-set expansion and training
//! courses.

pub mod course;
pub mod dictionary;
pub mod grammar;
pub mod prompt;
pub mod resources;
pub mod testset;

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::cipher::CipherError;
use crate::instance::{PromptInstance, Variant};
use crate::keys::KeyStoreError;
use crate::template::TemplateError;

pub use course::{build_training_course, striping, TrainingCourse};
pub use dictionary::{Category, Dictionary, DictionaryEntry, Family, Gender, Pos};
pub use grammar::{
    extract_incidental_bitexts, vary_grammar_excerpt, GrammarBook, GrammarExcerpt, IncidentalBitext, DEFAULT_SYMBOLS,
};
pub use prompt::{assemble_prompt, PromptRequest, COT_ENDING, NO_COT_ENDING};
pub use resources::{CourseSpec, PoolItem, ResourcePack, TestBitext};
pub use testset::{build_test_set, matrix_for, test_base_instances, TestSetBuilder, BASES_PER_PARTITION};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{source_id}:{line}: {reason}")]
    Grammar { source_id: String, line: usize, reason: String },
    #[error("missing resource: {0}")]
    MissingResource(String),
    #[error("section {section:?} has an empty paraphrase bank")]
    EmptyParaphraseBank { section: String },
    #[error("{source_id}, item {item:?}: {reason}")]
    InvalidResource { source_id: String, item: String, reason: String },
    #[error("{what}: expected {expected}, found {found}")]
    CountMismatch { what: String, expected: usize, found: usize },
    #[error("modality {modality} needs a {block} block")]
    MissingBlock { modality: String, block: &'static str },
    #[error("insufficient resources: {0}")]
    InsufficientResources(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}:{line}: {source}", path.display())]
    Json { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Keys(#[from] KeyStoreError),
    #[error(transparent)]
    Cipher(#[from] CipherError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Rows of a tab-separated file with a header line.
pub(crate) fn read_tsv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let csv_err = |source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .from_path(path)
        .map_err(csv_err)?;
    reader.deserialize().collect::<Result<Vec<T>, _>>().map_err(csv_err)
}

/// One JSON value per line; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| DatasetError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|source| DatasetError::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn dataset_file_name(variant: &Variant) -> String {
    format!("{}.jsonl", variant.slug())
}

/// Writes one file per variant into `dir`; returns the paths written.
pub fn write_test_set(dir: &Path, instances: &[PromptInstance]) -> Result<Vec<PathBuf>, DatasetError> {
    let mut paths = Vec::new();
    for variant in Variant::all() {
        let subset: Vec<&PromptInstance> = instances.iter().filter(|p| p.variant() == variant).collect();
        let path = dir.join(dataset_file_name(&variant));
        write_jsonl(&path, &subset)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads back every variant file written by [`write_test_set`].
pub fn read_test_set(dir: &Path) -> Result<Vec<PromptInstance>, DatasetError> {
    let mut out = Vec::new();
    for variant in Variant::all() {
        out.extend(read_jsonl::<PromptInstance>(&dir.join(dataset_file_name(&variant)))?);
    }
    Ok(out)
}
