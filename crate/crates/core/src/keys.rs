//! Key generation, assignment and persistence.
//!
//! Test instances share one key across all their variants; training
//! instances each get a fresh key. Every key's seed is derived by hashing
//! the master seed together with the instance id, so assignments do not
//! depend on generation order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cipher::{generate_key, CipherError, CipherKey, Inventory, Scheme};

const FORMAT_TAG: &str = "cryptolang-keys";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum KeyStoreError {
    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),
    #[error("record {id:?}: {reason}")]
    InconsistentRecord { id: String, reason: String },
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("malformed key file at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// The natural language a conlang is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matrix {
    French,
    ReversedFrench,
    Latin,
}

impl Matrix {
    pub const ALL: [Matrix; 3] = [Matrix::French, Matrix::ReversedFrench, Matrix::Latin];

    pub fn scheme(self) -> Scheme {
        match self {
            Matrix::ReversedFrench => Scheme::SubstitutionWithReversal,
            Matrix::French | Matrix::Latin => Scheme::SubstitutionOnly,
        }
    }

    pub fn is_french_derived(self) -> bool {
        matches!(self, Matrix::French | Matrix::ReversedFrench)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Matrix::French => "french",
            Matrix::ReversedFrench => "reversed_french",
            Matrix::Latin => "latin",
        }
    }

    fn tag(self) -> u8 {
        match self {
            Matrix::French => 0,
            Matrix::ReversedFrench => 1,
            Matrix::Latin => 2,
        }
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Matrix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Matrix::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown matrix {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Train,
    Test,
}

impl Purpose {
    fn tag(self) -> u8 {
        match self {
            Purpose::Train => b'r',
            Purpose::Test => b't',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRecord {
    pub instance_id: String,
    pub matrix: Matrix,
    pub purpose: Purpose,
    pub key: CipherKey,
}

impl KeyRecord {
    /// Generates the record for `instance_id` under `master_seed`.
    pub fn generate(
        instance_id: &str,
        matrix: Matrix,
        purpose: Purpose,
        master_seed: u64,
        inventory: &Inventory,
    ) -> Result<Self, CipherError> {
        let seed = derive_seed(master_seed, purpose, matrix, instance_id);
        Ok(KeyRecord {
            instance_id: instance_id.to_string(),
            matrix,
            purpose,
            key: generate_key(inventory, matrix.scheme(), seed)?,
        })
    }

    fn check(&self) -> Result<(), KeyStoreError> {
        if self.key.scheme() != self.matrix.scheme() {
            return Err(KeyStoreError::InconsistentRecord {
                id: self.instance_id.clone(),
                reason: format!("matrix {} requires scheme {}, key has {}", self.matrix, self.matrix.scheme(), self.key.scheme()),
            });
        }
        Ok(())
    }
}

/// Per-instance seed: the first eight bytes (little endian) of
/// SHA-256(master_seed LE ‖ purpose tag ‖ matrix tag ‖ instance_id).
pub fn derive_seed(master_seed: u64, purpose: Purpose, matrix: Matrix, instance_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update([purpose.tag(), matrix.tag()]);
    hasher.update(instance_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// One key per test base instance.
pub fn assign_test_keys(
    base_instances: &[(String, Matrix)],
    master_seed: u64,
    inventory: &Inventory,
) -> Result<Vec<KeyRecord>, KeyStoreError> {
    let mut seen = HashSet::new();
    for (id, _) in base_instances {
        if !seen.insert(id.as_str()) {
            return Err(KeyStoreError::DuplicateId(id.clone()));
        }
    }
    base_instances
        .iter()
        .map(|(id, matrix)| Ok(KeyRecord::generate(id, *matrix, Purpose::Test, master_seed, inventory)?))
        .collect()
}

pub fn train_instance_id(matrix: Matrix, index: usize) -> String {
    format!("train-{matrix}-{index:06}")
}

/// One fresh key per training instance, ids from [`train_instance_id`].
pub fn assign_train_keys(
    count: usize,
    matrix: Matrix,
    master_seed: u64,
    inventory: &Inventory,
) -> Result<Vec<KeyRecord>, KeyStoreError> {
    (0..count)
        .map(|i| {
            let id = train_instance_id(matrix, i);
            Ok(KeyRecord::generate(&id, matrix, Purpose::Train, master_seed, inventory)?)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    count: usize,
}

/// Writes a header line followed by one JSON record per line.
pub fn save_keys(path: &Path, records: &[KeyRecord]) -> Result<(), KeyStoreError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_keys(&mut out, records)?;
    out.flush()?;
    Ok(())
}

pub fn write_keys(out: &mut impl Write, records: &[KeyRecord]) -> Result<(), KeyStoreError> {
    let header = Header {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        count: records.len(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"))?;
    }
    Ok(())
}

pub fn load_keys(path: &Path) -> Result<Vec<KeyRecord>, KeyStoreError> {
    read_keys(BufReader::new(File::open(path)?))
}

pub fn read_keys(input: impl BufRead) -> Result<Vec<KeyRecord>, KeyStoreError> {
    let mut lines = input.lines();
    let malformed = |line, reason: String| KeyStoreError::Malformed { line, reason };
    let header_line = lines.next().ok_or_else(|| malformed(1, "missing header".into()))??;
    let header: Header = serde_json::from_str(&header_line).map_err(|e| malformed(1, e.to_string()))?;
    if header.format != FORMAT_TAG || header.version != FORMAT_VERSION {
        return Err(malformed(1, format!("unsupported format {} v{}", header.format, header.version)));
    }
    let mut records = Vec::with_capacity(header.count);
    let mut seen = HashSet::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let record: KeyRecord = serde_json::from_str(&line).map_err(|e| malformed(lineno, e.to_string()))?;
        record.check()?;
        if !seen.insert(record.instance_id.clone()) {
            return Err(KeyStoreError::DuplicateId(record.instance_id));
        }
        records.push(record);
    }
    if records.len() != header.count {
        return Err(malformed(
            records.len() + 2,
            format!("header announces {} records, found {}", header.count, records.len()),
        ));
    }
    Ok(records)
}

/// Read-only lookup of key records by instance id.
#[derive(Debug, Clone, Default)]
pub struct KeyStore {
    records: Vec<KeyRecord>,
    index: HashMap<String, usize>,
}

impl KeyStore {
    pub fn new(records: Vec<KeyRecord>) -> Result<Self, KeyStoreError> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            r.check()?;
            if index.insert(r.instance_id.clone(), i).is_some() {
                return Err(KeyStoreError::DuplicateId(r.instance_id.clone()));
            }
        }
        Ok(KeyStore { records, index })
    }

    pub fn get(&self, instance_id: &str) -> Option<&KeyRecord> {
        self.index.get(instance_id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[KeyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<(String, Matrix)> {
        (0..n).map(|i| (format!("b{i}"), Matrix::ALL[i % 3])).collect()
    }

    #[test]
    fn scheme_follows_matrix() {
        let inv = Inventory::default();
        for r in assign_test_keys(&ids(9), 1, &inv).unwrap() {
            assert_eq!(r.key.scheme(), r.matrix.scheme());
        }
        assert_eq!(Matrix::ReversedFrench.scheme(), Scheme::SubstitutionWithReversal);
        assert_eq!(Matrix::Latin.scheme(), Scheme::SubstitutionOnly);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dup = vec![("x".to_string(), Matrix::French), ("x".to_string(), Matrix::Latin)];
        assert!(matches!(
            assign_test_keys(&dup, 0, &Inventory::default()),
            Err(KeyStoreError::DuplicateId(id)) if id == "x"
        ));
    }

    #[test]
    fn assignment_is_order_independent() {
        let inv = Inventory::default();
        let forward = assign_test_keys(&ids(6), 42, &inv).unwrap();
        let mut rev_ids = ids(6);
        rev_ids.reverse();
        let mut backward = assign_test_keys(&rev_ids, 42, &inv).unwrap();
        backward.reverse();
        assert_eq!(forward, backward);
    }

    #[test]
    fn train_keys() {
        let inv = Inventory::default();
        assert!(assign_train_keys(0, Matrix::French, 3, &inv).unwrap().is_empty());
        let a = assign_train_keys(276, Matrix::French, 3, &inv).unwrap();
        assert_eq!(a.len(), 276);
        assert_eq!(a, assign_train_keys(276, Matrix::French, 3, &inv).unwrap());
        assert!(a.iter().all(|r| r.purpose == Purpose::Train));
    }

    #[test]
    fn purposes_do_not_share_seeds() {
        assert_ne!(
            derive_seed(1, Purpose::Train, Matrix::French, "a"),
            derive_seed(1, Purpose::Test, Matrix::French, "a")
        );
        assert_ne!(
            derive_seed(1, Purpose::Test, Matrix::French, "a"),
            derive_seed(2, Purpose::Test, Matrix::French, "a")
        );
    }

    #[test]
    fn empty_round_trip() {
        let mut buf = Vec::new();
        write_keys(&mut buf, &[]).unwrap();
        assert!(read_keys(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn truncation_is_detected() {
        let recs = assign_test_keys(&ids(5), 7, &Inventory::default()).unwrap();
        let mut buf = Vec::new();
        write_keys(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // Drop the last full line.
        let cut: Vec<&str> = text.lines().collect();
        let short = cut[..cut.len() - 1].join("\n");
        assert!(matches!(read_keys(short.as_bytes()), Err(KeyStoreError::Malformed { .. })));
        // Cut mid-record.
        let mid = &text[..text.len() - 40];
        assert!(matches!(read_keys(mid.as_bytes()), Err(KeyStoreError::Malformed { .. })));
        assert!(matches!(read_keys("".as_bytes()), Err(KeyStoreError::Malformed { line: 1, .. })));
    }

    #[test]
    fn store_lookup() {
        let recs = assign_test_keys(&ids(4), 7, &Inventory::default()).unwrap();
        let store = KeyStore::new(recs.clone()).unwrap();
        assert_eq!(store.get("b2"), Some(&recs[2]));
        assert!(store.get("nope").is_none());
    }
}
