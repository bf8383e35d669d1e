use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use cryptolang_core::cipher::CipherKey;
use cryptolang_core::keys::{KeyRecord, Matrix, Purpose};

pub fn announce_seed(seed: u64) {
    eprintln!("seed: {seed}");
}

/// Writes to stdout; a reader that went away (`| head`) is not an error.
pub fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// A key given inline or as a file, holding either a bare key or a key
/// record.
pub fn load_key(arg: &str) -> Result<KeyRecord> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading key file {arg}"))?
    };
    let text = text.trim();
    if let Ok(record) = serde_json::from_str::<KeyRecord>(text) {
        return Ok(record);
    }
    let key = CipherKey::from_json(text).context("not a key or key record")?;
    let matrix = Matrix::ALL
        .into_iter()
        .find(|m| m.scheme() == key.scheme())
        .expect("every scheme has a matrix");
    Ok(KeyRecord {
        instance_id: String::new(),
        matrix,
        purpose: Purpose::Test,
        key,
    })
}
