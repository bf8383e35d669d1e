//! Append-only JSON-lines log of raw responses.
//!
//! A batch is framed by `batch_start` / `batch_end` records. In between,
//! every HTTP attempt gets a `response` record holding the verbatim body,
//! and every request a closing `done` record. A log may hold several
//! batches; an unclosed batch means the log was truncated.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::client::parse_completion;
use crate::{GatewayError, InferenceResult};

pub const LOG_FORMAT: &str = "cryptolang-raw-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    BatchStart {
        format: String,
        version: u32,
        batch: String,
        requests: usize,
        timestamp_ms: u64,
    },
    Response {
        batch: String,
        index: usize,
        request_id: String,
        attempt: u32,
        timestamp_ms: u64,
        status: Option<u16>,
        body: Option<String>,
        transport_error: Option<String>,
    },
    Done {
        batch: String,
        index: usize,
        request_id: String,
        attempt_count: u32,
        wall_time_ms: u64,
        error: Option<String>,
    },
    BatchEnd {
        batch: String,
        results: usize,
    },
}

/// The single writer: records from any task are funneled through a
/// channel to one thread that owns the file.
pub(crate) struct LogWriter {
    path: PathBuf,
    tx: Option<mpsc::Sender<LogRecord>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl LogWriter {
    pub(crate) fn open(path: &Path) -> Result<Self, GatewayError> {
        let log_err = |source| GatewayError::Log {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(log_err)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(log_err)?;
        let (tx, rx) = mpsc::channel::<LogRecord>();
        let thread = std::thread::spawn(move || -> io::Result<()> {
            for record in rx {
                let mut line = serde_json::to_string(&record).map_err(io::Error::other)?;
                line.push('\n');
                file.write_all(line.as_bytes())?;
            }
            file.sync_data()
        });
        Ok(LogWriter {
            path: path.to_path_buf(),
            tx: Some(tx),
            thread: Some(thread),
        })
    }

    pub(crate) fn append(&self, record: LogRecord) {
        if let Some(tx) = &self.tx {
            // A failed send means the writer thread stopped on an I/O error,
            // which `finish` reports.
            let _ = tx.send(record);
        }
    }

    /// Waits until every record is on disk.
    pub(crate) fn finish(mut self) -> Result<(), GatewayError> {
        drop(self.tx.take());
        let outcome = self.thread.take().expect("joined once").join().unwrap_or_else(|_| Err(io::Error::other("log writer panicked")));
        outcome.map_err(|source| GatewayError::Log {
            path: self.path.clone(),
            source,
        })
    }
}

impl Drop for LogWriter {
    fn drop(&mut self) {
        drop(self.tx.take());
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

struct OpenBatch {
    id: String,
    requests: usize,
    last_body: HashMap<usize, Option<String>>,
    done: HashMap<usize, InferenceResult>,
}

/// Rebuilds the results of every batch in the log, batch by batch, each in
/// request order. Completions are re-parsed from the logged bodies.
pub fn replay_log(path: &Path) -> Result<Vec<InferenceResult>, GatewayError> {
    let log_err = |source| GatewayError::Log {
        path: path.to_path_buf(),
        source,
    };
    let mut text = String::new();
    File::open(path).map_err(log_err)?.read_to_string(&mut text).map_err(log_err)?;
    replay_str(&text)
}

fn malformed(line: usize, reason: impl Into<String>) -> GatewayError {
    GatewayError::MalformedLog {
        line,
        reason: reason.into(),
    }
}

pub(crate) fn replay_str(text: &str) -> Result<Vec<InferenceResult>, GatewayError> {
    if !text.is_empty() && !text.ends_with('\n') {
        let line = text.lines().count();
        return Err(malformed(line, "last record is cut off"));
    }
    let mut out = Vec::new();
    let mut open: Option<OpenBatch> = None;
    let mut lineno = 0;
    for line in BufReader::new(text.as_bytes()).lines() {
        lineno += 1;
        let line = line.map_err(|e| malformed(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(&line).map_err(|e| malformed(lineno, e.to_string()))?;
        match record {
            LogRecord::BatchStart {
                format,
                version,
                batch,
                requests,
                ..
            } => {
                if format != LOG_FORMAT || version != LOG_VERSION {
                    return Err(malformed(lineno, format!("unsupported log format {format} v{version}")));
                }
                if let Some(b) = &open {
                    return Err(malformed(lineno, format!("batch {} was never closed", b.id)));
                }
                open = Some(OpenBatch {
                    id: batch,
                    requests,
                    last_body: HashMap::new(),
                    done: HashMap::new(),
                });
            }
            LogRecord::Response { batch, index, body, .. } => {
                let b = current(&mut open, &batch, lineno)?;
                if index >= b.requests {
                    return Err(malformed(lineno, format!("request index {index} out of range")));
                }
                b.last_body.insert(index, body);
            }
            LogRecord::Done {
                batch,
                index,
                request_id,
                attempt_count,
                wall_time_ms,
                error,
            } => {
                let b = current(&mut open, &batch, lineno)?;
                let completion = match &error {
                    Some(_) => None,
                    None => {
                        let body = b
                            .last_body
                            .get(&index)
                            .cloned()
                            .flatten()
                            .ok_or_else(|| malformed(lineno, format!("request {request_id:?} succeeded without a logged body")))?;
                        Some(parse_completion(&body).map_err(|e| malformed(lineno, e))?)
                    }
                };
                let result = InferenceResult {
                    instance_id: request_id,
                    completion,
                    error,
                    attempt_count,
                    wall_time_ms,
                };
                if b.done.insert(index, result).is_some() {
                    return Err(malformed(lineno, format!("request index {index} finished twice")));
                }
            }
            LogRecord::BatchEnd { batch, results } => {
                let mut b = open.take().ok_or_else(|| malformed(lineno, "batch_end without batch_start"))?;
                if b.id != batch {
                    return Err(malformed(lineno, format!("batch_end for {batch} inside batch {}", b.id)));
                }
                if results != b.requests || b.done.len() != b.requests {
                    return Err(malformed(
                        lineno,
                        format!("batch {batch} announced {} requests, {} finished", b.requests, b.done.len()),
                    ));
                }
                for i in 0..b.requests {
                    out.push(b.done.remove(&i).ok_or_else(|| malformed(lineno, format!("request index {i} missing")))?);
                }
            }
        }
    }
    if let Some(b) = open {
        return Err(malformed(lineno, format!("log ends inside batch {}", b.id)));
    }
    Ok(out)
}

fn current<'a>(open: &'a mut Option<OpenBatch>, batch: &str, line: usize) -> Result<&'a mut OpenBatch, GatewayError> {
    let b = open.as_mut().ok_or_else(|| malformed(line, "record outside any batch"))?;
    if b.id != batch {
        return Err(malformed(line, format!("record for batch {batch} inside batch {}", b.id)));
    }
    Ok(b)
}
