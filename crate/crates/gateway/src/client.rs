use std::collections::HashSet;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use futures::stream::{self, StreamExt};
use serde_json::{json, Value};

use crate::rawlog::{LogRecord, LogWriter, LOG_FORMAT, LOG_VERSION};
use crate::{GatewayConfig, GatewayError, InferenceRequest, InferenceResult, RetryPolicy};

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// The assistant message of a chat-completion response body.
pub fn parse_completion(body: &str) -> Result<String, String> {
    let value: Value = serde_json::from_str(body).map_err(|e| format!("response is not JSON: {e}"))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| "response has no choices[0].message.content".to_string())
}

struct Attempt {
    status: Option<u16>,
    body: Option<String>,
    transport_error: Option<String>,
}

enum Verdict {
    Done(String),
    Transient(String),
    Fatal(String),
}

fn judge(a: &Attempt) -> Verdict {
    if let Some(e) = &a.transport_error {
        return Verdict::Transient(e.clone());
    }
    let status = a.status.unwrap_or(0);
    let body = a.body.as_deref().unwrap_or_default();
    match status {
        200..=299 => match parse_completion(body) {
            Ok(c) => Verdict::Done(c),
            Err(e) => Verdict::Fatal(e),
        },
        408 | 409 | 429 | 500..=599 => Verdict::Transient(format!("HTTP {status}")),
        _ => Verdict::Fatal(format!("HTTP {status}")),
    }
}

struct Context<'a> {
    client: reqwest::Client,
    config: &'a GatewayConfig,
    retry: &'a RetryPolicy,
    log: &'a LogWriter,
    batch: String,
}

impl Context<'_> {
    async fn send(&self, req: &InferenceRequest) -> Attempt {
        let payload = json!({
            "model": req.model_id,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let sent = self
            .client
            .post(self.config.endpoint())
            .bearer_auth(&self.config.api_key)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(payload.to_string())
            .send()
            .await;
        let response = match sent {
            Ok(r) => r,
            Err(e) => {
                return Attempt {
                    status: None,
                    body: None,
                    transport_error: Some(e.to_string()),
                }
            }
        };
        let status = response.status().as_u16();
        match response.text().await {
            Ok(body) => Attempt {
                status: Some(status),
                body: Some(body),
                transport_error: None,
            },
            Err(e) => Attempt {
                status: Some(status),
                body: None,
                transport_error: Some(format!("reading body: {e}")),
            },
        }
    }

    async fn execute(&self, index: usize, req: &InferenceRequest) -> InferenceResult {
        let start = Instant::now();
        let mut attempt = 0;
        let outcome = loop {
            attempt += 1;
            let a = self.send(req).await;
            let verdict = judge(&a);
            self.log.append(LogRecord::Response {
                batch: self.batch.clone(),
                index,
                request_id: req.instance_id.clone(),
                attempt,
                timestamp_ms: now_ms(),
                status: a.status,
                body: a.body,
                transport_error: a.transport_error,
            });
            match verdict {
                Verdict::Done(c) => break Ok(c),
                Verdict::Transient(_) if attempt < self.retry.max_attempts => {
                    tokio::time::sleep(self.retry.backoff(attempt)).await;
                }
                Verdict::Transient(e) => break Err(format!("{e} (gave up after {attempt} attempts)")),
                Verdict::Fatal(e) => break Err(e),
            }
        };
        let wall_time_ms = start.elapsed().as_millis() as u64;
        let (completion, error) = match outcome {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e)),
        };
        self.log.append(LogRecord::Done {
            batch: self.batch.clone(),
            index,
            request_id: req.instance_id.clone(),
            attempt_count: attempt,
            wall_time_ms,
            error: error.clone(),
        });
        InferenceResult {
            instance_id: req.instance_id.clone(),
            completion,
            error,
            attempt_count: attempt,
            wall_time_ms,
        }
    }
}

/// Sends every request, at most `parallelism` at a time, and returns one
/// result per request in request order. The raw log at `log_path` is
/// appended to and synced before this returns.
pub async fn run_batch(
    config: &GatewayConfig,
    requests: &[InferenceRequest],
    parallelism: usize,
    retry: &RetryPolicy,
    log_path: &Path,
) -> Result<Vec<InferenceResult>, GatewayError> {
    if parallelism == 0 {
        return Err(GatewayError::InvalidParallelism);
    }
    let mut ids = HashSet::new();
    for r in requests {
        r.validate(config.max_tokens_ceiling)?;
        if !ids.insert(r.instance_id.as_str()) {
            return Err(GatewayError::InvalidRequest {
                id: r.instance_id.clone(),
                reason: "duplicate request id".into(),
            });
        }
    }
    if requests.is_empty() {
        return Ok(Vec::new());
    }
    let client = reqwest::Client::builder()
        .timeout(config.request_timeout)
        .build()
        .map_err(GatewayError::Client)?;
    let log = LogWriter::open(log_path)?;
    let start = now_ms();
    let batch = format!("{start}-{}", std::process::id());
    log.append(LogRecord::BatchStart {
        format: LOG_FORMAT.into(),
        version: LOG_VERSION,
        batch: batch.clone(),
        requests: requests.len(),
        timestamp_ms: start,
    });
    let ctx = Context {
        client,
        config,
        retry,
        log: &log,
        batch: batch.clone(),
    };
    let results: Vec<InferenceResult> = stream::iter(requests.iter().enumerate())
        .map(|(i, r)| ctx.execute(i, r))
        .buffered(parallelism)
        .collect()
        .await;
    log.append(LogRecord::BatchEnd {
        batch,
        results: results.len(),
    });
    drop(ctx);
    log.finish()?;
    Ok(results)
}

/// [`run_batch`] on a private multi-threaded runtime.
pub fn run_batch_blocking(
    config: &GatewayConfig,
    requests: &[InferenceRequest],
    parallelism: usize,
    retry: &RetryPolicy,
    log_path: &Path,
) -> Result<Vec<InferenceResult>, GatewayError> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(GatewayError::Runtime)?;
    rt.block_on(run_batch(config, requests, parallelism, retry, log_path))
}
