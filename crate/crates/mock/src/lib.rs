//! A chat-completion endpoint that answers from a closure and records how
//! many requests were in flight at once.
//!
//! The server runs on its own thread and runtime, so both synchronous and
//! async callers can use it.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use serde_json::{json, Value};
use tokio::sync::oneshot;

/// What the server saw for one request.
#[derive(Debug, Clone)]
pub struct MockCall {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u64,
    /// 1 for the first request carrying this user prompt, 2 for a retry, …
    pub attempt: usize,
}

#[derive(Debug, Clone)]
pub enum MockReply {
    Completion(String),
    /// An error status with a small JSON body.
    Status(u16),
    /// A 200 whose body is not a chat completion.
    Garbage(String),
}

pub type Responder = dyn Fn(&MockCall) -> MockReply + Send + Sync;

#[derive(Default)]
struct Stats {
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    total: AtomicUsize,
    attempts: Mutex<HashMap<String, usize>>,
}

struct Shared {
    stats: Stats,
    delay: Duration,
    responder: Box<Responder>,
}

pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

/// Replies with the user prompt, verbatim.
pub fn echo(call: &MockCall) -> MockReply {
    MockReply::Completion(call.user.clone())
}

impl MockServer {
    /// Starts a server on an ephemeral localhost port. Each request is held
    /// for `delay` before it is answered, so concurrent requests overlap.
    pub fn start(delay: Duration, responder: impl Fn(&MockCall) -> MockReply + Send + Sync + 'static) -> MockServer {
        let shared = Arc::new(Shared {
            stats: Stats::default(),
            delay,
            responder: Box::new(responder),
        });
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
        let state = shared.clone();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("mock runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind mock port");
                addr_tx.send(listener.local_addr().expect("local addr")).expect("report address");
                let app = Router::new().route("/v1/chat/completions", post(handle)).with_state(state);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = shutdown_rx.await;
                    })
                    .await
                    .expect("mock server");
            });
        });
        let addr = addr_rx.recv().expect("mock server started");
        MockServer {
            addr,
            shared,
            shutdown: Some(shutdown_tx),
            thread: Some(thread),
        }
    }

    /// Base URL to configure a client with (ends in `/v1`).
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn max_in_flight(&self) -> usize {
        self.shared.stats.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn in_flight(&self) -> usize {
        self.shared.stats.in_flight.load(Ordering::SeqCst)
    }

    pub fn total_requests(&self) -> usize {
        self.shared.stats.total.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

struct InFlight<'a>(&'a Stats);

impl<'a> InFlight<'a> {
    fn enter(stats: &'a Stats) -> Self {
        let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
        stats.total.fetch_add(1, Ordering::SeqCst);
        InFlight(stats)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

fn message(body: &Value, role: &str) -> String {
    body["messages"]
        .as_array()
        .and_then(|ms| ms.iter().find(|m| m["role"] == role))
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string()
}

async fn handle(State(shared): State<Arc<Shared>>, body: String) -> Response {
    let _guard = InFlight::enter(&shared.stats);
    tokio::time::sleep(shared.delay).await;
    let Ok(req) = serde_json::from_str::<Value>(&body) else {
        return (StatusCode::BAD_REQUEST, json!({"error": "body is not JSON"}).to_string()).into_response();
    };
    let user = message(&req, "user");
    let attempt = {
        let mut attempts = shared.stats.attempts.lock().expect("attempt map");
        let n = attempts.entry(user.clone()).or_default();
        *n += 1;
        *n
    };
    let call = MockCall {
        model: req["model"].as_str().unwrap_or_default().to_string(),
        system: message(&req, "system"),
        user,
        temperature: req["temperature"].as_f64().unwrap_or(f64::NAN),
        max_tokens: req["max_tokens"].as_u64().unwrap_or(0),
        attempt,
    };
    match (shared.responder)(&call) {
        MockReply::Completion(text) => {
            let body = json!({
                "id": format!("mock-{attempt}"),
                "object": "chat.completion",
                "model": call.model,
                "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
            });
            (StatusCode::OK, body.to_string()).into_response()
        }
        MockReply::Status(code) => {
            let status = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, json!({"error": {"message": format!("mock status {code}")}}).to_string()).into_response()
        }
        MockReply::Garbage(text) => (StatusCode::OK, text).into_response(),
    }
}
