use std::time::Duration;

use cryptolang_gateway::{
    replay_log, run_batch_blocking, GatewayConfig, GatewayError, InferenceRequest, RetryPolicy, DEFAULT_TEMPERATURE,
};
use cryptolang_mock::{echo, MockReply, MockServer};

fn requests(n: usize) -> Vec<InferenceRequest> {
    (0..n)
        .map(|i| InferenceRequest {
            instance_id: format!("req-{i:04}"),
            model_id: "mock-model".into(),
            system_prompt: "You are terse.".into(),
            user_prompt: format!("prompt number {i}"),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: 100 + (i % 12) as u32 * 100,
        })
        .collect()
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_attempts: 3,
        initial_backoff: Duration::from_millis(5),
        max_backoff: Duration::from_millis(20),
    }
}

fn config(server: &MockServer) -> GatewayConfig {
    GatewayConfig::new(server.base_url(), "test-key", "mock-model")
}

#[test]
fn thousand_requests_never_exceed_the_bound() {
    let server = MockServer::start(Duration::from_millis(3), echo);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("raw.jsonl");
    let reqs = requests(1000);
    let results = run_batch_blocking(&config(&server), &reqs, 8, &fast_retry(), &log).unwrap();

    assert_eq!(results.len(), 1000);
    assert_eq!(server.total_requests(), 1000);
    assert!(server.max_in_flight() <= 8, "saw {} in flight", server.max_in_flight());
    assert!(server.max_in_flight() > 1, "requests never overlapped");
    for (req, res) in reqs.iter().zip(&results) {
        assert_eq!(res.instance_id, req.instance_id);
        assert_eq!(res.completion.as_deref(), Some(req.user_prompt.as_str()));
        assert!(res.error.is_none());
        assert_eq!(res.attempt_count, 1);
    }
    assert_eq!(replay_log(&log).unwrap(), results);
}

#[test]
fn transient_failures_are_retried_and_logged() {
    // Every prompt fails once with 503, odd prompts also once with 429.
    let server = MockServer::start(Duration::ZERO, |call| {
        let odd = call.user.ends_with(['1', '3', '5', '7', '9']);
        match call.attempt {
            1 => MockReply::Status(503),
            2 if odd => MockReply::Status(429),
            _ => MockReply::Completion(call.user.to_uppercase()),
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("raw.jsonl");
    let reqs = requests(20);
    let results = run_batch_blocking(&config(&server), &reqs, 4, &fast_retry(), &log).unwrap();
    for (i, r) in results.iter().enumerate() {
        assert!(r.is_ok(), "{r:?}");
        assert_eq!(r.attempt_count, if i % 2 == 1 { 3 } else { 2 });
    }
    assert_eq!(server.total_requests(), 50);
    assert_eq!(replay_log(&log).unwrap(), results);
    // One response record per attempt plus framing.
    let lines = std::fs::read_to_string(&log).unwrap().lines().count();
    assert_eq!(lines, 50 + 20 + 2);
}

#[test]
fn errors_are_recorded_without_aborting() {
    let server = MockServer::start(Duration::ZERO, |call| match call.user.as_str() {
        "prompt number 1" => MockReply::Status(400),
        "prompt number 2" => MockReply::Garbage("not json".into()),
        "prompt number 3" => MockReply::Status(500),
        _ => MockReply::Completion("fine".into()),
    });
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("raw.jsonl");
    let results = run_batch_blocking(&config(&server), &requests(5), 2, &fast_retry(), &log).unwrap();
    let errors: Vec<_> = results.iter().map(|r| r.error.is_some()).collect();
    assert_eq!(errors, [false, true, true, true, false]);
    assert_eq!(results[1].attempt_count, 1);
    assert_eq!(results[3].attempt_count, 3);
    assert!(results.iter().all(|r| r.completion.is_some() != r.error.is_some()));
    assert_eq!(replay_log(&log).unwrap(), results);
}

#[test]
fn unreachable_endpoint_is_a_per_request_error() {
    // Nothing listens on a port we just released.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = GatewayConfig::new(format!("http://127.0.0.1:{port}/v1"), "k", "m");
    let dir = tempfile::tempdir().unwrap();
    let results = run_batch_blocking(&cfg, &requests(3), 2, &fast_retry(), &dir.path().join("raw.jsonl")).unwrap();
    assert!(results.iter().all(|r| r.error.is_some() && r.attempt_count == 3));
}

#[test]
fn batches_append_to_one_log() {
    let server = MockServer::start(Duration::ZERO, echo);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("nested/raw.jsonl");
    let mut all = run_batch_blocking(&config(&server), &requests(3), 2, &fast_retry(), &log).unwrap();
    let mut more = requests(6).split_off(3);
    for r in &mut more {
        r.instance_id.push_str("-b");
    }
    all.extend(run_batch_blocking(&config(&server), &more, 2, &fast_retry(), &log).unwrap());
    assert_eq!(replay_log(&log).unwrap(), all);
}

#[test]
fn empty_batch_and_bad_input() {
    let server = MockServer::start(Duration::ZERO, echo);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("raw.jsonl");
    assert!(run_batch_blocking(&config(&server), &[], 4, &fast_retry(), &log).unwrap().is_empty());
    assert_eq!(server.total_requests(), 0);

    let mut reqs = requests(2);
    reqs[1].instance_id = reqs[0].instance_id.clone();
    assert!(matches!(
        run_batch_blocking(&config(&server), &reqs, 4, &fast_retry(), &log),
        Err(GatewayError::InvalidRequest { .. })
    ));
    let mut reqs = requests(2);
    reqs[0].max_tokens = 5000;
    assert!(matches!(
        run_batch_blocking(&config(&server), &reqs, 4, &fast_retry(), &log),
        Err(GatewayError::InvalidRequest { .. })
    ));
    assert!(matches!(
        run_batch_blocking(&config(&server), &requests(1), 0, &fast_retry(), &log),
        Err(GatewayError::InvalidParallelism)
    ));
    assert_eq!(server.total_requests(), 0, "validation happens before any request");
}

#[test]
fn wire_shape_carries_the_parameters() {
    let server = MockServer::start(Duration::ZERO, |call| {
        MockReply::Completion(format!(
            "{}|{}|{}|{}",
            call.model, call.system, call.temperature, call.max_tokens
        ))
    });
    let dir = tempfile::tempdir().unwrap();
    let results = run_batch_blocking(&config(&server), &requests(2), 1, &fast_retry(), &dir.path().join("l")).unwrap();
    assert_eq!(results[1].completion.as_deref(), Some("mock-model|You are terse.|0.05|200"));
}

#[test]
fn truncated_log_is_malformed() {
    let server = MockServer::start(Duration::ZERO, echo);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("raw.jsonl");
    run_batch_blocking(&config(&server), &requests(4), 2, &fast_retry(), &log).unwrap();
    let text = std::fs::read_to_string(&log).unwrap();
    let cut = dir.path().join("cut.jsonl");
    std::fs::write(&cut, &text[..text.len() - 10]).unwrap();
    assert!(matches!(replay_log(&cut), Err(GatewayError::MalformedLog { .. })));
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    std::fs::write(&cut, lines.join("\n") + "\n").unwrap();
    assert!(matches!(replay_log(&cut), Err(GatewayError::MalformedLog { .. })));
}
