//! Client side of the captioner service contract, replayed against a local
//! server that answers from the shared fixtures.

mod common;

use std::sync::{Arc, Mutex};
use std::thread;

use albumstory::backends::{BackendErrorKind, Captioner, HttpCaptioner, RetryPolicy};
use serde_json::Value;

struct Recorded {
    method: String,
    path: String,
    content_type: Option<String>,
    body: Value,
}

/// Serves `status`/`response` for every request until `expected` requests arrived.
fn serve(status: u16, response: Value, expected: usize) -> (String, Arc<Mutex<Vec<Recorded>>>, thread::JoinHandle<()>) {
    let server = tiny_http::Server::http("127.0.0.1:0").expect("bind");
    let url = format!("http://{}", server.server_addr().to_ip().expect("ip addr"));
    let log = Arc::new(Mutex::new(Vec::new()));
    let sink = log.clone();
    let handle = thread::spawn(move || {
        for _ in 0..expected {
            let mut req = server.recv().expect("request");
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).expect("body");
            sink.lock().unwrap().push(Recorded {
                method: req.method().to_string(),
                path: req.url().to_string(),
                content_type: req.headers().iter().find(|h| h.field.equiv("Content-Type")).map(|h| h.value.to_string()),
                body: serde_json::from_str(&body).unwrap_or(Value::Null),
            });
            let resp = tiny_http::Response::from_string(response.to_string())
                .with_status_code(status)
                .with_header("Content-Type: application/json".parse::<tiny_http::Header>().unwrap());
            req.respond(resp).expect("respond");
        }
    });
    (url, log, handle)
}

fn no_wait() -> RetryPolicy {
    RetryPolicy::default().with_sleeper(Arc::new(|_| {}))
}

fn kind_name(kind: BackendErrorKind) -> &'static str {
    match kind {
        BackendErrorKind::Transport => "transport",
        BackendErrorKind::Protocol => "protocol",
        BackendErrorKind::RateLimited => "rate_limited",
        BackendErrorKind::Service => "service",
        BackendErrorKind::InvalidRequest => "invalid_request",
    }
}

fn cases() -> Vec<Value> {
    let text = std::fs::read_to_string(common::fixtures_dir().join("captioner_contract.json")).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    doc["cases"].as_array().unwrap().clone()
}

fn call(client: &HttpCaptioner, case: &Value) -> Result<String, albumstory::backends::BackendError> {
    let image = case["image"].as_str().unwrap().as_bytes();
    match case["route"].as_str().unwrap() {
        "/caption" => client.caption(image),
        "/refine" => client.refine_caption(image, case["story"].as_str().unwrap()),
        other => panic!("unknown route {other}"),
    }
}

#[test]
fn shared_contract_fixtures() {
    let cases = cases();
    assert!(cases.len() >= 8);
    for case in cases {
        let name = case["name"].as_str().unwrap();
        let attempts = case["expect"]["attempts"].as_u64().unwrap_or(1) as usize;
        let (url, log, handle) = serve(case["status"].as_u64().unwrap() as u16, case["response"].clone(), attempts);
        let client = HttpCaptioner::new(&url, no_wait());
        let result = call(&client, &case);
        handle.join().unwrap();

        let log = log.lock().unwrap();
        assert_eq!(log.len(), attempts, "{name}: attempts");
        for r in log.iter() {
            assert_eq!(r.method, "POST", "{name}");
            assert_eq!(r.path, case["route"].as_str().unwrap(), "{name}");
            assert_eq!(r.content_type.as_deref(), Some("application/json"), "{name}");
            assert_eq!(r.body, case["request"], "{name}: request body");
        }
        match (&case["expect"]["caption"], result) {
            (Value::String(want), Ok(got)) => assert_eq!(&got, want, "{name}"),
            (Value::String(_), Err(e)) => panic!("{name}: unexpected error {e}"),
            (_, Ok(got)) => panic!("{name}: expected an error, got caption {got:?}"),
            (_, Err(e)) => {
                assert_eq!(kind_name(e.kind()), case["expect"]["error"].as_str().unwrap(), "{name}: {e}");
                assert_eq!(e.is_retryable(), case["expect"]["retryable"].as_bool().unwrap(), "{name}");
            }
        }
    }
}

#[test]
fn identical_requests_send_identical_payloads() {
    let case = &cases()[1];
    let (url, log, handle) = serve(200, case["response"].clone(), 2);
    let client = HttpCaptioner::new(&url, no_wait());
    let a = call(&client, case).unwrap();
    let b = call(&client, case).unwrap();
    handle.join().unwrap();
    assert_eq!(a, b);
    let log = log.lock().unwrap();
    assert_eq!(log[0].body, log[1].body);
}

#[test]
fn bad_inputs_never_reach_the_service() {
    let client = HttpCaptioner::new("http://127.0.0.1:9", no_wait());
    assert_eq!(client.caption(b"").unwrap_err().kind(), BackendErrorKind::InvalidRequest);
    assert_eq!(client.refine_caption(b"img", "  ").unwrap_err().kind(), BackendErrorKind::InvalidRequest);
}
