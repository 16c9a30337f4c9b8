//! Remote clients against a scripted in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

use exact_core::attribute::{load_default_library, AttributeId};
use exact_core::backend::{BackendError, RemoteConfig};
use exact_core::inference::{DecodingParams, Generator};
use exact_core::remote::{RemoteEmbedder, RemoteGenerator, RemoteScorer};
use exact_core::retrieval::{norm, Embedder};
use exact_core::scoring::Scorer;

type Handler = dyn Fn(usize, &str, &Value) -> (u16, Value) + Send + Sync;

struct MockServer {
    base_url: String,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
}

/// Serves each connection with `handler(request_index, path, body)`.
fn serve(handler: impl Fn(usize, &str, &Value) -> (u16, Value) + Send + Sync + 'static) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&requests);
    let handler: Arc<Handler> = Arc::new(handler);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
                continue;
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_owned();
            let mut length = 0;
            loop {
                let mut header = String::new();
                reader.read_line(&mut header).unwrap();
                let header = header.trim_end();
                if header.is_empty() {
                    break;
                }
                if let Some((name, value)) = header.split_once(':') {
                    if name.eq_ignore_ascii_case("content-length") {
                        length = value.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let index = {
                let mut log = log.lock().unwrap();
                log.push((path.clone(), body.clone()));
                log.len() - 1
            };
            let (status, reply) = handler(index, &path, &body);
            let text = reply.to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    MockServer { base_url: format!("http://{addr}/v1"), requests }
}

fn config(server: &MockServer) -> RemoteConfig {
    RemoteConfig { base_url: server.base_url.clone(), retry_limit: 2, request_timeout_secs: 5.0, ..Default::default() }
}

/// Echo reply: one token per character, each with log-prob -0.5; the first token has none.
fn echo_reply(body: &Value) -> Value {
    let prompt = body["prompt"].as_str().unwrap_or("");
    let n = prompt.chars().count();
    let logprobs: Vec<Value> = (0..n).map(|i| if i == 0 { Value::Null } else { json!(-0.5) }).collect();
    let offsets: Vec<usize> = (0..n).collect();
    json!({"choices":[{"text": prompt, "logprobs": {"token_logprobs": logprobs, "text_offset": offsets}}]})
}

#[test]
fn scorer_sums_only_response_tokens() {
    let server = serve(|_, _, body| (200, echo_reply(body)));
    let library = load_default_library();
    let scorer = RemoteScorer::new(config(&server), library.clone(), 4).unwrap();
    let formal = library.id_of("Formal").unwrap();
    let score = scorer.score("how do I bake bread", &[formal], "knead it").unwrap();
    assert_eq!(score.token_count, "knead it".chars().count());
    assert_eq!(score.value, -0.5 * 8.0);

    let requests = server.requests.lock().unwrap();
    let (path, body) = &requests[0];
    assert_eq!(path, "/v1/completions");
    assert_eq!(body["echo"], json!(true));
    assert_eq!(body["max_tokens"], json!(0));
    assert_eq!(body["prompt"], json!("how do I bake bread\nAttributes: <Formal>\nknead it"));
}

#[test]
fn scorer_reports_missing_logprobs_as_protocol_error() {
    let server = serve(|_, _, _| (200, json!({"choices":[{"text":"x"}]})));
    let scorer = RemoteScorer::new(config(&server), load_default_library(), 1).unwrap();
    let err = scorer.score("q", &[], "r").unwrap_err();
    assert!(matches!(err, BackendError::Protocol(_)), "{err:?}");
    assert_eq!(server.requests.lock().unwrap().len(), 1, "protocol errors are not retried");
}

#[test]
fn server_errors_are_retried_then_succeed() {
    let server = serve(|i, _, body| if i < 2 { (503, json!({"error":"busy"})) } else { (200, echo_reply(body)) });
    let scorer = RemoteScorer::new(config(&server), load_default_library(), 1).unwrap();
    let score = scorer.score("q", &[AttributeId(0)], "ok").unwrap();
    assert_eq!(score.token_count, 2);
    assert_eq!(server.requests.lock().unwrap().len(), 3);
}

#[test]
fn persistent_rate_limit_is_unavailable() {
    let server = serve(|_, _, _| (429, json!({"error":"slow down"})));
    let scorer = RemoteScorer::new(config(&server), load_default_library(), 1).unwrap();
    let err = scorer.score("q", &[], "r").unwrap_err();
    assert!(matches!(err, BackendError::Unavailable(_)), "{err:?}");
    assert_eq!(server.requests.lock().unwrap().len(), 3, "one try plus two retries");
}

#[test]
fn client_errors_are_not_retried() {
    let server = serve(|_, _, _| (400, json!({"error":"bad"})));
    let scorer = RemoteScorer::new(config(&server), load_default_library(), 1).unwrap();
    assert!(matches!(scorer.score("q", &[], "r"), Err(BackendError::Protocol(_))));
    assert_eq!(server.requests.lock().unwrap().len(), 1);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = RemoteConfig { base_url: format!("http://127.0.0.1:{port}/v1"), retry_limit: 1, ..Default::default() };
    let scorer = RemoteScorer::new(cfg, load_default_library(), 1).unwrap();
    assert!(matches!(scorer.score("q", &[], "r"), Err(BackendError::Unavailable(_))));
}

#[test]
fn embedder_normalizes_and_keeps_input_order() {
    let server = serve(|_, _, body| {
        let inputs = body["input"].as_array().cloned().unwrap_or_default();
        // reply out of order, with explicit indices
        let data: Vec<Value> = inputs
            .iter()
            .enumerate()
            .rev()
            .map(|(i, t)| json!({"index": i, "embedding": [3.0, 4.0 * t.as_str().unwrap().len() as f64, 0.0]}))
            .collect();
        (200, json!({"data": data}))
    });
    let embedder = RemoteEmbedder::connect(config(&server), 2).unwrap();
    assert_eq!(embedder.dimension(), 3);
    let out = embedder.embed_batch(&["a", "abc"]).unwrap();
    for v in &out {
        assert!((norm(v) - 1.0).abs() < 1e-6);
    }
    assert_eq!(out[0], vec![0.6, 0.8, 0.0]);
    assert!(out[1][1] > out[0][1]);
    assert!(matches!(embedder.embed(" "), Err(BackendError::InvalidInput(_))));
}

#[test]
fn embedder_rejects_zero_vectors() {
    let server = serve(|i, _, _| {
        let v = if i == 0 { json!([1.0, 0.0]) } else { json!([0.0, 0.0]) };
        (200, json!({"data": [{"index": 0, "embedding": v}]}))
    });
    let embedder = RemoteEmbedder::connect(config(&server), 1).unwrap();
    assert!(matches!(embedder.embed("hello"), Err(BackendError::Protocol(_))));
}

#[test]
fn generator_forwards_decoding_parameters() {
    let server = serve(|_, _, _| (200, json!({"choices":[{"text":" a reply"}]})));
    let generator = RemoteGenerator::new(config(&server), 1).unwrap();
    let params = DecodingParams::default();
    assert_eq!(generator.generate("say hi", &params).unwrap(), " a reply");
    let requests = server.requests.lock().unwrap();
    let body = &requests[0].1;
    assert_eq!(body["max_tokens"], json!(params.max_new_tokens));
    assert_eq!(body["top_k"], json!(params.top_k));
    assert_eq!(body["temperature"], json!(params.temperature));
}
