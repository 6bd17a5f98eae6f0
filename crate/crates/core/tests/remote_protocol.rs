use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use lord_core::embedding::{
    embed_goal, BackendConfig, BackendKind, Embedder, EmbeddingError, GoalSpec, Modality, ObservationRef, Payload,
    Polarity, RemoteClient, RemoteConfig, RemoteEmbedder,
};
use lord_core::obs::FrameImage;
use serde_json::{json, Value};

struct Request {
    method: String,
    path: String,
    body: Value,
}

type Handler = dyn Fn(&Request) -> (u16, String) + Send + Sync;

struct MockService {
    endpoint: String,
    hits: Arc<AtomicUsize>,
    seen: Arc<Mutex<Vec<Value>>>,
}

fn read_request(stream: &mut std::net::TcpStream) -> Option<Request> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let (method, path) = (parts.next()?.to_owned(), parts.next()?.to_owned());
    let mut len = 0;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).ok()?;
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((k, v)) = header.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    let body = if body.is_empty() { Value::Null } else { serde_json::from_slice(&body).ok()? };
    Some(Request { method, path, body })
}

fn serve(handler: Box<Handler>) -> MockService {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let seen = Arc::new(Mutex::new(vec![]));
    let (h, s) = (hits.clone(), seen.clone());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let Some(req) = read_request(&mut stream) else { continue };
            h.fetch_add(1, Ordering::SeqCst);
            s.lock().unwrap().push(req.body.clone());
            let (status, body) = handler(&req);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    MockService { endpoint, hits, seen }
}

fn client(endpoint: &str) -> RemoteClient {
    RemoteClient::new(RemoteConfig {
        endpoint: endpoint.into(),
        timeout: Duration::from_secs(5),
        max_retries: 2,
        backoff: Duration::from_millis(1),
    })
}

fn info_body() -> String {
    json!({"modalities": [
        {"modality": "text", "dim": 3, "model": "mock-text"},
        {"modality": "image", "dim": 4, "model": "mock-image"},
    ]})
    .to_string()
}

/// Deterministic fake model: the vector depends only on the payload.
fn fake_vector(payload: &Value, dim: usize) -> Vec<f64> {
    let s = payload.to_string();
    (0..dim).map(|i| 1.0 + ((s.len() * 31 + i * 7 + s.bytes().map(usize::from).sum::<usize>()) % 13) as f64).collect()
}

fn echo_service() -> MockService {
    serve(Box::new(|req| match (req.method.as_str(), req.path.as_str()) {
        ("GET", "/info") => (200, info_body()),
        ("POST", "/embed") => {
            let dim = if req.body["modality"] == "text" { 3 } else { 4 };
            let v = fake_vector(&req.body["payload"], dim);
            (200, json!({"embedding": v, "dim": dim, "model": "mock"}).to_string())
        }
        _ => (404, "{}".into()),
    }))
}

#[test]
fn info_lists_modalities() {
    let svc = echo_service();
    let info = client(&svc.endpoint).info().unwrap();
    assert_eq!(info.modalities.len(), 2);
    assert_eq!(info.modalities[1].dim, 4);
}

#[test]
fn embed_request_follows_wire_format() {
    let svc = echo_service();
    let c = client(&svc.endpoint);
    let (v, model) = c.embed(Modality::Text, false, &Payload::Text("hello".into())).unwrap();
    assert_eq!(model, "mock");
    assert_eq!(v.as_slice(), fake_vector(&json!("hello"), 3).as_slice());
    let frame = FrameImage::filled(224, 224, [1, 2, 3]);
    c.embed(Modality::Image, false, &Payload::Image(frame)).unwrap();
    let seen = svc.seen.lock().unwrap();
    assert_eq!(seen[0], json!({"modality": "text", "is_goal": false, "payload": "hello"}));
    assert_eq!(seen[1]["modality"], "image");
    assert!(seen[1]["payload"].as_str().unwrap().len() > 100);
}

#[test]
fn same_payload_gives_same_vector_and_batches_keep_order() {
    let svc = echo_service();
    let c = client(&svc.endpoint);
    let p = Payload::Text("same".into());
    assert_eq!(c.embed(Modality::Text, false, &p).unwrap().0, c.embed(Modality::Text, false, &p).unwrap().0);
    let payloads: Vec<Payload> = ["a", "bb", "ccc", "dddd"].iter().map(|s| Payload::Text((*s).into())).collect();
    let batch = c.embed_batch(Modality::Text, false, &payloads).unwrap();
    assert_eq!(batch.len(), 4);
    for (v, s) in batch.iter().zip(["a", "bb", "ccc", "dddd"]) {
        assert_eq!(v.as_slice(), fake_vector(&json!(s), 3).as_slice());
    }
}

#[test]
fn server_errors_are_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c2 = calls.clone();
    let svc = serve(Box::new(move |_| {
        if c2.fetch_add(1, Ordering::SeqCst) < 2 {
            (503, "{}".into())
        } else {
            (200, json!({"embedding": [1.0, 0.0], "dim": 2, "model": "m"}).to_string())
        }
    }));
    let (v, _) = client(&svc.endpoint).embed(Modality::Text, false, &Payload::Text("x".into())).unwrap();
    assert_eq!(v.as_slice(), &[1.0, 0.0]);
    assert_eq!(svc.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_server_errors_exhaust_retries() {
    let svc = serve(Box::new(|_| (500, "{}".into())));
    let err = client(&svc.endpoint).embed(Modality::Text, false, &Payload::Text("x".into())).unwrap_err();
    assert!(matches!(err, EmbeddingError::Availability(_)), "{err}");
    assert_eq!(svc.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let svc = serve(Box::new(|_| (400, r#"{"error": "bad"}"#.into())));
    let err = client(&svc.endpoint).embed(Modality::Text, false, &Payload::Text("x".into())).unwrap_err();
    assert!(matches!(err, EmbeddingError::Protocol(_)), "{err}");
    assert_eq!(svc.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_responses_are_protocol_errors() {
    let bodies = [
        "not json".to_owned(),
        json!({"embedding": [1.0, 2.0], "dim": 3, "model": "m"}).to_string(),
        json!({"embedding": [0.0, 0.0], "dim": 2, "model": "m"}).to_string(),
        json!({"vector": [1.0]}).to_string(),
    ];
    for body in bodies {
        let b = body.clone();
        let svc = serve(Box::new(move |_| (200, b.clone())));
        let err = client(&svc.endpoint).embed(Modality::Text, false, &Payload::Text("x".into())).unwrap_err();
        assert!(matches!(err, EmbeddingError::Protocol(_)), "{body}: {err}");
    }
}

#[test]
fn unknown_modality_in_info_is_protocol_error() {
    let svc = serve(Box::new(|_| (200, json!({"modalities": [{"modality": "audio", "dim": 3, "model": "m"}]}).to_string())));
    let err = client(&svc.endpoint).info().unwrap_err();
    assert!(matches!(err, EmbeddingError::Protocol(_)), "{err}");
}

#[test]
fn unreachable_service_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = client(&format!("http://127.0.0.1:{port}")).info().unwrap_err();
    assert!(matches!(err, EmbeddingError::Availability(_)), "{err}");
}

#[test]
fn embedder_checks_advertised_dim() {
    let svc = serve(Box::new(|req| match req.path.as_str() {
        "/info" => (200, info_body()),
        _ => (200, json!({"embedding": [1.0, 2.0], "dim": 2, "model": "m"}).to_string()),
    }));
    let e = RemoteEmbedder::connect(client(&svc.endpoint), Modality::Text).unwrap();
    assert_eq!(e.descriptor().dim, 3);
    assert_eq!(e.descriptor().name, "mock-text");
    let err = e.embed_observation(ObservationRef::Text("x")).unwrap_err();
    assert!(matches!(err, EmbeddingError::Interface(_)), "{err}");
    let err = embed_goal(&e, &GoalSpec::default_for(Modality::Text, Polarity::Opposite)).unwrap_err();
    assert!(matches!(err, EmbeddingError::Interface(_)), "{err}");
}

#[test]
fn goals_are_sent_as_text_with_goal_flag() {
    let svc = echo_service();
    let e = RemoteEmbedder::connect(client(&svc.endpoint), Modality::Image).unwrap();
    let g = embed_goal(&e, &GoalSpec::default_for(Modality::Image, Polarity::Opposite)).unwrap();
    assert_eq!(g.dim(), 4);
    let seen = svc.seen.lock().unwrap();
    let last = seen.last().unwrap();
    assert_eq!(last["is_goal"], true);
    assert_eq!(last["payload"], "White car collides with a blue car.");
}

#[test]
fn backend_config_connects_and_rejects_unserved_modality() {
    let svc = echo_service();
    let config = BackendConfig { kind: BackendKind::Remote, endpoint: Some(svc.endpoint.clone()), ..BackendConfig::default() };
    assert_eq!(config.build(Modality::Text).unwrap().descriptor().dim, 3);
    let err = config.build(Modality::Video).err().unwrap();
    assert!(matches!(err, EmbeddingError::Interface(_)), "{err}");
}
