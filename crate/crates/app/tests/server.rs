use std::future::IntoFuture;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use softner::pipeline::{bootstrap_incidents, extract_response, propagate_incidents, SynthOptions};
use softner::server::{router, ServerConfig};
use softner_core::bootstrap::BootstrapConfig;
use softner_core::corpus::Incident;
use softner_core::synth::generate;
use softner_nn::{train, MultiTaskModel, TrainingConfig};

struct Fixture {
    model: Arc<MultiTaskModel>,
    incidents: Vec<Incident>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let opts = SynthOptions {
            seed: 5,
            incidents: 150,
            drop_types: vec!["exception message".into()],
            ..SynthOptions::default()
        };
        let (incidents, _) = generate(&opts.config()).unwrap();
        let cfg = BootstrapConfig::default();
        let (catalog, _) = bootstrap_incidents(&incidents[..120], &cfg);
        let labeled = propagate_incidents(&incidents[..120], &catalog, &cfg);
        let tc = TrainingConfig {
            epochs: 3,
            learning_rate: 0.01,
            embed_dim: 16,
            hidden: 16,
            seed: 2,
            ..TrainingConfig::default()
        };
        let (model, _) = train(&labeled, &tc).unwrap();
        Fixture {
            model: Arc::new(model),
            incidents,
        }
    })
}

fn app() -> Router {
    router(fixture().model.clone(), ServerConfig::default())
}

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap()
}

async fn call(app: Router, req: Request<Body>) -> (StatusCode, Value) {
    use tower::ServiceExt;
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn post(body: impl Into<Body>) -> Request<Body> {
    Request::post("/extract")
        .header("content-type", "application/json")
        .body(body.into())
        .unwrap()
}

fn post_description(d: &str) -> Request<Body> {
    post(json!({ "description": d }).to_string())
}

#[test]
fn health_reports_ok() {
    let (s, v) = rt().block_on(call(app(), Request::get("/health").body(Body::empty()).unwrap()));
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"status": "ok"}));
}

#[test]
fn empty_description_gives_empty_entities() {
    let (s, v) = rt().block_on(call(app(), post_description("")));
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["entities"], json!([]));
    assert_eq!(v["schemaVersion"], 1);
}

#[test]
fn invalid_json_is_a_bad_request() {
    let rt = rt();
    for body in ["{not json", "{\"text\": \"x\"}", "[]", ""] {
        let (s, v) = rt.block_on(call(app(), post(body)));
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body:?}");
        assert!(v["error"].as_str().is_some_and(|e| !e.is_empty()));
    }
}

#[test]
fn oversized_payload_is_rejected() {
    let big = json!({ "description": "x".repeat(1024 * 1024 + 10) }).to_string();
    let (s, v) = rt().block_on(call(app(), post(big)));
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    assert!(v["error"].is_string());
}

#[test]
fn unknown_route_is_not_found() {
    let (s, _) = rt().block_on(call(app(), Request::get("/nope").body(Body::empty()).unwrap()));
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[test]
fn response_matches_offline_extraction() {
    let f = fixture();
    let rt = rt();
    let mut nonempty = 0;
    for inc in f.incidents.iter().skip(120).take(15) {
        let (s, v) = rt.block_on(call(app(), post_description(&inc.description_html)));
        assert_eq!(s, StatusCode::OK);
        let offline = serde_json::to_value(extract_response(&f.model, &inc.description_html).unwrap()).unwrap();
        assert_eq!(v, offline, "{}", inc.id);
        nonempty += usize::from(!v["entities"].as_array().unwrap().is_empty());
    }
    assert!(nonempty > 0, "model extracted nothing; parity check is vacuous");
}

#[test]
fn overload_returns_service_unavailable() {
    let f = fixture();
    let app = router(
        f.model.clone(),
        ServerConfig {
            max_concurrency: 1,
            ..ServerConfig::default()
        },
    );
    // A long description keeps the only permit busy while a second request
    // arrives.
    let one: String = f.incidents.iter().take(60).map(|i| i.description_html.as_str()).collect::<Vec<_>>().join("\n");
    let slow = vec![one; 8].join("\n");
    let rt = rt();
    let (first, rejected) = rt.block_on(async {
        let a = tokio::spawn(call(app.clone(), post_description(&slow)));
        let mut rejected = false;
        while !a.is_finished() && !rejected {
            tokio::time::sleep(Duration::from_millis(20)).await;
            rejected = call(app.clone(), post_description("Status code: 401")).await.0 == StatusCode::SERVICE_UNAVAILABLE;
        }
        (a.await.unwrap(), rejected)
    });
    assert_eq!(first.0, StatusCode::OK);
    assert!(rejected, "no request was turned away while the permit was held");
    // The permit is released afterwards.
    let (s, _) = rt.block_on(call(app, post_description("Status code: 401")));
    assert_eq!(s, StatusCode::OK);
}

#[test]
fn real_socket_round_trip() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let rt = rt();
    let text = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(axum::serve(listener, app()).into_future());
        let body = json!({ "description": "Status code: 401" }).to_string();
        let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
        let req = format!(
            "POST /extract HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        stream.write_all(req.as_bytes()).await.unwrap();
        let mut buf = String::new();
        stream.read_to_string(&mut buf).await.unwrap();
        buf
    });
    assert!(text.starts_with("HTTP/1.1 200"), "{text}");
    let json_part = &text[text.find("\r\n\r\n").unwrap() + 4..];
    let v: Value = serde_json::from_str(json_part).unwrap();
    assert_eq!(v["schemaVersion"], 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Responses do not depend on the order requests arrive in.
    #[test]
    fn responses_are_order_independent(seed in any::<u64>()) {
        let f = fixture();
        let mut batch: Vec<&str> = f.incidents.iter().skip(100).take(8).map(|i| i.description_html.as_str()).collect();
        batch.push("");
        batch.push("Status code: 401");
        let rt = rt();
        let run = |order: &[&str]| -> Vec<(String, Value)> {
            let app = app();
            let mut out: Vec<(String, Value)> = rt.block_on(async {
                let handles: Vec<_> = order
                    .iter()
                    .map(|d| {
                        let app = app.clone();
                        let d = d.to_string();
                        tokio::spawn(async move { (d.clone(), call(app, post_description(&d)).await.1) })
                    })
                    .collect();
                let mut v = Vec::new();
                for h in handles {
                    v.push(h.await.unwrap());
                }
                v
            });
            out.sort_by(|a, b| a.0.cmp(&b.0));
            out
        };
        let reference = run(&batch);
        batch.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(run(&batch), reference);
    }
}
