mod support;

use std::time::Duration;

use prune_mbr::utility::{token_f1, RemoteBackend, RemoteOptions, ScorePair, UtilityBackend};
use prune_mbr::MbrError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::Value;
use support::{token_f1_handler, MockServer};

fn fast_options(batch_size: usize) -> RemoteOptions {
    RemoteOptions {
        timeout: Duration::from_secs(10),
        batch_size,
        attempts: 3,
        backoff: Duration::from_millis(5),
    }
}

fn pairs<'a>(items: &'a [(String, String)]) -> Vec<ScorePair<'a>> {
    items
        .iter()
        .map(|(h, r)| ScorePair {
            hypothesis: h,
            reference: r,
            source: None,
        })
        .collect()
}

#[test]
fn health_names_the_backend() {
    let server = MockServer::token_f1();
    let backend = RemoteBackend::connect(&server.url, fast_options(256)).unwrap();
    assert_eq!(backend.name(), "mock-token-f1");
    assert_eq!(server.requests.lock().unwrap()[0].path, "/v1/health");
}

#[test]
fn empty_batch_sends_no_request() {
    let server = MockServer::token_f1();
    let backend = RemoteBackend::connect(&server.url, fast_options(256)).unwrap();
    assert!(backend.score_pairs(&[]).unwrap().is_empty());
    assert!(server.score_requests().is_empty());
}

#[test]
fn batches_are_split_and_order_is_kept() {
    let server = MockServer::token_f1();
    let backend = RemoteBackend::connect(&server.url, fast_options(2)).unwrap();
    let items: Vec<(String, String)> = vec![
        ("a b".into(), "a b".into()),
        ("a b".into(), "c d".into()),
        ("a b c".into(), "a b d".into()),
    ];
    let scores = backend.score_pairs(&pairs(&items)).unwrap();
    assert_eq!(scores, vec![1.0, 0.0, 2.0 / 3.0]);
    let reqs = server.score_requests();
    assert_eq!(reqs.len(), 2);
    let first: Value = serde_json::from_str(&reqs[0].body).unwrap();
    assert_eq!(first["pairs"].as_array().unwrap().len(), 2);
    assert_eq!(first["pairs"][1]["reference"], "c d");
    assert!(first["pairs"][0].get("source").is_none());
}

#[test]
fn remote_scores_match_local_mock_bit_exactly() {
    let server = MockServer::token_f1();
    let backend = RemoteBackend::connect(&server.url, fast_options(128)).unwrap();
    let words = ["the", "cat", "sat", "on", "a", "mat", "dog", "ran", "über", "naïve"];
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let sentence = |rng: &mut ChaCha20Rng| {
        let n = rng.gen_range(0..8);
        (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect::<Vec<_>>().join(" ")
    };
    let items: Vec<(String, String)> = (0..1000).map(|_| (sentence(&mut rng), sentence(&mut rng))).collect();
    let remote = backend.score_pairs(&pairs(&items)).unwrap();
    for ((h, r), s) in items.iter().zip(&remote) {
        assert_eq!(s.to_bits(), token_f1(h, r).to_bits(), "{h:?} / {r:?}");
    }
}

#[test]
fn transient_503_is_retried() {
    let server = MockServer::start(Box::new(|req, seq| {
        if req.path == "/v1/score" && seq == 1 {
            (503, "{\"error\":\"not ready\"}".into())
        } else {
            token_f1_handler(req)
        }
    }));
    let backend = RemoteBackend::connect(&server.url, fast_options(256)).unwrap();
    let items = vec![("x y".to_string(), "x".to_string())];
    let scores = backend.score_pairs(&pairs(&items)).unwrap();
    assert_eq!(scores.len(), 1);
    assert_eq!(server.score_requests().len(), 2);
}

#[test]
fn persistent_503_is_a_backend_error() {
    let server = MockServer::start(Box::new(|req, _| {
        if req.path == "/v1/score" {
            (503, "{}".into())
        } else {
            token_f1_handler(req)
        }
    }));
    let backend = RemoteBackend::connect(&server.url, fast_options(256)).unwrap();
    let items = vec![("x".to_string(), "x".to_string())];
    let err = backend.score_pairs(&pairs(&items)).unwrap_err();
    assert!(matches!(err, MbrError::Backend { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert_eq!(server.score_requests().len(), 3);
}

#[test]
fn unready_health_fails_to_connect() {
    let server = MockServer::start(Box::new(|_, _| (503, "{}".into())));
    let err = RemoteBackend::connect(&server.url, fast_options(256))
        .err()
        .expect("connect should fail");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn wrong_score_count_is_a_protocol_error() {
    let server = MockServer::start(Box::new(|req, _| {
        if req.path == "/v1/score" {
            (200, "{\"scores\":[0.5]}".into())
        } else {
            token_f1_handler(req)
        }
    }));
    let backend = RemoteBackend::connect(&server.url, fast_options(256)).unwrap();
    let items = vec![("a".to_string(), "a".to_string()), ("b".to_string(), "b".to_string())];
    let err = backend.score_pairs(&pairs(&items)).unwrap_err();
    assert!(matches!(err, MbrError::Protocol(_)), "{err}");
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(Box::new(|req, _| {
        if req.path == "/v1/score" {
            (422, "{\"error\":\"source required\"}".into())
        } else {
            token_f1_handler(req)
        }
    }));
    let backend = RemoteBackend::connect(&server.url, fast_options(256)).unwrap();
    let items = vec![("a".to_string(), "a".to_string())];
    let err = backend.score_pairs(&pairs(&items)).unwrap_err();
    assert!(err.to_string().contains("422"), "{err}");
    assert_eq!(server.score_requests().len(), 1);
}

#[test]
fn unreachable_endpoint_is_a_backend_error() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = RemoteBackend::connect(&format!("http://127.0.0.1:{port}"), fast_options(1))
        .err()
        .expect("nothing listens there");
    assert_eq!(err.exit_code(), 3);
}
