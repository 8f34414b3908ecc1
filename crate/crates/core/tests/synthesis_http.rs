mod common;

use std::sync::Arc;
use std::time::Duration;

use bitext_forge::synthesis::{
    back_translate, http_backend, BackendError, Direction, SynthesisConfig, SynthesisError,
    TranslationBackend,
};
use bitext_forge::{LanguageTag, Origin, Sentence};
use common::{MockServer, Reply};

fn backend(server: &MockServer, token: Option<&str>) -> Arc<dyn TranslationBackend> {
    Arc::new(http_backend(
        &server.url,
        LanguageTag::Zh,
        LanguageTag::Vi,
        Duration::from_secs(5),
        token.map(String::from),
    ))
}

fn config(batch_size: usize, in_flight: usize, retry_limit: u32) -> SynthesisConfig {
    SynthesisConfig {
        batch_size,
        max_in_flight_batches: in_flight,
        retry_limit,
        retry_backoff: Duration::ZERO,
        direction: Direction::new(LanguageTag::Zh, LanguageTag::Vi),
    }
}

fn mono(n: usize) -> Vec<Sentence> {
    (0..n)
        .map(|i| Sentence::new(i as u64, format!("句子{i}"), LanguageTag::Zh))
        .collect()
}

fn texts(n: usize) -> Vec<String> {
    mono(n).into_iter().map(|s| s.text).collect()
}

#[test]
fn echo_server_behaves_as_identity() {
    let server = MockServer::start(|r| Reply::translations(&r.texts));
    let out = backend(&server, Some("s3cret")).translate_batch(&texts(3)).unwrap();
    assert_eq!(out, texts(3));
    let seen = server.seen.lock().unwrap();
    assert_eq!(seen[0].path, "/translate");
    assert_eq!(seen[0].src_lang, "zh");
    assert_eq!(seen[0].tgt_lang, "vi");
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer s3cret"));
}

#[test]
fn short_response_is_a_contract_violation() {
    let server = MockServer::start(|r| Reply::translations(&r.texts[..r.texts.len() - 1]));
    let err = backend(&server, None).translate_batch(&texts(5)).unwrap_err();
    assert_eq!(err, BackendError::Contract { expected: 5, got: 4 });
    assert!(!err.is_fatal());
}

#[test]
fn non_2xx_and_malformed_are_batch_errors() {
    let server = MockServer::start(|r| match r.call {
        0 => Reply::error(503),
        _ => Reply {
            status: 200,
            body: "{\"translations\": 7}".into(),
        },
    });
    let b = backend(&server, None);
    assert_eq!(b.translate_batch(&texts(1)).unwrap_err(), BackendError::Status { status: 503 });
    assert!(matches!(b.translate_batch(&texts(1)).unwrap_err(), BackendError::Malformed(_)));
}

#[test]
fn server_error_then_success_recovers_with_one_retry() {
    let server = MockServer::start(|r| match r.call {
        0 => Reply::error(500),
        _ => Reply::translations(&r.texts),
    });
    let mut bt = back_translate(mono(4), backend(&server, None), &config(4, 1, 1)).unwrap();
    let pairs: Vec<_> = bt.by_ref().map(Result::unwrap).collect();
    assert_eq!(pairs.len(), 4);
    assert_eq!(bt.report().retries, 1);
    assert_eq!(bt.report().failed_batches, 0);
    assert_eq!(server.calls.load(std::sync::atomic::Ordering::SeqCst), 2);
}

#[test]
fn failing_second_batch_of_three_is_dropped() {
    let batch = 4;
    let poisoned = texts(12)[batch].clone();
    let server = MockServer::start(move |r| {
        if r.texts[0] == poisoned {
            Reply::error(500)
        } else {
            Reply::translations(&r.texts.iter().map(|t| format!("vi:{t}")).collect::<Vec<_>>())
        }
    });
    let input = mono(12);
    let mut bt = back_translate(input.clone(), backend(&server, None), &config(batch, 3, 0)).unwrap();
    let pairs: Vec<_> = bt.by_ref().map(Result::unwrap).collect();
    assert_eq!(pairs.len(), 2 * batch);
    assert_eq!(bt.report().failed_batches, 1);
    let ids: Vec<u64> = pairs.iter().map(|p| p.target.id).collect();
    assert_eq!(ids, [0, 1, 2, 3, 8, 9, 10, 11]);
    for p in &pairs {
        assert_eq!(p.target, input[p.target.id as usize]);
        assert_eq!(p.source.text, format!("vi:{}", p.target.text));
        assert_eq!(p.source.lang, LanguageTag::Vi);
        assert_eq!(p.origin, Origin::Synthetic);
    }
}

#[test]
fn unreachable_server_stops_the_stream() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let b: Arc<dyn TranslationBackend> = Arc::new(http_backend(
        &format!("http://127.0.0.1:{port}"),
        LanguageTag::Zh,
        LanguageTag::Vi,
        Duration::from_secs(2),
        None,
    ));
    let results: Vec<_> = back_translate(mono(3), b, &config(2, 1, 1)).unwrap().collect();
    assert_eq!(results.len(), 1);
    assert!(matches!(results[0], Err(SynthesisError::BackendUnreachable { completed: 0, .. })));
}

#[test]
fn slow_server_times_out_as_batch_error() {
    let server = MockServer::start(|r| {
        std::thread::sleep(Duration::from_millis(800));
        Reply::translations(&r.texts)
    });
    let b = http_backend(&server.url, LanguageTag::Zh, LanguageTag::Vi, Duration::from_millis(200), None);
    let err = b.translate_batch(&texts(1)).unwrap_err();
    assert_eq!(err, BackendError::Timeout);
}

#[test]
fn concurrent_batches_keep_input_order() {
    // Later batches answer first.
    let server = MockServer::start(|r| {
        let n: u64 = r.texts[0].trim_start_matches("句子").parse().unwrap();
        std::thread::sleep(Duration::from_millis(60u64.saturating_sub(n * 2)));
        Reply::translations(&r.texts)
    });
    let mut bt = back_translate(mono(30), backend(&server, None), &config(1, 8, 0)).unwrap();
    let ids: Vec<u64> = bt.by_ref().map(|p| p.unwrap().target.id).collect();
    assert_eq!(ids, (0..30).collect::<Vec<_>>());
}
