use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use userdrift::respondent::{CallKey, ChatModel, HttpChatModel, LlmSettings, Message, TrialSeed};
use userdrift::{Arm, Error};

#[derive(Default)]
struct Seen {
    bodies: Mutex<Vec<serde_json::Value>>,
    auth: Mutex<Vec<Option<String>>>,
    active: AtomicUsize,
    peak: AtomicUsize,
}

/// Serves scripted `(status, body)` replies in order; the last one repeats.
fn serve(script: Vec<(u16, String)>, delay: Duration) -> (String, Arc<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Seen::default());
    let counter = Arc::new(AtomicUsize::new(0));
    let script = Arc::new(script);
    let s = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let (seen, counter, script) = (s.clone(), counter.clone(), script.clone());
            thread::spawn(move || handle(stream, &seen, &counter, &script, delay));
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn handle(stream: TcpStream, seen: &Seen, counter: &AtomicUsize, script: &[(u16, String)], delay: Duration) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0;
    let mut auth = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
        if lower.starts_with("authorization:") {
            auth = Some(line["authorization:".len()..].trim().to_string());
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    seen.bodies.lock().unwrap().push(serde_json::from_slice(&body).unwrap());
    seen.auth.lock().unwrap().push(auth);

    let now = seen.active.fetch_add(1, Ordering::SeqCst) + 1;
    seen.peak.fetch_max(now, Ordering::SeqCst);
    thread::sleep(delay);
    seen.active.fetch_sub(1, Ordering::SeqCst);

    let i = counter.fetch_add(1, Ordering::SeqCst).min(script.len() - 1);
    let (status, text) = &script[i];
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
}

fn ok(content: &str) -> (u16, String) {
    (200, serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
}

fn settings(url: &str) -> LlmSettings {
    let mut s = LlmSettings::new(url, "test-model");
    s.initial_backoff_ms = 1;
    s.max_backoff_ms = 4;
    s.api_key_env = "USERDRIFT_TEST_UNSET_KEY".into();
    s
}

fn call() -> CallKey {
    CallKey::new(TrialSeed::cell(3, "p0", 0, Arm::Treatment, 1).with_question("Y"), "answer")
}

#[test]
fn transient_failures_are_retried() {
    let (url, seen) = serve(
        vec![(429, "{}".into()), (503, "{}".into()), (200, "not json".into()), ok("High priority")],
        Duration::ZERO,
    );
    let model = HttpChatModel::new(settings(&url)).unwrap();
    let out = model.complete(&[Message::user("Q")], &call()).unwrap();
    assert_eq!(out, "High priority");
    let bodies = seen.bodies.lock().unwrap();
    assert_eq!(bodies.len(), 4);
    assert_eq!(bodies[0]["model"], "test-model");
    assert_eq!(bodies[0]["seed"], call().provider_seed());
    assert_eq!(bodies[0]["messages"][0]["content"], "Q");
    assert!(bodies.iter().all(|b| b == &bodies[0]), "retries resend the same request");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(400, "{\"error\":\"bad\"}".into())], Duration::ZERO);
    let model = HttpChatModel::new(settings(&url)).unwrap();
    match model.complete(&[Message::user("Q")], &call()) {
        Err(Error::Backend { attempts, log, .. }) => {
            assert_eq!(attempts, 1);
            assert_eq!(log.len(), 1);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.bodies.lock().unwrap().len(), 1);
}

#[test]
fn attempts_are_bounded() {
    let (url, seen) = serve(vec![(500, "{}".into())], Duration::ZERO);
    let mut s = settings(&url);
    s.max_attempts = 3;
    let model = HttpChatModel::new(s).unwrap();
    let err = model.complete(&[Message::user("Q")], &call()).unwrap_err();
    assert!(matches!(err, Error::Backend { attempts: 3, ref log, .. } if log.len() == 3));
    assert_eq!(err.exit_code(), 3);
    assert_eq!(seen.bodies.lock().unwrap().len(), 3);
}

#[test]
fn in_flight_requests_are_capped() {
    let (url, seen) = serve(vec![ok("yes")], Duration::from_millis(40));
    let mut s = settings(&url);
    s.max_in_flight = 2;
    let model = Arc::new(HttpChatModel::new(s).unwrap());
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let m = model.clone();
            thread::spawn(move || m.complete(&[Message::user("Q")], &call()).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), "yes");
    }
    assert!(model.peak_in_flight() <= 2);
    assert!(seen.peak.load(Ordering::SeqCst) <= 2);
    assert_eq!(seen.bodies.lock().unwrap().len(), 8);
}

#[test]
fn api_key_is_read_from_the_environment() {
    let (url, seen) = serve(vec![ok("fine")], Duration::ZERO);
    let mut s = settings(&url);
    s.api_key_env = "USERDRIFT_TEST_API_KEY".into();
    std::env::set_var("USERDRIFT_TEST_API_KEY", "sk-test");
    let model = HttpChatModel::new(s).unwrap();
    model.complete(&[Message::user("Q")], &call()).unwrap();
    assert_eq!(seen.auth.lock().unwrap()[0].as_deref(), Some("Bearer sk-test"));
    assert!(!format!("{model:?}").contains("sk-test"));
}
