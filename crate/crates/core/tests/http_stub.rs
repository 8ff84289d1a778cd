//! Chat and embedding clients against a scripted local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use fable::eval::{Embedder, HttpEmbedder};
use fable::http::{HttpError, RetryPolicy};
use fable::writer::{ChatMessage, ChatProvider, GenerationParams, HttpChatProvider, ProviderError, SYSTEM_PROMPT};
use serde_json::Value;

struct Recorded {
    path: String,
    auth: Option<String>,
    body: Value,
}

/// Serves one scripted `(status, body)` per connection, then stops.
fn stub(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Recorded>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/endpoint", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let handle = thread::spawn(move || {
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut len = 0usize;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => len = value.trim().parse().unwrap(),
                    "authorization" => auth = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Recorded {
                path,
                auth,
                body: serde_json::from_slice(&buf).unwrap_or(Value::Null),
            });
            let mut stream = stream;
            let response = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (url, seen, handle)
}

fn chat_reply(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn history() -> Vec<ChatMessage> {
    vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user("Write the next paragraph.")]
}

fn fast(url: &str) -> HttpChatProvider {
    HttpChatProvider::new(url, Some("k3y".into()))
        .unwrap()
        .with_base_delay(Duration::from_millis(5))
}

#[test]
fn chat_passthrough_and_request_shape() {
    let (url, seen, h) = stub(vec![(200, chat_reply("Once…"))]);
    let params = GenerationParams {
        seed: Some(42),
        temperature: 0.7,
        ..Default::default()
    };
    let got = fast(&url).chat_complete(&history(), &params).unwrap();
    h.join().unwrap();
    assert_eq!(got, "Once…");
    let seen = seen.lock().unwrap();
    let r = &seen[0];
    assert_eq!(r.path, "/v1/endpoint");
    assert_eq!(r.auth.as_deref(), Some("Bearer k3y"));
    assert_eq!(r.body["model"], "gpt-3.5-turbo");
    assert_eq!(r.body["temperature"], 0.7);
    assert_eq!(r.body["max_tokens"], 400);
    assert_eq!(r.body["seed"], 42);
    assert_eq!(r.body["messages"][0]["role"], "system");
    assert_eq!(r.body["messages"][1]["content"], "Write the next paragraph.");
}

#[test]
fn retries_after_server_error() {
    let (url, seen, h) = stub(vec![
        (500, "{}".into()),
        (429, "{}".into()),
        (200, chat_reply("recovered")),
    ]);
    let got = fast(&url).chat_complete(&history(), &GenerationParams::default()).unwrap();
    h.join().unwrap();
    assert_eq!(got, "recovered");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_max_retries() {
    let (url, seen, h) = stub(vec![(503, "busy".into()), (503, "busy".into())]);
    let params = GenerationParams {
        max_retries: 1,
        ..Default::default()
    };
    let err = fast(&url).chat_complete(&history(), &params).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, ProviderError::Http(HttpError::Status { status: 503, .. })), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen, h) = stub(vec![(400, r#"{"error":"bad"}"#.into())]);
    let err = fast(&url).chat_complete(&history(), &GenerationParams::default()).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, ProviderError::Http(HttpError::Status { status: 400, .. })));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_and_empty_replies() {
    let (url, _, h) = stub(vec![
        (200, "not json".into()),
        (200, r#"{"choices": []}"#.into()),
        (200, chat_reply("   ")),
    ]);
    let p = fast(&url);
    let params = GenerationParams::default();
    assert!(matches!(p.chat_complete(&history(), &params), Err(ProviderError::Http(HttpError::Malformed(_)))));
    assert!(matches!(p.chat_complete(&history(), &params), Err(ProviderError::Http(HttpError::Malformed(_)))));
    assert!(matches!(p.chat_complete(&history(), &params), Err(ProviderError::EmptyCompletion)));
    h.join().unwrap();
}

#[test]
fn transport_failure_after_retries() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    drop(listener);
    let params = GenerationParams {
        max_retries: 2,
        ..Default::default()
    };
    match fast(&url).chat_complete(&history(), &params) {
        Err(ProviderError::Http(HttpError::Transport { attempts, .. })) => assert_eq!(attempts, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn embedding_batch() {
    let body = serde_json::json!({"data": [{"embedding": [1.0, 0.0]}, {"embedding": [0.6, 0.8]}]}).to_string();
    let (url, seen, h) = stub(vec![(500, "{}".into()), (200, body)]);
    let e = HttpEmbedder::new(&url, "mini", None).unwrap().with_retry(RetryPolicy {
        max_retries: 2,
        base_delay: Duration::from_millis(5),
        ..RetryPolicy::default()
    });
    let vs = e.embed_batch(&["a", "b"]).unwrap();
    h.join().unwrap();
    assert_eq!(vs[1].components(), &[0.6, 0.8]);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[1].body["input"], serde_json::json!(["a", "b"]));
    assert_eq!(seen[1].body["model"], "mini");
    assert!(seen[1].auth.is_none());
}

#[test]
fn embedding_count_mismatch_is_malformed() {
    let body = serde_json::json!({"data": [{"embedding": [1.0]}]}).to_string();
    let (url, _, h) = stub(vec![(200, body)]);
    let e = HttpEmbedder::new(&url, "mini", None).unwrap();
    assert!(e.embed_batch(&["a", "b"]).is_err());
    h.join().unwrap();
    assert!(e.embed_batch(&["  "]).is_err());
}
