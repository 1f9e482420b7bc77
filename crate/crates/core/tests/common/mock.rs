//! One-connection-per-request HTTP stub for chat-completion fixtures.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use sds_core::chat::EndpointConfig;

pub struct MockServer {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<serde_json::Value>>>,
    handle: Option<JoinHandle<()>>,
}

/// Wraps `content` the way a completion endpoint would.
pub fn completion(content: &str) -> (u16, String) {
    (200, serde_json::json!({ "choices": [{ "index": 0, "message": { "role": "assistant", "content": content } }] }).to_string())
}

impl MockServer {
    /// Answers the i-th request with `responses[i]`, then stops listening.
    pub fn start(responses: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().expect("clone"));
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
                let mut buf = vec![0; len];
                let _ = reader.read_exact(&mut buf);
                if let Ok(v) = serde_json::from_slice(&buf) {
                    log.lock().unwrap().push(v);
                }
                let mut stream = stream;
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.flush();
            }
        });
        Self { base_url, requests, handle: Some(handle) }
    }

    pub fn endpoint(&self) -> EndpointConfig {
        EndpointConfig {
            base_url: self.base_url.clone(),
            token_env: "SDS_TEST_TOKEN_UNSET".into(),
            timeout_secs: 5,
            max_retries: 0,
            retry_backoff_ms: 0,
            ..EndpointConfig::default()
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        // The thread may still be blocked in accept when fewer requests arrived than scripted.
        if let Some(h) = self.handle.take() {
            if h.is_finished() {
                let _ = h.join();
            }
        }
    }
}
