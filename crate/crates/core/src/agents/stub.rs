//! Loopback HTTP server that plays back scripted chat-completion replies.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::json;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StubReply {
    pub status: u16,
    /// Message content for 2xx replies, raw body otherwise.
    pub content: String,
}

impl StubReply {
    pub fn ok(content: impl Into<String>) -> Self {
        StubReply {
            status: 200,
            content: content.into(),
        }
    }

    pub fn status(status: u16) -> Self {
        StubReply {
            status,
            content: format!("status {status}"),
        }
    }
}

#[derive(Default)]
struct Shared {
    script: Vec<StubReply>,
    served: usize,
    bodies: Vec<String>,
    auth_headers: Vec<String>,
}

/// Serves `script` in order, repeating the last entry once exhausted.
pub struct StubServer {
    addr: SocketAddr,
    shared: Arc<Mutex<Shared>>,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(script: Vec<StubReply>) -> std::io::Result<Self> {
        assert!(!script.is_empty(), "stub script must not be empty");
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Mutex::new(Shared {
            script,
            ..Shared::default()
        }));
        let stop = Arc::new(AtomicBool::new(false));
        let worker = {
            let shared = Arc::clone(&shared);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    if let Ok(stream) = stream {
                        // A malformed client request just drops that connection.
                        let _ = serve(stream, &shared);
                    }
                }
            })
        };
        Ok(StubServer {
            addr,
            shared,
            stop,
            worker: Some(worker),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    /// Number of requests answered so far.
    pub fn hits(&self) -> usize {
        self.shared.lock().expect("stub lock").served
    }

    /// JSON bodies received, in arrival order.
    pub fn bodies(&self) -> Vec<String> {
        self.shared.lock().expect("stub lock").bodies.clone()
    }

    /// Authorization header values received, in arrival order.
    pub fn auth_headers(&self) -> Vec<String> {
        self.shared.lock().expect("stub lock").auth_headers.clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop so it observes the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

fn serve(stream: TcpStream, shared: &Mutex<Shared>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    let mut auth = String::new();
    let mut line = String::new();
    reader.read_line(&mut line)?;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            let v = v.trim();
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.parse().unwrap_or(0);
            } else if k.eq_ignore_ascii_case("authorization") {
                auth = v.to_string();
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let reply = {
        let mut s = shared.lock().expect("stub lock");
        let reply = s.script[s.served.min(s.script.len() - 1)].clone();
        s.served += 1;
        s.bodies.push(String::from_utf8_lossy(&body).into_owned());
        s.auth_headers.push(auth);
        reply
    };
    let payload = if (200..300).contains(&reply.status) {
        json!({
            "id": "stub-completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": reply.content}}],
        })
        .to_string()
    } else {
        reply.content.clone()
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} Stub\r\nContent-Type: application/json\r\nX-Request-Id: stub-request\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        payload.len(),
        payload
    )?;
    stream.flush()
}
