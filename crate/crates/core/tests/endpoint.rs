use std::io::Write;
use std::sync::{Arc, Mutex};

use arena_core::agents::{AgentError, EndpointAgent, EndpointConfig, StubReply, StubServer};
use arena_core::ModelId;
use tracing_subscriber::fmt::MakeWriter;

#[derive(Clone, Default)]
struct Captured(Arc<Mutex<Vec<u8>>>);

impl Captured {
    fn text(&self) -> String {
        String::from_utf8(self.0.lock().unwrap().clone()).unwrap()
    }
}

impl Write for Captured {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

impl<'a> MakeWriter<'a> for Captured {
    type Writer = Captured;

    fn make_writer(&'a self) -> Self::Writer {
        self.clone()
    }
}

/// Runs `f` with every log line at debug and above captured.
fn with_logs<T>(f: impl FnOnce() -> T) -> (T, String) {
    let sink = Captured::default();
    let subscriber = tracing_subscriber::fmt()
        .with_max_level(tracing::Level::DEBUG)
        .with_ansi(false)
        .with_writer(sink.clone())
        .finish();
    let out = tracing::subscriber::with_default(subscriber, f);
    (out, sink.text())
}

fn agent(url: String, env: &str) -> EndpointAgent {
    EndpointAgent::new(
        ModelId::new("remote").unwrap(),
        EndpointConfig {
            model_name: "remote-large".into(),
            base_url: url,
            auth_env: env.into(),
            temperature: 1.0,
            max_retries: 3,
            timeout_secs: 5,
            backoff_ms: 1,
        },
    )
}

#[test]
fn round_trip_sends_model_prompt_and_key() {
    std::env::set_var("ARENA_TEST_KEY_ROUND_TRIP", "sk-round-trip-4242");
    let stub = StubServer::start(vec![StubReply::ok("ANSWER: 7")]).unwrap();
    let a = agent(stub.url(), "ARENA_TEST_KEY_ROUND_TRIP");
    assert_eq!(a.complete("What is 3 + 4?").unwrap(), "ANSWER: 7");
    let body: serde_json::Value = serde_json::from_str(&stub.bodies()[0]).unwrap();
    assert_eq!(body["model"], "remote-large");
    assert_eq!(body["temperature"], 1.0);
    assert_eq!(body["messages"][0]["content"], "What is 3 + 4?");
    assert_eq!(stub.auth_headers(), ["Bearer sk-round-trip-4242"]);
}

#[test]
fn rate_limits_are_retried_and_logged() {
    std::env::set_var("ARENA_TEST_KEY_RETRY", "sk-retry-secret-9876");
    let stub = StubServer::start(vec![StubReply::status(429), StubReply::status(429), StubReply::ok("fine")]).unwrap();
    let a = agent(stub.url(), "ARENA_TEST_KEY_RETRY");
    let (reply, logs) = with_logs(|| a.complete("hello"));
    assert_eq!(reply.unwrap(), "fine");
    assert_eq!(stub.hits(), 3);
    assert_eq!(logs.matches("retryable status").count(), 2, "{logs}");
    assert!(logs.contains("retries=2"), "{logs}");
    assert!(logs.contains("temperature=1"), "{logs}");
    assert!(!logs.contains("sk-retry-secret-9876"), "key leaked into logs");
}

#[test]
fn exhausted_retries_are_a_transport_error() {
    std::env::set_var("ARENA_TEST_KEY_EXHAUST", "k");
    let stub = StubServer::start(vec![StubReply::status(503)]).unwrap();
    let err = agent(stub.url(), "ARENA_TEST_KEY_EXHAUST").complete("x").unwrap_err();
    assert_eq!(
        err,
        AgentError::Transport {
            attempts: 4,
            message: "HTTP 503".into()
        }
    );
    assert_eq!(stub.hits(), 4);
}

#[test]
fn client_errors_are_not_retried() {
    std::env::set_var("ARENA_TEST_KEY_CLIENT", "k");
    let stub = StubServer::start(vec![StubReply::status(400)]).unwrap();
    let err = agent(stub.url(), "ARENA_TEST_KEY_CLIENT").complete("x").unwrap_err();
    assert!(matches!(err, AgentError::Endpoint { status: 400, .. }));
    assert_eq!(stub.hits(), 1);
}

#[test]
fn missing_key_fails_before_any_request() {
    let stub = StubServer::start(vec![StubReply::ok("never")]).unwrap();
    let err = agent(stub.url(), "ARENA_TEST_KEY_NEVER_SET").complete("x").unwrap_err();
    assert!(matches!(err, AgentError::Config(ref m) if m.contains("ARENA_TEST_KEY_NEVER_SET")));
    assert_eq!(stub.hits(), 0);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    std::env::set_var("ARENA_TEST_KEY_UNREACHABLE", "k");
    // Bind and drop a listener to get a port nobody serves.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = agent(format!("http://127.0.0.1:{port}/v1/chat/completions"), "ARENA_TEST_KEY_UNREACHABLE")
        .complete("x")
        .unwrap_err();
    assert!(matches!(err, AgentError::Transport { attempts: 4, .. }), "{err:?}");
}
