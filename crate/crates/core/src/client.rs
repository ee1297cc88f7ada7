//! Chat-completion client abstraction.
//!
//! Every LLM touchpoint goes through [`ModelClient`], so the whole pipeline
//! runs offline against [`MockClient`] fixtures. The live [`HttpClient`]
//! speaks the JSON chat-completion wire format: request
//! `{model, messages[{role, content}], temperature, max_tokens, logit_bias?}`,
//! response read from the first choice's message content.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request must contain at least one message and open with a user turn")]
    MalformedRequest,
    #[error("HTTP status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("response contained no usable choice content")]
    EmptyResponse,
    #[error("no fixture for request fingerprint {0}")]
    MissingFixture(String),
    #[error("fixture directory error: {0}")]
    Fixtures(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        #[source]
        last: Box<ClientError>,
    },
}

impl ClientError {
    /// Transient failures are worth retrying; everything else aborts.
    pub fn is_transient(&self) -> bool {
        match self {
            ClientError::Transport(_) | ClientError::EmptyResponse => true,
            ClientError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// One chat-completion call. `logit_bias` maps token strings to additive
/// bias values and is omitted from the wire when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logit_bias: Option<BTreeMap<String, f64>>,
}

impl CompletionRequest {
    pub fn new(
        model: impl Into<String>,
        messages: Vec<Message>,
        temperature: f64,
        max_tokens: u32,
    ) -> Result<Self, ClientError> {
        let first_non_system = messages.iter().find(|m| m.role != Role::System);
        match first_non_system {
            Some(m) if m.role == Role::User => {}
            _ => return Err(ClientError::MalformedRequest),
        }
        Ok(Self {
            model: model.into(),
            messages,
            temperature,
            max_tokens,
            logit_bias: None,
        })
    }

    pub fn with_logit_bias(mut self, bias: BTreeMap<String, f64>) -> Self {
        self.logit_bias = Some(bias);
        self
    }

    /// Stable content hash used to key mock fixtures.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("request serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(32);
        for byte in digest.iter().take(16) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// Abstract completion backend.
pub trait ModelClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError>;

    /// Whether the backend honors per-token logit bias.
    fn supports_logit_bias(&self) -> bool;
}

/// Exponential backoff with jitter. Delays only affect pacing, never the
/// response content, so pipeline output stays deterministic.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    fn delay_for(&self, attempt: u32) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << attempt.min(16));
        let capped = exp.min(self.max_delay);
        let jitter = rand::thread_rng().gen_range(0.0..=0.25);
        capped.mul_f64(1.0 + jitter)
    }
}

/// Calls `complete`, retrying transient failures up to the policy bound.
pub fn complete_with_retry(
    client: &dyn ModelClient,
    request: &CompletionRequest,
    policy: &RetryPolicy,
) -> Result<String, ClientError> {
    let attempts = policy.max_attempts.max(1);
    let mut last: Option<ClientError> = None;
    for attempt in 0..attempts {
        match client.complete(request) {
            Ok(text) => return Ok(text),
            Err(err) if err.is_transient() && attempt + 1 < attempts => {
                log::warn!("attempt {} failed ({err}); backing off", attempt + 1);
                std::thread::sleep(policy.delay_for(attempt));
                last = Some(err);
            }
            Err(err) if err.is_transient() => {
                return Err(ClientError::Exhausted {
                    attempts,
                    last: Box::new(err),
                });
            }
            Err(err) => return Err(err),
        }
    }
    Err(ClientError::Exhausted {
        attempts,
        last: Box::new(last.unwrap_or(ClientError::EmptyResponse)),
    })
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Debug, Deserialize)]
struct WireMessage {
    content: Option<String>,
}

/// Live JSON-over-HTTP backend.
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    logit_bias_capable: bool,
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        Self {
            endpoint: endpoint.into(),
            api_key,
            agent: config.new_agent(),
            logit_bias_capable: true,
        }
    }

    /// Reads the API key from the environment variable named in the config.
    pub fn from_env(endpoint: impl Into<String>, api_key_env: &str) -> Self {
        Self::new(endpoint, std::env::var(api_key_env).ok())
    }

    pub fn with_logit_bias_support(mut self, capable: bool) -> Self {
        self.logit_bias_capable = capable;
        self
    }
}

impl ModelClient for HttpClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(request)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response
                .body_mut()
                .read_to_string()
                .unwrap_or_else(|_| String::new());
            return Err(ClientError::Http { status, body });
        }
        let wire: WireResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        wire.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|content| !content.is_empty())
            .ok_or(ClientError::EmptyResponse)
    }

    fn supports_logit_bias(&self) -> bool {
        self.logit_bias_capable
    }
}

/// Offline backend serving canned responses keyed by request fingerprint.
///
/// A fixtures directory holds one `<fingerprint>.txt` file per request.
/// In-memory responses can be added directly for tests.
pub struct MockClient {
    responses: HashMap<String, String>,
    dir: Option<PathBuf>,
    logit_bias_capable: bool,
}

impl MockClient {
    pub fn new() -> Self {
        Self {
            responses: HashMap::new(),
            dir: None,
            logit_bias_capable: true,
        }
    }

    pub fn from_dir(dir: impl Into<PathBuf>) -> Result<Self, ClientError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(ClientError::Fixtures(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        Ok(Self {
            responses: HashMap::new(),
            dir: Some(dir),
            logit_bias_capable: true,
        })
    }

    pub fn with_logit_bias_support(mut self, capable: bool) -> Self {
        self.logit_bias_capable = capable;
        self
    }

    pub fn insert(&mut self, request: &CompletionRequest, response: impl Into<String>) {
        self.responses
            .insert(request.fingerprint(), response.into());
    }

    /// Writes one fixture file for `request` under `dir`.
    pub fn write_fixture(
        dir: &Path,
        request: &CompletionRequest,
        response: &str,
    ) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{}.txt", request.fingerprint())), response)
    }
}

impl Default for MockClient {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelClient for MockClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let fingerprint = request.fingerprint();
        if let Some(response) = self.responses.get(&fingerprint) {
            return Ok(response.clone());
        }
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{fingerprint}.txt"));
            if path.is_file() {
                return fs::read_to_string(&path).map_err(|e| ClientError::Fixtures(e.to_string()));
            }
        }
        Err(ClientError::MissingFixture(fingerprint))
    }

    fn supports_logit_bias(&self) -> bool {
        self.logit_bias_capable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn request(text: &str) -> CompletionRequest {
        CompletionRequest::new("test-model", vec![Message::user(text)], 0.7, 128).unwrap()
    }

    #[test]
    fn request_requires_a_leading_user_turn() {
        assert!(CompletionRequest::new("m", vec![], 0.0, 1).is_err());
        assert!(CompletionRequest::new(
            "m",
            vec![Message {
                role: Role::Assistant,
                content: "hi".into()
            }],
            0.0,
            1
        )
        .is_err());
        assert!(CompletionRequest::new(
            "m",
            vec![Message::system("s"), Message::user("u")],
            0.0,
            1
        )
        .is_ok());
    }

    #[test]
    fn wire_shape_matches_the_chat_completion_schema() {
        let req =
            request("hello").with_logit_bias([("Person".to_string(), 5.0)].into_iter().collect());
        let value = serde_json::to_value(&req).unwrap();
        assert_eq!(value["model"], "test-model");
        assert_eq!(value["messages"][0]["role"], "user");
        assert_eq!(value["messages"][0]["content"], "hello");
        assert_eq!(value["temperature"], 0.7);
        assert_eq!(value["max_tokens"], 128);
        assert_eq!(value["logit_bias"]["Person"], 5.0);

        let without = request("hello");
        let value = serde_json::to_value(&without).unwrap();
        assert!(value.get("logit_bias").is_none());
    }

    #[test]
    fn fingerprints_are_stable_and_distinct() {
        let a = request("alpha");
        let b = request("beta");
        assert_eq!(a.fingerprint(), request("alpha").fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 32);
    }

    #[test]
    fn mock_serves_inserted_and_directory_fixtures() {
        let req = request("from the directory");
        let dir = tempfile::tempdir().unwrap();
        MockClient::write_fixture(dir.path(), &req, "canned").unwrap();
        let mock = MockClient::from_dir(dir.path()).unwrap();
        assert_eq!(mock.complete(&req).unwrap(), "canned");

        let missing = request("nothing stored");
        assert!(matches!(
            mock.complete(&missing),
            Err(ClientError::MissingFixture(_))
        ));

        let mut memory = MockClient::new();
        memory.insert(&missing, "inline");
        assert_eq!(memory.complete(&missing).unwrap(), "inline");
    }

    struct FlakyClient {
        calls: AtomicU32,
        fail_times: u32,
    }

    impl ModelClient for FlakyClient {
        fn complete(&self, _request: &CompletionRequest) -> Result<String, ClientError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_times {
                Err(ClientError::Http {
                    status: 500,
                    body: "boom".into(),
                })
            } else {
                Ok("recovered".into())
            }
        }

        fn supports_logit_bias(&self) -> bool {
            false
        }
    }

    fn fast_policy(max_attempts: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(2),
        }
    }

    #[test]
    fn retry_recovers_from_transient_failures() {
        let client = FlakyClient {
            calls: AtomicU32::new(0),
            fail_times: 2,
        };
        let out = complete_with_retry(&client, &request("r"), &fast_policy(5)).unwrap();
        assert_eq!(out, "recovered");
        assert_eq!(client.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retry_gives_up_after_the_attempt_bound() {
        let client = FlakyClient {
            calls: AtomicU32::new(0),
            fail_times: 10,
        };
        let err = complete_with_retry(&client, &request("r"), &fast_policy(3)).unwrap_err();
        assert!(matches!(err, ClientError::Exhausted { attempts: 3, .. }));
        assert_eq!(client.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn non_transient_errors_are_not_retried() {
        struct Hard;
        impl ModelClient for Hard {
            fn complete(&self, req: &CompletionRequest) -> Result<String, ClientError> {
                Err(ClientError::MissingFixture(req.fingerprint()))
            }
            fn supports_logit_bias(&self) -> bool {
                true
            }
        }
        let err = complete_with_retry(&Hard, &request("r"), &fast_policy(5)).unwrap_err();
        assert!(matches!(err, ClientError::MissingFixture(_)));
    }
}
