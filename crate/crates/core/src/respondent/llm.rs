use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{run_dialogue, CallKey, Message, Respondent, Scenario, Session, TrialSeed};
use crate::error::{Error, Result};
use crate::population::{AugmentedPersona, Question};
use crate::Arm;

/// A chat-completion model: message list in, reply text out.
pub trait ChatModel: Send + Sync {
    fn complete(&self, messages: &[Message], call: &CallKey) -> Result<String>;
}

impl<T: ChatModel + ?Sized> ChatModel for Arc<T> {
    fn complete(&self, messages: &[Message], call: &CallKey) -> Result<String> {
        (**self).complete(messages, call)
    }
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_attempts() -> u32 {
    4
}
fn default_backoff() -> u64 {
    500
}
fn default_max_backoff() -> u64 {
    8_000
}
fn default_in_flight() -> usize {
    8
}
fn default_timeout() -> u64 {
    120
}
fn default_true() -> bool {
    true
}

/// Connection and sampling settings for an OpenAI-style endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    /// Base URL such as `http://localhost:8000/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key; unset means no auth header.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    /// Send a per-call seed derived from the trial coordinates.
    #[serde(default = "default_true")]
    pub send_seed: bool,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_max_backoff")]
    pub max_backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl LlmSettings {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: default_key_env(),
            temperature: None,
            top_p: None,
            top_k: None,
            max_tokens: None,
            send_seed: true,
            max_attempts: default_attempts(),
            initial_backoff_ms: default_backoff(),
            max_backoff_ms: default_max_backoff(),
            max_in_flight: default_in_flight(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_url.trim().is_empty() || self.model.trim().is_empty() {
            return Err(Error::Config("llm backend needs base_url and model".into()));
        }
        if self.max_attempts == 0 || self.max_in_flight == 0 {
            return Err(Error::Config("max_attempts and max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    fn endpoint(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct InFlight {
    limit: usize,
    state: Mutex<(usize, usize)>,
    cv: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            state: Mutex::new((0, 0)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut st = self.state.lock().expect("in-flight lock");
        while st.0 >= self.limit {
            st = self.cv.wait(st).expect("in-flight lock");
        }
        st.0 += 1;
        st.1 = st.1.max(st.0);
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut st = self.0.state.lock().expect("in-flight lock");
        st.0 -= 1;
        self.0.cv.notify_one();
    }
}

/// Blocking client for the chat-completions protocol with bounded retries,
/// exponential backoff and an in-flight request limit.
pub struct HttpChatModel {
    settings: LlmSettings,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: InFlight,
}

impl std::fmt::Debug for HttpChatModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatModel")
            .field("settings", &self.settings)
            .field("api_key", &self.api_key.as_ref().map(|_| "<set>"))
            .finish()
    }
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

impl HttpChatModel {
    pub fn new(settings: LlmSettings) -> Result<Self> {
        settings.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let api_key = std::env::var(&settings.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self {
            gate: InFlight::new(settings.max_in_flight),
            settings,
            client,
            api_key,
        })
    }

    /// Highest number of simultaneous requests observed so far.
    pub fn peak_in_flight(&self) -> usize {
        self.gate.state.lock().expect("in-flight lock").1
    }

    fn body(&self, messages: &[Message], call: &CallKey) -> serde_json::Value {
        let mut body = json!({ "model": self.settings.model, "messages": messages });
        let obj = body.as_object_mut().expect("object literal");
        if let Some(t) = self.settings.temperature {
            obj.insert("temperature".into(), json!(t));
        }
        if let Some(p) = self.settings.top_p {
            obj.insert("top_p".into(), json!(p));
        }
        if let Some(k) = self.settings.top_k {
            obj.insert("top_k".into(), json!(k));
        }
        if let Some(m) = self.settings.max_tokens {
            obj.insert("max_tokens".into(), json!(m));
        }
        if self.settings.send_seed {
            obj.insert("seed".into(), json!(call.provider_seed()));
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let _slot = self.gate.acquire();
        let mut req = self.client.post(self.settings.endpoint()).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}")),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(format!("status {status}"));
        }
        if !status.is_success() {
            return Attempt::Fatal(format!("status {status}: {}", text.chars().take(200).collect::<String>()));
        }
        let parsed: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Attempt::Retry(format!("invalid JSON: {e}")),
        };
        match parsed["choices"][0]["message"]["content"].as_str() {
            Some(c) => Attempt::Done(c.to_string()),
            None => Attempt::Retry("response has no choices[0].message.content".into()),
        }
    }
}

impl ChatModel for HttpChatModel {
    fn complete(&self, messages: &[Message], call: &CallKey) -> Result<String> {
        let body = self.body(messages, call);
        let mut log = Vec::new();
        let mut delay = self.settings.initial_backoff_ms;
        for attempt in 1..=self.settings.max_attempts {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(msg) => {
                    log.push(format!("attempt {attempt}: {msg}"));
                    return Err(Error::Backend {
                        attempts: attempt,
                        message: msg,
                        log,
                    });
                }
                Attempt::Retry(msg) => {
                    log.push(format!("attempt {attempt}: {msg}"));
                    if attempt < self.settings.max_attempts {
                        std::thread::sleep(Duration::from_millis(delay));
                        delay = (delay * 2).min(self.settings.max_backoff_ms);
                    }
                }
            }
        }
        Err(Error::Backend {
            attempts: self.settings.max_attempts,
            message: log.last().cloned().unwrap_or_default(),
            log,
        })
    }
}

/// Respondent driven by chat models: the simulated user answers questions and,
/// in agent dialogues, talks with a separately configured agent model.
#[derive(Clone)]
pub struct LlmRespondent {
    user: Arc<dyn ChatModel>,
    agent: Option<Arc<dyn ChatModel>>,
}

impl LlmRespondent {
    pub fn new(user: Arc<dyn ChatModel>, agent: Option<Arc<dyn ChatModel>>) -> Self {
        Self { user, agent }
    }
}

impl Respondent for LlmRespondent {
    fn open_session(&self, persona: &AugmentedPersona, arm: Arm, scenario: &Scenario, seed: TrialSeed) -> Result<Session> {
        scenario.validate()?;
        let transcript = match scenario {
            Scenario::Survey { .. } => None,
            Scenario::AgentDialogue { .. } => {
                let agent = self
                    .agent
                    .as_ref()
                    .ok_or_else(|| Error::Config("agent dialogue needs an agent model".into()))?;
                Some(run_dialogue(self.user.as_ref(), agent.as_ref(), persona, arm, scenario, &seed)?)
            }
        };
        Ok(Session::new(persona, arm, scenario, seed, transcript))
    }

    fn ask(&self, session: &Session, q: &Question) -> Result<String> {
        let messages = session.branch_messages(q);
        self.user
            .complete(&messages, &CallKey::new(session.seed.with_question(&q.id), "answer"))
    }
}
