//! Conversational agent gateway.
//!
//! A conversation is owned by the caller; [`send`] transmits the full history
//! plus the new facilitator turn and appends both messages only after the
//! agent has replied.

use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tracing::{debug, warn};

/// Environment variable holding the bearer token for remote providers.
pub const TOKEN_ENV: &str = "CHAI_AGENT_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    Facilitator,
    Agent,
}

impl Role {
    /// Role name on the chat-completion wire.
    pub fn wire_name(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::Facilitator => "user",
            Role::Agent => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub ordinal: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConversationError {
    #[error("message text must not be empty")]
    EmptyText,
    #[error("expected a {expected:?} message, got {got:?}")]
    OutOfTurn { expected: Role, got: Role },
}

/// Append-only message history. After an optional leading system message,
/// roles alternate facilitator, agent, facilitator, ...
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConversation {
    messages: Vec<Message>,
}

impl AgentConversation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn agent_turns(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| m.role == Role::Agent)
            .count()
    }

    fn expected_role(&self) -> Role {
        match self.messages.last() {
            None
            | Some(Message {
                role: Role::System, ..
            })
            | Some(Message {
                role: Role::Agent, ..
            }) => Role::Facilitator,
            Some(Message {
                role: Role::Facilitator,
                ..
            }) => Role::Agent,
        }
    }

    pub fn push(&mut self, role: Role, text: impl Into<String>) -> Result<(), ConversationError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ConversationError::EmptyText);
        }
        let allowed = if role == Role::System {
            self.messages.is_empty()
        } else {
            role == self.expected_role()
        };
        if !allowed {
            return Err(ConversationError::OutOfTurn {
                expected: self.expected_role(),
                got: role,
            });
        }
        let ordinal = self.messages.len() as u32 + 1;
        self.messages.push(Message {
            role,
            text,
            ordinal,
        });
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("outbound message must not be empty")]
    EmptyOutbound,
    #[error("script exhausted: no reply recorded for turn {turn}")]
    ScriptExhausted { turn: usize },
    #[error("agent returned an empty reply")]
    EmptyReply,
    #[error("agent request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("agent endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected reply shape: {0}")]
    MalformedReply(String),
    #[error("malformed transcript: {0}")]
    Transcript(String),
    #[error("invalid agent profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Conversation(#[from] ConversationError),
}

impl AgentError {
    /// Whether a later attempt could succeed.
    fn is_retryable(&self) -> bool {
        match self {
            AgentError::Timeout | AgentError::Transport(_) => true,
            AgentError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// What produced the agent's replies, recorded once per session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProvenance {
    pub provider: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl AgentProvenance {
    pub fn manual() -> Self {
        Self {
            provider: "manual".into(),
            model: None,
            temperature: None,
        }
    }
}

pub trait ChatAgent: Send + Sync {
    /// Produces the reply to the last message in `history`.
    fn complete(&self, history: &[Message]) -> Result<String, AgentError>;

    fn provenance(&self) -> AgentProvenance;
}

/// Sends `outbound` with the full prior history and records the exchange.
/// On error the conversation is left unchanged.
pub fn send(
    conversation: &mut AgentConversation,
    outbound: &str,
    agent: &dyn ChatAgent,
) -> Result<String, AgentError> {
    if outbound.trim().is_empty() {
        return Err(AgentError::EmptyOutbound);
    }
    let mut staged = conversation.clone();
    staged.push(Role::Facilitator, outbound)?;
    let reply = agent.complete(staged.messages())?;
    if reply.trim().is_empty() {
        return Err(AgentError::EmptyReply);
    }
    staged.push(Role::Agent, reply.clone())?;
    *conversation = staged;
    Ok(reply)
}

/// Replays a fixed list of replies. The reply for a turn is chosen by how
/// many agent messages the history already holds, so one provider can serve
/// any number of conversations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedAgent {
    replies: Vec<String>,
}

impl ScriptedAgent {
    pub fn new(replies: Vec<String>) -> Self {
        Self { replies }
    }

    pub fn replies(&self) -> &[String] {
        &self.replies
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }

    /// Transcript file body: a JSON list of strings.
    pub fn save(&self) -> String {
        let mut out = serde_json::to_string_pretty(&self.replies).expect("strings serialize");
        out.push('\n');
        out
    }
}

impl ChatAgent for ScriptedAgent {
    fn complete(&self, history: &[Message]) -> Result<String, AgentError> {
        let turn = history.iter().filter(|m| m.role == Role::Agent).count();
        self.replies
            .get(turn)
            .cloned()
            .ok_or(AgentError::ScriptExhausted { turn: turn + 1 })
    }

    fn provenance(&self) -> AgentProvenance {
        AgentProvenance {
            provider: "scripted".into(),
            model: None,
            temperature: None,
        }
    }
}

pub fn load_transcript(source: &str) -> Result<ScriptedAgent, AgentError> {
    let replies: Vec<String> =
        serde_json::from_str(source).map_err(|e| AgentError::Transcript(e.to_string()))?;
    Ok(ScriptedAgent::new(replies))
}

pub fn load_transcript_file(path: &Path) -> Result<ScriptedAgent, AgentError> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| AgentError::Transcript(format!("{}: {e}", path.display())))?;
    load_transcript(&body)
}

pub const DEFAULT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteProfile {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

impl RemoteProfile {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.endpoint.trim().is_empty() {
            return Err(AgentError::Profile("endpoint must not be empty".into()));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(AgentError::Profile("timeout must be positive".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(AgentError::Profile("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case")]
pub enum AgentProfile {
    Scripted { transcript: PathBuf },
    Remote(RemoteProfile),
}

impl AgentProfile {
    pub fn connect(&self) -> Result<Box<dyn ChatAgent>, AgentError> {
        match self {
            AgentProfile::Scripted { transcript } => {
                Ok(Box::new(load_transcript_file(transcript)?))
            }
            AgentProfile::Remote(profile) => Ok(Box::new(RemoteAgent::new(profile.clone())?)),
        }
    }
}

/// The agent a stored session is driven by. Scripted replies are kept inline
/// so a binding stays valid after the original transcript file moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case")]
pub enum AgentBinding {
    Scripted { replies: Vec<String> },
    Remote(RemoteProfile),
}

impl AgentBinding {
    pub fn connect(&self) -> Result<Box<dyn ChatAgent>, AgentError> {
        match self {
            AgentBinding::Scripted { replies } => Ok(Box::new(ScriptedAgent::new(replies.clone()))),
            AgentBinding::Remote(profile) => Ok(Box::new(RemoteAgent::new(profile.clone())?)),
        }
    }
}

impl AgentProfile {
    pub fn bind(&self) -> Result<AgentBinding, AgentError> {
        match self {
            AgentProfile::Scripted { transcript } => Ok(AgentBinding::Scripted {
                replies: load_transcript_file(transcript)?.replies,
            }),
            AgentProfile::Remote(profile) => {
                profile.validate()?;
                Ok(AgentBinding::Remote(profile.clone()))
            }
        }
    }
}

/// Chat-completion client. The whole history goes out on every call.
#[derive(Debug, Clone)]
pub struct RemoteAgent {
    profile: RemoteProfile,
    token: Option<String>,
}

impl RemoteAgent {
    pub fn new(profile: RemoteProfile) -> Result<Self, AgentError> {
        profile.validate()?;
        Ok(Self {
            profile,
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        })
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    pub fn request_body(&self, history: &[Message]) -> serde_json::Value {
        let messages: Vec<_> = history
            .iter()
            .map(|m| json!({ "role": m.role.wire_name(), "content": m.text }))
            .collect();
        json!({
            "model": self.profile.model,
            "temperature": self.profile.temperature,
            "messages": messages,
        })
    }

    fn attempt(
        &self,
        client: &reqwest::blocking::Client,
        body: &serde_json::Value,
    ) -> Result<String, AgentError> {
        let mut request = client.post(&self.profile.endpoint).json(body);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                AgentError::Timeout
            } else {
                AgentError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        let text = response.text().map_err(|e| {
            if e.is_timeout() {
                AgentError::Timeout
            } else {
                AgentError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            return Err(AgentError::Http {
                status: status.as_u16(),
                body: text,
            });
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| AgentError::MalformedReply(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(String::from)
            .ok_or_else(|| AgentError::MalformedReply("missing choices[0].message.content".into()))
    }
}

impl ChatAgent for RemoteAgent {
    fn complete(&self, history: &[Message]) -> Result<String, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(self.profile.timeout_secs))
            .build()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        let body = self.request_body(history);
        let mut attempt = 0;
        loop {
            match self.attempt(&client, &body) {
                Ok(reply) => return Ok(reply),
                Err(err) if err.is_retryable() && attempt < self.profile.max_retries => {
                    attempt += 1;
                    warn!(%err, attempt, "agent request failed, retrying");
                    thread::sleep(Duration::from_millis(100 * u64::from(attempt)));
                }
                Err(err) => {
                    debug!(%err, "agent request failed");
                    return Err(err);
                }
            }
        }
    }

    fn provenance(&self) -> AgentProvenance {
        AgentProvenance {
            provider: "remote".into(),
            model: Some(self.profile.model.clone()),
            temperature: Some(self.profile.temperature),
        }
    }
}
