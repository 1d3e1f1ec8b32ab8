//! Orchestration core for human-AI Design Thinking sessions.
//!
//! - [`activity`]: activity definitions and the built-in Hills exercise
//! - [`prompt`]: six-part prompt composition and execute directives
//! - [`parser`]: agent reply parsing into artifact drafts
//! - [`agent`]: conversation history and chat providers (scripted, remote)
//! - [`session`]: the event-sourced facilitation state machine
//! - [`store`], [`export`], [`config`]: persistence, reports and settings

pub mod activity;
pub mod agent;
pub mod config;
pub mod export;
pub mod parser;
pub mod prompt;
pub mod session;
pub mod store;

pub use activity::{
    builtin_hills, load_activity, validate_activity, ActivityDefinition, ActivityError,
    CriterionDefinition, StepDefinition, Violation,
};
pub use agent::{
    load_transcript, send, AgentBinding, AgentConversation, AgentError, AgentProfile,
    AgentProvenance, ChatAgent, Message, RemoteAgent, RemoteProfile, Role, ScriptedAgent,
};
pub use config::Config;
pub use export::{export_session, ExportDocument, ExportFormat};
pub use parser::{
    detect_disclaimer, parse_full_response, parse_step_response, render_drafts, ArtifactDraft,
    ParsedResponse, ResponseParser,
};
pub use prompt::{
    compose_initial_prompt, make_full_run_directive, make_step_directive, render_full_text,
    ComposedPrompt, DirectiveScope, ExecuteDirective, SegmentKind, SessionContext,
};
pub use session::{
    replay, Artifact, Cluster, ErrorKind, EventPayload, HillStatement, Mode, Origin, Phase,
    ReplayError, ReviewDecision, ReviewStatus, Session, SessionError, SessionEvent, SessionState,
    SessionSummary,
};
pub use store::FileStore;
