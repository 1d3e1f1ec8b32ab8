//! Event-sourced facilitation sessions.
//!
//! [`SessionState`] is never mutated directly: every operation on a
//! [`Session`] validates its preconditions, emits one or more
//! [`SessionEvent`]s and folds them into the state with the same code path
//! [`replay`] uses. A session log therefore always reproduces the live state.

mod engine;
mod events;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::ActivityDefinition;
use crate::agent::{AgentConversation, AgentProvenance, Role};
use crate::prompt::SessionContext;

pub use engine::{
    new_session_id, Clock, FixedClock, Session, SystemClock, TurnError, HUMAN_PREAMBLE,
};
pub use events::{EventPayload, RecordedArtifact, SessionEvent};

pub type ArtifactId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FullRun,
    Stepwise,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::FullRun => "full_run",
            Mode::Stepwise => "stepwise",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full" | "full_run" => Ok(Mode::FullRun),
            "stepwise" | "step" => Ok(Mode::Stepwise),
            other => Err(format!(
                "unknown mode {other:?} (expected stepwise or full)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingAgent,
    Reviewing,
    Complete,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::AwaitingAgent => "awaiting_agent",
            Phase::Reviewing => "reviewing",
            Phase::Complete => "complete",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Agent,
    Human { author: String },
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Agent => f.write_str("agent"),
            Origin::Human { author } => write!(f, "human:{author}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Proposed,
    Accepted,
    Rejected,
}

impl ReviewStatus {
    pub fn is_terminal(self) -> bool {
        self != ReviewStatus::Proposed
    }
}

impl fmt::Display for ReviewStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReviewStatus::Proposed => "proposed",
            ReviewStatus::Accepted => "accepted",
            ReviewStatus::Rejected => "rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "text", rename_all = "snake_case")]
pub enum ReviewDecision {
    Accept,
    Reject,
    Amend(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub id: ArtifactId,
    pub criterion_key: String,
    pub text: String,
    pub original_text: String,
    pub origin: Origin,
    pub status: ReviewStatus,
    pub cluster_id: Option<String>,
    /// Step whose reply produced the artifact; `None` for human additions
    /// and full-run replies.
    pub step: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    pub label: String,
    pub member_ids: Vec<ArtifactId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HillStatement {
    pub id: String,
    pub text: String,
    pub who_refs: Vec<ArtifactId>,
    pub what_refs: Vec<ArtifactId>,
    pub wow_refs: Vec<ArtifactId>,
}

/// Disclaimers and unclassified text from one agent reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCommentary {
    pub step: Option<u32>,
    pub disclaimers: Vec<String>,
    pub unparsed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub activity: ActivityDefinition,
    pub context: SessionContext,
    pub mode: Mode,
    pub agent: AgentProvenance,
    pub phase: Phase,
    pub current_step: Option<u32>,
    pub conversation: AgentConversation,
    /// Outbound text of the request the agent has not answered yet.
    pub pending_outbound: Option<String>,
    pub board: Vec<Artifact>,
    pub clusters: Vec<Cluster>,
    pub hills: Vec<HillStatement>,
    pub step_commentary: Vec<StepCommentary>,
    /// Human artifacts added since the last agent request.
    pub pending_human: Vec<ArtifactId>,
    pub completion_override: Option<u32>,
    pub last_sequence: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    NotFound,
    Conflict,
    Validation,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("invalid activity: {0}")]
    InvalidActivity(String),
    #[error("context: must not be empty")]
    EmptyContext,
    #[error("{operation} is not allowed while the session is {phase}")]
    WrongPhase {
        operation: &'static str,
        phase: Phase,
    },
    #[error("session is complete and read-only")]
    Completed,
    #[error("advance is only available in stepwise mode")]
    NotStepwise,
    #[error("already at the last step; use complete")]
    AtLastStep,
    #[error(
        "step {current} of {last} is not the last step; complete with override to finish early"
    )]
    StepsRemaining { current: u32, last: u32 },
    #[error("unknown artifact {0}")]
    UnknownArtifact(ArtifactId),
    #[error("artifact {id} is already {status}")]
    TerminalStatus {
        id: ArtifactId,
        status: ReviewStatus,
    },
    #[error("unknown criterion {0:?}")]
    UnknownCriterion(String),
    #[error("{0}: must not be empty")]
    Empty(&'static str),
    #[error("artifact {0} is rejected")]
    RejectedArtifact(ArtifactId),
    #[error("artifact {0} is not accepted")]
    NotAccepted(ArtifactId),
    #[error("hill requires a {0}")]
    MissingHillPart(&'static str),
}

impl SessionError {
    pub fn kind(&self) -> ErrorKind {
        use SessionError::*;
        match self {
            UnknownArtifact(_) => ErrorKind::NotFound,
            WrongPhase { .. }
            | Completed
            | NotStepwise
            | AtLastStep
            | StepsRemaining { .. }
            | TerminalStatus { .. } => ErrorKind::Conflict,
            InvalidActivity(_) | EmptyContext | UnknownCriterion(_) | Empty(_)
            | RejectedArtifact(_) | NotAccepted(_) | MissingHillPart(_) => ErrorKind::Validation,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("event log is empty; SessionStarted required first")]
    Empty,
    #[error("first event must be SessionStarted, found {0}")]
    MissingStart(&'static str),
    #[error("sequence gap: expected {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
    #[error("event {sequence} ({event}) cannot be applied: {reason}")]
    Inapplicable {
        sequence: u64,
        event: &'static str,
        reason: String,
    },
    #[error("line {line}: malformed event: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub activity_name: String,
    pub mode: Mode,
    pub phase: Phase,
    pub counts: BTreeMap<String, usize>,
    pub created_at: DateTime<Utc>,
}

impl SessionState {
    fn from_start(event: &SessionEvent) -> Result<Self, ReplayError> {
        if event.sequence != 1 {
            return Err(ReplayError::Gap {
                expected: 1,
                found: event.sequence,
            });
        }
        match &event.payload {
            EventPayload::SessionStarted {
                session_id,
                activity,
                context,
                mode,
                agent,
            } => Ok(SessionState {
                id: session_id.clone(),
                created_at: event.timestamp,
                activity: activity.clone(),
                context: context.clone(),
                mode: *mode,
                agent: agent.clone(),
                phase: Phase::AwaitingAgent,
                current_step: None,
                conversation: AgentConversation::new(),
                pending_outbound: None,
                board: Vec::new(),
                clusters: Vec::new(),
                hills: Vec::new(),
                step_commentary: Vec::new(),
                pending_human: Vec::new(),
                completion_override: None,
                last_sequence: 1,
            }),
            other => Err(ReplayError::MissingStart(other.type_name())),
        }
    }

    pub fn artifact(&self, id: &str) -> Option<&Artifact> {
        self.board.iter().find(|a| a.id == id)
    }

    fn artifact_mut(&mut self, id: &str) -> Option<&mut Artifact> {
        self.board.iter_mut().find(|a| a.id == id)
    }

    pub fn cluster(&self, id: &str) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.id == id)
    }

    pub fn is_last_step(&self) -> bool {
        self.current_step == Some(self.activity.step_count())
    }

    /// Artifacts of one criterion in board order.
    pub fn column<'a>(&'a self, criterion_key: &'a str) -> impl Iterator<Item = &'a Artifact> + 'a {
        self.board
            .iter()
            .filter(move |a| a.criterion_key == criterion_key)
    }

    pub fn summary(&self) -> SessionSummary {
        let mut counts: BTreeMap<String, usize> = self
            .activity
            .criteria
            .iter()
            .map(|c| (c.key.clone(), 0))
            .collect();
        for artifact in &self.board {
            *counts.entry(artifact.criterion_key.clone()).or_default() += 1;
        }
        SessionSummary {
            id: self.id.clone(),
            activity_name: self.activity.name.clone(),
            mode: self.mode,
            phase: self.phase,
            counts,
            created_at: self.created_at,
        }
    }

    /// Checks the structural invariants that must hold between any two events.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut ids = std::collections::HashSet::new();
        for a in &self.board {
            if !ids.insert(a.id.as_str()) {
                return Err(format!("duplicate artifact id {}", a.id));
            }
            if a.status == ReviewStatus::Rejected && a.cluster_id.is_some() {
                return Err(format!("rejected artifact {} is clustered", a.id));
            }
            if let Some(cid) = &a.cluster_id {
                let member = self
                    .cluster(cid)
                    .is_some_and(|c| c.member_ids.contains(&a.id));
                if !member {
                    return Err(format!(
                        "artifact {} points at {cid} but is not a member",
                        a.id
                    ));
                }
            }
        }
        for c in &self.clusters {
            if c.label.trim().is_empty() {
                return Err(format!("cluster {} has an empty label", c.id));
            }
            for m in &c.member_ids {
                match self.artifact(m) {
                    Some(a) if a.cluster_id.as_deref() == Some(c.id.as_str()) => {}
                    Some(_) => {
                        return Err(format!("{m} listed in {} but assigned elsewhere", c.id))
                    }
                    None => return Err(format!("cluster {} references missing {m}", c.id)),
                }
            }
        }
        for h in &self.hills {
            for r in h.who_refs.iter().chain(&h.what_refs).chain(&h.wow_refs) {
                if self.artifact(r).map(|a| a.status) != Some(ReviewStatus::Accepted) {
                    return Err(format!("hill {} references non-accepted {r}", h.id));
                }
            }
        }
        if self.mode == Mode::Stepwise {
            if let Some(step) = self.current_step {
                if step == 0 || step > self.activity.step_count() {
                    return Err(format!("current step {step} out of range"));
                }
            }
        }
        Ok(())
    }

    /// Folds one event into the state.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), ReplayError> {
        let expected = self.last_sequence + 1;
        if event.sequence != expected {
            return Err(ReplayError::Gap {
                expected,
                found: event.sequence,
            });
        }
        let fail = |reason: String| ReplayError::Inapplicable {
            sequence: event.sequence,
            event: event.payload.type_name(),
            reason,
        };
        if self.phase == Phase::Complete {
            return Err(fail("session is complete".into()));
        }

        match &event.payload {
            EventPayload::SessionStarted { .. } => {
                return Err(fail("session already started".into()));
            }
            EventPayload::AgentRequested { step, outbound, .. } => {
                if self.pending_outbound.is_some() {
                    return Err(fail("a request is already outstanding".into()));
                }
                if let Some(s) = step {
                    if *s == 0 || *s > self.activity.step_count() {
                        return Err(fail(format!("step {s} out of range")));
                    }
                }
                self.pending_outbound = Some(outbound.clone());
                self.current_step = *step;
                self.pending_human.clear();
                self.phase = Phase::AwaitingAgent;
            }
            EventPayload::AgentResponded { reply } => {
                let outbound = self
                    .pending_outbound
                    .take()
                    .ok_or_else(|| fail("no outstanding request".into()))?;
                self.conversation
                    .push(Role::Facilitator, outbound)
                    .and_then(|_| self.conversation.push(Role::Agent, reply.clone()))
                    .map_err(|e| fail(e.to_string()))?;
            }
            EventPayload::ArtifactsRecorded {
                step,
                artifacts,
                disclaimers,
                unparsed,
            } => {
                if self.phase != Phase::AwaitingAgent
                    || self.pending_outbound.is_some()
                    || self.step_commentary.len() >= self.conversation.agent_turns()
                {
                    return Err(fail("no agent reply to record".into()));
                }
                for a in artifacts {
                    if self.artifact(&a.id).is_some() {
                        return Err(fail(format!("duplicate artifact id {}", a.id)));
                    }
                    self.board.push(Artifact {
                        id: a.id.clone(),
                        criterion_key: a.criterion_key.clone(),
                        text: a.text.clone(),
                        original_text: a.text.clone(),
                        origin: Origin::Agent,
                        status: ReviewStatus::Proposed,
                        cluster_id: None,
                        step: *step,
                    });
                }
                self.step_commentary.push(StepCommentary {
                    step: *step,
                    disclaimers: disclaimers.clone(),
                    unparsed: unparsed.clone(),
                });
                self.phase = Phase::Reviewing;
            }
            EventPayload::HumanArtifactAdded {
                id,
                criterion_key,
                text,
                author,
            } => {
                if self.artifact(id).is_some() {
                    return Err(fail(format!("duplicate artifact id {id}")));
                }
                self.board.push(Artifact {
                    id: id.clone(),
                    criterion_key: criterion_key.clone(),
                    text: text.clone(),
                    original_text: text.clone(),
                    origin: Origin::Human {
                        author: author.clone(),
                    },
                    status: ReviewStatus::Proposed,
                    cluster_id: None,
                    step: None,
                });
                self.pending_human.push(id.clone());
            }
            EventPayload::ArtifactReviewed {
                artifact_id,
                decision,
            } => {
                let artifact = self
                    .artifact_mut(artifact_id)
                    .ok_or_else(|| fail(format!("unknown artifact {artifact_id}")))?;
                if artifact.status.is_terminal() {
                    return Err(fail(format!("artifact {artifact_id} is terminal")));
                }
                let mut leave_cluster = None;
                match decision {
                    ReviewDecision::Accept => artifact.status = ReviewStatus::Accepted,
                    ReviewDecision::Reject => {
                        artifact.status = ReviewStatus::Rejected;
                        leave_cluster = artifact.cluster_id.take();
                    }
                    ReviewDecision::Amend(text) => artifact.text = text.clone(),
                }
                if let Some(cid) = leave_cluster {
                    if let Some(c) = self.clusters.iter_mut().find(|c| c.id == cid) {
                        c.member_ids.retain(|m| m != artifact_id);
                    }
                }
            }
            EventPayload::ClusterAssigned {
                cluster_id,
                label,
                artifact_ids,
            } => {
                for id in artifact_ids {
                    match self.artifact(id) {
                        None => return Err(fail(format!("unknown artifact {id}"))),
                        Some(a) if a.status == ReviewStatus::Rejected => {
                            return Err(fail(format!("artifact {id} is rejected")))
                        }
                        Some(_) => {}
                    }
                }
                if self.cluster(cluster_id).is_none() {
                    self.clusters.push(Cluster {
                        id: cluster_id.clone(),
                        label: label.clone(),
                        member_ids: Vec::new(),
                    });
                }
                for id in artifact_ids {
                    let previous = self.artifact(id).and_then(|a| a.cluster_id.clone());
                    if previous.as_deref() == Some(cluster_id.as_str()) {
                        continue;
                    }
                    if let Some(prev) = previous {
                        if let Some(c) = self.clusters.iter_mut().find(|c| c.id == prev) {
                            c.member_ids.retain(|m| m != id);
                        }
                    }
                    let cluster = self
                        .clusters
                        .iter_mut()
                        .find(|c| c.id == *cluster_id)
                        .expect("cluster inserted above");
                    cluster.member_ids.push(id.clone());
                    self.artifact_mut(id).expect("checked above").cluster_id =
                        Some(cluster_id.clone());
                }
            }
            EventPayload::HillComposed {
                hill_id,
                text,
                who_refs,
                what_refs,
                wow_refs,
            } => {
                for r in who_refs.iter().chain(what_refs).chain(wow_refs) {
                    if self.artifact(r).map(|a| a.status) != Some(ReviewStatus::Accepted) {
                        return Err(fail(format!("artifact {r} is not accepted")));
                    }
                }
                self.hills.push(HillStatement {
                    id: hill_id.clone(),
                    text: text.clone(),
                    who_refs: who_refs.clone(),
                    what_refs: what_refs.clone(),
                    wow_refs: wow_refs.clone(),
                });
            }
            EventPayload::SessionCompleted { override_at_step } => {
                if self.phase != Phase::Reviewing {
                    return Err(fail(format!("cannot complete while {}", self.phase)));
                }
                self.completion_override = *override_at_step;
                self.phase = Phase::Complete;
            }
        }
        self.last_sequence = event.sequence;
        Ok(())
    }
}

/// Rebuilds a session state from its full event log.
pub fn replay(events: &[SessionEvent]) -> Result<SessionState, ReplayError> {
    let (first, rest) = events.split_first().ok_or(ReplayError::Empty)?;
    let mut state = SessionState::from_start(first)?;
    for event in rest {
        state.apply(event)?;
    }
    Ok(state)
}

/// Parses a JSON-lines event log. Blank lines are ignored.
pub fn parse_event_log(text: &str) -> Result<Vec<SessionEvent>, ReplayError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ReplayError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// JSON-lines rendering of events, one per line with a trailing LF.
pub fn render_event_log(events: &[SessionEvent]) -> String {
    events.iter().map(|e| e.to_json_line() + "\n").collect()
}
