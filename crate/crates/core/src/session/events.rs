use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ArtifactId, Mode, ReviewDecision};
use crate::activity::ActivityDefinition;
use crate::agent::AgentProvenance;
use crate::prompt::SessionContext;

/// One line of the append-only session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub sequence: u64,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedArtifact {
    pub id: ArtifactId,
    pub criterion_key: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload")]
pub enum EventPayload {
    SessionStarted {
        session_id: String,
        activity: ActivityDefinition,
        context: SessionContext,
        mode: Mode,
        agent: AgentProvenance,
    },
    AgentRequested {
        step: Option<u32>,
        outbound: String,
        /// Human artifacts announced in this request's preamble.
        #[serde(default)]
        human_refs: Vec<ArtifactId>,
    },
    AgentResponded {
        reply: String,
    },
    ArtifactsRecorded {
        step: Option<u32>,
        artifacts: Vec<RecordedArtifact>,
        disclaimers: Vec<String>,
        unparsed: Vec<String>,
    },
    HumanArtifactAdded {
        id: ArtifactId,
        criterion_key: String,
        text: String,
        author: String,
    },
    ArtifactReviewed {
        artifact_id: ArtifactId,
        decision: ReviewDecision,
    },
    ClusterAssigned {
        cluster_id: String,
        label: String,
        artifact_ids: Vec<ArtifactId>,
    },
    HillComposed {
        hill_id: String,
        text: String,
        who_refs: Vec<ArtifactId>,
        what_refs: Vec<ArtifactId>,
        wow_refs: Vec<ArtifactId>,
    },
    SessionCompleted {
        /// Step at which the facilitator ended a stepwise session early.
        #[serde(default)]
        override_at_step: Option<u32>,
    },
}

impl EventPayload {
    pub fn type_name(&self) -> &'static str {
        match self {
            EventPayload::SessionStarted { .. } => "SessionStarted",
            EventPayload::AgentRequested { .. } => "AgentRequested",
            EventPayload::AgentResponded { .. } => "AgentResponded",
            EventPayload::ArtifactsRecorded { .. } => "ArtifactsRecorded",
            EventPayload::HumanArtifactAdded { .. } => "HumanArtifactAdded",
            EventPayload::ArtifactReviewed { .. } => "ArtifactReviewed",
            EventPayload::ClusterAssigned { .. } => "ClusterAssigned",
            EventPayload::HillComposed { .. } => "HillComposed",
            EventPayload::SessionCompleted { .. } => "SessionCompleted",
        }
    }
}

impl SessionEvent {
    /// Single-line JSON, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}
