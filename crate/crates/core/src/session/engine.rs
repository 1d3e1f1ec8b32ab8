use std::collections::HashSet;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};

use super::{
    replay, ArtifactId, EventPayload, Mode, Phase, RecordedArtifact, ReplayError, ReviewDecision,
    ReviewStatus, SessionError, SessionEvent, SessionState,
};
use crate::activity::{validate_activity, ActivityDefinition};
use crate::agent::{self, AgentError, AgentProvenance, ChatAgent};
use crate::parser::ResponseParser;
use crate::prompt::{
    compose_initial_prompt, make_full_run_directive, make_step_directive, SessionContext,
};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

/// Lead-in line for human contributions relayed to the agent; `{criterion}`
/// is replaced by the criterion key.
pub const HUMAN_PREAMBLE: &str =
    "The human participants added the following \"{criterion}\" ideas:";

/// Sortable, process-unique session id such as `s20261017T093000123-0001`.
pub fn new_session_id(now: DateTime<Utc>) -> String {
    static COUNTER: AtomicU32 = AtomicU32::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed) % 0x1_0000;
    format!("s{}-{n:04x}", now.format("%Y%m%dT%H%M%S%3f"))
}

fn artifact_id(n: usize) -> ArtifactId {
    format!("a{n:05}")
}

/// A live session: current state plus the events that produced it.
pub struct Session {
    state: SessionState,
    events: Vec<SessionEvent>,
    parser: ResponseParser,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.state.id)
            .field("events", &self.events.len())
            .finish()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TurnError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl Session {
    /// Starts a session and returns the initial prompt for the agent.
    pub fn start(
        id: impl Into<String>,
        activity: ActivityDefinition,
        context: &str,
        mode: Mode,
        agent: AgentProvenance,
        parser: ResponseParser,
        clock: Arc<dyn Clock>,
    ) -> Result<(Session, String), SessionError> {
        let violations = validate_activity(&activity);
        if !violations.is_empty() {
            let joined = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(SessionError::InvalidActivity(joined));
        }
        let context = SessionContext::new(context).map_err(|_| SessionError::EmptyContext)?;
        let (directive, step) = match mode {
            Mode::Stepwise => (
                make_step_directive(&activity, 1).expect("validated activity has a step"),
                Some(1),
            ),
            Mode::FullRun => (make_full_run_directive(&activity), None),
        };
        let prompt = compose_initial_prompt(&activity, &context, &directive)
            .expect("directive built for this activity");
        let outbound = prompt.full_text().to_string();

        let timestamp = clock.now();
        let started = SessionEvent {
            sequence: 1,
            timestamp,
            payload: EventPayload::SessionStarted {
                session_id: id.into(),
                activity,
                context,
                mode,
                agent,
            },
        };
        let mut session = Session {
            state: SessionState::from_start(&started).expect("well-formed start event"),
            events: vec![started],
            parser,
            clock,
        };
        session.emit(EventPayload::AgentRequested {
            step,
            outbound: outbound.clone(),
            human_refs: Vec::new(),
        });
        Ok((session, outbound))
    }

    /// Rebuilds a session from its log.
    pub fn restore(
        events: Vec<SessionEvent>,
        parser: ResponseParser,
        clock: Arc<dyn Clock>,
    ) -> Result<Session, ReplayError> {
        let state = replay(&events)?;
        Ok(Session {
            state,
            events,
            parser,
            clock,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn id(&self) -> &str {
        &self.state.id
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    /// Events with a sequence number greater than `sequence`.
    pub fn events_after(&self, sequence: u64) -> &[SessionEvent] {
        let start = (sequence as usize).min(self.events.len());
        &self.events[start..]
    }

    pub fn into_parts(self) -> (SessionState, Vec<SessionEvent>) {
        (self.state, self.events)
    }

    fn emit(&mut self, payload: EventPayload) {
        let event = SessionEvent {
            sequence: self.state.last_sequence + 1,
            timestamp: self.clock.now(),
            payload,
        };
        self.state
            .apply(&event)
            .expect("preconditions checked before emitting");
        self.events.push(event);
    }

    fn ensure_open(&self) -> Result<(), SessionError> {
        if self.state.phase == Phase::Complete {
            Err(SessionError::Completed)
        } else {
            Ok(())
        }
    }

    fn require_phase(&self, operation: &'static str, phase: Phase) -> Result<(), SessionError> {
        self.ensure_open()?;
        if self.state.phase != phase {
            return Err(SessionError::WrongPhase {
                operation,
                phase: self.state.phase,
            });
        }
        Ok(())
    }

    /// Outbound text awaiting an agent reply, if any.
    pub fn pending_outbound(&self) -> Option<&str> {
        self.state.pending_outbound.as_deref()
    }

    /// Parses the agent's reply and records its drafts as proposed artifacts.
    pub fn apply_agent_response(&mut self, text: &str) -> Result<(), SessionError> {
        self.require_phase("apply_agent_response", Phase::AwaitingAgent)?;
        if text.trim().is_empty() {
            return Err(SessionError::Empty("response"));
        }
        let step = self.state.current_step;
        let parsed = match self.state.mode {
            Mode::FullRun => self
                .parser
                .parse_full_response(text, &self.state.activity.criteria),
            Mode::Stepwise => {
                let step_def = self
                    .state
                    .activity
                    .step(step.expect("stepwise sessions always have a step"))
                    .expect("current step in range");
                match &step_def.produces_criterion {
                    Some(key) => self.parser.parse_step_response(text, key),
                    None => self.parser.parse_commentary(text),
                }
            }
        };
        let first = self.state.board.len() + 1;
        let artifacts = parsed
            .drafts
            .into_iter()
            .enumerate()
            .map(|(i, d)| RecordedArtifact {
                id: artifact_id(first + i),
                criterion_key: d.criterion_key,
                text: d.text,
            })
            .collect();
        self.emit(EventPayload::AgentResponded {
            reply: text.to_string(),
        });
        self.emit(EventPayload::ArtifactsRecorded {
            step,
            artifacts,
            disclaimers: parsed.disclaimers,
            unparsed: parsed.unparsed,
        });
        Ok(())
    }

    /// Sends the outstanding request to `agent` and records the reply. The
    /// session is untouched when the agent fails.
    pub fn request_reply(&mut self, agent: &dyn ChatAgent) -> Result<String, TurnError> {
        self.require_phase("request_reply", Phase::AwaitingAgent)?;
        let outbound = self
            .state
            .pending_outbound
            .clone()
            .ok_or(SessionError::WrongPhase {
                operation: "request_reply",
                phase: self.state.phase,
            })?;
        let mut conversation = self.state.conversation.clone();
        let reply = agent::send(&mut conversation, &outbound, agent)?;
        self.apply_agent_response(&reply)?;
        debug_assert_eq!(conversation, self.state.conversation);
        Ok(reply)
    }

    /// Human contributions not yet relayed, rendered as the request preamble.
    pub fn human_preamble(&self) -> (String, Vec<ArtifactId>) {
        let mut text = String::new();
        let mut refs = Vec::new();
        for criterion in &self.state.activity.criteria {
            let items: Vec<_> = self
                .state
                .pending_human
                .iter()
                .filter_map(|id| self.state.artifact(id))
                .filter(|a| a.criterion_key == criterion.key && a.status != ReviewStatus::Rejected)
                .collect();
            if items.is_empty() {
                continue;
            }
            text.push_str(&HUMAN_PREAMBLE.replace("{criterion}", &criterion.key));
            text.push('\n');
            for (i, a) in items.iter().enumerate() {
                text.push_str(&format!("{}. {}\n", i + 1, a.text));
                refs.push(a.id.clone());
            }
        }
        (text, refs)
    }

    /// Moves a stepwise session to its next step and returns the outbound
    /// request.
    pub fn advance(&mut self) -> Result<String, SessionError> {
        self.require_phase("advance", Phase::Reviewing)?;
        if self.state.mode != Mode::Stepwise {
            return Err(SessionError::NotStepwise);
        }
        if self.state.is_last_step() {
            return Err(SessionError::AtLastStep);
        }
        let next = self.state.current_step.unwrap_or(0) + 1;
        let directive =
            make_step_directive(&self.state.activity, next).expect("next step is within range");
        let (mut outbound, human_refs) = self.human_preamble();
        outbound.push_str(&directive.text);
        self.emit(EventPayload::AgentRequested {
            step: Some(next),
            outbound: outbound.clone(),
            human_refs,
        });
        Ok(outbound)
    }

    pub fn submit_human_artifact(
        &mut self,
        criterion_key: &str,
        text: &str,
        author: &str,
    ) -> Result<ArtifactId, SessionError> {
        self.ensure_open()?;
        if self.state.activity.criterion(criterion_key).is_none() {
            return Err(SessionError::UnknownCriterion(criterion_key.to_string()));
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(SessionError::Empty("text"));
        }
        let author = author.trim();
        if author.is_empty() {
            return Err(SessionError::Empty("author"));
        }
        let id = artifact_id(self.state.board.len() + 1);
        self.emit(EventPayload::HumanArtifactAdded {
            id: id.clone(),
            criterion_key: criterion_key.to_string(),
            text: text.to_string(),
            author: author.to_string(),
        });
        Ok(id)
    }

    pub fn review_artifact(
        &mut self,
        artifact_id: &str,
        decision: ReviewDecision,
    ) -> Result<(), SessionError> {
        self.ensure_open()?;
        let artifact = self
            .state
            .artifact(artifact_id)
            .ok_or_else(|| SessionError::UnknownArtifact(artifact_id.to_string()))?;
        if artifact.status.is_terminal() {
            return Err(SessionError::TerminalStatus {
                id: artifact_id.to_string(),
                status: artifact.status,
            });
        }
        let decision = match decision {
            ReviewDecision::Amend(text) => {
                let text = text.trim();
                if text.is_empty() {
                    return Err(SessionError::Empty("amended text"));
                }
                ReviewDecision::Amend(text.to_string())
            }
            other => other,
        };
        self.emit(EventPayload::ArtifactReviewed {
            artifact_id: artifact_id.to_string(),
            decision,
        });
        Ok(())
    }

    /// Adds artifacts to the cluster named `label`, creating it if needed.
    /// Artifacts already in another cluster move.
    pub fn assign_cluster(
        &mut self,
        artifact_ids: &[ArtifactId],
        label: &str,
    ) -> Result<String, SessionError> {
        self.ensure_open()?;
        let label = label.trim();
        if label.is_empty() {
            return Err(SessionError::Empty("label"));
        }
        if artifact_ids.is_empty() {
            return Err(SessionError::Empty("artifact ids"));
        }
        let mut seen = HashSet::new();
        let mut ids = Vec::new();
        for id in artifact_ids {
            let artifact = self
                .state
                .artifact(id)
                .ok_or_else(|| SessionError::UnknownArtifact(id.clone()))?;
            if artifact.status == ReviewStatus::Rejected {
                return Err(SessionError::RejectedArtifact(id.clone()));
            }
            if seen.insert(id.as_str()) {
                ids.push(id.clone());
            }
        }
        let cluster_id = self
            .state
            .clusters
            .iter()
            .find(|c| c.label == label)
            .map(|c| c.id.clone())
            .unwrap_or_else(|| format!("c{:04}", self.state.clusters.len() + 1));
        self.emit(EventPayload::ClusterAssigned {
            cluster_id: cluster_id.clone(),
            label: label.to_string(),
            artifact_ids: ids,
        });
        Ok(cluster_id)
    }

    pub fn compose_hill(
        &mut self,
        who_refs: &[ArtifactId],
        what_refs: &[ArtifactId],
        wow_refs: &[ArtifactId],
        text: &str,
    ) -> Result<String, SessionError> {
        self.ensure_open()?;
        let text = text.trim();
        if text.is_empty() {
            return Err(SessionError::Empty("text"));
        }
        for (part, refs) in [("who", who_refs), ("what", what_refs), ("wow", wow_refs)] {
            if refs.is_empty() {
                return Err(SessionError::MissingHillPart(part));
            }
        }
        for id in who_refs.iter().chain(what_refs).chain(wow_refs) {
            let artifact = self
                .state
                .artifact(id)
                .ok_or_else(|| SessionError::UnknownArtifact(id.clone()))?;
            if artifact.status != ReviewStatus::Accepted {
                return Err(SessionError::NotAccepted(id.clone()));
            }
        }
        let hill_id = format!("h{:04}", self.state.hills.len() + 1);
        self.emit(EventPayload::HillComposed {
            hill_id: hill_id.clone(),
            text: text.to_string(),
            who_refs: who_refs.to_vec(),
            what_refs: what_refs.to_vec(),
            wow_refs: wow_refs.to_vec(),
        });
        Ok(hill_id)
    }

    /// Ends the session. A stepwise session must be on its last step unless
    /// `override_early` is set.
    pub fn complete(&mut self, override_early: bool) -> Result<(), SessionError> {
        self.require_phase("complete", Phase::Reviewing)?;
        let mut override_at_step = None;
        if self.state.mode == Mode::Stepwise && !self.state.is_last_step() {
            let current = self.state.current_step.unwrap_or(0);
            if !override_early {
                return Err(SessionError::StepsRemaining {
                    current,
                    last: self.state.activity.step_count(),
                });
            }
            override_at_step = Some(current);
        }
        self.emit(EventPayload::SessionCompleted { override_at_step });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::builtin_hills;
    use crate::agent::{Role, ScriptedAgent};
    use chrono::TimeZone;

    fn clock() -> Arc<dyn Clock> {
        Arc::new(FixedClock(
            Utc.with_ymd_and_hms(2026, 1, 2, 3, 4, 5).unwrap(),
        ))
    }

    fn start(mode: Mode) -> (Session, String) {
        Session::start(
            "s1",
            builtin_hills(),
            "RetailInc wants better inventory forecasting.",
            mode,
            AgentProvenance::manual(),
            ResponseParser::default(),
            clock(),
        )
        .unwrap()
    }

    fn ids(session: &Session) -> Vec<String> {
        session.state().board.iter().map(|a| a.id.clone()).collect()
    }

    #[test]
    fn start_emits_two_events() {
        let (s, outbound) = start(Mode::Stepwise);
        assert_eq!(s.events().len(), 2);
        assert_eq!(s.state().phase, Phase::AwaitingAgent);
        assert_eq!(s.state().current_step, Some(1));
        assert!(outbound.ends_with("Given the above context, perform Step 1 of the exercise.\n"));
        let (_, full) = start(Mode::FullRun);
        assert!(full.ends_with("perform the entire Hills exercise.\n"));
    }

    #[test]
    fn empty_context_rejected() {
        let err = Session::start(
            "s",
            builtin_hills(),
            "  ",
            Mode::Stepwise,
            AgentProvenance::manual(),
            ResponseParser::default(),
            clock(),
        )
        .unwrap_err();
        assert_eq!(err, SessionError::EmptyContext);
    }

    #[test]
    fn invalid_activity_rejected() {
        let mut activity = builtin_hills();
        activity.examples.clear();
        let err = Session::start(
            "s",
            activity,
            "ctx",
            Mode::Stepwise,
            AgentProvenance::manual(),
            ResponseParser::default(),
            clock(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("examples: at least one required"));
    }

    #[test]
    fn response_records_artifacts() {
        let (mut s, _) = start(Mode::Stepwise);
        s.apply_agent_response("Users:\n1. Store managers\n2. Buyers\n\nNote: rough list")
            .unwrap();
        let st = s.state();
        assert_eq!(st.phase, Phase::Reviewing);
        assert_eq!(ids(&s), ["a00001", "a00002"]);
        assert!(st.board.iter().all(|a| a.criterion_key == "who"
            && a.status == ReviewStatus::Proposed
            && a.step == Some(1)));
        assert_eq!(st.step_commentary[0].disclaimers, ["Note: rough list"]);
        assert_eq!(st.conversation.len(), 2);
        assert_eq!(
            s.apply_agent_response("again"),
            Err(SessionError::WrongPhase {
                operation: "apply_agent_response",
                phase: Phase::Reviewing
            })
        );
    }

    #[test]
    fn disclaimer_only_response() {
        let (mut s, _) = start(Mode::Stepwise);
        s.apply_agent_response("Note: These are just some potential users.")
            .unwrap();
        assert!(s.state().board.is_empty());
        assert_eq!(s.state().step_commentary[0].disclaimers.len(), 1);
    }

    #[test]
    fn advance_plain_and_with_humans() {
        let (mut s, _) = start(Mode::Stepwise);
        s.apply_agent_response("1. A").unwrap();
        assert_eq!(s.advance().unwrap(), "Perform Step 2 of the exercise.");
        s.apply_agent_response("1. B").unwrap();
        s.submit_human_artifact("who", "Warehouse staff", "Ana")
            .unwrap();
        let outbound = s.advance().unwrap();
        assert_eq!(
            outbound,
            "The human participants added the following \"who\" ideas:\n1. Warehouse staff\nPerform Step 3 of the exercise."
        );
        assert!(s.state().pending_human.is_empty());
    }

    #[test]
    fn preamble_groups_by_criterion_and_skips_rejected() {
        let (mut s, _) = start(Mode::Stepwise);
        s.apply_agent_response("1. A").unwrap();
        let wow = s.submit_human_artifact("wow", "Delight", "Bo").unwrap();
        s.submit_human_artifact("who", "Buyers", "Ana").unwrap();
        let gone = s.submit_human_artifact("who", "Nobody", "Ana").unwrap();
        s.review_artifact(&gone, ReviewDecision::Reject).unwrap();
        s.review_artifact(&wow, ReviewDecision::Amend("Pure delight".into()))
            .unwrap();
        let (text, refs) = s.human_preamble();
        assert_eq!(
            text,
            "The human participants added the following \"who\" ideas:\n1. Buyers\n\
             The human participants added the following \"wow\" ideas:\n1. Pure delight\n"
        );
        assert_eq!(refs, ["a00003", "a00002"]);
    }

    #[test]
    fn advance_errors() {
        let (mut s, _) = start(Mode::FullRun);
        s.apply_agent_response("Who:\n- A").unwrap();
        assert_eq!(s.advance(), Err(SessionError::NotStepwise));

        let (mut s, _) = start(Mode::Stepwise);
        assert!(matches!(s.advance(), Err(SessionError::WrongPhase { .. })));
        for step in 1..=5 {
            s.apply_agent_response(&format!("reply {step}")).unwrap();
            if step < 5 {
                s.advance().unwrap();
            }
        }
        assert_eq!(s.advance(), Err(SessionError::AtLastStep));
        s.complete(false).unwrap();
        assert_eq!(s.state().phase, Phase::Complete);
        assert_eq!(s.state().completion_override, None);
    }

    #[test]
    fn steps_without_criterion_are_commentary() {
        let (mut s, _) = start(Mode::Stepwise);
        for _ in 0..3 {
            s.apply_agent_response("1. item").unwrap();
            s.advance().unwrap();
        }
        s.apply_agent_response("1. diverge idea\n2. another\nNote: rough")
            .unwrap();
        assert_eq!(s.state().board.len(), 3);
        let last = s.state().step_commentary.last().unwrap();
        assert_eq!(last.step, Some(4));
        assert_eq!(last.unparsed, ["1. diverge idea", "2. another"]);
        assert_eq!(last.disclaimers, ["Note: rough"]);
    }

    #[test]
    fn human_artifacts() {
        let (mut s, _) = start(Mode::Stepwise);
        let id = s
            .submit_human_artifact("who", "Warehouse staff", "Ana")
            .unwrap();
        let a = s.state().artifact(&id).unwrap();
        assert_eq!(a.origin.to_string(), "human:Ana");
        assert_eq!(
            s.submit_human_artifact("when", "x", "Ana"),
            Err(SessionError::UnknownCriterion("when".into()))
        );
        assert_eq!(
            s.submit_human_artifact("who", " ", "Ana"),
            Err(SessionError::Empty("text"))
        );
        s.submit_human_artifact("who", "Warehouse staff", "Bo")
            .unwrap();
        assert_eq!(s.state().board.len(), 2);
    }

    #[test]
    fn review_status_machine() {
        let (mut s, _) = start(Mode::Stepwise);
        s.apply_agent_response("1. Retail store managers\n2. B")
            .unwrap();
        s.review_artifact("a00001", ReviewDecision::Amend("Store ops managers".into()))
            .unwrap();
        let a = s.state().artifact("a00001").unwrap();
        assert_eq!(a.text, "Store ops managers");
        assert_eq!(a.original_text, "Retail store managers");
        assert_eq!(a.status, ReviewStatus::Proposed);

        s.review_artifact("a00001", ReviewDecision::Accept).unwrap();
        assert_eq!(
            s.review_artifact("a00001", ReviewDecision::Reject),
            Err(SessionError::TerminalStatus {
                id: "a00001".into(),
                status: ReviewStatus::Accepted
            })
        );
        assert_eq!(
            s.review_artifact("zzz", ReviewDecision::Accept),
            Err(SessionError::UnknownArtifact("zzz".into()))
        );
    }

    #[test]
    fn clusters() {
        let (mut s, _) = start(Mode::Stepwise);
        s.apply_agent_response("1. a\n2. b\n3. c").unwrap();
        let ids = ids(&s);
        let inv = s.assign_cluster(&ids[..2], "inventory accuracy").unwrap();
        assert_eq!(s.state().cluster(&inv).unwrap().member_ids.len(), 2);
        let fc = s.assign_cluster(&ids[..1], "forecasting").unwrap();
        assert_eq!(
            s.state().cluster(&inv).unwrap().member_ids,
            [ids[1].clone()]
        );
        assert_eq!(s.state().cluster(&fc).unwrap().member_ids, [ids[0].clone()]);
        // Same label extends.
        assert_eq!(s.assign_cluster(&ids[2..], "forecasting").unwrap(), fc);
        s.review_artifact(&ids[2], ReviewDecision::Reject).unwrap();
        assert_eq!(s.state().artifact(&ids[2]).unwrap().cluster_id, None);
        assert_eq!(s.state().cluster(&fc).unwrap().member_ids, [ids[0].clone()]);
        assert_eq!(
            s.assign_cluster(&ids[2..], "x"),
            Err(SessionError::RejectedArtifact(ids[2].clone()))
        );
        assert_eq!(
            s.assign_cluster(&ids[..1], " "),
            Err(SessionError::Empty("label"))
        );
        s.state().check_invariants().unwrap();
    }

    #[test]
    fn hills() {
        let (mut s, _) = start(Mode::Stepwise);
        s.apply_agent_response("1. who\n2. what\n3. wow\n4. maybe")
            .unwrap();
        for id in ["a00001", "a00002", "a00003"] {
            s.review_artifact(id, ReviewDecision::Accept).unwrap();
        }
        let r = |x: &str| vec![x.to_string()];
        assert_eq!(
            s.compose_hill(&r("a00001"), &r("a00002"), &[], "text"),
            Err(SessionError::MissingHillPart("wow"))
        );
        assert_eq!(
            s.compose_hill(&r("a00001"), &r("a00002"), &r("a00004"), "text"),
            Err(SessionError::NotAccepted("a00004".into()))
        );
        let id = s
            .compose_hill(
                &r("a00001"),
                &r("a00002"),
                &r("a00003"),
                "Within selected product categories, requestors can find product matches \
                 for their search queries using natural, English-language conversation.",
            )
            .unwrap();
        assert_eq!(id, "h0001");
        assert_eq!(s.state().hills.len(), 1);
    }

    #[test]
    fn complete_rules() {
        let (mut s, _) = start(Mode::Stepwise);
        assert!(matches!(
            s.complete(false),
            Err(SessionError::WrongPhase { .. })
        ));
        s.apply_agent_response("1. a").unwrap();
        s.advance().unwrap();
        s.apply_agent_response("1. b").unwrap();
        assert_eq!(
            s.complete(false),
            Err(SessionError::StepsRemaining {
                current: 2,
                last: 5
            })
        );
        s.complete(true).unwrap();
        assert_eq!(s.state().completion_override, Some(2));
        assert_eq!(
            s.submit_human_artifact("who", "x", "y"),
            Err(SessionError::Completed)
        );
        assert_eq!(
            s.review_artifact("a00001", ReviewDecision::Accept),
            Err(SessionError::Completed)
        );
        assert_eq!(s.advance(), Err(SessionError::Completed));
    }

    #[test]
    fn full_run_complete() {
        let (mut s, _) = start(Mode::FullRun);
        s.apply_agent_response("\"Who\":\n1. X\n\"What\":\n1. Y\n\"Wow\":\n1. Z")
            .unwrap();
        let keys: Vec<_> = s
            .state()
            .board
            .iter()
            .map(|a| a.criterion_key.as_str())
            .collect();
        assert_eq!(keys, ["who", "what", "wow"]);
        assert!(s.state().board.iter().all(|a| a.step.is_none()));
        s.complete(false).unwrap();
    }

    #[test]
    fn request_reply_drives_agent() {
        let (mut s, outbound) = start(Mode::Stepwise);
        let agent = ScriptedAgent::new(vec!["1. A".into()]);
        s.request_reply(&agent).unwrap();
        let msgs = s.state().conversation.messages();
        assert_eq!(msgs[0].role, Role::Facilitator);
        assert_eq!(msgs[0].text, outbound);
        s.advance().unwrap();
        let err = s.request_reply(&agent).unwrap_err();
        assert!(matches!(
            err,
            TurnError::Agent(AgentError::ScriptExhausted { .. })
        ));
        assert_eq!(s.state().phase, Phase::AwaitingAgent);
        assert_eq!(s.state().conversation.len(), 2);
    }

    #[test]
    fn restore_matches_live() {
        let (mut s, _) = start(Mode::Stepwise);
        s.apply_agent_response("1. a\n2. b").unwrap();
        s.review_artifact("a00001", ReviewDecision::Accept).unwrap();
        s.assign_cluster(&["a00001".into()], "one").unwrap();
        let restored =
            Session::restore(s.events().to_vec(), ResponseParser::default(), clock()).unwrap();
        assert_eq!(restored.state(), s.state());
        assert_eq!(s.events_after(3).len(), s.events().len() - 3);
    }

    #[test]
    fn session_ids_sort_by_time() {
        let a = new_session_id(Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap());
        let b = new_session_id(Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 1).unwrap());
        assert!(a < b);
        assert_ne!(
            new_session_id(Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap()),
            a
        );
    }
}
