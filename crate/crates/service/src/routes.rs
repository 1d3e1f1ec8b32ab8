use std::collections::VecDeque;
use std::convert::Infallible;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chai_core::activity::{builtin, builtin_names};
use chai_core::session::new_session_id;
use chai_core::{
    export_session, load_activity, ActivityDefinition, AgentBinding, AgentProvenance, ChatAgent,
    ExportFormat, Mode, ReviewDecision, Session, SessionEvent, SessionSummary,
};
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use crate::error::ApiError;
use crate::state::{internal, AppState, SessionSlot, Writer};

pub async fn health() -> &'static str {
    "ok"
}

pub async fn list_activities() -> Json<&'static [&'static str]> {
    Json(builtin_names())
}

pub async fn get_activity(Path(name): Path<String>) -> Result<Json<ActivityDefinition>, ApiError> {
    builtin(&name)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown activity {name:?}")))
}

#[derive(Debug, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case")]
pub enum AgentChoice {
    Manual,
    Scripted {
        replies: Vec<String>,
    },
    /// Uses the server's configured remote profile.
    Remote,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub id: Option<String>,
    /// Name of a built-in activity.
    pub activity: Option<String>,
    /// An inline activity document, used instead of `activity`.
    pub definition: Option<serde_json::Value>,
    pub context: String,
    pub mode: Mode,
    pub agent: Option<AgentChoice>,
}

/// Result of a mutation: post-apply summary plus the events it appended.
#[derive(Debug, Serialize)]
pub struct Outcome {
    #[serde(flatten)]
    pub summary: SessionSummary,
    pub events: Vec<SessionEvent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outbound: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
}

impl Outcome {
    fn of(session: &Session, since: u64) -> Self {
        Self {
            summary: session.state().summary(),
            events: session.events_after(since).to_vec(),
            id: None,
            outbound: None,
            reply: None,
        }
    }
}

fn resolve_activity(req: &CreateSession) -> Result<ActivityDefinition, ApiError> {
    match (&req.activity, &req.definition) {
        (Some(_), Some(_)) => Err(ApiError::validation(
            "give either activity or definition, not both",
        )),
        (Some(name), None) => {
            builtin(name).ok_or_else(|| ApiError::not_found(format!("unknown activity {name:?}")))
        }
        (None, Some(doc)) => Ok(load_activity(&doc.to_string())?),
        (None, None) => Err(ApiError::validation("activity: required")),
    }
}

fn resolve_agent(state: &AppState, choice: &AgentChoice) -> Result<Option<AgentBinding>, ApiError> {
    match choice {
        AgentChoice::Manual => Ok(None),
        AgentChoice::Scripted { replies } => Ok(Some(AgentBinding::Scripted {
            replies: replies.clone(),
        })),
        AgentChoice::Remote => {
            let profile = state
                .config()
                .agent
                .clone()
                .ok_or_else(|| ApiError::validation("no remote agent is configured"))?;
            profile.validate()?;
            Ok(Some(AgentBinding::Remote(profile)))
        }
    }
}

pub async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<Response, ApiError> {
    let activity = resolve_activity(&req)?;
    let binding = resolve_agent(&state, req.agent.as_ref().unwrap_or(&AgentChoice::Manual))?;
    let provenance = match &binding {
        Some(b) => b.connect()?.provenance(),
        None => AgentProvenance::manual(),
    };
    let id = req
        .id
        .clone()
        .unwrap_or_else(|| new_session_id(state.clock().now()));
    let (session, prompt) = Session::start(
        id.clone(),
        activity,
        &req.context,
        req.mode,
        provenance,
        state.config().parser(),
        state.clock(),
    )?;
    let store = state.store().clone();
    let session = tokio::task::spawn_blocking(move || {
        store.create(&session)?;
        if let Some(binding) = &binding {
            store.bind_agent(session.id(), binding)?;
        }
        Ok::<_, ApiError>(session)
    })
    .await
    .map_err(internal)??;
    state.insert(session);

    let mut outcome = state
        .mutate(&id, move |w| {
            let reply = match w.agent {
                Some(agent) => Some(
                    w.session
                        .request_reply(agent)
                        .map_err(|e| ApiError::from(e).for_session(w.session.id()))?,
                ),
                None => None,
            };
            let mut outcome = Outcome::of(w.session, 0);
            outcome.reply = reply;
            Ok(outcome)
        })
        .await?;
    outcome.outbound = Some(prompt);
    let location = format!("/sessions/{id}");
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, location)],
        Json(outcome),
    )
        .into_response())
}

pub async fn list_sessions(
    State(state): State<AppState>,
) -> Result<Json<Vec<SessionSummary>>, ApiError> {
    let store = state.store().clone();
    let rows = tokio::task::spawn_blocking(move || store.list())
        .await
        .map_err(internal)??;
    Ok(Json(rows))
}

pub async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    // Serialized under the lock so the body is one consistent snapshot.
    let body = state
        .read(&id, |s| serde_json::to_vec(s.state()))
        .await?
        .map_err(internal)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

fn drive(agent: Option<&dyn ChatAgent>, session: &mut Session) -> Result<Option<String>, ApiError> {
    match agent {
        Some(agent) => Ok(Some(session.request_reply(agent)?)),
        None => Ok(None),
    }
}

/// Moves to the next step; a bound agent answers it straight away.
pub async fn advance(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Outcome>, ApiError> {
    let outcome = state
        .mutate(&id, |w: Writer<'_>| {
            let since = w.session.events().len() as u64;
            let outbound = w.session.advance()?;
            let reply = drive(w.agent, w.session).map_err(|e| e.for_session(w.session.id()))?;
            let mut outcome = Outcome::of(w.session, since);
            outcome.outbound = Some(outbound);
            outcome.reply = reply;
            Ok(outcome)
        })
        .await?;
    Ok(Json(outcome))
}

/// Sends the pending outbound message to the bound agent, e.g. after a
/// failed attempt.
pub async fn request_reply(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Outcome>, ApiError> {
    let outcome = state
        .mutate(&id, |w: Writer<'_>| {
            let since = w.session.events().len() as u64;
            let agent = w.agent.ok_or_else(|| {
                ApiError::new(
                    StatusCode::CONFLICT,
                    "session has no agent; post agent-response instead",
                )
            })?;
            let reply = w.session.request_reply(agent)?;
            let mut outcome = Outcome::of(w.session, since);
            outcome.reply = Some(reply);
            Ok(outcome)
        })
        .await?;
    Ok(Json(outcome))
}

#[derive(Debug, Deserialize)]
pub struct AgentResponse {
    pub text: String,
}

pub async fn agent_response(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<AgentResponse>,
) -> Result<Json<Outcome>, ApiError> {
    simple(&state, &id, move |s| {
        s.apply_agent_response(&req.text).map(|_| None)
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct AddArtifact {
    pub criterion: String,
    pub text: String,
    pub author: String,
}

pub async fn add_artifact(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<AddArtifact>,
) -> Result<(StatusCode, Json<Outcome>), ApiError> {
    let outcome = simple(&state, &id, move |s| {
        s.submit_human_artifact(&req.criterion, &req.text, &req.author)
            .map(Some)
    })
    .await?;
    Ok((StatusCode::CREATED, outcome))
}

pub async fn review_artifact(
    State(state): State<AppState>,
    Path((id, artifact)): Path<(String, String)>,
    Json(decision): Json<ReviewDecision>,
) -> Result<Json<Outcome>, ApiError> {
    simple(&state, &id, move |s| {
        s.review_artifact(&artifact, decision).map(|_| None)
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct AssignCluster {
    pub label: String,
    pub artifacts: Vec<String>,
}

pub async fn assign_cluster(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<AssignCluster>,
) -> Result<Json<Outcome>, ApiError> {
    simple(&state, &id, move |s| {
        s.assign_cluster(&req.artifacts, &req.label).map(Some)
    })
    .await
}

#[derive(Debug, Deserialize)]
pub struct ComposeHill {
    pub who: Vec<String>,
    pub what: Vec<String>,
    pub wow: Vec<String>,
    pub text: String,
}

pub async fn compose_hill(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ComposeHill>,
) -> Result<(StatusCode, Json<Outcome>), ApiError> {
    let outcome = simple(&state, &id, move |s| {
        s.compose_hill(&req.who, &req.what, &req.wow, &req.text)
            .map(Some)
    })
    .await?;
    Ok((StatusCode::CREATED, outcome))
}

#[derive(Debug, Default, Deserialize)]
pub struct Complete {
    #[serde(default, rename = "override")]
    pub override_early: bool,
}

pub async fn complete(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Option<Json<Complete>>,
) -> Result<Json<Outcome>, ApiError> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    simple(&state, &id, move |s| {
        s.complete(req.override_early).map(|_| None)
    })
    .await
}

async fn simple<F>(state: &AppState, id: &str, op: F) -> Result<Json<Outcome>, ApiError>
where
    F: FnOnce(&mut Session) -> Result<Option<String>, chai_core::SessionError> + Send + 'static,
{
    let outcome = state
        .mutate(id, |w: Writer<'_>| {
            let since = w.session.events().len() as u64;
            let created = op(w.session)?;
            let mut outcome = Outcome::of(w.session, since);
            outcome.id = created;
            Ok(outcome)
        })
        .await?;
    Ok(Json(outcome))
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    pub format: Option<String>,
}

pub async fn export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let format: ExportFormat = q.format.as_deref().unwrap_or("md").parse()?;
    let doc = state
        .read(&id, |s| export_session(s.state(), format))
        .await?;
    let disposition = format!("attachment; filename=\"{id}.{}\"", format.extension());
    Ok((
        [
            (header::CONTENT_TYPE, format.content_type().to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        doc.content,
    )
        .into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct EventsQuery {
    pub after: Option<u64>,
}

/// The session's log after `after`, as JSON or, when the client accepts
/// `text/event-stream`, as a live SSE feed. Each SSE event carries its
/// sequence number as the id, so `Last-Event-ID` resumes without gaps.
pub async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let wants_stream = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("text/event-stream"));
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let after = resume.or(q.after).unwrap_or(0);
    let slot = state.slot(&id).await?;
    if !wants_stream {
        let events = slot.session.lock().await.events_after(after).to_vec();
        return Ok(Json(events).into_response());
    }
    let stream = live_feed(slot, after).await;
    Ok(Sse::new(stream)
        .keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
        .into_response())
}

struct Feed {
    slot: std::sync::Arc<SessionSlot>,
    rx: tokio::sync::broadcast::Receiver<SessionEvent>,
    queue: VecDeque<SessionEvent>,
    last: u64,
}

async fn live_feed(
    slot: std::sync::Arc<SessionSlot>,
    after: u64,
) -> impl Stream<Item = Result<Event, Infallible>> {
    // Subscribe while holding the writer lock so nothing falls between the
    // backlog and the live feed.
    let (rx, backlog) = {
        let session = slot.session.lock().await;
        (slot.feed.subscribe(), session.events_after(after).to_vec())
    };
    let feed = Feed {
        slot,
        rx,
        queue: backlog.into(),
        last: after,
    };
    stream::unfold(feed, |mut feed| async move {
        loop {
            if let Some(event) = feed.queue.pop_front() {
                if event.sequence <= feed.last {
                    continue;
                }
                feed.last = event.sequence;
                let sse = Event::default()
                    .id(event.sequence.to_string())
                    .event(event.payload.type_name())
                    .data(event.to_json_line());
                return Some((Ok(sse), feed));
            }
            match feed.rx.recv().await {
                Ok(event) => feed.queue.push_back(event),
                Err(RecvError::Lagged(_)) => {
                    let session = feed.slot.session.lock().await;
                    feed.queue
                        .extend(session.events_after(feed.last).iter().cloned());
                }
                Err(RecvError::Closed) => return None,
            }
        }
    })
}
