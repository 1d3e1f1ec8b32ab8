//! HTTP API over stored sessions.
//!
//! | Method | Path | Body |
//! | --- | --- | --- |
//! | GET | `/health` | |
//! | GET | `/activities`, `/activities/{name}` | |
//! | GET | `/sessions` | |
//! | POST | `/sessions` | `{activity \| definition, context, mode, id?, agent?}` |
//! | GET | `/sessions/{id}` | |
//! | POST | `/sessions/{id}/advance` | |
//! | POST | `/sessions/{id}/request` | |
//! | POST | `/sessions/{id}/agent-response` | `{text}` |
//! | POST | `/sessions/{id}/artifacts` | `{criterion, text, author}` |
//! | POST | `/sessions/{id}/artifacts/{aid}/review` | `{action: accept\|reject\|amend, text?}` |
//! | POST | `/sessions/{id}/clusters` | `{label, artifacts}` |
//! | POST | `/sessions/{id}/hills` | `{who, what, wow, text}` |
//! | POST | `/sessions/{id}/complete` | `{override?}` |
//! | GET | `/sessions/{id}/export?format=md\|csv` | |
//! | GET | `/sessions/{id}/events?after=N` | JSON, or SSE with `Accept: text/event-stream` |
//!
//! Engine errors map to 404 (unknown session or artifact), 409 (wrong phase,
//! terminal status) and 422 (validation); agent failures to 502 or 504.

mod error;
mod routes;
mod state;

use std::sync::Arc;

use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use chai_core::session::{Clock, SystemClock};
use chai_core::Config;
use tracing::info;

pub use error::ApiError;
pub use routes::{AgentChoice, CreateSession, Outcome};
pub use state::AppState;

pub fn router(state: AppState) -> Router {
    let sessions = Router::new()
        .route(
            "/sessions",
            get(routes::list_sessions).post(routes::create_session),
        )
        .route("/sessions/{id}", get(routes::get_session))
        .route("/sessions/{id}/advance", post(routes::advance))
        .route("/sessions/{id}/request", post(routes::request_reply))
        .route(
            "/sessions/{id}/agent-response",
            post(routes::agent_response),
        )
        .route("/sessions/{id}/artifacts", post(routes::add_artifact))
        .route(
            "/sessions/{id}/artifacts/{aid}/review",
            post(routes::review_artifact),
        )
        .route("/sessions/{id}/clusters", post(routes::assign_cluster))
        .route("/sessions/{id}/hills", post(routes::compose_hill))
        .route("/sessions/{id}/complete", post(routes::complete))
        .route("/sessions/{id}/export", get(routes::export))
        .route("/sessions/{id}/events", get(routes::events))
        .route("/activities", get(routes::list_activities))
        .route("/activities/{name}", get(routes::get_activity))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/health", get(routes::health))
        .merge(sessions)
        .with_state(state)
}

async fn require_token(
    State(state): State<AppState>,
    request: Request,
    next: Next,
) -> Result<Response, ApiError> {
    if let Some(token) = &state.config().api_token {
        let given = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return Err(ApiError::new(
                StatusCode::UNAUTHORIZED,
                "missing or invalid token",
            ));
        }
    }
    Ok(next.run(request).await)
}

/// Binds `config.listen` and serves until the process is stopped.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let state = AppState::new(config.clone(), clock).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    info!(addr = %listener.local_addr()?, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, router(state)).await
}
