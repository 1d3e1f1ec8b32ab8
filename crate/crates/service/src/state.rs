use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::http::StatusCode;
use chai_core::session::Clock;
use chai_core::store::StoreError;
use chai_core::{AgentBinding, ChatAgent, Config, FileStore, Session, SessionEvent};
use tokio::sync::{broadcast, Mutex as AsyncMutex, OwnedMutexGuard};
use tracing::error;

use crate::error::ApiError;

const FEED_CAPACITY: usize = 256;

/// One live session: the writer lock plus the feed new events go out on.
pub struct SessionSlot {
    pub session: Arc<AsyncMutex<Session>>,
    pub feed: broadcast::Sender<SessionEvent>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: FileStore,
    config: Config,
    clock: Arc<dyn Clock>,
    slots: Mutex<HashMap<String, Arc<SessionSlot>>>,
}

/// Handed to a mutation: the session plus its agent, if one is bound.
pub struct Writer<'a> {
    pub session: &'a mut Session,
    pub agent: Option<&'a dyn ChatAgent>,
}

impl AppState {
    pub fn new(config: Config, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        let store = FileStore::open(&config.data_dir)?;
        Ok(Self {
            inner: Arc::new(Inner {
                store,
                config,
                clock,
                slots: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn store(&self) -> &FileStore {
        &self.inner.store
    }

    pub fn config(&self) -> &Config {
        &self.inner.config
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        self.inner.clock.clone()
    }

    /// Registers a session that was just created and persisted.
    pub fn insert(&self, session: Session) -> Arc<SessionSlot> {
        let id = session.id().to_string();
        let slot = Arc::new(SessionSlot {
            session: Arc::new(AsyncMutex::new(session)),
            feed: broadcast::channel(FEED_CAPACITY).0,
        });
        self.inner.slots.lock().unwrap().insert(id, slot.clone());
        slot
    }

    /// The live slot for `id`, loading the log on first use.
    pub async fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        if let Some(slot) = self.inner.slots.lock().unwrap().get(id) {
            return Ok(slot.clone());
        }
        let state = self.clone();
        let owned = id.to_string();
        let session = tokio::task::spawn_blocking(move || {
            state.inner.store.load(
                &owned,
                state.inner.config.parser(),
                state.inner.clock.clone(),
            )
        })
        .await
        .map_err(internal)??;
        let mut slots = self.inner.slots.lock().unwrap();
        // Another request may have loaded it meanwhile; keep the first.
        let slot = slots.entry(id.to_string()).or_insert_with(|| {
            Arc::new(SessionSlot {
                session: Arc::new(AsyncMutex::new(session)),
                feed: broadcast::channel(FEED_CAPACITY).0,
            })
        });
        Ok(slot.clone())
    }

    fn evict(&self, id: &str) {
        self.inner.slots.lock().unwrap().remove(id);
    }

    /// Runs `op` as the session's single writer, off the async runtime since
    /// it may block on the agent. New events are persisted, then published.
    pub async fn mutate<T, F>(&self, id: &str, op: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(Writer<'_>) -> Result<T, ApiError> + Send + 'static,
    {
        let slot = self.slot(id).await?;
        let guard = slot.session.clone().lock_owned().await;
        let state = self.clone();
        tokio::task::spawn_blocking(move || state.run_locked(guard, &slot, op))
            .await
            .map_err(internal)?
    }

    fn run_locked<T, F>(
        &self,
        mut guard: OwnedMutexGuard<Session>,
        slot: &SessionSlot,
        op: F,
    ) -> Result<T, ApiError>
    where
        F: FnOnce(Writer<'_>) -> Result<T, ApiError>,
    {
        let session: &mut Session = &mut guard;
        let id = session.id().to_string();
        let binding = self.inner.store.agent_binding(&id)?;
        let agent = binding.as_ref().map(AgentBinding::connect).transpose()?;
        let persisted = session.events().len() as u64;
        let result = op(Writer {
            session,
            agent: agent.as_deref(),
        });
        if let Err(err) = self.publish(session, slot, persisted) {
            error!(session = %id, err = %err.message, "failed to persist events");
            self.evict(&id);
            return Err(err);
        }
        result
    }

    pub fn publish(
        &self,
        session: &Session,
        slot: &SessionSlot,
        persisted: u64,
    ) -> Result<(), ApiError> {
        let fresh = session.events_after(persisted);
        if fresh.is_empty() {
            return Ok(());
        }
        self.inner.store.save(session, persisted)?;
        for event in fresh {
            // No subscribers is fine.
            let _ = slot.feed.send(event.clone());
        }
        Ok(())
    }

    /// Runs a read against the session under its lock.
    pub async fn read<T>(&self, id: &str, op: impl FnOnce(&Session) -> T) -> Result<T, ApiError> {
        let slot = self.slot(id).await?;
        let session = slot.session.lock().await;
        Ok(op(&session))
    }
}

pub fn internal(err: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, err.to_string())
}
