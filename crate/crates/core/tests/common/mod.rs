#![allow(dead_code)]

pub mod parser_oracle;
pub mod session_oracle;

use std::path::PathBuf;
use std::sync::Arc;

use chai_core::agent::AgentProvenance;
use chai_core::session::{Clock, FixedClock, Mode, Session};
use chai_core::{builtin_hills, load_transcript, ResponseParser, ScriptedAgent};

pub fn data(name: &str) -> PathBuf {
    // Resolves from any crate under crates/.
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap()
}

pub fn retailinc() -> String {
    read("retailinc_context.txt")
}

pub fn hills_agent() -> ScriptedAgent {
    load_transcript(&read("hills_transcript.json")).unwrap()
}

pub fn expected_board() -> serde_json::Value {
    serde_json::from_str(&read("hills_board.json")).unwrap()
}

pub fn clock() -> Arc<dyn Clock> {
    Arc::new(FixedClock("2026-03-01T09:00:00Z".parse().unwrap()))
}

/// Stepwise Hills session driven through the three scripted step replies.
pub fn golden_session() -> Session {
    let agent = hills_agent();
    let (mut session, _) = Session::start(
        "golden",
        builtin_hills(),
        &retailinc(),
        Mode::Stepwise,
        AgentProvenance {
            provider: "scripted".into(),
            model: None,
            temperature: None,
        },
        ResponseParser::default(),
        clock(),
    )
    .unwrap();
    session.request_reply(&agent).unwrap();
    for _ in 0..2 {
        session.advance().unwrap();
        session.request_reply(&agent).unwrap();
    }
    session
}
