//! Inputs shared by the benchmarks.

use std::sync::Arc;

use chai_core::session::{FixedClock, Mode};
use chai_core::{builtin_hills, AgentProvenance, ResponseParser, ScriptedAgent, Session};

pub const CONTEXT: &str = include_str!("../../core/tests/data/retailinc_context.txt");
pub const TRANSCRIPT: &str = include_str!("../../core/tests/data/hills_transcript.json");

pub fn transcript() -> ScriptedAgent {
    chai_core::load_transcript(TRANSCRIPT).expect("bundled transcript")
}

/// A reply with `items` numbered lines and a closing note.
pub fn synthetic_reply(items: usize) -> String {
    let mut out = String::from("Here are some ideas:\n\n");
    for i in 1..=items {
        out.push_str(&format!(
            "{i}. Idea number {i} about forecasting stock levels\n"
        ));
    }
    out.push_str("\nNote: These are just some ideas, refine them with your team.\n");
    out
}

/// Stepwise Hills session with `rounds` rounds of review and clustering on
/// top of the three scripted turns.
pub fn busy_session(rounds: usize) -> Session {
    let agent = transcript();
    let clock = Arc::new(FixedClock("2026-03-01T09:00:00Z".parse().unwrap()));
    let (mut s, _) = Session::start(
        "bench",
        builtin_hills(),
        CONTEXT,
        Mode::Stepwise,
        AgentProvenance::manual(),
        ResponseParser::default(),
        clock,
    )
    .expect("valid start");
    s.request_reply(&agent).expect("scripted");
    for _ in 0..2 {
        s.advance().expect("advance");
        s.request_reply(&agent).expect("scripted");
    }
    for i in 0..rounds {
        let id = s
            .submit_human_artifact(
                ["who", "what", "wow"][i % 3],
                &format!("human idea {i}"),
                "bench",
            )
            .expect("add");
        s.assign_cluster(&[id], &format!("group {}", i % 5))
            .expect("cluster");
    }
    s
}
