//! Event-sourcing properties shared by the core tests and the acceptance
//! suite.

use std::collections::HashMap;

use chai_core::agent::AgentProvenance;
use chai_core::session::{parse_event_log, render_event_log, Mode, Phase, ReviewStatus};
use chai_core::{builtin_hills, replay, ResponseParser, ReviewDecision, Session, SessionState};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

#[derive(Debug, Clone)]
pub struct Op {
    kind: u8,
    pick: Vec<u16>,
    text: String,
    flag: bool,
}

pub fn op() -> impl Strategy<Value = Op> {
    (
        0u8..8,
        prop::collection::vec(any::<u16>(), 1..5),
        "[A-Za-z][A-Za-z ]{0,12}[a-z]",
        any::<bool>(),
    )
        .prop_map(|(kind, pick, text, flag)| Op {
            kind,
            pick,
            text,
            flag,
        })
}

fn reply_for(op: &Op) -> String {
    let n = (op.pick[0] % 5) as usize;
    let mut lines: Vec<String> = (0..n)
        .map(|i| format!("{}. {} {i}", i + 1, op.text))
        .collect();
    if op.flag {
        lines.push("Note: These are just some ideas.".into());
    }
    if lines.is_empty() {
        lines.push("Nothing to add.".into());
    }
    // Full-run replies need headings to yield drafts.
    format!("Who:\n{}\n\"Wow\":\n- {}", lines.join("\n"), op.text)
}

fn stepwise_reply(op: &Op) -> String {
    reply_for(op)
        .replace("Who:\n", "")
        .replace("\"Wow\":\n", "")
}

fn pick<'a, T>(items: &'a [T], seed: u16) -> Option<&'a T> {
    (!items.is_empty()).then(|| &items[seed as usize % items.len()])
}

fn ids_where(state: &SessionState, f: impl Fn(ReviewStatus) -> bool) -> Vec<String> {
    state
        .board
        .iter()
        .filter(|a| f(a.status))
        .map(|a| a.id.clone())
        .collect()
}

/// Applies the op if its preconditions hold; otherwise falls through to the
/// first applicable alternative. Returns whether anything was applied.
fn apply(session: &mut Session, op: &Op) -> bool {
    let state = session.state().clone();
    if state.phase == Phase::Complete {
        return false;
    }
    let stepwise = state.mode == Mode::Stepwise;
    for attempt in 0..8u8 {
        let kind = (op.kind + attempt) % 8;
        let done = match kind {
            0 if state.phase == Phase::AwaitingAgent => {
                let reply = if stepwise {
                    stepwise_reply(op)
                } else {
                    reply_for(op)
                };
                session.apply_agent_response(&reply).unwrap();
                true
            }
            1 if state.phase == Phase::Reviewing && stepwise && !state.is_last_step() => {
                session.advance().unwrap();
                true
            }
            2 => {
                let criteria = &state.activity.criteria;
                let key = &pick(criteria, op.pick[0]).unwrap().key;
                session.submit_human_artifact(key, &op.text, "Ana").unwrap();
                true
            }
            3 => match pick(
                &ids_where(&state, |s| s == ReviewStatus::Proposed),
                op.pick[0],
            ) {
                Some(id) => {
                    let decision = match op.pick[0] % 3 {
                        0 => ReviewDecision::Accept,
                        1 => ReviewDecision::Reject,
                        _ => ReviewDecision::Amend(format!("{} amended", op.text)),
                    };
                    session.review_artifact(id, decision).unwrap();
                    true
                }
                None => false,
            },
            4 => {
                let live = ids_where(&state, |s| s != ReviewStatus::Rejected);
                let chosen: Vec<String> = op
                    .pick
                    .iter()
                    .filter_map(|p| pick(&live, *p).cloned())
                    .collect();
                if chosen.is_empty() {
                    false
                } else {
                    let label = ["stock", "forecasting", "delight"][op.pick[0] as usize % 3];
                    session.assign_cluster(&chosen, label).unwrap();
                    true
                }
            }
            5 => {
                let accepted = ids_where(&state, |s| s == ReviewStatus::Accepted);
                if accepted.is_empty() {
                    false
                } else {
                    let r = |i: usize| {
                        vec![pick(&accepted, op.pick[i % op.pick.len()]).unwrap().clone()]
                    };
                    session.compose_hill(&r(0), &r(1), &r(2), &op.text).unwrap();
                    true
                }
            }
            6 if state.phase == Phase::Reviewing && op.flag && op.pick[0] % 7 == 0 => {
                session.complete(true).unwrap();
                true
            }
            7 => {
                // Invalid operations must fail without emitting anything.
                let before = session.events().len();
                let bad = match op.pick[0] % 4 {
                    0 => session
                        .review_artifact("missing", ReviewDecision::Accept)
                        .is_err(),
                    1 => session.submit_human_artifact("nope", "x", "y").is_err(),
                    2 => session.compose_hill(&[], &[], &[], "x").is_err(),
                    _ => session.assign_cluster(&["missing".into()], "x").is_err(),
                };
                assert!(bad);
                assert_eq!(session.events().len(), before);
                false
            }
            _ => false,
        };
        if done {
            return true;
        }
    }
    false
}

fn check_transition(before: &SessionState, after: &SessionState) -> Result<(), String> {
    after.check_invariants()?;
    if after.board.len() < before.board.len() {
        return Err("board shrank".into());
    }
    let old: HashMap<_, _> = before.board.iter().map(|a| (a.id.as_str(), a)).collect();
    for (prev, next) in before.board.iter().zip(&after.board) {
        if prev.id != next.id {
            return Err(format!("board reordered at {}", prev.id));
        }
    }
    for a in &after.board {
        let Some(prev) = old.get(a.id.as_str()) else {
            if a.status != ReviewStatus::Proposed || a.text != a.original_text {
                return Err(format!("{} born in a non-initial state", a.id));
            }
            continue;
        };
        if prev.status.is_terminal() && prev.status != a.status {
            return Err(format!("{} left terminal status {}", a.id, prev.status));
        }
        if prev.status.is_terminal() && prev.text != a.text {
            return Err(format!("{} text changed after review", a.id));
        }
        if a.original_text != prev.original_text {
            return Err(format!("{} original text changed", a.id));
        }
    }
    let grew = after.conversation.len() as isize - before.conversation.len() as isize;
    let answered = before.phase == Phase::AwaitingAgent && after.phase == Phase::Reviewing;
    if answered != (grew == 2) || !(grew == 0 || grew == 2) {
        return Err(format!("conversation grew by {grew}"));
    }
    Ok(())
}

/// Random operation sequences that respect preconditions: the live state
/// satisfies the invariants after every step, and replaying the log (also
/// after a round trip through JSONL) rebuilds it exactly.
pub fn replay_oracle(cases: u32) -> Result<u32, String> {
    let strategy = (any::<bool>(), prop::collection::vec(op(), 1..40));
    let mut runner = TestRunner::new(Config {
        failure_persistence: None,
        ..Config::with_cases(cases)
    });
    runner
        .run(&strategy, |(stepwise, ops)| {
            let mode = if stepwise {
                Mode::Stepwise
            } else {
                Mode::FullRun
            };
            let (mut session, _) = Session::start(
                "prop",
                builtin_hills(),
                "RetailInc inventory",
                mode,
                AgentProvenance::manual(),
                ResponseParser::default(),
                super::clock(),
            )
            .unwrap();
            for op in &ops {
                let before = session.state().clone();
                apply(&mut session, op);
                if let Err(e) = check_transition(&before, session.state()) {
                    prop_assert!(false, "invariant broken: {}", e);
                }
            }
            let events = session.events();
            for (i, e) in events.iter().enumerate() {
                prop_assert_eq!(e.sequence, i as u64 + 1);
            }
            prop_assert_eq!(&replay(events).unwrap(), session.state());
            let reparsed = parse_event_log(&render_event_log(events)).unwrap();
            prop_assert_eq!(&reparsed[..], events);
            prop_assert_eq!(&replay(&reparsed).unwrap(), session.state());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(cases)
}
