//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Run with `cargo test -p chai-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chai_core::session::{parse_event_log, Phase};
use chai_core::{
    builtin_hills, compose_initial_prompt, export_session, make_step_directive, ExportFormat,
    ReviewStatus, SessionContext, SessionEvent,
};
use serde_json::{json, Value};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn golden_prompt() -> Check {
    let started = Instant::now();
    let hills = builtin_hills();
    let context = SessionContext::new(common::retailinc()).map_err(|e| e.to_string())?;
    let directive = make_step_directive(&hills, 1).map_err(|e| e.to_string())?;
    let prompt = compose_initial_prompt(&hills, &context, &directive).map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(1), started)?;
    let golden = common::read("hills_step1_prompt.txt");
    if prompt.full_text() != golden {
        let at = prompt
            .full_text()
            .bytes()
            .zip(golden.bytes())
            .position(|(a, b)| a != b)
            .unwrap_or(golden.len().min(prompt.full_text().len()));
        return Err(format!("first differing byte at offset {at}"));
    }
    Ok(format!("{} bytes identical in {took:?}", golden.len()))
}

/// The caveat every step reply closes with.
fn is_caveat(line: &str) -> bool {
    const HEAD: &str = "Note: These are just some ";
    const TAIL: &str = ", and the team may need to further refine the list based on their research and understanding of the user needs.";
    line.len() > HEAD.len() + TAIL.len() && line.starts_with(HEAD) && line.ends_with(TAIL)
}

fn golden_transcript() -> Check {
    let started = Instant::now();
    let session = common::golden_session();
    let took = within(Duration::from_secs(1), started)?;
    let state = session.state();
    let cells = common::expected_board();
    let mut counts = Vec::new();
    for key in ["who", "what", "wow"] {
        let column: Vec<_> = state.column(key).collect();
        let expected: Vec<&str> = cells[key]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
            .collect();
        let texts: Vec<&str> = column.iter().map(|a| a.text.as_str()).collect();
        ensure(texts == expected, || {
            format!("{key} column differs: {texts:?}")
        })?;
        ensure(
            column.iter().all(|a| a.status == ReviewStatus::Proposed),
            || format!("{key} has non-proposed artifacts"),
        )?;
        counts.push(column.len());
    }
    ensure(counts == [6, 10, 9], || format!("counts {counts:?}"))?;
    ensure(state.board.len() == 25, || {
        format!("board has {}", state.board.len())
    })?;
    ensure(state.step_commentary.len() == 3, || {
        "expected 3 step replies".into()
    })?;
    for c in &state.step_commentary {
        let step = c.step.unwrap_or(0);
        ensure(c.disclaimers.iter().any(|d| is_caveat(d)), || {
            format!("step {step}: no caveat among {:?}", c.disclaimers)
        })?;
    }
    Ok(format!(
        "who/what/wow = 6/10/9, caveat on steps 1-3, {took:?}"
    ))
}

fn parser_properties() -> Check {
    let started = Instant::now();
    let trips = common::parser_oracle::round_trip(500)?;
    let parts = common::parser_oracle::partition(500)?;
    Ok(format!(
        "{trips} round trips, {parts} partition cases in {:?}",
        started.elapsed()
    ))
}

fn replay_oracle() -> Check {
    let started = Instant::now();
    let cases = common::session_oracle::replay_oracle(200)?;
    let took = within(Duration::from_secs(30), started)?;
    Ok(format!("{cases} sequences in {took:?}"))
}

/// The facilitation steps run through both surfaces after the three agent
/// turns.
enum Op {
    Review(&'static str, &'static str, Option<&'static str>),
    Add(&'static str, &'static str, &'static str),
    Cluster(&'static str, &'static [&'static str]),
    Hill(&'static str, &'static str, &'static str, &'static str),
    Complete(bool),
}

const FACILITATION: &[Op] = &[
    Op::Review("a00001", "accept", None),
    Op::Review("a00002", "amend", Some("Regional inventory managers")),
    Op::Review("a00003", "reject", None),
    Op::Review("a00007", "accept", None),
    Op::Review("a00017", "accept", None),
    Op::Add("who", "Warehouse staff", "Ana"),
    Op::Cluster("store operations", &["a00001", "a00002"]),
    Op::Hill(
        "a00001",
        "a00007",
        "a00017",
        "Retail store managers can accurately predict sales trends so stockouts and overstocking drop dramatically.",
    ),
    Op::Complete(true),
];

fn cli(bin: &str, data: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin)
        .args(args)
        .env("CHAI_DATA_DIR", data)
        .env_remove("CHAI_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "chai {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn run_cli(data: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_chai");
    let context = common::data("retailinc_context.txt");
    let transcript = format!(
        "scripted:{}",
        common::data("hills_transcript.json").display()
    );
    cli(
        bin,
        data,
        &[
            "run",
            "--activity",
            "hills",
            "--context",
            context.to_str().unwrap(),
            "--mode",
            "stepwise",
            "--agent",
            &transcript,
            "--session-id",
            "golden",
        ],
    )?;
    cli(bin, data, &["advance", "--session", "golden"])?;
    cli(bin, data, &["advance", "--session", "golden"])?;
    for op in FACILITATION {
        let s = ["--session", "golden"];
        match op {
            Op::Review(id, action, text) => {
                let mut args = vec!["review", s[0], s[1], "--artifact", id];
                match (*action, text) {
                    ("amend", Some(t)) => args.extend(["--amend", t]),
                    (a, _) => args.push(if a == "accept" {
                        "--accept"
                    } else {
                        "--reject"
                    }),
                }
                cli(bin, data, &args)?;
            }
            Op::Add(key, text, author) => {
                cli(
                    bin,
                    data,
                    &[
                        "add",
                        s[0],
                        s[1],
                        "--criterion",
                        key,
                        "--text",
                        text,
                        "--author",
                        author,
                    ],
                )?;
            }
            Op::Cluster(label, ids) => {
                let ids = ids.join(",");
                cli(
                    bin,
                    data,
                    &["cluster", s[0], s[1], "--label", label, "--artifacts", &ids],
                )?;
            }
            Op::Hill(who, what, wow, text) => {
                cli(
                    bin,
                    data,
                    &[
                        "hill", s[0], s[1], "--who", who, "--what", what, "--wow", wow, "--text",
                        text,
                    ],
                )?;
            }
            Op::Complete(over) => {
                let mut args = vec!["complete", s[0], s[1]];
                if *over {
                    args.push("--override");
                }
                cli(bin, data, &args)?;
            }
        }
    }
    Ok(())
}

async fn run_rest(data: &Path) -> Result<(), String> {
    let config = chai_core::Config {
        data_dir: data.to_path_buf(),
        ..chai_core::Config::default()
    };
    let state = chai_service::AppState::new(config, Arc::new(chai_core::session::SystemClock))
        .map_err(|e| e.to_string())?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|e| e.to_string())?;
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, chai_service::router(state)).await });
    let client = reqwest::Client::new();
    let post = |path: String, body: Value| {
        let request = client.post(format!("{base}{path}")).json(&body);
        async move {
            let resp = request.send().await.map_err(|e| e.to_string())?;
            let status = resp.status();
            let text = resp.text().await.map_err(|e| e.to_string())?;
            if status.is_success() {
                Ok(())
            } else {
                Err(format!("POST {path}: {status} {text}"))
            }
        }
    };
    let replies: Value = serde_json::from_str(&common::read("hills_transcript.json")).unwrap();
    post(
        "/sessions".into(),
        json!({
            "id": "golden",
            "activity": "hills",
            "context": common::retailinc(),
            "mode": "stepwise",
            "agent": {"provider": "scripted", "replies": replies},
        }),
    )
    .await?;
    post("/sessions/golden/advance".into(), json!({})).await?;
    post("/sessions/golden/advance".into(), json!({})).await?;
    for op in FACILITATION {
        match op {
            Op::Review(id, action, text) => {
                let body = match text {
                    Some(t) => json!({"action": action, "text": t}),
                    None => json!({"action": action}),
                };
                post(format!("/sessions/golden/artifacts/{id}/review"), body).await?;
            }
            Op::Add(key, text, author) => {
                post(
                    "/sessions/golden/artifacts".into(),
                    json!({"criterion": key, "text": text, "author": author}),
                )
                .await?;
            }
            Op::Cluster(label, ids) => {
                post(
                    "/sessions/golden/clusters".into(),
                    json!({"label": label, "artifacts": ids}),
                )
                .await?;
            }
            Op::Hill(who, what, wow, text) => {
                post(
                    "/sessions/golden/hills".into(),
                    json!({"who": [who], "what": [what], "wow": [wow], "text": text}),
                )
                .await?;
            }
            Op::Complete(over) => {
                post(
                    "/sessions/golden/complete".into(),
                    json!({"override": over}),
                )
                .await?;
            }
        }
    }
    Ok(())
}

fn load_log(data: &Path) -> Result<Vec<SessionEvent>, String> {
    let text =
        std::fs::read_to_string(data.join("sessions/golden.jsonl")).map_err(|e| e.to_string())?;
    parse_event_log(&text).map_err(|e| e.to_string())
}

fn cli_api_parity() -> Check {
    let cli_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let api_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_cli(cli_dir.path())?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(run_rest(api_dir.path()))?;

    let by_cli = load_log(cli_dir.path())?;
    let by_api = load_log(api_dir.path())?;
    ensure(by_cli.len() == by_api.len(), || {
        format!("{} CLI events vs {} API events", by_cli.len(), by_api.len())
    })?;
    for (a, b) in by_cli.iter().zip(&by_api) {
        ensure(a.sequence == b.sequence && a.payload == b.payload, || {
            format!(
                "event {} differs: {} vs {}",
                a.sequence,
                a.payload.type_name(),
                b.payload.type_name()
            )
        })?;
    }
    let state = chai_core::replay(&by_api).map_err(|e| e.to_string())?;
    ensure(state.phase == Phase::Complete, || {
        "scenario did not complete".into()
    })?;
    Ok(format!(
        "{} events identical modulo timestamps",
        by_cli.len()
    ))
}

fn export_fidelity() -> Check {
    let session = common::golden_session();
    let md = export_session(session.state(), ExportFormat::Markdown);
    let lines: Vec<&str> = md.as_str().lines().collect();
    ensure(lines.first() == Some(&"| Who | What | Wow |"), || {
        format!("header {:?}", lines.first())
    })?;
    ensure(lines.get(1) == Some(&"| --- | --- | --- |"), || {
        "missing separator row".into()
    })?;
    let rows: Vec<Vec<&str>> = lines[2..]
        .iter()
        .take_while(|l| l.starts_with('|'))
        .map(|l| l.trim_matches('|').split(" | ").map(str::trim).collect())
        .collect();
    ensure(rows.len() == 10, || {
        format!("{} data rows, expected 10", rows.len())
    })?;
    ensure(rows.iter().all(|r| r.len() == 3), || {
        "row without three cells".into()
    })?;
    ensure(rows[0][0].contains("Retail store managers"), || {
        format!("first data row {:?}", rows[0])
    })?;
    let pads = |col: usize| rows.iter().filter(|r| r[col] == "~").count();
    ensure((pads(0), pads(1), pads(2)) == (4, 0, 1), || {
        format!("padding per column {:?}", (pads(0), pads(1), pads(2)))
    })?;
    Ok("3 columns, 10 rows, ~ padding 4/0/1".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 6] = [
        ("golden prompt", golden_prompt),
        ("golden transcript", golden_transcript),
        ("parser properties", parser_properties),
        ("event-sourcing oracle", replay_oracle),
        ("CLI/API parity", cli_api_parity),
        ("export fidelity", export_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
