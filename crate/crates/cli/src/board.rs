use std::fmt::Write as _;

use chai_core::SessionState;

pub fn render(state: &SessionState) -> String {
    let mut out = String::new();
    let step = match state.current_step {
        Some(n) => format!(", step {n}/{}", state.activity.step_count()),
        None => String::new(),
    };
    let _ = writeln!(
        out,
        "session {} ({}, {}, {}{step})",
        state.id, state.activity.name, state.mode, state.phase
    );
    for criterion in &state.activity.criteria {
        let column: Vec<_> = state.column(&criterion.key).collect();
        let _ = writeln!(out, "== {} ({}) ==", criterion.label, column.len());
        for a in column {
            let mut line = format!("{} [{}] {}", a.id, a.status, a.text);
            if a.text != a.original_text {
                let _ = write!(line, " (was: {})", a.original_text);
            }
            if let Some(cluster) = a.cluster_id.as_deref().and_then(|c| state.cluster(c)) {
                let _ = write!(line, " {{{}}}", cluster.label);
            }
            let _ = writeln!(out, "{line}  origin={}", a.origin);
        }
    }
    let clusters: Vec<_> = state
        .clusters
        .iter()
        .filter(|c| !c.member_ids.is_empty())
        .collect();
    if !clusters.is_empty() {
        out.push_str("== Clusters ==\n");
        for c in clusters {
            let _ = writeln!(out, "{} {}: {}", c.id, c.label, c.member_ids.join(", "));
        }
    }
    if !state.hills.is_empty() {
        out.push_str("== Hills ==\n");
        for h in &state.hills {
            let _ = writeln!(
                out,
                "{} {} [who {}; what {}; wow {}]",
                h.id,
                h.text,
                h.who_refs.join(","),
                h.what_refs.join(","),
                h.wow_refs.join(",")
            );
        }
    }
    let notes: usize = state
        .step_commentary
        .iter()
        .map(|c| c.disclaimers.len())
        .sum();
    if notes > 0 {
        out.push_str("== Agent notes ==\n");
        for c in &state.step_commentary {
            for d in &c.disclaimers {
                match c.step {
                    Some(step) => {
                        let _ = writeln!(out, "step {step}: {d}");
                    }
                    None => {
                        let _ = writeln!(out, "{d}");
                    }
                }
            }
        }
    }
    out
}
