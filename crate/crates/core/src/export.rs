//! Board exports: a Markdown report and a flat CSV.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{Artifact, ReviewStatus, SessionState};

/// Filler for columns shorter than the longest one.
pub const EMPTY_CELL: &str = "~";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Markdown,
    Csv,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Markdown => "md",
            ExportFormat::Csv => "csv",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Markdown => "text/markdown; charset=utf-8",
            ExportFormat::Csv => "text/csv; charset=utf-8",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExportError {
    #[error("unknown export format {0:?} (expected md or csv)")]
    UnknownFormat(String),
}

impl FromStr for ExportFormat {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ExportFormat::Markdown),
            "csv" => Ok(ExportFormat::Csv),
            _ => Err(ExportError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportDocument {
    pub format: ExportFormat,
    pub content: Vec<u8>,
}

impl ExportDocument {
    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.content).expect("exports are UTF-8")
    }
}

pub fn export_session(state: &SessionState, format: ExportFormat) -> ExportDocument {
    let content = match format {
        ExportFormat::Markdown => render_markdown(state).into_bytes(),
        ExportFormat::Csv => render_csv(state),
    };
    ExportDocument { format, content }
}

fn cell(text: &str) -> String {
    text.replace('\\', "\\\\")
        .replace('|', "\\|")
        .replace(['\r', '\n'], " ")
}

fn visible(state: &SessionState) -> impl Iterator<Item = &Artifact> {
    state
        .board
        .iter()
        .filter(|a| a.status != ReviewStatus::Rejected)
}

fn render_markdown(state: &SessionState) -> String {
    let criteria = &state.activity.criteria;
    let columns: Vec<Vec<&Artifact>> = criteria
        .iter()
        .map(|c| {
            visible(state)
                .filter(|a| a.criterion_key == c.key)
                .collect()
        })
        .collect();
    let rows = columns.iter().map(Vec::len).max().unwrap_or(0);

    let mut out = String::new();
    let header: Vec<_> = criteria.iter().map(|c| cell(&c.label)).collect();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", " --- |".repeat(criteria.len()));
    for row in 0..rows {
        let cells: Vec<_> = columns
            .iter()
            .map(|col| {
                col.get(row)
                    .map_or_else(|| EMPTY_CELL.to_string(), |a| cell(&a.text))
            })
            .collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }

    let clusters: Vec<_> = state
        .clusters
        .iter()
        .filter(|c| !c.member_ids.is_empty())
        .collect();
    if !clusters.is_empty() {
        out.push_str("\n## Clusters\n");
        for cluster in clusters {
            let _ = write!(out, "\n### {}\n\n", cluster.label);
            for id in &cluster.member_ids {
                if let Some(a) = state.artifact(id) {
                    let label = state
                        .activity
                        .criterion(&a.criterion_key)
                        .map_or(a.criterion_key.as_str(), |c| c.label.as_str());
                    let _ = writeln!(out, "- {} ({label})", a.text);
                }
            }
        }
    }

    if !state.hills.is_empty() {
        out.push_str("\n## Hills\n\n");
        let texts = |ids: &[String]| {
            ids.iter()
                .filter_map(|id| state.artifact(id))
                .map(|a| a.text.as_str())
                .collect::<Vec<_>>()
                .join("; ")
        };
        for (i, hill) in state.hills.iter().enumerate() {
            let _ = writeln!(out, "{}. {}", i + 1, hill.text);
            let _ = writeln!(out, "   - Who: {}", texts(&hill.who_refs));
            let _ = writeln!(out, "   - What: {}", texts(&hill.what_refs));
            let _ = writeln!(out, "   - Wow: {}", texts(&hill.wow_refs));
        }
    }
    out
}

fn render_csv(state: &SessionState) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    writer
        .write_record(["id", "criterion", "text", "origin", "status", "cluster"])
        .expect("in-memory write");
    for a in visible(state) {
        let cluster = a
            .cluster_id
            .as_deref()
            .and_then(|id| state.cluster(id))
            .map_or("", |c| c.label.as_str());
        writer
            .write_record([
                a.id.as_str(),
                a.criterion_key.as_str(),
                a.text.as_str(),
                &a.origin.to_string(),
                &a.status.to_string(),
                cluster,
            ])
            .expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}
