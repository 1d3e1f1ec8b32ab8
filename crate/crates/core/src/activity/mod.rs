//! Design Thinking activity definitions.
//!
//! An [`ActivityDefinition`] holds the four static parts of a facilitation
//! prompt: the activity name, its explanation, exemplar outcomes and the
//! ordered step list. Activities are authored as JSON documents and loaded
//! with [`load_activity`]; the Hills exercise ships built in.

mod hills;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hills::builtin_hills;

/// One board column, e.g. "who".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionDefinition {
    pub key: String,
    pub label: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDefinition {
    pub index: u32,
    #[serde(rename = "instruction")]
    pub instruction_text: String,
    /// Criterion key the step's list output belongs to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub produces_criterion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityDefinition {
    pub name: String,
    #[serde(rename = "definition")]
    pub definition_text: String,
    pub examples: Vec<String>,
    /// Lead-in used when the activity has exactly one example, e.g.
    /// "Example of a good Hill Statement". Multi-example activities ignore it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_label: Option<String>,
    pub criteria: Vec<CriterionDefinition>,
    pub steps: Vec<StepDefinition>,
}

impl ActivityDefinition {
    pub fn criterion(&self, key: &str) -> Option<&CriterionDefinition> {
        self.criteria.iter().find(|c| c.key == key)
    }

    /// Step by 1-based ordinal.
    pub fn step(&self, index: u32) -> Option<&StepDefinition> {
        index
            .checked_sub(1)
            .and_then(|i| self.steps.get(i as usize))
    }

    pub fn step_count(&self) -> u32 {
        self.steps.len() as u32
    }

    /// Canonical JSON document: two-space indent, LF newlines, trailing newline.
    pub fn to_document(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("activity serializes");
        out.push('\n');
        out
    }
}

/// A single violated invariant, rendered as `"{field}: {problem}"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ActivityError {
    #[error("malformed activity document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid activity: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn is_valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

/// Checks every invariant and reports all violations, in field order.
pub fn validate_activity(def: &ActivityDefinition) -> Vec<Violation> {
    let mut out = Vec::new();

    if def.name.trim().is_empty() {
        out.push(Violation::new("name", "must not be empty"));
    }
    if def.examples.is_empty() {
        out.push(Violation::new("examples", "at least one required"));
    }
    for (i, example) in def.examples.iter().enumerate() {
        if example.trim().is_empty() {
            out.push(Violation::new(
                format!("examples[{i}]"),
                "must not be empty",
            ));
        }
    }

    let mut seen = HashSet::new();
    for (i, criterion) in def.criteria.iter().enumerate() {
        if !is_valid_key(&criterion.key) {
            out.push(Violation::new(
                format!("criteria[{i}].key"),
                format!(
                    "{:?} must be non-empty lowercase alphanumeric or hyphen",
                    criterion.key
                ),
            ));
        }
        if !seen.insert(criterion.key.as_str()) {
            out.push(Violation::new(
                format!("criteria[{i}].key"),
                format!("duplicate criterion key {:?}", criterion.key),
            ));
        }
    }

    if def.steps.is_empty() {
        out.push(Violation::new("steps", "at least one required"));
    }
    let contiguous = def
        .steps
        .iter()
        .enumerate()
        .all(|(i, step)| step.index as usize == i + 1);
    if !contiguous {
        out.push(Violation::new("steps", "non-contiguous steps"));
    }
    for (i, step) in def.steps.iter().enumerate() {
        if step.instruction_text.trim().is_empty() {
            out.push(Violation::new(
                format!("steps[{i}].instruction"),
                "must not be empty",
            ));
        }
        if let Some(key) = &step.produces_criterion {
            if !seen.contains(key.as_str()) {
                out.push(Violation::new(
                    format!("steps[{i}]"),
                    format!("unknown criterion {key:?}"),
                ));
            }
        }
    }
    out
}

/// Parses and validates an activity document.
pub fn load_activity(document: &str) -> Result<ActivityDefinition, ActivityError> {
    let def: ActivityDefinition = serde_json::from_str(document)?;
    let violations = validate_activity(&def);
    if violations.is_empty() {
        Ok(def)
    } else {
        Err(ActivityError::Invalid(violations))
    }
}

/// Looks up a shipped activity by case-insensitive name.
pub fn builtin(name: &str) -> Option<ActivityDefinition> {
    match name.to_ascii_lowercase().as_str() {
        "hills" => Some(builtin_hills()),
        _ => None,
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["hills"]
}
