//! Six-part prompt composition.
//!
//! The first four segments come from the activity and never change between
//! turns; the last two (context and execute directive) depend on the session.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::ActivityDefinition;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("step {index} is out of range (activity has {steps} steps)")]
    StepOutOfRange { index: u32, steps: u32 },
    #[error("context: must not be empty")]
    EmptyContext,
}

/// Background narrative for a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SessionContext(String);

impl SessionContext {
    pub fn new(narrative: impl Into<String>) -> Result<Self, PromptError> {
        let narrative = narrative.into();
        if narrative.trim().is_empty() {
            return Err(PromptError::EmptyContext);
        }
        Ok(Self(narrative))
    }

    pub fn narrative(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SessionContext {
    type Error = PromptError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<SessionContext> for String {
    fn from(value: SessionContext) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", content = "index", rename_all = "snake_case")]
pub enum DirectiveScope {
    Full,
    Step(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecuteDirective {
    pub scope: DirectiveScope,
    pub text: String,
}

const INITIAL_PREFIX: &str = "Given the above context, ";

/// Directive for a single step. Step 1 opens the conversation and refers back
/// to the context; later steps are continuation turns.
pub fn make_step_directive(
    activity: &ActivityDefinition,
    index: u32,
) -> Result<ExecuteDirective, PromptError> {
    let steps = activity.step_count();
    if index == 0 || index > steps {
        return Err(PromptError::StepOutOfRange { index, steps });
    }
    let text = if index == 1 {
        format!("{INITIAL_PREFIX}perform Step {index} of the exercise.")
    } else {
        format!("Perform Step {index} of the exercise.")
    };
    Ok(ExecuteDirective {
        scope: DirectiveScope::Step(index),
        text,
    })
}

pub fn make_full_run_directive(activity: &ActivityDefinition) -> ExecuteDirective {
    ExecuteDirective {
        scope: DirectiveScope::Full,
        text: format!(
            "{INITIAL_PREFIX}perform the entire {} exercise.",
            activity.name
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Introduction,
    Definition,
    Examples,
    Instructions,
    Context,
    Execute,
}

impl SegmentKind {
    pub const ORDER: [SegmentKind; 6] = [
        SegmentKind::Introduction,
        SegmentKind::Definition,
        SegmentKind::Examples,
        SegmentKind::Instructions,
        SegmentKind::Context,
        SegmentKind::Execute,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedPrompt {
    segments: Vec<Segment>,
    full_text: String,
}

impl ComposedPrompt {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn full_text(&self) -> &str {
        &self.full_text
    }

    pub fn segment(&self, kind: SegmentKind) -> &str {
        &self
            .segments
            .iter()
            .find(|s| s.kind == kind)
            .expect("all six kinds present")
            .text
    }
}

impl fmt::Display for ComposedPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.full_text)
    }
}

fn article(name: &str) -> &'static str {
    match name.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn render_examples(activity: &ActivityDefinition) -> String {
    match activity.examples.as_slice() {
        [only] => {
            let label = activity
                .example_label
                .as_deref()
                .unwrap_or("Example of an ideal outcome");
            format!("{label}: \"{only}\"")
        }
        many => {
            let mut out = String::from("Examples of ideal outcomes:");
            for (i, example) in many.iter().enumerate() {
                out.push_str(&format!("\n{}. {}", i + 1, example));
            }
            out
        }
    }
}

fn render_instructions(activity: &ActivityDefinition) -> String {
    let mut out = String::from("Instructions for this activity:");
    for step in &activity.steps {
        out.push_str(&format!("\n{}. {}", step.index, step.instruction_text));
    }
    out
}

/// Builds the six segments and their rendering.
pub fn compose_initial_prompt(
    activity: &ActivityDefinition,
    context: &SessionContext,
    directive: &ExecuteDirective,
) -> Result<ComposedPrompt, PromptError> {
    if let DirectiveScope::Step(index) = directive.scope {
        let steps = activity.step_count();
        if index == 0 || index > steps {
            return Err(PromptError::StepOutOfRange { index, steps });
        }
    }
    let texts = [
        format!(
            "We are conducting {} \"{}\" Design Thinking exercise.",
            article(&activity.name),
            activity.name
        ),
        format!("Activity Explanation:\n{}", activity.definition_text),
        render_examples(activity),
        render_instructions(activity),
        format!("Relevant Activity Context:\n{}", context.narrative()),
        directive.text.clone(),
    ];
    let segments: Vec<Segment> = SegmentKind::ORDER
        .into_iter()
        .zip(texts)
        .map(|(kind, text)| Segment { kind, text })
        .collect();
    let full_text = render_full_text(&segments);
    Ok(ComposedPrompt {
        segments,
        full_text,
    })
}

fn normalize_segment(text: &str) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = unified.lines().map(str::trim_end).collect();
    let start = lines
        .iter()
        .position(|l| !l.is_empty())
        .unwrap_or(lines.len());
    let end = lines
        .iter()
        .rposition(|l| !l.is_empty())
        .map_or(start, |i| i + 1);
    lines[start..end].join("\n")
}

/// Joins segments with one blank line, LF newlines, no trailing whitespace on
/// any line and a single trailing newline.
pub fn render_full_text(segments: &[Segment]) -> String {
    let mut out = segments
        .iter()
        .map(|s| normalize_segment(&s.text))
        .collect::<Vec<_>>()
        .join("\n\n");
    out.push('\n');
    out
}
