//! Turns free-text agent replies into per-criterion artifact drafts.
//!
//! Parsing is line oriented. Every non-blank input line ends up in exactly one
//! of three places: a draft (list item), a disclaimer, or the unparsed
//! remainder (headings, prose, tables).

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::activity::CriterionDefinition;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactDraft {
    pub criterion_key: String,
    pub text: String,
}

impl ArtifactDraft {
    pub fn new(criterion_key: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            criterion_key: criterion_key.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub drafts: Vec<ArtifactDraft>,
    pub disclaimers: Vec<String>,
    pub unparsed: Vec<String>,
}

impl ParsedResponse {
    pub fn is_empty(&self) -> bool {
        self.drafts.is_empty() && self.disclaimers.is_empty() && self.unparsed.is_empty()
    }

    fn extend(&mut self, other: ParsedResponse) {
        self.drafts.extend(other.drafts);
        self.disclaimers.extend(other.disclaimers);
        self.unparsed.extend(other.unparsed);
    }
}

/// Case-insensitive line prefixes that mark a hedge rather than an idea.
pub const DEFAULT_DISCLAIMER_CUES: [&str; 4] =
    ["note:", "these are just", "keep in mind", "please note"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseParser {
    cues: Vec<String>,
}

impl Default for ResponseParser {
    fn default() -> Self {
        Self::with_cues(DEFAULT_DISCLAIMER_CUES)
    }
}

fn numbered_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\d{1,3}[.)]\s+").unwrap())
}

fn bullet_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[-*•+]\s+").unwrap())
}

/// Removes every leading list marker. Returns `None` when the line does not
/// start with one.
fn strip_markers(line: &str) -> Option<&str> {
    let mut rest = line;
    let mut stripped = false;
    loop {
        let m = numbered_marker()
            .find(rest)
            .or_else(|| bullet_marker().find(rest));
        match m {
            Some(m) => {
                rest = &rest[m.end()..];
                stripped = true;
            }
            None => break,
        }
    }
    stripped.then_some(rest.trim())
}

/// Leading emphasis (`**Note:**`, `_Note:_`) is ignored when it hugs the word.
fn strip_leading_emphasis(line: &str) -> &str {
    let rest = line.trim_start_matches(['*', '_']);
    if rest.starts_with(char::is_whitespace) {
        line
    } else {
        rest
    }
}

const HEADING_EDGE: &[char] = &[
    '#', '*', '_', '"', '\'', '`', ':', ' ', '\t', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}',
];

/// Reduces `**"Who" (Potential Users):**` to `who`.
fn heading_core(line: &str) -> String {
    let mut s = line.trim();
    loop {
        let before = s;
        s = s.trim_matches(HEADING_EDGE);
        if s.ends_with(')') {
            if let Some(open) = s.rfind('(') {
                if open > 0 {
                    s = &s[..open];
                }
            }
        }
        if s == before {
            break;
        }
    }
    s.to_lowercase()
}

impl ResponseParser {
    pub fn with_cues<I, S>(cues: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            cues: cues
                .into_iter()
                .map(|c| c.as_ref().trim().to_lowercase())
                .filter(|c| !c.is_empty())
                .collect(),
        }
    }

    pub fn cues(&self) -> &[String] {
        &self.cues
    }

    pub fn detect_disclaimer(&self, line: &str) -> bool {
        let lowered = strip_leading_emphasis(line.trim()).to_lowercase();
        self.cues
            .iter()
            .any(|cue| lowered.starts_with(cue.as_str()))
    }

    /// Parses the reply to a single step; every list item is attributed to
    /// `criterion_key`.
    pub fn parse_step_response(&self, text: &str, criterion_key: &str) -> ParsedResponse {
        self.parse_section(text, criterion_key, false)
    }

    /// Splits a reply that feeds no criterion into disclaimers and
    /// commentary; no drafts are produced.
    pub fn parse_commentary(&self, text: &str) -> ParsedResponse {
        let mut out = ParsedResponse::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if self.detect_disclaimer(line) {
                out.disclaimers.push(line.to_string());
            } else {
                out.unparsed.push(line.to_string());
            }
        }
        out
    }

    fn parse_section(
        &self,
        text: &str,
        criterion_key: &str,
        under_heading: bool,
    ) -> ParsedResponse {
        let mut out = ParsedResponse::default();
        // Bare lines count as items directly after a colon-terminated lead-in.
        let mut bare_list = under_heading;
        let mut bare_taken = false;
        // Whether an indented line may continue the previous draft.
        let mut open_item = false;

        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() {
                if bare_taken {
                    bare_list = false;
                }
                open_item = false;
                continue;
            }
            if self.detect_disclaimer(line) {
                out.disclaimers.push(line.to_string());
                bare_list = false;
                open_item = false;
                continue;
            }
            if line.starts_with('|') {
                out.unparsed.push(line.to_string());
                bare_list = false;
                open_item = false;
                continue;
            }
            if let Some(item) = strip_markers(line) {
                if item.is_empty() {
                    out.unparsed.push(line.to_string());
                    open_item = false;
                } else {
                    out.drafts.push(ArtifactDraft::new(criterion_key, item));
                    open_item = true;
                }
                bare_list = false;
                continue;
            }
            if open_item && raw.starts_with(char::is_whitespace) {
                let last = out.drafts.last_mut().expect("open item has a draft");
                last.text.push(' ');
                last.text.push_str(line);
                continue;
            }
            open_item = false;
            if line.ends_with(':') {
                out.unparsed.push(line.to_string());
                bare_list = true;
                bare_taken = false;
            } else if bare_list {
                out.drafts.push(ArtifactDraft::new(criterion_key, line));
                bare_taken = true;
            } else {
                out.unparsed.push(line.to_string());
            }
        }
        out
    }

    fn heading_for<'a>(
        &self,
        line: &str,
        criteria: &'a [CriterionDefinition],
    ) -> Option<&'a CriterionDefinition> {
        if strip_markers(line.trim()).is_some() {
            return None;
        }
        let core = heading_core(line);
        if core.is_empty() {
            return None;
        }
        criteria
            .iter()
            .find(|c| core == c.label.to_lowercase() || core == c.key)
    }

    /// Parses a whole-exercise reply by splitting it into sections at lines
    /// that name a criterion.
    pub fn parse_full_response(
        &self,
        text: &str,
        criteria: &[CriterionDefinition],
    ) -> ParsedResponse {
        let mut out = ParsedResponse::default();
        let mut current: Option<&CriterionDefinition> = None;
        let mut section = String::new();

        let flush = |out: &mut ParsedResponse,
                     current: Option<&CriterionDefinition>,
                     section: &mut String| {
            match current {
                Some(c) => out.extend(self.parse_section(section, &c.key, true)),
                None => out.unparsed.extend(
                    section
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(String::from),
                ),
            }
            section.clear();
        };

        for line in text.lines() {
            if let Some(criterion) = self.heading_for(line, criteria) {
                flush(&mut out, current, &mut section);
                out.unparsed.push(line.trim().to_string());
                current = Some(criterion);
            } else {
                section.push_str(line);
                section.push('\n');
            }
        }
        flush(&mut out, current, &mut section);
        out
    }
}

pub fn detect_disclaimer(line: &str) -> bool {
    ResponseParser::default().detect_disclaimer(line)
}

pub fn parse_step_response(text: &str, criterion_key: &str) -> ParsedResponse {
    ResponseParser::default().parse_step_response(text, criterion_key)
}

pub fn parse_full_response(text: &str, criteria: &[CriterionDefinition]) -> ParsedResponse {
    ResponseParser::default().parse_full_response(text, criteria)
}

/// Numbered list, one draft per line, no trailing newline.
pub fn render_drafts(drafts: &[ArtifactDraft]) -> String {
    drafts
        .iter()
        .enumerate()
        .map(|(i, d)| format!("{}. {}", i + 1, d.text))
        .collect::<Vec<_>>()
        .join("\n")
}
