//! Parser properties shared by the core tests and the acceptance suite.

use std::collections::HashMap;

use chai_core::{parse_step_response, render_drafts, ArtifactDraft};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

/// Independent check for a leading list marker, written without regex.
pub fn starts_with_marker(text: &str) -> bool {
    let mut chars = text.chars().peekable();
    if let Some(&c) = chars.peek() {
        if matches!(c, '-' | '*' | '•' | '+') {
            chars.next();
            return chars.next().is_some_and(char::is_whitespace);
        }
    }
    let digits = text.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 || digits > 3 {
        return false;
    }
    let mut rest = text[digits..].chars();
    matches!(rest.next(), Some('.' | ')')) && rest.next().is_some_and(char::is_whitespace)
}

pub fn draft_text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9\"“(•*-][A-Za-z0-9 ,.;:!?'()/&*-]{0,40}"
        .prop_map(|s| s.trim_end().to_string())
        .prop_filter("marker-free, non-empty", |s| {
            !s.is_empty() && !starts_with_marker(s)
        })
}

pub fn key() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,8}"
}

#[derive(Debug, Clone)]
pub enum Line {
    Numbered(u16, String),
    Bullet(char, String),
    Note(String),
    Prose(String),
    LeadIn(String),
    Indented(String),
    Table(String),
    Blank,
}

pub fn line() -> impl Strategy<Value = Line> {
    let word = "[A-Za-z][A-Za-z ,.']{0,20}";
    prop_oneof![
        (1u16..200, word).prop_map(|(n, t)| Line::Numbered(n, t)),
        (prop::sample::select(vec!['-', '*', '•', '+']), word)
            .prop_map(|(c, t)| Line::Bullet(c, t)),
        (
            prop::sample::select(vec![
                "Note: ",
                "note: ",
                "Keep in mind ",
                "Please note ",
                "These are just "
            ]),
            word
        )
            .prop_map(|(cue, t)| Line::Note(format!("{cue}{t}"))),
        word.prop_map(Line::Prose),
        word.prop_map(|t| Line::LeadIn(format!("{t}:"))),
        word.prop_map(Line::Indented),
        word.prop_map(|t| Line::Table(format!("| {t} |"))),
        Just(Line::Blank),
    ]
}

pub fn render_line(line: &Line) -> String {
    match line {
        Line::Numbered(n, t) => format!("{n}. {t}"),
        Line::Bullet(c, t) => format!("{c} {t}"),
        Line::Note(t) | Line::Prose(t) | Line::LeadIn(t) | Line::Table(t) => t.clone(),
        Line::Indented(t) => format!("    {t}"),
        Line::Blank => String::new(),
    }
}

pub fn char_counts<'a>(parts: impl IntoIterator<Item = &'a str>) -> HashMap<char, usize> {
    let mut counts = HashMap::new();
    for part in parts {
        for c in part.chars().filter(|c| !c.is_whitespace()) {
            *counts.entry(c).or_default() += 1;
        }
    }
    counts
}

pub fn render_lines(lines: &[Line]) -> String {
    lines.iter().map(render_line).collect::<Vec<_>>().join("\n")
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<u32, String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        failure_persistence: None,
        ..Config::with_cases(cases)
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())?;
    Ok(cases)
}

/// Rendered draft lists parse back to the same drafts, with nothing left over.
pub fn round_trip(cases: u32) -> Result<u32, String> {
    let strategy = (key(), prop::collection::vec(draft_text(), 1..12));
    run(cases, strategy, |(key, texts)| {
        let drafts: Vec<_> = texts
            .into_iter()
            .map(|t| ArtifactDraft::new(key.clone(), t))
            .collect();
        let parsed = parse_step_response(&render_drafts(&drafts), &key);
        prop_assert_eq!(parsed.drafts, drafts);
        prop_assert!(parsed.disclaimers.is_empty());
        prop_assert!(parsed.unparsed.is_empty());
        Ok(())
    })
}

/// Every input character ends up in exactly one of drafts, disclaimers or
/// unparsed, except list-marker characters; every note is a disclaimer.
pub fn partition(cases: u32) -> Result<u32, String> {
    run(cases, prop::collection::vec(line(), 0..25), |lines| {
        let input = render_lines(&lines);
        let parsed = parse_step_response(&input, "who");

        let input_counts = char_counts([input.as_str()]);
        let output_counts = char_counts(
            parsed
                .drafts
                .iter()
                .map(|d| d.text.as_str())
                .chain(parsed.disclaimers.iter().map(String::as_str))
                .chain(parsed.unparsed.iter().map(String::as_str)),
        );
        for (c, n) in &output_counts {
            prop_assert!(
                input_counts.get(c).copied().unwrap_or(0) >= *n,
                "extra {:?}",
                c
            );
        }
        for (c, n) in &input_counts {
            let missing = n - output_counts.get(c).copied().unwrap_or(0);
            if missing > 0 {
                prop_assert!(
                    c.is_ascii_digit() || matches!(c, '.' | ')' | '-' | '*' | '•' | '+'),
                    "lost non-marker char {:?}",
                    c
                );
            }
        }

        let notes = lines.iter().filter(|l| matches!(l, Line::Note(_))).count();
        prop_assert_eq!(parsed.disclaimers.len(), notes);
        for d in &parsed.drafts {
            prop_assert!(!d.text.is_empty());
            prop_assert!(!starts_with_marker(&d.text));
        }
        Ok(())
    })
}
