use super::{ActivityDefinition, CriterionDefinition, StepDefinition};

const DEFINITION: &str = include_str!("hills_definition.txt");

const EXAMPLE: &str = "Within selected product categories, requestors can find product matches \
for their search queries using natural, English-language conversation.";

const STEPS: [(&str, Option<&str>); 5] = [
    ("Create the list \u{201c}Who\u{201d}", Some("who")),
    ("Create the list \u{201c}What\u{201d}", Some("what")),
    ("Create the list \u{201c}Wow.\u{201d}", Some("wow")),
    (
        "Diverge on many ideas for each section and quickly share them with your teammates. \
         Build off of others\u{2019} ideas, but focus on quantity over quality and avoid drifting \
         into features or talking about implementation details.",
        None,
    ),
    (
        "Build your hill statement(s) using your ideas for \u{201c}Who,\u{201d} \
         \u{201c}What,\u{201d} and \u{201c}Wow.\u{201d}",
        None,
    ),
];

/// The built-in Hills exercise (who / what / wow).
pub fn builtin_hills() -> ActivityDefinition {
    let criterion = |key: &str, label: &str, description: &str| CriterionDefinition {
        key: key.into(),
        label: label.into(),
        description: description.into(),
    };
    ActivityDefinition {
        name: "Hills".into(),
        definition_text: DEFINITION.into(),
        examples: vec![EXAMPLE.into()],
        example_label: Some("Example of a good Hill Statement".into()),
        criteria: vec![
            criterion(
                "who",
                "Who",
                "Relevant people within the context we are designing within",
            ),
            criterion(
                "what",
                "What",
                "Enablements provided to the people in the Who section",
            ),
            criterion(
                "wow",
                "Wow",
                "The value differentiator or impact the solution provides",
            ),
        ],
        steps: STEPS
            .iter()
            .enumerate()
            .map(|(i, (text, criterion))| StepDefinition {
                index: i as u32 + 1,
                instruction_text: (*text).into(),
                produces_criterion: criterion.map(Into::into),
            })
            .collect(),
    }
}
