use crate::error::{Error, Result};

/// Subject–gerund template: `"bird squawking"` becomes `"the bird is
/// squawking"`. Labels without a trailing gerund fall back to identity.
pub const TEMPLATE_GERUND: usize = 0;

/// Pure identity template.
pub const TEMPLATE_IDENTITY: usize = 5;

/// Templates `0..NUM_DECLARATIVE_TEMPLATES` are the declarative ones the
/// benchmark builder samples from.
pub const NUM_DECLARATIVE_TEMPLATES: usize = 5;

const PREFIX_TEMPLATES: [&str; 4] = [
    "this is about ",
    "the example features ",
    "what is going on here is ",
    "the scene involves ",
];

/// Turns a semantic label into a declarative statement.
///
/// | id | rendering |
/// |----|-----------|
/// | 0  | `the <subject> is <gerund>`, identity when the label has no trailing `-ing` word |
/// | 1  | `this is about <label>` |
/// | 2  | `the example features <label>` |
/// | 3  | `what is going on here is <label>` |
/// | 4  | `the scene involves <label>` |
/// | 5  | `<label>` |
pub fn verbalize_label(label: &str, template_id: usize) -> Result<String> {
    let label = label.trim();
    if label.is_empty() {
        return Err(Error::validation("cannot verbalize an empty label"));
    }
    match template_id {
        TEMPLATE_GERUND => Ok(gerund_statement(label).unwrap_or_else(|| label.to_string())),
        1..=4 => Ok(format!("{}{}", PREFIX_TEMPLATES[template_id - 1], label)),
        TEMPLATE_IDENTITY => Ok(label.to_string()),
        other => Err(Error::validation(format!("unknown template id {other}"))),
    }
}

fn gerund_statement(label: &str) -> Option<String> {
    let words: Vec<&str> = label.split_whitespace().collect();
    let (verb, subject) = words.split_last()?;
    if subject.is_empty() || verb.len() <= 4 || !verb.to_ascii_lowercase().ends_with("ing") {
        return None;
    }
    let mut subject = subject.join(" ");
    for article in ["the ", "a ", "an "] {
        if subject.to_ascii_lowercase().starts_with(article) {
            subject = subject[article.len()..].to_string();
            break;
        }
    }
    Some(format!("the {subject} is {verb}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gerund_template_matches_reference_rendering() {
        assert_eq!(verbalize_label("bird squawking", 0).unwrap(), "the bird is squawking");
        assert_eq!(verbalize_label("car engine starting", 0).unwrap(), "the car engine is starting");
        assert_eq!(verbalize_label("a dog barking", 0).unwrap(), "the dog is barking");
    }

    #[test]
    fn identity_fallbacks() {
        assert_eq!(verbalize_label("X", TEMPLATE_GERUND).unwrap(), "X");
        assert_eq!(verbalize_label("X", TEMPLATE_IDENTITY).unwrap(), "X");
        assert_eq!(verbalize_label("thunder", 0).unwrap(), "thunder");
    }

    #[test]
    fn prefix_templates_embed_label() {
        for id in 1..NUM_DECLARATIVE_TEMPLATES {
            let s = verbalize_label("violin", id).unwrap();
            assert!(s.ends_with("violin"), "{s}");
            assert_ne!(s, "violin");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(verbalize_label("", 0), Err(Error::Validation(_))));
        assert!(matches!(verbalize_label("   ", 1), Err(Error::Validation(_))));
        assert!(matches!(verbalize_label("x", 6), Err(Error::Validation(_))));
    }

    #[test]
    fn deterministic() {
        for id in 0..=TEMPLATE_IDENTITY {
            assert_eq!(verbalize_label("bell ringing", id).unwrap(), verbalize_label("bell ringing", id).unwrap());
        }
    }
}
