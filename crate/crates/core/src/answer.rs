//! Answer normalization and equivalence.
//!
//! Answers are trimmed, stripped of one trailing period and case-folded. If both
//! sides then parse as finite decimal numbers they are compared with an absolute
//! tolerance of [`NUMERIC_TOLERANCE`]; otherwise the normalized strings must match.

use std::borrow::Cow;

pub const NUMERIC_TOLERANCE: f64 = 1e-9;

/// An answer after normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalizedAnswer {
    Number(f64),
    Text(String),
}

pub fn normalize(raw: &str) -> NormalizedAnswer {
    let text = normalized_text(raw);
    match parse_number(&text) {
        Some(value) => NormalizedAnswer::Number(value),
        None => NormalizedAnswer::Text(text.into_owned()),
    }
}

fn normalized_text(raw: &str) -> Cow<'_, str> {
    let mut s = raw.trim();
    if let Some(stripped) = s.strip_suffix('.') {
        s = stripped.trim_end();
    }
    if s.chars().any(char::is_uppercase) {
        Cow::Owned(s.to_lowercase())
    } else {
        Cow::Borrowed(s)
    }
}

fn parse_number(s: &str) -> Option<f64> {
    // `f64::from_str` accepts "inf" and "nan"; those stay textual.
    let first = s.as_bytes().first()?;
    if !(first.is_ascii_digit() || matches!(first, b'+' | b'-' | b'.')) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// True iff the two answers normalize to the same value.
pub fn answers_equivalent(candidate: &str, gold: &str) -> bool {
    match (normalize(candidate), normalize(gold)) {
        (NormalizedAnswer::Number(a), NormalizedAnswer::Number(b)) => {
            (a - b).abs() <= NUMERIC_TOLERANCE
        }
        (NormalizedAnswer::Text(a), NormalizedAnswer::Text(b)) => a == b,
        _ => false,
    }
}

/// Canonical key for counting distinct answers, e.g. for answer entropy.
///
/// Numbers map to the shortest round-trip form of their value, so `"4"`,
/// `" 4.0 "` and `"4."` share a key. Numeric keys start with a digit or `-`,
/// textual keys are prefixed with `'` so the two spaces never collide.
pub fn answer_key(raw: &str) -> String {
    let text = normalized_text(raw);
    match parse_number(&text) {
        Some(value) => {
            let value = if value == 0.0 { 0.0 } else { value };
            format!("{value}")
        }
        None => {
            let mut key = String::with_capacity(text.len() + 1);
            key.push('\'');
            key.push_str(&text);
            key
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_answers_match() {
        assert!(answers_equivalent("4", "4"));
    }

    #[test]
    fn padded_decimal_matches_integer() {
        // " 4.0 " -> trim -> "4.0" -> 4.0 ; "4" -> 4.0 ; |4.0 - 4.0| = 0
        assert!(answers_equivalent(" 4.0 ", "4"));
    }

    #[test]
    fn different_numbers_do_not_match() {
        assert!(!answers_equivalent("5", "4"));
    }

    #[test]
    fn trailing_period_and_case_are_ignored() {
        assert!(answers_equivalent("Paris.", "paris"));
        assert!(answers_equivalent("4.", "4"));
        assert!(answers_equivalent("  YES ", "yes"));
    }

    #[test]
    fn empty_candidate() {
        assert!(!answers_equivalent("", "4"));
        assert!(answers_equivalent("", ""));
    }

    #[test]
    fn numeric_tolerance_is_absolute() {
        assert!(answers_equivalent("1.0000000001", "1"));
        assert!(!answers_equivalent("1.00001", "1"));
    }

    #[test]
    fn non_finite_spellings_stay_textual() {
        assert_eq!(normalize("inf"), NormalizedAnswer::Text("inf".into()));
        assert_eq!(normalize("NaN"), NormalizedAnswer::Text("nan".into()));
        assert!(answers_equivalent("NaN", "nan"));
        assert!(!answers_equivalent("inf", "1e400"));
    }

    #[test]
    fn keys_collapse_formatting_noise() {
        assert_eq!(answer_key("4"), answer_key(" 4.0 "));
        assert_eq!(answer_key("-0"), answer_key("0"));
        assert_ne!(answer_key("4"), answer_key("four"));
        assert_ne!(answer_key("'4"), answer_key("4"));
    }

    fn answer_strategy() -> impl Strategy<Value = String> {
        prop_oneof![
            (-50i32..50).prop_map(|n| n.to_string()),
            (-50i32..50).prop_map(|n| format!(" {n}.0 ")),
            (-50i32..50).prop_map(|n| format!("{}.", n)),
            (-50i32..50).prop_map(|n| format!("{}.25", n)),
            "[a-cA-C]{0,3}\\.?",
        ]
    }

    proptest! {
        #[test]
        fn equivalence_is_reflexive_and_symmetric(a in answer_strategy(), b in answer_strategy()) {
            prop_assert!(answers_equivalent(&a, &a));
            prop_assert_eq!(answers_equivalent(&a, &b), answers_equivalent(&b, &a));
        }

        #[test]
        fn equivalence_is_transitive(a in answer_strategy(), b in answer_strategy(), c in answer_strategy()) {
            if answers_equivalent(&a, &b) && answers_equivalent(&b, &c) {
                prop_assert!(answers_equivalent(&a, &c));
            }
        }

        #[test]
        fn keys_agree_with_equivalence(a in answer_strategy(), b in answer_strategy()) {
            prop_assert_eq!(answer_key(&a) == answer_key(&b), answers_equivalent(&a, &b));
        }
    }
}
