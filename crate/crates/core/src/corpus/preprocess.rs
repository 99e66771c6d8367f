//! Text normalisation applied to every article and paragraph before tokenisation.
//!
//! Order matters: links go first so they are not shredded into residue tokens by
//! the punctuation pass, and literal escape sequences (`\n` written as two
//! characters) go before the backslash itself is stripped as punctuation.

use std::sync::LazyLock;

use regex::Regex;

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:[a-z][a-z0-9+.\-]*://|www\.)\S*").unwrap());

static LITERAL_ESCAPE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"\\(?:u[0-9a-fA-F]{4}|x[0-9a-fA-F]{2}|[nrtfvab0'"\\])"#).unwrap());

static CONTROL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{Cc}").unwrap());

static PUNCT_OR_SYMBOL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\p{P}\p{S}]").unwrap());

static DIGITS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{Nd}+").unwrap());

/// Removes links, escape characters, punctuation, symbols and digit runs, then
/// lowercases and collapses whitespace. Removed spans become word boundaries.
pub fn preprocess_text(raw: &str) -> String {
    let text = URL.replace_all(raw, " ");
    let text = LITERAL_ESCAPE.replace_all(&text, " ");
    let text = CONTROL.replace_all(&text, " ");
    let text = PUNCT_OR_SYMBOL.replace_all(&text, " ");
    let text = DIGITS.replace_all(&text, " ");
    let lowered = text.to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace tokenisation of already-preprocessed text.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_punctuation_and_digits() {
        assert_eq!(preprocess_text("Hello, World! 123"), "hello world");
    }

    #[test]
    fn strips_links_and_newlines() {
        assert_eq!(preprocess_text("see https://x.y/z\nNow"), "see now");
        assert_eq!(preprocess_text("visit www.example.org today"), "visit today");
    }

    #[test]
    fn strips_literal_escape_sequences() {
        assert_eq!(preprocess_text(r"line one\nline two\t end"), "line one line two end");
    }

    #[test]
    fn empty_stays_empty() {
        assert_eq!(preprocess_text(""), "");
        assert_eq!(preprocess_text("  \t\n "), "");
    }

    #[test]
    fn handles_other_scripts() {
        assert_eq!(
            preprocess_text("«Ventisei milioni» di cittadini — Reclusi."),
            "ventisei milioni di cittadini reclusi"
        );
        assert_eq!(preprocess_text("Привет, МИР! ٣٤٥"), "привет мир");
        assert_eq!(preprocess_text("Les études de l'Insee"), "les études de l insee");
    }

    #[test]
    fn symbols_are_removed() {
        assert_eq!(preprocess_text("price: 5€ + tax = $$"), "price tax");
    }

    proptest! {
        #[test]
        fn idempotent(raw in "\\PC{0,80}") {
            let once = preprocess_text(&raw);
            prop_assert_eq!(preprocess_text(&once), once);
        }

        #[test]
        fn idempotent_on_url_like_text(raw in "[a-zA-Z:/.\\\\ ]{0,60}") {
            let once = preprocess_text(&raw);
            prop_assert_eq!(preprocess_text(&once), once);
        }

        #[test]
        fn tokens_are_whitespace_split(raw in "\\PC{0,80}") {
            let text = preprocess_text(&raw);
            let joined = tokenize(&text).join(" ");
            prop_assert_eq!(joined, text);
        }
    }
}
