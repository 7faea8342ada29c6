use std::sync::OnceLock;

use regex::Regex;

fn tag_pattern() -> &'static Regex {
    static TAG: OnceLock<Regex> = OnceLock::new();
    TAG.get_or_init(|| Regex::new(r"<\s*/?\s*[A-Za-z!][^<>]*>").expect("static regex"))
}

fn is_zero_width(c: char) -> bool {
    matches!(
        c,
        '\u{00AD}' | '\u{200B}' | '\u{200C}' | '\u{200D}' | '\u{2060}' | '\u{FEFF}'
    )
}

/// Cleans raw article text.
///
/// HTML tags are dropped with their inner text kept, control and zero-width
/// characters are removed, backslashes become spaces and whitespace runs are
/// collapsed to a single space. The result is trimmed and the function is
/// idempotent.
pub fn normalize_text(raw: &str) -> String {
    // Whitespace controls (\n, \t, ...) become plain spaces; the rest vanish.
    let mut text: String = raw
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if c.is_control() || is_zero_width(c) {
                None
            } else if c == '\\' {
                Some(' ')
            } else {
                Some(c)
            }
        })
        .collect();

    // Removing one tag can expose another, e.g. "<<b>i>".
    loop {
        let stripped = tag_pattern().replace_all(&text, "");
        if stripped.len() == text.len() {
            break;
        }
        text = stripped.into_owned();
    }

    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_tags_keeping_inner_text() {
        assert_eq!(normalize_text("a<b>x</b>b"), "axb");
        assert_eq!(normalize_text("<p>Hello <em>world</em></p>"), "Hello world");
        assert_eq!(normalize_text("<<b>i>text"), "text");
    }

    #[test]
    fn backslash_becomes_space() {
        assert_eq!(normalize_text("a\\b"), "a b");
    }

    #[test]
    fn drops_control_and_zero_width() {
        assert_eq!(normalize_text("a\u{200B}b\u{0007}c"), "abc");
        assert_eq!(
            normalize_text("  line one\n\n\tline two  "),
            "line one line two"
        );
    }

    #[test]
    fn comparison_operators_survive() {
        assert_eq!(normalize_text("3 < 4 and 5 > 2"), "3 < 4 and 5 > 2");
    }

    proptest! {
        #[test]
        fn idempotent(s in "[ a-c<>/\\\\\t\n\u{200B}\u{0001}bp!]{0,40}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn idempotent_any_unicode(s in "\\PC{0,60}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }
    }
}
