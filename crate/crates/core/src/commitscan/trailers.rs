//! Commit-message trailer parsing.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trailer {
    pub key: String,
    pub value: String,
}

impl Trailer {
    pub fn key_is(&self, key: &str) -> bool {
        self.key.eq_ignore_ascii_case(key)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Identity {
    pub name: String,
    pub email: String,
}

impl Identity {
    pub fn new(name: impl Into<String>, email: impl Into<String>) -> Self {
        Identity {
            name: name.into(),
            email: email.into(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.name.is_empty() && self.email.is_empty()
    }

    /// Case-insensitive equality on both fields.
    pub fn same_as(&self, other: &Identity) -> bool {
        self.name.to_lowercase() == other.name.to_lowercase()
            && self.email.to_lowercase() == other.email.to_lowercase()
    }
}

// Agents write `Generated by: Claude` with a space in the key; accept it in
// trailer blocks alongside regular single-token keys.
const SPACED_KEYS: &[&str] = &["generated by"];

fn split_trailer_line(line: &str) -> Option<(&str, &str)> {
    let (key, value) = line.split_once(':')?;
    let valid = !key.is_empty() && !key.chars().any(char::is_whitespace)
        || SPACED_KEYS.iter().any(|k| key.eq_ignore_ascii_case(k));
    valid.then(|| (key, value.trim()))
}

/// Returns the trailers of the message's final paragraph.
///
/// The final paragraph is a trailer block only when every line in it is a
/// `Key: value` line or an indented continuation of the previous one;
/// otherwise the message has no trailers.
pub fn parse_trailers(message: &str) -> Vec<Trailer> {
    let lines: Vec<&str> = message.lines().collect();
    let end = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(0, |i| i + 1);
    let start = lines[..end]
        .iter()
        .rposition(|l| l.trim().is_empty())
        .map_or(0, |i| i + 1);

    let mut trailers: Vec<Trailer> = Vec::new();
    for line in &lines[start..end] {
        if line.starts_with([' ', '\t']) {
            match trailers.last_mut() {
                Some(last) => {
                    let more = line.trim();
                    if !last.value.is_empty() {
                        last.value.push(' ');
                    }
                    last.value.push_str(more);
                }
                None => return Vec::new(),
            }
            continue;
        }
        match split_trailer_line(line) {
            Some((key, value)) => trailers.push(Trailer {
                key: key.to_string(),
                value: value.to_string(),
            }),
            None => return Vec::new(),
        }
    }
    trailers
}

/// Every `Co-authored-by:` line anywhere in the message, in order.
///
/// Mirrors the platform's full-text search behavior instead of the strict
/// trailer-block rule.
pub fn grep_coauthor_lines(message: &str) -> Vec<String> {
    const KEY: &str = "co-authored-by:";
    message
        .lines()
        .filter_map(|line| {
            let line = line.trim_start();
            let head = line.get(..KEY.len())?;
            head.eq_ignore_ascii_case(KEY)
                .then(|| line[KEY.len()..].trim().to_string())
        })
        .collect()
}

/// Splits a `Name <email>` value into an identity.
pub fn parse_coauthor(value: &str) -> Identity {
    let value = value.trim();
    if let Some(open) = value.rfind('<') {
        if let Some(close_rel) = value[open..].find('>') {
            let email = value[open + 1..open + close_rel].trim();
            let name = value[..open].trim();
            return Identity::new(name, email);
        }
    }
    if value.contains('@') && !value.contains(char::is_whitespace) {
        Identity::new("", value)
    } else {
        Identity::new(value, "")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(key: &str, value: &str) -> Trailer {
        Trailer {
            key: key.into(),
            value: value.into(),
        }
    }

    #[test]
    fn single_coauthor() {
        assert_eq!(
            parse_trailers("Fix bug\n\nCo-authored-by: Claude <noreply@anthropic.com>"),
            vec![t("Co-authored-by", "Claude <noreply@anthropic.com>")]
        );
    }

    #[test]
    fn empty_message() {
        assert!(parse_trailers("").is_empty());
        assert!(parse_trailers("\n\n\n").is_empty());
    }

    #[test]
    fn lowercase_key_and_second_trailer() {
        let got =
            parse_trailers("msg\n\nco-authored-by: aider <aider@aider.chat>\nGenerated-by: Claude");
        assert_eq!(
            got,
            vec![
                t("co-authored-by", "aider <aider@aider.chat>"),
                t("Generated-by", "Claude")
            ]
        );
        assert!(got[0].key_is("Co-Authored-By"));
    }

    #[test]
    fn spaced_generated_by_key() {
        let got = parse_trailers("msg\n\nGenerated by: Claude\nCo-authored-by: x <y@z>");
        assert_eq!(got.len(), 2);
        assert_eq!(got[0], t("Generated by", "Claude"));
    }

    #[test]
    fn non_trailer_final_paragraph() {
        assert!(parse_trailers("Subject\n\nSome body text.\nCo-authored-by: a <b@c>").is_empty());
    }

    #[test]
    fn only_final_paragraph_counts() {
        let msg = "Subject\n\nCo-authored-by: a <a@x>\n\nSigned-off-by: b <b@x>\n";
        assert_eq!(parse_trailers(msg), vec![t("Signed-off-by", "b <b@x>")]);
    }

    #[test]
    fn continuation_lines_and_crlf() {
        let msg = "Subject\r\n\r\nNote: first\r\n  second\r\nCo-authored-by: a <a@x>\r\n";
        assert_eq!(
            parse_trailers(msg),
            vec![t("Note", "first second"), t("Co-authored-by", "a <a@x>")]
        );
    }

    #[test]
    fn repeated_keys_kept_in_order() {
        let got = parse_trailers("s\n\nCo-authored-by: a <a@x>\nCo-authored-by: b <b@x>");
        assert_eq!(got.len(), 2);
        assert_eq!(got[1].value, "b <b@x>");
    }

    #[test]
    fn coauthor_forms() {
        assert_eq!(
            parse_coauthor("Claude <noreply@anthropic.com>"),
            Identity::new("Claude", "noreply@anthropic.com")
        );
        assert_eq!(
            parse_coauthor("cursoragent@cursor.com"),
            Identity::new("", "cursoragent@cursor.com")
        );
        assert_eq!(parse_coauthor("<a@b.c>"), Identity::new("", "a@b.c"));
        assert_eq!(
            parse_coauthor("Gemini 2.5 Pro"),
            Identity::new("Gemini 2.5 Pro", "")
        );
        assert!(parse_coauthor("   ").is_empty());
    }

    #[test]
    fn grep_finds_lines_anywhere() {
        let msg = "Subject\n\n  CO-AUTHORED-BY: cursor\nbody\n\nSigned-off-by: me";
        assert_eq!(grep_coauthor_lines(msg), vec!["cursor".to_string()]);
    }

    #[test]
    fn identity_compare_ignores_case() {
        assert!(Identity::new("Claude", "X@Y").same_as(&Identity::new("claude", "x@y")));
    }
}
