//! A `.gitignore` pattern engine covering the constructs agents' ignore
//! entries actually use: negation, directory-only patterns, `*`, `?`, `**`
//! and root anchoring.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IgnorePattern {
    /// The line as written in the ignore file.
    pub source: String,
    pub line_number: usize,
    pub negated: bool,
    pub dir_only: bool,
    /// Matched against the full repository-relative path rather than the basename.
    pub anchored: bool,
    glob: Vec<char>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IgnoreDiagnostic {
    pub line_number: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IgnoreRuleSet {
    pub patterns: Vec<IgnorePattern>,
    pub diagnostics: Vec<IgnoreDiagnostic>,
}

fn strip_trailing_spaces(line: &str) -> &str {
    let bytes = line.as_bytes();
    let mut end = bytes.len();
    while end > 0 && bytes[end - 1] == b' ' {
        // `\ ` keeps the escaped space
        if end >= 2 && bytes[end - 2] == b'\\' {
            break;
        }
        end -= 1;
    }
    &line[..end]
}

fn has_unescaped(glob: &[char], wanted: char) -> bool {
    let mut i = 0;
    while i < glob.len() {
        match glob[i] {
            '\\' => i += 2,
            c if c == wanted => return true,
            _ => i += 1,
        }
    }
    false
}

fn parse_line(raw: &str, line_number: usize) -> (Option<IgnorePattern>, Option<IgnoreDiagnostic>) {
    let raw = raw.strip_suffix('\r').unwrap_or(raw);
    if raw.trim().is_empty() || raw.starts_with('#') {
        return (None, None);
    }
    let mut body = strip_trailing_spaces(raw);
    let negated = body.starts_with('!');
    if negated {
        body = &body[1..];
    }
    let dir_only = body.ends_with('/');
    let body = body.trim_end_matches('/');
    let anchored = body.contains('/');
    let body = body.strip_prefix('/').unwrap_or(body);
    if body.is_empty() {
        return (None, None);
    }
    let glob: Vec<char> = body.chars().collect();
    let diag = has_unescaped(&glob, '[').then(|| IgnoreDiagnostic {
        line_number,
        message: format!("character classes are not supported; `{raw}` is matched literally"),
    });
    let pattern = IgnorePattern {
        source: raw.to_string(),
        line_number,
        negated,
        dir_only,
        anchored,
        glob,
    };
    (Some(pattern), diag)
}

/// Parses ignore-file lines. Unsupported constructs never fail; they are
/// matched literally and reported in `diagnostics`.
pub fn parse_ignore_file<S: AsRef<str>>(lines: &[S]) -> IgnoreRuleSet {
    let mut set = IgnoreRuleSet::default();
    for (idx, line) in lines.iter().enumerate() {
        let (pattern, diag) = parse_line(line.as_ref(), idx + 1);
        set.patterns.extend(pattern);
        set.diagnostics.extend(diag);
    }
    set
}

impl IgnoreRuleSet {
    pub fn from_text(text: &str) -> Self {
        let lines: Vec<&str> = text.lines().collect();
        parse_ignore_file(&lines)
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// True when `path` is excluded, either directly or through an excluded
    /// ancestor directory.
    pub fn is_ignored(&self, path: &str, is_dir: bool) -> bool {
        self.excluded_by(path, is_dir).is_some()
    }

    /// The pattern responsible for excluding `path`, if it is excluded.
    pub fn excluded_by(&self, path: &str, is_dir: bool) -> Option<&IgnorePattern> {
        let path = path.trim_matches('/');
        if path.is_empty() {
            return None;
        }
        for (i, c) in path.char_indices() {
            if c == '/' {
                if let Some(p) = self.decide(&path[..i], true) {
                    return Some(p);
                }
            }
        }
        self.decide(path, is_dir)
    }

    // Last matching pattern wins; returns it only when it excludes.
    fn decide(&self, path: &str, is_dir: bool) -> Option<&IgnorePattern> {
        let chars: Vec<char> = path.chars().collect();
        let base_start = chars.iter().rposition(|&c| c == '/').map_or(0, |i| i + 1);
        let last = self.patterns.iter().rev().find(|p| {
            if p.dir_only && !is_dir {
                return false;
            }
            if p.anchored {
                wildmatch(&p.glob, 0, &chars, 0)
            } else {
                wildmatch(&p.glob, 0, &chars[base_start..], 0)
            }
        })?;
        (!last.negated).then_some(last)
    }
}

pub fn is_ignored(ruleset: &IgnoreRuleSet, path: &str, is_dir: bool) -> bool {
    ruleset.is_ignored(path, is_dir)
}

/// Glob match where `*` and `?` never cross `/`, and `**` spans directories
/// when it forms a whole path segment.
fn wildmatch(p: &[char], pi: usize, t: &[char], ti: usize) -> bool {
    if pi == p.len() {
        return ti == t.len();
    }
    match p[pi] {
        '\\' if pi + 1 < p.len() => {
            ti < t.len() && t[ti] == p[pi + 1] && wildmatch(p, pi + 2, t, ti + 1)
        }
        '?' => ti < t.len() && t[ti] != '/' && wildmatch(p, pi + 1, t, ti + 1),
        '*' => {
            let mut run = pi;
            while run < p.len() && p[run] == '*' {
                run += 1;
            }
            let segment_start = pi == 0 || p[pi - 1] == '/';
            let double = run - pi >= 2;
            if double && segment_start && run == p.len() {
                return true;
            }
            if double && segment_start && p[run] == '/' {
                // zero or more whole directories
                let rest = run + 1;
                return (ti..=t.len())
                    .filter(|&k| k == ti || t[k - 1] == '/')
                    .any(|k| wildmatch(p, rest, t, k));
            }
            let mut k = ti;
            loop {
                if wildmatch(p, run, t, k) {
                    return true;
                }
                if k == t.len() || t[k] == '/' {
                    return false;
                }
                k += 1;
            }
        }
        c => ti < t.len() && t[ti] == c && wildmatch(p, pi + 1, t, ti + 1),
    }
}
