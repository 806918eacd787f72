//! Tree-level detection: agent configuration, rules and guidance files, and
//! ignore-file entries that hide them.

mod ignore;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    rules_active_at, rules_always_active, ActiveRule, Catalog, HeuristicRule, PatternKind,
    RuleCategory,
};
use crate::evidence::{EvidenceItem, EvidenceSource};

pub use ignore::{is_ignored, parse_ignore_file, IgnoreDiagnostic, IgnorePattern, IgnoreRuleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    File,
    Directory,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeEntry {
    pub path: String,
    pub kind: EntryKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid tree path `{0}`")]
pub struct InvalidPath(pub String);

impl TreeEntry {
    pub fn new(path: impl Into<String>, kind: EntryKind) -> Result<Self, InvalidPath> {
        let path = path.into();
        let trimmed = path.trim_end_matches('/');
        let bad = trimmed.is_empty()
            || trimmed.starts_with('/')
            || trimmed
                .split('/')
                .any(|s| s.is_empty() || s == "." || s == "..");
        if bad {
            return Err(InvalidPath(path));
        }
        Ok(TreeEntry {
            path: trimmed.to_string(),
            kind,
        })
    }

    pub fn file(path: impl Into<String>) -> Result<Self, InvalidPath> {
        Self::new(path, EntryKind::File)
    }

    pub fn dir(path: impl Into<String>) -> Result<Self, InvalidPath> {
        Self::new(path, EntryKind::Directory)
    }
}

/// One ignore-file line hiding a file the catalog would detect.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IgnoredAgentFile {
    pub ignore_pattern: String,
    pub rule_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityFlags {
    pub ignored_agent_files: Vec<IgnoredAgentFile>,
    pub commit_markers_absent_but_files_present: bool,
}

impl ObservabilityFlags {
    pub fn ignored_rule_ids(&self) -> Vec<String> {
        let ids: BTreeSet<_> = self
            .ignored_agent_files
            .iter()
            .map(|f| f.rule_id.clone())
            .collect();
        ids.into_iter().collect()
    }
}

/// Byte offsets just past where `pattern` matches at a directory boundary.
fn boundary_match_end(path: &str, pattern: &str) -> Option<usize> {
    std::iter::once(0)
        .chain(path.match_indices('/').map(|(i, _)| i + 1))
        .find(|&start| path[start..].starts_with(pattern))
        .map(|start| start + pattern.len())
}

/// Whether a repository path matches a file rule at any directory depth.
///
/// `PathName` rules must match the trailing segment(s) exactly;
/// `PathDirPrefix` rules match wherever the pattern starts a segment, so
/// `.github/workflows/claude` also matches `.github/workflows/claude-review.yml`.
pub fn match_path(path: &str, rule: &HeuristicRule) -> bool {
    match_locator(path, rule).is_some()
}

/// Like [`match_path`] but returns the evidence locator: the full path for
/// name rules, or the path up to the end of the matched segment for prefix
/// rules so all files under one directory collapse onto one locator.
fn match_locator<'p>(path: &'p str, rule: &HeuristicRule) -> Option<&'p str> {
    if rule.category != RuleCategory::FilePath || rule.pattern.is_empty() {
        return None;
    }
    let pattern = rule.pattern.as_str();
    match rule.pattern_kind {
        PatternKind::PathName => {
            let hit = path == pattern
                || (path.len() > pattern.len()
                    && path.ends_with(pattern)
                    && path.as_bytes()[path.len() - pattern.len() - 1] == b'/');
            hit.then_some(path)
        }
        PatternKind::PathDirPrefix => {
            let end = boundary_match_end(path, pattern)?;
            if pattern.ends_with('/') {
                Some(&path[..end])
            } else {
                let seg_end = path[end..].find('/').map_or(path.len(), |i| end + i);
                Some(&path[..seg_end])
            }
        }
        _ => None,
    }
}

fn file_rules(rules: Vec<ActiveRule<'_>>) -> Vec<ActiveRule<'_>> {
    rules
        .into_iter()
        .filter(|r| r.rule.category == RuleCategory::FilePath)
        .collect()
}

/// Matches one revision's tree against file rules active at `at_date`.
///
/// Evidence is unique per (agent, rule, locator) and sorted by locator.
pub fn scan_tree<I>(entries: I, catalog: &Catalog, at_date: NaiveDate) -> Vec<EvidenceItem>
where
    I: IntoIterator<Item = TreeEntry>,
{
    let rules = file_rules(rules_active_at(catalog, at_date));
    scan_tree_with(entries, &rules)
}

pub fn scan_tree_with<I>(entries: I, rules: &[ActiveRule<'_>]) -> Vec<EvidenceItem>
where
    I: IntoIterator<Item = TreeEntry>,
{
    let mut seen = BTreeMap::new();
    for entry in entries {
        let candidate = match entry.kind {
            EntryKind::File => entry.path.clone(),
            EntryKind::Directory => format!("{}/", entry.path),
        };
        for rule in rules {
            if entry.kind == EntryKind::Directory && rule.rule.pattern_kind == PatternKind::PathName
            {
                continue;
            }
            if let Some(locator) = match_locator(&candidate, rule.rule) {
                seen.entry((locator.to_string(), rule.rule.rule_id.clone()))
                    .or_insert(*rule);
            }
        }
    }
    seen.into_iter()
        .map(|((locator, _), rule)| EvidenceItem::new(&rule, EvidenceSource::Tree, locator, None))
        .collect()
}

/// Matches every revision's entries against the file rules valid on that
/// revision's date, keeping for each (locator, rule) the earliest timestamp.
pub fn scan_tree_history<I>(revisions: I, catalog: &Catalog) -> Vec<EvidenceItem>
where
    I: IntoIterator<Item = (i64, Vec<TreeEntry>)>,
{
    let mut by_date: HashMap<Option<NaiveDate>, Vec<ActiveRule<'_>>> = HashMap::new();
    let mut first: BTreeMap<(String, String), EvidenceItem> = BTreeMap::new();
    for (ts, entries) in revisions {
        let date = DateTime::from_timestamp(ts, 0)
            .filter(|_| ts > 0)
            .map(|d| d.date_naive());
        let rules = by_date.entry(date).or_insert_with(|| match date {
            Some(d) => file_rules(rules_active_at(catalog, d)),
            None => file_rules(rules_always_active(catalog)),
        });
        for mut item in scan_tree_with(entries, rules) {
            item.observed_at = Some(ts);
            let key = (item.locator.clone(), item.rule_id.clone());
            match first.get_mut(&key) {
                Some(existing) if existing.observed_at <= Some(ts) => {}
                Some(existing) => *existing = item,
                None => {
                    first.insert(key, item);
                }
            }
        }
    }
    first.into_values().collect()
}

/// Every file path plus all of its ancestor directories.
pub fn entries_for_paths<S: AsRef<str>>(paths: &[S]) -> Vec<TreeEntry> {
    let mut dirs = BTreeSet::new();
    let mut entries = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let mut end = 0;
        while let Some(i) = p[end..].find('/') {
            end += i;
            dirs.insert(p[..end].to_string());
            end += 1;
        }
        if let Ok(e) = TreeEntry::file(p) {
            entries.push(e);
        }
    }
    entries.extend(dirs.into_iter().filter_map(|d| TreeEntry::dir(d).ok()));
    entries
}

/// Root-level path a file rule would detect, used to probe ignore files.
pub fn canonical_probe(rule: &HeuristicRule) -> String {
    match rule.pattern_kind {
        PatternKind::PathDirPrefix if rule.pattern.ends_with('/') => format!("{}x", rule.pattern),
        _ => rule.pattern.clone(),
    }
}

/// Flags catalog file rules whose files the ignore lines would exclude.
///
/// With no explicit probes, each file rule is probed at its canonical root
/// path; explicit probes flag every file rule they match.
pub fn detect_reduced_observability<S: AsRef<str>>(
    ignore_lines: &[S],
    catalog: &Catalog,
    probe_paths: Option<&[String]>,
) -> ObservabilityFlags {
    let ruleset = parse_ignore_file(ignore_lines);
    let rules: Vec<_> = catalog
        .all_rules()
        .filter(|r| r.rule.category == RuleCategory::FilePath)
        .collect();
    let mut flagged: BTreeSet<IgnoredAgentFile> = BTreeSet::new();
    if ruleset.is_empty() {
        return ObservabilityFlags::default();
    }
    match probe_paths {
        None => {
            for r in &rules {
                let probe = canonical_probe(r.rule);
                if let Some(p) = ruleset.excluded_by(&probe, false) {
                    flagged.insert(IgnoredAgentFile {
                        ignore_pattern: p.source.clone(),
                        rule_id: r.rule.rule_id.clone(),
                    });
                }
            }
        }
        Some(probes) => {
            for probe in probes {
                let Some(p) = ruleset.excluded_by(probe, false) else {
                    continue;
                };
                for r in rules.iter().filter(|r| match_path(probe, r.rule)) {
                    flagged.insert(IgnoredAgentFile {
                        ignore_pattern: p.source.clone(),
                        rule_id: r.rule.rule_id.clone(),
                    });
                }
            }
        }
    }
    // one entry per rule: keep the first pattern in sorted order
    let mut out: Vec<IgnoredAgentFile> = Vec::new();
    let mut by_rule: BTreeSet<String> = BTreeSet::new();
    let mut sorted: Vec<_> = flagged.into_iter().collect();
    sorted.sort_by(|a, b| {
        a.rule_id
            .cmp(&b.rule_id)
            .then(a.ignore_pattern.cmp(&b.ignore_pattern))
    });
    for f in sorted {
        if by_rule.insert(f.rule_id.clone()) {
            out.push(f);
        }
    }
    ObservabilityFlags {
        ignored_agent_files: out,
        commit_markers_absent_but_files_present: false,
    }
}
