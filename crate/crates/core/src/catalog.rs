//! Versioned heuristic catalog: agents, their detection rules, and the
//! validity windows that select which rules apply on a given date.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUILTIN_CATALOG: &str = include_str!("../catalog/builtin.json");

/// Agent id of the cross-agent pseudo-agent in the builtin catalog.
pub const GENERIC_AGENT_ID: &str = "generic";

/// Which kind of repository artifact a rule is matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleCategory {
    FilePath,
    CommitCoauthor,
    CommitAuthor,
    BranchPrefix,
    PrLabel,
    UserName,
}

impl RuleCategory {
    pub const ALL: [RuleCategory; 6] = [
        RuleCategory::FilePath,
        RuleCategory::CommitCoauthor,
        RuleCategory::CommitAuthor,
        RuleCategory::BranchPrefix,
        RuleCategory::PrLabel,
        RuleCategory::UserName,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleCategory::FilePath => "file_path",
            RuleCategory::CommitCoauthor => "commit_coauthor",
            RuleCategory::CommitAuthor => "commit_author",
            RuleCategory::BranchPrefix => "branch_prefix",
            RuleCategory::PrLabel => "pr_label",
            RuleCategory::UserName => "user_name",
        }
    }

    /// Pattern kinds a rule of this category may use.
    pub fn allowed_kinds(self) -> &'static [PatternKind] {
        match self {
            RuleCategory::FilePath => &[PatternKind::PathName, PatternKind::PathDirPrefix],
            RuleCategory::CommitCoauthor | RuleCategory::CommitAuthor | RuleCategory::UserName => {
                &[PatternKind::Literal, PatternKind::Substring]
            }
            RuleCategory::BranchPrefix | RuleCategory::PrLabel => &[PatternKind::Literal],
        }
    }

    fn is_identity(self) -> bool {
        !matches!(self, RuleCategory::FilePath)
    }
}

impl fmt::Display for RuleCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Literal,
    PathName,
    PathDirPrefix,
    Substring,
}

impl PatternKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::Literal => "literal",
            PatternKind::PathName => "path_name",
            PatternKind::PathDirPrefix => "path_dir_prefix",
            PatternKind::Substring => "substring",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Medium,
    Low,
}

/// One detection pattern for one agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicRule {
    pub rule_id: String,
    pub category: RuleCategory,
    pub pattern_kind: PatternKind,
    pub pattern: String,
    #[serde(default)]
    pub valid_from: Option<NaiveDate>,
    #[serde(default)]
    pub valid_to: Option<NaiveDate>,
    pub confidence: Confidence,
    #[serde(default)]
    pub notes: String,
}

impl HeuristicRule {
    /// True when the rule's validity window contains `date`.
    pub fn is_active_at(&self, date: NaiveDate) -> bool {
        self.valid_from.is_none_or(|from| from <= date) && self.valid_to.is_none_or(|to| to >= date)
    }

    pub fn has_open_window(&self) -> bool {
        self.valid_from.is_none() && self.valid_to.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub id: String,
    pub display_name: String,
    #[serde(default)]
    pub homepage: String,
    #[serde(default)]
    pub generic: bool,
    #[serde(default)]
    pub rules: Vec<HeuristicRule>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub schema_version: u32,
    pub generated_on: NaiveDate,
    #[serde(default)]
    pub agents: Vec<AgentDescriptor>,
}

/// A rule paired with the agent that owns it.
#[derive(Debug, Clone, Copy)]
pub struct ActiveRule<'a> {
    pub agent: &'a AgentDescriptor,
    pub rule: &'a HeuristicRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Rule id, or agent id for agent-level problems.
    pub subject: String,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level}: {}: {}", self.subject, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("catalog validation failed for `{subject}`: {message}")]
    Invalid { subject: String, message: String },
    #[error("failed to read catalog: {0}")]
    Io(#[from] std::io::Error),
}

impl Catalog {
    /// Schema version plus generation date, e.g. `1+2025-10-20`.
    pub fn version_tag(&self) -> String {
        format!("{}+{}", self.schema_version, self.generated_on)
    }

    pub fn agent(&self, id: &str) -> Option<&AgentDescriptor> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn find_rule(&self, rule_id: &str) -> Option<ActiveRule<'_>> {
        self.all_rules().find(|r| r.rule.rule_id == rule_id)
    }

    pub fn all_rules(&self) -> impl Iterator<Item = ActiveRule<'_>> {
        self.agents.iter().flat_map(|agent| {
            agent
                .rules
                .iter()
                .map(move |rule| ActiveRule { agent, rule })
        })
    }

    pub fn generic_agent(&self) -> Option<&AgentDescriptor> {
        self.agents.iter().find(|a| a.generic)
    }

    /// Serializes to the catalog file format.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("catalog serializes");
        out.push('\n');
        out
    }
}

/// Parses and validates a catalog file.
pub fn load_catalog<R: Read>(mut source: R) -> Result<Catalog, CatalogError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    parse_catalog(&text)
}

pub fn parse_catalog(text: &str) -> Result<Catalog, CatalogError> {
    let catalog = parse_catalog_unvalidated(text)?;
    if let Some(diag) = validate_catalog(&catalog)
        .into_iter()
        .find(|d| d.severity == Severity::Error)
    {
        return Err(CatalogError::Invalid {
            subject: diag.subject,
            message: diag.message,
        });
    }
    Ok(catalog)
}

/// Parses the file format without checking semantic invariants; pair with
/// [`validate_catalog`] to collect every diagnostic.
pub fn parse_catalog_unvalidated(text: &str) -> Result<Catalog, CatalogError> {
    serde_json::from_str(text).map_err(|e| CatalogError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// The catalog shipped with this crate.
pub fn builtin_catalog() -> Catalog {
    parse_catalog(BUILTIN_CATALOG).expect("builtin catalog is valid")
}

pub fn builtin_catalog_json() -> &'static str {
    BUILTIN_CATALOG
}

fn is_valid_agent_id(id: &str) -> bool {
    let mut chars = id.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

/// Checks every catalog invariant. An empty result means the catalog is valid.
pub fn validate_catalog(catalog: &Catalog) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut error = |subject: &str, message: String| {
        diags.push(Diagnostic {
            subject: subject.to_string(),
            severity: Severity::Error,
            message,
        })
    };

    let mut agent_ids = HashSet::new();
    for agent in &catalog.agents {
        if !is_valid_agent_id(&agent.id) {
            error(
                &agent.id,
                format!("agent id `{}` must match [a-z0-9][a-z0-9-]*", agent.id),
            );
        }
        if !agent_ids.insert(agent.id.as_str()) {
            error(&agent.id, "duplicate agent id".into());
        }
    }

    let generic_count = catalog.agents.iter().filter(|a| a.generic).count();
    if !catalog.agents.is_empty() && generic_count != 1 {
        error(
            "catalog",
            format!("expected exactly one generic agent, found {generic_count}"),
        );
    }

    let mut rule_ids = HashSet::new();
    // (category, kind, normalized pattern) -> owning agent ids
    let mut shared: HashMap<(RuleCategory, PatternKind, String), Vec<&AgentDescriptor>> =
        HashMap::new();
    for ActiveRule { agent, rule } in catalog.all_rules() {
        let id = rule.rule_id.as_str();
        if id.is_empty() {
            error(&agent.id, "rule with empty rule_id".into());
        } else if !rule_ids.insert(id) {
            error(id, "duplicate rule_id".into());
        }
        if rule.pattern.is_empty() {
            error(id, "empty pattern".into());
        }
        if let (Some(from), Some(to)) = (rule.valid_from, rule.valid_to) {
            if from > to {
                error(id, format!("valid_from {from} is after valid_to {to}"));
            }
        }
        if !rule.category.allowed_kinds().contains(&rule.pattern_kind) {
            error(
                id,
                format!(
                    "pattern kind `{}` is not allowed for category `{}`",
                    rule.pattern_kind.as_str(),
                    rule.category
                ),
            );
        }
        let key_pattern = if rule.category.is_identity() {
            rule.pattern.to_lowercase()
        } else {
            rule.pattern.clone()
        };
        shared
            .entry((rule.category, rule.pattern_kind, key_pattern))
            .or_default()
            .push(agent);
    }

    let mut conflicts: Vec<_> = shared
        .into_iter()
        .filter(|(_, owners)| {
            let distinct: HashSet<_> = owners.iter().map(|a| a.id.as_str()).collect();
            distinct.len() > 1 && !owners.iter().any(|a| a.generic)
        })
        .collect();
    conflicts.sort_by(|a, b| a.0 .2.cmp(&b.0 .2));
    for ((category, kind, pattern), owners) in conflicts {
        let names: Vec<_> = owners.iter().map(|a| a.id.as_str()).collect();
        let subject = owners
            .last()
            .and_then(|a| {
                a.rules.iter().find(|r| {
                    r.category == category
                        && r.pattern_kind == kind
                        && (r.pattern == pattern || r.pattern.to_lowercase() == pattern)
                })
            })
            .map(|r| r.rule_id.clone())
            .unwrap_or_default();
        error(
            &subject,
            format!(
                "{category} pattern `{pattern}` is shared by {}; attribute it to the generic agent",
                names.join(", ")
            ),
        );
    }

    for agent in &catalog.agents {
        if !agent.generic && agent.rules.is_empty() {
            diags.push(Diagnostic {
                subject: agent.id.clone(),
                severity: Severity::Warning,
                message: "agent has no rules".into(),
            });
        }
    }
    diags
}

/// Every rule whose validity window contains `date`, paired with its agent.
pub fn rules_active_at(catalog: &Catalog, date: NaiveDate) -> Vec<ActiveRule<'_>> {
    catalog
        .all_rules()
        .filter(|r| r.rule.is_active_at(date))
        .collect()
}

/// Rules without any validity window; used when an artifact has no usable date.
pub fn rules_always_active(catalog: &Catalog) -> Vec<ActiveRule<'_>> {
    catalog
        .all_rules()
        .filter(|r| r.rule.has_open_window())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn rule(id: &str, category: RuleCategory, kind: PatternKind, pattern: &str) -> HeuristicRule {
        HeuristicRule {
            rule_id: id.into(),
            category,
            pattern_kind: kind,
            pattern: pattern.into(),
            valid_from: None,
            valid_to: None,
            confidence: Confidence::High,
            notes: String::new(),
        }
    }

    fn agent(id: &str, generic: bool, rules: Vec<HeuristicRule>) -> AgentDescriptor {
        AgentDescriptor {
            id: id.into(),
            display_name: id.into(),
            homepage: String::new(),
            generic,
            rules,
            notes: String::new(),
        }
    }

    fn catalog(agents: Vec<AgentDescriptor>) -> Catalog {
        Catalog {
            schema_version: 1,
            generated_on: date("2025-10-20"),
            agents,
        }
    }

    #[test]
    fn builtin_has_35_agents_and_validates() {
        let cat = builtin_catalog();
        assert_eq!(cat.agents.len(), 35);
        assert!(validate_catalog(&cat).is_empty());
        assert_eq!(cat.generic_agent().unwrap().id, GENERIC_AGENT_ID);
    }

    #[test]
    fn builtin_documents_conventions_exclusion() {
        let cat = builtin_catalog();
        assert!(cat.all_rules().all(|r| r.rule.pattern != "CONVENTIONS.md"));
        assert!(cat.agent("aider").unwrap().notes.contains("CONVENTIONS.md"));
    }

    #[test]
    fn empty_agent_list_is_valid() {
        let cat = parse_catalog(r#"{"schema_version":1,"generated_on":"2025-10-20","agents":[]}"#)
            .unwrap();
        assert!(cat.agents.is_empty());
    }

    #[test]
    fn shared_literal_across_tools_is_rejected() {
        let text = serde_json::to_string(&catalog(vec![
            agent("generic", true, vec![]),
            agent(
                "cline",
                false,
                vec![rule(
                    "a",
                    RuleCategory::CommitCoauthor,
                    PatternKind::Literal,
                    "cline",
                )],
            ),
            agent(
                "other",
                false,
                vec![rule(
                    "b",
                    RuleCategory::CommitCoauthor,
                    PatternKind::Literal,
                    "cline",
                )],
            ),
        ]))
        .unwrap();
        match parse_catalog(&text) {
            Err(CatalogError::Invalid { subject, .. }) => assert_eq!(subject, "b"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn shared_pattern_with_generic_is_allowed() {
        let cat = catalog(vec![
            agent(
                "generic",
                true,
                vec![rule(
                    "g",
                    RuleCategory::FilePath,
                    PatternKind::PathName,
                    "AGENTS.md",
                )],
            ),
            agent(
                "codex",
                false,
                vec![rule(
                    "c",
                    RuleCategory::FilePath,
                    PatternKind::PathName,
                    "AGENTS.md",
                )],
            ),
        ]);
        assert!(validate_catalog(&cat).is_empty());
    }

    #[test]
    fn reversed_window_is_one_error() {
        let mut r = rule("w", RuleCategory::BranchPrefix, PatternKind::Literal, "x/");
        r.valid_from = Some(date("2025-06-01"));
        r.valid_to = Some(date("2025-01-01"));
        let diags = validate_catalog(&catalog(vec![
            agent("generic", true, vec![]),
            agent("a", false, vec![r]),
        ]));
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Error);
        assert_eq!(diags[0].subject, "w");
    }

    #[test]
    fn incompatible_kind_is_one_error() {
        let diags = validate_catalog(&catalog(vec![
            agent("generic", true, vec![]),
            agent(
                "a",
                false,
                vec![rule(
                    "f",
                    RuleCategory::FilePath,
                    PatternKind::Substring,
                    "x",
                )],
            ),
        ]));
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("not allowed"));
    }

    #[test]
    fn bad_agent_id_and_missing_generic() {
        let diags = validate_catalog(&catalog(vec![agent(
            "Bad_Id",
            false,
            vec![rule("r", RuleCategory::PrLabel, PatternKind::Literal, "x")],
        )]));
        assert_eq!(diags.len(), 2);
    }

    #[test]
    fn parse_error_reports_position() {
        match parse_catalog("{\n  \"schema_version\": 1,\n  oops\n}") {
            Err(CatalogError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let cat = parse_catalog(
            r#"{"schema_version":1,"generated_on":"2025-10-20","future":true,"agents":[]}"#,
        )
        .unwrap();
        assert_eq!(cat.schema_version, 1);
    }

    #[test]
    fn active_window_selection() {
        let mut opened = rule(
            "open",
            RuleCategory::BranchPrefix,
            PatternKind::Literal,
            "codex/",
        );
        opened.valid_from = Some(date("2025-04-16"));
        let mut closed = rule(
            "closed",
            RuleCategory::BranchPrefix,
            PatternKind::Literal,
            "old/",
        );
        closed.valid_to = Some(date("2025-03-01"));
        let always = rule("always", RuleCategory::PrLabel, PatternKind::Literal, "x");
        let cat = catalog(vec![
            agent("generic", true, vec![always]),
            agent("codex", false, vec![opened, closed]),
        ]);
        let ids: Vec<_> = rules_active_at(&cat, date("2025-10-20"))
            .iter()
            .map(|r| r.rule.rule_id.as_str())
            .collect();
        assert_eq!(ids, ["always", "open"]);
        let open_only: Vec<_> = rules_always_active(&cat)
            .iter()
            .map(|r| r.rule.rule_id.as_str())
            .collect();
        assert_eq!(open_only, ["always"]);
        let active = rules_active_at(&cat, date("2025-10-20"));
        assert_eq!(active[1].agent.id, "codex");
    }

    #[test]
    fn serialization_emits_documented_key_order() {
        let json = builtin_catalog().to_json();
        let first_rule = &json[json.find("\"rule_id\"").unwrap()..];
        let keys = [
            "\"rule_id\"",
            "\"category\"",
            "\"pattern_kind\"",
            "\"pattern\"",
            "\"valid_from\"",
            "\"valid_to\"",
            "\"confidence\"",
            "\"notes\"",
        ];
        let positions: Vec<_> = keys.iter().map(|k| first_rule.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(json.starts_with("{\n  \"schema_version\": 1,\n  \"generated_on\": \"2025-10-20\""));
    }
}
