use serde::{Deserialize, Serialize};

use crate::catalog::{ActiveRule, RuleCategory};

/// Artifact family an evidence item was observed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceSource {
    Commit,
    Tree,
    PullRequest,
    Issue,
}

/// A single rule match against a repository artifact.
///
/// `locator` identifies the artifact: a commit hash, a file path (or the
/// matched directory prefix), or a pull-request / issue number.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub agent_id: String,
    pub rule_id: String,
    pub category: RuleCategory,
    pub source: EvidenceSource,
    pub locator: String,
    pub observed_at: Option<i64>,
}

impl EvidenceItem {
    pub fn new(
        rule: &ActiveRule<'_>,
        source: EvidenceSource,
        locator: impl Into<String>,
        observed_at: Option<i64>,
    ) -> Self {
        EvidenceItem {
            agent_id: rule.agent.id.clone(),
            rule_id: rule.rule.rule_id.clone(),
            category: rule.rule.category,
            source,
            locator: locator.into(),
            observed_at,
        }
    }

    /// Identity used for deduplication: (agent, rule, locator).
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.agent_id, &self.rule_id, &self.locator)
    }
}

/// Case-insensitive identity comparison shared by commit and user matching.
pub(crate) fn identity_matches(
    field: &str,
    pattern: &str,
    kind: crate::catalog::PatternKind,
) -> bool {
    use crate::catalog::PatternKind;
    let field = field.trim();
    if field.is_empty() || pattern.is_empty() {
        return false;
    }
    let field = field.to_lowercase();
    let pattern = pattern.to_lowercase();
    match kind {
        PatternKind::Substring => field.contains(&pattern),
        PatternKind::Literal => {
            field == pattern
                || strip_bot_suffix(&field) == pattern
                || strip_bot_suffix(&field) == strip_bot_suffix(&pattern)
        }
        PatternKind::PathName | PatternKind::PathDirPrefix => false,
    }
}

fn strip_bot_suffix(s: &str) -> &str {
    s.strip_suffix("[bot]").unwrap_or(s)
}
