use serde::{Deserialize, Serialize};

use super::GhError;
use crate::catalog::{HeuristicRule, PatternKind, RuleCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactType {
    Code,
    Commits,
    PullRequests,
    Issues,
}

impl ArtifactType {
    /// Path segment of the REST search endpoint.
    pub fn search_endpoint(self) -> &'static str {
        match self {
            ArtifactType::Code => "code",
            ArtifactType::Commits => "commits",
            ArtifactType::PullRequests | ArtifactType::Issues => "issues",
        }
    }

    /// `type=` value of the web search page.
    pub fn web_type(self) -> &'static str {
        match self {
            ArtifactType::Code => "code",
            ArtifactType::Commits => "commits",
            ArtifactType::PullRequests => "pullrequests",
            ArtifactType::Issues => "issues",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub query_string: String,
    pub artifact_type: ArtifactType,
}

impl SearchQuery {
    /// Browser URL for the same search.
    pub fn web_url(&self) -> String {
        let q: String =
            url::form_urlencoded::byte_serialize(self.query_string.as_bytes()).collect();
        format!(
            "https://github.com/search?q={q}&type={}",
            self.artifact_type.web_type()
        )
    }
}

const REGEX_SPECIAL: &[char] = &[
    '\\', '.', '+', '*', '?', '(', ')', '|', '[', ']', '{', '}', '^', '$', '-', '/',
];

pub fn escape_regex(pattern: &str) -> String {
    let mut out = String::with_capacity(pattern.len() * 2);
    for c in pattern.chars() {
        if REGEX_SPECIAL.contains(&c) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Builds the platform search query for a rule.
pub fn build_search_query(rule: &HeuristicRule) -> Result<SearchQuery, GhError> {
    let p = &rule.pattern;
    let (query_string, artifact_type) = match rule.category {
        RuleCategory::FilePath => {
            let escaped = escape_regex(p);
            let q = match rule.pattern_kind {
                PatternKind::PathName => format!("path:/(?:^|\\/)({escaped})$/"),
                _ => format!("path:/(?:^|\\/)({escaped})/"),
            };
            (q, ArtifactType::Code)
        }
        RuleCategory::CommitCoauthor => (format!("Co-authored-by:\"{p}\""), ArtifactType::Commits),
        RuleCategory::CommitAuthor => (format!("author:\"{p}\""), ArtifactType::Commits),
        RuleCategory::BranchPrefix => (format!("head:{p} type:pr"), ArtifactType::PullRequests),
        RuleCategory::PrLabel => (format!("label:{p} type:pr"), ArtifactType::PullRequests),
        RuleCategory::UserName => return Err(GhError::NotSearchable(rule.rule_id.clone())),
    };
    Ok(SearchQuery {
        query_string,
        artifact_type,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin_catalog;

    fn query_for(rule_id: &str) -> SearchQuery {
        let cat = builtin_catalog();
        build_search_query(cat.find_rule(rule_id).unwrap().rule).unwrap()
    }

    #[test]
    fn file_name_query() {
        let q = query_for("generic.file.agents-md");
        assert_eq!(q.query_string, r"path:/(?:^|\/)(AGENTS\.md)$/");
        assert_eq!(q.artifact_type, ArtifactType::Code);
    }

    #[test]
    fn coauthor_and_branch_queries() {
        let q = query_for("claude-code.coauthor.noreply-anthropic-com");
        assert_eq!(q.query_string, "Co-authored-by:\"noreply@anthropic.com\"");
        assert_eq!(q.artifact_type, ArtifactType::Commits);
        let q = query_for("codex.branch.codex");
        assert_eq!(q.query_string, "head:codex/ type:pr");
        assert_eq!(q.artifact_type, ArtifactType::PullRequests);
    }

    #[test]
    fn underscore_is_not_escaped() {
        assert_eq!(escape_regex("memory_bank/"), r"memory_bank\/");
        assert_eq!(escape_regex("memory-bank/"), r"memory\-bank\/");
    }

    #[test]
    fn user_rules_are_not_searchable() {
        let cat = builtin_catalog();
        let r = cat.find_rule("devin.user.devin-ai-integration").unwrap();
        assert!(matches!(
            build_search_query(r.rule),
            Err(GhError::NotSearchable(_))
        ));
    }

    #[test]
    fn web_url_round_trips() {
        let q = query_for("codex.label.codex");
        assert_eq!(
            q.web_url(),
            "https://github.com/search?q=label%3Acodex+type%3Apr&type=pullrequests"
        );
    }
}
