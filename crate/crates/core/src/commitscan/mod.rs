//! Commit-level detection: trailers, co-author and author identities, and
//! history-wide aggregation.

mod trailers;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{rules_active_at, rules_always_active, ActiveRule, Catalog, RuleCategory};
use crate::evidence::{identity_matches, EvidenceItem, EvidenceSource};

pub use trailers::{grep_coauthor_lines, parse_coauthor, parse_trailers, Identity, Trailer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub hash: String,
    pub author: Identity,
    pub committer: Identity,
    /// Committer time, UTC seconds.
    pub timestamp: i64,
    pub message: String,
    pub parents: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CommitError {
    #[error("invalid commit hash `{0}`")]
    InvalidHash(String),
    #[error("negative timestamp {0} on commit {1}")]
    NegativeTimestamp(i64, String),
}

pub fn is_valid_hash(hash: &str) -> bool {
    matches!(hash.len(), 40 | 64) && hash.bytes().all(|b| b.is_ascii_hexdigit())
}

impl CommitRecord {
    pub fn validate(&self) -> Result<(), CommitError> {
        if !is_valid_hash(&self.hash) {
            return Err(CommitError::InvalidHash(self.hash.clone()));
        }
        if self.timestamp < 0 {
            return Err(CommitError::NegativeTimestamp(
                self.timestamp,
                self.hash.clone(),
            ));
        }
        if let Some(bad) = self.parents.iter().find(|p| !is_valid_hash(p)) {
            return Err(CommitError::InvalidHash(bad.clone()));
        }
        Ok(())
    }

    /// Calendar date of the commit, or `None` when the timestamp is unset.
    pub fn date(&self) -> Option<NaiveDate> {
        if self.timestamp <= 0 {
            return None;
        }
        DateTime::from_timestamp(self.timestamp, 0).map(|dt| dt.date_naive())
    }

    fn observed_at(&self) -> Option<i64> {
        (self.timestamp > 0).then_some(self.timestamp)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchOptions {
    /// Also treat `Co-authored-by:` lines outside the trailer block as co-authors.
    pub lax: bool,
}

/// Identities a commit message advertises through trailers.
pub fn advertised_identities(message: &str, options: MatchOptions) -> Vec<Identity> {
    let mut out = Vec::new();
    for trailer in parse_trailers(message) {
        if trailer.key_is("co-authored-by") {
            out.push(parse_coauthor(&trailer.value));
        } else if trailer.key_is("generated-by") || trailer.key_is("generated by") {
            out.push(Identity::new(trailer.value.trim(), ""));
        }
    }
    if options.lax {
        out.extend(
            grep_coauthor_lines(message)
                .iter()
                .map(|v| parse_coauthor(v)),
        );
    }
    out.retain(|id| !id.is_empty());
    out
}

fn identity_hit(identity: &Identity, rule: &ActiveRule<'_>) -> bool {
    let r = rule.rule;
    identity_matches(&identity.name, &r.pattern, r.pattern_kind)
        || identity_matches(&identity.email, &r.pattern, r.pattern_kind)
}

/// Matches one commit against commit-category rules.
pub fn match_commit(
    commit: &CommitRecord,
    active_rules: &[ActiveRule<'_>],
    options: MatchOptions,
) -> Vec<EvidenceItem> {
    let advertised = advertised_identities(&commit.message, options);
    let mut out: Vec<EvidenceItem> = Vec::new();
    for rule in active_rules {
        let hit = match rule.rule.category {
            RuleCategory::CommitCoauthor => advertised.iter().any(|id| identity_hit(id, rule)),
            RuleCategory::CommitAuthor => identity_hit(&commit.author, rule),
            _ => false,
        };
        if hit {
            let item = EvidenceItem::new(
                rule,
                EvidenceSource::Commit,
                &commit.hash,
                commit.observed_at(),
            );
            if !out.iter().any(|e| e.key() == item.key()) {
                out.push(item);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentCommitStats {
    /// Sorted by (locator, rule_id).
    pub evidence: Vec<EvidenceItem>,
    /// Distinct commits attributed to this agent.
    pub commit_count: u64,
    pub first_seen: Option<i64>,
    pub last_seen: Option<i64>,
}

/// History-level aggregate. Partial summaries over disjoint commit sets
/// combine with [`CommitScanSummary::merge`] in any order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitScanSummary {
    pub repo_id: String,
    pub total_commits: u64,
    pub per_agent: BTreeMap<String, AgentCommitStats>,
    /// Commits carrying evidence for at least one agent.
    pub matched_commits: BTreeSet<String>,
}

fn min_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

fn max_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    a.max(b)
}

impl CommitScanSummary {
    pub fn with_repo_id(mut self, repo_id: impl Into<String>) -> Self {
        self.repo_id = repo_id.into();
        self
    }

    pub fn agent_commit_count(&self) -> u64 {
        self.matched_commits.len() as u64
    }

    /// Fraction of commits with agent evidence; 0 for an empty history.
    pub fn agent_commit_share(&self) -> f64 {
        if self.total_commits == 0 {
            0.0
        } else {
            self.agent_commit_count() as f64 / self.total_commits as f64
        }
    }

    pub fn evidence(&self) -> impl Iterator<Item = &EvidenceItem> {
        self.per_agent.values().flat_map(|s| s.evidence.iter())
    }

    /// Records one commit's evidence. `items` must all refer to that commit.
    pub fn record(&mut self, items: Vec<EvidenceItem>) {
        self.total_commits += 1;
        let mut by_agent: BTreeMap<String, Vec<EvidenceItem>> = BTreeMap::new();
        for item in items {
            self.matched_commits.insert(item.locator.clone());
            by_agent
                .entry(item.agent_id.clone())
                .or_default()
                .push(item);
        }
        for (agent, items) in by_agent {
            let stats = self.per_agent.entry(agent).or_default();
            stats.commit_count += 1;
            for item in items {
                stats.first_seen = min_opt(stats.first_seen, item.observed_at);
                stats.last_seen = max_opt(stats.last_seen, item.observed_at);
                stats.evidence.push(item);
            }
        }
    }

    pub fn merge(mut self, other: CommitScanSummary) -> CommitScanSummary {
        self.total_commits += other.total_commits;
        self.matched_commits.extend(other.matched_commits);
        for (agent, theirs) in other.per_agent {
            let ours = self.per_agent.entry(agent).or_default();
            ours.commit_count += theirs.commit_count;
            ours.first_seen = min_opt(ours.first_seen, theirs.first_seen);
            ours.last_seen = max_opt(ours.last_seen, theirs.last_seen);
            ours.evidence.extend(theirs.evidence);
        }
        self.finish()
    }

    fn finish(mut self) -> Self {
        for stats in self.per_agent.values_mut() {
            stats
                .evidence
                .sort_by(|a, b| (&a.locator, &a.rule_id).cmp(&(&b.locator, &b.rule_id)));
        }
        self
    }
}

fn commit_rules(rules: Vec<ActiveRule<'_>>) -> Vec<ActiveRule<'_>> {
    rules
        .into_iter()
        .filter(|r| {
            matches!(
                r.rule.category,
                RuleCategory::CommitCoauthor | RuleCategory::CommitAuthor
            )
        })
        .collect()
}

/// Scans a commit stream, selecting rules by each commit's own date.
///
/// Commits without a usable timestamp are matched against open-window rules only.
pub fn scan_history<I>(commits: I, catalog: &Catalog, options: MatchOptions) -> CommitScanSummary
where
    I: IntoIterator<Item = CommitRecord>,
{
    let undated = commit_rules(rules_always_active(catalog));
    let mut by_date: HashMap<NaiveDate, Vec<ActiveRule<'_>>> = HashMap::new();

    let mut summary = CommitScanSummary::default();
    for commit in commits {
        let items = match commit.date() {
            Some(date) => {
                let rules = by_date
                    .entry(date)
                    .or_insert_with(|| commit_rules(rules_active_at(catalog, date)));
                match_commit(&commit, rules, options)
            }
            None => match_commit(&commit, &undated, options),
        };
        summary.record(items);
    }
    summary.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin_catalog;

    fn commit(n: u32, author: Identity, message: &str) -> CommitRecord {
        CommitRecord {
            hash: format!("{n:040x}"),
            author,
            committer: Identity::new("dev", "dev@example.com"),
            timestamp: 1_760_000_000 + n as i64,
            message: message.into(),
            parents: vec![],
        }
    }

    fn dev() -> Identity {
        Identity::new("Dev", "dev@example.com")
    }

    #[test]
    fn aider_email_coauthor() {
        let cat = builtin_catalog();
        let rules = rules_active_at(&cat, "2025-10-20".parse().unwrap());
        let c = commit(
            1,
            dev(),
            "feat\n\nCo-authored-by: aider (gpt-4o) <aider@aider.chat>",
        );
        let ev = match_commit(&c, &rules, MatchOptions::default());
        assert!(!ev.is_empty());
        assert!(ev.iter().all(|e| e.agent_id == "aider"));
        assert!(ev
            .iter()
            .any(|e| e.rule_id == "aider.coauthor.aider-aider-chat"));
    }

    #[test]
    fn claude_author() {
        let cat = builtin_catalog();
        let rules = rules_active_at(&cat, "2025-10-20".parse().unwrap());
        let c = commit(
            2,
            Identity::new("Claude", "claude-bot@users.noreply.github.com"),
            "x",
        );
        let ev = match_commit(&c, &rules, MatchOptions::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].agent_id, "claude-code");
        assert_eq!(ev[0].category, RuleCategory::CommitAuthor);
    }

    #[test]
    fn merge_commit_without_trailers() {
        let cat = builtin_catalog();
        let rules = rules_active_at(&cat, "2025-10-20".parse().unwrap());
        let c = commit(3, dev(), "Merge branch 'main' into feature");
        assert!(match_commit(&c, &rules, MatchOptions::default()).is_empty());
    }

    #[test]
    fn generated_by_trailer_matches_coauthor_rules() {
        let cat = builtin_catalog();
        let rules = rules_active_at(&cat, "2025-10-20".parse().unwrap());
        let c = commit(4, dev(), "x\n\nGenerated by: Roo Code");
        let ev = match_commit(&c, &rules, MatchOptions::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].rule_id, "roo-code.coauthor.roo-code");
    }

    #[test]
    fn lax_mode_greps_body() {
        let cat = builtin_catalog();
        let rules = rules_active_at(&cat, "2025-10-20".parse().unwrap());
        let c = commit(
            5,
            dev(),
            "x\n\nCo-authored-by: Claude <noreply@anthropic.com>\nmore text",
        );
        assert!(match_commit(&c, &rules, MatchOptions::default()).is_empty());
        let ev = match_commit(&c, &rules, MatchOptions { lax: true });
        assert_eq!(ev.len(), 1);
    }

    #[test]
    fn substring_rules_dedupe_per_rule() {
        let cat = builtin_catalog();
        let rules = rules_active_at(&cat, "2025-10-20".parse().unwrap());
        let c = commit(
            6,
            dev(),
            "x\n\nCo-authored-by: Cursor Agent <cursoragent@cursor.com>\nCo-authored-by: Cursor <cursoragent@cursor.com>",
        );
        let mut ids: Vec<_> = match_commit(&c, &rules, MatchOptions::default())
            .into_iter()
            .map(|e| e.rule_id)
            .collect();
        ids.sort();
        assert_eq!(
            ids,
            [
                "cursor.coauthor.cursor",
                "cursor.coauthor.cursoragent-cursor-com"
            ]
        );
    }

    #[test]
    fn share_arithmetic() {
        let mut s = CommitScanSummary::default();
        assert_eq!(s.agent_commit_share(), 0.0);
        for n in 0..120u32 {
            let items = if n < 70 {
                vec![EvidenceItem {
                    agent_id: "a".into(),
                    rule_id: "r".into(),
                    category: RuleCategory::CommitCoauthor,
                    source: EvidenceSource::Commit,
                    locator: format!("{n:040x}"),
                    observed_at: Some(n as i64),
                }]
            } else {
                vec![]
            };
            s.record(items);
        }
        assert_eq!(s.agent_commit_count(), 70);
        assert_eq!(format!("{:.4}", s.agent_commit_share()), "0.5833");
        let stats = &s.per_agent["a"];
        assert_eq!((stats.first_seen, stats.last_seen), (Some(0), Some(69)));
    }

    #[test]
    fn ten_unmatched_commits() {
        let cat = builtin_catalog();
        let commits: Vec<_> = (0..10).map(|n| commit(n, dev(), "plain")).collect();
        let s = scan_history(commits, &cat, MatchOptions::default());
        assert_eq!(s.total_commits, 10);
        assert_eq!(s.agent_commit_share(), 0.0);
    }

    #[test]
    fn zero_timestamp_uses_open_rules() {
        let cat = builtin_catalog();
        let mut c = commit(
            7,
            dev(),
            "x\n\nCo-authored-by: Claude <noreply@anthropic.com>",
        );
        c.timestamp = 0;
        let s = scan_history(vec![c], &cat, MatchOptions::default());
        assert_eq!(s.agent_commit_count(), 1);
        assert_eq!(s.per_agent["claude-code"].first_seen, None);
    }

    #[test]
    fn record_validation() {
        let mut c = commit(1, dev(), "");
        assert!(c.validate().is_ok());
        c.hash = "abc".into();
        assert_eq!(c.validate(), Err(CommitError::InvalidHash("abc".into())));
    }
}
