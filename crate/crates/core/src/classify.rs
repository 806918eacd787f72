//! Evidence fusion into per-repository adoption reports, merge rates and
//! exclusion lists.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::RuleCategory;
use crate::commitscan::CommitScanSummary;
use crate::evidence::{EvidenceItem, EvidenceSource};
use crate::ghminer::PrRecord;
use crate::treescan::ObservabilityFlags;

/// Share of agent commits above which use counts as pervasive.
pub const DEFAULT_PERVASIVE_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdoptionLevel {
    None,
    ConfiguredOnly,
    Experimental,
    Pervasive,
}

impl AdoptionLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            AdoptionLevel::None => "none",
            AdoptionLevel::ConfiguredOnly => "configured_only",
            AdoptionLevel::Experimental => "experimental",
            AdoptionLevel::Pervasive => "pervasive",
        }
    }
}

pub fn classify_adoption(
    summary: &CommitScanSummary,
    file_evidence: &[EvidenceItem],
    pr_evidence: &[EvidenceItem],
    issue_evidence: &[EvidenceItem],
) -> AdoptionLevel {
    classify_adoption_with(
        summary,
        file_evidence,
        pr_evidence,
        issue_evidence,
        DEFAULT_PERVASIVE_SHARE,
    )
}

pub fn classify_adoption_with(
    summary: &CommitScanSummary,
    file_evidence: &[EvidenceItem],
    pr_evidence: &[EvidenceItem],
    issue_evidence: &[EvidenceItem],
    pervasive_share: f64,
) -> AdoptionLevel {
    let has_commit = summary.agent_commit_count() > 0;
    let has_activity = has_commit || !pr_evidence.is_empty() || !issue_evidence.is_empty();
    if !has_activity {
        return if file_evidence.is_empty() {
            AdoptionLevel::None
        } else {
            AdoptionLevel::ConfiguredOnly
        };
    }
    if summary.agent_commit_share() > pervasive_share {
        AdoptionLevel::Pervasive
    } else {
        AdoptionLevel::Experimental
    }
}

/// Merged fraction of closed-or-merged pull requests; `None` when nothing is
/// eligible, which is distinct from a rate of zero.
pub fn merge_rate(prs: &[PrRecord], exclude_drafts: bool) -> Option<f64> {
    let considered: Vec<_> = prs
        .iter()
        .filter(|p| p.is_closed || p.is_merged)
        .filter(|p| !(exclude_drafts && p.is_draft))
        .collect();
    if considered.is_empty() {
        return None;
    }
    let merged = considered.iter().filter(|p| p.is_merged).count();
    Some(merged as f64 / considered.len() as f64)
}

/// Evidence of one kind for one repository.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceBatch {
    pub repo_id: String,
    pub items: Vec<EvidenceItem>,
}

impl EvidenceBatch {
    pub fn new(repo_id: impl Into<String>, items: Vec<EvidenceItem>) -> Self {
        EvidenceBatch {
            repo_id: repo_id.into(),
            items,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReportInputs<'a> {
    pub repo_id: &'a str,
    pub scanned_at: i64,
    pub catalog_version: &'a str,
    pub commits: Option<&'a CommitScanSummary>,
    /// Tree, pull-request and issue evidence (commit evidence may also be
    /// passed here instead of through `commits`).
    pub batches: &'a [EvidenceBatch],
    pub observability: &'a ObservabilityFlags,
    pub pervasive_share: f64,
}

impl<'a> ReportInputs<'a> {
    pub fn new(
        repo_id: &'a str,
        scanned_at: i64,
        catalog_version: &'a str,
        observability: &'a ObservabilityFlags,
    ) -> Self {
        ReportInputs {
            repo_id,
            scanned_at,
            catalog_version,
            commits: None,
            batches: &[],
            observability,
            pervasive_share: DEFAULT_PERVASIVE_SHARE,
        }
    }

    fn all_evidence(&self) -> impl Iterator<Item = &'a EvidenceItem> {
        self.commits
            .into_iter()
            .flat_map(|s| s.evidence())
            .chain(self.batches.iter().flat_map(|b| b.items.iter()))
    }

    fn check_consistency(&self) -> Result<(), ReportError> {
        let foreign = self
            .commits
            .map(|s| s.repo_id.as_str())
            .into_iter()
            .chain(self.batches.iter().map(|b| b.repo_id.as_str()))
            .find(|id| *id != self.repo_id);
        match foreign {
            Some(other) => Err(ReportError::RepoMismatch {
                expected: self.repo_id.to_string(),
                found: other.to_string(),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("inputs describe different repositories: expected `{expected}`, found `{found}`")]
    RepoMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentActivity {
    pub files: u64,
    pub commits_coauthor: u64,
    pub commits_author: u64,
    pub branches: u64,
    pub labels: u64,
    pub users: u64,
    pub issues: u64,
    #[serde(with = "iso_time_opt")]
    pub first_seen: Option<i64>,
    #[serde(with = "iso_time_opt")]
    pub last_seen: Option<i64>,
}

/// Which [`AgentActivity`] counter an evidence item feeds.
fn counter_index(item: &EvidenceItem) -> usize {
    match (item.category, item.source) {
        (_, EvidenceSource::Issue) => 6,
        (RuleCategory::FilePath, _) => 0,
        (RuleCategory::CommitCoauthor, _) => 1,
        (RuleCategory::CommitAuthor, _) => 2,
        (RuleCategory::BranchPrefix, _) => 3,
        (RuleCategory::PrLabel, _) => 4,
        (RuleCategory::UserName, _) => 5,
    }
}

impl AgentActivity {
    /// Counts `item` unless `counted` is false, i.e. its artifact was
    /// already counted for this agent by another rule.
    fn add(&mut self, item: &EvidenceItem, counted: bool) {
        if counted {
            let counter = match counter_index(item) {
                0 => &mut self.files,
                1 => &mut self.commits_coauthor,
                2 => &mut self.commits_author,
                3 => &mut self.branches,
                4 => &mut self.labels,
                5 => &mut self.users,
                _ => &mut self.issues,
            };
            *counter += 1;
        }
        if let Some(t) = item.observed_at {
            self.first_seen = Some(self.first_seen.map_or(t, |f| f.min(t)));
            self.last_seen = Some(self.last_seen.map_or(t, |l| l.max(t)));
        }
    }

    pub fn total(&self) -> u64 {
        self.files
            + self.commits_coauthor
            + self.commits_author
            + self.branches
            + self.labels
            + self.users
            + self.issues
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportObservability {
    pub ignored_agent_rules: Vec<String>,
    pub files_without_commit_markers: bool,
}

/// Per-repository fusion of all evidence. Serializes to the report JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionReport {
    pub repo_id: String,
    #[serde(with = "iso_time")]
    pub scanned_at: i64,
    pub catalog_version: String,
    pub adoption_level: AdoptionLevel,
    /// Rounded to four decimal places.
    pub agent_commit_share: f64,
    pub agents: BTreeMap<String, AgentActivity>,
    pub observability: ReportObservability,
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

pub fn build_report(inputs: &ReportInputs<'_>) -> Result<AdoptionReport, ReportError> {
    inputs.check_consistency()?;

    let mut agents: BTreeMap<String, AgentActivity> = BTreeMap::new();
    let mut by_source: BTreeMap<EvidenceSource, Vec<EvidenceItem>> = BTreeMap::new();
    // counters count distinct artifacts, not rule hits
    let mut seen: BTreeSet<(&str, usize, &str)> = BTreeSet::new();
    for item in inputs.all_evidence() {
        let fresh = seen.insert((&item.agent_id, counter_index(item), &item.locator));
        agents
            .entry(item.agent_id.clone())
            .or_default()
            .add(item, fresh);
        by_source.entry(item.source).or_default().push(item.clone());
    }

    let empty = CommitScanSummary::default();
    let mut summary = inputs.commits.cloned().unwrap_or(empty);
    // commit evidence passed as a batch still counts toward matched commits
    for item in by_source.get(&EvidenceSource::Commit).into_iter().flatten() {
        summary.matched_commits.insert(item.locator.clone());
    }
    if summary.total_commits < summary.matched_commits.len() as u64 {
        summary.total_commits = summary.matched_commits.len() as u64;
    }

    let none: Vec<EvidenceItem> = Vec::new();
    let get = |s: EvidenceSource| by_source.get(&s).unwrap_or(&none);
    let adoption_level = classify_adoption_with(
        &summary,
        get(EvidenceSource::Tree),
        get(EvidenceSource::PullRequest),
        get(EvidenceSource::Issue),
        inputs.pervasive_share,
    );

    Ok(AdoptionReport {
        repo_id: inputs.repo_id.to_string(),
        scanned_at: inputs.scanned_at,
        catalog_version: inputs.catalog_version.to_string(),
        adoption_level,
        agent_commit_share: round4(summary.agent_commit_share()),
        agents,
        observability: ReportObservability {
            ignored_agent_rules: inputs.observability.ignored_rule_ids(),
            files_without_commit_markers: !get(EvidenceSource::Tree).is_empty()
                && summary.agent_commit_count() == 0,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionProvenance {
    pub catalog_version: String,
    #[serde(with = "iso_time")]
    pub scanned_at: i64,
}

/// Agent-attributed commits and pull requests to drop from human-focused datasets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionList {
    pub repo_id: String,
    pub commit_hashes: Vec<String>,
    pub pr_numbers: Vec<u64>,
    pub generated_from: ExclusionProvenance,
}

pub fn exclusion_list(inputs: &ReportInputs<'_>) -> Result<ExclusionList, ReportError> {
    inputs.check_consistency()?;
    let mut commits = BTreeSet::new();
    let mut prs = BTreeSet::new();
    for item in inputs.all_evidence() {
        match item.source {
            EvidenceSource::Commit => {
                commits.insert(item.locator.clone());
            }
            EvidenceSource::PullRequest => {
                if let Ok(n) = item.locator.trim_start_matches('#').parse::<u64>() {
                    prs.insert(n);
                }
            }
            EvidenceSource::Tree | EvidenceSource::Issue => {}
        }
    }
    Ok(ExclusionList {
        repo_id: inputs.repo_id.to_string(),
        commit_hashes: commits.into_iter().collect(),
        pr_numbers: prs.into_iter().collect(),
        generated_from: ExclusionProvenance {
            catalog_version: inputs.catalog_version.to_string(),
            scanned_at: inputs.scanned_at,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExclusionEmit {
    Commits,
    Prs,
    #[default]
    Both,
}

impl ExclusionList {
    pub fn restricted(mut self, emit: ExclusionEmit) -> Self {
        match emit {
            ExclusionEmit::Commits => self.pr_numbers.clear(),
            ExclusionEmit::Prs => self.commit_hashes.clear(),
            ExclusionEmit::Both => {}
        }
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("exclusion list serializes");
        s.push('\n');
        s
    }

    /// One entry per line: commit hashes, then pull requests as `#N`.
    pub fn to_plain(&self) -> String {
        let mut out = String::new();
        for h in &self.commit_hashes {
            out.push_str(h);
            out.push('\n');
        }
        for n in &self.pr_numbers {
            let _ = writeln!(out, "#{n}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "text" => Ok(ReportFormat::Text),
            other => Err(format!(
                "unknown format `{other}` (expected json, csv or text)"
            )),
        }
    }
}

pub fn format_time(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_default()
}

pub fn render_report(report: &AdoptionReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Text => render_text(report),
    }
}

fn render_csv(report: &AdoptionReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "repo_id",
        "adoption_level",
        "agent_commit_share",
        "agent_id",
        "files",
        "commits_coauthor",
        "commits_author",
        "branches",
        "labels",
        "users",
        "issues",
        "first_seen",
        "last_seen",
    ];
    w.write_record(header).expect("in-memory csv write");
    let share = format!("{:.4}", report.agent_commit_share);
    for (id, a) in &report.agents {
        let counts = [
            a.files,
            a.commits_coauthor,
            a.commits_author,
            a.branches,
            a.labels,
            a.users,
            a.issues,
        ];
        let mut row = vec![
            report.repo_id.clone(),
            report.adoption_level.as_str().to_string(),
            share.clone(),
            id.clone(),
        ];
        row.extend(counts.iter().map(u64::to_string));
        row.push(a.first_seen.map(format_time).unwrap_or_default());
        row.push(a.last_seen.map(format_time).unwrap_or_default());
        w.write_record(&row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

fn render_text(report: &AdoptionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "repository:  {}", report.repo_id);
    let _ = writeln!(out, "scanned at:  {}", format_time(report.scanned_at));
    let _ = writeln!(out, "catalog:     {}", report.catalog_version);
    let _ = writeln!(out, "adoption:    {}", report.adoption_level.as_str());
    let _ = writeln!(
        out,
        "agent share: {:.4} of commits",
        report.agent_commit_share
    );
    if report.agents.is_empty() {
        out.push_str("no agent evidence\n");
    }
    for (id, a) in &report.agents {
        let mut parts = Vec::new();
        for (label, n) in [
            ("files", a.files),
            ("co-authored commits", a.commits_coauthor),
            ("authored commits", a.commits_author),
            ("branches", a.branches),
            ("labels", a.labels),
            ("users", a.users),
            ("issues", a.issues),
        ] {
            if n > 0 {
                parts.push(format!("{n} {label}"));
            }
        }
        let _ = write!(out, "  {id}: {}", parts.join(", "));
        if let (Some(f), Some(l)) = (a.first_seen, a.last_seen) {
            let _ = write!(out, " ({} .. {})", format_time(f), format_time(l));
        }
        out.push('\n');
    }
    let obs = &report.observability;
    if !obs.ignored_agent_rules.is_empty() {
        let _ = writeln!(
            out,
            "ignored agent files: {}",
            obs.ignored_agent_rules.join(", ")
        );
    }
    if obs.files_without_commit_markers {
        out.push_str("agent files present but no commit markers\n");
    }
    out
}

mod iso_time {
    use chrono::DateTime;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &i64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_time(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i64, D::Error> {
        let text = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&text)
            .map(|t| t.timestamp())
            .map_err(D::Error::custom)
    }
}

mod iso_time_opt {
    use chrono::DateTime;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &Option<i64>, s: S) -> Result<S::Ok, S::Error> {
        match ts {
            Some(t) => s.serialize_str(&super::format_time(*t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<i64>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|text| {
                DateTime::parse_from_rfc3339(&text)
                    .map(|t| t.timestamp())
                    .map_err(D::Error::custom)
            })
            .transpose()
    }
}
