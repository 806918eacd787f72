//! Platform mining: search-count queries, pull requests, issues and users.
//!
//! All network access goes through [`HttpTransport`], so every operation can
//! run against recorded responses.

mod query;
mod transport;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::catalog::{rules_active_at, ActiveRule, Catalog, RuleCategory};
use crate::evidence::{identity_matches, EvidenceItem, EvidenceSource};

pub use query::{build_search_query, escape_regex, ArtifactType, SearchQuery};
pub use transport::{
    recording_name, Clock, HttpRequest, HttpResponse, HttpTransport, ManualClock, MockTransport,
    RateBudget, ReplayTransport, SystemClock, TransportError,
};

pub const DEFAULT_API_BASE: &str = "https://api.github.com";
pub const TOKEN_ENV_VARS: [&str; 2] = ["AGENTSCAN_GITHUB_TOKEN", "GITHUB_TOKEN"];
const ACCEPT: &str = "application/vnd.github+json";

#[derive(Debug, Error)]
pub enum GhError {
    #[error("rate limited until {reset_at}")]
    RateLimited { reset_at: i64 },
    #[error("authentication required or rejected")]
    Unauthorized,
    #[error("query rejected by the platform: {0}")]
    UnsupportedQuery(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("rule `{0}` is not searchable; user rules are matched against fetched records")]
    NotSearchable(String),
    #[error("invalid repository slug `{0}`, expected owner/name")]
    InvalidSlug(String),
    #[error("unexpected HTTP status {status}: {body}")]
    Http { status: u16, body: String },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("unexpected response body: {0}")]
    Decode(String),
    #[error("pagination stopped after {pages_completed} page(s): {cause}")]
    Partial {
        /// URL of the last page fetched successfully; resume from its `next` link.
        last_complete_page: String,
        pages_completed: usize,
        cause: Box<GhError>,
    },
}

impl GhError {
    /// True for auth and quota failures, including when they interrupt pagination.
    pub fn is_access_failure(&self) -> bool {
        match self {
            GhError::RateLimited { .. } | GhError::Unauthorized => true,
            GhError::Partial { cause, .. } => cause.is_access_failure(),
            _ => false,
        }
    }
}

/// Reads the API token from the environment.
pub fn token_from_env() -> Option<String> {
    TOKEN_ENV_VARS
        .iter()
        .find_map(|v| std::env::var(v).ok().filter(|t| !t.trim().is_empty()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrRecord {
    pub number: u64,
    pub head_branch: String,
    pub labels: Vec<String>,
    pub author_login: String,
    pub is_draft: bool,
    pub is_merged: bool,
    pub is_closed: bool,
    pub created_at: Option<i64>,
    pub closed_at: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub number: u64,
    pub author_login: String,
    pub assignees: Vec<String>,
    pub body: String,
    pub created_at: Option<i64>,
}

/// A platform-reported count. Always approximate and dated by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ApproximateCount {
    pub value: u64,
    pub approximate: bool,
}

/// Blocking API client with a per-client rate budget.
pub struct GitHubClient<'a> {
    transport: &'a dyn HttpTransport,
    clock: &'a dyn Clock,
    base_url: String,
    token: Option<String>,
    budget: RefCell<RateBudget>,
    per_page: u32,
}

impl<'a> GitHubClient<'a> {
    pub fn new(transport: &'a dyn HttpTransport, clock: &'a dyn Clock) -> Self {
        GitHubClient {
            transport,
            clock,
            base_url: DEFAULT_API_BASE.to_string(),
            token: None,
            budget: RefCell::new(RateBudget::new(0)),
            per_page: 100,
        }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    pub fn with_base_url(mut self, base: impl Into<String>) -> Self {
        self.base_url = base.into().trim_end_matches('/').to_string();
        self
    }

    pub fn with_min_interval_ms(self, ms: u64) -> Self {
        self.budget.borrow_mut().min_interval_ms = ms;
        self
    }

    pub fn with_per_page(mut self, per_page: u32) -> Self {
        self.per_page = per_page.clamp(1, 100);
        self
    }

    pub fn budget(&self) -> RateBudget {
        self.budget.borrow().clone()
    }

    pub fn has_token(&self) -> bool {
        self.token.is_some()
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url)
    }

    fn get(&self, url: &str) -> Result<HttpResponse, GhError> {
        self.budget
            .borrow_mut()
            .acquire(self.clock)
            .map_err(|reset_at| GhError::RateLimited { reset_at })?;
        let mut req = HttpRequest::get(url)
            .header("Accept", ACCEPT)
            .header("User-Agent", "agentscan")
            .header("X-GitHub-Api-Version", "2022-11-28");
        if let Some(token) = &self.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let resp = self.transport.send(&req)?;
        self.budget.borrow_mut().observe(&resp, self.clock);
        match resp.status {
            200..=299 => Ok(resp),
            401 => Err(GhError::Unauthorized),
            403 | 429 => Err(GhError::RateLimited {
                reset_at: self.budget.borrow().reset_at,
            }),
            404 => Err(GhError::NotFound(req.path_and_query())),
            422 => Err(GhError::UnsupportedQuery(resp.body)),
            status => Err(GhError::Http {
                status,
                body: resp.body,
            }),
        }
    }

    fn get_json(&self, url: &str) -> Result<(Value, HttpResponse), GhError> {
        let resp = self.get(url)?;
        let value = serde_json::from_str(&resp.body).map_err(|e| GhError::Decode(e.to_string()))?;
        Ok((value, resp))
    }

    /// Fetches every page of a list endpoint, following `Link: rel="next"`.
    pub fn get_all_pages(&self, path_and_query: &str) -> Result<Vec<Value>, GhError> {
        let sep = if path_and_query.contains('?') {
            '&'
        } else {
            '?'
        };
        let mut next = Some(self.url(&format!("{path_and_query}{sep}per_page={}", self.per_page)));
        let mut items = Vec::new();
        let mut pages = 0usize;
        let mut last_ok = String::new();
        while let Some(url) = next.take() {
            let (value, resp) = match self.get_json(&url) {
                Ok(ok) => ok,
                Err(cause) if pages > 0 => {
                    return Err(GhError::Partial {
                        last_complete_page: last_ok,
                        pages_completed: pages,
                        cause: Box::new(cause),
                    })
                }
                Err(cause) => return Err(cause),
            };
            match value {
                Value::Array(page) => items.extend(page),
                other => return Err(GhError::Decode(format!("expected array, got {other}"))),
            }
            pages += 1;
            last_ok = url;
            next = resp.header("link").and_then(next_link);
        }
        Ok(items)
    }
}

/// Extracts the `rel="next"` target from a `Link` header.
pub fn next_link(header: &str) -> Option<String> {
    header.split(',').find_map(|part| {
        let (target, params) = part.split_once(';')?;
        let is_next = params
            .split(';')
            .any(|p| p.trim().eq_ignore_ascii_case("rel=\"next\""));
        is_next.then(|| {
            target
                .trim()
                .trim_start_matches('<')
                .trim_end_matches('>')
                .to_string()
        })
    })
}

/// Platform-reported total for a search query.
pub fn count_matches(
    query: &SearchQuery,
    client: &GitHubClient<'_>,
) -> Result<ApproximateCount, GhError> {
    if query.query_string.is_empty() {
        return Err(GhError::UnsupportedQuery("empty query".into()));
    }
    if query.artifact_type == ArtifactType::Code && !client.has_token() {
        return Err(GhError::Unauthorized);
    }
    let q: String = url::form_urlencoded::byte_serialize(query.query_string.as_bytes()).collect();
    let path = format!(
        "/search/{}?q={q}&per_page=1",
        query.artifact_type.search_endpoint()
    );
    let (value, _) = client.get_json(&client.url(&path))?;
    let total = value
        .get("total_count")
        .and_then(Value::as_u64)
        .ok_or_else(|| GhError::Decode("missing total_count".into()))?;
    Ok(ApproximateCount {
        value: total,
        approximate: true,
    })
}

/// Splits `owner/name`.
pub fn split_slug(repo: &str) -> Result<(&str, &str), GhError> {
    match repo.split_once('/') {
        Some((o, n)) if !o.is_empty() && !n.is_empty() && !n.contains('/') => Ok((o, n)),
        _ => Err(GhError::InvalidSlug(repo.to_string())),
    }
}

fn parse_time(v: &Value) -> Option<i64> {
    v.as_str()
        .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
        .map(|d| d.timestamp())
}

fn str_field<'v>(v: &'v Value, path: &[&str]) -> &'v str {
    path.iter()
        .try_fold(v, |acc, key| acc.get(key))
        .and_then(Value::as_str)
        .unwrap_or("")
}

fn logins(v: &Value) -> Vec<String> {
    v.as_array()
        .map(|a| {
            a.iter()
                .map(|u| str_field(u, &["login"]).to_string())
                .collect()
        })
        .unwrap_or_default()
}

pub fn parse_pr(v: &Value) -> Result<PrRecord, GhError> {
    let number = v
        .get("number")
        .and_then(Value::as_u64)
        .filter(|n| *n > 0)
        .ok_or_else(|| GhError::Decode("pull request without number".into()))?;
    let is_merged = v.get("merged_at").is_some_and(|m| !m.is_null());
    Ok(PrRecord {
        number,
        head_branch: str_field(v, &["head", "ref"]).to_string(),
        labels: v
            .get("labels")
            .and_then(Value::as_array)
            .map(|a| {
                a.iter()
                    .map(|l| str_field(l, &["name"]).to_string())
                    .collect()
            })
            .unwrap_or_default(),
        author_login: str_field(v, &["user", "login"]).to_string(),
        is_draft: v.get("draft").and_then(Value::as_bool).unwrap_or(false),
        is_merged,
        is_closed: is_merged || str_field(v, &["state"]) == "closed",
        created_at: v.get("created_at").and_then(parse_time),
        closed_at: v.get("closed_at").and_then(parse_time),
    })
}

fn parse_issue(v: &Value) -> Option<IssueRecord> {
    if v.get("pull_request").is_some() {
        return None;
    }
    let mut assignees = logins(v.get("assignees").unwrap_or(&Value::Null));
    let single = str_field(v, &["assignee", "login"]);
    if !single.is_empty() && !assignees.iter().any(|a| a == single) {
        assignees.push(single.to_string());
    }
    Some(IssueRecord {
        number: v.get("number").and_then(Value::as_u64)?,
        author_login: str_field(v, &["user", "login"]).to_string(),
        assignees,
        body: str_field(v, &["body"]).to_string(),
        created_at: v.get("created_at").and_then(parse_time),
    })
}

fn rules_of<'c>(catalog: &'c Catalog, at: NaiveDate, cats: &[RuleCategory]) -> Vec<ActiveRule<'c>> {
    rules_active_at(catalog, at)
        .into_iter()
        .filter(|r| cats.contains(&r.rule.category))
        .collect()
}

/// Evidence from one pull request's branch, labels and author.
pub fn match_pr(pr: &PrRecord, rules: &[ActiveRule<'_>]) -> Vec<EvidenceItem> {
    let locator = pr.number.to_string();
    let mut out = Vec::new();
    for rule in rules {
        let r = rule.rule;
        let hit = match r.category {
            RuleCategory::BranchPrefix => {
                !r.pattern.is_empty() && pr.head_branch.starts_with(&r.pattern)
            }
            RuleCategory::PrLabel => pr.labels.iter().any(|l| l.eq_ignore_ascii_case(&r.pattern)),
            RuleCategory::UserName => {
                identity_matches(&pr.author_login, &r.pattern, r.pattern_kind)
            }
            _ => false,
        };
        if hit {
            out.push(EvidenceItem::new(
                rule,
                EvidenceSource::PullRequest,
                &locator,
                pr.created_at,
            ));
        }
    }
    out
}

/// `@login` mentions in free text. A mention starts after a non-word
/// character and spans `[A-Za-z0-9_-]`.
pub fn mentions(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let is_login = |b: u8| b.is_ascii_alphanumeric() || b == b'-' || b == b'_';
    let mut out = Vec::new();
    for (i, _) in text.match_indices('@') {
        if i > 0 && (is_login(bytes[i - 1]) || bytes[i - 1] == b'.') {
            continue;
        }
        let start = i + 1;
        let end = bytes[start..]
            .iter()
            .position(|&b| !is_login(b))
            .map_or(bytes.len(), |p| start + p);
        if end > start {
            out.push(&text[start..end]);
        }
    }
    out
}

/// Pages through all pull requests and matches branch, label and user rules.
pub fn fetch_pr_evidence(
    repo: &str,
    catalog: &Catalog,
    client: &GitHubClient<'_>,
    at: NaiveDate,
) -> Result<(Vec<PrRecord>, Vec<EvidenceItem>), GhError> {
    let (owner, name) = split_slug(repo)?;
    let raw = client.get_all_pages(&format!("/repos/{owner}/{name}/pulls?state=all"))?;
    let mut prs = raw.iter().map(parse_pr).collect::<Result<Vec<_>, _>>()?;
    prs.sort_by_key(|p| p.number);
    prs.dedup_by_key(|p| p.number);
    let rules = rules_of(
        catalog,
        at,
        &[
            RuleCategory::BranchPrefix,
            RuleCategory::PrLabel,
            RuleCategory::UserName,
        ],
    );
    let evidence = prs.iter().flat_map(|pr| match_pr(pr, &rules)).collect();
    Ok((prs, evidence))
}

/// Matches user rules against issue authors, assignees, commenters and `@` mentions.
pub fn fetch_issue_evidence(
    repo: &str,
    catalog: &Catalog,
    client: &GitHubClient<'_>,
    at: NaiveDate,
) -> Result<Vec<EvidenceItem>, GhError> {
    let (owner, name) = split_slug(repo)?;
    let issues: BTreeMap<u64, IssueRecord> = client
        .get_all_pages(&format!("/repos/{owner}/{name}/issues?state=all"))?
        .iter()
        .filter_map(parse_issue)
        .map(|i| (i.number, i))
        .collect();
    if issues.is_empty() {
        return Ok(Vec::new());
    }
    // issue number -> (participant logins, texts to scan for mentions)
    let mut participants: BTreeMap<u64, (Vec<String>, Vec<String>)> = issues
        .values()
        .map(|i| {
            let mut people = i.assignees.clone();
            people.push(i.author_login.clone());
            (i.number, (people, vec![i.body.clone()]))
        })
        .collect();
    for c in client.get_all_pages(&format!("/repos/{owner}/{name}/issues/comments"))? {
        let number = str_field(&c, &["issue_url"])
            .rsplit('/')
            .next()
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(entry) = number.and_then(|n| participants.get_mut(&n)) {
            entry.0.push(str_field(&c, &["user", "login"]).to_string());
            entry.1.push(str_field(&c, &["body"]).to_string());
        }
    }
    let rules = rules_of(catalog, at, &[RuleCategory::UserName]);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (number, (people, texts)) in &participants {
        let mentioned = texts.iter().flat_map(|t| mentions(t));
        let candidates: Vec<&str> = people.iter().map(String::as_str).chain(mentioned).collect();
        for rule in &rules {
            let r = rule.rule;
            if candidates
                .iter()
                .any(|c| identity_matches(c, &r.pattern, r.pattern_kind))
                && seen.insert((r.rule_id.clone(), *number))
            {
                out.push(EvidenceItem::new(
                    rule,
                    EvidenceSource::Issue,
                    number.to_string(),
                    issues[number].created_at,
                ));
            }
        }
    }
    Ok(out)
}
