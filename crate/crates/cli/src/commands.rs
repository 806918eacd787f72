use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use agentscan::catalog::{builtin_catalog_json, parse_catalog_unvalidated};
use agentscan::classify::{exclusion_list, ExclusionEmit};
use agentscan::commitscan::{CommitRecord, MatchOptions};
use agentscan::ghminer::{
    count_matches, fetch_issue_evidence, fetch_pr_evidence, split_slug, token_from_env,
    HttpTransport, ReplayTransport, SystemClock,
};
use agentscan::git::GitRepo;
use agentscan::treescan::{entries_for_paths, scan_tree_history, ObservabilityFlags};
use agentscan::{
    build_report, build_search_query, builtin_catalog, detect_reduced_observability, load_catalog,
    render_report, scan_history, scan_tree, validate_catalog, Catalog, CommitScanSummary,
    EvidenceBatch, EvidenceItem, GhError, GitHubClient, ReportInputs, RuleCategory, Severity,
};
use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde_json::json;

use crate::live::{RecordingTransport, UreqTransport};
use crate::{ApiSource, Config, Emit, Exit, Format};

fn as_of(cfg: &Config) -> NaiveDate {
    cfg.as_of.unwrap_or_else(|| chrono::Utc::now().date_naive())
}

fn midnight(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp()
}

fn catalog(cfg: &Config) -> Result<Catalog> {
    match &cfg.catalog {
        None => Ok(builtin_catalog()),
        Some(path) => {
            let file = fs::File::open(path)
                .with_context(|| format!("cannot open catalog {}", path.display()))?;
            load_catalog(file).with_context(|| format!("invalid catalog {}", path.display()))
        }
    }
}

fn write_payload(cfg: &Config, payload: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            fs::write(path, payload).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(payload.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn default_repo_id(path: &Path) -> String {
    path.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| path.display().to_string())
}

/// Matches commits on up to `jobs` threads; chunk summaries merge order-independently.
fn scan_commits(
    commits: Vec<CommitRecord>,
    catalog: &Catalog,
    options: MatchOptions,
    jobs: usize,
) -> CommitScanSummary {
    if jobs <= 1 || commits.len() < 2 * jobs {
        return scan_history(commits, catalog, options);
    }
    let chunk = commits.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = commits
            .chunks(chunk)
            .map(|part| s.spawn(move || scan_history(part.iter().cloned(), catalog, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("commit matching thread panicked"))
            .fold(CommitScanSummary::default(), CommitScanSummary::merge)
    })
}

struct LocalScan {
    summary: CommitScanSummary,
    tree: Vec<EvidenceItem>,
    flags: ObservabilityFlags,
    head_time: Option<i64>,
}

fn local_scan(
    cfg: &Config,
    catalog: &Catalog,
    path: &Path,
    repo_id: &str,
    all_revisions: bool,
) -> Result<LocalScan> {
    let repo = GitRepo::open(path)?;
    let head = repo.head()?;
    let options = MatchOptions { lax: cfg.lax };
    let summary =
        scan_commits(repo.commits()?, catalog, options, cfg.jobs as usize).with_repo_id(repo_id);
    let tree = if all_revisions {
        let revisions = repo
            .added_paths()?
            .into_iter()
            .map(|(ts, paths)| (ts, entries_for_paths(&paths)));
        scan_tree_history(revisions, catalog)
    } else {
        scan_tree(repo.head_tree()?, catalog, as_of(cfg))
    };
    let flags = detect_reduced_observability(&repo.root_ignore_lines()?, catalog, None);
    Ok(LocalScan {
        summary,
        tree,
        flags,
        head_time: head.map(|h| h.timestamp),
    })
}

pub fn scan(cfg: &Config, path: &Path, all_revisions: bool, repo_id: Option<String>) -> Result<()> {
    let catalog = catalog(cfg)?;
    let repo_id = repo_id.unwrap_or_else(|| default_repo_id(path));
    let local = local_scan(cfg, &catalog, path, &repo_id, all_revisions)?;
    let version = catalog.version_tag();
    let batches = [EvidenceBatch::new(repo_id.as_str(), local.tree)];
    // the HEAD commit time keeps reports of an unchanged repository identical
    let scanned_at = local.head_time.unwrap_or_else(|| midnight(as_of(cfg)));
    let mut inputs = ReportInputs::new(&repo_id, scanned_at, &version, &local.flags);
    inputs.commits = Some(&local.summary);
    inputs.batches = &batches;
    let report = build_report(&inputs)?;
    write_payload(cfg, &render_report(&report, cfg.format.into()))
}

fn transport(api: &ApiSource) -> Box<dyn HttpTransport> {
    match (&api.replay, &api.record) {
        (Some(dir), _) => Box::new(ReplayTransport::new(dir)),
        (None, Some(dir)) => Box::new(RecordingTransport::new(UreqTransport::new(), dir.clone())),
        (None, None) => Box::new(UreqTransport::new()),
    }
}

/// Reports auth and quota failures as one JSON line on stderr, exit 3.
fn platform_failure(err: GhError) -> anyhow::Error {
    if !err.is_access_failure() {
        return err.into();
    }
    let (pages_completed, resume_from, root) = match &err {
        GhError::Partial {
            last_complete_page,
            pages_completed,
            cause,
        } => (
            Some(*pages_completed),
            Some(last_complete_page.clone()),
            cause.as_ref(),
        ),
        other => (None, None, other),
    };
    let (kind, reset_at) = match root {
        GhError::RateLimited { reset_at } => ("rate_limited", Some(*reset_at)),
        _ => ("unauthorized", None),
    };
    let line = json!({
        "error": kind,
        "reset_at": reset_at,
        "pages_completed": pages_completed,
        "resume_from": resume_from,
        "message": err.to_string(),
    });
    let _ = writeln!(std::io::stderr(), "{line}");
    Exit(3).into()
}

struct Platform {
    transport: Box<dyn HttpTransport>,
    clock: SystemClock,
    token: Option<String>,
    replay: bool,
}

impl Platform {
    fn new(api: &ApiSource) -> Self {
        Platform {
            transport: transport(api),
            clock: SystemClock,
            token: token_from_env(),
            replay: api.replay.is_some(),
        }
    }

    fn client(&self, min_interval_ms: u64) -> GitHubClient<'_> {
        GitHubClient::new(self.transport.as_ref(), &self.clock)
            .with_token(self.token.clone())
            .with_min_interval_ms(if self.replay { 0 } else { min_interval_ms })
    }
}

pub fn mine(cfg: &Config, slug: &str, local: Option<&Path>, api: &ApiSource) -> Result<()> {
    split_slug(slug)?;
    let catalog = catalog(cfg)?;
    let date = as_of(cfg);
    let platform = Platform::new(api);
    let client = platform.client(100);
    let (_, pr_evidence) =
        fetch_pr_evidence(slug, &catalog, &client, date).map_err(platform_failure)?;
    let issue_evidence =
        fetch_issue_evidence(slug, &catalog, &client, date).map_err(platform_failure)?;

    let local = local
        .map(|path| local_scan(cfg, &catalog, path, slug, false))
        .transpose()?;
    let mut batches = vec![
        EvidenceBatch::new(slug, pr_evidence),
        EvidenceBatch::new(slug, issue_evidence),
    ];
    let default_flags = ObservabilityFlags::default();
    let mut flags = &default_flags;
    if let Some(l) = &local {
        batches.push(EvidenceBatch::new(slug, l.tree.clone()));
        flags = &l.flags;
    }
    let version = catalog.version_tag();
    let mut inputs = ReportInputs::new(slug, midnight(date), &version, flags);
    inputs.commits = local.as_ref().map(|l| &l.summary);
    inputs.batches = &batches;
    let report = build_report(&inputs)?;
    write_payload(cfg, &render_report(&report, cfg.format.into()))
}

pub fn counts(cfg: &Config, ids: &[String], all: bool, api: &ApiSource) -> Result<()> {
    let catalog = catalog(cfg)?;
    let date = as_of(cfg);
    if !all && ids.is_empty() {
        bail!("name at least one rule or agent id, or pass --all");
    }
    let mut selected = Vec::new();
    if all {
        selected.extend(
            agentscan::rules_active_at(&catalog, date)
                .into_iter()
                .filter(|r| r.rule.category != RuleCategory::UserName),
        );
    }
    for id in ids {
        if let Some(rule) = catalog.find_rule(id) {
            selected.push(rule);
        } else if let Some(agent) = catalog.agent(id) {
            selected.extend(
                catalog.all_rules().filter(|r| {
                    r.agent.id == agent.id && r.rule.category != RuleCategory::UserName
                }),
            );
        } else {
            bail!("unknown rule or agent id `{id}`");
        }
    }

    let platform = Platform::new(api);
    // search endpoints allow 30 requests a minute with a token, 10 without
    let client = platform.client(if platform.token.is_some() {
        2_100
    } else {
        6_100
    });
    let mut rows = Vec::new();
    for r in selected {
        let query = build_search_query(r.rule)?;
        let count = count_matches(&query, &client).map_err(platform_failure)?;
        rows.push((r, query, count));
    }

    let payload = match cfg.format {
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(r, q, c)| {
                    json!({
                        "rule_id": r.rule.rule_id,
                        "agent_id": r.agent.id,
                        "category": r.rule.category.as_str(),
                        "query": q.query_string,
                        "count": c.value,
                        "approximate": c.approximate,
                        "as_of": date.to_string(),
                    })
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&v)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "rule_id",
                "agent_id",
                "category",
                "query",
                "count",
                "approximate",
                "as_of",
            ])?;
            for (r, q, c) in &rows {
                w.write_record([
                    r.rule.rule_id.as_str(),
                    r.agent.id.as_str(),
                    r.rule.category.as_str(),
                    q.query_string.as_str(),
                    &c.value.to_string(),
                    &c.approximate.to_string(),
                    &date.to_string(),
                ])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
        Format::Text => {
            let width = rows
                .iter()
                .map(|(r, _, _)| r.rule.rule_id.len())
                .max()
                .unwrap_or(0);
            let mut s = format!("approximate search match counts as of {date}\n");
            for (r, q, c) in &rows {
                let marker = if c.approximate { "~" } else { "" };
                s.push_str(&format!(
                    "{:<width$}  {:>10}  {}\n",
                    r.rule.rule_id,
                    format!("{marker}{}", c.value),
                    q.query_string
                ));
            }
            s
        }
    };
    write_payload(cfg, &payload)
}

pub fn filter(
    cfg: &Config,
    path: &Path,
    emit: Emit,
    github: Option<&str>,
    repo_id: Option<String>,
    api: &ApiSource,
) -> Result<()> {
    let catalog = catalog(cfg)?;
    let repo_id = repo_id.unwrap_or_else(|| default_repo_id(path));
    let local = local_scan(cfg, &catalog, path, &repo_id, false)?;
    let mut batches = Vec::new();
    if let Some(slug) = github {
        split_slug(slug)?;
        let platform = Platform::new(api);
        let client = platform.client(100);
        let (_, prs) =
            fetch_pr_evidence(slug, &catalog, &client, as_of(cfg)).map_err(platform_failure)?;
        batches.push(EvidenceBatch::new(repo_id.as_str(), prs));
    }
    let version = catalog.version_tag();
    let scanned_at = local.head_time.unwrap_or_else(|| midnight(as_of(cfg)));
    let mut inputs = ReportInputs::new(&repo_id, scanned_at, &version, &local.flags);
    inputs.commits = Some(&local.summary);
    inputs.batches = &batches;
    let list = exclusion_list(&inputs)?.restricted(match emit {
        Emit::Commits => ExclusionEmit::Commits,
        Emit::Prs => ExclusionEmit::Prs,
        Emit::Both => ExclusionEmit::Both,
    });
    let payload = match cfg.format {
        Format::Json => list.to_json(),
        Format::Text => list.to_plain(),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["kind", "id"])?;
            for h in &list.commit_hashes {
                w.write_record(["commit", h.as_str()])?;
            }
            for n in &list.pr_numbers {
                w.write_record(["pr", &n.to_string()])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    };
    write_payload(cfg, &payload)
}

fn catalog_text(path: Option<&PathBuf>) -> Result<String> {
    match path {
        None => Ok(builtin_catalog_json().to_string()),
        Some(p) => {
            fs::read_to_string(p).with_context(|| format!("cannot read catalog {}", p.display()))
        }
    }
}

pub fn catalog_validate(cfg: &Config) -> Result<()> {
    let text = catalog_text(cfg.catalog.as_ref())?;
    let catalog = parse_catalog_unvalidated(&text)?;
    let diagnostics = validate_catalog(&catalog);
    let payload = match cfg.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&diagnostics)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["subject", "severity", "message"])?;
            for d in &diagnostics {
                let severity = match d.severity {
                    Severity::Warning => "warning",
                    Severity::Error => "error",
                };
                w.write_record([d.subject.as_str(), severity, d.message.as_str()])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
        Format::Text => diagnostics.iter().map(|d| format!("{d}\n")).collect(),
    };
    write_payload(cfg, &payload)?;
    if diagnostics.iter().any(|d| d.severity == Severity::Error) {
        return Err(Exit(1).into());
    }
    Ok(())
}

pub fn catalog_list(cfg: &Config) -> Result<()> {
    let catalog = catalog(cfg)?;
    let payload = match cfg.format {
        Format::Json => {
            let v: Vec<_> = catalog
                .agents
                .iter()
                .map(|a| {
                    json!({
                        "id": a.id,
                        "display_name": a.display_name,
                        "generic": a.generic,
                        "rules": a.rules.len(),
                    })
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&v)?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["id", "display_name", "generic", "rules"])?;
            for a in &catalog.agents {
                w.write_record([
                    a.id.as_str(),
                    a.display_name.as_str(),
                    &a.generic.to_string(),
                    &a.rules.len().to_string(),
                ])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
        Format::Text => {
            let width = catalog.agents.iter().map(|a| a.id.len()).max().unwrap_or(0);
            let mut s = String::new();
            for a in &catalog.agents {
                let n = a.rules.len();
                s.push_str(&format!(
                    "{:<width$}  {:>2} rule{}  {}\n",
                    a.id,
                    n,
                    if n == 1 { " " } else { "s" },
                    a.display_name
                ));
            }
            s
        }
    };
    write_payload(cfg, &payload)
}

pub fn catalog_export(cfg: &Config) -> Result<()> {
    let payload = match &cfg.catalog {
        None => builtin_catalog_json().to_string(),
        Some(_) => catalog(cfg)?.to_json(),
    };
    write_payload(cfg, &payload)
}
