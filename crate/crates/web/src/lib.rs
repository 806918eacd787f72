//! Browser bindings for trying the detectors on pasted input.
//!
//! Every export takes plain strings and returns a JSON string, so the page
//! needs no generated TypeScript glue beyond `wasm-bindgen`'s loader.

use agentscan::commitscan::{advertised_identities, parse_trailers, Identity, MatchOptions};
use agentscan::treescan::{entries_for_paths, parse_ignore_file, TreeEntry};
use agentscan::{
    build_search_query, builtin_catalog, detect_reduced_observability, match_commit,
    rules_active_at, scan_tree, Catalog, CommitRecord, RuleCategory,
};
use chrono::NaiveDate;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn date_or_catalog(catalog: &Catalog, as_of: &str) -> Result<NaiveDate, String> {
    if as_of.trim().is_empty() {
        return Ok(catalog.generated_on);
    }
    NaiveDate::parse_from_str(as_of.trim(), "%Y-%m-%d")
        .map_err(|e| format!("bad date `{as_of}`: {e}"))
}

fn to_json(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Matches pasted repository paths (one per line, `dir/` for directories)
/// against the file heuristics, honoring a pasted root ignore file.
pub fn scan_paths_value(paths: &str, gitignore: &str, as_of: &str) -> Result<Value, String> {
    let catalog = builtin_catalog();
    let date = date_or_catalog(&catalog, as_of)?;
    let ignore_lines: Vec<&str> = gitignore.lines().collect();
    let rules = parse_ignore_file(&ignore_lines);

    let listed: Vec<&str> = paths
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let mut ignored = Vec::new();
    let mut files = Vec::new();
    let mut dirs = Vec::new();
    for p in &listed {
        let is_dir = p.ends_with('/');
        let clean = p.trim_end_matches('/');
        if rules.is_ignored(clean, is_dir) {
            ignored.push(p.to_string());
        } else if is_dir {
            dirs.extend(TreeEntry::dir(clean));
        } else {
            files.push(clean);
        }
    }
    let mut entries = entries_for_paths(&files);
    entries.extend(dirs);
    let evidence: Vec<Value> = scan_tree(entries, &catalog, date)
        .into_iter()
        .map(|e| json!({ "agent": e.agent_id, "rule": e.rule_id, "path": e.locator }))
        .collect();

    let probes: Vec<String> = listed
        .iter()
        .map(|p| p.trim_end_matches('/').to_string())
        .collect();
    let mut flagged: Vec<String> =
        detect_reduced_observability(&ignore_lines, &catalog, None).ignored_rule_ids();
    flagged.extend(
        detect_reduced_observability(&ignore_lines, &catalog, Some(&probes)).ignored_rule_ids(),
    );
    flagged.sort();
    flagged.dedup();

    let diagnostics: Vec<Value> = rules
        .diagnostics
        .iter()
        .map(|d| json!({ "line": d.line_number, "message": d.message }))
        .collect();
    Ok(json!({
        "evidence": evidence,
        "ignored_paths": ignored,
        "ignored_agent_rules": flagged,
        "ignore_diagnostics": diagnostics,
    }))
}

/// Parses a commit message's trailers and matches commit heuristics.
pub fn match_message_value(
    message: &str,
    author_name: &str,
    author_email: &str,
    as_of: &str,
    lax: bool,
) -> Result<Value, String> {
    let catalog = builtin_catalog();
    let date = date_or_catalog(&catalog, as_of)?;
    let options = MatchOptions { lax };
    let commit = CommitRecord {
        hash: "0".repeat(40),
        author: Identity::new(author_name, author_email),
        committer: Identity::new(author_name, author_email),
        timestamp: date
            .and_hms_opt(12, 0, 0)
            .expect("noon exists")
            .and_utc()
            .timestamp(),
        message: message.to_string(),
        parents: Vec::new(),
    };
    let rules = rules_active_at(&catalog, date);
    let trailers: Vec<Value> = parse_trailers(message)
        .into_iter()
        .map(|t| json!({ "key": t.key, "value": t.value }))
        .collect();
    let identities: Vec<Value> = advertised_identities(message, options)
        .into_iter()
        .map(|i| json!({ "name": i.name, "email": i.email }))
        .collect();
    let evidence: Vec<Value> = match_commit(&commit, &rules, options)
        .into_iter()
        .map(|e| json!({ "agent": e.agent_id, "rule": e.rule_id, "category": e.category.as_str() }))
        .collect();
    Ok(json!({ "trailers": trailers, "co_authors": identities, "evidence": evidence }))
}

/// Search queries for every searchable rule whose agent or rule id contains `filter`.
pub fn search_queries_value(filter: &str) -> Result<Value, String> {
    let catalog = builtin_catalog();
    let needle = filter.trim().to_lowercase();
    let rows: Vec<Value> = catalog
        .all_rules()
        .filter(|r| r.rule.category != RuleCategory::UserName)
        .filter(|r| {
            needle.is_empty() || r.rule.rule_id.contains(&needle) || r.agent.id.contains(&needle)
        })
        .filter_map(|r| {
            let q = build_search_query(r.rule).ok()?;
            Some(json!({
                "agent": r.agent.display_name,
                "rule": r.rule.rule_id,
                "category": r.rule.category.as_str(),
                "query": q.query_string,
                "url": q.web_url(),
            }))
        })
        .collect();
    Ok(Value::Array(rows))
}

#[wasm_bindgen]
pub fn scan_paths(paths: &str, gitignore: &str, as_of: &str) -> String {
    to_json(scan_paths_value(paths, gitignore, as_of))
}

#[wasm_bindgen]
pub fn match_message(
    message: &str,
    author_name: &str,
    author_email: &str,
    as_of: &str,
    lax: bool,
) -> String {
    to_json(match_message_value(
        message,
        author_name,
        author_email,
        as_of,
        lax,
    ))
}

#[wasm_bindgen]
pub fn search_queries(filter: &str) -> String {
    to_json(search_queries_value(filter))
}
