//! Detection of coding-agent traces in software repositories.
//!
//! A declarative [`catalog`] of heuristics drives four scanners: commit
//! history ([`commitscan`]), repository trees and ignore files
//! ([`treescan`]), and the hosting platform's pull requests, issues and
//! search ([`ghminer`]). [`classify`] fuses their evidence into adoption
//! reports and exclusion lists.

pub mod catalog;
pub mod classify;
pub mod commitscan;
pub mod evidence;
pub mod ghminer;
#[cfg(not(target_arch = "wasm32"))]
pub mod git;
pub mod treescan;

pub use catalog::{
    builtin_catalog, load_catalog, parse_catalog, rules_active_at, validate_catalog, ActiveRule,
    AgentDescriptor, Catalog, CatalogError, Confidence, Diagnostic, HeuristicRule, PatternKind,
    RuleCategory, Severity,
};
pub use classify::{
    build_report, classify_adoption, exclusion_list, merge_rate, render_report, AdoptionLevel,
    AdoptionReport, EvidenceBatch, ExclusionList, ReportFormat, ReportInputs,
};
pub use commitscan::{match_commit, parse_trailers, scan_history, CommitRecord, CommitScanSummary};
pub use evidence::{EvidenceItem, EvidenceSource};
pub use ghminer::{build_search_query, GhError, GitHubClient, SearchQuery};
pub use treescan::{detect_reduced_observability, is_ignored, scan_tree, TreeEntry};
