//! Shared fixtures: git plumbing, a planted-repository generator and a
//! brute-force oracle that recomputes expected evidence from raw git output.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agentscan::catalog::{builtin_catalog, Catalog, PatternKind, RuleCategory};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use regex::Regex;

/// (rule_id, locator) pairs.
type RuleHits = BTreeSet<(String, String)>;

pub fn git_output(dir: &Path, args: &[&str], env: &[(&str, String)]) -> Output {
    let mut cmd = Command::new("git");
    cmd.arg("-C").arg(dir);
    cmd.args([
        "-c",
        "core.excludesFile=/dev/null",
        "-c",
        "commit.gpgsign=false",
    ]);
    cmd.args(args);
    cmd.env("GIT_CONFIG_NOSYSTEM", "1");
    cmd.env("GIT_CONFIG_GLOBAL", "/dev/null");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("git runs")
}

pub fn git(dir: &Path, args: &[&str]) -> String {
    let out = git_output(dir, args, &[]);
    assert!(
        out.status.success(),
        "git {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 git output")
}

pub fn init_repo(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    git(dir, &["init", "-q", "-b", "main"]);
}

pub fn write_file(root: &Path, rel: &str, content: &str) {
    let p = root.join(rel);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    fs::write(p, content).unwrap();
}

pub fn commit_all(dir: &Path, author: (&str, &str), timestamp: i64, message: &str) {
    git(dir, &["add", "-A"]);
    let date = format!("{timestamp} +0000");
    let env = [
        ("GIT_AUTHOR_NAME", author.0.to_string()),
        ("GIT_AUTHOR_EMAIL", author.1.to_string()),
        ("GIT_COMMITTER_NAME", "Fixture Bot".to_string()),
        ("GIT_COMMITTER_EMAIL", "fixtures@example.org".to_string()),
        ("GIT_AUTHOR_DATE", date.clone()),
        ("GIT_COMMITTER_DATE", date),
    ];
    let msg_file = dir.join(".git").join("FIXTURE_MSG");
    fs::write(&msg_file, message).unwrap();
    let msg_path = msg_file.to_str().unwrap().to_string();
    let out = git_output(
        dir,
        &[
            "commit",
            "-q",
            "--allow-empty",
            "--cleanup=verbatim",
            "-F",
            &msg_path,
        ],
        &env,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// What the generator deliberately planted; the oracle may find more
/// (incidental matches) but never less.
#[derive(Debug, Default)]
pub struct Manifest {
    /// (rule_id, locator)
    pub files: BTreeSet<(String, String)>,
    /// (rule_id, commit subject)
    pub commits: BTreeSet<(String, String)>,
    /// rule ids whose canonical files the ignore file hides
    pub ignored_rules: BTreeSet<String>,
}

pub struct Planted {
    pub path: PathBuf,
    pub manifest: Manifest,
}

fn random_case(rng: &mut StdRng, s: &str) -> String {
    s.chars()
        .map(|c| {
            if rng.gen_bool(0.5) {
                c.to_ascii_uppercase()
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect()
}

const DECOY_FILES: &[&str] = &[
    "src/main.rs",
    "README.md",
    "docs/guide.md",
    "docs/AGENTS.md.bak",
    "notes/xCLAUDE.md",
    "claude.md",
    "tools/memory-banker/readme.txt",
    ".github/workflows/ci.yml",
    "cursor/settings.json",
];

const WORDS: &[&str] = &[
    "fix", "parser", "cache", "refactor", "tests", "docs", "update", "retry", "loop", "config",
];

fn sentence(rng: &mut StdRng) -> String {
    let n = rng.gen_range(3..8);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Concrete committed paths that a file rule detects, with the locator the
/// scanner should report.
fn planted_path(rng: &mut StdRng, pattern: &str, kind: PatternKind) -> (String, String) {
    let prefix = if rng.gen_bool(0.3) {
        "packages/app/"
    } else {
        ""
    };
    match kind {
        PatternKind::PathName => {
            let p = format!("{prefix}{pattern}");
            (p.clone(), p)
        }
        _ if pattern.ends_with('/') => (
            format!("{prefix}{pattern}{}.md", WORDS.choose(rng).unwrap()),
            format!("{prefix}{pattern}"),
        ),
        _ => {
            let stem = format!("{prefix}{pattern}");
            if rng.gen_bool(0.5) {
                (format!("{stem}.yml"), format!("{stem}.yml"))
            } else {
                (format!("{stem}-review.yml"), format!("{stem}-review.yml"))
            }
        }
    }
}

/// A co-author value that the given identity rule should match.
fn coauthor_value(rng: &mut StdRng, pattern: &str, kind: PatternKind) -> String {
    let p = random_case(rng, pattern);
    match kind {
        PatternKind::Substring => match rng.gen_range(0..3) {
            0 => format!("{p} <bot@example.net>"),
            1 => format!(
                "{p}[bot] <12345+{}[bot]@users.noreply.github.com>",
                pattern.to_lowercase()
            ),
            _ => format!("Helper {p} <helper@example.net>"),
        },
        _ if pattern.contains('@') => {
            format!(
                "{} <{p}>",
                ["Agent", "Assistant", "Bot"].choose(rng).unwrap()
            )
        }
        _ => format!("{p} <agent@example.net>"),
    }
}

/// Builds a repository under `dir` with random agent traces and decoys.
pub fn plant_repo(dir: &Path, seed: u64, catalog: &Catalog) -> Planted {
    let mut rng = StdRng::seed_from_u64(seed);
    init_repo(dir);
    let mut manifest = Manifest::default();

    let file_rules: Vec<_> = catalog
        .all_rules()
        .filter(|r| r.rule.category == RuleCategory::FilePath)
        .collect();
    let coauthor_rules: Vec<_> = catalog
        .all_rules()
        .filter(|r| r.rule.category == RuleCategory::CommitCoauthor)
        .collect();
    let author_rules: Vec<_> = catalog
        .all_rules()
        .filter(|r| r.rule.category == RuleCategory::CommitAuthor)
        .collect();

    // ignore file hiding some agent files
    let hidden_count = rng.gen_range(0..3);
    let mut ignore_lines = vec!["target/".to_string(), "*.log".to_string()];
    let hidden: Vec<_> = file_rules
        .choose_multiple(&mut rng, hidden_count)
        .cloned()
        .collect();
    for r in &hidden {
        let line = match rng.gen_range(0..3) {
            0 => r.rule.pattern.clone(),
            1 => format!("/{}", r.rule.pattern),
            _ => format!("**/{}", r.rule.pattern),
        };
        ignore_lines.push(line);
        // the file exists locally but never reaches the repository
        let (path, _) = planted_path(&mut rng, &r.rule.pattern, r.rule.pattern_kind);
        let path = path.trim_start_matches("packages/app/").to_string();
        write_file(dir, &path, "local only\n");
        manifest.ignored_rules.insert(r.rule.rule_id.clone());
    }
    if rng.gen_bool(0.3) {
        // negation that must not resurrect anything under an ignored directory
        ignore_lines.push("!.cursor/rules/keep.mdc".to_string());
    }
    write_file(dir, ".gitignore", &(ignore_lines.join("\n") + "\n"));

    let hidden_ids: BTreeSet<_> = hidden.iter().map(|r| r.rule.rule_id.clone()).collect();
    let mut pending_files: Vec<(String, Option<(String, String)>)> = Vec::new();
    let planted_count = rng.gen_range(0..5);
    for r in file_rules.choose_multiple(&mut rng, planted_count) {
        if hidden_ids.contains(&r.rule.rule_id) {
            continue;
        }
        let (path, locator) = planted_path(&mut rng, &r.rule.pattern, r.rule.pattern_kind);
        pending_files.push((path, Some((r.rule.rule_id.clone(), locator))));
    }
    for d in DECOY_FILES.choose_multiple(&mut rng, 4) {
        pending_files.push((d.to_string(), None));
    }
    pending_files.shuffle(&mut rng);

    let n_commits = rng.gen_range(3..12);
    let mut ts: i64 = 1_704_067_200 + rng.gen_range(0..20_000_000);
    for i in 0..n_commits {
        let subject = format!("c{i}: {}", sentence(&mut rng));
        let body = sentence(&mut rng);
        let mut author = ("Dana Developer", "dana@example.org");
        let kind = rng.gen_range(0..8);
        let message = match kind {
            0 | 1 => {
                let r = coauthor_rules.choose(&mut rng).unwrap();
                let key = random_case(&mut rng, "Co-authored-by");
                let value = coauthor_value(&mut rng, &r.rule.pattern, r.rule.pattern_kind);
                manifest
                    .commits
                    .insert((r.rule.rule_id.clone(), subject.clone()));
                let extra = if rng.gen_bool(0.5) {
                    "Signed-off-by: Dana Developer <dana@example.org>\n"
                } else {
                    ""
                };
                format!("{subject}\n\n{body}\n\n{extra}{key}: {value}\n")
            }
            2 => {
                // trailer-looking line in the body, not in the final block
                let r = coauthor_rules.choose(&mut rng).unwrap();
                let value = coauthor_value(&mut rng, &r.rule.pattern, r.rule.pattern_kind);
                format!("{subject}\n\nCo-authored-by: {value}\n\n{body}\n")
            }
            3 => {
                // final block mixing prose and a trailer is not a trailer block
                let r = coauthor_rules.choose(&mut rng).unwrap();
                let value = coauthor_value(&mut rng, &r.rule.pattern, r.rule.pattern_kind);
                format!("{subject}\n\n{body}\nCo-authored-by: {value}\n")
            }
            4 => {
                let r = author_rules.choose(&mut rng).unwrap();
                author = (r.rule.pattern.as_str(), "agent@example.net");
                manifest
                    .commits
                    .insert((r.rule.rule_id.clone(), subject.clone()));
                format!("{subject}\n\n{body}\n")
            }
            5 => {
                author = ("Claude Shannon", "claude.shannon@example.org");
                format!("{subject}\n")
            }
            _ => format!("{subject}\n\n{body}\n"),
        };
        let take = rng.gen_range(0..=pending_files.len().min(3));
        for (path, planted) in pending_files.drain(..take) {
            write_file(dir, &path, &format!("{path}\n"));
            if let Some(p) = planted {
                manifest.files.insert(p);
            }
        }
        if i == n_commits - 1 {
            for (path, planted) in pending_files.drain(..) {
                write_file(dir, &path, &format!("{path}\n"));
                if let Some(p) = planted {
                    manifest.files.insert(p);
                }
            }
        }
        write_file(dir, "history.txt", &format!("{i}\n"));
        commit_all(dir, author, ts, &message);
        ts += rng.gen_range(60..200_000);
    }
    Planted {
        path: dir.to_path_buf(),
        manifest,
    }
}

/// Independent reimplementation of the detection rules over raw git output.
pub struct Oracle {
    catalog: Catalog,
}

#[derive(Debug, PartialEq, Eq)]
pub struct OracleResult {
    /// (rule_id, locator)
    pub files: BTreeSet<(String, String)>,
    /// (rule_id, commit hash)
    pub commits: BTreeSet<(String, String)>,
    pub ignored_rules: BTreeSet<String>,
    /// commit hash -> subject, for relating to the manifest
    pub subjects: Vec<(String, String)>,
}

impl Oracle {
    pub fn new() -> Self {
        Oracle {
            catalog: builtin_catalog(),
        }
    }

    pub fn run(&self, repo: &Path) -> OracleResult {
        let (commits, subjects) = self.commits(repo);
        OracleResult {
            files: self.files(repo),
            commits,
            ignored_rules: self.ignored(repo),
            subjects,
        }
    }

    fn files(&self, repo: &Path) -> BTreeSet<(String, String)> {
        let listing = git(repo, &["ls-tree", "-r", "--name-only", "-z", "HEAD"]);
        let paths: Vec<&str> = listing.split('\0').filter(|p| !p.is_empty()).collect();
        let mut out = BTreeSet::new();
        for r in self.catalog.all_rules() {
            if r.rule.category != RuleCategory::FilePath {
                continue;
            }
            let esc = regex::escape(&r.rule.pattern);
            let re = match r.rule.pattern_kind {
                PatternKind::PathName => Regex::new(&format!("(?:^|/)({esc})$")).unwrap(),
                _ => Regex::new(&format!("(?:^|/)({esc})")).unwrap(),
            };
            for p in &paths {
                let Some(m) = re.captures(p).and_then(|c| c.get(1)) else {
                    continue;
                };
                let locator = match r.rule.pattern_kind {
                    PatternKind::PathName => p.to_string(),
                    _ if r.rule.pattern.ends_with('/') => p[..m.end()].to_string(),
                    _ => {
                        let end = p[m.end()..].find('/').map_or(p.len(), |i| m.end() + i);
                        p[..end].to_string()
                    }
                };
                out.insert((r.rule.rule_id.clone(), locator));
            }
        }
        out
    }

    fn commits(&self, repo: &Path) -> (RuleHits, Vec<(String, String)>) {
        let log = git(repo, &["log", "--format=%H%x00%an%x00%ae%x00%B%x01"]);
        let trailer_line = Regex::new(r"^[^\s:]+:").unwrap();
        let coauthor = Regex::new(r"(?i)^co-authored-by:\s*(.*?)\s*$").unwrap();
        let angle = Regex::new(r"^(.*?)\s*<([^>]*)>$").unwrap();
        let blank_split = Regex::new(r"\n[ \t]*\n").unwrap();
        let mut out = BTreeSet::new();
        let mut subjects = Vec::new();
        for rec in log.split('\x01') {
            let rec = rec.trim_start_matches('\n');
            if rec.is_empty() {
                continue;
            }
            let f: Vec<&str> = rec.splitn(4, '\0').collect();
            let (hash, an, ae, msg) = (f[0], f[1], f[2], f[3].trim_end());
            subjects.push((
                hash.to_string(),
                msg.lines().next().unwrap_or("").to_string(),
            ));
            let last = blank_split.split(msg).last().unwrap_or("");
            let lines: Vec<&str> = last.lines().collect();
            let is_block = !lines.is_empty() && lines.iter().all(|l| trailer_line.is_match(l));
            let mut identities: Vec<(String, String)> = Vec::new();
            if is_block {
                for l in &lines {
                    if let Some(c) = coauthor.captures(l) {
                        let v = c.get(1).unwrap().as_str();
                        match angle.captures(v) {
                            Some(a) => identities.push((a[1].to_string(), a[2].to_string())),
                            None => identities.push((v.to_string(), String::new())),
                        }
                    }
                }
            }
            for r in self.catalog.all_rules() {
                let p = r.rule.pattern.to_lowercase();
                let hit = |field: &str| {
                    let f = field.trim().to_lowercase();
                    match r.rule.pattern_kind {
                        PatternKind::Substring => !f.is_empty() && f.contains(&p),
                        _ => f == p || f.strip_suffix("[bot]") == Some(p.as_str()),
                    }
                };
                let matched = match r.rule.category {
                    RuleCategory::CommitCoauthor => {
                        identities.iter().any(|(n, e)| hit(n) || hit(e))
                    }
                    RuleCategory::CommitAuthor => hit(an) || hit(ae),
                    _ => false,
                };
                if matched {
                    out.insert((r.rule.rule_id.clone(), hash.to_string()));
                }
            }
        }
        (out, subjects)
    }

    /// Asks git which canonical agent-file paths the root ignore file hides.
    fn ignored(&self, repo: &Path) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for r in self.catalog.all_rules() {
            if r.rule.category != RuleCategory::FilePath {
                continue;
            }
            let probe = if r.rule.pattern.ends_with('/') {
                format!("{}x", r.rule.pattern)
            } else {
                r.rule.pattern.clone()
            };
            let status =
                git_output(repo, &["check-ignore", "--no-index", "-q", &probe], &[]).status;
            if status.code() == Some(0) {
                out.insert(r.rule.rule_id.clone());
            }
        }
        out
    }
}
