//! Adapter over the `git` executable: history, trees and ignore files.

use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use crate::commitscan::{CommitRecord, Identity};
use crate::treescan::TreeEntry;

#[derive(Debug, Error)]
pub enum GitError {
    #[error("`{0}` is not a readable git repository")]
    NotARepository(PathBuf),
    #[error("could not run git: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("git {command} failed: {stderr}")]
    Command { command: String, stderr: String },
    #[error("unexpected git output: {0}")]
    Parse(String),
}

/// A local repository accessed through the `git` command line.
#[derive(Debug, Clone)]
pub struct GitRepo {
    path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadInfo {
    pub hash: String,
    pub timestamp: i64,
}

const FIELD: char = '\x1f';
const RECORD: char = '\x1e';

impl GitRepo {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GitError> {
        let path = path.as_ref().to_path_buf();
        if !path.is_dir() {
            return Err(GitError::NotARepository(path));
        }
        let repo = GitRepo { path };
        let out = repo.raw(&["rev-parse", "--git-dir"])?;
        if !out.status.success() {
            return Err(GitError::NotARepository(repo.path));
        }
        Ok(repo)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn raw(&self, args: &[&str]) -> Result<std::process::Output, GitError> {
        Ok(Command::new("git")
            .arg("-C")
            .arg(&self.path)
            .args(["-c", "core.quotepath=off"])
            .args(args)
            .output()?)
    }

    fn run(&self, args: &[&str]) -> Result<String, GitError> {
        let out = self.raw(args)?;
        if !out.status.success() {
            return Err(GitError::Command {
                command: args.join(" "),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    /// `None` for a repository without commits.
    pub fn head(&self) -> Result<Option<HeadInfo>, GitError> {
        let out = self.raw(&["log", "-1", "--format=%H%x1f%ct", "HEAD"])?;
        if !out.status.success() {
            return Ok(None);
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let (hash, ts) = text
            .trim()
            .split_once(FIELD)
            .ok_or_else(|| GitError::Parse(text.to_string()))?;
        Ok(Some(HeadInfo {
            hash: hash.to_string(),
            timestamp: ts.parse().map_err(|_| GitError::Parse(ts.to_string()))?,
        }))
    }

    /// Every commit reachable from HEAD, newest first.
    pub fn commits(&self) -> Result<Vec<CommitRecord>, GitError> {
        if self.head()?.is_none() {
            return Ok(Vec::new());
        }
        let text = self.run(&[
            "log",
            "HEAD",
            "--format=%H%x1f%an%x1f%ae%x1f%cn%x1f%ce%x1f%at%x1f%P%x1f%B%x1e",
        ])?;
        text.split(RECORD)
            .map(|r| r.trim_start_matches('\n'))
            .filter(|r| !r.is_empty())
            .map(parse_commit)
            .collect()
    }

    /// Files and directories of the HEAD tree.
    pub fn head_tree(&self) -> Result<Vec<TreeEntry>, GitError> {
        if self.head()?.is_none() {
            return Ok(Vec::new());
        }
        let text = self.run(&["ls-tree", "-r", "-t", "-z", "--full-tree", "HEAD"])?;
        let mut entries = Vec::new();
        for rec in text.split('\0').filter(|r| !r.is_empty()) {
            let (meta, path) = rec
                .split_once('\t')
                .ok_or_else(|| GitError::Parse(rec.to_string()))?;
            let entry = match meta.split_whitespace().nth(1) {
                Some("tree") => TreeEntry::dir(path),
                // submodules are treated as opaque files
                Some("blob") | Some("commit") => TreeEntry::file(path),
                _ => return Err(GitError::Parse(rec.to_string())),
            };
            entries.push(entry.map_err(|e| GitError::Parse(e.to_string()))?);
        }
        Ok(entries)
    }

    /// Paths added by each commit reachable from HEAD, oldest first, with the
    /// author timestamp of the adding commit.
    pub fn added_paths(&self) -> Result<Vec<(i64, Vec<String>)>, GitError> {
        if self.head()?.is_none() {
            return Ok(Vec::new());
        }
        let text = self.run(&[
            "log",
            "HEAD",
            "--reverse",
            "--diff-filter=A",
            "--name-only",
            "-z",
            "--format=%x1e%H%x1f%at",
        ])?;
        let mut out = Vec::new();
        for rec in text.split(RECORD).filter(|r| !r.is_empty()) {
            let (header, files) = rec.split_once('\0').unwrap_or((rec, ""));
            let ts = header
                .split_once(FIELD)
                .and_then(|(_, ts)| ts.trim().parse::<i64>().ok())
                .ok_or_else(|| GitError::Parse(header.to_string()))?;
            let paths = files
                .trim_start_matches('\n')
                .split('\0')
                .filter(|p| !p.is_empty())
                .map(str::to_string)
                .collect();
            out.push((ts, paths));
        }
        Ok(out)
    }

    /// Root ignore file lines: from HEAD, else from the working tree.
    pub fn root_ignore_lines(&self) -> Result<Vec<String>, GitError> {
        let out = self.raw(&["show", "HEAD:.gitignore"])?;
        let text = if out.status.success() {
            String::from_utf8_lossy(&out.stdout).into_owned()
        } else {
            std::fs::read_to_string(self.path.join(".gitignore")).unwrap_or_default()
        };
        Ok(text.lines().map(str::to_string).collect())
    }
}

fn parse_commit(rec: &str) -> Result<CommitRecord, GitError> {
    let fields: Vec<&str> = rec.splitn(8, FIELD).collect();
    if fields.len() != 8 {
        return Err(GitError::Parse(rec.chars().take(80).collect()));
    }
    let timestamp = fields[5]
        .parse()
        .map_err(|_| GitError::Parse(fields[5].to_string()))?;
    Ok(CommitRecord {
        hash: fields[0].to_string(),
        author: Identity::new(fields[1], fields[2]),
        committer: Identity::new(fields[3], fields[4]),
        timestamp,
        message: fields[7].trim_end_matches('\n').to_string(),
        parents: fields[6].split_whitespace().map(str::to_string).collect(),
    })
}
