//! Command-line front end: scan local repositories, mine hosted ones, count
//! search matches, emit exclusion lists and manage the heuristic catalog.

mod commands;
mod live;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use agentscan::ghminer::GhError;
use agentscan::git::GitError;
use agentscan::ReportFormat;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "agentscan",
    version,
    about = "Detect coding-agent traces in repositories"
)]
struct Cli {
    #[command(flatten)]
    config: Config,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Config {
    /// Heuristic catalog file (default: the builtin catalog)
    #[arg(long, global = true, value_name = "PATH")]
    pub catalog: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the payload here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Evaluate rule validity windows at this date (default: today, UTC)
    #[arg(long = "as-of", global = true, value_name = "YYYY-MM-DD", value_parser = parse_date)]
    pub as_of: Option<NaiveDate>,
    /// Also grep whole commit messages for co-authored-by lines
    #[arg(long, global = true)]
    pub lax: bool,
    /// Worker threads for commit matching
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Text => ReportFormat::Text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Commits,
    Prs,
    Both,
}

/// Where platform API responses come from.
#[derive(Debug, Clone, Args)]
pub struct ApiSource {
    /// Serve API responses from recordings in this directory instead of the network
    #[arg(long, value_name = "DIR", conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Save every API response into this directory
    #[arg(long, value_name = "DIR")]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a local git repository's history and HEAD tree
    Scan {
        /// Path inside a git working tree
        repo: PathBuf,
        /// Match files in every revision and report when each first appeared
        #[arg(long)]
        all_revisions: bool,
        /// Identifier written to the report (default: directory name)
        #[arg(long)]
        repo_id: Option<String>,
    },
    /// Mine pull requests and issues of a hosted repository
    Mine {
        /// Repository as owner/name
        slug: String,
        /// Also scan this local clone and fuse its evidence into the report
        #[arg(long, value_name = "PATH")]
        repo: Option<PathBuf>,
        #[command(flatten)]
        api: ApiSource,
    },
    /// Approximate platform-wide match counts per heuristic
    Counts {
        /// Rule ids or agent ids
        ids: Vec<String>,
        /// Every searchable rule in the catalog
        #[arg(long, conflicts_with = "ids")]
        all: bool,
        #[command(flatten)]
        api: ApiSource,
    },
    /// List agent-attributed commits and pull requests for exclusion
    Filter {
        /// Path inside a git working tree
        repo: PathBuf,
        /// Which identifiers to list
        #[arg(long, value_enum, default_value_t = Emit::Both)]
        emit: Emit,
        /// Take pull-request evidence from this hosted repository (owner/name)
        #[arg(long, value_name = "OWNER/NAME")]
        github: Option<String>,
        /// Identifier written to the output (default: directory name)
        #[arg(long)]
        repo_id: Option<String>,
        #[command(flatten)]
        api: ApiSource,
    },
    /// Validate, list or export the heuristic catalog
    Catalog {
        #[arg(value_enum)]
        action: CatalogAction,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CatalogAction {
    Validate,
    List,
    Export,
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("expected YYYY-MM-DD: {e}"))
}

/// Exit status for a failed command.
#[derive(Debug)]
pub struct Exit(pub u8);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::error::Error for Exit {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(Exit(code)) = cause.downcast_ref::<Exit>() {
            return *code;
        }
        if let Some(GitError::NotARepository(_)) = cause.downcast_ref::<GitError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<GhError>() {
            if e.is_access_failure() {
                return 3;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    // usage errors exit 1 so that 2 always means "not a repository"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Scan {
            repo,
            all_revisions,
            repo_id,
        } => commands::scan(&cli.config, &repo, all_revisions, repo_id),
        Command::Mine { slug, repo, api } => {
            commands::mine(&cli.config, &slug, repo.as_deref(), &api)
        }
        Command::Counts { ids, all, api } => commands::counts(&cli.config, &ids, all, &api),
        Command::Filter {
            repo,
            emit,
            github,
            repo_id,
            api,
        } => commands::filter(&cli.config, &repo, emit, github.as_deref(), repo_id, &api),
        Command::Catalog { action } => match action {
            CatalogAction::Validate => commands::catalog_validate(&cli.config),
            CatalogAction::List => commands::catalog_list(&cli.config),
            CatalogAction::Export => commands::catalog_export(&cli.config),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            if !err.is::<Exit>() {
                let _ = writeln!(std::io::stderr(), "agentscan: {err:#}");
            }
            ExitCode::from(code)
        }
    }
}
