//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reqgate::{parse_date, parse_version, ReleaseDate, SemVer};

macro_rules! requirement_help {
    () => {
        "Requirements are written `name [op version] [@>=date]`, where op is `==`
(exact), `>=` or `=>` (minimum); `eq:` and `ge:` are unquoted alternatives,
e.g. `estout ge:3.23`. A bare version (`mdesc 2.1`) means a minimum."
    };
}

const REQUIREMENT_HELP: &str = requirement_help!();

const AFTER_HELP: &str = concat!(
    requirement_help!(),
    "

Exit codes: 0 all satisfied; 10 requirement unmet (error 2225);
11 package not found and 12 no version information (`which`, `parse-line`);
2 requirements or override syntax error; 1 usage or I/O error."
);

#[derive(Debug, Parser)]
#[command(name = "reqgate", version, about = "Check, install and pin packages versioned by header comments", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Directory to search for installed packages; repeat to add more, in
    /// order. Defaults to the REQGATE_PATH path list.
    #[arg(long = "adopath", value_name = "DIR", global = true)]
    pub adopath: Vec<PathBuf>,

    /// Override rule table (TSV of package and pattern). Defaults to
    /// overrides.tsv beside the executable, then the built-in table.
    #[arg(long, value_name = "PATH", env = "REQGATE_OVERRIDES", global = true)]
    pub overrides: Option<PathBuf>,

    /// Archive used for requirements without from(): a URL or directory.
    #[arg(long, value_name = "URL|DIR", env = "REQGATE_ARCHIVE", global = true)]
    pub default_archive: Option<String>,

    /// Version of the host platform, checked by `stata`/`host` requirements.
    #[arg(long, value_name = "V", value_parser = parse_semver, env = "REQGATE_HOST_VERSION", global = true)]
    pub host_version: Option<SemVer>,

    /// Emit a single JSON document on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Number of lines scanned for starbang lines at the top of each file.
    #[arg(long, value_name = "N", default_value_t = 25, value_parser = clap::value_parser!(u64).range(1..), global = true)]
    pub scan_limit: u64,

    /// Retries for failed HTTP transfers.
    #[arg(long, value_name = "N", default_value_t = 0, global = true)]
    pub retries: u32,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check requirements against the search path; silent when all hold.
    #[command(after_help = REQUIREMENT_HELP)]
    Check(CheckArgs),
    /// Check, install what is missing or outdated into the first --adopath
    /// directory, then check again.
    #[command(after_help = REQUIREMENT_HELP)]
    Install(InstallArgs),
    /// Write a requirements file pinning the installed packages.
    Setup(SetupArgs),
    /// Show the version of an installed package.
    Which(WhichArgs),
    /// Show how a single starbang line is parsed.
    ParseLine(ParseLineArgs),
    /// Install requirements into an empty directory and check them there.
    #[command(after_help = REQUIREMENT_HELP)]
    Verify(VerifyArgs),
    /// Score extraction against a ground-truth corpus.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct RequirementArgs {
    /// Inline requirements, e.g. `mdesc 2.1 estout ">=" 3.23`.
    #[arg(value_name = "REQS", conflicts_with = "using")]
    pub reqs: Vec<String>,

    /// Read requirements from a file.
    #[arg(long, value_name = "FILE")]
    pub using: Option<PathBuf>,

    /// Require every package without its own date to be released on or
    /// after this date (e.g. 01jan2020).
    #[arg(long, value_name = "DATE", value_parser = parse_release_date)]
    pub min_date: Option<ReleaseDate>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub requirements: RequirementArgs,
}

#[derive(Debug, Args)]
pub struct InstallArgs {
    #[command(flatten)]
    pub requirements: RequirementArgs,

    /// Source for requirements without their own from(): URL, directory or SSC.
    #[arg(long, value_name = "LOC")]
    pub from: Option<String>,
}

#[derive(Debug, Args)]
pub struct SetupArgs {
    /// File written by --save.
    #[arg(long, value_name = "FILE", default_value = reqgate::setup::DEFAULT_REQUIREMENTS_FILE)]
    pub using: PathBuf,

    /// Write the file instead of printing it.
    #[arg(long)]
    pub save: bool,

    /// Overwrite an existing file.
    #[arg(long, requires = "save")]
    pub replace: bool,

    /// Pin minimum versions (`>=`) instead of exact ones (`==`).
    #[arg(long)]
    pub minimum: bool,

    /// Start with a requirement on the host version (needs --host-version).
    #[arg(long)]
    pub host: bool,
}

#[derive(Debug, Args)]
pub struct WhichArgs {
    pub package: String,
}

#[derive(Debug, Args)]
pub struct ParseLineArgs {
    /// Also show the hint and override rules considered.
    #[arg(long)]
    pub debug: bool,

    /// The line, including its leading `*!`.
    #[arg(value_name = "LINE", allow_hyphen_values = true)]
    pub line: String,

    /// Package name for name-anchored rules; defaults to the first word.
    #[arg(long, value_name = "PKG")]
    pub hint: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Requirements file to verify.
    #[arg(long, value_name = "FILE")]
    pub using: PathBuf,

    /// Empty (or missing) directory to install into.
    #[arg(long, value_name = "DIR")]
    pub workdir: PathBuf,

    /// Shell command run afterwards with REQGATE_PATH set to the work directory.
    #[arg(long, value_name = "CMD")]
    pub run: Option<String>,

    /// Clear a non-empty work directory first.
    #[arg(long)]
    pub replace: bool,

    /// Source for requirements without their own from(): URL, directory or SSC.
    #[arg(long, value_name = "LOC")]
    pub from: Option<String>,

    /// As for `check`.
    #[arg(long, value_name = "DATE", value_parser = parse_release_date)]
    pub min_date: Option<ReleaseDate>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory holding `<package>.ado` files.
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,

    /// CSV of package, expected_version and optional weight columns.
    #[arg(long, value_name = "CSV")]
    pub truth: PathBuf,

    /// Output format; --json implies json.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn parse_semver(s: &str) -> Result<SemVer, String> {
    parse_version(s).map_err(|e| e.to_string())
}

fn parse_release_date(s: &str) -> Result<ReleaseDate, String> {
    parse_date(s).ok_or_else(|| format!("`{s}` is not a date like 01jan2020 or 2020-01-01"))
}
