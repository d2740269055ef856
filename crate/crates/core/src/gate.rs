//! Checking a requirement set against an installed environment.
//!
//! Every requirement is evaluated; the report lists all problems at once. Any
//! unmet requirement gives the report the canonical failure id
//! [`UNMET_ERROR_ID`].

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::process::Command;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{ExtractError, VerifyError};
use crate::locator::{resolve, SearchPath, PATH_ENV};
use crate::query::PackageQueryResult;
use crate::requirements::{Requirement, RequirementSet};
use crate::sources::{ArchiveLayout, Installer};
use crate::starbang::Extractor;
use crate::version::{format_date, satisfies, Constraint, SemVer};

/// Error identifier attached to every failed check.
pub const UNMET_ERROR_ID: u32 = 2225;

/// Requirement names that refer to the host program instead of a package.
pub const HOST_NAMES: [&str; 2] = ["stata", "host"];

pub fn is_host_name(name: &str) -> bool {
    HOST_NAMES.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    VersionTooLow,
    VersionMismatch,
    DateTooOld,
    NotInstalled,
    NoVersionInfo,
}

impl Status {
    pub fn is_ok(self) -> bool {
        self == Status::Satisfied
    }

    /// Rank used to pick the report's overall status; higher is worse.
    pub fn severity(self) -> u8 {
        match self {
            Status::Satisfied => 0,
            Status::DateTooOld => 1,
            Status::VersionMismatch => 2,
            Status::VersionTooLow => 3,
            Status::NoVersionInfo => 4,
            Status::NotInstalled => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Satisfied => "satisfied",
            Status::VersionTooLow => "version_too_low",
            Status::VersionMismatch => "version_mismatch",
            Status::DateTooOld => "date_too_old",
            Status::NotInstalled => "not_installed",
            Status::NoVersionInfo => "no_version_info",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub requirement: Requirement,
    pub status: Status,
    pub found: Option<PackageQueryResult>,
    /// Extra context: the file lacking a version, an install error, ...
    pub note: Option<String>,
}

impl Verdict {
    fn new(requirement: &Requirement, status: Status, found: Option<PackageQueryResult>) -> Self {
        Verdict {
            requirement: requirement.clone(),
            status,
            found,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// One-line human description.
    pub fn describe(&self) -> String {
        let r = &self.requirement;
        let found = self.found.as_ref().map(|f| f.version.as_str()).unwrap_or("-");
        let mut line = match self.status {
            Status::Satisfied => format!("{r}: satisfied by {found}"),
            Status::VersionTooLow | Status::VersionMismatch => {
                format!("{r}: found version {found}")
            }
            Status::DateTooOld => {
                let date = self
                    .found
                    .as_ref()
                    .and_then(|f| f.version_date.as_deref())
                    .unwrap_or("no release date");
                format!("{r}: release dated {date}")
            }
            Status::NotInstalled => format!("{r}: not installed"),
            Status::NoVersionInfo => format!("{r}: no version information"),
        };
        if let Some(note) = &self.note {
            line.push_str(" (");
            line.push_str(note);
            line.push(')');
        }
        line
    }
}

#[derive(Debug, Clone, Default)]
pub struct HostEnvironment {
    pub search_path: SearchPath,
    pub host_version: Option<SemVer>,
}

impl HostEnvironment {
    pub fn new(search_path: SearchPath) -> Self {
        HostEnvironment {
            search_path,
            host_version: None,
        }
    }

    pub fn with_host_version(mut self, version: Option<SemVer>) -> Self {
        self.host_version = version;
        self
    }
}

/// Exit status of a project command run inside a sandbox.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandOutcome {
    pub command: String,
    pub exit_code: Option<i32>,
    pub success: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Summary {
    Ok,
    Failed(Status),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub verdicts: Vec<Verdict>,
    pub command: Option<CommandOutcome>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.status.is_ok())
    }

    /// Worst verdict status, `Satisfied` for an empty report.
    pub fn worst(&self) -> Status {
        self.verdicts
            .iter()
            .map(|v| v.status)
            .max_by_key(|s| s.severity())
            .unwrap_or(Status::Satisfied)
    }

    pub fn command_failed(&self) -> bool {
        self.command.as_ref().is_some_and(|c| !c.success)
    }

    pub fn summary(&self) -> Summary {
        match self.worst() {
            Status::Satisfied if !self.command_failed() => Summary::Ok,
            worst => Summary::Failed(worst),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.summary() == Summary::Ok
    }

    pub fn error_id(&self) -> Option<u32> {
        (!self.is_ok()).then_some(UNMET_ERROR_ID)
    }

    /// Multi-line failure text, `None` when everything passed.
    pub fn failure_message(&self) -> Option<String> {
        if self.is_ok() {
            return None;
        }
        let failed = self.failures().count();
        let mut msg = format!(
            "error {UNMET_ERROR_ID}: {failed} of {} requirement(s) not met",
            self.verdicts.len()
        );
        for v in self.failures() {
            msg.push_str("\n  ");
            msg.push_str(&v.describe());
        }
        if let Some(cmd) = self.command.as_ref().filter(|c| !c.success) {
            msg.push_str(&format!("\n  command `{}` failed", cmd.command));
            match (&cmd.exit_code, &cmd.error) {
                (_, Some(e)) => msg.push_str(&format!(": {e}")),
                (Some(code), None) => msg.push_str(&format!(" with exit status {code}")),
                (None, None) => msg.push_str(" (terminated by signal)"),
            }
        }
        Some(msg)
    }

    pub fn to_json(&self) -> Value {
        let verdicts: Vec<Value> = self
            .verdicts
            .iter()
            .map(|v| {
                json!({
                    "package": v.requirement.name,
                    "status": v.status,
                    "constraint": constraint_json(&v.requirement.constraint),
                    "min_date": v.requirement.min_date.as_ref().map(format_date),
                    "found": v.found,
                    "note": v.note,
                })
            })
            .collect();
        let summary = match self.summary() {
            Summary::Ok => "ok".to_string(),
            Summary::Failed(s) => s.as_str().to_string(),
        };
        let mut doc = json!({
            "summary": summary,
            "error_id": self.error_id(),
            "verdicts": verdicts,
        });
        if let Some(cmd) = &self.command {
            doc["command"] = serde_json::to_value(cmd).expect("serializable");
        }
        doc
    }
}

fn constraint_json(c: &Constraint) -> Value {
    match c {
        Constraint::Any => json!({"kind": "any", "version": null}),
        Constraint::Minimum(v) => json!({"kind": "minimum", "version": v.canonical()}),
        Constraint::Exact(v) => json!({"kind": "exact", "version": v.canonical()}),
    }
}

fn constraint_status(found: &SemVer, constraint: &Constraint) -> Status {
    if satisfies(found, constraint) {
        Status::Satisfied
    } else if matches!(constraint, Constraint::Minimum(_)) {
        Status::VersionTooLow
    } else {
        Status::VersionMismatch
    }
}

fn check_host(r: &Requirement, env: &HostEnvironment) -> Verdict {
    let Some(host) = env.host_version else {
        return Verdict::new(r, Status::NoVersionInfo, None).with_note("host version unknown; pass --host-version");
    };
    let found = PackageQueryResult::new(&r.name, &host, None, "<host>".to_string(), String::new());
    let mut status = constraint_status(&host, &r.constraint);
    if status.is_ok() && r.min_date.is_some() {
        status = Status::DateTooOld;
    }
    Verdict::new(r, status, Some(found))
}

/// Evaluate one requirement.
pub fn check_one(r: &Requirement, env: &HostEnvironment, extractor: &Extractor) -> Verdict {
    if is_host_name(&r.name) {
        return check_host(r, env);
    }
    let Some(path) = resolve(&r.name, &env.search_path) else {
        return Verdict::new(r, Status::NotInstalled, None);
    };
    let record = match extractor.extract_from_file(&path, &r.name) {
        Ok(record) => record,
        Err(ExtractError::NoMatch { path }) => {
            return Verdict::new(r, Status::NoVersionInfo, None)
                .with_note(format!("no starbang version in {}", path.display()));
        }
        Err(e @ ExtractError::Io { .. }) => {
            return Verdict::new(r, Status::NoVersionInfo, None).with_note(e.to_string());
        }
    };
    let found = PackageQueryResult::from_record(&r.name, &record);
    let mut status = constraint_status(&record.record.version, &r.constraint);
    if status.is_ok() {
        if let Some(min) = &r.min_date {
            if record.record.date.is_none_or(|d| d < *min) {
                status = Status::DateTooOld;
            }
        }
    }
    Verdict::new(r, status, Some(found))
}

/// Evaluate every requirement; verdicts keep the set's order.
pub fn check_all(set: &RequirementSet, env: &HostEnvironment, extractor: &Extractor) -> Report {
    Report {
        verdicts: set
            .requirements
            .par_iter()
            .map(|r| check_one(r, env, extractor))
            .collect(),
        command: None,
    }
}

/// Options for [`sandbox_verify`].
#[derive(Debug, Clone, Default)]
pub struct SandboxOptions {
    /// Shell command run with the sandbox as its only search path.
    pub command: Option<String>,
    /// Clear a non-empty work directory instead of refusing.
    pub replace: bool,
}

fn prepare_workdir(workdir: &Path, replace: bool) -> Result<(), VerifyError> {
    let io_err = |source: io::Error| VerifyError::Io {
        path: workdir.to_path_buf(),
        source,
    };
    if workdir.exists() {
        let mut entries = fs::read_dir(workdir).map_err(io_err)?.peekable();
        if entries.peek().is_some() {
            if !replace {
                return Err(VerifyError::WorkdirNotEmpty(workdir.to_path_buf()));
            }
            for entry in entries {
                let path = entry.map_err(io_err)?.path();
                if path.is_dir() {
                    fs::remove_dir_all(&path).map_err(io_err)?;
                } else {
                    fs::remove_file(&path).map_err(io_err)?;
                }
            }
        }
    }
    fs::create_dir_all(workdir).map_err(io_err)
}

fn run_command(command: &str, workdir: &Path) -> CommandOutcome {
    let mut cmd = if cfg!(windows) {
        let mut c = Command::new("cmd");
        c.arg("/C").arg(command);
        c
    } else {
        let mut c = Command::new("sh");
        c.arg("-c").arg(command);
        c
    };
    cmd.env(PATH_ENV, workdir);
    match cmd.status() {
        Ok(status) => CommandOutcome {
            command: command.to_string(),
            exit_code: status.code(),
            success: status.success(),
            error: None,
        },
        Err(e) => CommandOutcome {
            command: command.to_string(),
            exit_code: None,
            success: false,
            error: Some(e.to_string()),
        },
    }
}

/// Install every requirement into an empty `workdir`, then re-check with
/// `workdir` as the only search path and optionally run a project command
/// against it.
pub fn sandbox_verify(
    set: &RequirementSet,
    workdir: &Path,
    options: &SandboxOptions,
    installer: &Installer,
    extractor: &Extractor,
    host_version: Option<SemVer>,
) -> Result<Report, VerifyError> {
    prepare_workdir(workdir, options.replace)?;

    let mut install_errors = vec![None; set.len()];
    for (slot, r) in install_errors.iter_mut().zip(set.iter()) {
        if is_host_name(&r.name) {
            continue;
        }
        let result = ArchiveLayout::for_requirement(r)
            .and_then(|layout| installer.install(&r.name, &layout, workdir));
        if let Err(e) = result {
            *slot = Some(format!("install failed: {e}"));
        }
    }

    let env = HostEnvironment::new(SearchPath::new([workdir])).with_host_version(host_version);
    let mut report = check_all(set, &env, extractor);
    for (verdict, error) in report.verdicts.iter_mut().zip(install_errors) {
        if error.is_some() {
            verdict.note = error;
        }
    }
    report.command = options.command.as_deref().map(|c| run_command(c, workdir));
    Ok(report)
}
