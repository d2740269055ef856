//! Generating a requirements file from what is installed.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use walkdir::WalkDir;

use crate::error::{ExtractError, SetupError};
use crate::gate::is_host_name;
use crate::locator::{letter_dir, SearchPath};
use crate::query::PackageQueryResult;
use crate::requirements::{is_valid_name, serialize, Origin, Requirement, RequirementSet};
use crate::sources::parse_pkg_descriptor;
use crate::starbang::Extractor;
use crate::version::{Constraint, ReleaseDate, SemVer};

pub const DEFAULT_REQUIREMENTS_FILE: &str = "requirements.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unversioned {
    pub package: String,
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Installed {
    /// Sorted by package name.
    pub packages: Vec<PackageQueryResult>,
    /// Sorted by package name.
    pub unversioned: Vec<Unversioned>,
    /// Unreadable entries encountered while walking.
    pub errors: Vec<String>,
}

/// Candidate main files under `root`: flat `.ado` files and `.ado` files in
/// the matching letter subdirectory. Flat files shadow letter-tree ones.
fn main_files(root: &Path, errors: &mut Vec<String>) -> BTreeMap<String, PathBuf> {
    let mut flat = BTreeMap::new();
    let mut lettered = BTreeMap::new();
    let mut helpers = HashSet::new();
    let mut owners = HashSet::new();

    for entry in WalkDir::new(root).min_depth(1).max_depth(2).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                errors.push(e.to_string());
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        if entry.depth() == 2 {
            let parent = path.parent().and_then(|p| p.file_name()).and_then(|n| n.to_str());
            if parent != Some(letter_dir(stem).as_str()) {
                continue;
            }
        }
        match ext {
            "ado" => {
                let slot = if entry.depth() == 1 { &mut flat } else { &mut lettered };
                slot.insert(stem.to_string(), path.to_path_buf());
            }
            "pkg" => match fs::read(path) {
                Ok(bytes) => {
                    if let Ok(d) = parse_pkg_descriptor(&String::from_utf8_lossy(&bytes), stem) {
                        owners.insert(stem.to_string());
                        helpers.extend(
                            d.file_names()
                                .filter_map(|f| f.strip_suffix(".ado"))
                                .filter(|s| *s != stem)
                                .map(str::to_string),
                        );
                    }
                }
                Err(e) => errors.push(format!("{}: {e}", path.display())),
            },
            _ => {}
        }
    }

    lettered.extend(flat);
    lettered.retain(|stem, _| !helpers.contains(stem) || owners.contains(stem));
    lettered
}

/// Every package with a main `.ado` file under `root`, with its version.
pub fn enumerate_installed(root: &Path, extractor: &Extractor) -> Installed {
    let mut errors = Vec::new();
    if let Err(e) = fs::read_dir(root) {
        errors.push(format!("{}: {e}", root.display()));
        return Installed {
            errors,
            ..Installed::default()
        };
    }
    let files: Vec<(String, PathBuf)> = main_files(root, &mut errors).into_iter().collect();

    enum Outcome {
        Found(PackageQueryResult),
        Missing(Unversioned),
        Failed(String),
    }
    let outcomes: Vec<Outcome> = files
        .par_iter()
        .map(|(pkg, path)| {
            let unversioned = |reason: &str| {
                Outcome::Missing(Unversioned {
                    package: pkg.clone(),
                    path: path.clone(),
                    reason: reason.to_string(),
                })
            };
            if !is_valid_name(pkg) || is_host_name(pkg) {
                return unversioned("not a valid package name");
            }
            match extractor.extract_from_file(path, pkg) {
                Ok(found) => Outcome::Found(PackageQueryResult::from_record(pkg, &found)),
                Err(ExtractError::NoMatch { .. }) => unversioned("no version information"),
                Err(e @ ExtractError::Io { .. }) => Outcome::Failed(e.to_string()),
            }
        })
        .collect();

    let mut installed = Installed {
        errors,
        ..Installed::default()
    };
    for outcome in outcomes {
        match outcome {
            Outcome::Found(q) => installed.packages.push(q),
            Outcome::Missing(u) => installed.unversioned.push(u),
            Outcome::Failed(e) => installed.errors.push(e),
        }
    }
    installed
}

/// Enumerate every directory of a search path; earlier directories shadow
/// later ones, as in resolution.
pub fn enumerate_search_path(sp: &SearchPath, extractor: &Extractor) -> Installed {
    let mut merged = Installed::default();
    let mut seen = HashSet::new();
    for dir in &sp.directories {
        let one = enumerate_installed(dir, extractor);
        for q in one.packages {
            if seen.insert(q.package.clone()) {
                merged.packages.push(q);
            }
        }
        for u in one.unversioned {
            if seen.insert(u.package.clone()) {
                merged.unversioned.push(u);
            }
        }
        merged.errors.extend(one.errors);
    }
    merged.packages.sort_by(|a, b| a.package.cmp(&b.package));
    merged.unversioned.sort_by(|a, b| a.package.cmp(&b.package));
    merged
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SetupOptions {
    /// Write `>=` lines instead of `==`.
    pub minimum: bool,
    /// Start with a `stata >= <host version>` line.
    pub host_line: bool,
    pub host_version: Option<SemVer>,
}

/// Render installed packages as a requirements file.
pub fn render(installed: &Installed, options: &SetupOptions, date: &ReleaseDate) -> Result<String, SetupError> {
    let mut requirements = Vec::new();
    if options.host_line {
        let host = options.host_version.ok_or(SetupError::NoHostVersion)?;
        requirements.push(Requirement::new("stata", Constraint::Minimum(host)));
    }
    for q in &installed.packages {
        let v = q.semver();
        let constraint = if options.minimum {
            Constraint::Minimum(v)
        } else {
            Constraint::Exact(v)
        };
        requirements.push(Requirement::new(&q.package, constraint));
    }
    let set = RequirementSet {
        requirements,
        origin: Origin::Inline,
    };
    let mut out = serialize(&set, date);
    for u in &installed.unversioned {
        out.push_str(&format!("* {}: {} ({})\n", u.package, u.reason, u.path.display()));
    }
    Ok(out)
}

pub fn generate(
    sp: &SearchPath,
    options: &SetupOptions,
    extractor: &Extractor,
    date: &ReleaseDate,
) -> Result<String, SetupError> {
    render(&enumerate_search_path(sp, extractor), options, date)
}

/// Write `content` to `path`, refusing to overwrite unless `replace`.
pub fn save(content: &str, path: &Path, replace: bool) -> Result<(), SetupError> {
    let io_err = |source: io::Error| SetupError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut opts = OpenOptions::new();
    opts.write(true);
    if replace {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let mut file = opts.open(path).map_err(|e| {
        if e.kind() == io::ErrorKind::AlreadyExists {
            SetupError::Exists(path.to_path_buf())
        } else {
            io_err(e)
        }
    })?;
    file.write_all(content.as_bytes()).map_err(io_err)
}
