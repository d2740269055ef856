//! Fetching packages from archives and installing them into a letter tree.
//!
//! An archive is a directory or an HTTP(S) base URL holding `<pkg>.pkg`
//! descriptors next to the files they list. The default archive uses the
//! letter-tree layout (`<base>/<first letter>/<pkg>.pkg`); locations given
//! through `from()` are flat (`<base>/<pkg>.pkg`). Listed files are resolved
//! relative to the descriptor's directory.
//!
//! Descriptor format, one entry per line:
//!
//! ```text
//! d <description line>      first `d` line becomes the title
//! f <relative/file/path>    a file to install (`F` also accepted)
//! ```
//!
//! Other line types are ignored.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rayon::prelude::*;
use url::Url;

use crate::error::SourceError;
use crate::gate::{check_all, is_host_name, HostEnvironment, Report};
use crate::locator::letter_dir;
use crate::requirements::{Requirement, RequirementSet, SourceLocation};
use crate::starbang::Extractor;

pub const ARCHIVE_ENV: &str = "REQGATE_ARCHIVE";

const HTTP_TIMEOUT: Duration = Duration::from_secs(30);
const MAX_REDIRECTS: u32 = 5;
const MAX_FILE_BYTES: u64 = 256 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageDescriptor {
    pub name: String,
    pub title: Option<String>,
    pub files: Vec<String>,
}

impl PackageDescriptor {
    /// Installed file name of each entry (the last path component).
    pub fn file_names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|f| file_name(f))
    }
}

fn file_name(rel: &str) -> &str {
    rel.rsplit(['/', '\\']).next().unwrap_or(rel)
}

fn check_relative(path: &str) -> Result<(), String> {
    if path.is_empty() {
        return Err("empty file path".to_string());
    }
    let bytes = path.as_bytes();
    let absolute = path.starts_with(['/', '\\'])
        || (bytes.len() >= 2 && bytes[1] == b':' && bytes[0].is_ascii_alphabetic());
    if absolute {
        return Err(format!("absolute path `{path}` not allowed"));
    }
    if path.split(['/', '\\']).any(|c| c == "..") {
        return Err(format!("path traversal in `{path}`"));
    }
    if matches!(file_name(path), "" | ".") {
        return Err(format!("`{path}` does not name a file"));
    }
    Ok(())
}

pub fn parse_pkg_descriptor(content: &str, name: &str) -> Result<PackageDescriptor, SourceError> {
    let bad = |reason: String| SourceError::Descriptor {
        package: name.to_string(),
        reason,
    };
    let mut title = None;
    let mut files = Vec::new();
    let content = content.strip_prefix('\u{feff}').unwrap_or(content);
    for line in content.lines() {
        let line = line.trim_end_matches('\r');
        let mut chars = line.chars();
        let kind = chars.next();
        let rest = chars.as_str();
        if !rest.is_empty() && !rest.starts_with([' ', '\t']) {
            continue;
        }
        match kind {
            Some('d') if title.is_none() => {
                let text = rest.trim();
                if !text.is_empty() {
                    title = Some(text.to_string());
                }
            }
            Some('f' | 'F') => {
                let path = rest.trim();
                check_relative(path).map_err(bad)?;
                files.push(path.to_string());
            }
            _ => {}
        }
    }
    if files.is_empty() {
        return Err(bad("no `f` lines".to_string()));
    }
    let mut seen = HashSet::new();
    for f in &files {
        if !seen.insert(file_name(f)) {
            return Err(bad(format!("file name `{}` listed twice", file_name(f))));
        }
    }
    Ok(PackageDescriptor {
        name: name.to_string(),
        title,
        files,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutStyle {
    /// `<base>/<first letter>/<pkg>.pkg`
    LetterTree,
    /// `<base>/<pkg>.pkg`
    Flat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveLayout {
    pub base: SourceLocation,
    pub style: LayoutStyle,
}

impl ArchiveLayout {
    pub fn new(base: SourceLocation, style: LayoutStyle) -> Self {
        ArchiveLayout { base, style }
    }

    /// Default archive in letter-tree style, explicit locations flat.
    pub fn for_source(source: &SourceLocation) -> Self {
        let style = match source {
            SourceLocation::DefaultArchive => LayoutStyle::LetterTree,
            _ => LayoutStyle::Flat,
        };
        ArchiveLayout::new(source.clone(), style)
    }

    pub fn for_requirement(r: &Requirement) -> Result<Self, SourceError> {
        Ok(Self::for_source(r.source.as_ref().unwrap_or(&SourceLocation::DefaultArchive)))
    }

    /// Directory of `pkg`'s descriptor relative to the base, with trailing `/`.
    fn package_dir(&self, pkg: &str) -> String {
        match self.style {
            LayoutStyle::LetterTree => format!("{}/", letter_dir(pkg)),
            LayoutStyle::Flat => String::new(),
        }
    }
}

/// A fetched package held entirely in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedPackage {
    pub descriptor: PackageDescriptor,
    pub descriptor_bytes: Vec<u8>,
    /// `(installed file name, contents)` in descriptor order.
    pub files: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstallRecord {
    pub package: String,
    pub files: Vec<PathBuf>,
}

enum Base {
    Dir(PathBuf),
    Http(Url),
}

/// Fetches and installs packages. Counts every [`Installer::fetch`] call.
pub struct Installer {
    default_archive: Option<SourceLocation>,
    retries: u32,
    agent: ureq::Agent,
    fetches: AtomicUsize,
}

impl std::fmt::Debug for Installer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Installer")
            .field("default_archive", &self.default_archive)
            .field("retries", &self.retries)
            .field("fetches", &self.fetch_count())
            .finish()
    }
}

impl Installer {
    /// `default_archive` backs requirements without `from()`; it must be a
    /// URL or directory.
    pub fn new(default_archive: Option<SourceLocation>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(HTTP_TIMEOUT))
            .max_redirects(MAX_REDIRECTS)
            .http_status_as_error(false)
            .build()
            .into();
        Installer {
            default_archive: default_archive.filter(|s| *s != SourceLocation::DefaultArchive),
            retries: 0,
            agent,
            fetches: AtomicUsize::new(0),
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn fetch_count(&self) -> usize {
        self.fetches.load(Ordering::SeqCst)
    }

    fn base(&self, location: &SourceLocation) -> Result<Base, SourceError> {
        let location = match location {
            SourceLocation::DefaultArchive => self.default_archive.as_ref().ok_or_else(|| {
                SourceError::BadLocation(format!(
                    "no default archive configured (use --default-archive or {ARCHIVE_ENV})"
                ))
            })?,
            other => other,
        };
        match location {
            SourceLocation::Directory(p) => Ok(Base::Dir(p.clone())),
            SourceLocation::Url(u) => {
                let mut u = u.clone();
                if !u.path().ends_with('/') {
                    let path = format!("{}/", u.path());
                    u.set_path(&path);
                }
                Ok(Base::Http(u))
            }
            SourceLocation::DefaultArchive => unreachable!("filtered in Installer::new"),
        }
    }

    /// Read `rel` under `base`. `Ok(None)` means the archive does not have it.
    fn get(&self, base: &Base, rel: &str) -> Result<Option<Vec<u8>>, SourceError> {
        match base {
            Base::Dir(dir) => {
                let path = dir.join(rel);
                match fs::read(&path) {
                    Ok(bytes) => Ok(Some(bytes)),
                    Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
                    Err(e) => Err(SourceError::Fetch {
                        location: path.display().to_string(),
                        reason: e.to_string(),
                    }),
                }
            }
            Base::Http(url) => {
                let target = url.join(rel).map_err(|e| SourceError::Fetch {
                    location: format!("{url}{rel}"),
                    reason: e.to_string(),
                })?;
                let mut attempt = 0;
                loop {
                    match self.http_get(&target) {
                        Err(HttpFailure::Retryable(reason)) if attempt < self.retries => {
                            attempt += 1;
                            log_retry(&target, &reason);
                        }
                        Err(HttpFailure::Retryable(reason) | HttpFailure::Fatal(reason)) => {
                            return Err(SourceError::Fetch {
                                location: target.to_string(),
                                reason,
                            })
                        }
                        Ok(body) => return Ok(body),
                    }
                }
            }
        }
    }

    fn http_get(&self, url: &Url) -> Result<Option<Vec<u8>>, HttpFailure> {
        let mut response = self
            .agent
            .get(url.as_str())
            .call()
            .map_err(|e| HttpFailure::Retryable(e.to_string()))?;
        let status = response.status().as_u16();
        match status {
            200..=299 => {
                let mut body = Vec::new();
                response
                    .body_mut()
                    .as_reader()
                    .take(MAX_FILE_BYTES)
                    .read_to_end(&mut body)
                    .map_err(|e| HttpFailure::Retryable(e.to_string()))?;
                Ok(Some(body))
            }
            404 | 410 => Ok(None),
            500..=599 => Err(HttpFailure::Retryable(format!("HTTP status {status}"))),
            _ => Err(HttpFailure::Fatal(format!("HTTP status {status}"))),
        }
    }

    /// Retrieve a package's descriptor and every file it lists. Nothing is
    /// written to disk.
    pub fn fetch(&self, layout: &ArchiveLayout, pkg: &str) -> Result<FetchedPackage, SourceError> {
        self.fetches.fetch_add(1, Ordering::SeqCst);
        let base = self.base(&layout.base)?;
        let dir = layout.package_dir(pkg);
        let descriptor_bytes = self
            .get(&base, &format!("{dir}{pkg}.pkg"))?
            .ok_or_else(|| SourceError::NotInArchive(pkg.to_string()))?;
        let descriptor = parse_pkg_descriptor(&String::from_utf8_lossy(&descriptor_bytes), pkg)?;
        if !descriptor
            .file_names()
            .any(|f| f.rsplit_once('.').map_or(f, |(stem, _)| stem) == pkg)
        {
            return Err(SourceError::Descriptor {
                package: pkg.to_string(),
                reason: format!("no file named `{pkg}.*` among the listed files"),
            });
        }

        let mut files = Vec::with_capacity(descriptor.files.len());
        for rel in &descriptor.files {
            let rel_url = rel.replace('\\', "/");
            let bytes = self.get(&base, &format!("{dir}{rel_url}"))?.ok_or_else(|| SourceError::Fetch {
                location: format!("{}/{dir}{rel_url}", layout.base),
                reason: "listed file is missing from the archive".to_string(),
            })?;
            files.push((file_name(rel).to_string(), bytes));
        }
        Ok(FetchedPackage {
            descriptor,
            descriptor_bytes,
            files,
        })
    }

    pub fn install(&self, pkg: &str, layout: &ArchiveLayout, target: &Path) -> Result<InstallRecord, SourceError> {
        let fetched = self.fetch(layout, pkg)?;
        write_package(&fetched, target)
    }

    /// Check `set`; install whatever is missing or unsatisfied into `target`;
    /// check again. Requirements already satisfied cause no fetches.
    pub fn ensure(&self, set: &RequirementSet, env: &HostEnvironment, extractor: &Extractor, target: &Path) -> Report {
        let mut env = env.clone();
        if !env.search_path.directories.iter().any(|d| d == target) {
            env.search_path = env.search_path.with_front(target);
        }
        let before = check_all(set, &env, extractor);
        let pending: Vec<usize> = before
            .verdicts
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.status.is_ok() && !is_host_name(&v.requirement.name))
            .map(|(i, _)| i)
            .collect();
        if pending.is_empty() {
            return before;
        }

        let fetched: Vec<(usize, Result<FetchedPackage, SourceError>)> = pending
            .par_iter()
            .map(|&i| {
                let r = &set.requirements[i];
                (i, ArchiveLayout::for_requirement(r).and_then(|l| self.fetch(&l, &r.name)))
            })
            .collect();

        let mut notes: Vec<Option<String>> = vec![None; set.len()];
        for (i, result) in fetched {
            match result.and_then(|pkg| write_package(&pkg, target)) {
                Ok(record) => {
                    notes[i] = Some(format!("installed {} file(s) into {}", record.files.len(), target.display()))
                }
                Err(e) => notes[i] = Some(format!("install failed: {e}")),
            }
        }

        let mut after = check_all(set, &env, extractor);
        for (verdict, note) in after.verdicts.iter_mut().zip(notes) {
            if note.is_some() {
                verdict.note = note;
            }
        }
        after
    }
}

enum HttpFailure {
    Retryable(String),
    Fatal(String),
}

fn log_retry(url: &Url, reason: &str) {
    eprintln!("reqgate: retrying {url}: {reason}");
}

const PARTIAL_SUFFIX: &str = ".reqgate-partial";

/// Write a fetched package into `<target>/<first letter>/<file>`, plus its
/// descriptor. Files are staged first and renamed into place, so a failure
/// leaves the target as it was.
pub fn write_package(pkg: &FetchedPackage, target: &Path) -> Result<InstallRecord, SourceError> {
    let mut entries: Vec<(PathBuf, &[u8])> = pkg
        .files
        .iter()
        .map(|(name, bytes)| (target.join(letter_dir(name)).join(name), bytes.as_slice()))
        .collect();
    let descriptor_name = format!("{}.pkg", pkg.descriptor.name);
    if !pkg.files.iter().any(|(n, _)| *n == descriptor_name) {
        entries.push((
            target.join(letter_dir(&pkg.descriptor.name)).join(descriptor_name),
            &pkg.descriptor_bytes,
        ));
    }

    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let mut created_dirs: Vec<PathBuf> = Vec::new();
    let result = (|| {
        for (dest, bytes) in &entries {
            let parent = dest.parent().expect("joined under target");
            if !parent.is_dir() {
                let mut missing = Vec::new();
                let mut p = parent;
                while !p.exists() {
                    missing.push(p.to_path_buf());
                    match p.parent() {
                        Some(up) => p = up,
                        None => break,
                    }
                }
                fs::create_dir_all(parent).map_err(|source| SourceError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
                created_dirs.extend(missing);
            }
            let mut partial = dest.clone().into_os_string();
            partial.push(PARTIAL_SUFFIX);
            let partial = PathBuf::from(partial);
            fs::write(&partial, bytes).map_err(|source| SourceError::Io {
                path: partial.clone(),
                source,
            })?;
            staged.push((partial, dest.clone()));
        }
        Ok(())
    })();

    if let Err(e) = result {
        for (partial, _) in &staged {
            let _ = fs::remove_file(partial);
        }
        for dir in &created_dirs {
            let _ = fs::remove_dir(dir);
        }
        return Err(e);
    }

    let mut written = Vec::with_capacity(staged.len());
    for (partial, dest) in staged {
        fs::rename(&partial, &dest).map_err(|source| SourceError::Io {
            path: dest.clone(),
            source,
        })?;
        written.push(dest);
    }
    Ok(InstallRecord {
        package: pkg.descriptor.name.clone(),
        files: written,
    })
}
