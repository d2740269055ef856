//! Starbang line scanning and version extraction.
//!
//! A starbang line is a comment starting with `*!` near the top of a source
//! file. There is no standard layout for it, so extraction runs a fixed
//! battery of shapes after consulting a per-package override table:
//!
//! | id         | shape                                              |
//! |------------|----------------------------------------------------|
//! | `override` | package-specific regex from the override table     |
//! | `P1`       | `*! <name> <version> [... <date> ...]`             |
//! | `P2`       | `*! version[:] <version> [... <date> ...]`         |
//! | `P3`       | `*! <name> version[:] <version> [... <date> ...]`  |
//! | `P4`       | `*! <version> [... <date> ...]`                    |
//!
//! The first rule that yields a parseable version wins. The date is the first
//! token after the version that parses as a date, wherever it sits, so author
//! names or e-mail addresses in between are skipped.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{ExtractError, OverrideError};
use crate::version::{parse_date, parse_version, ReleaseDate, SemVer};

pub const DEFAULT_SCAN_LIMIT: usize = 25;

const BUILTIN_OVERRIDES: &str = include_str!("../data/overrides.tsv");

/// Which rule produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternId {
    #[serde(rename = "override")]
    Override,
    P1,
    P2,
    P3,
    P4,
}

impl PatternId {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatternId::Override => "override",
            PatternId::P1 => "P1",
            PatternId::P2 => "P2",
            PatternId::P3 => "P3",
            PatternId::P4 => "P4",
        }
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StarbangRecord {
    /// Package name as written in the line, when the rule captures one.
    pub package: Option<String>,
    pub version: SemVer,
    pub date: Option<ReleaseDate>,
    pub raw_line: String,
    pub line_number: usize,
    pub pattern_id: PatternId,
}

/// A custom extraction rule for one package.
#[derive(Debug, Clone)]
pub struct OverrideRule {
    package_name: String,
    pattern: Regex,
}

impl OverrideRule {
    /// Compile a rule. The pattern is anchored at the start of the line
    /// (leading whitespace removed) and must define a `version` group; a
    /// `date` group is optional.
    pub fn new(package_name: &str, pattern: &str) -> Result<Self, String> {
        let anchored = format!("^(?:{pattern})");
        let regex = Regex::new(&anchored).map_err(|e| e.to_string())?;
        if !regex.capture_names().flatten().any(|n| n == "version") {
            return Err("pattern has no `version` capture group".to_string());
        }
        if package_name.trim().is_empty() {
            return Err("empty package name".to_string());
        }
        Ok(OverrideRule {
            package_name: package_name.trim().to_string(),
            pattern: regex,
        })
    }

    pub fn package_name(&self) -> &str {
        &self.package_name
    }

    pub fn applies_to(&self, package: &str) -> bool {
        self.package_name.eq_ignore_ascii_case(package)
    }

    fn apply(&self, line: &str) -> Option<(Option<String>, SemVer, Option<ReleaseDate>)> {
        let caps = self.pattern.captures(line.trim_start())?;
        let version = parse_version(caps.name("version")?.as_str()).ok()?;
        let date = caps.name("date").and_then(|m| parse_date(m.as_str()));
        let package = caps.name("package").map(|m| m.as_str().to_string());
        Some((package, version, date))
    }
}

/// The loaded override table; immutable once built.
#[derive(Debug, Clone, Default)]
pub struct OverrideTable {
    rules: Vec<OverrideRule>,
}

impl OverrideTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The table shipped with the library.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_OVERRIDES).expect("shipped override table is valid")
    }

    /// Parse TSV text: `package<TAB>pattern`, `#` comments, blank lines ignored.
    pub fn parse(text: &str) -> Result<Self, OverrideError> {
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.strip_prefix('\u{feff}').unwrap_or(line);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (name, pattern) = line.split_once('\t').ok_or_else(|| OverrideError::Line {
                line: line_no,
                reason: "expected `package<TAB>pattern`".to_string(),
            })?;
            let rule = OverrideRule::new(name, pattern.trim_end_matches('\r'))
                .map_err(|reason| OverrideError::Line { line: line_no, reason })?;
            rules.push(rule);
        }
        Ok(OverrideTable { rules })
    }

    pub fn load(path: &Path) -> Result<Self, OverrideError> {
        let text = fs::read_to_string(path).map_err(|source| OverrideError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn from_rules(rules: Vec<OverrideRule>) -> Self {
        OverrideTable { rules }
    }

    pub fn rules(&self) -> &[OverrideRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules_for<'a>(&'a self, package: &'a str) -> impl Iterator<Item = &'a OverrideRule> + 'a {
        self.rules.iter().filter(move |r| r.applies_to(package))
    }
}

/// Starbang lines among the first `limit` lines, in file order, with 1-based
/// line numbers.
pub fn scan_starbang_lines(content: &str, limit: usize) -> Vec<(usize, &str)> {
    content
        .lines()
        .take(limit)
        .enumerate()
        .filter(|(_, line)| is_starbang(line))
        .map(|(i, line)| (i + 1, line))
        .collect()
}

pub fn is_starbang(line: &str) -> bool {
    line.trim_start_matches(['\u{feff}', ' ', '\t']).starts_with("*!")
}

/// No rule produced a version from the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoMatch;

impl fmt::Display for NoMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no version found in starbang line")
    }
}

impl std::error::Error for NoMatch {}

/// Extract a version from a single starbang line.
///
/// The returned record carries `line_number` 1; file-level callers replace it.
pub fn parse_starbang(
    line: &str,
    package_hint: &str,
    overrides: &OverrideTable,
) -> Result<StarbangRecord, NoMatch> {
    let record = |package, version, date, pattern_id| StarbangRecord {
        package,
        version,
        date,
        raw_line: line.to_string(),
        line_number: 1,
        pattern_id,
    };

    for rule in overrides.rules_for(package_hint) {
        if let Some((package, version, date)) = rule.apply(line) {
            return Ok(record(package, version, date, PatternId::Override));
        }
    }

    let body = starbang_body(line).ok_or(NoMatch)?;
    let (first, after_first) = next_token(body);
    let first = first.ok_or(NoMatch)?;
    let names_hint = !package_hint.is_empty() && strip_punct(first).eq_ignore_ascii_case(package_hint);

    // P1: <name> <version>
    if names_hint {
        if let (Some(tok), rest) = next_token(after_first) {
            if let Some(version) = version_token(tok) {
                return Ok(record(Some(strip_punct(first).to_string()), version, find_date(rest), PatternId::P1));
            }
        }
    }

    // P2: version[:] <version>
    if let Some((version, rest)) = keyword_version(first, after_first) {
        return Ok(record(None, version, find_date(rest), PatternId::P2));
    }

    // P3: <name> version[:] <version>
    if names_hint {
        if let (Some(keyword), rest) = next_token(after_first) {
            if let Some((version, rest)) = keyword_version(keyword, rest) {
                return Ok(record(Some(strip_punct(first).to_string()), version, find_date(rest), PatternId::P3));
            }
        }
    }

    // P4: bare <version>
    if let Some(version) = version_token(first) {
        return Ok(record(None, version, find_date(after_first), PatternId::P4));
    }

    Err(NoMatch)
}

fn starbang_body(line: &str) -> Option<&str> {
    line.trim_start_matches(['\u{feff}', ' ', '\t'])
        .strip_prefix("*!")
}

/// Split off the next whitespace-delimited token.
fn next_token(s: &str) -> (Option<&str>, &str) {
    let s = s.trim_start();
    if s.is_empty() {
        return (None, s);
    }
    match s.find(char::is_whitespace) {
        Some(end) => (Some(&s[..end]), &s[end..]),
        None => (Some(s), ""),
    }
}

fn strip_punct(token: &str) -> &str {
    token.trim_end_matches([',', ';', ':'])
}

fn version_token(token: &str) -> Option<SemVer> {
    parse_version(strip_punct(token)).ok()
}

/// Match `version <v>`, `version: <v>`, `version:<v>` starting at `keyword`.
fn keyword_version<'a>(keyword: &'a str, rest: &'a str) -> Option<(SemVer, &'a str)> {
    let tail = keyword
        .strip_prefix("version")
        .or_else(|| keyword.strip_prefix("Version"))?;
    match tail {
        "" | ":" => {
            let (tok, rest) = next_token(rest);
            version_token(tok?).map(|v| (v, rest))
        }
        _ => {
            let glued = tail.strip_prefix(':')?;
            version_token(glued).map(|v| (v, rest))
        }
    }
}

/// First token in `rest` that parses as a date.
fn find_date(rest: &str) -> Option<ReleaseDate> {
    rest.split(|c: char| c.is_whitespace() || ",;()[]<>\"'".contains(c))
        .filter(|t| !t.is_empty())
        .find_map(|t| parse_date(t.trim_end_matches('.')))
}

/// A record located in a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileRecord {
    pub record: StarbangRecord,
    pub path: PathBuf,
}

/// Extraction settings shared across a run: the override table and how many
/// leading lines to scan.
#[derive(Debug, Clone)]
pub struct Extractor {
    pub overrides: OverrideTable,
    pub scan_limit: usize,
}

impl Default for Extractor {
    fn default() -> Self {
        Extractor {
            overrides: OverrideTable::builtin(),
            scan_limit: DEFAULT_SCAN_LIMIT,
        }
    }
}

impl Extractor {
    pub fn new(overrides: OverrideTable, scan_limit: usize) -> Self {
        Extractor {
            overrides,
            scan_limit: scan_limit.max(1),
        }
    }

    /// First successfully parsed starbang line of `content`.
    pub fn extract_from_text(&self, content: &str, package: &str) -> Option<StarbangRecord> {
        scan_starbang_lines(content, self.scan_limit)
            .into_iter()
            .find_map(|(line_number, line)| {
                parse_starbang(line, package, &self.overrides)
                    .ok()
                    .map(|r| StarbangRecord { line_number, ..r })
            })
    }

    pub fn extract_from_file(&self, path: &Path, package: &str) -> Result<FileRecord, ExtractError> {
        extract_from_file(path, package, &self.overrides, self.scan_limit)
    }
}

/// Read `path` (invalid UTF-8 is replaced, never fatal) and return the first
/// starbang line that yields a version.
pub fn extract_from_file(
    path: &Path,
    package: &str,
    overrides: &OverrideTable,
    scan_limit: usize,
) -> Result<FileRecord, ExtractError> {
    let bytes = fs::read(path).map_err(|source| ExtractError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let content = String::from_utf8_lossy(&bytes);
    scan_starbang_lines(&content, scan_limit.max(1))
        .into_iter()
        .find_map(|(line_number, line)| {
            parse_starbang(line, package, overrides)
                .ok()
                .map(|r| StarbangRecord { line_number, ..r })
        })
        .map(|record| FileRecord {
            record,
            path: path.to_path_buf(),
        })
        .ok_or_else(|| ExtractError::NoMatch {
            path: path.to_path_buf(),
        })
}
