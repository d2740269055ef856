//! Requirement specifications: inline arguments, requirement files, and their
//! canonical text form.
//!
//! A requirement file lists one package per line:
//!
//! ```text
//! * comment
//! # also a comment
//! ivreg2 >= 4.1
//! esttab == 3.30
//! gtools, from("https://raw.githubusercontent.com/mcaceresb/stata-gtools/master/build/")
//! regress @>=01jan2020
//! ```
//!
//! `=>` is accepted as a spelling of `>=`, and `ge:`/`eq:` prefixes
//! (`estout ge:3.23`) avoid shell quoting. A version written directly after a
//! name with no operator is a minimum requirement. `@>=<date>` additionally
//! requires the installed release to be dated on or after `<date>`.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use url::Url;

use crate::error::{LoadError, RequirementError};
use crate::version::{format_date, parse_date, parse_version, Constraint, ReleaseDate};

/// Where a package is installed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceLocation {
    DefaultArchive,
    Url(Url),
    Directory(PathBuf),
}

impl SourceLocation {
    /// `SSC` (any case) names the default archive; `http(s)://` is a URL;
    /// anything else is a local directory.
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        if text.is_empty() {
            return Err("empty source location".to_string());
        }
        if text.eq_ignore_ascii_case("ssc") {
            return Ok(SourceLocation::DefaultArchive);
        }
        if let Some((scheme, _)) = text.split_once("://") {
            if !scheme.eq_ignore_ascii_case("http") && !scheme.eq_ignore_ascii_case("https") {
                return Err(format!("unsupported URL scheme `{scheme}`"));
            }
            return Url::parse(text)
                .map(SourceLocation::Url)
                .map_err(|e| format!("invalid URL `{text}`: {e}"));
        }
        Ok(SourceLocation::Directory(PathBuf::from(text)))
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceLocation::DefaultArchive => f.write_str("SSC"),
            SourceLocation::Url(u) => f.write_str(u.as_str()),
            SourceLocation::Directory(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Requirement {
    pub name: String,
    pub constraint: Constraint,
    pub source: Option<SourceLocation>,
    pub min_date: Option<ReleaseDate>,
}

impl Requirement {
    pub fn new(name: &str, constraint: Constraint) -> Self {
        Requirement {
            name: name.to_string(),
            constraint,
            source: None,
            min_date: None,
        }
    }

    pub fn with_source(mut self, source: SourceLocation) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_min_date(mut self, date: ReleaseDate) -> Self {
        self.min_date = Some(date);
        self
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        match self.constraint {
            Constraint::Any => {}
            Constraint::Minimum(v) => write!(f, " >= {}", v.canonical())?,
            Constraint::Exact(v) => write!(f, " == {}", v.canonical())?,
        }
        if let Some(d) = &self.min_date {
            write!(f, " @>={}", format_date(d))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Origin {
    #[default]
    Inline,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequirementSet {
    pub requirements: Vec<Requirement>,
    pub origin: Origin,
}

impl RequirementSet {
    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Requirement> {
        self.requirements.iter()
    }

    pub fn get(&self, name: &str) -> Option<&Requirement> {
        self.requirements.iter().find(|r| r.name == name)
    }

    /// Set `source` on every requirement that does not name its own.
    pub fn default_source(&mut self, source: &SourceLocation) {
        for r in &mut self.requirements {
            if r.source.is_none() {
                r.source = Some(source.clone());
            }
        }
    }
}

impl<'a> IntoIterator for &'a RequirementSet {
    type Item = &'a Requirement;
    type IntoIter = std::slice::Iter<'a, Requirement>;

    fn into_iter(self) -> Self::IntoIter {
        self.requirements.iter()
    }
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone)]
enum Token {
    Name(String),
    Op(fn(crate::version::SemVer) -> Constraint),
    Version(String),
    DateOp,
    Date(String),
}

/// Split one whitespace-free word into tokens, separating glued operators
/// (`ivreg2>=4.1`).
fn lex_word(word: &str, out: &mut Vec<Token>) {
    if word.is_empty() {
        return;
    }
    if let Some(rest) = word.strip_prefix("@>=") {
        out.push(Token::DateOp);
        if !rest.is_empty() {
            out.push(Token::Date(rest.to_string()));
        }
        return;
    }
    for (prefix, op) in [("ge:", Constraint::Minimum as fn(_) -> _), ("eq:", Constraint::Exact)] {
        if let Some(rest) = word.strip_prefix(prefix) {
            out.push(Token::Op(op));
            if !rest.is_empty() {
                out.push(Token::Version(rest.to_string()));
            }
            return;
        }
    }
    for (spelling, op) in [
        ("==", Constraint::Exact as fn(_) -> _),
        (">=", Constraint::Minimum),
        ("=>", Constraint::Minimum),
    ] {
        if let Some(pos) = word.find(spelling) {
            lex_word(&word[..pos], out);
            out.push(Token::Op(op));
            let rest = &word[pos + spelling.len()..];
            if !rest.is_empty() {
                out.push(Token::Version(rest.to_string()));
            }
            return;
        }
    }
    if looks_like_version(word) {
        out.push(Token::Version(word.to_string()));
    } else {
        out.push(Token::Name(word.to_string()));
    }
}

/// Digits first, or `v` followed by a dotted number. A plain `v2` stays a name.
fn looks_like_version(word: &str) -> bool {
    if word.starts_with(|c: char| c.is_ascii_digit()) {
        return true;
    }
    match word.strip_prefix(['v', 'V']) {
        Some(rest) => rest.starts_with(|c: char| c.is_ascii_digit()) && rest.contains('.'),
        None => false,
    }
}

/// Turn a token stream into requirements. `err` builds a positioned error
/// from the index of the offending token.
fn assemble(
    tokens: &[(usize, Token)],
    err: &dyn Fn(usize, String) -> RequirementError,
) -> Result<Vec<Requirement>, RequirementError> {
    let mut out: Vec<Requirement> = Vec::new();
    let mut has_constraint = false;
    let mut iter = tokens.iter();

    while let Some((pos, tok)) = iter.next() {
        let pos = *pos;
        match tok {
            Token::Name(name) => {
                if !is_valid_name(name) {
                    return Err(err(pos, format!("invalid package name `{name}`")));
                }
                out.push(Requirement::new(name, Constraint::Any));
                has_constraint = false;
            }
            Token::Op(op) => {
                let Some(current) = out.last_mut() else {
                    return Err(err(pos, "operator with no preceding package name".to_string()));
                };
                if has_constraint {
                    return Err(err(pos, format!("`{}` already has a version constraint", current.name)));
                }
                let version = match iter.next() {
                    Some((_, Token::Version(v))) => v,
                    Some((p, _)) => return Err(err(*p, "operator must be followed by a version".to_string())),
                    None => return Err(err(pos, "operator with no following version".to_string())),
                };
                let v = parse_version(version).map_err(|e| err(pos, e.to_string()))?;
                current.constraint = op(v);
                has_constraint = true;
            }
            Token::Version(version) => {
                let Some(current) = out.last_mut() else {
                    return Err(err(pos, format!("version `{version}` with no preceding package name")));
                };
                if has_constraint {
                    return Err(err(pos, format!("`{}` already has a version constraint", current.name)));
                }
                let v = parse_version(version).map_err(|e| err(pos, e.to_string()))?;
                current.constraint = Constraint::Minimum(v);
                has_constraint = true;
            }
            Token::DateOp => {
                let Some(current) = out.last_mut() else {
                    return Err(err(pos, "date requirement with no preceding package name".to_string()));
                };
                let text = match iter.next() {
                    Some((_, Token::Date(d) | Token::Version(d) | Token::Name(d))) => d,
                    _ => return Err(err(pos, "`@>=` must be followed by a date".to_string())),
                };
                let date = parse_date(text).ok_or_else(|| err(pos, format!("invalid date `{text}`")))?;
                if current.min_date.replace(date).is_some() {
                    return Err(err(pos, format!("`{}` has more than one date requirement", current.name)));
                }
            }
            Token::Date(_) => unreachable!("date tokens only follow `@>=`"),
        }
    }
    Ok(out)
}

/// Parse requirements from command-line tokens. Each argument may itself hold
/// several whitespace-separated words.
pub fn parse_inline<S: AsRef<str>>(args: &[S]) -> Result<RequirementSet, RequirementError> {
    let mut tokens = Vec::new();
    for (idx, arg) in args.iter().enumerate() {
        let mut lexed = Vec::new();
        for word in arg.as_ref().split_whitespace() {
            lex_word(word, &mut lexed);
        }
        tokens.extend(lexed.into_iter().map(|t| (idx + 1, t)));
    }
    let err = |position, reason| RequirementError::Inline { position, reason };
    let requirements = assemble(&tokens, &err)?;

    let mut seen = HashSet::new();
    for (r, (pos, _)) in requirements.iter().zip(tokens.iter().filter(|(_, t)| matches!(t, Token::Name(_)))) {
        if !seen.insert(r.name.as_str()) {
            return Err(err(*pos, format!("duplicate requirement for `{}`", r.name)));
        }
    }
    Ok(RequirementSet {
        requirements,
        origin: Origin::Inline,
    })
}

/// Split a line at the first comma outside double quotes.
fn split_options(line: &str) -> (&str, Option<&str>) {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => return (&line[..i], Some(&line[i + 1..])),
            _ => {}
        }
    }
    (line, None)
}

fn parse_from_clause(options: &str) -> Result<Option<SourceLocation>, String> {
    let options = options.trim();
    if options.is_empty() {
        return Ok(None);
    }
    let inner = options
        .strip_prefix("from")
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix('('))
        .ok_or_else(|| format!("unknown option `{options}` (only `from(...)` is allowed)"))?;
    let close = inner
        .rfind(')')
        .ok_or_else(|| "unclosed `from(`".to_string())?;
    if !inner[close + 1..].trim().is_empty() {
        return Err("`from(...)` must be the last clause on the line".to_string());
    }
    let arg = inner[..close].trim();
    let arg = match arg.strip_prefix('"') {
        Some(rest) => rest
            .strip_suffix('"')
            .ok_or_else(|| "unterminated quote in `from(...)`".to_string())?,
        None => arg,
    };
    SourceLocation::parse(arg).map(Some)
}

pub fn is_comment(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('*') || t.starts_with('#')
}

/// Parse a requirements file. Stops at the first bad line.
pub fn parse_requirements_file(content: &str) -> Result<RequirementSet, RequirementError> {
    let content = content.strip_prefix('\u{feff}').unwrap_or(content);
    let mut requirements: Vec<Requirement> = Vec::new();

    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let err = |_: usize, reason: String| RequirementError::Line { line: line_no, reason };
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || is_comment(line) {
            continue;
        }

        let (head, options) = split_options(line);
        let mut tokens = Vec::new();
        for word in head.split_whitespace() {
            lex_word(word, &mut tokens);
        }
        let tokens: Vec<_> = tokens.into_iter().map(|t| (line_no, t)).collect();
        let mut parsed = assemble(&tokens, &err)?;
        let mut requirement = match parsed.len() {
            1 => parsed.pop().unwrap(),
            0 => return Err(err(0, "missing package name".to_string())),
            _ => return Err(err(0, "only one requirement per line is allowed".to_string())),
        };
        if let Some(options) = options {
            requirement.source = parse_from_clause(options).map_err(|r| err(0, r))?;
        }
        if requirements.iter().any(|r| r.name == requirement.name) {
            return Err(err(0, format!("duplicate requirement for `{}`", requirement.name)));
        }
        requirements.push(requirement);
    }

    Ok(RequirementSet {
        requirements,
        origin: Origin::Inline,
    })
}

/// Read and parse a requirements file, recording its path as the origin.
pub fn load_requirements_file(path: &std::path::Path) -> Result<RequirementSet, LoadError> {
    let bytes = std::fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut set = parse_requirements_file(&String::from_utf8_lossy(&bytes))?;
    set.origin = Origin::File(path.to_path_buf());
    Ok(set)
}

/// Header line written at the top of generated files.
pub fn header_line(date: &ReleaseDate) -> String {
    format!(
        "* requirements generated by reqgate {} on {}",
        env!("CARGO_PKG_VERSION"),
        format_date(date)
    )
}

/// Render a set in requirement-file syntax, headed by a comment naming the
/// generator and `date`.
pub fn serialize(set: &RequirementSet, date: &ReleaseDate) -> String {
    let mut out = header_line(date);
    out.push('\n');
    for r in set {
        out.push_str(&serialize_requirement(r));
        out.push('\n');
    }
    out
}

pub fn serialize_requirement(r: &Requirement) -> String {
    match &r.source {
        Some(source) => format!("{r} , from(\"{source}\")"),
        None => r.to_string(),
    }
}
