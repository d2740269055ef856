//! Version triples, release dates and the two constraint kinds the gate checks.
//!
//! Versions found in header lines are loose: `2.1`, `v3.30`, `4.1b`. Every one
//! of them is normalized to a `major.minor.patch` triple, zero-filling missing
//! components. A single trailing letter is kept for display but never takes
//! part in ordering or equality.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::VersionError;

/// Largest accepted value for a single version component.
pub const MAX_COMPONENT: u64 = 1_000_000;

/// A normalized `major.minor.patch` version.
#[derive(Debug, Clone, Copy)]
pub struct SemVer {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    /// Trailing letter as written (`4.1b`); ignored by comparisons.
    pub suffix: Option<char>,
}

impl SemVer {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        SemVer {
            major,
            minor,
            patch,
            suffix: None,
        }
    }

    pub fn triple(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }

    /// The `M.m.p` form, without the suffix letter.
    pub fn canonical(&self) -> String {
        format!("{}.{}.{}", self.major, self.minor, self.patch)
    }
}

impl PartialEq for SemVer {
    fn eq(&self, other: &Self) -> bool {
        self.triple() == other.triple()
    }
}

impl Eq for SemVer {}

impl Hash for SemVer {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.triple().hash(state);
    }
}

impl PartialOrd for SemVer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SemVer {
    fn cmp(&self, other: &Self) -> Ordering {
        compare(self, other)
    }
}

impl fmt::Display for SemVer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)?;
        if let Some(c) = self.suffix {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for SemVer {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

impl Serialize for SemVer {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SemVer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_version(&s).map_err(serde::de::Error::custom)
    }
}

/// Parse a loose version string into a [`SemVer`].
///
/// Accepts one to three dot-separated decimal components, an optional leading
/// `v`/`V` and an optional single trailing ASCII letter.
pub fn parse_version(text: &str) -> Result<SemVer, VersionError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(VersionError::Empty);
    }
    let body = trimmed
        .strip_prefix(['v', 'V'])
        .unwrap_or(trimmed);
    if !body.starts_with(|c: char| c.is_ascii_digit()) {
        return Err(VersionError::NoLeadingDigit(trimmed.to_string()));
    }

    let (numeric, suffix) = match body.chars().last() {
        Some(c) if c.is_ascii_alphabetic() => (&body[..body.len() - 1], Some(c)),
        _ => (body, None),
    };

    let mut parts = [0u64; 3];
    for (count, component) in numeric.split('.').enumerate() {
        if count == 3 {
            return Err(VersionError::TooManyComponents(trimmed.to_string()));
        }
        if component.is_empty() || !component.bytes().all(|b| b.is_ascii_digit()) {
            return Err(VersionError::BadComponent {
                input: trimmed.to_string(),
                component: component.to_string(),
            });
        }
        let digits = component.trim_start_matches('0');
        let value = match digits.len() {
            0 => 0,
            1..=7 => digits.parse::<u64>().expect("short digit run"),
            _ => u64::MAX,
        };
        if value > MAX_COMPONENT {
            return Err(VersionError::ComponentTooLarge(trimmed.to_string()));
        }
        parts[count] = value;
    }

    Ok(SemVer {
        major: parts[0],
        minor: parts[1],
        patch: parts[2],
        suffix,
    })
}

/// Lexicographic order over `(major, minor, patch)`.
pub fn compare(a: &SemVer, b: &SemVer) -> Ordering {
    a.triple().cmp(&b.triple())
}

/// A version requirement on a single package.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// The package only needs to be present.
    Any,
    /// `>= version`
    Minimum(SemVer),
    /// `== version`
    Exact(SemVer),
}

impl Constraint {
    pub fn version(&self) -> Option<&SemVer> {
        match self {
            Constraint::Any => None,
            Constraint::Minimum(v) | Constraint::Exact(v) => Some(v),
        }
    }

    pub fn operator(&self) -> Option<&'static str> {
        match self {
            Constraint::Any => None,
            Constraint::Minimum(_) => Some(">="),
            Constraint::Exact(_) => Some("=="),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Any => f.write_str("any"),
            Constraint::Minimum(v) => write!(f, ">= {}", v.canonical()),
            Constraint::Exact(v) => write!(f, "== {}", v.canonical()),
        }
    }
}

pub fn satisfies(found: &SemVer, constraint: &Constraint) -> bool {
    match constraint {
        Constraint::Any => true,
        Constraint::Minimum(min) => compare(found, min) != Ordering::Less,
        Constraint::Exact(want) => compare(found, want) == Ordering::Equal,
    }
}

/// A calendar date attached to a release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReleaseDate(NaiveDate);

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

impl ReleaseDate {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(ReleaseDate)
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }

    pub fn month(&self) -> u32 {
        self.0.month()
    }

    pub fn day(&self) -> u32 {
        self.0.day()
    }

    pub fn as_naive(&self) -> NaiveDate {
        self.0
    }
}

impl From<NaiveDate> for ReleaseDate {
    fn from(d: NaiveDate) -> Self {
        ReleaseDate(d)
    }
}

impl fmt::Display for ReleaseDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_date(self))
    }
}

/// Parse a release date token.
///
/// Recognized shapes: `22Nov2019`, `1jan2020`, `25aug11` (years below 40 map
/// to 20yy, the rest to 19yy) and `2019-11-22`. Returns `None` for anything
/// else, including impossible calendar dates.
pub fn parse_date(text: &str) -> Option<ReleaseDate> {
    let s = text.trim();
    if let Some(d) = parse_iso(s) {
        return Some(d);
    }

    let digits_end = s.find(|c: char| !c.is_ascii_digit())?;
    if !(1..=2).contains(&digits_end) {
        return None;
    }
    let day: u32 = s[..digits_end].parse().ok()?;
    let rest = &s[digits_end..];
    if rest.len() < 3 || !rest.is_char_boundary(3) {
        return None;
    }
    let (mon, year_str) = rest.split_at(3);
    let month = MONTHS
        .iter()
        .position(|m| m.eq_ignore_ascii_case(mon))? as u32
        + 1;
    if !year_str.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year: i32 = match year_str.len() {
        4 => year_str.parse().ok()?,
        2 => {
            let yy: i32 = year_str.parse().ok()?;
            if yy < 40 {
                2000 + yy
            } else {
                1900 + yy
            }
        }
        _ => return None,
    };
    ReleaseDate::from_ymd(year, month, day)
}

fn parse_iso(s: &str) -> Option<ReleaseDate> {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    let all_digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    if !(all_digits(0..4) && all_digits(5..7) && all_digits(8..10)) {
        return None;
    }
    ReleaseDate::from_ymd(
        s[0..4].parse().ok()?,
        s[5..7].parse().ok()?,
        s[8..10].parse().ok()?,
    )
}

/// Render a date as lowercase day-month-year with an unpadded day: `31dec2022`.
pub fn format_date(date: &ReleaseDate) -> String {
    format!(
        "{}{}{}",
        date.day(),
        MONTHS[date.month() as usize - 1],
        date.year()
    )
}
