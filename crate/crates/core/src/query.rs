use serde::{Deserialize, Serialize};

use crate::starbang::FileRecord;
use crate::version::{format_date, ReleaseDate, SemVer};

/// Everything known about an installed package's version.
///
/// Field names are part of the JSON output contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageQueryResult {
    pub package: String,
    /// `major.minor.patch`
    pub version: String,
    pub version_major: u64,
    pub version_minor: u64,
    pub version_patch: u64,
    /// e.g. `31dec2022`
    pub version_date: Option<String>,
    /// File the version was read from.
    pub filename: String,
    /// The starbang line the version was read from.
    pub raw_line: String,
}

impl PackageQueryResult {
    pub fn new(
        package: &str,
        version: &SemVer,
        date: Option<&ReleaseDate>,
        filename: String,
        raw_line: String,
    ) -> Self {
        PackageQueryResult {
            package: package.to_string(),
            version: version.canonical(),
            version_major: version.major,
            version_minor: version.minor,
            version_patch: version.patch,
            version_date: date.map(format_date),
            filename,
            raw_line,
        }
    }

    pub fn from_record(package: &str, found: &FileRecord) -> Self {
        Self::new(
            package,
            &found.record.version,
            found.record.date.as_ref(),
            found.path.display().to_string(),
            found.record.raw_line.clone(),
        )
    }

    pub fn semver(&self) -> SemVer {
        SemVer::new(self.version_major, self.version_minor, self.version_patch)
    }

    pub fn date(&self) -> Option<ReleaseDate> {
        self.version_date.as_deref().and_then(crate::version::parse_date)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::version::parse_version;

    #[test]
    fn version_matches_components() {
        let v = parse_version("4.1.11").unwrap();
        let d = ReleaseDate::from_ymd(2019, 11, 22).unwrap();
        let q = PackageQueryResult::new("ivreg2", &v, Some(&d), "ivreg2.ado".into(), "*! ivreg2 4.1.11  22Nov2019".into());
        assert_eq!(q.version, format!("{}.{}.{}", q.version_major, q.version_minor, q.version_patch));
        assert_eq!(q.version_date.as_deref(), Some("22nov2019"));
        assert_eq!(q.date(), Some(d));

        let json = serde_json::to_value(&q).unwrap();
        let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["filename", "package", "raw_line", "version", "version_date", "version_major", "version_minor", "version_patch"]
        );
    }
}
