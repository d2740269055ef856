//! Resolving a package name to its main source file on an ordered search path.

use std::env;
use std::ffi::OsStr;
use std::path::{Path, PathBuf};

use crate::error::{ExtractError, WhichError};
use crate::query::PackageQueryResult;
use crate::starbang::Extractor;

/// Main-file extensions, probed in this order.
pub const EXTENSIONS: [&str; 5] = ["ado", "mata", "do", "scheme", "sthlp"];

pub const PATH_ENV: &str = "REQGATE_PATH";

/// Ordered list of directories; earlier entries shadow later ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchPath {
    pub directories: Vec<PathBuf>,
}

impl SearchPath {
    pub fn new<I, P>(dirs: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: Into<PathBuf>,
    {
        SearchPath {
            directories: dirs.into_iter().map(Into::into).collect(),
        }
    }

    /// Split an OS path list (`:` on Unix, `;` on Windows).
    pub fn from_path_list(list: &OsStr) -> Self {
        SearchPath::new(env::split_paths(list).filter(|p| !p.as_os_str().is_empty()))
    }

    pub fn from_env() -> Option<Self> {
        env::var_os(PATH_ENV).map(|v| Self::from_path_list(&v))
    }

    pub fn is_empty(&self) -> bool {
        self.directories.is_empty()
    }

    /// A copy with `dir` moved to the front.
    pub fn with_front(&self, dir: &Path) -> Self {
        let mut directories = vec![dir.to_path_buf()];
        directories.extend(self.directories.iter().filter(|d| d.as_path() != dir).cloned());
        SearchPath { directories }
    }
}

/// Subdirectory name of the letter-tree layout: the lowercased first character.
pub fn letter_dir(name: &str) -> String {
    name.chars()
        .next()
        .map(|c| c.to_lowercase().collect())
        .unwrap_or_default()
}

/// Candidate locations for `package` inside one directory, in probe order.
pub fn candidates(package: &str, dir: &Path) -> Vec<PathBuf> {
    let letter = letter_dir(package);
    EXTENSIONS
        .iter()
        .flat_map(|ext| {
            let file = format!("{package}.{ext}");
            [dir.join(&file), dir.join(&letter).join(&file)]
        })
        .collect()
}

/// First existing main file for `package`. Only checks existence.
pub fn resolve(package: &str, sp: &SearchPath) -> Option<PathBuf> {
    if package.is_empty() || package.contains(['/', '\\']) || package == "." || package == ".." {
        return None;
    }
    sp.directories
        .iter()
        .flat_map(|dir| candidates(package, dir))
        .find(|p| p.is_file())
}

/// Locate and read the version of an installed package.
pub fn which(
    package: &str,
    sp: &SearchPath,
    extractor: &Extractor,
) -> Result<PackageQueryResult, WhichError> {
    let path = resolve(package, sp).ok_or_else(|| WhichError::NotFound(package.to_string()))?;
    match extractor.extract_from_file(&path, package) {
        Ok(found) => Ok(PackageQueryResult::from_record(package, &found)),
        Err(ExtractError::NoMatch { path }) => Err(WhichError::NoVersion {
            package: package.to_string(),
            path,
        }),
        Err(ExtractError::Io { path, source }) => Err(WhichError::Io { path, source }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn touch(path: &Path, content: &str) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, content).unwrap();
    }

    #[test]
    fn finds_letter_tree_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("i/ivreg2.ado");
        touch(&file, "");
        assert_eq!(resolve("ivreg2", &SearchPath::new([dir.path()])), Some(file));
    }

    #[test]
    fn earlier_directory_shadows_later() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        touch(&a.path().join("ivreg2.ado"), "");
        touch(&b.path().join("i/ivreg2.ado"), "");
        let sp = SearchPath::new([a.path(), b.path()]);
        assert_eq!(resolve("ivreg2", &sp), Some(a.path().join("ivreg2.ado")));
        let sp = SearchPath::new([b.path(), a.path()]);
        assert_eq!(resolve("ivreg2", &sp), Some(b.path().join("i/ivreg2.ado")));
    }

    #[test]
    fn extension_fallback_order() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("s/style.scheme"), "");
        touch(&dir.path().join("style.sthlp"), "");
        let sp = SearchPath::new([dir.path()]);
        assert_eq!(resolve("style", &sp), Some(dir.path().join("s/style.scheme")));
        touch(&dir.path().join("s/style.mata"), "");
        assert_eq!(resolve("style", &sp), Some(dir.path().join("s/style.mata")));
    }

    #[test]
    fn missing_and_invalid_names() {
        let dir = tempfile::tempdir().unwrap();
        let sp = SearchPath::new([dir.path()]);
        assert_eq!(resolve("nosuchpkg", &sp), None);
        assert_eq!(resolve("", &sp), None);
        assert_eq!(resolve("../x", &sp), None);
        // Directories never count as files.
        fs::create_dir_all(dir.path().join("d/dir.ado")).unwrap();
        assert_eq!(resolve("dir", &sp), None);
    }

    #[test]
    fn which_outcomes() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("e/esttab.ado"), "*! version 3.30  25mar2022  Ben Jann\nprogram esttab\n");
        touch(&dir.path().join("p/plain.ado"), "program plain\nend\n");
        let sp = SearchPath::new([dir.path()]);
        let ex = Extractor::default();

        let found = which("esttab", &sp, &ex).unwrap();
        assert_eq!(found.version, "3.30.0");
        assert_eq!(found.version_date.as_deref(), Some("25mar2022"));
        assert!(matches!(which("plain", &sp, &ex), Err(WhichError::NoVersion { .. })));
        assert!(matches!(which("absent", &sp, &ex), Err(WhichError::NotFound(_))));
    }

    #[test]
    fn path_list_parsing() {
        let joined = env::join_paths(["/a", "/b/c"]).unwrap();
        let sp = SearchPath::from_path_list(&joined);
        assert_eq!(sp.directories, vec![PathBuf::from("/a"), PathBuf::from("/b/c")]);
        let front = sp.with_front(Path::new("/b/c"));
        assert_eq!(front.directories, vec![PathBuf::from("/b/c"), PathBuf::from("/a")]);
    }
}
