//! Inputs shared by the benchmarks.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Starbang lines from well-known packages, with the package name each is
/// parsed for.
pub const WELL_KNOWN_HEADERS: [(&str, &str); 4] = [
    ("*! ivreg2 4.1.11  22Nov2019", "ivreg2"),
    ("*! version 4.0.12 30jan2016 E. Leuven, B. Sianesi", "psmatch2"),
    ("*! mdesc Version 2.1 dan_blanchette@unc.edu 25Aug2011", "mdesc"),
    ("*! version 3.30  25mar2022  Ben Jann", "esttab"),
];

/// Fixture directory of the core crate.
pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

/// Name of the `i`-th synthetic package.
pub fn package_name(i: usize) -> String {
    let letter = (b'a' + (i % 26) as u8) as char;
    format!("{letter}pkg{i}")
}

/// Populate `root` with `count` packages in letter-tree layout, cycling
/// through the header styles of [`WELL_KNOWN_HEADERS`]. Each file carries a block of
/// ordinary comments before its starbang line so scanning has work to do.
pub fn write_tree(root: &Path, count: usize) -> io::Result<Vec<String>> {
    let mut names = Vec::with_capacity(count);
    for i in 0..count {
        let name = package_name(i);
        let version = format!("{}.{}.{}", i % 7, i % 13, i % 5);
        let header = match i % 4 {
            0 => format!("*! {name} {version}  22Nov2019"),
            1 => format!("*! version {version} 30jan2016 Someone"),
            2 => format!("*! {name} Version {version} someone@example.org 25Aug2011"),
            _ => format!("*! {version}"),
        };
        let dir = root.join(&name[..1]);
        fs::create_dir_all(&dir)?;
        let body = format!("* preamble\n* {name}: a package\n{header}\nprogram {name}\n  version 14\nend\n");
        fs::write(dir.join(format!("{name}.ado")), body)?;
        names.push(name);
    }
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use reqgate::starbang::{extract_from_file, OverrideTable};

    #[test]
    fn generated_tree_is_fully_versioned() {
        let root = std::env::temp_dir().join(format!("reqgate-bench-{}", std::process::id()));
        let names = write_tree(&root, 40).unwrap();
        for (i, name) in names.iter().enumerate() {
            let path = root.join(&name[..1]).join(format!("{name}.ado"));
            let found = extract_from_file(&path, name, &OverrideTable::empty(), 25).unwrap();
            assert_eq!(found.record.version.triple(), ((i % 7) as u64, (i % 13) as u64, (i % 5) as u64));
        }
        fs::remove_dir_all(root).unwrap();
    }

    #[test]
    fn well_known_headers_parse() {
        for (line, hint) in WELL_KNOWN_HEADERS {
            assert!(reqgate::starbang::parse_starbang(line, hint, &OverrideTable::empty()).is_ok(), "{line}");
        }
    }
}
