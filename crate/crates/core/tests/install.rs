mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use reqgate::requirements::parse_inline;
use reqgate::sources::{ArchiveLayout, Installer, LayoutStyle};
use reqgate::starbang::OverrideTable;
use reqgate::{
    check_all, Extractor, HostEnvironment, RequirementSet, SearchPath, SemVer, SourceError, SourceLocation, Status,
};
use walkdir::WalkDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn extractor() -> Extractor {
    Extractor::new(OverrideTable::empty(), 25)
}

fn dir_source(name: &str) -> SourceLocation {
    SourceLocation::Directory(fixtures().join(name))
}

/// Relative path -> contents for every file under `root`.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    WalkDir::new(root)
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}

fn reqs(args: &[&str]) -> RequirementSet {
    parse_inline(args).unwrap()
}

fn statuses(report: &reqgate::Report) -> Vec<Status> {
    report.verdicts.iter().map(|v| v.status).collect()
}

#[test]
fn ensure_installs_then_is_idempotent() {
    let target = tempfile::tempdir().unwrap();
    let installer = Installer::new(Some(dir_source("archive")));
    let env = HostEnvironment::new(SearchPath::new([target.path()]));
    let set = reqs(&["mdesc", ">=", "0.9.4", "estout", ">=", "3.23", "ivreg2"]);

    let first = installer.ensure(&set, &env, &extractor(), target.path());
    assert!(first.is_ok(), "{:?}", first.failure_message());
    assert_eq!(installer.fetch_count(), 3);
    assert!(first.verdicts.iter().all(|v| v.note.as_deref().is_some_and(|n| n.starts_with("installed"))));

    let after_first = snapshot(target.path());
    let second = installer.ensure(&set, &env, &extractor(), target.path());
    assert!(second.is_ok());
    assert_eq!(installer.fetch_count(), 3, "a satisfied set must not fetch");
    assert!(second.verdicts.iter().all(|v| v.note.is_none()));
    assert_eq!(snapshot(target.path()), after_first);

    // A plain re-check agrees.
    assert_eq!(statuses(&check_all(&set, &env, &extractor())), [Status::Satisfied; 3]);
    // Companion commands shipped by a package are found too.
    let companion = check_all(&reqs(&["esttab", "==", "3.30"]), &env, &extractor());
    assert!(companion.is_ok());
}

#[test]
fn ensure_puts_target_ahead_of_search_path() {
    let target = tempfile::tempdir().unwrap();
    let other = tempfile::tempdir().unwrap();
    fs::create_dir_all(other.path().join("m")).unwrap();
    fs::write(other.path().join("m/mdesc.ado"), "*! version 0.1\n").unwrap();
    let installer = Installer::new(Some(dir_source("archive")));
    let env = HostEnvironment::new(SearchPath::new([other.path()]));
    let report = installer.ensure(&reqs(&["mdesc", ">=", "0.9"]), &env, &extractor(), target.path());
    assert!(report.is_ok());
    assert_eq!(report.verdicts[0].found.as_ref().unwrap().version, "0.9.4");
}

#[test]
fn archive_too_old_is_reported_with_note() {
    let target = tempfile::tempdir().unwrap();
    let installer = Installer::new(Some(dir_source("archive_old")));
    let env = HostEnvironment::new(SearchPath::new([target.path()]));
    let report = installer.ensure(&reqs(&["mdesc", ">=", "0.9.4"]), &env, &extractor(), target.path());
    let v = &report.verdicts[0];
    assert_eq!(v.status, Status::VersionTooLow);
    assert_eq!(v.found.as_ref().unwrap().version, "0.9.0");
    assert!(v.note.as_deref().unwrap().starts_with("installed"));
    assert!(report.failure_message().unwrap().starts_with("error 2225:"));
}

#[test]
fn missing_package_and_missing_archive() {
    let target = tempfile::tempdir().unwrap();
    let env = HostEnvironment::new(SearchPath::new([target.path()]));

    let installer = Installer::new(Some(dir_source("archive")));
    let report = installer.ensure(&reqs(&["nosuchpkg"]), &env, &extractor(), target.path());
    assert_eq!(statuses(&report), [Status::NotInstalled]);
    assert!(report.verdicts[0].note.as_deref().unwrap().contains("not found in archive"));

    let unconfigured = Installer::new(None);
    let report = unconfigured.ensure(&reqs(&["mdesc"]), &env, &extractor(), target.path());
    assert_eq!(statuses(&report), [Status::NotInstalled]);
    assert!(report.verdicts[0].note.as_deref().unwrap().contains("no default archive"));
    assert!(snapshot(target.path()).is_empty());
}

#[test]
fn reinstall_replaces_older_version() {
    let target = tempfile::tempdir().unwrap();
    let layout_old = ArchiveLayout::new(dir_source("archive_old"), LayoutStyle::LetterTree);
    let layout_new = ArchiveLayout::new(dir_source("archive"), LayoutStyle::LetterTree);
    let installer = Installer::new(None);
    let sp = SearchPath::new([target.path()]);

    installer.install("mdesc", &layout_old, target.path()).unwrap();
    let q = reqgate::which("mdesc", &sp, &extractor()).unwrap();
    assert_eq!(q.semver(), SemVer::new(0, 9, 0));

    installer.install("mdesc", &layout_new, target.path()).unwrap();
    let q = reqgate::which("mdesc", &sp, &extractor()).unwrap();
    assert_eq!(q.semver(), SemVer::new(0, 9, 4));
    assert!(!snapshot(target.path()).keys().any(|k| k.ends_with(".reqgate-partial")));
}

/// Each descriptor in the manifest installs exactly its listed files (plus
/// itself) with identical bytes, and nothing lands outside the letter
/// directories of the target.
#[test]
fn installed_files_match_manifest() {
    let manifest = fs::read_to_string(fixtures().join("archive_manifest.tsv")).unwrap();
    for line in manifest.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        let (archive, descriptor, listed) = (cols[0], cols[1], cols[2]);
        let pkg = Path::new(descriptor).file_stem().unwrap().to_str().unwrap();
        let style = if descriptor.contains('/') { LayoutStyle::LetterTree } else { LayoutStyle::Flat };
        let source_root = fixtures().join(archive);
        let source_dir = source_root.join(Path::new(descriptor).parent().unwrap());

        let outer = tempfile::tempdir().unwrap();
        let target = outer.path().join("ado");
        fs::create_dir(&target).unwrap();
        let record = Installer::new(None)
            .install(pkg, &ArchiveLayout::new(dir_source(archive), style), &target)
            .unwrap();

        let mut expected: BTreeMap<String, Vec<u8>> = listed
            .split(' ')
            .map(|f| {
                let letter = f.chars().next().unwrap().to_ascii_lowercase();
                (format!("{letter}/{f}"), fs::read(source_dir.join(f)).unwrap())
            })
            .collect();
        expected.insert(format!("{}/{pkg}.pkg", &pkg[..1]), fs::read(source_root.join(descriptor)).unwrap());

        assert_eq!(snapshot(&target), expected, "{archive}/{descriptor}");
        assert_eq!(record.files.len(), expected.len());
        assert_eq!(snapshot(outer.path()).len(), expected.len(), "wrote outside the target");
    }
}

#[test]
fn http_and_directory_routes_are_identical() {
    let server = support::http::serve(&fixtures());
    let cases = [
        ("mdesc", "archive", LayoutStyle::LetterTree, ""),
        ("estout", "archive", LayoutStyle::LetterTree, "moved/"),
        ("gtools", "archive_flat", LayoutStyle::Flat, "moved/"),
    ];
    for (pkg, archive, style, prefix) in cases {
        let via_dir = tempfile::tempdir().unwrap();
        let via_http = tempfile::tempdir().unwrap();
        let installer = Installer::new(None);
        installer
            .install(pkg, &ArchiveLayout::new(dir_source(archive), style), via_dir.path())
            .unwrap();
        let url = SourceLocation::parse(&format!("{}{prefix}{archive}/", server.base)).unwrap();
        installer
            .install(pkg, &ArchiveLayout::new(url, style), via_http.path())
            .unwrap();
        let a = snapshot(via_dir.path());
        assert!(!a.is_empty());
        assert_eq!(a, snapshot(via_http.path()), "{pkg}");
    }
    assert!(server.requests.load(std::sync::atomic::Ordering::SeqCst) > 0);
}

#[test]
fn http_missing_package_is_not_in_archive() {
    let server = support::http::serve(&fixtures());
    let url = SourceLocation::parse(&format!("{}archive/", server.base)).unwrap();
    let err = Installer::new(None)
        .fetch(&ArchiveLayout::for_source(&url), "absent")
        .unwrap_err();
    assert!(matches!(err, SourceError::NotInArchive(_)), "{err}");
}

#[test]
fn requirement_from_clause_selects_flat_layout() {
    let target = tempfile::tempdir().unwrap();
    let line = format!("gtools >= 1.11 , from(\"{}\")", fixtures().join("archive_flat").display());
    let set = reqgate::parse_requirements_file(&line).unwrap();
    let env = HostEnvironment::new(SearchPath::new([target.path()]));
    let installer = Installer::new(None);
    let report = installer.ensure(&set, &env, &extractor(), target.path());
    assert!(report.is_ok(), "{:?}", report.failure_message());
    assert!(target.path().join("g/gtools_unix_v3.plugin").is_file());
}

#[test]
fn failed_fetch_leaves_target_untouched() {
    let archive = tempfile::tempdir().unwrap();
    fs::write(archive.path().join("broken.pkg"), "d broken\nf broken.ado\nf broken_helper.ado\n").unwrap();
    fs::write(archive.path().join("broken.ado"), "*! version 1.0\n").unwrap();
    let target = tempfile::tempdir().unwrap();
    let layout = ArchiveLayout::for_source(&SourceLocation::Directory(archive.path().to_path_buf()));
    let err = Installer::new(None).install("broken", &layout, target.path()).unwrap_err();
    assert!(matches!(err, SourceError::Fetch { .. }), "{err}");
    assert!(snapshot(target.path()).is_empty());
}

#[test]
fn failed_write_rolls_back_staged_files() {
    let archive = tempfile::tempdir().unwrap();
    fs::write(archive.path().join("alpha.pkg"), "d alpha\nf alpha.ado\nf zeta_helper.ado\n").unwrap();
    fs::write(archive.path().join("alpha.ado"), "*! version 1.0\n").unwrap();
    fs::write(archive.path().join("zeta_helper.ado"), "program zeta_helper\nend\n").unwrap();
    let target = tempfile::tempdir().unwrap();
    // A plain file where the `z` letter directory would go blocks the write.
    fs::write(target.path().join("z"), "occupied").unwrap();
    let before = snapshot(target.path());

    let layout = ArchiveLayout::for_source(&SourceLocation::Directory(archive.path().to_path_buf()));
    let err = Installer::new(None).install("alpha", &layout, target.path()).unwrap_err();
    assert!(matches!(err, SourceError::Io { .. }), "{err}");
    assert_eq!(snapshot(target.path()), before);
    assert!(!target.path().join("a").exists());
}
