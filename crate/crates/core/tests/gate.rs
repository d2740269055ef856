use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use reqgate::gate::SandboxOptions;
use reqgate::requirements::parse_inline;
use reqgate::sources::Installer;
use reqgate::starbang::OverrideTable;
use reqgate::{
    check_all, check_one, sandbox_verify, Constraint, Extractor, HostEnvironment, Requirement, RequirementSet,
    SearchPath, SemVer, SourceLocation, Status, VerifyError,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn extractor() -> Extractor {
    Extractor::new(OverrideTable::empty(), 25)
}

fn plant(root: &Path, pkg: &str, version: &str) {
    let dir = root.join(&pkg[..1]);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(format!("{pkg}.ado")), format!("*! version {version} 01jan2020\n")).unwrap();
}

/// Independent oracle for a single verdict on a planted tree.
fn expected_status(installed: Option<(u64, u64, u64)>, constraint: &Constraint) -> Status {
    let Some(have) = installed else { return Status::NotInstalled };
    match constraint {
        Constraint::Any => Status::Satisfied,
        Constraint::Minimum(v) if have >= v.triple() => Status::Satisfied,
        Constraint::Minimum(_) => Status::VersionTooLow,
        Constraint::Exact(v) if have == v.triple() => Status::Satisfied,
        Constraint::Exact(_) => Status::VersionMismatch,
    }
}

fn triple() -> impl Strategy<Value = (u64, u64, u64)> {
    (0u64..4, 0u64..4, 0u64..4)
}

fn constraint() -> impl Strategy<Value = Constraint> {
    prop_oneof![
        Just(Constraint::Any),
        triple().prop_map(|(a, b, c)| Constraint::Minimum(SemVer::new(a, b, c))),
        triple().prop_map(|(a, b, c)| Constraint::Exact(SemVer::new(a, b, c))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn check_all_agrees_with_check_one_and_oracle(
        cases in proptest::collection::btree_map("[a-z][a-z0-9]{0,6}", (proptest::option::of(triple()), constraint()), 1..10)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut set = RequirementSet::default();
        for (pkg, (installed, c)) in &cases {
            if let Some((a, b, p)) = installed {
                plant(dir.path(), pkg, &format!("{a}.{b}.{p}"));
            }
            set.requirements.push(Requirement::new(pkg, *c));
        }
        let env = HostEnvironment::new(SearchPath::new([dir.path()]));
        let report = check_all(&set, &env, &extractor());
        prop_assert_eq!(report.verdicts.len(), set.len());
        for ((r, verdict), (installed, c)) in set.iter().zip(&report.verdicts).zip(cases.values()) {
            prop_assert_eq!(&verdict.requirement, r);
            prop_assert_eq!(verdict, &check_one(r, &env, &extractor()));
            prop_assert_eq!(verdict.status, expected_status(*installed, c));
        }
        let all_ok = report.verdicts.iter().all(|v| v.status == Status::Satisfied);
        prop_assert_eq!(report.is_ok(), all_ok);
        prop_assert_eq!(report.error_id().is_some(), !all_ok);
        // Satisfied results stay satisfied on a re-check.
        let again = check_all(&set, &env, &extractor());
        prop_assert_eq!(again.verdicts, report.verdicts);
    }
}

#[test]
fn date_requirement() {
    let dir = tempfile::tempdir().unwrap();
    plant(dir.path(), "dated", "1.0");
    let env = HostEnvironment::new(SearchPath::new([dir.path()]));
    let check = |args: &[&str]| check_all(&parse_inline(args).unwrap(), &env, &extractor()).verdicts[0].status;
    assert_eq!(check(&["dated", "@>=", "01jan2020"]), Status::Satisfied);
    assert_eq!(check(&["dated", "@>=2020-01-02"]), Status::DateTooOld);
    assert_eq!(check(&["dated", ">=", "2.0", "@>=", "01jan2030"]), Status::VersionTooLow);
}

#[test]
fn host_requirement() {
    let env = HostEnvironment::new(SearchPath::default()).with_host_version(Some(SemVer::new(17, 0, 0)));
    let report = check_all(&parse_inline(&["stata >= 16", "host == 18"]).unwrap(), &env, &extractor());
    assert_eq!(report.verdicts[0].status, Status::Satisfied);
    assert_eq!(report.verdicts[1].status, Status::VersionMismatch);
}

fn archive() -> Installer {
    Installer::new(Some(SourceLocation::Directory(fixtures().join("archive"))))
}

#[test]
fn sandbox_ignores_packages_outside_workdir() {
    // Wrong and right versions planted elsewhere must not influence the result.
    let outside = tempfile::tempdir().unwrap();
    plant(outside.path(), "mdesc", "9.9.9");
    plant(outside.path(), "ivreg2", "0.0.1");
    let work = tempfile::tempdir().unwrap();
    let workdir = work.path().join("sandbox");
    let set = parse_inline(&["mdesc == 0.9.4", "ivreg2 >= 4.1", "esttab", "stata >= 17"]).unwrap();

    let probe = format!("test \"$REQGATE_PATH\" = '{}' && test -f \"$REQGATE_PATH/m/mdesc.ado\"", workdir.display());
    let options = SandboxOptions {
        command: Some(probe),
        replace: false,
    };
    let report = sandbox_verify(&set, &workdir, &options, &archive(), &extractor(), Some(SemVer::new(18, 0, 0))).unwrap();
    let statuses: Vec<_> = report.verdicts.iter().map(|v| v.status).collect();
    assert_eq!(statuses, [Status::Satisfied, Status::Satisfied, Status::NotInstalled, Status::Satisfied]);
    assert!(report.verdicts[2].note.as_deref().unwrap().contains("install failed"));
    let cmd = report.command.as_ref().unwrap();
    assert!(cmd.success, "{cmd:?}");
    for v in &report.verdicts[..2] {
        let found = v.found.as_ref().unwrap();
        assert!(Path::new(&found.filename).starts_with(&workdir), "{}", found.filename);
    }
}

#[test]
fn sandbox_command_failure_fails_the_report() {
    let work = tempfile::tempdir().unwrap();
    let set = parse_inline(&["mdesc"]).unwrap();
    let options = SandboxOptions {
        command: Some("exit 3".to_string()),
        replace: false,
    };
    let report = sandbox_verify(&set, work.path(), &options, &archive(), &extractor(), None).unwrap();
    assert_eq!(report.verdicts[0].status, Status::Satisfied);
    assert_eq!(report.command.as_ref().unwrap().exit_code, Some(3));
    assert!(report.command_failed());
    assert!(!report.is_ok());
}

#[test]
fn sandbox_refuses_non_empty_workdir_unless_replacing() {
    let work = tempfile::tempdir().unwrap();
    fs::write(work.path().join("stale.txt"), "x").unwrap();
    let set = parse_inline(&["mdesc"]).unwrap();
    let err = sandbox_verify(&set, work.path(), &SandboxOptions::default(), &archive(), &extractor(), None).unwrap_err();
    assert!(matches!(err, VerifyError::WorkdirNotEmpty(_)));
    assert!(work.path().join("stale.txt").exists());

    let options = SandboxOptions {
        command: None,
        replace: true,
    };
    let report = sandbox_verify(&set, work.path(), &options, &archive(), &extractor(), None).unwrap();
    assert!(report.is_ok());
    assert!(!work.path().join("stale.txt").exists());
}
