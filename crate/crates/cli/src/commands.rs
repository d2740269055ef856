//! Subcommand handlers.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Local};
use serde_json::{json, Value};

use reqgate::coverage::{self, ReportFormat};
use reqgate::gate::{is_host_name, SandboxOptions};
use reqgate::setup::{self, SetupOptions};
use reqgate::starbang::parse_starbang;
use reqgate::version::format_date;
use reqgate::{
    check_all, load_requirements_file, parse_inline, sandbox_verify, which, CoverageError, Extractor,
    HostEnvironment, Installer, LoadError, OverrideError, OverrideTable, PackageQueryResult, ReleaseDate, Report,
    RequirementSet, SearchPath, SetupError, SourceLocation, VerifyError, WhichError,
};

use crate::args::{
    BenchArgs, CheckArgs, Cli, Command, Format, GlobalArgs, InstallArgs, ParseLineArgs, RequirementArgs, SetupArgs,
    VerifyArgs, WhichArgs,
};
use crate::exit::{Failure, Outcome, NOT_FOUND, NO_VERSION, UNMET};

/// File looked up next to the executable when no table is named.
const OVERRIDES_FILE: &str = "overrides.tsv";

pub fn run(cli: Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Check(a) => check(g, a),
        Command::Install(a) => install(g, a),
        Command::Setup(a) => setup_cmd(g, a),
        Command::Which(a) => which_cmd(g, a),
        Command::ParseLine(a) => parse_line(g, a),
        Command::Verify(a) => verify(g, a),
        Command::Bench(a) => bench(g, a),
    }
}

fn search_path(g: &GlobalArgs) -> SearchPath {
    if g.adopath.is_empty() {
        SearchPath::from_env().unwrap_or_default()
    } else {
        SearchPath::new(&g.adopath)
    }
}

fn overrides(g: &GlobalArgs) -> Result<OverrideTable, Failure> {
    let explicit = g.overrides.clone().or_else(|| {
        let beside = std::env::current_exe().ok()?.parent()?.join(OVERRIDES_FILE);
        beside.is_file().then_some(beside)
    });
    match explicit {
        Some(path) => OverrideTable::load(&path).map_err(|e| match e {
            OverrideError::Io { .. } => Failure::usage(e),
            OverrideError::Line { .. } => Failure::syntax(format!("{}: {e}", path.display())),
        }),
        None => Ok(OverrideTable::builtin()),
    }
}

fn extractor(g: &GlobalArgs) -> Result<Extractor, Failure> {
    let limit = usize::try_from(g.scan_limit).unwrap_or(usize::MAX);
    Ok(Extractor::new(overrides(g)?, limit))
}

fn location(text: &str) -> Result<SourceLocation, Failure> {
    SourceLocation::parse(text).map_err(Failure::usage)
}

fn installer(g: &GlobalArgs) -> Result<Installer, Failure> {
    let archive = match &g.default_archive {
        Some(text) => match location(text)? {
            SourceLocation::DefaultArchive => {
                return Err(Failure::usage("--default-archive must be a URL or a directory"))
            }
            loc => Some(loc),
        },
        None => None,
    };
    Ok(Installer::new(archive).with_retries(g.retries))
}

fn load_set(path: &Path) -> Result<RequirementSet, Failure> {
    load_requirements_file(path).map_err(|e| match e {
        LoadError::Io { .. } => Failure::usage(e),
        LoadError::Parse(p) => Failure::syntax(format!("{}: {p}", path.display())),
    })
}

fn requirement_set(a: &RequirementArgs) -> Result<RequirementSet, Failure> {
    let mut set = match &a.using {
        Some(path) => load_set(path)?,
        None if a.reqs.is_empty() => return Err(Failure::usage("no requirements given (pass REQS or --using FILE)")),
        None => parse_inline(&a.reqs).map_err(Failure::syntax)?,
    };
    apply_min_date(&mut set, a.min_date);
    Ok(set)
}

fn apply_min_date(set: &mut RequirementSet, date: Option<ReleaseDate>) {
    let Some(date) = date else { return };
    for r in &mut set.requirements {
        if r.min_date.is_none() && !is_host_name(&r.name) {
            r.min_date = Some(date);
        }
    }
}

fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

/// Print `report` as the command's result and map it to an exit code.
fn finish(g: &GlobalArgs, report: &Report) -> Outcome {
    if g.json {
        print_json(&report.to_json());
    }
    match report.failure_message() {
        None => Ok(()),
        Some(message) => Err(Failure::with_code(UNMET, message)),
    }
}

fn check(g: &GlobalArgs, a: &CheckArgs) -> Outcome {
    let set = requirement_set(&a.requirements)?;
    let env = HostEnvironment::new(search_path(g)).with_host_version(g.host_version);
    finish(g, &check_all(&set, &env, &extractor(g)?))
}

fn install(g: &GlobalArgs, a: &InstallArgs) -> Outcome {
    let mut set = requirement_set(&a.requirements)?;
    if let Some(from) = &a.from {
        set.default_source(&location(from)?);
    }
    let sp = search_path(g);
    let target = sp
        .directories
        .first()
        .cloned()
        .ok_or_else(|| Failure::usage("install needs a target: pass --adopath DIR or set REQGATE_PATH"))?;
    std::fs::create_dir_all(&target).map_err(|e| Failure::usage(format!("{}: {e}", target.display())))?;
    let env = HostEnvironment::new(sp).with_host_version(g.host_version);
    let report = installer(g)?.ensure(&set, &env, &extractor(g)?, &target);
    if !g.json {
        for v in report.verdicts.iter().filter(|v| v.status.is_ok()) {
            if let Some(note) = &v.note {
                eprintln!("reqgate: {}: {note}", v.requirement.name);
            }
        }
    }
    finish(g, &report)
}

/// Date stamped into generated files: SOURCE_DATE_EPOCH when set, else today.
fn generation_date() -> Result<ReleaseDate, Failure> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(text) => {
            let secs: i64 = text
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("SOURCE_DATE_EPOCH `{text}` is not an integer")))?;
            DateTime::from_timestamp(secs, 0)
                .map(|t| ReleaseDate::from(t.date_naive()))
                .ok_or_else(|| Failure::usage(format!("SOURCE_DATE_EPOCH `{text}` is out of range")))
        }
        Err(_) => Ok(ReleaseDate::from(Local::now().date_naive())),
    }
}

fn setup_cmd(g: &GlobalArgs, a: &SetupArgs) -> Outcome {
    let options = SetupOptions {
        minimum: a.minimum,
        host_line: a.host,
        host_version: g.host_version,
    };
    let installed = setup::enumerate_search_path(&search_path(g), &extractor(g)?);
    for e in &installed.errors {
        eprintln!("reqgate: warning: {e}");
    }
    let content = setup::render(&installed, &options, &generation_date()?).map_err(|e| match e {
        SetupError::NoHostVersion => Failure::usage("--host needs --host-version"),
        other => Failure::usage(other),
    })?;
    if a.save {
        setup::save(&content, &a.using, a.replace).map_err(Failure::usage)?;
    }
    if g.json {
        print_json(&json!({
            "file": a.save.then(|| a.using.display().to_string()),
            "content": content,
            "packages": installed.packages,
            "unversioned": installed.unversioned.iter().map(|u| json!({
                "package": u.package,
                "filename": u.path.display().to_string(),
                "reason": u.reason,
            })).collect::<Vec<_>>(),
        }));
    } else if !a.save {
        print!("{content}");
    }
    Ok(())
}

fn null_query(package: &str, filename: Option<&Path>) -> Value {
    json!({
        "package": package,
        "version": null,
        "version_major": null,
        "version_minor": null,
        "version_patch": null,
        "version_date": null,
        "filename": filename.map(|p| p.display().to_string()),
        "raw_line": null,
    })
}

fn print_query(q: &PackageQueryResult) {
    println!("package: {}", q.package);
    println!("version: {}", q.version);
    println!("version_date: {}", q.version_date.as_deref().unwrap_or(""));
    println!("filename: {}", q.filename);
    println!("raw_line: {}", q.raw_line);
}

fn which_cmd(g: &GlobalArgs, a: &WhichArgs) -> Outcome {
    match which(&a.package, &search_path(g), &extractor(g)?) {
        Ok(q) => {
            if g.json {
                print_json(&serde_json::to_value(&q).expect("serializable"));
            } else {
                print_query(&q);
            }
            Ok(())
        }
        Err(e @ WhichError::NotFound(_)) => {
            if g.json {
                print_json(&null_query(&a.package, None));
            }
            Err(Failure::with_code(NOT_FOUND, e))
        }
        Err(WhichError::NoVersion { ref package, ref path }) => {
            if g.json {
                print_json(&null_query(package, Some(path)));
            } else {
                println!("package: {package}");
                println!("filename: {}", path.display());
            }
            Err(Failure::with_code(
                NO_VERSION,
                format!("no version information in {}", path.display()),
            ))
        }
        Err(e @ WhichError::Io { .. }) => Err(Failure::usage(e)),
    }
}

/// First word after `*!`, used as the hint when none is given.
fn first_word(line: &str) -> String {
    let rest = line.trim_start().strip_prefix("*!").unwrap_or(line);
    rest.split_whitespace().next().unwrap_or("").to_string()
}

fn parse_line(g: &GlobalArgs, a: &ParseLineArgs) -> Outcome {
    let table = overrides(g)?;
    let hint = a.hint.clone().unwrap_or_else(|| first_word(&a.line));
    let rules: Vec<&str> = table.rules_for(&hint).map(|r| r.package_name()).collect();
    let parsed = parse_starbang(&a.line, &hint, &table);
    if g.json {
        let mut doc = match &parsed {
            Ok(r) => json!({
                "version": r.version.canonical(),
                "version_major": r.version.major,
                "version_minor": r.version.minor,
                "version_patch": r.version.patch,
                "version_date": r.date.as_ref().map(format_date),
                "pattern": r.pattern_id.as_str(),
                "package": r.package,
                "raw_line": r.raw_line,
            }),
            Err(_) => json!({ "version": null, "pattern": null, "raw_line": a.line }),
        };
        if a.debug {
            doc["hint"] = json!(hint);
            doc["override_rules"] = json!(rules.len());
        }
        print_json(&doc);
    } else {
        if a.debug {
            println!("hint: {hint}");
            println!("override_rules: {}", rules.len());
        }
        if let Ok(r) = &parsed {
            println!("version: {}", r.version.canonical());
            println!("version_date: {}", r.date.as_ref().map(format_date).unwrap_or_default());
            println!("pattern: {}", r.pattern_id.as_str());
            if a.debug {
                println!("package: {}", r.package.as_deref().unwrap_or(""));
            }
        }
    }
    match parsed {
        Ok(_) => Ok(()),
        Err(_) => Err(Failure::with_code(NO_VERSION, "no version found in line")),
    }
}

fn verify(g: &GlobalArgs, a: &VerifyArgs) -> Outcome {
    let mut set = load_set(&a.using)?;
    apply_min_date(&mut set, a.min_date);
    if let Some(from) = &a.from {
        set.default_source(&location(from)?);
    }
    let options = SandboxOptions {
        command: a.run.clone(),
        replace: a.replace,
    };
    let workdir = absolute(&a.workdir)?;
    let report = sandbox_verify(&set, &workdir, &options, &installer(g)?, &extractor(g)?, g.host_version)
        .map_err(|e| match e {
            VerifyError::WorkdirNotEmpty(_) | VerifyError::Io { .. } => Failure::usage(e),
        })?;
    finish(g, &report)
}

/// The command run by `verify` may change directory, so hand it an
/// absolute search path.
fn absolute(path: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn bench(g: &GlobalArgs, a: &BenchArgs) -> Outcome {
    let format = match a.format {
        Some(Format::Text) => ReportFormat::Text,
        Some(Format::Csv) => ReportFormat::Csv,
        Some(Format::Json) => ReportFormat::Json,
        None if g.json => ReportFormat::Json,
        None => ReportFormat::Text,
    };
    let stats = coverage::evaluate(&a.corpus, &a.truth, &extractor(g)?).map_err(|e| match e {
        CoverageError::Io { .. } => Failure::usage(e),
        other => Failure::syntax(other),
    })?;
    print!("{}", coverage::report(&stats, format));
    Ok(())
}
