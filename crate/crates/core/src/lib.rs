//! Version gate for packages whose only version metadata is a `*!` header
//! comment in their main source file.
//!
//! The pipeline: [`locator`] finds a package's main file on an ordered search
//! path, [`starbang`] reads the version and release date from its header, and
//! [`gate`] checks the result against [`requirements`]. [`sources`] installs
//! missing packages from an archive, [`setup`] writes a requirements file for
//! an installed tree, and [`coverage`] scores extraction over a corpus.

pub mod coverage;
pub mod error;
pub mod gate;
pub mod locator;
pub mod query;
pub mod requirements;
pub mod setup;
pub mod sources;
pub mod starbang;
pub mod version;

pub use error::{
    CoverageError, ExtractError, LoadError, OverrideError, RequirementError, SetupError, SourceError, VerifyError,
    VersionError, WhichError,
};
pub use coverage::{CorpusStats, GroundTruthEntry, ReportFormat};
pub use gate::{check_all, check_one, sandbox_verify, HostEnvironment, Report, Status, Verdict, UNMET_ERROR_ID};
pub use locator::{resolve, which, SearchPath};
pub use query::PackageQueryResult;
pub use requirements::{load_requirements_file, parse_inline, parse_requirements_file, Requirement, RequirementSet, SourceLocation};
pub use sources::{ArchiveLayout, Installer, PackageDescriptor};
pub use starbang::{Extractor, OverrideTable, PatternId, StarbangRecord};
pub use version::{compare, parse_date, parse_version, satisfies, Constraint, ReleaseDate, SemVer};
