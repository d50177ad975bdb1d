//! Verification suites behind the `verify` binary: function-table loading,
//! validated run plans, and JSON-lines reporting.

pub mod plan;
pub mod table;

pub use plan::{run_plan, run_suite, Plan, ReportSink, Suite, SuiteConfig, Task};
pub use table::{load_function, parse_function, LoadError, TableError};

/// Exit status when every check passed.
pub const EXIT_PASS: u8 = 0;
/// Exit status when at least one check failed.
pub const EXIT_FAIL: u8 = 1;
/// Exit status for configuration and I/O errors.
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error(transparent)]
    Check(#[from] hypercube::Error),
}
