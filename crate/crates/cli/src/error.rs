use std::path::PathBuf;

/// Exit status for a run whose checks all pass.
pub const EXIT_PASS: i32 = 0;
/// Exit status when at least one check fails.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for usage and validation errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for runtime errors.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// A parameter rejected by a library precondition.
    #[error("{module}: {source}")]
    Invalid {
        module: &'static str,
        #[source]
        source: fsreg::Error,
    },

    /// A library error raised while computing one cell.
    #[error("{context}: {source}")]
    Module {
        context: String,
        #[source]
        source: fsreg::Error,
    },

    #[error("non-finite value {value} in {file}, row {row}, column `{column}`")]
    NonFinite {
        file: String,
        row: usize,
        column: String,
        value: f64,
    },

    #[error("output directory {} already exists and is not empty", .0.display())]
    OutputExists(PathBuf),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Invalid { .. } => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

/// Tags a validation failure with the library module that raised it.
pub fn invalid(module: &'static str) -> impl FnOnce(fsreg::Error) -> CliError {
    move |source| CliError::Invalid { module, source }
}

/// Tags a computation failure with the cell it belongs to.
pub fn in_cell(context: impl Into<String>) -> impl FnOnce(fsreg::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Module { context, source }
}

/// A validation failure raised by the CLI itself.
pub fn usage(module: &'static str, field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{module}: invalid parameter `{field}`: {reason}"))
}
