//! One error type for the whole binary, carrying the failure class that
//! determines the process exit code (1 validation, 2 numerical, 3 I/O).

use growth_lab::{ClassifyError, FailureKind};

#[derive(Debug)]
pub struct CliError {
    pub kind: FailureKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: FailureKind::Validation,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            kind: FailureKind::Io,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Validation => 1,
            FailureKind::Numerical => 2,
            FailureKind::Io => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<growth_lab::sim_core::SimError> for CliError {
    fn from(e: growth_lab::sim_core::SimError) -> Self {
        CliError {
            kind: e.failure_kind(),
            message: e.to_string(),
        }
    }
}

impl From<growth_lab::kinetics::KineticsError> for CliError {
    fn from(e: growth_lab::kinetics::KineticsError) -> Self {
        // Surface the corrective step size alongside the violation itself.
        let message = match &e {
            growth_lab::kinetics::KineticsError::CflViolation { vmax, dt: _, dx } => format!(
                "{e}; the boundary cells are half-width, so stability needs \
                 dt <= dx / (2 * max |velocity|); try dt <= {:.3e}",
                dx / (2.0 * vmax)
            ),
            _ => e.to_string(),
        };
        CliError {
            kind: e.failure_kind(),
            message,
        }
    }
}

impl From<growth_lab::econometrics::EconError> for CliError {
    fn from(e: growth_lab::econometrics::EconError) -> Self {
        CliError {
            kind: e.failure_kind(),
            message: e.to_string(),
        }
    }
}

impl From<growth_lab::dataio::DataError> for CliError {
    fn from(e: growth_lab::dataio::DataError) -> Self {
        CliError {
            kind: e.failure_kind(),
            message: e.to_string(),
        }
    }
}

impl From<growth_lab::grid::GridError> for CliError {
    fn from(e: growth_lab::grid::GridError) -> Self {
        CliError {
            kind: e.failure_kind(),
            message: e.to_string(),
        }
    }
}

impl From<growth_lab::law_lab::LawError> for CliError {
    fn from(e: growth_lab::law_lab::LawError) -> Self {
        CliError {
            kind: e.failure_kind(),
            message: e.to_string(),
        }
    }
}

impl From<growth_lab::stats::StatsError> for CliError {
    fn from(e: growth_lab::stats::StatsError) -> Self {
        CliError {
            kind: e.failure_kind(),
            message: e.to_string(),
        }
    }
}

/// I/O helpers with path context.
pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::io(format!("could not write {}: {e}", path.display())))
}

pub fn create_dir(path: &std::path::Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::io(format!("could not create {}: {e}", path.display())))
}
