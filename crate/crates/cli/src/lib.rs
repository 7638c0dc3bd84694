//! `propset` command-line driver: reads an experiment config, runs one analysis
//! and writes `<subcommand>.csv` / `<subcommand>.txt`.

pub mod config;
mod run;

use std::path::PathBuf;

use propset_core::{OperatorError, PathError, PdeError, ReachError};
use thiserror::Error;

pub use config::{ExperimentConfig, RawConfig};
pub use run::{run, Command, Invocation};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error{}: {message}", line.map_or(String::new(), |l| format!(" at line {l}")))]
    Config { line: Option<usize>, message: String },
    /// A hypothesis or precondition of the analysis does not hold.
    #[error("{0}")]
    Precondition(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Precondition(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn config(message: impl Into<String>) -> Self {
        CliError::Config {
            line: None,
            message: message.into(),
        }
    }
}

impl From<OperatorError> for CliError {
    fn from(e: OperatorError) -> Self {
        let msg = e.to_string();
        match e {
            OperatorError::H2Violation { .. } | OperatorError::NotSymmetric { .. } | OperatorError::NotPsd { .. } => {
                CliError::Precondition(msg)
            }
            OperatorError::Eval(_) => CliError::Numerical(msg),
            OperatorError::Shape(_)
            | OperatorError::DimensionMismatch(..)
            | OperatorError::InvalidDepth(_)
            | OperatorError::DomainDimension { .. }
            | OperatorError::Domain(_) => CliError::config(msg),
        }
    }
}

impl From<ReachError> for CliError {
    fn from(e: ReachError) -> Self {
        let msg = e.to_string();
        match e {
            ReachError::Operator(inner) => inner.into(),
            ReachError::UnreachedStart(_) | ReachError::OutOfBox(_) => CliError::Precondition(msg),
            ReachError::BadSpacing(_)
            | ReachError::Resolution { .. }
            | ReachError::Dimension { .. }
            | ReachError::Config(_) => CliError::config(msg),
        }
    }
}

impl From<PathError> for CliError {
    fn from(e: PathError) -> Self {
        let msg = e.to_string();
        match e {
            PathError::Reach(inner) => inner.into(),
            PathError::NotReachable(_) | PathError::Domain(_) => CliError::Precondition(msg),
            PathError::NonFinite => CliError::Numerical(msg),
            PathError::Dimension { .. } | PathError::BadStep(_) => CliError::config(msg),
        }
    }
}

impl From<PdeError> for CliError {
    fn from(e: PdeError) -> Self {
        let msg = e.to_string();
        match e {
            PdeError::Operator(inner) => inner.into(),
            PdeError::NonDiagonal
            | PdeError::Monotonicity { .. }
            | PdeError::Degeneracy { .. }
            | PdeError::NoBoundaryAccess { .. }
            | PdeError::NotInterior(_)
            | PdeError::EmptyCompact
            | PdeError::NoInterior => CliError::Precondition(msg),
            PdeError::NonFinite { .. }
            | PdeError::NonConvergence { .. }
            | PdeError::TooLarge(_)
            | PdeError::Singular => CliError::Numerical(msg),
            PdeError::BoundaryData { .. } => CliError::config(msg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(CliError::from(OperatorError::H2Violation { inf: 0.0 }).exit_code(), 3);
        assert_eq!(CliError::from(PdeError::Singular).exit_code(), 4);
        assert_eq!(CliError::from(PdeError::Operator(OperatorError::Shape("x".into()))).exit_code(), 2);
        assert_eq!(CliError::from(PathError::Reach(ReachError::OutOfBox(vec![]))).exit_code(), 3);
        let e = CliError::Config {
            line: Some(7),
            message: "unknown key `a.b`".into(),
        };
        assert_eq!(e.to_string(), "config error at line 7: unknown key `a.b`");
        assert!(CliError::from(OperatorError::H2Violation { inf: 0.0 })
            .to_string()
            .contains("H2 violation"));
    }

    #[test]
    fn bundled_configs_parse() {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            let raw = RawConfig::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            ExperimentConfig::from_raw(&raw).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
        assert!(seen >= 6);
    }
}
