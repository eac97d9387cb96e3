use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong while building geometries or solving for modes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("emitters {first} and {second} coincide (separation {separation:e} wavelengths)")]
    CoincidentEmitters {
        first: usize,
        second: usize,
        separation: f64,
    },

    #[error(
        "array is not C{n_cells}-symmetric: worst mismatch {deviation:e} between cell {cell} and cell {next_cell}, component {component}"
    )]
    Symmetry {
        n_cells: usize,
        cell: usize,
        next_cell: usize,
        component: usize,
        deviation: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("parse error in {}{}: {message}", path.display(), line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
