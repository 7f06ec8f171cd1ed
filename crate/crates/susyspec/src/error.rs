use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Validation { line: Option<usize>, msg: String },

    #[error("ill-conditioned computation in {context}: {detail}")]
    IllConditioned { context: String, detail: String },

    #[error("spectral parameter z = {z} lies within {margin:e} of [0, inf) (distance {distance:e})")]
    SpectrumProximity { z: C64, distance: f64, margin: f64 },

    #[error("spectral window too small: tail estimate {tail:e} exceeds tolerance {tolerance:e}")]
    WindowTooSmall { tail: f64, tolerance: f64 },

    #[error("degenerate decay fit: only {usable} usable points (need at least 3)")]
    DegenerateFit { usable: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn ill(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::IllConditioned {
            context: context.into(),
            detail: detail.into(),
        }
    }

    /// True for errors raised by the numerics rather than by bad input documents.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. }
                | Error::SpectrumProximity { .. }
                | Error::WindowTooSmall { .. }
                | Error::DegenerateFit { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
