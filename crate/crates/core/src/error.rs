use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid problem dimensions: {0}")]
    InvalidDims(String),

    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("could not place {r} sources with wrap-around separation {min_sep} after {attempts} attempts")]
    SeparationInfeasible {
        r: usize,
        min_sep: f64,
        attempts: usize,
    },

    #[error("measurements are identically zero; spectral initialisation is undefined")]
    DegenerateMeasurements,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed instance: {0}")]
    Instance(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_shape(
    op: &'static str,
    got: (usize, usize),
    expected: (usize, usize),
) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            op,
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        })
    }
}

pub(crate) fn check_len(op: &'static str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        })
    }
}
