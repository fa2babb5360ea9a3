//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration text could not be parsed.
    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    /// A configuration value violates an invariant. `key` names the field.
    #[error("invalid config value for `{key}`: {msg}")]
    ConfigValue { key: String, msg: String },

    /// Mesh or boundary-condition construction failed.
    #[error("mesh error: {0}")]
    Mesh(String),

    /// Vector or field shape does not match the mesh.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A linear solve failed (breakdown, singular matrix, non-finite values).
    #[error("solver error: {0}")]
    Solver(String),

    /// The reduced basis lost rank or produced a singular projected system.
    #[error("degenerate reduced basis: {0}")]
    DegenerateBasis(String),

    /// Boundary-smoothing post-processing failed.
    #[error("postprocess error: {0}")]
    Postprocess(String),

    /// The load vector is identically zero; relative residuals are undefined.
    #[error("zero load vector")]
    ZeroLoad,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
