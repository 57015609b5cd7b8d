use thiserror::Error;

/// Errors raised by the library layer.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or counts that do not line up (joint counts, stream lengths, ...).
    #[error("structural error: {0}")]
    Structure(String),

    /// A rotation that is too far from unit norm, or a degenerate encoding.
    #[error("invalid rotation: {0}")]
    Rotation(String),

    #[error("BVH parse error at line {line}: {message}")]
    Bvh { line: usize, message: String },

    #[error("clip JSON error: {0}")]
    ClipJson(String),

    #[error("unsupported clip schema version {found:?} (reader supports {supported:?})")]
    SchemaVersion { found: String, supported: String },

    #[error("reference table row {row}: {message}")]
    ReferenceRow { row: usize, message: String },

    /// Two views that cannot pin down a point.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Linear system without a unique solution.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
