use thiserror::Error;

/// Errors raised by mesh construction, assembly, solves and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("refinement level must be at least 1, got {0}")]
    InvalidLevel(usize),

    #[error("mesh at level {level} does not fit the vertex index type")]
    MeshTooLarge { level: usize },

    #[error("no {shape} quadrature rule of degree {degree} (maximum {max})")]
    UnsupportedQuadrature {
        shape: &'static str,
        degree: usize,
        max: usize,
    },

    #[error("element {0} is degenerate")]
    DegenerateElement(usize),

    #[error("point ({x}, {y}) lies outside the plate domain")]
    PointOutsidePlate { x: f64, y: f64 },

    #[error("point ({x}, {y}, {z}) lies outside the fluid domain")]
    PointOutsideFluid { x: f64, y: f64, z: f64 },

    #[error("singular system in {context}{}", pivot.map(|p| format!(" (pivot {p})")).unwrap_or_default())]
    Singular {
        context: String,
        pivot: Option<usize>,
    },

    #[error("{context}: relative residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    NotConverged {
        context: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("level {level}, {stage}: {source}")]
    AtLevel {
        level: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps `self` with the refinement level and pipeline stage that failed.
    pub fn at_level(self, level: usize, stage: &'static str) -> Self {
        Error::AtLevel {
            level,
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
