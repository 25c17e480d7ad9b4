use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate triangle (signed area {area:e})")]
    DegenerateTriangle { area: f64 },

    #[error("product degree {degree} exceeds the configured maximum {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mesh file parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error(
        "singular saddle system ({0}); k^2 may be close to a discrete Dirichlet eigenvalue"
    )]
    SingularSystem(String),

    #[error(
        "constrained solve did not converge in {iterations} iterations \
         (smoothness residual {smoothness_residual:e}, equation residual {equation_residual:e})"
    )]
    NotConverged {
        iterations: usize,
        smoothness_residual: f64,
        equation_residual: f64,
    },

    #[error("no sample points in the requested region")]
    EmptySampleSet,

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
