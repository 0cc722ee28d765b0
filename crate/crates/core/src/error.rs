use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NonHermitian { residual: f64 },
    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("algebras live in different ambient dimensions ({0} vs {1})")]
    AmbientMismatch(usize, usize),
    #[error("not a subalgebra: {0}")]
    NotSubalgebra(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid product isomorphism: {0}")]
    InvalidIsomorphism(String),
    #[error("algebras do not commute (commutator norm {0:.3e})")]
    NotCommuting(f64),
    #[error("map domain is not the full matrix algebra (dim {dim}, ambient {ambient})")]
    DomainNotFull { dim: usize, ambient: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("map is not completely positive (min Choi eigenvalue {0:.3e})")]
    NotCp(f64),
    #[error("map is not unital (residual {0:.3e})")]
    NotUnital(f64),
    #[error("invalid projective measurement: {0}")]
    InvalidMeasurement(String),
    #[error("no product isomorphism: dim(join) = {join} but dim(A1)*dim(A2) = {product}")]
    NoProductIsomorphism { join: usize, product: usize },
    #[error("operation is not nonselective: {0}")]
    NotNonselective(String),
    #[error("unknown instance family `{0}`")]
    UnknownFamily(String),
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            found: found.into(),
        }
    }

    /// True for failures caused by numerical conditioning rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::IllConditioned(_))
    }
}
