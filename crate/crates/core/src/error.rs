use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix size {0} is odd, cannot form the 2n x 2n symplectic J")]
    OddDimension(usize),

    #[error("invalid delays: {0}")]
    InvalidDelays(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero vector supplied where a nonzero vector is required")]
    ZeroVector,

    #[error("characteristic matrix at shift {shift} is numerically singular (pivot ratio {pivot_ratio:.3e})")]
    SingularShift { shift: String, pivot_ratio: f64 },

    #[error("interpolation in step {step} did not resolve below max degree {max_degree}")]
    DegreeExceeded { step: &'static str, max_degree: usize },

    #[error("resolvent output has relative imaginary part {ratio:.3e} above tolerance {tol:.1e}")]
    RealnessViolated { ratio: f64, tol: f64 },

    #[error("operator application failed in iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("mismatched Chebyshev domains: half widths {0} and {1}")]
    DomainMismatch(f64, f64),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}
