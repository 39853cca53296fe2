use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("real Schur iteration did not converge for a {0}x{0} matrix")]
    SchurNoConvergence(usize),

    #[error("spectral overlap: eigenvalue {a_re}{a_im:+}i of the left operator and {b_re}{b_im:+}i of the right operator sum to ~0")]
    SpectralOverlap {
        a_re: f64,
        a_im: f64,
        b_re: f64,
        b_im: f64,
    },

    #[error("singular shifted operator at shift {0}")]
    SingularShift(String),

    #[error("matrix logarithm undefined: eigenvalue {0} on the closed negative real axis")]
    LogBranch(f64),

    #[error("numerical rank {rank} below requested {wanted}")]
    RankDeficient { rank: usize, wanted: usize },

    #[error("projection breakdown: W^T V is numerically singular")]
    ProjectionBreakdown,

    #[error("matrix is not Hurwitz (spectral abscissa {0})")]
    NotHurwitz(f64),

    #[error("indefinite Gramian: {0}")]
    Indefinite(String),

    #[error("{0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerical data rather than the inputs' shape or files.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Dimension(_) | Error::InvalidInput(_) | Error::Parse(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
