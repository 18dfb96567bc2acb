use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("year {year}: probabilities sum to {sum}, expected 1")]
    Normalization { year: i64, sum: f64 },

    #[error("duplicate bin (year {year}, hs {hs}, tp {tp})")]
    DuplicateBin { year: i64, hs: f64, tp: f64 },

    #[error("schema error at line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("bodies {p} and {q} overlap (distance {distance:.3} m, need > {min:.3} m)")]
    Overlap {
        p: usize,
        q: usize,
        distance: f64,
        min: f64,
    },

    #[error("hydrodynamic solve failed for R={radius}, D={draft}, h={depth}, omega={omega}: {message}")]
    Solver {
        radius: f64,
        draft: f64,
        depth: f64,
        omega: f64,
        message: String,
    },

    #[error("power matrix does not cover sea state hs={hs}, tp={tp}")]
    Coverage { hs: f64, tp: f64 },

    #[error("impedance matrix is singular at omega={omega}")]
    Singular { omega: f64 },

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),

    #[error("iteration did not converge: {0}")]
    Iteration(String),

    #[error("unknown preset '{name}'; available: {}", available.join(", "))]
    UnknownPreset { name: String, available: Vec<String> },

    #[error("study configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
