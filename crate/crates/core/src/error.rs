use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rank {rank} out of range (allowed 1..={max})")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigenvalue iteration failed to converge after {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("all singular values fall below the cutoff")]
    AllBelowCutoff,

    #[error("singular values must be non-increasing and non-negative")]
    UnsortedSpectrum,

    #[error("spectrum is identically zero")]
    ZeroSpectrum,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic: {0}")]
    BadMagic(String),

    #[error("time grid not increasing")]
    TimeGridNotIncreasing,

    #[error("time grid needs at least {min} instants, found {found}")]
    TimeGridTooShort { min: usize, found: usize },

    #[error("time grid is not uniform")]
    NonUniformGrid,

    #[error("instant {t} is not on the model lattice (t0 = {t0}, dt = {dt})")]
    OffLattice { t: f64, t0: f64, dt: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("train split would be empty")]
    EmptyTrainSplit,

    #[error("test split would be empty")]
    EmptyTestSplit,

    #[error("time window [{start}, {end}] does not intersect the grid in at least two instants")]
    EmptyWindow { start: f64, end: f64 },

    #[error("dataset is constant; cannot rescale")]
    ConstantDataset,

    #[error("singular value {sigma:e} below cutoff {cutoff:e} at rank {rank}")]
    SingularSigma { rank: usize, sigma: f64, cutoff: f64 },

    #[error("parameter {mu:?} lies outside the training range")]
    Extrapolation { mu: Vec<f64> },

    #[error("duplicate training parameters {0:?}")]
    DuplicateParameters(Vec<f64>),

    #[error("polynomial regression underdetermined: {samples} samples for {terms} terms and no ridge")]
    Underdetermined { samples: usize, terms: usize },

    #[error("bagging subset of {subset} instants is too small for rank {rank} (need {needed})")]
    SubsetTooSmall {
        subset: usize,
        rank: usize,
        needed: usize,
    },

    #[error("mode alignment failed between parameters {from} and {to}; matching distances {distances:?}")]
    AlignmentFailure {
        from: usize,
        to: usize,
        distances: Vec<f64>,
    },

    #[error("family is unstable: spectral radius {radius} at parameter {mu}")]
    UnstableFamily { radius: f64, mu: f64 },

    #[error("reference has zero norm")]
    ZeroNorm,

    #[error("reference column {index} has zero norm")]
    ZeroColumn { index: usize },

    #[error("model archive: {0}")]
    Archive(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence { .. }
                | Error::AllBelowCutoff
                | Error::SingularSigma { .. }
                | Error::AlignmentFailure { .. }
                | Error::UnstableFamily { .. }
                | Error::Underdetermined { .. }
                | Error::ZeroSpectrum
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
