use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{n} photons exceeds the supported maximum of {max}")]
    TooManyPhotons { n: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("photon index {index} out of range for a {n}-photon state")]
    PhotonIndex { index: usize, n: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("impossible outcome (probability {probability:e})")]
    ImpossibleOutcome { probability: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("incomplete tomography settings: missing basis pair {0}")]
    IncompleteSettings(String),

    #[error("inconsistent tomography table: {0}")]
    InconsistentTable(String),

    #[error("unphysical reconstruction: minimum eigenvalue {min_eigenvalue:e} below tolerance -{tolerance:e}")]
    Unphysical { min_eigenvalue: f64, tolerance: f64 },

    #[error("no estimate possible: {0}")]
    EmptyCounts(String),

    #[error("wavelength {wavelength_nm} nm outside valid range {min_nm}..{max_nm} nm")]
    WavelengthOutOfRange {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("no phase matching: residual does not change sign on [0, 90] degrees")]
    NoPhaseMatching,

    #[error("non-paraxial geometry: {0}")]
    NonParaxial(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown crystal `{0}`")]
    UnknownCrystal(String),

    #[error("crystal data line {line}: {message}")]
    CrystalData { line: usize, message: String },

    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
