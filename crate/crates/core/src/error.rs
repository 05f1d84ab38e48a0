use thiserror::Error;

/// Errors raised by the spectral solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("energy {omega} lies inside the band [0, {top}] and no branch was requested")]
    InBandWithoutBranch { omega: f64, top: f64 },

    #[error("Markovian formula requires a detuning below the band, got delta = {0}")]
    DetuningNotInGap(f64),

    #[error("no symmetric bound state found below the band (delta = {delta}, omega = {omega})")]
    NoSymmetricRoot { delta: f64, omega: f64 },

    #[error("undefined: anti-symmetric state merged into continuum")]
    AntisymmetricMerged,

    #[error("evaluated at a two-particle pole (omega = {0})")]
    AtPole(f64),

    #[error("pole {pole} lies within {gap:e} of a denominator ({what})")]
    DegenerateResidue { pole: f64, gap: f64, what: String },

    #[error("doublon pair incomplete: {0}")]
    DoublonPairIncomplete(String),

    #[error("band identification ambiguous at p-index {index}: gap {gap:e}")]
    AmbiguousBand { index: usize, gap: f64 },

    #[error("band incomplete: no isolated level at q-index {0}")]
    BandIncomplete(usize),

    #[error("optimizer did not converge after {iterations} iterations (last change {last_change:e})")]
    OptimizerNotConverged { iterations: usize, last_change: f64 },

    #[error("sector too large: dimension {dimension} exceeds bound {bound}")]
    SectorTooLarge { dimension: usize, bound: usize },

    #[error("Hamiltonian is not Hermitian on the sector (residual {0:e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge after {0} iterations")]
    EigensolverNotConverged(usize),

    #[error("M-matrix refused at {class} denominator: {detail}")]
    MMatrixRefused { class: &'static str, detail: String },

    #[error("DMRG not converged: energy change {energy_delta:e}, truncation {truncation:e}")]
    NotConverged { energy_delta: f64, truncation: f64 },

    #[error("excitation sector drift: <N> = {found}, target {target}")]
    SectorDrift { found: f64, target: f64 },

    #[error("fit window too small: {0} points")]
    WindowTooSmall(usize),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
