//! Error taxonomy shared by all solver stages.

use thiserror::Error;

/// Errors produced by spec validation, meshing, eigensolves and the
/// BIC/resonance searches.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("clear-zone violation: {0}")]
    ClearZoneViolation(String),

    #[error("mu band admits more than one propagating mode: mu_r = {mu_r} >= pi^2/h^2 = {cutoff}")]
    MultiModeBand { mu_r: f64, cutoff: f64 },

    #[error("refractive index out of bounds: {0}")]
    BadIndexBounds(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("cannot snap mesh lines to the waveguide opening: {0}")]
    SnapFailure(String),

    #[error("eigensolver did not converge: {converged} of {requested} pairs at tolerance {tol:e}")]
    NoConvergence {
        converged: usize,
        requested: usize,
        tol: f64,
    },

    #[error("ambiguous branch assignment between delta = {delta_a} and {delta_b}: margin {margin:.3} < 0.1")]
    AmbiguousAssignment {
        delta_a: f64,
        delta_b: f64,
        margin: f64,
    },

    #[error("band violation at delta = {delta}: lambda_{index} = {lambda} <= mu = {mu}")]
    BandViolation {
        delta: f64,
        index: usize,
        lambda: f64,
        mu: f64,
    },

    #[error("near-zero radiation coupling at delta = {delta}: |a20| = {a20:e}, |a21| = {a21:e}, floor = {floor:e}")]
    NearZeroCoupling {
        delta: f64,
        a20: f64,
        a21: f64,
        floor: f64,
    },

    #[error("reduced head block is ill-conditioned: cond = {cond:e}")]
    IllConditioned { cond: f64 },

    #[error("no root of the branch equation inside the mu band at delta = {delta}: g({mu_l}) = {g_l:e}, g({mu_r}) = {g_r:e}")]
    NoRootInBand {
        delta: f64,
        mu_l: f64,
        mu_r: f64,
        g_l: f64,
        g_r: f64,
    },

    #[error("no transversal eigenvalue crossing of the tracked pair inside [{delta_l}, {delta_r}]")]
    NoCrossing { delta_l: f64, delta_r: f64 },

    #[error("branch curves mu0, mu1 do not intersect on the scan window (min gap {min_gap:e} at delta = {at_delta})")]
    NoSignChange { min_gap: f64, at_delta: f64 },

    #[error("selected mode {index} is not odd about the waveguide axis: parity defect {defect:e}")]
    ParityViolation { index: usize, defect: f64 },

    #[error("resonance root left the single-mode band: mu = {re} + {im}i")]
    EscapedBand { re: f64, im: f64 },

    #[error("resonance continuation jumped between consecutive deltas: |d mu| = {jump:e} exceeds {limit:e}")]
    BranchJump { jump: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable code, stable across versions.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ClearZoneViolation(_) => "ClearZoneViolation",
            Error::MultiModeBand { .. } => "MultiModeBand",
            Error::BadIndexBounds(_) => "BadIndexBounds",
            Error::DegenerateGeometry(_) => "DegenerateGeometry",
            Error::SnapFailure(_) => "SnapFailure",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::AmbiguousAssignment { .. } => "AmbiguousAssignment",
            Error::BandViolation { .. } => "BandViolation",
            Error::NearZeroCoupling { .. } => "NearZeroCoupling",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::NoRootInBand { .. } => "NoRootInBand",
            Error::NoCrossing { .. } => "NoCrossing",
            Error::NoSignChange { .. } => "NoSignChange",
            Error::ParityViolation { .. } => "ParityViolation",
            Error::EscapedBand { .. } => "EscapedBand",
            Error::BranchJump { .. } => "BranchJump",
            Error::Config(_) => "Config",
        }
    }

    /// True for errors raised by input validation rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ClearZoneViolation(_)
                | Error::MultiModeBand { .. }
                | Error::BadIndexBounds(_)
                | Error::DegenerateGeometry(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
