//! Post-processing of heralded memory states and detector records.

mod effective;
mod oracle;
mod rate;
mod tomography;

use thiserror::Error;

use crate::fock::FockError;

pub use effective::{
    bell_state, effective_density_matrix, effective_fidelity, heralded_fidelity, project_single_excitation,
    BellSign, EffectiveState, SectorProjection, SECTOR_LABELS,
};
pub use oracle::{analytic_heralded_state, AnalyticOracle};
pub use rate::{generation_rate, linear_fit, LinearFit};
pub use tomography::{
    assemble_reconstruction, coherence_magnitude, expected_diagonal, fit_sinusoid, tomography_coherence, tomography_diagonal,
    ClickCounts, CoherenceEstimate, DetectionModel, DiagonalEstimate, InterferencePoint, SinusoidFit,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("state has no weight outside the vacuum ({0:e})")]
    NoExcitation(f64),
    #[error("expected a two-mode memory state, got {0} modes")]
    NotTwoModes(usize),
    #[error("expected a 4x4 matrix, got {0}x{1}")]
    NotSectorMatrix(usize, usize),
    #[error("{name} = {value} is invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("total transmission of detector {0} is zero")]
    ZeroTransmission(usize),
    #[error("no samples recorded")]
    NoSamples,
    #[error("need at least 3 distinct phases, got {0}")]
    TooFewPhases(usize),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("fitted offset {0:e} is not positive")]
    NonPositiveOffset(f64),
    #[error(transparent)]
    Fock(#[from] FockError),
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;
