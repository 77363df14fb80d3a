//! Truncated Fock-space linear algebra.
//!
//! Every optical mode is cut off at `N` photons, so one mode lives in an
//! `N + 1` dimensional space. Multi-mode objects are Kronecker products in
//! declared mode order with mode 0 varying slowest, i.e. the basis of a
//! two-mode state is `|0,0⟩, |0,1⟩, …, |0,N⟩, |1,0⟩, …`.
//!
//! States are dense density matrices. Channels, POVMs and unitaries acting
//! on a subset of modes are applied through index arithmetic instead of
//! materialising identity-padded operators.

mod beamsplitter;
mod channel;
pub(crate) mod linalg;
mod ops;
mod povm;
mod state;

use thiserror::Error;

pub use beamsplitter::{
    beamsplitter_block_unitary, beamsplitter_isometry, transform_povm_through_bs, BALANCED_PHI,
    BALANCED_THETA,
};
pub use channel::{apply_channel, gad_channel, KrausChannel};
pub use linalg::psd_sqrt;
pub use ops::{
    annihilation, apply_unitary, creation, fidelity_pure, number_operator, partial_trace,
    phase_operator, phase_shift, tensor, tmsv_amplitudes, tmsv_ket,
};
pub use povm::{
    detector_povm, measure, measure_and_discard, outcome_probabilities, select_outcome,
    with_dark_counts, Detached, Measurement, Povm, CLICK, NO_CLICK,
};
pub use state::{DensityMatrix, FockSpace, Ket};

pub use num_complex::Complex64;

/// Dense complex matrix used for states and operators.
pub type Matrix = nalgebra::DMatrix<Complex64>;

/// Tolerance for density-matrix invariants (trace, hermiticity, positivity).
pub const STATE_TOLERANCE: f64 = 1e-10;

/// Tolerance for ket normalisation.
pub const KET_TOLERANCE: f64 = 1e-12;

/// Tolerance used when validating operator sets (POVMs, Kraus channels).
pub const COMPLETENESS_TOLERANCE: f64 = 1e-10;

/// Eigenvalues above `-PSD_CLAMP` are treated as zero when taking square roots.
pub const PSD_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("truncation must be at least 1, got {0}")]
    InvalidTruncation(usize),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operands live in different Fock spaces (N={0} vs N={1})")]
    SpaceMismatch(usize, usize),
    #[error("mode {mode} out of range for a {n_modes}-mode state")]
    ModeOutOfRange { mode: usize, n_modes: usize },
    #[error("mode {0} listed more than once")]
    DuplicateMode(usize),
    #[error("no modes selected")]
    NoModes,
    #[error("occupation {occupation} exceeds truncation {truncation}")]
    OccupationOutOfRange { occupation: usize, truncation: usize },
    #[error("ket norm deviates from 1 by {0:e}")]
    NotNormalized(f64),
    #[error("trace deviates from 1 by {0:e}")]
    TraceNotUnity(f64),
    #[error("matrix is not hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("operators do not resolve the identity (max deviation {0:e})")]
    NotComplete(f64),
    #[error("POVM has {elements} elements but {labels} labels")]
    LabelCount { elements: usize, labels: usize },
    #[error("expected a two-outcome click/no-click POVM")]
    NotBinary,
    #[error("every measurement outcome has zero probability")]
    DegenerateState,
}

pub type Result<T, E = FockError> = std::result::Result<T, E>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(FockError::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}
