//! Effective two-memory state and its Bell-state fidelity.
//!
//! Matrices here live on the sector `{|00⟩, |01⟩, |10⟩, |11⟩}` where each
//! memory holds at most one excitation; the first digit is memory 1.

use nalgebra::Vector4;
use num_complex::Complex64;

use super::{AnalysisError, Result};
use crate::fock::{DensityMatrix, Matrix};
use crate::hardware::Herald;

pub const SECTOR_LABELS: [&str; 4] = ["00", "01", "10", "11"];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Reference Bell state `(|01⟩ ± |10⟩)/√2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BellSign {
    Plus,
    Minus,
}

impl BellSign {
    /// Bell state announced by a single-click herald.
    pub fn from_herald(herald: Herald) -> Option<Self> {
        match herald {
            Herald::Plus => Some(BellSign::Plus),
            Herald::Minus => Some(BellSign::Minus),
            _ => None,
        }
    }

    fn sign(self) -> f64 {
        match self {
            BellSign::Plus => 1.0,
            BellSign::Minus => -1.0,
        }
    }
}

pub fn bell_state(sign: BellSign) -> Vector4<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Vector4::new(ZERO, Complex64::new(h, 0.0), Complex64::new(sign.sign() * h, 0.0), ZERO)
}

/// A two-mode state restricted to the sector and renormalised.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorProjection {
    pub rho: Matrix,
    /// Trace of the state inside the sector before renormalisation.
    pub weight: f64,
}

impl SectorProjection {
    /// Weight lying outside the sector.
    pub fn discarded(&self) -> f64 {
        1.0 - self.weight
    }
}

pub fn project_single_excitation(state: &DensityMatrix) -> Result<SectorProjection> {
    if state.n_modes() != 2 {
        return Err(AnalysisError::NotTwoModes(state.n_modes()));
    }
    let space = state.space();
    let mut index = [0usize; 4];
    for (k, slot) in index.iter_mut().enumerate() {
        *slot = space.basis_index(&[k >> 1, k & 1])?;
    }
    let data = state.data();
    let mut rho = Matrix::from_fn(4, 4, |r, c| data[(index[r], index[c])]);
    let weight = rho.trace().re;
    if !(weight > 0.0) {
        return Err(AnalysisError::NoExcitation(weight));
    }
    rho /= Complex64::new(weight, 0.0);
    Ok(SectorProjection { rho, weight })
}

/// Normalised sector state, either post-selected (vacuum row and column
/// removed) or reconstructed from populations and coherence.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveState {
    rho: Matrix,
    normalization: f64,
}

impl EffectiveState {
    pub(crate) fn from_parts(rho: Matrix, normalization: f64) -> Self {
        Self { rho, normalization }
    }

    pub fn rho(&self) -> &Matrix {
        &self.rho
    }

    /// Trace that was divided out.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Diagonal entry for `SECTOR_LABELS[k]`.
    pub fn population(&self, k: usize) -> f64 {
        self.rho[(k, k)].re
    }

    /// The `⟨01|ρ|10⟩` element.
    pub fn coherence(&self) -> Complex64 {
        self.rho[(1, 2)]
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }
}

fn check_sector(rho: &Matrix) -> Result<()> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(AnalysisError::NotSectorMatrix(rho.nrows(), rho.ncols()));
    }
    Ok(())
}

pub fn effective_density_matrix(rho: &Matrix) -> Result<EffectiveState> {
    check_sector(rho)?;
    let mut out = rho.clone();
    for k in 0..4 {
        out[(0, k)] = ZERO;
        out[(k, 0)] = ZERO;
    }
    let remaining = out.trace().re;
    if !(remaining >= 1e-12) {
        return Err(AnalysisError::NoExcitation(remaining));
    }
    out /= Complex64::new(remaining, 0.0);
    Ok(EffectiveState::from_parts(out, remaining))
}

/// `tr(Ψ± ρ̃)`.
pub fn effective_fidelity(state: &EffectiveState, sign: BellSign) -> f64 {
    let psi = bell_state(sign);
    let mut acc = ZERO;
    for r in 0..4 {
        for c in 0..4 {
            acc += psi[r].conj() * state.rho[(r, c)] * psi[c];
        }
    }
    acc.re.clamp(0.0, 1.0)
}

/// Projection, effective construction and fidelity in one step.
pub fn heralded_fidelity(memory_state: &DensityMatrix, sign: BellSign) -> Result<f64> {
    let projected = project_single_excitation(memory_state)?;
    Ok(effective_fidelity(&effective_density_matrix(&projected.rho)?, sign))
}
