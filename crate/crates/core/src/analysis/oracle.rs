//! Closed-form heralded state of two truncated pair sources.
//!
//! With at most one pair per source and no loss, a single click projects
//! the memories onto `e^{i(φ₁−φ₂)} c₁₁c₂₀|10⟩ ± c₁₀c₂₁|01⟩`.

use num_complex::Complex64;

use super::{AnalysisError, BellSign, Result};
use crate::fock::{tmsv_amplitudes, FockSpace, Ket};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticOracle {
    /// `c[i] = [c_i0, c_i1]` for source `i`.
    pub c: [[f64; 2]; 2],
    pub phases: [f64; 2],
}

impl AnalyticOracle {
    pub fn new(c: [[f64; 2]; 2], phases: [f64; 2]) -> Result<Self> {
        for pair in &c {
            let norm = pair[0] * pair[0] + pair[1] * pair[1];
            if (norm - 1.0).abs() > 1e-12 {
                return Err(AnalysisError::InvalidParameter {
                    name: "c_i0^2 + c_i1^2",
                    value: norm,
                    reason: "must equal 1",
                });
            }
        }
        Ok(Self { c, phases })
    }

    /// Coefficients of pair sources with mean photon numbers `mu`, cut at one pair.
    pub fn from_mu(mu: [f64; 2]) -> Result<Self> {
        let space = FockSpace::new(1)?;
        let mut c = [[0.0; 2]; 2];
        for (slot, m) in c.iter_mut().zip(mu) {
            let a = tmsv_amplitudes(m, space)?;
            *slot = [a[0], a[1]];
        }
        Self::new(c, [0.0, 0.0])
    }

    /// Amplitudes on `|10⟩` and `|01⟩` before normalisation.
    pub fn unnormalized(&self, sign: BellSign) -> (Complex64, Complex64) {
        let [[c10, c11], [c20, c21]] = self.c;
        let phase = Complex64::from_polar(1.0, self.phases[0] - self.phases[1]);
        let s = match sign {
            BellSign::Plus => 1.0,
            BellSign::Minus => -1.0,
        };
        (phase * c11 * c20, Complex64::new(s * c10 * c21, 0.0))
    }

    /// `F(Ψ±)` of the normalised heralded state.
    pub fn fidelity(&self, sign: BellSign) -> f64 {
        let (ten, one) = self.unnormalized(sign);
        let s = match sign {
            BellSign::Plus => 1.0,
            BellSign::Minus => -1.0,
        };
        let overlap = (one + ten * s) / 2f64.sqrt();
        overlap.norm_sqr() / (ten.norm_sqr() + one.norm_sqr())
    }
}

/// Normalised heralded ket on two memory modes at truncation 1.
pub fn analytic_heralded_state(oracle: &AnalyticOracle, sign: BellSign) -> Result<Ket> {
    let (ten, one) = oracle.unnormalized(sign);
    let norm = (ten.norm_sqr() + one.norm_sqr()).sqrt();
    if !(norm > 0.0) {
        return Err(AnalysisError::NoExcitation(norm));
    }
    let space = FockSpace::new(1)?;
    Ok(Ket::superposition(space, &[(&[1, 0], ten / norm), (&[0, 1], one / norm)])?)
}
