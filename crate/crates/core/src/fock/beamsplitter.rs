//! Two-mode beamsplitter on truncated modes.
//!
//! Input modes `a, b` map to output modes `c, d` via
//! `a† → cosθ c† + e^{−iφ} sinθ d†` and `b† → −e^{iφ} sinθ c† + cosθ d†`.
//! Two inputs with up to `N` photons each can put up to `2N` photons in one
//! output, so the unitary is built on the doubled space and detectors are
//! pulled back onto the input side instead of evolving the state.

use num_complex::Complex64;

use super::{FockError, FockSpace, Matrix, Povm, Result};

/// Mixing angle of a 50/50 beamsplitter.
pub const BALANCED_THETA: f64 = std::f64::consts::FRAC_PI_4;

/// Phase of the balanced splitter used by the BSM and the analyser.
///
/// With `φ = π`, `a† → (c† − d†)/√2` and `b† → (c† + d†)/√2`, so a click on
/// the first output projects onto the symmetric single-excitation state.
pub const BALANCED_PHI: f64 = std::f64::consts::PI;

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Beamsplitter restricted to total photon number `n`.
///
/// Row `m` is the output `|m, n−m⟩`, column `k` the input `|k, n−k⟩`.
pub fn beamsplitter_block_unitary(theta: f64, phi: f64, n: usize) -> Matrix {
    let alpha = Complex64::new(theta.cos(), 0.0);
    let beta = Complex64::from_polar(theta.sin(), -phi);
    let gamma = -Complex64::from_polar(theta.sin(), phi);
    let delta = alpha;
    Matrix::from_fn(n + 1, n + 1, |m, k| {
        let mut coef = Complex64::new(0.0, 0.0);
        // j photons of the a-input go to c, m − j of the b-input go to c.
        for j in m.saturating_sub(n - k)..=k.min(m) {
            coef += alpha.powu(j as u32)
                * beta.powu((k - j) as u32)
                * gamma.powu((m - j) as u32)
                * delta.powu((n - k + j - m) as u32)
                * (binomial(k, j) * binomial(n - k, m - j));
        }
        coef * (factorial(m) * factorial(n - m) / (factorial(k) * factorial(n - k))).sqrt()
    })
}

/// `B P`: embeds two modes truncated at `N` into two modes truncated at `2N`
/// and applies the beamsplitter. Shape `(2N+1)² × (N+1)²`.
pub fn beamsplitter_isometry(theta: f64, phi: f64, space: FockSpace) -> Matrix {
    let d_in = space.dim();
    let d_out = space.doubled().dim();
    let n_max = space.truncation();
    let blocks: Vec<Matrix> = (0..=2 * n_max)
        .map(|n| beamsplitter_block_unitary(theta, phi, n))
        .collect();
    let mut v = Matrix::zeros(d_out * d_out, d_in * d_in);
    for i in 0..d_in {
        for j in 0..d_in {
            let n = i + j;
            let block = &blocks[n];
            for m in 0..=n {
                v[(m * d_out + (n - m), i * d_in + j)] = block[(m, i)];
            }
        }
    }
    v
}

/// Pulls a two-mode POVM on the beamsplitter outputs (defined on the doubled
/// space) back onto the truncated inputs: `Π̃ = P† B† Π B P`.
pub fn transform_povm_through_bs(povm_out: &Povm, theta: f64, phi: f64, space: FockSpace) -> Result<Povm> {
    povm_out.space().check_same(space.doubled())?;
    if povm_out.n_modes() != 2 {
        return Err(FockError::DimensionMismatch {
            expected: 2,
            found: povm_out.n_modes(),
        });
    }
    let v = beamsplitter_isometry(theta, phi, space);
    let v_dag = v.adjoint();
    let elements = povm_out
        .elements()
        .iter()
        .map(|e| {
            let t = &v_dag * e * &v;
            (&t + t.adjoint()) * Complex64::new(0.5, 0.0)
        })
        .collect();
    Povm::new(space, 2, elements, povm_out.labels().to_vec())
}
