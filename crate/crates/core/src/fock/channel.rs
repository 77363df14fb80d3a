use num_complex::Complex64;

use super::linalg::{self, ModeSplit};
use super::{
    check_unit_interval, DensityMatrix, FockError, FockSpace, Matrix, Result, COMPLETENESS_TOLERANCE,
};

/// Single-mode channel in operator-sum form, `ρ ↦ Σ_k E_k ρ E_k†`.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    space: FockSpace,
    operators: Vec<Matrix>,
    loss: Option<f64>,
}

impl KrausChannel {
    /// Builds a channel from arbitrary Kraus operators, checking `Σ E†E = I`.
    pub fn new(space: FockSpace, operators: Vec<Matrix>) -> Result<Self> {
        let channel = Self {
            space,
            operators,
            loss: None,
        };
        let dim = space.dim();
        for op in &channel.operators {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(FockError::DimensionMismatch {
                    expected: dim,
                    found: op.nrows(),
                });
            }
        }
        let deviation = channel.completeness_error();
        if deviation > COMPLETENESS_TOLERANCE {
            return Err(FockError::NotComplete(deviation));
        }
        Ok(channel)
    }

    pub fn identity(space: FockSpace) -> Self {
        Self {
            space,
            operators: vec![Matrix::identity(space.dim(), space.dim())],
            loss: Some(0.0),
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn operators(&self) -> &[Matrix] {
        &self.operators
    }

    /// Single-photon loss probability this channel was built from, if any.
    pub fn loss(&self) -> Option<f64> {
        self.loss
    }

    /// Largest entry of `|Σ E†E − I|`.
    pub fn completeness_error(&self) -> f64 {
        let dim = self.space.dim();
        let sum = self
            .operators
            .iter()
            .fold(Matrix::zeros(dim, dim), |acc, e| acc + e.adjoint() * e);
        linalg::max_abs_diff(&sum, &Matrix::identity(dim, dim))
    }
}

/// Truncated generalized amplitude damping (photon loss) with per-photon
/// loss probability `gamma`.
///
/// `E_k = Σ_{n≥k} √C(n,k) √((1−γ)^{n−k} γ^k) |n−k⟩⟨n|` for `k = 0…N`; the
/// truncated set still resolves the identity on the `N + 1` dimensional space.
pub fn gad_channel(gamma: f64, space: FockSpace) -> Result<KrausChannel> {
    check_unit_interval("gamma", gamma)?;
    let dim = space.dim();
    let mut operators = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut e = Matrix::zeros(dim, dim);
        let mut binom = 1.0;
        for n in k..dim {
            if n > k {
                binom = binom * n as f64 / (n - k) as f64;
            }
            let weight = binom * (1.0 - gamma).powi((n - k) as i32) * gamma.powi(k as i32);
            e[(n - k, n)] = Complex64::new(weight.sqrt(), 0.0);
        }
        operators.push(e);
    }
    Ok(KrausChannel {
        space,
        operators,
        loss: Some(gamma),
    })
}

/// Applies a single-mode channel to one mode of a multi-mode state.
pub fn apply_channel(state: &DensityMatrix, channel: &KrausChannel, mode: usize) -> Result<DensityMatrix> {
    state.space().check_same(channel.space())?;
    let split = ModeSplit::new(state.space().dim(), state.n_modes(), &[mode])?;
    Ok(DensityMatrix::from_raw(
        state.space(),
        state.n_modes(),
        linalg::kraus_sum(state.data(), channel.operators(), &split),
    ))
}
