use nalgebra::{DVector, SymmetricEigen};

use super::{FockError, Matrix, Result, KET_TOLERANCE, STATE_TOLERANCE};
use num_complex::Complex64;

/// Photon-number cutoff shared by every mode of a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FockSpace {
    truncation: usize,
}

impl FockSpace {
    pub fn new(truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(FockError::InvalidTruncation(truncation));
        }
        Ok(Self { truncation })
    }

    /// Maximum photon number per mode (`N`).
    pub fn truncation(self) -> usize {
        self.truncation
    }

    /// Dimension of one mode, `N + 1`.
    pub fn dim(self) -> usize {
        self.truncation + 1
    }

    pub fn dim_modes(self, n_modes: usize) -> usize {
        self.dim().pow(n_modes as u32)
    }

    /// A space wide enough to hold every photon of two truncated modes in a
    /// single mode, i.e. cutoff `2N`.
    pub fn doubled(self) -> Self {
        Self {
            truncation: 2 * self.truncation,
        }
    }

    /// Flat basis index of an occupation pattern.
    pub fn basis_index(self, occupations: &[usize]) -> Result<usize> {
        let mut index = 0;
        for &n in occupations {
            if n > self.truncation {
                return Err(FockError::OccupationOutOfRange {
                    occupation: n,
                    truncation: self.truncation,
                });
            }
            index = index * self.dim() + n;
        }
        Ok(index)
    }

    pub(crate) fn check_same(self, other: FockSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(FockError::SpaceMismatch(self.truncation, other.truncation))
        }
    }
}

impl Default for FockSpace {
    fn default() -> Self {
        Self { truncation: 2 }
    }
}

/// Normalised pure state over `n_modes` truncated modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    space: FockSpace,
    n_modes: usize,
    amplitudes: DVector<Complex64>,
}

impl Ket {
    pub fn new(space: FockSpace, n_modes: usize, amplitudes: DVector<Complex64>) -> Result<Self> {
        if n_modes == 0 {
            return Err(FockError::NoModes);
        }
        let dim = space.dim_modes(n_modes);
        if amplitudes.len() != dim {
            return Err(FockError::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let deviation = (amplitudes.norm() - 1.0).abs();
        if deviation > KET_TOLERANCE {
            return Err(FockError::NotNormalized(deviation));
        }
        Ok(Self {
            space,
            n_modes,
            amplitudes,
        })
    }

    /// The number state `|n₁ n₂ …⟩`.
    pub fn basis(space: FockSpace, occupations: &[usize]) -> Result<Self> {
        Self::superposition(space, &[(occupations, Complex64::new(1.0, 0.0))])
    }

    /// Normalised superposition of number states. Weights need not be normalised.
    pub fn superposition(space: FockSpace, terms: &[(&[usize], Complex64)]) -> Result<Self> {
        let n_modes = terms.first().map(|(occ, _)| occ.len()).ok_or(FockError::NoModes)?;
        let mut amplitudes = DVector::zeros(space.dim_modes(n_modes));
        for (occupations, weight) in terms {
            if occupations.len() != n_modes {
                return Err(FockError::DimensionMismatch {
                    expected: n_modes,
                    found: occupations.len(),
                });
            }
            amplitudes[space.basis_index(occupations)?] += *weight;
        }
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(FockError::NotNormalized(1.0));
        }
        amplitudes /= Complex64::new(norm, 0.0);
        Self::new(space, n_modes, amplitudes)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Result<Complex64> {
        self.check_pattern(occupations)?;
        Ok(self.amplitudes[self.space.basis_index(occupations)?])
    }

    fn check_pattern(&self, occupations: &[usize]) -> Result<()> {
        if occupations.len() != self.n_modes {
            return Err(FockError::DimensionMismatch {
                expected: self.n_modes,
                found: occupations.len(),
            });
        }
        Ok(())
    }
}

/// Mixed state over `n_modes` truncated modes.
///
/// Invariants: hermitian, unit trace and positive semidefinite, each within
/// [`STATE_TOLERANCE`]. [`DensityMatrix::new`] checks all three; states
/// produced by the operations in this module preserve them by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: FockSpace,
    n_modes: usize,
    data: Matrix,
}

impl DensityMatrix {
    pub fn new(space: FockSpace, n_modes: usize, data: Matrix) -> Result<Self> {
        if n_modes == 0 {
            return Err(FockError::NoModes);
        }
        let dim = space.dim_modes(n_modes);
        if data.nrows() != dim || data.ncols() != dim {
            return Err(FockError::DimensionMismatch {
                expected: dim,
                found: data.nrows().max(data.ncols()),
            });
        }
        let state = Self {
            space,
            n_modes,
            data,
        };
        state.validate()?;
        Ok(state)
    }

    pub(crate) fn from_raw(space: FockSpace, n_modes: usize, data: Matrix) -> Self {
        debug_assert_eq!(data.nrows(), space.dim_modes(n_modes));
        Self {
            space,
            n_modes,
            data,
        }
    }

    pub fn from_ket(ket: &Ket) -> Self {
        let v = ket.amplitudes();
        Self::from_raw(ket.space(), ket.n_modes(), v * v.adjoint())
    }

    pub fn vacuum(space: FockSpace, n_modes: usize) -> Result<Self> {
        Ok(Self::from_ket(&Ket::basis(space, &vec![0; n_modes])?))
    }

    /// The projector `|n₁ n₂ …⟩⟨n₁ n₂ …|`.
    pub fn basis(space: FockSpace, occupations: &[usize]) -> Result<Self> {
        Ok(Self::from_ket(&Ket::basis(space, occupations)?))
    }

    /// Diagonal state with the given number-state populations.
    pub fn diagonal(space: FockSpace, n_modes: usize, populations: &[f64]) -> Result<Self> {
        let dim = space.dim_modes(n_modes);
        if populations.len() != dim {
            return Err(FockError::DimensionMismatch {
                expected: dim,
                found: populations.len(),
            });
        }
        let data = Matrix::from_diagonal(&DVector::from_iterator(
            dim,
            populations.iter().map(|&p| Complex64::new(p, 0.0)),
        ));
        Self::new(space, n_modes, data)
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    /// Largest entry of `|ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for c in 0..dim {
            for r in 0..=c {
                worst = worst.max((self.data[(r, c)] - self.data[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let hermitian = (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(hermitian).eigenvalues.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > STATE_TOLERANCE {
            return Err(FockError::NotHermitian(herm));
        }
        let trace = (self.data.trace() - Complex64::new(1.0, 0.0)).norm();
        if trace > STATE_TOLERANCE {
            return Err(FockError::TraceNotUnity(trace));
        }
        let min = self.min_eigenvalue();
        if min < -STATE_TOLERANCE {
            return Err(FockError::NotPositive(min));
        }
        Ok(())
    }

    /// Matrix element `⟨row|ρ|col⟩` addressed by occupation patterns.
    pub fn element(&self, row: &[usize], col: &[usize]) -> Result<Complex64> {
        for pattern in [row, col] {
            if pattern.len() != self.n_modes {
                return Err(FockError::DimensionMismatch {
                    expected: self.n_modes,
                    found: pattern.len(),
                });
            }
        }
        Ok(self.data[(self.space.basis_index(row)?, self.space.basis_index(col)?)])
    }

    /// Population of a number state.
    pub fn population(&self, occupations: &[usize]) -> Result<f64> {
        Ok(self.element(occupations, occupations)?.re)
    }

    /// Largest element-wise distance to another state.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (&self.data - &other.data)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}
