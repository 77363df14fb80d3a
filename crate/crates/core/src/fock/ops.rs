use nalgebra::DVector;
use num_complex::Complex64;

use super::linalg::{self, ModeSplit};
use super::{DensityMatrix, FockError, FockSpace, Ket, Matrix, Result, STATE_TOLERANCE};

/// Ladder operator `a` with `⟨n−1|a|n⟩ = √n`.
pub fn annihilation(space: FockSpace) -> Matrix {
    let dim = space.dim();
    let mut a = Matrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(space: FockSpace) -> Matrix {
    annihilation(space).adjoint()
}

pub fn number_operator(space: FockSpace) -> Matrix {
    creation(space) * annihilation(space)
}

/// Amplitudes `a_0 … a_N` of a truncated two-mode squeezed vacuum with mean
/// photon number `mu` per mode. The last amplitude absorbs the norm of the
/// discarded tail.
pub fn tmsv_amplitudes(mu: f64, space: FockSpace) -> Result<Vec<f64>> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(FockError::OutOfRange {
            name: "mu",
            value: mu,
            range: "[0, ∞)",
        });
    }
    let n = space.truncation();
    let ratio = (mu / (mu + 1.0)).sqrt();
    let mut amplitudes = Vec::with_capacity(n + 1);
    let mut a = 1.0 / (mu + 1.0).sqrt();
    let mut weight = 0.0;
    for _ in 0..n {
        amplitudes.push(a);
        weight += a * a;
        a *= ratio;
    }
    amplitudes.push((1.0 - weight).max(0.0).sqrt());
    Ok(amplitudes)
}

/// `Σ_n a_n |n, n⟩`, the photon-pair state of an SPDC source.
pub fn tmsv_ket(mu: f64, space: FockSpace) -> Result<Ket> {
    let amplitudes = tmsv_amplitudes(mu, space)?;
    let dim = space.dim();
    let mut v = DVector::zeros(dim * dim);
    for (n, a) in amplitudes.into_iter().enumerate() {
        v[n * dim + n] = Complex64::new(a, 0.0);
    }
    // Renormalise away the last ulp so the ket invariant holds for any mu.
    let norm = v.norm();
    v /= Complex64::new(norm, 0.0);
    Ket::new(space, 2, v)
}

/// `diag(1, e^{iφ}, …, e^{iNφ})`.
pub fn phase_operator(phi: f64, space: FockSpace) -> Matrix {
    let dim = space.dim();
    Matrix::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::from_polar(1.0, r as f64 * phi)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Applies a phase shifter (fiber stretcher) to one mode.
pub fn phase_shift(state: &DensityMatrix, phi: f64, mode: usize) -> Result<DensityMatrix> {
    apply_unitary(state, &phase_operator(phi, state.space()), &[mode])
}

/// `(U ⊗ I) ρ (U ⊗ I)†` with `U` acting on `modes` (in the listed order).
pub fn apply_unitary(state: &DensityMatrix, unitary: &Matrix, modes: &[usize]) -> Result<DensityMatrix> {
    let split = ModeSplit::new(state.space().dim(), state.n_modes(), modes)?;
    if unitary.nrows() != split.sub_dim() || unitary.ncols() != split.sub_dim() {
        return Err(FockError::DimensionMismatch {
            expected: split.sub_dim(),
            found: unitary.nrows(),
        });
    }
    let deviation = linalg::max_abs_diff(
        &(unitary.adjoint() * unitary),
        &Matrix::identity(split.sub_dim(), split.sub_dim()),
    );
    if deviation > STATE_TOLERANCE {
        return Err(FockError::NotUnitary(deviation));
    }
    Ok(DensityMatrix::from_raw(
        state.space(),
        state.n_modes(),
        linalg::sandwich(state.data(), unitary, &split),
    ))
}

/// `a ⊗ b`, with the modes of `a` first.
pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    a.space().check_same(b.space())?;
    Ok(DensityMatrix::from_raw(
        a.space(),
        a.n_modes() + b.n_modes(),
        a.data().kronecker(b.data()),
    ))
}

/// Reduced state on `keep`, with modes reordered as listed.
pub fn partial_trace(state: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let split = ModeSplit::new(state.space().dim(), state.n_modes(), keep)?;
    Ok(DensityMatrix::from_raw(
        state.space(),
        keep.len(),
        linalg::reduce(state.data(), &split),
    ))
}

/// `⟨ψ|ρ|ψ⟩` for a pure reference state.
pub fn fidelity_pure(state: &DensityMatrix, reference: &Ket) -> Result<f64> {
    state.space().check_same(reference.space())?;
    if state.n_modes() != reference.n_modes() {
        return Err(FockError::DimensionMismatch {
            expected: state.n_modes(),
            found: reference.n_modes(),
        });
    }
    let psi = reference.amplitudes();
    Ok((psi.adjoint() * state.data() * psi)[(0, 0)].re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn space(n: usize) -> FockSpace {
        FockSpace::new(n).unwrap()
    }

    #[test]
    fn annihilation_matrix_elements() {
        let a1 = annihilation(space(1));
        assert_eq!(a1[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(a1[(0, 0)] + a1[(1, 0)] + a1[(1, 1)], Complex64::new(0.0, 0.0));
        let a2 = annihilation(space(2));
        assert!((a2[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        let n = number_operator(space(4));
        for k in 0..5 {
            assert!((n[(k, k)].re - k as f64).abs() < 1e-12);
        }
    }

    /// Brute-force sum of the untruncated series up to `n − 1`, then the tail.
    fn tmsv_oracle(mu: f64, n: usize) -> Vec<f64> {
        let mut head = Vec::new();
        for m in 0..n {
            let p = mu.powi(m as i32) / (mu + 1.0).powi(m as i32 + 1);
            head.push(p.sqrt());
        }
        let used: f64 = (0..n)
            .map(|m| mu.powi(m as i32) / (mu + 1.0).powi(m as i32 + 1))
            .sum();
        head.push((1.0 - used).sqrt());
        head
    }

    #[test]
    fn tmsv_amplitudes_at_mu_point_one() {
        let a = tmsv_amplitudes(0.1, space(2)).unwrap();
        let oracle = tmsv_oracle(0.1, 2);
        for (x, y) in a.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a[0] - 0.953_462_589_245_592_4).abs() < 1e-12);
        assert!((a[1] - 0.287_479_787_288_034_5).abs() < 1e-12);
        assert!((a[2] - 1.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn tmsv_vacuum_limit_and_errors() {
        let ket = tmsv_ket(0.0, space(3)).unwrap();
        assert_eq!(ket.amplitude(&[0, 0]).unwrap().re, 1.0);
        assert!(tmsv_ket(-0.1, space(2)).is_err());
        assert!(tmsv_ket(f64::NAN, space(2)).is_err());
    }

    #[test]
    fn phase_shift_examples() {
        let s = space(1);
        let plus = Ket::superposition(
            s,
            &[(&[0][..], Complex64::new(1.0, 0.0)), (&[1][..], Complex64::new(1.0, 0.0))],
        )
        .unwrap();
        let rho = DensityMatrix::from_ket(&plus);
        assert!(phase_shift(&rho, 0.0, 0).unwrap().max_abs_diff(&rho) < 1e-15);
        assert!(phase_shift(&rho, 2.0 * PI, 0).unwrap().max_abs_diff(&rho) < 1e-12);
        let flipped = phase_shift(&rho, PI, 0).unwrap();
        let minus = Ket::superposition(
            s,
            &[(&[0][..], Complex64::new(1.0, 0.0)), (&[1][..], Complex64::new(-1.0, 0.0))],
        )
        .unwrap();
        assert!((fidelity_pure(&flipped, &minus).unwrap() - 1.0).abs() < 1e-12);
        assert!((flipped.data()[(0, 1)].re + 0.5).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_and_tensor() {
        let s = space(2);
        let rho = DensityMatrix::basis(s, &[1, 0]).unwrap();
        let kept = partial_trace(&rho, &[0]).unwrap();
        assert!(kept.max_abs_diff(&DensityMatrix::basis(s, &[1]).unwrap()) < 1e-15);
        let swapped = partial_trace(&rho, &[1, 0]).unwrap();
        assert!(swapped.max_abs_diff(&DensityMatrix::basis(s, &[0, 1]).unwrap()) < 1e-15);

        let a = DensityMatrix::basis(s, &[1]).unwrap();
        let b = DensityMatrix::basis(s, &[0]).unwrap();
        assert!(tensor(&a, &b).unwrap().max_abs_diff(&rho) < 1e-15);
        assert!(tensor(&a, &DensityMatrix::basis(space(1), &[0]).unwrap()).is_err());
    }

    #[test]
    fn fidelity_of_bell_states() {
        let s = space(1);
        let one = Complex64::new(1.0, 0.0);
        let psi_plus = Ket::superposition(s, &[(&[0, 1][..], one), (&[1, 0][..], one)]).unwrap();
        let rho = DensityMatrix::from_ket(&psi_plus);
        assert!((fidelity_pure(&rho, &psi_plus).unwrap() - 1.0).abs() < 1e-14);
        let mixture = DensityMatrix::diagonal(s, 2, &[0.0, 0.5, 0.5, 0.0]).unwrap();
        assert!((fidelity_pure(&mixture, &psi_plus).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn apply_unitary_rejects_non_unitary() {
        let rho = DensityMatrix::vacuum(space(1), 1).unwrap();
        let not_unitary = Matrix::from_diagonal_element(2, 2, Complex64::new(2.0, 0.0));
        assert!(matches!(
            apply_unitary(&rho, &not_unitary, &[0]),
            Err(FockError::NotUnitary(_))
        ));
    }
}
