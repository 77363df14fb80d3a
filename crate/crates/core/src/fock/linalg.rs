//! Dense kernels for operators acting on a subset of modes.
//!
//! A [`ModeSplit`] factors every basis index of an `n`-mode space into a
//! "selected" part (the listed modes, in listed order) and a "rest" part
//! (all other modes, ascending). The kernels below use it to apply
//! `A ⊗ I` without building the padded operator. Matrices are nalgebra's
//! column-major storage, so element `(r, c)` of a `dim × dim` matrix is
//! `slice[r + c * dim]`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::{FockError, Matrix, Result, PSD_CLAMP};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub(crate) struct ModeSplit {
    sub: Vec<usize>,
    rest: Vec<usize>,
    full: Vec<usize>,
    d_sub: usize,
    d_rest: usize,
}

type SplitKey = (usize, usize, Vec<usize>);

thread_local! {
    static SPLITS: RefCell<HashMap<SplitKey, Rc<ModeSplit>>> = RefCell::new(HashMap::new());
}

impl ModeSplit {
    /// Index tables for `modes`, memoised per thread.
    pub fn new(mode_dim: usize, n_modes: usize, modes: &[usize]) -> Result<Rc<Self>> {
        let key = (mode_dim, n_modes, modes.to_vec());
        if let Some(hit) = SPLITS.with(|c| c.borrow().get(&key).cloned()) {
            return Ok(hit);
        }
        let split = Rc::new(Self::build(mode_dim, n_modes, modes)?);
        SPLITS.with(|c| c.borrow_mut().insert(key, Rc::clone(&split)));
        Ok(split)
    }

    fn build(mode_dim: usize, n_modes: usize, modes: &[usize]) -> Result<Self> {
        if modes.is_empty() {
            return Err(FockError::NoModes);
        }
        let mut seen = vec![false; n_modes];
        for &m in modes {
            if m >= n_modes {
                return Err(FockError::ModeOutOfRange { mode: m, n_modes });
            }
            if seen[m] {
                return Err(FockError::DuplicateMode(m));
            }
            seen[m] = true;
        }
        let rest_modes: Vec<usize> = (0..n_modes).filter(|m| !seen[*m]).collect();
        let d_sub = mode_dim.pow(modes.len() as u32);
        let d_rest = mode_dim.pow(rest_modes.len() as u32);
        let dim = d_sub * d_rest;

        let mut sub = vec![0; dim];
        let mut rest = vec![0; dim];
        let mut full = vec![0; dim];
        let mut digits = vec![0; n_modes];
        for index in 0..dim {
            let mut x = index;
            for m in (0..n_modes).rev() {
                digits[m] = x % mode_dim;
                x /= mode_dim;
            }
            let s = modes.iter().fold(0, |acc, &m| acc * mode_dim + digits[m]);
            let t = rest_modes.iter().fold(0, |acc, &m| acc * mode_dim + digits[m]);
            sub[index] = s;
            rest[index] = t;
            full[t * d_sub + s] = index;
        }
        Ok(Self {
            sub,
            rest,
            full,
            d_sub,
            d_rest,
        })
    }

    pub fn dim(&self) -> usize {
        self.sub.len()
    }

    pub fn sub_dim(&self) -> usize {
        self.d_sub
    }

    pub fn rest_dim(&self) -> usize {
        self.d_rest
    }

    #[inline]
    fn full_index(&self, rest: usize, sub: usize) -> usize {
        self.full[rest * self.d_sub + sub]
    }
}

/// Non-zero entries of each row of `op`, as `(column, value)`.
fn sparse_rows(op: &Matrix) -> Vec<Vec<(usize, Complex64)>> {
    (0..op.nrows())
        .map(|r| {
            (0..op.ncols())
                .filter_map(|c| {
                    let v = op[(r, c)];
                    (v != ZERO).then_some((c, v))
                })
                .collect()
        })
        .collect()
}

/// `(A ⊗ I) ρ (A ⊗ I)†` with `A` acting on the selected modes.
pub(crate) fn sandwich(rho: &Matrix, op: &Matrix, split: &ModeSplit) -> Matrix {
    let mut out = Matrix::zeros(rho.nrows(), rho.ncols());
    sandwich_accumulate(rho, op, split, &mut out);
    out
}

/// `Σ_k (E_k ⊗ I) ρ (E_k ⊗ I)†`.
pub(crate) fn kraus_sum(rho: &Matrix, ops: &[Matrix], split: &ModeSplit) -> Matrix {
    let mut out = Matrix::zeros(rho.nrows(), rho.ncols());
    for op in ops {
        sandwich_accumulate(rho, op, split, &mut out);
    }
    out
}

fn sandwich_accumulate(rho: &Matrix, op: &Matrix, split: &ModeSplit, out: &mut Matrix) {
    let dim = split.dim();
    let rows = sparse_rows(op);
    if rows.iter().all(Vec::is_empty) {
        return;
    }
    let src = rho.as_slice();

    // left = (A ⊗ I) ρ
    let mut left = vec![ZERO; dim * dim];
    for c in 0..dim {
        let col = &src[c * dim..(c + 1) * dim];
        let dst = &mut left[c * dim..(c + 1) * dim];
        for (r, value) in dst.iter_mut().enumerate() {
            let t = split.rest[r];
            let mut acc = ZERO;
            for &(s, a) in &rows[split.sub[r]] {
                acc += a * col[split.full_index(t, s)];
            }
            *value = acc;
        }
    }

    // out += left (A ⊗ I)†
    let dst = out.as_mut_slice();
    for c in 0..dim {
        let t = split.rest[c];
        for &(s, a) in &rows[split.sub[c]] {
            let a = a.conj();
            let k = split.full_index(t, s);
            let left_col = &left[k * dim..(k + 1) * dim];
            let out_col = &mut dst[c * dim..(c + 1) * dim];
            for (o, l) in out_col.iter_mut().zip(left_col) {
                *o += l * a;
            }
        }
    }
}

/// Reduced matrix on the selected modes (partial trace over the rest).
pub(crate) fn reduce(rho: &Matrix, split: &ModeSplit) -> Matrix {
    let d = split.d_sub;
    let dim = split.dim();
    let src = rho.as_slice();
    let mut out = Matrix::zeros(d, d);
    for s2 in 0..d {
        for s1 in 0..d {
            let mut acc = ZERO;
            for t in 0..split.d_rest {
                acc += src[split.full_index(t, s1) + split.full_index(t, s2) * dim];
            }
            out[(s1, s2)] = acc;
        }
    }
    out
}

/// `Tr_sel[(Π ⊗ I) ρ]`, a matrix over the non-selected modes.
///
/// Equal to `Tr_sel[(M ⊗ I) ρ (M ⊗ I)†]` for any `M` with `M†M = Π`, which
/// is how post-measurement states of unmeasured modes are obtained.
pub(crate) fn reduce_weighted(rho: &Matrix, weight: &Matrix, split: &ModeSplit) -> Matrix {
    let d = split.d_sub;
    let dim = split.dim();
    let src = rho.as_slice();
    let pairs: Vec<(usize, usize, Complex64)> = (0..d)
        .flat_map(|s1| (0..d).map(move |s| (s1, s)))
        .filter_map(|(s1, s)| {
            let w = weight[(s1, s)];
            (w != ZERO).then_some((s1, s, w))
        })
        .collect();
    let mut out = Matrix::zeros(split.d_rest, split.d_rest);
    for t2 in 0..split.d_rest {
        for t1 in 0..split.d_rest {
            let mut acc = ZERO;
            for &(s1, s, w) in &pairs {
                acc += w * src[split.full_index(t1, s) + split.full_index(t2, s1) * dim];
            }
            out[(t1, t2)] = acc;
        }
    }
    out
}

/// Real part of `tr(A ρ_sel)`.
pub(crate) fn expectation(reduced: &Matrix, op: &Matrix) -> f64 {
    let d = reduced.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += op[(i, j)] * reduced[(j, i)];
        }
    }
    acc.re
}

/// Smallest eigenvalue of the hermitian part of `m`.
pub(crate) fn min_hermitian_eigenvalue(m: &Matrix) -> f64 {
    let hermitian = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    hermitian
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest entry of `|A − B|`.
pub(crate) fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Principal square root of a positive semidefinite hermitian matrix.
///
/// Eigenvalues in `[-1e-8, 0)` are clamped to zero; anything more negative
/// is reported as [`FockError::NotPositive`].
pub fn psd_sqrt(m: &Matrix) -> Result<Matrix> {
    let hermitian = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eigen = SymmetricEigen::new(hermitian);
    let mut roots = Vec::with_capacity(eigen.eigenvalues.len());
    for &lambda in eigen.eigenvalues.iter() {
        if lambda < -PSD_CLAMP {
            return Err(FockError::NotPositive(lambda));
        }
        roots.push(Complex64::new(lambda.max(0.0).sqrt(), 0.0));
    }
    let v = &eigen.eigenvectors;
    let scaled = Matrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * roots[c]);
    Ok(scaled * v.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron_identity_left(op: &Matrix, mode_dim: usize, n_modes: usize, mode: usize) -> Matrix {
        let mut full = Matrix::identity(1, 1);
        for m in 0..n_modes {
            let factor = if m == mode {
                op.clone()
            } else {
                Matrix::identity(mode_dim, mode_dim)
            };
            full = full.kronecker(&factor);
        }
        full
    }

    fn sample_matrix(dim: usize) -> Matrix {
        Matrix::from_fn(dim, dim, |r, c| {
            Complex64::new(((r * 7 + c * 3) % 5) as f64 - 2.0, ((r + 2 * c) % 3) as f64)
        })
    }

    #[test]
    fn split_rejects_bad_modes() {
        assert!(matches!(ModeSplit::new(3, 2, &[2]), Err(FockError::ModeOutOfRange { .. })));
        assert!(matches!(ModeSplit::new(3, 2, &[1, 1]), Err(FockError::DuplicateMode(1))));
        assert!(matches!(ModeSplit::new(3, 2, &[]), Err(FockError::NoModes)));
    }

    #[test]
    fn sandwich_matches_explicit_embedding() {
        let rho = sample_matrix(27);
        let op = sample_matrix(3);
        for mode in 0..3 {
            let split = ModeSplit::new(3, 3, &[mode]).unwrap();
            let full = kron_identity_left(&op, 3, 3, mode);
            let expected = &full * &rho * full.adjoint();
            assert!(max_abs_diff(&sandwich(&rho, &op, &split), &expected) < 1e-9);
        }
    }

    #[test]
    fn reduce_weighted_with_identity_is_partial_trace() {
        let rho = sample_matrix(9);
        let split = ModeSplit::new(3, 2, &[1]).unwrap();
        let traced = reduce_weighted(&rho, &Matrix::identity(3, 3), &split);
        let keep_other = ModeSplit::new(3, 2, &[0]).unwrap();
        assert!(max_abs_diff(&traced, &reduce(&rho, &keep_other)) < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = sample_matrix(4);
        let psd = &a * a.adjoint();
        let root = psd_sqrt(&psd).unwrap();
        assert!(max_abs_diff(&(&root * &root), &psd) < 1e-9);
        let negative = Matrix::from_diagonal_element(2, 2, Complex64::new(-1.0, 0.0));
        assert!(matches!(psd_sqrt(&negative), Err(FockError::NotPositive(_))));
        let slightly = Matrix::from_diagonal_element(2, 2, Complex64::new(-1e-12, 0.0));
        assert!(psd_sqrt(&slightly).unwrap().iter().all(|z| z.norm() == 0.0));
    }
}
