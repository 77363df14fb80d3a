use std::cell::OnceCell;

use num_complex::Complex64;

use super::linalg::{self, ModeSplit};
use super::{
    check_unit_interval, psd_sqrt, DensityMatrix, FockError, FockSpace, Matrix, Result,
    COMPLETENESS_TOLERANCE, STATE_TOLERANCE,
};

/// Label of the no-click outcome of a single detector.
pub const NO_CLICK: &str = "0";
/// Label of the click outcome of a single detector.
pub const CLICK: &str = "1";

/// Measurement over `n_modes` modes: elements `Π_m`, their square roots
/// `M_m = √Π_m` and outcome labels.
#[derive(Clone, Debug)]
pub struct Povm {
    space: FockSpace,
    n_modes: usize,
    elements: Vec<Matrix>,
    operators: OnceCell<Vec<Matrix>>,
    labels: Vec<String>,
}

impl Povm {
    /// Validates shape, hermiticity, positivity and completeness.
    pub fn new(space: FockSpace, n_modes: usize, elements: Vec<Matrix>, labels: Vec<String>) -> Result<Self> {
        if n_modes == 0 {
            return Err(FockError::NoModes);
        }
        if elements.len() != labels.len() {
            return Err(FockError::LabelCount {
                elements: elements.len(),
                labels: labels.len(),
            });
        }
        let dim = space.dim_modes(n_modes);
        let mut sum = Matrix::zeros(dim, dim);
        for e in &elements {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(FockError::DimensionMismatch {
                    expected: dim,
                    found: e.nrows(),
                });
            }
            let herm = linalg::max_abs_diff(e, &e.adjoint());
            if herm > STATE_TOLERANCE {
                return Err(FockError::NotHermitian(herm));
            }
            sum += e;
        }
        let deviation = linalg::max_abs_diff(&sum, &Matrix::identity(dim, dim));
        if deviation > COMPLETENESS_TOLERANCE {
            return Err(FockError::NotComplete(deviation));
        }
        for e in &elements {
            let min = super::linalg::min_hermitian_eigenvalue(e);
            if min < -STATE_TOLERANCE {
                return Err(FockError::NotPositive(min));
            }
        }
        Ok(Self {
            space,
            n_modes,
            elements,
            operators: OnceCell::new(),
            labels,
        })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn elements(&self) -> &[Matrix] {
        &self.elements
    }

    /// Measurement operators `√Π_m`, computed on first use.
    pub fn operators(&self) -> &[Matrix] {
        self.operators.get_or_init(|| {
            self.elements
                .iter()
                .map(|e| psd_sqrt(e).expect("elements were checked positive on construction"))
                .collect()
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Joint measurement `self ⊗ other`; labels are concatenated, with the
    /// outcomes of `self` varying slowest.
    pub fn product(&self, other: &Povm) -> Result<Povm> {
        self.space.check_same(other.space)?;
        let mut elements = Vec::with_capacity(self.len() * other.len());
        let mut labels = Vec::with_capacity(self.len() * other.len());
        for (a, la) in self.elements.iter().zip(&self.labels) {
            for (b, lb) in other.elements.iter().zip(&other.labels) {
                elements.push(a.kronecker(b));
                labels.push(format!("{la}{lb}"));
            }
        }
        Povm::new(self.space, self.n_modes + other.n_modes, elements, labels)
    }

    /// Completeness deviation `max |Σ Π_m − I|`.
    pub fn completeness_error(&self) -> f64 {
        let dim = self.space.dim_modes(self.n_modes);
        let sum = self.elements.iter().fold(Matrix::zeros(dim, dim), |acc, e| acc + e);
        linalg::max_abs_diff(&sum, &Matrix::identity(dim, dim))
    }
}

/// Non-number-resolving detector with efficiency `eta`:
/// `Π₀ = Σ_n (1−η)^n |n⟩⟨n|`, `Π₁ = I − Π₀`.
pub fn detector_povm(eta: f64, space: FockSpace) -> Result<Povm> {
    check_unit_interval("eta", eta)?;
    let dim = space.dim();
    let no_click = Matrix::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::new((1.0 - eta).powi(r as i32), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let click = Matrix::identity(dim, dim) - &no_click;
    Povm::new(
        space,
        1,
        vec![no_click, click],
        vec![NO_CLICK.to_string(), CLICK.to_string()],
    )
}

/// Folds an independent dark-count probability into a click/no-click POVM:
/// `Π₀' = (1 − p)Π₀`, `Π₁' = I − Π₀'`.
pub fn with_dark_counts(povm: &Povm, p_dark: f64) -> Result<Povm> {
    check_unit_interval("p_dark", p_dark)?;
    let (Some(i0), Some(_)) = (povm.outcome_index(NO_CLICK), povm.outcome_index(CLICK)) else {
        return Err(FockError::NotBinary);
    };
    if povm.len() != 2 || povm.n_modes() != 1 {
        return Err(FockError::NotBinary);
    }
    let dim = povm.space().dim();
    let no_click = &povm.elements()[i0] * Complex64::new(1.0 - p_dark, 0.0);
    let click = Matrix::identity(dim, dim) - &no_click;
    Povm::new(
        povm.space(),
        1,
        vec![no_click, click],
        vec![NO_CLICK.to_string(), CLICK.to_string()],
    )
}

fn split_for(state: &DensityMatrix, povm: &Povm, modes: &[usize]) -> Result<std::rc::Rc<ModeSplit>> {
    state.space().check_same(povm.space())?;
    if modes.len() != povm.n_modes() {
        return Err(FockError::DimensionMismatch {
            expected: povm.n_modes(),
            found: modes.len(),
        });
    }
    ModeSplit::new(state.space().dim(), state.n_modes(), modes)
}

/// `tr(Π_m ρ)` for every outcome, with `Π_m` acting on `modes`.
pub fn outcome_probabilities(state: &DensityMatrix, povm: &Povm, modes: &[usize]) -> Result<Vec<f64>> {
    let split = split_for(state, povm, modes)?;
    let reduced = linalg::reduce(state.data(), &split);
    Ok(povm
        .elements()
        .iter()
        .map(|e| linalg::expectation(&reduced, e).max(0.0))
        .collect())
}

/// Inverse-CDF selection of an outcome index from unnormalised probabilities.
pub fn select_outcome(probabilities: &[f64], draw: f64) -> Result<usize> {
    let total: f64 = probabilities.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(FockError::DegenerateState);
    }
    let target = draw.clamp(0.0, 1.0) * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in probabilities.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(i);
        if target < acc {
            return Ok(i);
        }
    }
    last.ok_or(FockError::DegenerateState)
}

/// Result of [`measure`].
#[derive(Clone, Debug)]
pub struct Measurement {
    pub outcome: String,
    pub index: usize,
    pub probability: f64,
    /// Normalised post-measurement state on all modes.
    pub state: DensityMatrix,
}

/// Samples an outcome with `draw` and returns `M ρ M† / p` with `M = √Π`.
pub fn measure(state: &DensityMatrix, povm: &Povm, modes: &[usize], draw: f64) -> Result<Measurement> {
    let probabilities = outcome_probabilities(state, povm, modes)?;
    let index = select_outcome(&probabilities, draw)?;
    let split = split_for(state, povm, modes)?;
    let mut data = linalg::sandwich(state.data(), &povm.operators()[index], &split);
    let trace = data.trace().re;
    if !(trace > 0.0) {
        return Err(FockError::DegenerateState);
    }
    data /= Complex64::new(trace, 0.0);
    Ok(Measurement {
        outcome: povm.labels()[index].clone(),
        index,
        probability: probabilities[index],
        state: DensityMatrix::from_raw(state.space(), state.n_modes(), data),
    })
}

/// Result of [`measure_and_discard`].
#[derive(Clone, Debug)]
pub struct Detached {
    pub outcome: String,
    pub index: usize,
    pub probability: f64,
    /// Normalised state of the unmeasured modes (ascending order), or `None`
    /// when every mode was measured.
    pub remainder: Option<DensityMatrix>,
    /// The measured modes, as passed in.
    pub measured: Vec<usize>,
}

/// Measures `modes` and traces them out of the post-measurement state.
pub fn measure_and_discard(state: &DensityMatrix, povm: &Povm, modes: &[usize], draw: f64) -> Result<Detached> {
    let split = split_for(state, povm, modes)?;
    let probabilities = outcome_probabilities(state, povm, modes)?;
    let index = select_outcome(&probabilities, draw)?;
    let remainder = if split.rest_dim() == 1 && modes.len() == state.n_modes() {
        None
    } else {
        let mut data = linalg::reduce_weighted(state.data(), &povm.elements()[index], &split);
        let trace = data.trace().re;
        if !(trace > 0.0) {
            return Err(FockError::DegenerateState);
        }
        data /= Complex64::new(trace, 0.0);
        // Symmetrise away rounding so downstream hermiticity checks stay tight.
        let data = (&data + data.adjoint()) * Complex64::new(0.5, 0.0);
        Some(DensityMatrix::from_raw(
            state.space(),
            state.n_modes() - modes.len(),
            data,
        ))
    };
    Ok(Detached {
        outcome: povm.labels()[index].clone(),
        index,
        probability: probabilities[index],
        remainder,
        measured: modes.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> FockSpace {
        FockSpace::new(n).unwrap()
    }

    /// Truncated alternating series `Σ_k (−1)^k/(k+1)! η^{k+1} a†^{k+1} a^{k+1}`
    /// evaluated on `|n⟩`, i.e. `Σ_k (−1)^k C(n, k+1) η^{k+1}`.
    fn click_series(eta: f64, n: usize) -> f64 {
        let mut total = 0.0;
        let mut binom = 1.0;
        for j in 1..=n {
            binom = binom * (n + 1 - j) as f64 / j as f64;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * binom * eta.powi(j as i32);
        }
        total
    }

    #[test]
    fn detector_elements() {
        let s = space(3);
        let ideal = detector_povm(1.0, s).unwrap();
        let mut expected = Matrix::identity(4, 4);
        expected[(0, 0)] = Complex64::new(0.0, 0.0);
        assert!(linalg::max_abs_diff(&ideal.elements()[1], &expected) < 1e-15);

        let blind = detector_povm(0.0, s).unwrap();
        assert!(blind.elements()[1].iter().all(|z| z.norm() < 1e-15));

        let p = detector_povm(0.6, s).unwrap();
        assert!((p.elements()[1][(2, 2)].re - 0.84).abs() < 1e-12);
        for n in 0..4 {
            assert!((p.elements()[1][(n, n)].re - click_series(0.6, n)).abs() < 1e-12);
        }
        assert!(p.completeness_error() < 1e-12);
        assert!(detector_povm(1.5, s).is_err());
    }

    #[test]
    fn dark_counts() {
        let s = space(2);
        let base = detector_povm(0.6, s).unwrap();
        let same = with_dark_counts(&base, 0.0).unwrap();
        assert!(linalg::max_abs_diff(&same.elements()[1], &base.elements()[1]) < 1e-15);
        let always = with_dark_counts(&base, 1.0).unwrap();
        assert!(linalg::max_abs_diff(&always.elements()[1], &Matrix::identity(3, 3)) < 1e-15);
        let noisy = with_dark_counts(&base, 0.01).unwrap();
        assert!((noisy.elements()[1][(0, 0)].re - 0.01).abs() < 1e-15);
        assert!(with_dark_counts(&base, -0.1).is_err());
        let joint = base.product(&base).unwrap();
        assert!(matches!(with_dark_counts(&joint, 0.1), Err(FockError::NotBinary)));
    }

    #[test]
    fn measure_vacuum_and_single_photon() {
        let s = space(1);
        let ideal = detector_povm(1.0, s).unwrap();
        let vac = DensityMatrix::vacuum(s, 1).unwrap();
        let m = measure(&vac, &ideal, &[0], 0.999).unwrap();
        assert_eq!(m.outcome, NO_CLICK);
        assert_eq!(m.probability, 1.0);
        assert!(m.state.max_abs_diff(&vac) < 1e-15);

        let one = DensityMatrix::basis(s, &[1]).unwrap();
        let p = outcome_probabilities(&one, &detector_povm(0.6, s).unwrap(), &[0]).unwrap();
        assert!((p[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn product_labels_and_dimensions() {
        let s = space(1);
        let d = detector_povm(0.5, s).unwrap();
        let joint = d.product(&d).unwrap();
        assert_eq!(joint.labels(), ["00", "01", "10", "11"]);
        assert_eq!(joint.n_modes(), 2);
        assert!(joint.completeness_error() < 1e-12);
    }

    #[test]
    fn select_outcome_inverse_cdf() {
        assert_eq!(select_outcome(&[0.25, 0.75], 0.0).unwrap(), 0);
        assert_eq!(select_outcome(&[0.25, 0.75], 0.2499).unwrap(), 0);
        assert_eq!(select_outcome(&[0.25, 0.75], 0.25).unwrap(), 1);
        assert_eq!(select_outcome(&[0.25, 0.75, 0.0], 1.0).unwrap(), 1);
        assert_eq!(select_outcome(&[0.0, 1.0], 0.0).unwrap(), 1);
        assert_eq!(select_outcome(&[0.0, 0.0], 0.5), Err(FockError::DegenerateState));
    }

    #[test]
    fn measure_and_discard_heralds_partner() {
        let s = space(1);
        let one = Complex64::new(1.0, 0.0);
        let psi = super::super::Ket::superposition(s, &[(&[0, 1][..], one), (&[1, 0][..], one)]).unwrap();
        let rho = DensityMatrix::from_ket(&psi);
        let ideal = detector_povm(1.0, s).unwrap();
        let d = measure_and_discard(&rho, &ideal, &[0], 0.9).unwrap();
        assert_eq!(d.outcome, CLICK);
        assert!((d.probability - 0.5).abs() < 1e-12);
        let rem = d.remainder.unwrap();
        assert!(rem.max_abs_diff(&DensityMatrix::basis(s, &[0]).unwrap()) < 1e-12);

        let full = measure_and_discard(&rho, &ideal.product(&ideal).unwrap(), &[0, 1], 0.1).unwrap();
        assert!(full.remainder.is_none());
    }

    #[test]
    fn mismatched_modes_rejected() {
        let s = space(1);
        let rho = DensityMatrix::vacuum(s, 2).unwrap();
        let d = detector_povm(0.5, s).unwrap();
        assert!(measure(&rho, &d, &[0, 1], 0.1).is_err());
        assert!(measure(&rho, &d, &[2], 0.1).is_err());
        assert!(measure(&rho, &detector_povm(0.5, space(2)).unwrap(), &[0], 0.1).is_err());
    }
}
