//! Reconstruction of the two-memory sector state from analyser clicks.
//!
//! Populations come from direct detection of each retrieved photon, after
//! dark-count subtraction and inversion of the path transmission. The
//! coherence magnitude comes from the visibility of the interference
//! pattern recorded while scanning the relative phase.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;

use super::{AnalysisError, EffectiveState, Result};
use crate::fock::{DensityMatrix, Matrix};

/// Click-pattern tally of a two-detector analyser.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClickCounts {
    pub none: u64,
    /// Only detector 0 clicked.
    pub first: u64,
    /// Only detector 1 clicked.
    pub second: u64,
    pub both: u64,
}

impl ClickCounts {
    pub fn record(&mut self, clicks: (bool, bool)) {
        match clicks {
            (false, false) => self.none += 1,
            (true, false) => self.first += 1,
            (false, true) => self.second += 1,
            (true, true) => self.both += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.none + self.first + self.second + self.both
    }

    pub fn merge(&mut self, other: &ClickCounts) {
        self.none += other.none;
        self.first += other.first;
        self.second += other.second;
        self.both += other.both;
    }

    /// Frequencies of (none, first only, second only, both).
    fn frequencies(&self) -> [f64; 4] {
        let n = self.total() as f64;
        [self.none, self.first, self.second, self.both].map(|c| c as f64 / n)
    }

    /// Marginal click probability of `detector` and its binomial standard error.
    pub fn click_probability(&self, detector: usize) -> (f64, f64) {
        let n = self.total();
        if n == 0 {
            return (0.0, 0.0);
        }
        let hits = if detector == 0 { self.first } else { self.second } + self.both;
        let p = hits as f64 / n as f64;
        (p, (p * (1.0 - p) / n as f64).sqrt())
    }

    /// Uncorrected `(p00, p01, p10, p11)`: click frequencies taken at face value.
    pub fn raw_populations(&self) -> [f64; 4] {
        let [none, first, second, both] = self.frequencies();
        [none, second, first, both]
    }
}

/// Per-detector loss and dark-click probability of the diagonal measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionModel {
    /// `η_ret · 10^(−αℓ/10) · η_d` for each memory's path.
    pub transmission: [f64; 2],
    pub p_dark: [f64; 2],
}

/// Corrected sector populations with linear-propagation standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalEstimate {
    /// `(p00, p01, p10, p11)`.
    pub populations: [f64; 4],
    pub stderr: [f64; 4],
    /// Standard error of `p01 + p10`.
    pub single_sum_stderr: f64,
    /// Corrected excitation probability of memory 1 and memory 2.
    pub excitation: [f64; 2],
    pub n_samples: u64,
    pub warnings: Vec<String>,
}

/// Variance of `Σ w_i f_i` for multinomial frequencies `f` over `n` draws.
fn multinomial_variance(weights: [f64; 4], f: [f64; 4], n: f64) -> f64 {
    let mean: f64 = weights.iter().zip(f).map(|(w, p)| w * p).sum();
    let second: f64 = weights.iter().zip(f).map(|(w, p)| w * w * p).sum();
    ((second - mean * mean) / n).max(0.0)
}

pub fn tomography_diagonal(counts: &ClickCounts, model: &DetectionModel) -> Result<DiagonalEstimate> {
    for (k, &eta) in model.transmission.iter().enumerate() {
        if !(eta > 0.0) {
            return Err(AnalysisError::ZeroTransmission(k));
        }
    }
    let n = counts.total();
    if n == 0 {
        return Err(AnalysisError::NoSamples);
    }
    let f = counts.frequencies();
    let [e1, e2] = model.transmission;
    let mut warnings = Vec::new();

    let (click1, _) = counts.click_probability(0);
    let (click2, _) = counts.click_probability(1);
    let q1 = ((click1 - model.p_dark[0]) / e1).clamp(0.0, 1.0);
    let q2 = ((click2 - model.p_dark[1]) / e2).clamp(0.0, 1.0);
    let p11 = f[3] / (e1 * e2);

    let mut clip = |name: &str, value: f64| {
        if value < 0.0 {
            warnings.push(format!("{name} = {value:.3e} clipped to 0"));
            0.0
        } else {
            value
        }
    };
    let p10 = clip("p10", q1 - p11);
    let p01 = clip("p01", q2 - p11);
    let p00 = clip("p00", 1.0 - p10 - p01 - p11);

    // Weights over (none, first, second, both) before clipping.
    let w11 = [0.0, 0.0, 0.0, 1.0 / (e1 * e2)];
    let w10 = [0.0, 1.0 / e1, 0.0, 1.0 / e1 - w11[3]];
    let w01 = [0.0, 0.0, 1.0 / e2, 1.0 / e2 - w11[3]];
    let w00: [f64; 4] = std::array::from_fn(|i| -(w10[i] + w01[i] + w11[i]));
    let wsum: [f64; 4] = std::array::from_fn(|i| w10[i] + w01[i]);
    let nf = n as f64;
    let se = |w| multinomial_variance(w, f, nf).sqrt();

    Ok(DiagonalEstimate {
        populations: [p00, p01, p10, p11],
        stderr: [se(w00), se(w01), se(w10), se(w11)],
        single_sum_stderr: se(wsum),
        excitation: [q1, q2],
        n_samples: n,
        warnings,
    })
}

/// Expectation of [`tomography_diagonal`] for a two-mode memory state, from
/// its photon-number distribution and threshold detectors. No clipping.
pub fn expected_diagonal(state: &DensityMatrix, model: &DetectionModel) -> Result<[f64; 4]> {
    if state.n_modes() != 2 {
        return Err(AnalysisError::NotTwoModes(state.n_modes()));
    }
    let cutoff = state.space().truncation();
    let click = |k: usize, n: usize| 1.0 - (1.0 - model.p_dark[k]) * (1.0 - model.transmission[k]).powi(n as i32);
    let (mut c1, mut c2, mut both) = (0.0, 0.0, 0.0);
    for n1 in 0..=cutoff {
        for n2 in 0..=cutoff {
            let p = state.population(&[n1, n2])?;
            let (a, b) = (click(0, n1), click(1, n2));
            c1 += p * a;
            c2 += p * b;
            both += p * a * b;
        }
    }
    let [e1, e2] = model.transmission;
    let p11 = both / (e1 * e2);
    let p10 = (c1 - model.p_dark[0]) / e1 - p11;
    let p01 = (c2 - model.p_dark[1]) / e2 - p11;
    Ok([1.0 - p10 - p01 - p11, p01, p10, p11])
}

/// Click probability of one detector at one relative phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterferencePoint {
    pub phase: f64,
    pub detector: usize,
    pub click_probability: f64,
    pub stderr: f64,
    pub n_samples: u64,
}

impl InterferencePoint {
    pub fn from_counts(phase: f64, detector: usize, counts: &ClickCounts) -> Self {
        let (p, se) = counts.click_probability(detector);
        Self {
            phase,
            detector,
            click_probability: p,
            stderr: se,
            n_samples: counts.total(),
        }
    }
}

/// `y(φ) = c₀ + c₁ cos φ + c₂ sin φ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinusoidFit {
    pub offset: f64,
    pub cos_amplitude: f64,
    pub sin_amplitude: f64,
    pub visibility: f64,
    /// Covariance of `(c₀, c₁, c₂)` propagated from the point standard errors.
    pub covariance: [[f64; 3]; 3],
}

impl SinusoidFit {
    pub fn evaluate(&self, phase: f64) -> f64 {
        self.offset + self.cos_amplitude * phase.cos() + self.sin_amplitude * phase.sin()
    }

    pub fn amplitude(&self) -> f64 {
        self.cos_amplitude.hypot(self.sin_amplitude)
    }

    pub fn visibility_stderr(&self) -> f64 {
        let (c0, c1, c2) = (self.offset, self.cos_amplitude, self.sin_amplitude);
        let a = self.amplitude();
        let grad = if a > 0.0 {
            [-a / (c0 * c0), c1 / (a * c0), c2 / (a * c0)]
        } else {
            [0.0, 1.0 / c0, 0.0]
        };
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += grad[i] * self.covariance[i][j] * grad[j];
            }
        }
        var.max(0.0).sqrt()
    }
}

fn distinct_phases(points: &[InterferencePoint]) -> usize {
    let tau = std::f64::consts::TAU;
    let mut phases: Vec<f64> = points.iter().map(|p| p.phase.rem_euclid(tau)).collect();
    phases.sort_by(f64::total_cmp);
    phases.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    phases.len()
}

/// Ordinary least squares on the basis `{1, cos φ, sin φ}`.
pub fn fit_sinusoid(points: &[InterferencePoint]) -> Result<SinusoidFit> {
    let distinct = distinct_phases(points);
    if distinct < 3 {
        return Err(AnalysisError::TooFewPhases(distinct));
    }
    let n = points.len();
    let x = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => 1.0,
        1 => points[r].phase.cos(),
        _ => points[r].phase.sin(),
    });
    let y = DVector::from_iterator(n, points.iter().map(|p| p.click_probability));

    let singular = x.clone().svd(false, false).singular_values;
    let (lo, hi) = singular.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if !(hi > 0.0 && lo / hi > 1e-10) {
        return Err(AnalysisError::RankDeficient);
    }
    let xtx: Matrix3<f64> = (x.transpose() * &x).fixed_view::<3, 3>(0, 0).into();
    let inverse = xtx.try_inverse().ok_or(AnalysisError::RankDeficient)?;
    let xt_y = x.transpose() * &y;
    let c = inverse * nalgebra::Vector3::new(xt_y[0], xt_y[1], xt_y[2]);

    let mut meat = Matrix3::<f64>::zeros();
    for (r, p) in points.iter().enumerate() {
        let row = nalgebra::Vector3::new(x[(r, 0)], x[(r, 1)], x[(r, 2)]);
        meat += row * row.transpose() * (p.stderr * p.stderr);
    }
    let cov = inverse * meat * inverse;

    if !(c[0] > 0.0) {
        return Err(AnalysisError::NonPositiveOffset(c[0]));
    }
    Ok(SinusoidFit {
        offset: c[0],
        cos_amplitude: c[1],
        sin_amplitude: c[2],
        visibility: c[1].hypot(c[2]) / c[0],
        covariance: std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)])),
    })
}

/// `|d| ≈ V (p01 + p10) / 2`.
pub fn coherence_magnitude(visibility: f64, p01: f64, p10: f64) -> f64 {
    visibility * (p01 + p10) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceEstimate {
    /// Mean visibility over the fitted detectors.
    pub visibility: f64,
    pub visibility_stderr: f64,
    pub d_abs: f64,
    pub d_abs_stderr: f64,
}

pub fn tomography_coherence(fits: &[SinusoidFit], diagonal: &DiagonalEstimate) -> Result<CoherenceEstimate> {
    if fits.is_empty() {
        return Err(AnalysisError::NoSamples);
    }
    let k = fits.len() as f64;
    let visibility = fits.iter().map(|f| f.visibility).sum::<f64>() / k;
    let visibility_stderr = fits.iter().map(|f| f.visibility_stderr().powi(2)).sum::<f64>().sqrt() / k;
    let [_, p01, p10, _] = diagonal.populations;
    let half_sum = (p01 + p10) / 2.0;
    let d_abs = coherence_magnitude(visibility, p01, p10);
    let d_abs_stderr = ((half_sum * visibility_stderr).powi(2)
        + (visibility / 2.0 * diagonal.single_sum_stderr).powi(2))
    .sqrt();
    Ok(CoherenceEstimate {
        visibility,
        visibility_stderr,
        d_abs,
        d_abs_stderr,
    })
}

/// Sector matrix from populations `(p00, p01, p10, p11)` and `|d|`, divided
/// by `P̃ = Σ p_ij`. The coherence is placed real and non-negative.
pub fn assemble_reconstruction(populations: [f64; 4], d_abs: f64) -> Result<EffectiveState> {
    if let Some(&bad) = populations.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(AnalysisError::InvalidParameter {
            name: "p_ij",
            value: bad,
            reason: "must be non-negative",
        });
    }
    if !(d_abs >= 0.0 && d_abs.is_finite()) {
        return Err(AnalysisError::InvalidParameter {
            name: "|d|",
            value: d_abs,
            reason: "must be non-negative",
        });
    }
    let total: f64 = populations.iter().sum();
    if !(total > 0.0) {
        return Err(AnalysisError::NoExcitation(total));
    }
    let mut rho = Matrix::zeros(4, 4);
    for (k, p) in populations.iter().enumerate() {
        rho[(k, k)] = Complex64::new(p / total, 0.0);
    }
    rho[(1, 2)] = Complex64::new(d_abs / total, 0.0);
    rho[(2, 1)] = rho[(1, 2)];
    Ok(EffectiveState::from_parts(rho, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_diagonal_recovers_sector_populations() {
        use crate::fock::FockSpace;
        let space = FockSpace::new(2).unwrap();
        let model = DetectionModel {
            transmission: [0.3, 0.2],
            p_dark: [0.0, 0.0],
        };
        let sector = DensityMatrix::diagonal(space, 2, &[0.5, 0.2, 0.0, 0.25, 0.05, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let p = expected_diagonal(&sector, &model).unwrap();
        for (got, want) in p.iter().zip([0.5, 0.2, 0.25, 0.05]) {
            assert!((got - want).abs() < 1e-12, "{p:?}");
        }

        // A |20⟩ component reads as more than one excitation's worth of clicks.
        let doubled = DensityMatrix::diagonal(space, 2, &[0.9, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0]).unwrap();
        let p = expected_diagonal(&doubled, &model).unwrap();
        assert!((p[2] - 0.1 * (2.0 - 0.3)).abs() < 1e-12);
        assert!(p[0] < 0.9);
    }

    fn counts(none: u64, first: u64, second: u64, both: u64) -> ClickCounts {
        ClickCounts {
            none,
            first,
            second,
            both,
        }
    }

    const IDEAL: DetectionModel = DetectionModel {
        transmission: [1.0, 1.0],
        p_dark: [0.0, 0.0],
    };

    #[test]
    fn ideal_bell_statistics() {
        // Ψ+ seen by perfect detectors: exactly one photon, either side.
        let est = tomography_diagonal(&counts(0, 5020, 4980, 0), &IDEAL).unwrap();
        let [p00, p01, p10, p11] = est.populations;
        assert!(p00.abs() < 1e-12 && p11.abs() < 1e-12);
        assert!((p01 - 0.5).abs() < 3.0 * est.stderr[1]);
        assert!((p10 - 0.5).abs() < 3.0 * est.stderr[2]);
        assert!(est.warnings.is_empty());
    }

    #[test]
    fn vacuum_without_dark_counts() {
        let est = tomography_diagonal(&counts(1000, 0, 0, 0), &IDEAL).unwrap();
        assert_eq!(est.populations, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(est.stderr, [0.0; 4]);
    }

    #[test]
    fn dark_clicks_are_subtracted_before_inversion() {
        let model = DetectionModel {
            transmission: [0.25, 0.25],
            p_dark: [0.01, 0.01],
        };
        let est = tomography_diagonal(&counts(98, 1, 1, 0), &model).unwrap();
        assert!(est.excitation[0].abs() < 1e-12 && est.excitation[1].abs() < 1e-12);
        assert!((est.populations[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inefficiency_is_inverted() {
        // True state: p10 = 0.2, p01 = 0.2, p00 = 0.6; transmission 0.5 each.
        let model = DetectionModel {
            transmission: [0.5, 0.5],
            p_dark: [0.0, 0.0],
        };
        let est = tomography_diagonal(&counts(800, 100, 100, 0), &model).unwrap();
        let expected = [0.6, 0.2, 0.2, 0.0];
        for k in 0..4 {
            assert!((est.populations[k] - expected[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_populations_are_clipped_with_warning() {
        let model = DetectionModel {
            transmission: [0.1, 0.1],
            p_dark: [0.0, 0.0],
        };
        let est = tomography_diagonal(&counts(90, 0, 0, 10), &model).unwrap();
        assert!(est.populations.iter().all(|p| *p >= 0.0));
        assert!(!est.warnings.is_empty());
    }

    #[test]
    fn zero_transmission_is_an_error() {
        let model = DetectionModel {
            transmission: [0.5, 0.0],
            p_dark: [0.0, 0.0],
        };
        assert_eq!(
            tomography_diagonal(&counts(1, 0, 0, 0), &model),
            Err(AnalysisError::ZeroTransmission(1))
        );
        assert_eq!(tomography_diagonal(&ClickCounts::default(), &IDEAL), Err(AnalysisError::NoSamples));
    }

    #[test]
    fn population_stderr_matches_binomial_for_single_outcome() {
        let c = counts(600, 400, 0, 0);
        let est = tomography_diagonal(&c, &IDEAL).unwrap();
        let binomial = (0.4f64 * 0.6 / 1000.0).sqrt();
        assert!((est.stderr[2] - binomial).abs() < 1e-15);
        assert!((est.stderr[0] - binomial).abs() < 1e-15);
    }

    fn sampled(phases: usize, f: impl Fn(f64) -> f64) -> Vec<InterferencePoint> {
        (0..phases)
            .map(|k| {
                let phase = std::f64::consts::TAU * k as f64 / phases as f64;
                InterferencePoint {
                    phase,
                    detector: 0,
                    click_probability: f(phase),
                    stderr: 0.0,
                    n_samples: 1,
                }
            })
            .collect()
    }

    #[test]
    fn noiseless_sinusoid_is_recovered_exactly() {
        let fit = fit_sinusoid(&sampled(16, |p| 0.5 + 0.4 * p.cos())).unwrap();
        assert!((fit.visibility - 0.8).abs() < 1e-12);
        assert!((fit.offset - 0.5).abs() < 1e-12);
        assert!(fit.sin_amplitude.abs() < 1e-12);
    }

    #[test]
    fn constant_data_has_zero_visibility() {
        let fit = fit_sinusoid(&sampled(8, |_| 0.3)).unwrap();
        assert!(fit.visibility.abs() < 1e-12);
    }

    #[test]
    fn phase_shift_leaves_visibility_unchanged() {
        let a = fit_sinusoid(&sampled(16, |p| 0.5 + 0.4 * p.cos())).unwrap();
        let b = fit_sinusoid(&sampled(16, |p| 0.5 + 0.4 * (p - 1.1).cos())).unwrap();
        assert!((a.visibility - b.visibility).abs() < 1e-12);
    }

    #[test]
    fn fit_needs_three_distinct_phases() {
        let mut points = sampled(2, |_| 0.3);
        points.push(InterferencePoint {
            phase: std::f64::consts::TAU,
            ..points[0]
        });
        assert_eq!(fit_sinusoid(&points), Err(AnalysisError::TooFewPhases(2)));
        assert_eq!(
            fit_sinusoid(&sampled(8, |_| 0.0)),
            Err(AnalysisError::NonPositiveOffset(0.0))
        );
    }

    #[test]
    fn fit_covariance_propagates_point_errors() {
        let mut points = sampled(16, |p| 0.5 + 0.4 * p.cos());
        for p in &mut points {
            p.stderr = 0.01;
        }
        let fit = fit_sinusoid(&points).unwrap();
        // Orthogonal design over a full period: var(c0) = σ²/n, var(c1) = 2σ²/n.
        assert!((fit.covariance[0][0] - 1e-4 / 16.0).abs() < 1e-15);
        assert!((fit.covariance[1][1] - 2e-4 / 16.0).abs() < 1e-15);
        assert!(fit.visibility_stderr() > 0.0);
    }

    #[test]
    fn coherence_magnitude_examples() {
        assert!((coherence_magnitude(0.898, 0.0402, 0.0402) - 0.0360996).abs() < 1e-7);
        assert_eq!(coherence_magnitude(0.0, 0.3, 0.3), 0.0);
        assert_eq!(coherence_magnitude(1.0, 0.5, 0.5), 0.5);
    }

    #[test]
    fn coherence_estimate_averages_detectors() {
        let a = fit_sinusoid(&sampled(16, |p| 0.5 + 0.4 * p.cos())).unwrap();
        let b = fit_sinusoid(&sampled(16, |p| 0.5 - 0.45 * p.cos())).unwrap();
        let diag = tomography_diagonal(&counts(0, 50, 50, 0), &IDEAL).unwrap();
        let est = tomography_coherence(&[a, b], &diag).unwrap();
        assert!((est.visibility - 0.85).abs() < 1e-12);
        assert!((est.d_abs - 0.425).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_layout() {
        let vac = assemble_reconstruction([1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(vac.population(0), 1.0);
        assert_eq!(vac.trace(), 1.0);

        let r = assemble_reconstruction([0.9, 0.04, 0.04, 0.02], 0.0361).unwrap();
        assert!((r.trace() - 1.0).abs() < 1e-12);
        assert!((r.coherence().re - 0.0361).abs() < 1e-12);
        assert_eq!(r.rho()[(2, 1)], r.rho()[(1, 2)]);
        assert!(r.population(0) > 0.5);

        let unnormalised = assemble_reconstruction([0.5, 0.25, 0.25, 0.5], 0.1).unwrap();
        assert!((unnormalised.trace() - 1.0).abs() < 1e-12);
        assert!((unnormalised.normalization() - 1.5).abs() < 1e-12);
        assert!(assemble_reconstruction([0.0; 4], 0.0).is_err());
        assert!(assemble_reconstruction([1.0, -0.1, 0.0, 0.0], 0.0).is_err());
    }
}
