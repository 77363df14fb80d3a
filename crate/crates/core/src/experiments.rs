//! Drivers for the sweeps behind each command, and their file formats.
//!
//! Every driver walks trials in index order and folds records as they come,
//! so outputs depend only on the configuration and seed. Sweep points take
//! consecutive, non-overlapping blocks of trial indices.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    assemble_reconstruction, coherence_magnitude, expected_diagonal, fit_sinusoid, generation_rate, heralded_fidelity,
    project_single_excitation, tomography_coherence, tomography_diagonal, AnalysisError, BellSign, ClickCounts,
    CoherenceEstimate, DetectionModel, DiagonalEstimate, EffectiveState, InterferencePoint, SinusoidFit,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::fock::{Complex64, DensityMatrix, Matrix};
use crate::hardware::{Herald, QsdMode};
use crate::protocol::{binomial_estimate, run_cycle, Analyser, ProtocolError, Topology};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

pub const FIDELITY_HEADER: &str = "mu1,mu2,fidelity,stderr,n_heralds,n_bins";
pub const RATE_HEADER: &str = "M,mu,p_h,p_h_stderr,rate_hz";
pub const INTERFERENCE_HEADER: &str = "phase_rad,detector,click_prob,stderr,n_samples";

/// Full-precision float formatting shared by all CSV outputs.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Herald outcome tally over many bins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct HeraldCounts {
    pub none: u64,
    pub plus: u64,
    pub minus: u64,
    pub double: u64,
}

impl HeraldCounts {
    fn record(&mut self, herald: Herald) {
        match herald {
            Herald::None => self.none += 1,
            Herald::Plus => self.plus += 1,
            Herald::Minus => self.minus += 1,
            Herald::Double => self.double += 1,
        }
    }

    pub fn bins(&self) -> u64 {
        self.none + self.plus + self.minus + self.double
    }

    pub fn heralded(&self) -> u64 {
        self.plus + self.minus
    }
}

/// Statistics of one parameter point, accumulated over cycles.
#[derive(Clone, Debug)]
pub struct PointStatistics {
    pub heralds: HeraldCounts,
    fidelity: Welford,
}

impl PointStatistics {
    pub fn fidelity(&self) -> f64 {
        self.fidelity.mean()
    }

    pub fn fidelity_stderr(&self) -> f64 {
        self.fidelity.stderr()
    }

    pub fn herald_probability(&self) -> (f64, f64) {
        binomial_estimate(self.heralds.heralded(), self.heralds.bins())
    }
}

/// Runs `trials` cycles starting at trial index `first_trial`.
pub fn simulate_point(topology: &Topology, seed: u64, first_trial: u64, trials: u64, with_fidelity: bool) -> Result<PointStatistics> {
    let mut stats = PointStatistics {
        heralds: HeraldCounts::default(),
        fidelity: Welford::default(),
    };
    for t in 0..trials {
        for record in run_cycle(topology, seed, first_trial + t)? {
            stats.heralds.record(record.herald);
            if !with_fidelity {
                continue;
            }
            if let (Some(sign), Some(state)) = (BellSign::from_herald(record.herald), &record.memory_state) {
                stats.fidelity.push(heralded_fidelity(state, sign)?);
            }
        }
    }
    Ok(stats)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityPoint {
    pub mu1: f64,
    pub mu2: f64,
    pub fidelity: f64,
    pub stderr: f64,
    pub n_heralds: u64,
    pub n_bins: u64,
}

/// Mean effective fidelity over the `mu_grid × mu_grid` plane.
pub fn fidelity_sweep(config: &ExperimentConfig) -> Result<Vec<FidelityPoint>> {
    let grid = &config.fidelity_sweep.mu_grid;
    let mut points = Vec::with_capacity(grid.len() * grid.len());
    for (i, &mu1) in grid.iter().enumerate() {
        for (j, &mu2) in grid.iter().enumerate() {
            let k = (i * grid.len() + j) as u64;
            let topology = Topology {
                mu: [mu1, mu2],
                ..config.topology()?
            };
            let stats = simulate_point(&topology, config.seed, k * config.trials, config.trials, true)?;
            points.push(FidelityPoint {
                mu1,
                mu2,
                fidelity: stats.fidelity(),
                stderr: stats.fidelity_stderr(),
                n_heralds: stats.heralds.heralded(),
                n_bins: stats.heralds.bins(),
            });
        }
    }
    Ok(points)
}

pub fn fidelity_csv(points: &[FidelityPoint]) -> String {
    let mut out = format!("{FIDELITY_HEADER}\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(p.mu1),
            num(p.mu2),
            num(p.fidelity),
            num(p.stderr),
            p.n_heralds,
            p.n_bins
        );
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatePoint {
    pub mode_number: usize,
    pub mu: f64,
    pub p_h: f64,
    pub p_h_stderr: f64,
    pub rate_hz: f64,
}

/// Heralding probability and generation rate versus mode number.
pub fn rate_sweep(config: &ExperimentConfig) -> Result<Vec<RatePoint>> {
    let sweep = &config.rate_sweep;
    let mut points = Vec::with_capacity(sweep.mu_values.len() * sweep.mode_numbers.len());
    let mut first_trial = 0;
    for &mu in &sweep.mu_values {
        for &mode_number in &sweep.mode_numbers {
            let topology = Topology {
                mu: [mu, mu],
                mode_number,
                ..config.topology()?
            };
            let trials = config.rate_trials(mode_number);
            let stats = simulate_point(&topology, config.seed, first_trial, trials, false)?;
            first_trial += trials;
            let (p_h, p_h_stderr) = stats.herald_probability();
            let timing = topology.timing()?;
            let rate_hz = generation_rate(
                mode_number,
                topology.frequency,
                p_h,
                timing.tau_ph_seconds(),
                timing.tau_c_seconds(),
            )?;
            points.push(RatePoint {
                mode_number,
                mu,
                p_h,
                p_h_stderr,
                rate_hz,
            });
        }
    }
    Ok(points)
}

pub fn rate_csv(points: &[RatePoint]) -> String {
    let mut out = format!("{RATE_HEADER}\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.mode_number,
            num(p.mu),
            num(p.p_h),
            num(p.p_h_stderr),
            num(p.rate_hz)
        );
    }
    out
}

/// Summary of a single configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub mu1: f64,
    pub mu2: f64,
    pub mode_number: usize,
    pub trials: u64,
    pub seed: u64,
    pub n_bins: u64,
    pub heralds: HeraldCounts,
    pub p_h: f64,
    pub p_h_stderr: f64,
    pub rate_hz: f64,
    pub fidelity: Option<f64>,
    pub fidelity_stderr: Option<f64>,
    pub tau_ph_s: f64,
    pub tau_c_s: f64,
}

pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    let topology = config.topology()?;
    let stats = simulate_point(&topology, config.seed, 0, config.trials, true)?;
    let (p_h, p_h_stderr) = stats.herald_probability();
    let timing = topology.timing()?;
    let rate_hz = generation_rate(
        topology.mode_number,
        topology.frequency,
        p_h,
        timing.tau_ph_seconds(),
        timing.tau_c_seconds(),
    )?;
    let finite = |x: f64| x.is_finite().then_some(x);
    Ok(RunSummary {
        mu1: config.mu1,
        mu2: config.mu2,
        mode_number: topology.mode_number,
        trials: config.trials,
        seed: config.seed,
        n_bins: stats.heralds.bins(),
        heralds: stats.heralds,
        p_h,
        p_h_stderr,
        rate_hz,
        fidelity: finite(stats.fidelity()),
        fidelity_stderr: finite(stats.fidelity_stderr()),
        tau_ph_s: timing.tau_ph_seconds(),
        tau_c_s: timing.tau_c_seconds(),
    })
}

pub fn run_json(summary: &RunSummary) -> String {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serialises");
    text.push('\n');
    text
}

/// Heralded memory states averaged over the tomography runs.
#[derive(Clone, Debug)]
pub struct OracleState {
    /// Sector populations `(p00, p01, p10, p11)` of the mean heralded state.
    pub populations: [f64; 4],
    /// `|⟨01|ρ|10⟩|` of the mean state over plus heralds.
    pub d_abs: f64,
    /// Mean trace kept by the sector projection.
    pub sector_weight: f64,
    /// Expectation of the diagonal estimator on the mean state of the
    /// diagonal-run heralds, multi-photon components included.
    pub estimator_expectation: [f64; 4],
    pub state: EffectiveState,
}

#[derive(Default)]
struct StateSum {
    all: Option<Matrix>,
    plus: Option<Matrix>,
    diagonal: Option<Matrix>,
    n_all: u64,
    n_plus: u64,
    n_diagonal: u64,
}

impl StateSum {
    fn add(&mut self, state: &DensityMatrix, herald: Herald, diagonal_run: bool) {
        let add_to = |slot: &mut Option<Matrix>| match slot {
            Some(acc) => *acc += state.data(),
            None => *slot = Some(state.data().clone()),
        };
        add_to(&mut self.all);
        self.n_all += 1;
        if herald == Herald::Plus {
            add_to(&mut self.plus);
            self.n_plus += 1;
        }
        if diagonal_run {
            add_to(&mut self.diagonal);
            self.n_diagonal += 1;
        }
    }

    fn finish(self, template: &DensityMatrix, model: &DetectionModel) -> Result<OracleState> {
        let mean = |sum: Option<Matrix>, n: u64| -> Result<DensityMatrix> {
            let sum = sum.ok_or(AnalysisError::NoSamples)?;
            let data = sum / Complex64::new(n as f64, 0.0);
            Ok(DensityMatrix::new(template.space(), template.n_modes(), data).map_err(AnalysisError::from)?)
        };
        let estimator_expectation = expected_diagonal(&mean(self.diagonal, self.n_diagonal)?, model)?;
        let all = project_single_excitation(&mean(self.all, self.n_all)?)?;
        let plus = project_single_excitation(&mean(self.plus, self.n_plus)?)?;
        let populations: [f64; 4] = std::array::from_fn(|k| all.rho[(k, k)].re);
        let d_abs = plus.rho[(1, 2)].norm();
        Ok(OracleState {
            populations,
            d_abs,
            sector_weight: all.weight,
            estimator_expectation,
            state: assemble_reconstruction(populations, d_abs)?,
        })
    }
}

/// Reconstructed sector state and the data behind it.
#[derive(Clone, Debug)]
pub struct TomographyResult {
    pub reconstruction: EffectiveState,
    /// Element-wise standard error of `reconstruction`.
    pub stderr: [[f64; 4]; 4],
    pub diagonal: DiagonalEstimate,
    pub diagonal_counts: ClickCounts,
    pub coherence: CoherenceEstimate,
    pub fits: Vec<SinusoidFit>,
    pub interference: Vec<InterferencePoint>,
    /// Populations with no dark-count or transmission correction.
    pub raw_populations: [f64; 4],
    pub raw_d_abs: f64,
    pub oracle: OracleState,
    pub diagonal_bins: u64,
    pub sweep_bins: u64,
    pub sweep_heralds: u64,
}

impl TomographyResult {
    /// Heralded bins used for populations plus plus-heralded bins in the sweep.
    pub fn heralded_bins(&self) -> u64 {
        self.diagonal_counts.total() + self.sweep_heralds
    }
}

/// Phases of the interference sweep, evenly covering one period.
pub fn sweep_phases(n_steps: usize) -> Vec<f64> {
    (0..n_steps).map(|s| TAU * s as f64 / n_steps as f64).collect()
}

pub fn detection_model(topology: &Topology) -> Result<DetectionModel> {
    let eta = topology.analyser_transmission()?;
    let p_dark = topology.detector()?.p_dark();
    Ok(DetectionModel {
        transmission: [eta, eta],
        p_dark: [p_dark, p_dark],
    })
}

/// Diagonal measurement on heralded bins, then a phase sweep on plus heralds.
pub fn tomography(config: &ExperimentConfig) -> Result<TomographyResult> {
    let base = config.topology()?;
    let mut states = StateSum::default();
    let mut template = None;

    let diagonal_topology = Topology {
        analyser: Analyser::Qsd(QsdMode::Diagonal),
        ..base.clone()
    };
    let diagonal_trials = config.diagonal_trials();
    let mut diagonal_counts = ClickCounts::default();
    let mut diagonal_bins = 0;
    for t in 0..diagonal_trials {
        for record in run_cycle(&diagonal_topology, config.seed, t)? {
            diagonal_bins += 1;
            if !record.herald.is_success() {
                continue;
            }
            if let Some(clicks) = record.analyser_clicks {
                diagonal_counts.record(clicks);
            }
            if let Some(state) = &record.memory_state {
                states.add(state, record.herald, true);
                template.get_or_insert_with(|| state.clone());
            }
        }
    }

    let per_phase = config.trials_per_phase();
    let mut interference = Vec::with_capacity(2 * config.phase_sweep.n_steps);
    let mut sweep_bins = 0;
    let mut sweep_heralds = 0;
    for (s, phase) in sweep_phases(config.phase_sweep.n_steps).into_iter().enumerate() {
        let topology = Topology {
            analyser: Analyser::Qsd(QsdMode::Coherence { phase }),
            ..base.clone()
        };
        let first = diagonal_trials + s as u64 * per_phase;
        let mut counts = ClickCounts::default();
        for t in 0..per_phase {
            for record in run_cycle(&topology, config.seed, first + t)? {
                sweep_bins += 1;
                if record.herald != Herald::Plus {
                    continue;
                }
                if let Some(clicks) = record.analyser_clicks {
                    counts.record(clicks);
                }
                if let Some(state) = &record.memory_state {
                    states.add(state, record.herald, false);
                    template.get_or_insert_with(|| state.clone());
                }
            }
        }
        sweep_heralds += counts.total();
        for detector in 0..2 {
            interference.push(InterferencePoint::from_counts(phase, detector, &counts));
        }
    }

    let template = template.ok_or(AnalysisError::NoSamples)?;
    let model = detection_model(&base)?;
    let oracle = states.finish(&template, &model)?;

    let diagonal = tomography_diagonal(&diagonal_counts, &model)?;
    let fits = (0..2)
        .map(|d| {
            let points: Vec<InterferencePoint> = interference.iter().filter(|p| p.detector == d).copied().collect();
            fit_sinusoid(&points)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let coherence = tomography_coherence(&fits, &diagonal)?;
    let reconstruction = assemble_reconstruction(diagonal.populations, coherence.d_abs)?;

    let total = reconstruction.normalization();
    let mut stderr = [[0.0; 4]; 4];
    for k in 0..4 {
        stderr[k][k] = diagonal.stderr[k] / total;
    }
    stderr[1][2] = coherence.d_abs_stderr / total;
    stderr[2][1] = stderr[1][2];

    let raw_populations = diagonal_counts.raw_populations();
    let raw_d_abs = coherence_magnitude(coherence.visibility, raw_populations[1], raw_populations[2]);

    Ok(TomographyResult {
        reconstruction,
        stderr,
        diagonal,
        diagonal_counts,
        coherence,
        fits,
        interference,
        raw_populations,
        raw_d_abs,
        oracle,
        diagonal_bins,
        sweep_bins,
        sweep_heralds,
    })
}

pub fn interference_csv(points: &[InterferencePoint]) -> String {
    let mut out = format!("{INTERFERENCE_HEADER}\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(p.phase),
            p.detector,
            num(p.click_probability),
            num(p.stderr),
            p.n_samples
        );
    }
    out
}

#[derive(Serialize)]
struct FitReport {
    detector: usize,
    c0: f64,
    c1: f64,
    c2: f64,
    visibility: f64,
    visibility_stderr: f64,
}

#[derive(Serialize)]
struct RawReport {
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
    d_abs: f64,
}

#[derive(Serialize)]
struct OracleReport {
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
    d_abs: f64,
    sector_weight: f64,
    estimator_expectation: [f64; 4],
}

#[derive(Serialize)]
struct TomographyReport {
    rho_real: [[f64; 4]; 4],
    rho_imag: [[f64; 4]; 4],
    rho_stderr: [[f64; 4]; 4],
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
    p_stderr: [f64; 4],
    normalization: f64,
    d_abs: f64,
    d_abs_stderr: f64,
    visibility: f64,
    visibility_stderr: f64,
    visibility_per_detector: Vec<f64>,
    fit_coeffs: Vec<FitReport>,
    raw: RawReport,
    oracle: OracleReport,
    diagonal_bins: u64,
    diagonal_heralds: u64,
    sweep_bins: u64,
    sweep_heralds: u64,
    warnings: Vec<String>,
}

pub fn tomography_json(result: &TomographyResult) -> String {
    let rho = result.reconstruction.rho();
    let [p00, p01, p10, p11] = result.diagonal.populations;
    let [o00, o01, o10, o11] = result.oracle.populations;
    let [r00, r01, r10, r11] = result.raw_populations;
    let report = TomographyReport {
        rho_real: std::array::from_fn(|r| std::array::from_fn(|c| rho[(r, c)].re)),
        rho_imag: std::array::from_fn(|r| std::array::from_fn(|c| rho[(r, c)].im)),
        rho_stderr: result.stderr,
        p00,
        p01,
        p10,
        p11,
        p_stderr: result.diagonal.stderr,
        normalization: result.reconstruction.normalization(),
        d_abs: result.coherence.d_abs,
        d_abs_stderr: result.coherence.d_abs_stderr,
        visibility: result.coherence.visibility,
        visibility_stderr: result.coherence.visibility_stderr,
        visibility_per_detector: result.fits.iter().map(|f| f.visibility).collect(),
        fit_coeffs: result
            .fits
            .iter()
            .enumerate()
            .map(|(detector, f)| FitReport {
                detector,
                c0: f.offset,
                c1: f.cos_amplitude,
                c2: f.sin_amplitude,
                visibility: f.visibility,
                visibility_stderr: f.visibility_stderr(),
            })
            .collect(),
        raw: RawReport {
            p00: r00,
            p01: r01,
            p10: r10,
            p11: r11,
            d_abs: result.raw_d_abs,
        },
        oracle: OracleReport {
            p00: o00,
            p01: o01,
            p10: o10,
            p11: o11,
            d_abs: result.oracle.d_abs,
            sector_weight: result.oracle.sector_weight,
            estimator_expectation: result.oracle.estimator_expectation,
        },
        diagonal_bins: result.diagonal_bins,
        diagonal_heralds: result.diagonal_counts.total(),
        sweep_bins: result.sweep_bins,
        sweep_heralds: result.sweep_heralds,
        warnings: result.diagonal.warnings.clone(),
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serialises");
    text.push('\n');
    text
}
