use std::collections::BTreeMap;

use crate::des::{seconds_to_ps, SimError, Time};
use crate::fock::{
    self, detector_povm, gad_channel, phase_operator, tmsv_ket,
    transform_povm_through_bs, with_dark_counts, FockSpace, Ket, KrausChannel, Matrix, Povm,
    BALANCED_PHI, BALANCED_THETA,
};
use crate::state_manager::{StateKey, StateManager};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

fn device_error(entity: &str, message: impl Into<String>) -> SimError {
    SimError::Device {
        entity: entity.to_string(),
        message: message.into(),
    }
}

fn check_unit(entity: &str, field: &str, value: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(device_error(entity, format!("{field} = {value} is outside [0, 1]")))
    }
}

/// SPDC pair source emitting a truncated two-mode squeezed vacuum per pulse.
#[derive(Clone, Debug)]
pub struct SpdcSource {
    mu: f64,
    frequency: f64,
    state: Ket,
}

impl SpdcSource {
    pub fn new(mu: f64, frequency: f64, space: FockSpace) -> Result<Self, SimError> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(device_error("source", format!("frequency = {frequency} must be positive")));
        }
        Ok(Self {
            mu,
            frequency,
            state: tmsv_ket(mu, space)?,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Pulse spacing `1/f` in picoseconds.
    pub fn period(&self) -> Time {
        seconds_to_ps(1.0 / self.frequency)
    }

    /// Allocates a signal/idler pair in the source state.
    pub fn emit(&self, states: &mut StateManager) -> Result<(StateKey, StateKey), SimError> {
        let keys = states.allocate_ket(&self.state)?;
        Ok((keys[0], keys[1]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReemissionOrder {
    #[default]
    Same,
    Reversed,
}

/// Multimode AFC memory with `M` temporal bins.
#[derive(Clone, Debug)]
pub struct AfcMemory {
    mode_number: usize,
    eta_abs: f64,
    eta_ret: f64,
    storage_time: Time,
    period: Time,
    order: ReemissionOrder,
    absorption: KrausChannel,
    retrieval: KrausChannel,
    stored: BTreeMap<usize, (StateKey, Time)>,
}

impl AfcMemory {
    pub fn new(
        mode_number: usize,
        eta_abs: f64,
        eta_ret: f64,
        storage_time: Time,
        period: Time,
        order: ReemissionOrder,
        space: FockSpace,
    ) -> Result<Self, SimError> {
        if mode_number == 0 {
            return Err(device_error("memory", "mode number must be at least 1"));
        }
        check_unit("memory", "eta_abs", eta_abs)?;
        check_unit("memory", "eta_ret", eta_ret)?;
        if storage_time == 0 {
            return Err(device_error("memory", "storage time must be positive"));
        }
        if order == ReemissionOrder::Reversed && storage_time < (mode_number as Time - 1) * period {
            return Err(device_error(
                "memory",
                "reversed re-emission needs storage time of at least (M - 1) pulse periods",
            ));
        }
        Ok(Self {
            mode_number,
            eta_abs,
            eta_ret,
            storage_time,
            period,
            order,
            absorption: gad_channel(1.0 - eta_abs, space)?,
            retrieval: gad_channel(1.0 - eta_ret, space)?,
            stored: BTreeMap::new(),
        })
    }

    pub fn mode_number(&self) -> usize {
        self.mode_number
    }

    pub fn eta_abs(&self) -> f64 {
        self.eta_abs
    }

    pub fn eta_ret(&self) -> f64 {
        self.eta_ret
    }

    pub fn storage_time(&self) -> Time {
        self.storage_time
    }

    pub fn stored_bins(&self) -> Vec<usize> {
        self.stored.keys().copied().collect()
    }

    pub fn key_at(&self, bin: usize) -> Option<StateKey> {
        self.stored.get(&bin).map(|(k, _)| *k)
    }

    /// Stores `key` in `bin` after absorption loss. Returns the time at
    /// which the bin is due for re-emission.
    pub fn absorb(&mut self, states: &mut StateManager, key: StateKey, bin: usize, now: Time) -> Result<Time, SimError> {
        if bin >= self.mode_number {
            return Err(device_error(
                "memory",
                format!("bin {bin} exceeds the {} available modes", self.mode_number),
            ));
        }
        if self.stored.contains_key(&bin) {
            return Err(device_error("memory", format!("bin {bin} is already occupied")));
        }
        states.apply_channel_at(key, &self.absorption)?;
        self.stored.insert(bin, (key, now));
        Ok(self.reemission_time(bin, now))
    }

    /// Re-emission schedule: `absorbed_at + storage` in absorption order, or
    /// mirrored around the train centre when reversed.
    pub fn reemission_time(&self, bin: usize, absorbed_at: Time) -> Time {
        match self.order {
            ReemissionOrder::Same => absorbed_at + self.storage_time,
            ReemissionOrder::Reversed => {
                let shift = (self.mode_number - 1) as i64 - 2 * bin as i64;
                (absorbed_at as i64 + self.storage_time as i64 + shift * self.period as i64) as Time
            }
        }
    }

    /// Releases `bin` after retrieval loss.
    pub fn reemit(&mut self, states: &mut StateManager, bin: usize) -> Result<StateKey, SimError> {
        let (key, _) = self
            .stored
            .remove(&bin)
            .ok_or_else(|| device_error("memory", format!("bin {bin} is empty")))?;
        states.apply_channel_at(key, &self.retrieval)?;
        Ok(key)
    }
}

/// Optical fiber with loss `1 − 10^(−αℓ/10)` and delay `ℓ·n/c`.
#[derive(Clone, Debug)]
pub struct FiberChannel {
    length_km: f64,
    attenuation_db_per_km: f64,
    refractive_index: f64,
    channel: KrausChannel,
}

impl FiberChannel {
    pub fn new(length_km: f64, attenuation_db_per_km: f64, refractive_index: f64, space: FockSpace) -> Result<Self, SimError> {
        if !(length_km >= 0.0 && attenuation_db_per_km >= 0.0 && refractive_index >= 1.0) {
            return Err(device_error(
                "fiber",
                "length and attenuation must be non-negative and refractive index at least 1",
            ));
        }
        let loss = 1.0 - 10f64.powf(-attenuation_db_per_km * length_km / 10.0);
        Ok(Self {
            length_km,
            attenuation_db_per_km,
            refractive_index,
            channel: gad_channel(loss, space)?,
        })
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.attenuation_db_per_km * self.length_km / 10.0)
    }

    pub fn loss(&self) -> f64 {
        1.0 - self.transmittance()
    }

    pub fn delay(&self) -> Time {
        seconds_to_ps(self.length_km * 1e3 * self.refractive_index / SPEED_OF_LIGHT)
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn transmit(&self, states: &mut StateManager, key: StateKey) -> Result<(), SimError> {
        states.apply_channel_at(key, &self.channel)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassicalChannel {
    delay: Time,
}

impl ClassicalChannel {
    pub fn new(delay: Time) -> Result<Self, SimError> {
        if delay == 0 {
            return Err(device_error("classical channel", "delay must be positive"));
        }
        Ok(Self { delay })
    }

    pub fn delay(&self) -> Time {
        self.delay
    }
}

/// Single-photon detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spd {
    pub efficiency: f64,
    pub dark_count_hz: f64,
    pub window: Time,
}

impl Spd {
    pub fn new(efficiency: f64, dark_count_hz: f64, window: Time) -> Result<Self, SimError> {
        check_unit("detector", "efficiency", efficiency)?;
        if !(dark_count_hz >= 0.0 && dark_count_hz.is_finite()) {
            return Err(device_error("detector", "dark count rate must be non-negative"));
        }
        Ok(Self {
            efficiency,
            dark_count_hz,
            window,
        })
    }

    /// Probability of at least one dark count in the window.
    pub fn p_dark(&self) -> f64 {
        1.0 - (-self.dark_count_hz * self.window as f64 / 1e12).exp()
    }

    pub fn povm(&self, space: FockSpace) -> fock::Result<Povm> {
        with_dark_counts(&detector_povm(self.efficiency, space)?, self.p_dark())
    }
}

/// BSM result for one temporal bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Herald {
    /// No detector clicked.
    None,
    /// Only detector 0 clicked.
    Plus,
    /// Only detector 1 clicked.
    Minus,
    /// Both detectors clicked.
    Double,
}

impl Herald {
    pub fn from_clicks(first: bool, second: bool) -> Self {
        match (first, second) {
            (false, false) => Herald::None,
            (true, false) => Herald::Plus,
            (false, true) => Herald::Minus,
            (true, true) => Herald::Double,
        }
    }

    pub fn is_success(self) -> bool {
        matches!(self, Herald::Plus | Herald::Minus)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Herald::None => "none",
            Herald::Plus => "plus",
            Herald::Minus => "minus",
            Herald::Double => "double",
        }
    }
}

fn clicks(label: &str) -> (bool, bool) {
    let mut chars = label.chars();
    (chars.next() == Some('1'), chars.next() == Some('1'))
}

/// Two detectors behind a beamsplitter on the doubled space, pulled back
/// onto the two truncated input modes.
fn interferometer_povm(left: &Spd, right: &Spd, phase_on_first: f64, phase_on_second: f64, space: FockSpace) -> fock::Result<Povm> {
    let big = space.doubled();
    let joint = left.povm(big)?.product(&right.povm(big)?)?;
    let pulled = transform_povm_through_bs(&joint, BALANCED_THETA, BALANCED_PHI, space)?;
    if phase_on_first == 0.0 && phase_on_second == 0.0 {
        return Ok(pulled);
    }
    let u = phase_operator(phase_on_first, space).kronecker(&phase_operator(phase_on_second, space));
    let u_dag = u.adjoint();
    let elements: Vec<Matrix> = pulled
        .elements()
        .iter()
        .map(|e| {
            let t = &u_dag * e * &u;
            (&t + t.adjoint()) * fock::Complex64::new(0.5, 0.0)
        })
        .collect();
    Povm::new(space, 2, elements, pulled.labels().to_vec())
}

/// Bell-state measurement station: 50/50 beamsplitter and two detectors.
#[derive(Clone, Debug)]
pub struct BsmStation {
    detectors: [Spd; 2],
    povm: Povm,
}

impl BsmStation {
    /// `delta_phi` is the extra phase picked up by the idler entering port 1.
    pub fn new(detectors: [Spd; 2], delta_phi: f64, space: FockSpace) -> Result<Self, SimError> {
        let povm = interferometer_povm(&detectors[0], &detectors[1], 0.0, delta_phi, space)?;
        Ok(Self { detectors, povm })
    }

    pub fn detectors(&self) -> &[Spd; 2] {
        &self.detectors
    }

    /// Joint four-outcome POVM on the two idler inputs.
    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    /// Measures and traces out the two idlers.
    pub fn measure(&self, states: &mut StateManager, idlers: [StateKey; 2], draw: f64) -> Result<Herald, SimError> {
        let outcome = states.measure_at(&idlers, &self.povm, draw, true)?;
        let (a, b) = clicks(&outcome.label);
        Ok(Herald::from_clicks(a, b))
    }
}

/// Analyser configuration of the quantum state detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QsdMode {
    /// Each memory photon goes straight to its own detector.
    Diagonal,
    /// Fiber stretcher with this phase on photon 1, then a 50/50 beamsplitter.
    Coherence { phase: f64 },
}

/// Two-detector analyser for the retrieved memory photons.
#[derive(Clone, Debug)]
pub struct Qsd {
    mode: QsdMode,
    detectors: [Spd; 2],
    povm: Povm,
}

impl Qsd {
    pub fn new(mode: QsdMode, detectors: [Spd; 2], space: FockSpace) -> Result<Self, SimError> {
        let povm = match mode {
            QsdMode::Diagonal => detectors[0].povm(space)?.product(&detectors[1].povm(space)?)?,
            QsdMode::Coherence { phase } => interferometer_povm(&detectors[0], &detectors[1], phase, 0.0, space)?,
        };
        Ok(Self { mode, detectors, povm })
    }

    pub fn mode(&self) -> QsdMode {
        self.mode
    }

    pub fn detectors(&self) -> &[Spd; 2] {
        &self.detectors
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn measure(&self, states: &mut StateManager, photons: [StateKey; 2], draw: f64) -> Result<(bool, bool), SimError> {
        let outcome = states.measure_at(&photons, &self.povm, draw, true)?;
        Ok(clicks(&outcome.label))
    }
}
