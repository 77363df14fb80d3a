//! One entanglement-generation cycle over the two-memory, one-BSM layout.
//!
//! Each memory node holds a source and an AFC memory; the idlers travel
//! through equal fibers to the measurement node, which interferes them and
//! announces the result back over a classical channel. Retrieved memory
//! photons travel the same distance to the measurement node, where they are
//! either analysed or discarded.

use thiserror::Error;

use crate::des::{seconds_to_ps, SimError, Time, Timeline};
use crate::fock::{DensityMatrix, FockSpace};
use crate::hardware::{
    AfcMemory, BsmNode, BsmStation, ClassicalChannel, FiberChannel, FiberNode, Herald, MemoryNode,
    Message, Qsd, QsdMode, QsdNode, ReemissionOrder, SinkNode, SourceNode, Spd, SpdcSource,
};
use crate::state_manager::StateKey;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("bin {bin} of trial {trial} was not heralded")]
    NotHeralded { trial: u64, bin: usize },
    #[error("invalid topology: {0}")]
    Topology(String),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub struct NodeNames {
    pub memory_node_1: String,
    pub memory_node_2: String,
    pub measure_node: String,
}

impl Default for NodeNames {
    fn default() -> Self {
        Self {
            memory_node_1: "ANL".into(),
            memory_node_2: "HC".into(),
            measure_node: "ERC".into(),
        }
    }
}

/// What happens to retrieved memory photons at the measurement node.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Analyser {
    #[default]
    Discard,
    Qsd(QsdMode),
}

/// Layout and device parameters of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub names: NodeNames,
    pub space: FockSpace,
    pub mu: [f64; 2],
    pub frequency: f64,
    pub mode_number: usize,
    pub eta_abs: f64,
    pub eta_ret: f64,
    /// Defaults to `M/f` when `None`.
    pub storage_time: Option<Time>,
    pub reemission_order: ReemissionOrder,
    /// Shared by both idler links and both retrieval links.
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub refractive_index: f64,
    pub detector_efficiency: f64,
    pub dark_count_hz: f64,
    /// Defaults to `1/f` when `None`.
    pub window: Option<Time>,
    pub delta_phi: f64,
    pub analyser: Analyser,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            names: NodeNames::default(),
            space: FockSpace::default(),
            mu: [0.1, 0.1],
            frequency: 5e7,
            mode_number: 100,
            eta_abs: 0.35,
            eta_ret: 1.0,
            storage_time: None,
            reemission_order: ReemissionOrder::Same,
            length_km: 20.0,
            attenuation_db_per_km: 0.2,
            refractive_index: 1.47,
            detector_efficiency: 0.6,
            dark_count_hz: 150.0,
            window: None,
            delta_phi: 0.0,
            analyser: Analyser::Discard,
        }
    }
}

/// Durations making up one cycle, `T = M/f + τ_ph + τ_c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleTiming {
    pub mode_number: usize,
    pub frequency: f64,
    /// Idler travel time to the measurement node.
    pub tau_ph: Time,
    /// Classical delay back to the memories.
    pub tau_c: Time,
}

impl CycleTiming {
    pub fn train_duration(&self) -> Time {
        seconds_to_ps(self.mode_number as f64 / self.frequency)
    }

    pub fn total(&self) -> Time {
        self.train_duration() + self.tau_ph + self.tau_c
    }

    pub fn tau_ph_seconds(&self) -> f64 {
        self.tau_ph as f64 * 1e-12
    }

    pub fn tau_c_seconds(&self) -> f64 {
        self.tau_c as f64 * 1e-12
    }
}

impl Topology {
    pub fn period(&self) -> Time {
        seconds_to_ps(1.0 / self.frequency)
    }

    pub fn storage_time(&self) -> Time {
        self.storage_time
            .unwrap_or_else(|| seconds_to_ps(self.mode_number as f64 / self.frequency))
    }

    pub fn window(&self) -> Time {
        self.window.unwrap_or_else(|| self.period())
    }

    pub fn fiber(&self) -> Result<FiberChannel> {
        Ok(FiberChannel::new(
            self.length_km,
            self.attenuation_db_per_km,
            self.refractive_index,
            self.space,
        )?)
    }

    pub fn detector(&self) -> Result<Spd> {
        Ok(Spd::new(self.detector_efficiency, self.dark_count_hz, self.window())?)
    }

    pub fn timing(&self) -> Result<CycleTiming> {
        let delay = self.fiber()?.delay();
        Ok(CycleTiming {
            mode_number: self.mode_number,
            frequency: self.frequency,
            tau_ph: delay,
            tau_c: delay,
        })
    }

    /// Transmission from a memory output to an analyser click,
    /// `η_ret · 10^(−αℓ/10) · η_d`.
    pub fn analyser_transmission(&self) -> Result<f64> {
        Ok(self.eta_ret * self.fiber()?.transmittance() * self.detector_efficiency)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode_number == 0 {
            return Err(ProtocolError::Topology("mode number must be at least 1".into()));
        }
        if self.mu.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(ProtocolError::Topology("mean photon numbers must be non-negative".into()));
        }
        let names = [&self.names.memory_node_1, &self.names.memory_node_2, &self.names.measure_node];
        if names.iter().any(|n| n.is_empty()) || names[0] == names[1] || names[0] == names[2] || names[1] == names[2] {
            return Err(ProtocolError::Topology("node names must be distinct and non-empty".into()));
        }
        if self.timing()?.tau_c == 0 {
            return Err(ProtocolError::Topology(
                "fiber length must be positive so the classical delay is non-zero".into(),
            ));
        }
        Ok(())
    }

    fn build(&self, seed: u64) -> Result<Timeline<Message>> {
        self.validate()?;
        let space = self.space;
        let fiber = self.fiber()?;
        let spd = self.detector()?;
        let period = self.period();
        let mut tl = Timeline::new(seed, space);
        let m = &self.names.measure_node;
        let bsm_name = format!("{m}.bsm");
        let out_name = format!("{m}.qsd");
        let memory_names: Vec<String> = [&self.names.memory_node_1, &self.names.memory_node_2]
            .iter()
            .map(|n| format!("{n}.memory"))
            .collect();

        for (port, node) in [&self.names.memory_node_1, &self.names.memory_node_2].into_iter().enumerate() {
            let source = SpdcSource::new(self.mu[port], self.frequency, space)?;
            let idler_fiber = format!("{node}.idler_fiber");
            let retrieval_fiber = format!("{node}.retrieval_fiber");
            let source_id = tl.add(SourceNode::new(
                &format!("{node}.source"),
                source,
                port,
                self.mode_number,
                &memory_names[port],
                &idler_fiber,
            ))?;
            let memory = AfcMemory::new(
                self.mode_number,
                self.eta_abs,
                self.eta_ret,
                self.storage_time(),
                period,
                self.reemission_order,
                space,
            )?;
            tl.add(MemoryNode::new(&memory_names[port], memory, port, &retrieval_fiber))?;
            tl.add(FiberNode::new(&idler_fiber, fiber.clone(), &bsm_name))?;
            tl.add(FiberNode::new(&retrieval_fiber, fiber.clone(), &out_name))?;
            tl.schedule_at(0, source_id, Message::Emit { bin: 0 })?;
        }

        let station = BsmStation::new([spd, spd], self.delta_phi, space)?;
        let classical = ClassicalChannel::new(fiber.delay())?;
        tl.add(BsmNode::new(
            &bsm_name,
            station,
            classical,
            [&memory_names[0], &memory_names[1]],
        ))?;
        match self.analyser {
            Analyser::Discard => {
                tl.add(SinkNode::new(&out_name))?;
            }
            Analyser::Qsd(mode) => {
                tl.add(QsdNode::new(&out_name, Qsd::new(mode, [spd, spd], space)?))?;
            }
        }
        Ok(tl)
    }
}

/// Outcome of one temporal bin of one cycle.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub temporal_bin: usize,
    pub herald: Herald,
    pub memory_state_keys: [StateKey; 2],
    pub emission_time: Time,
    pub herald_time: Time,
    /// Joint memory state frozen at the BSM, for heralded bins only.
    pub memory_state: Option<DensityMatrix>,
    /// Analyser click pattern, when an analyser is installed.
    pub analyser_clicks: Option<(bool, bool)>,
}

/// Runs one full cycle with seed `base_seed + trial_index` and returns one
/// record per temporal bin, in bin order.
pub fn run_cycle(topology: &Topology, base_seed: u64, trial_index: u64) -> Result<Vec<TrialRecord>> {
    let mut tl = topology.build(base_seed.wrapping_add(trial_index))?;
    tl.run()?;

    let m = &topology.names.measure_node;
    let bsm: &BsmNode = tl
        .entity_by_name(&format!("{m}.bsm"))
        .ok_or_else(|| ProtocolError::Topology("measurement node missing".into()))?;
    let source: &SourceNode = tl
        .entity_by_name(&format!("{}.source", topology.names.memory_node_1))
        .ok_or_else(|| ProtocolError::Topology("source missing".into()))?;
    let clicks = match topology.analyser {
        Analyser::Discard => None,
        Analyser::Qsd(_) => tl
            .entity_by_name::<QsdNode>(&format!("{m}.qsd"))
            .map(|q| q.results().clone()),
    };
    for name in [&topology.names.memory_node_1, &topology.names.memory_node_2] {
        if let Some(node) = tl.entity_by_name::<MemoryNode>(&format!("{name}.memory")) {
            if let Some(reason) = node.dropped().first() {
                return Err(ProtocolError::Topology(format!("{name}: {reason}")));
            }
        }
    }

    let mut records: Vec<TrialRecord> = bsm
        .records()
        .iter()
        .map(|r| TrialRecord {
            trial_index,
            temporal_bin: r.bin,
            herald: r.herald,
            memory_state_keys: r.memory_keys,
            emission_time: source.emitted()[r.bin],
            herald_time: r.herald_time,
            memory_state: r.snapshot.clone(),
            analyser_clicks: clicks.as_ref().and_then(|c| c.get(&r.bin).copied()),
        })
        .collect();
    records.sort_by_key(|r| r.temporal_bin);
    Ok(records)
}

/// Joint memory state of a heralded record.
pub fn heralded_memory_state(record: &TrialRecord) -> Result<&DensityMatrix> {
    match (&record.memory_state, record.herald.is_success()) {
        (Some(state), true) => Ok(state),
        _ => Err(ProtocolError::NotHeralded {
            trial: record.trial_index,
            bin: record.temporal_bin,
        }),
    }
}

/// Binomial estimate of the per-bin heralding probability and its standard error.
pub fn binomial_estimate(successes: u64, attempts: u64) -> (f64, f64) {
    if attempts == 0 {
        return (0.0, 0.0);
    }
    let n = attempts as f64;
    let p = successes as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

pub fn estimate_herald_probability(records: &[TrialRecord]) -> (f64, f64) {
    let heralded = records.iter().filter(|r| r.herald.is_success()).count() as u64;
    binomial_estimate(heralded, records.len() as u64)
}
