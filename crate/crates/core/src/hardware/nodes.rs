//! Timeline entities wrapping the device models.

use std::collections::BTreeMap;

use super::devices::{AfcMemory, BsmStation, ClassicalChannel, FiberChannel, Herald, Qsd, SpdcSource};
use crate::des::{Context, Entity, Result, Time};
use crate::fock::DensityMatrix;
use crate::state_manager::StateKey;

/// A photonic mode travelling between entities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Photon {
    pub key: StateKey,
    pub bin: usize,
    /// Which of the two arms the photon belongs to (0 or 1).
    pub port: usize,
    /// For an idler, the signal mode it was emitted with.
    pub partner: Option<StateKey>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    /// Source: emit the pulse for `bin`.
    Emit { bin: usize },
    Photon(Photon),
    /// Fiber: the photon reaches the far end.
    Deliver(Photon),
    /// Memory: release `bin`.
    Reemit { bin: usize },
    /// Classical BSM result for `bin`.
    HeraldNotice { bin: usize, herald: Herald },
}

pub struct SourceNode {
    name: String,
    source: SpdcSource,
    port: usize,
    bins: usize,
    receivers: Vec<String>,
    emitted: Vec<Time>,
}

impl SourceNode {
    pub fn new(name: &str, source: SpdcSource, port: usize, bins: usize, signal_to: &str, idler_to: &str) -> Self {
        Self {
            name: name.to_string(),
            source,
            port,
            bins,
            receivers: vec![signal_to.to_string(), idler_to.to_string()],
            emitted: Vec::with_capacity(bins),
        }
    }

    /// Emission time of every bin so far.
    pub fn emitted(&self) -> &[Time] {
        &self.emitted
    }
}

impl Entity<Message> for SourceNode {
    fn name(&self) -> &str {
        &self.name
    }

    fn receivers(&self) -> &[String] {
        &self.receivers
    }

    fn receive(&mut self, message: Message, ctx: &mut Context<'_, Message>) -> Result<()> {
        let Message::Emit { bin } = message else {
            return Ok(());
        };
        let (signal, idler) = self.source.emit(ctx.states())?;
        self.emitted.push(ctx.now());
        let port = self.port;
        ctx.send(
            &self.receivers[0],
            0,
            Message::Photon(Photon {
                key: signal,
                bin,
                port,
                partner: None,
            }),
        )?;
        ctx.send(
            &self.receivers[1],
            0,
            Message::Photon(Photon {
                key: idler,
                bin,
                port,
                partner: Some(signal),
            }),
        )?;
        if bin + 1 < self.bins {
            ctx.schedule_self(self.source.period(), Message::Emit { bin: bin + 1 })?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeraldLog {
    pub bin: usize,
    pub herald: Herald,
    pub received_at: Time,
}

pub struct MemoryNode {
    name: String,
    memory: AfcMemory,
    port: usize,
    receivers: Vec<String>,
    heralds: Vec<HeraldLog>,
    dropped: Vec<String>,
    peak_occupancy: usize,
}

impl MemoryNode {
    pub fn new(name: &str, memory: AfcMemory, port: usize, output: &str) -> Self {
        Self {
            name: name.to_string(),
            memory,
            port,
            receivers: vec![output.to_string()],
            heralds: Vec::new(),
            dropped: Vec::new(),
            peak_occupancy: 0,
        }
    }

    pub fn memory(&self) -> &AfcMemory {
        &self.memory
    }

    pub fn heralds(&self) -> &[HeraldLog] {
        &self.heralds
    }

    /// Diagnostics for photons that could not be stored.
    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn peak_occupancy(&self) -> usize {
        self.peak_occupancy
    }
}

impl Entity<Message> for MemoryNode {
    fn name(&self) -> &str {
        &self.name
    }

    fn receivers(&self) -> &[String] {
        &self.receivers
    }

    fn receive(&mut self, message: Message, ctx: &mut Context<'_, Message>) -> Result<()> {
        match message {
            Message::Photon(photon) => {
                let now = ctx.now();
                match self.memory.absorb(ctx.states(), photon.key, photon.bin, now) {
                    Ok(due) => {
                        self.peak_occupancy = self.peak_occupancy.max(self.memory.stored_bins().len());
                        let me = ctx.id();
                        ctx.schedule_at(due, me, Message::Reemit { bin: photon.bin })?;
                    }
                    Err(e) => {
                        self.dropped.push(e.to_string());
                        ctx.states().discard(photon.key)?;
                    }
                }
            }
            Message::Reemit { bin } => {
                let key = self.memory.reemit(ctx.states(), bin)?;
                let port = self.port;
                ctx.send(
                    &self.receivers[0],
                    0,
                    Message::Photon(Photon {
                        key,
                        bin,
                        port,
                        partner: None,
                    }),
                )?;
            }
            Message::HeraldNotice { bin, herald } => self.heralds.push(HeraldLog {
                bin,
                herald,
                received_at: ctx.now(),
            }),
            _ => {}
        }
        Ok(())
    }
}

/// Fiber link; loss is applied when the photon reaches the far end.
pub struct FiberNode {
    name: String,
    fiber: FiberChannel,
    receivers: Vec<String>,
}

impl FiberNode {
    pub fn new(name: &str, fiber: FiberChannel, destination: &str) -> Self {
        Self {
            name: name.to_string(),
            fiber,
            receivers: vec![destination.to_string()],
        }
    }

    pub fn fiber(&self) -> &FiberChannel {
        &self.fiber
    }
}

impl Entity<Message> for FiberNode {
    fn name(&self) -> &str {
        &self.name
    }

    fn receivers(&self) -> &[String] {
        &self.receivers
    }

    fn receive(&mut self, message: Message, ctx: &mut Context<'_, Message>) -> Result<()> {
        match message {
            Message::Photon(photon) => ctx.schedule_self(self.fiber.delay(), Message::Deliver(photon)),
            Message::Deliver(photon) => {
                self.fiber.transmit(ctx.states(), photon.key)?;
                ctx.send(&self.receivers[0], 0, Message::Photon(photon))
            }
            _ => Ok(()),
        }
    }
}

/// Result of one BSM attempt.
#[derive(Clone, Debug)]
pub struct BsmRecord {
    pub bin: usize,
    pub herald: Herald,
    pub measured_at: Time,
    /// Arrival time of the classical result at the memories.
    pub herald_time: Time,
    /// Signal modes stored in the two memories for this bin.
    pub memory_keys: [StateKey; 2],
    /// Joint state of `memory_keys` right after a successful herald.
    pub snapshot: Option<DensityMatrix>,
}

fn pair_up(pending: &mut BTreeMap<usize, [Option<Photon>; 2]>, photon: Photon) -> Option<[Photon; 2]> {
    let slot = pending.entry(photon.bin).or_default();
    slot[photon.port.min(1)] = Some(photon);
    if let [Some(a), Some(b)] = *slot {
        pending.remove(&photon.bin);
        Some([a, b])
    } else {
        None
    }
}

pub struct BsmNode {
    name: String,
    station: BsmStation,
    classical: ClassicalChannel,
    receivers: Vec<String>,
    pending: BTreeMap<usize, [Option<Photon>; 2]>,
    records: Vec<BsmRecord>,
}

impl BsmNode {
    /// `notify` lists the memories that receive the classical result.
    pub fn new(name: &str, station: BsmStation, classical: ClassicalChannel, notify: [&str; 2]) -> Self {
        Self {
            name: name.to_string(),
            station,
            classical,
            receivers: notify.iter().map(|s| s.to_string()).collect(),
            pending: BTreeMap::new(),
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[BsmRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<BsmRecord> {
        self.records
    }
}

impl Entity<Message> for BsmNode {
    fn name(&self) -> &str {
        &self.name
    }

    fn receivers(&self) -> &[String] {
        &self.receivers
    }

    fn receive(&mut self, message: Message, ctx: &mut Context<'_, Message>) -> Result<()> {
        let Message::Photon(photon) = message else {
            return Ok(());
        };
        let Some([a, b]) = pair_up(&mut self.pending, photon) else {
            return Ok(());
        };
        let draw = ctx.rng("bsm").uniform();
        let herald = self.station.measure(ctx.states(), [a.key, b.key], draw)?;
        let memory_keys = [a.partner.unwrap_or(a.key), b.partner.unwrap_or(b.key)];
        let snapshot = if herald.is_success() && a.partner.is_some() && b.partner.is_some() {
            Some(ctx.states().get_state(&memory_keys)?)
        } else {
            None
        };
        let delay = self.classical.delay();
        for target in &self.receivers {
            ctx.send(target, delay, Message::HeraldNotice { bin: a.bin, herald })?;
        }
        self.records.push(BsmRecord {
            bin: a.bin,
            herald,
            measured_at: ctx.now(),
            herald_time: ctx.now() + delay,
            memory_keys,
            snapshot,
        });
        Ok(())
    }
}

/// Analyser measuring the two retrieved memory photons of each bin.
pub struct QsdNode {
    name: String,
    qsd: Qsd,
    pending: BTreeMap<usize, [Option<Photon>; 2]>,
    results: BTreeMap<usize, (bool, bool)>,
}

impl QsdNode {
    pub fn new(name: &str, qsd: Qsd) -> Self {
        Self {
            name: name.to_string(),
            qsd,
            pending: BTreeMap::new(),
            results: BTreeMap::new(),
        }
    }

    /// Click pattern per bin.
    pub fn results(&self) -> &BTreeMap<usize, (bool, bool)> {
        &self.results
    }
}

impl Entity<Message> for QsdNode {
    fn name(&self) -> &str {
        &self.name
    }

    fn receive(&mut self, message: Message, ctx: &mut Context<'_, Message>) -> Result<()> {
        let Message::Photon(photon) = message else {
            return Ok(());
        };
        let Some([a, b]) = pair_up(&mut self.pending, photon) else {
            return Ok(());
        };
        let draw = ctx.rng("qsd").uniform();
        let clicks = self.qsd.measure(ctx.states(), [a.key, b.key], draw)?;
        self.results.insert(a.bin, clicks);
        Ok(())
    }
}

/// Absorbs photons without measuring them.
pub struct SinkNode {
    name: String,
    absorbed: usize,
}

impl SinkNode {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            absorbed: 0,
        }
    }

    pub fn absorbed(&self) -> usize {
        self.absorbed
    }
}

impl Entity<Message> for SinkNode {
    fn name(&self) -> &str {
        &self.name
    }

    fn receive(&mut self, message: Message, ctx: &mut Context<'_, Message>) -> Result<()> {
        if let Message::Photon(photon) = message {
            ctx.states().discard(photon.key)?;
            self.absorbed += 1;
        }
        Ok(())
    }
}
