//! Deterministic discrete-event kernel.
//!
//! A [`Timeline`] owns a set of named entities, an event queue ordered by
//! `(time, sequence)`, a [`StateManager`] and a family of labelled random
//! streams derived from one seed. Entities exchange messages of a single
//! type `M`; while an entity handles a message it is temporarily taken out
//! of the timeline and sees the rest of the simulation through a
//! [`Context`].

use std::any::Any;
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fock::{FockError, FockSpace};
use crate::state_manager::{StateError, StateManager};

/// Simulation time in picoseconds.
pub type Time = u64;

pub const PS_PER_SECOND: f64 = 1e12;

/// Converts seconds to whole picoseconds (rounded to nearest).
pub fn seconds_to_ps(seconds: f64) -> Time {
    (seconds * PS_PER_SECOND).round() as Time
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub usize);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("event at {time} ps scheduled before current time {now} ps")]
    PastEvent { time: Time, now: Time },
    #[error("no entity named {0:?}")]
    UnknownEntity(String),
    #[error("entity name {0:?} is already taken")]
    DuplicateName(String),
    #[error("event targets missing entity #{0}")]
    MissingTarget(usize),
    #[error("{entity}: {message}")]
    Device { entity: String, message: String },
    #[error(transparent)]
    State(#[from] StateError),
}

impl From<FockError> for SimError {
    fn from(e: FockError) -> Self {
        SimError::State(StateError::Fock(e))
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

/// Uniform `[0, 1)` stream seeded from `(seed, label)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(splitmix64(seed ^ fnv1a(label))),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A participant of the simulation.
pub trait Entity<M>: Any {
    fn name(&self) -> &str;

    /// Names of the entities this one forwards to, in port order.
    fn receivers(&self) -> &[String] {
        &[]
    }

    fn receive(&mut self, message: M, ctx: &mut Context<'_, M>) -> Result<()>;
}

struct Event<M> {
    time: Time,
    sequence: u64,
    target: EntityId,
    message: M,
}

impl<M> PartialEq for Event<M> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.sequence) == (other.time, other.sequence)
    }
}

impl<M> Eq for Event<M> {}

impl<M> PartialOrd for Event<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<M> Ord for Event<M> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.sequence).cmp(&(other.time, other.sequence))
    }
}

/// Everything of a timeline except its entities.
pub struct Kernel<M> {
    now: Time,
    sequence: u64,
    queue: BinaryHeap<Reverse<Event<M>>>,
    seed: u64,
    streams: BTreeMap<String, RngStream>,
    states: StateManager,
    names: BTreeMap<String, EntityId>,
}

impl<M> Kernel<M> {
    pub fn now(&self) -> Time {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn states(&self) -> &StateManager {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut StateManager {
        &mut self.states
    }

    /// The stream for `label`, created on first use.
    pub fn rng(&mut self, label: &str) -> &mut RngStream {
        let seed = self.seed;
        self.streams
            .entry(label.to_string())
            .or_insert_with(|| RngStream::new(seed, label))
    }

    pub fn lookup(&self, name: &str) -> Result<EntityId> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| SimError::UnknownEntity(name.to_string()))
    }

    pub fn schedule_at(&mut self, time: Time, target: EntityId, message: M) -> Result<()> {
        if time < self.now {
            return Err(SimError::PastEvent { time, now: self.now });
        }
        let sequence = self.sequence;
        self.sequence += 1;
        self.queue.push(Reverse(Event {
            time,
            sequence,
            target,
            message,
        }));
        Ok(())
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}

/// View of the kernel handed to an entity while it handles a message.
pub struct Context<'a, M> {
    kernel: &'a mut Kernel<M>,
    this: EntityId,
}

impl<M> Context<'_, M> {
    pub fn now(&self) -> Time {
        self.kernel.now
    }

    pub fn id(&self) -> EntityId {
        self.this
    }

    pub fn states(&mut self) -> &mut StateManager {
        &mut self.kernel.states
    }

    pub fn rng(&mut self, label: &str) -> &mut RngStream {
        self.kernel.rng(label)
    }

    pub fn lookup(&self, name: &str) -> Result<EntityId> {
        self.kernel.lookup(name)
    }

    /// Delivers `message` to `target` after `delay` picoseconds.
    pub fn schedule(&mut self, delay: Time, target: EntityId, message: M) -> Result<()> {
        let time = self.kernel.now + delay;
        self.kernel.schedule_at(time, target, message)
    }

    pub fn schedule_at(&mut self, time: Time, target: EntityId, message: M) -> Result<()> {
        self.kernel.schedule_at(time, target, message)
    }

    /// Delivers `message` to the entity called `name` after `delay`.
    pub fn send(&mut self, name: &str, delay: Time, message: M) -> Result<()> {
        let target = self.kernel.lookup(name)?;
        self.schedule(delay, target, message)
    }

    /// Schedules a message to the handling entity itself.
    pub fn schedule_self(&mut self, delay: Time, message: M) -> Result<()> {
        self.schedule(delay, self.this, message)
    }
}

pub struct Timeline<M> {
    kernel: Kernel<M>,
    entities: Vec<Option<Box<dyn Entity<M>>>>,
}

impl<M: 'static> Timeline<M> {
    pub fn new(seed: u64, space: FockSpace) -> Self {
        Self {
            kernel: Kernel {
                now: 0,
                sequence: 0,
                queue: BinaryHeap::new(),
                seed,
                streams: BTreeMap::new(),
                states: StateManager::new(space),
                names: BTreeMap::new(),
            },
            entities: Vec::new(),
        }
    }

    pub fn add<E: Entity<M>>(&mut self, entity: E) -> Result<EntityId> {
        let name = entity.name().to_string();
        if self.kernel.names.contains_key(&name) {
            return Err(SimError::DuplicateName(name));
        }
        let id = EntityId(self.entities.len());
        self.kernel.names.insert(name, id);
        self.entities.push(Some(Box::new(entity)));
        Ok(id)
    }

    pub fn now(&self) -> Time {
        self.kernel.now
    }

    pub fn kernel(&self) -> &Kernel<M> {
        &self.kernel
    }

    pub fn kernel_mut(&mut self) -> &mut Kernel<M> {
        &mut self.kernel
    }

    pub fn states(&self) -> &StateManager {
        &self.kernel.states
    }

    pub fn lookup(&self, name: &str) -> Result<EntityId> {
        self.kernel.lookup(name)
    }

    pub fn schedule_at(&mut self, time: Time, target: EntityId, message: M) -> Result<()> {
        self.kernel.schedule_at(time, target, message)
    }

    pub fn entity<E: Entity<M>>(&self, id: EntityId) -> Option<&E> {
        let boxed = self.entities.get(id.0)?.as_ref()?;
        (boxed.as_ref() as &dyn Any).downcast_ref::<E>()
    }

    pub fn entity_by_name<E: Entity<M>>(&self, name: &str) -> Option<&E> {
        self.entity(self.lookup(name).ok()?)
    }

    fn step(&mut self, event: Event<M>) -> Result<()> {
        self.kernel.now = event.time;
        let slot = self
            .entities
            .get_mut(event.target.0)
            .ok_or(SimError::MissingTarget(event.target.0))?;
        let mut entity = slot.take().ok_or(SimError::MissingTarget(event.target.0))?;
        let mut ctx = Context {
            kernel: &mut self.kernel,
            this: event.target,
        };
        let outcome = entity.receive(event.message, &mut ctx);
        self.entities[event.target.0] = Some(entity);
        outcome
    }

    /// Executes every event with `time ≤ t_end`, then advances the clock to
    /// `t_end`. Returns the number of events executed.
    pub fn run_until(&mut self, t_end: Time) -> Result<usize> {
        let mut executed = 0;
        while let Some(Reverse(head)) = self.kernel.queue.peek() {
            if head.time > t_end {
                break;
            }
            let Reverse(event) = self.kernel.queue.pop().expect("peeked");
            self.step(event)?;
            executed += 1;
        }
        self.kernel.now = self.kernel.now.max(t_end);
        Ok(executed)
    }

    /// Executes events until the queue is empty.
    pub fn run(&mut self) -> Result<usize> {
        let mut executed = 0;
        while let Some(Reverse(event)) = self.kernel.queue.pop() {
            self.step(event)?;
            executed += 1;
        }
        Ok(executed)
    }
}
