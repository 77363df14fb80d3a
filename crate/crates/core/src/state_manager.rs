//! Keyed store of composite quantum states.
//!
//! Every optical or memory mode is addressed by a [`StateKey`]. Keys that
//! are correlated share one [`StateEntry`] whose density matrix lists its
//! modes in the order of `keys`. Cost grows as `(N+1)^(2·modes)` per entry;
//! the protocol never builds entries with more than four modes.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::fock::{
    self, apply_channel, apply_unitary, measure, measure_and_discard, partial_trace, tensor,
    DensityMatrix, FockError, FockSpace, Ket, KrausChannel, Matrix, Povm,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateKey(pub u64);

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("unknown state key {0}")]
    UnknownKey(StateKey),
    #[error("key {0} is entangled with modes outside the requested set")]
    KeyCollision(StateKey),
    #[error("key {0} listed more than once")]
    DuplicateKey(StateKey),
    #[error("{keys} keys supplied for a {modes}-mode state")]
    ModeCount { keys: usize, modes: usize },
    #[error(transparent)]
    Fock(#[from] FockError),
}

pub type Result<T, E = StateError> = std::result::Result<T, E>;

#[derive(Clone, Debug)]
pub struct StateEntry {
    keys: Vec<StateKey>,
    state: DensityMatrix,
}

impl StateEntry {
    pub fn keys(&self) -> &[StateKey] {
        &self.keys
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    fn position(&self, key: StateKey) -> usize {
        self.keys.iter().position(|k| *k == key).expect("index and entry disagree")
    }
}

/// Outcome of [`StateManager::measure_at`].
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureOutcome {
    pub label: String,
    pub index: usize,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct StateManager {
    space: FockSpace,
    next_key: u64,
    next_entry: u64,
    entries: BTreeMap<u64, StateEntry>,
    index: BTreeMap<StateKey, u64>,
}

impl StateManager {
    pub fn new(space: FockSpace) -> Self {
        Self {
            space,
            next_key: 0,
            next_entry: 0,
            entries: BTreeMap::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// Number of live keys.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn contains(&self, key: StateKey) -> bool {
        self.index.contains_key(&key)
    }

    fn insert(&mut self, keys: Vec<StateKey>, state: DensityMatrix) {
        let id = self.next_entry;
        self.next_entry += 1;
        for k in &keys {
            self.index.insert(*k, id);
        }
        self.entries.insert(id, StateEntry { keys, state });
    }

    fn entry_id(&self, key: StateKey) -> Result<u64> {
        self.index.get(&key).copied().ok_or(StateError::UnknownKey(key))
    }

    fn check_distinct(keys: &[StateKey]) -> Result<()> {
        for (i, k) in keys.iter().enumerate() {
            if keys[..i].contains(k) {
                return Err(StateError::DuplicateKey(*k));
            }
        }
        Ok(())
    }

    /// A fresh key in the single-mode vacuum.
    pub fn allocate_vacuum(&mut self) -> StateKey {
        let key = StateKey(self.next_key);
        self.next_key += 1;
        let vacuum = DensityMatrix::vacuum(self.space, 1).expect("vacuum is always valid");
        self.insert(vec![key], vacuum);
        key
    }

    /// Allocates one key per mode of `ket` and stores `|ψ⟩⟨ψ|` over them.
    pub fn allocate_ket(&mut self, ket: &Ket) -> Result<Vec<StateKey>> {
        let keys: Vec<StateKey> = (0..ket.n_modes()).map(|_| self.allocate_vacuum()).collect();
        self.set_entangled(&keys, ket)?;
        Ok(keys)
    }

    /// Replaces the state of `keys` by `|ψ⟩⟨ψ|`.
    pub fn set_entangled(&mut self, keys: &[StateKey], ket: &Ket) -> Result<()> {
        self.set_state(keys, DensityMatrix::from_ket(ket))
    }

    /// Replaces the state of `keys`. Every entry currently holding one of
    /// the keys must be covered entirely by `keys`.
    pub fn set_state(&mut self, keys: &[StateKey], state: DensityMatrix) -> Result<()> {
        Self::check_distinct(keys)?;
        state.space().check_same(self.space)?;
        if state.n_modes() != keys.len() {
            return Err(StateError::ModeCount {
                keys: keys.len(),
                modes: state.n_modes(),
            });
        }
        let mut ids = Vec::new();
        for &k in keys {
            let id = self.entry_id(k)?;
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        for id in &ids {
            if let Some(k) = self.entries[id].keys.iter().find(|k| !keys.contains(k)) {
                return Err(StateError::KeyCollision(*k));
            }
        }
        for id in ids {
            self.entries.remove(&id);
        }
        self.insert(keys.to_vec(), state);
        Ok(())
    }

    /// The entry holding `key`.
    pub fn entry(&self, key: StateKey) -> Result<&StateEntry> {
        Ok(&self.entries[&self.entry_id(key)?])
    }

    /// Tensors together the entries holding `keys`, in order of first
    /// appearance, and returns the merged entry.
    pub fn merge(&mut self, keys: &[StateKey]) -> Result<&StateEntry> {
        let first = *keys.first().ok_or(FockError::NoModes)?;
        let mut ids = Vec::new();
        for &k in keys {
            let id = self.entry_id(k)?;
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        if ids.len() > 1 {
            let mut parts = ids.into_iter().map(|id| self.entries.remove(&id).expect("indexed entry"));
            let StateEntry { mut keys, mut state } = parts.next().expect("at least one entry");
            for part in parts {
                state = tensor(&state, &part.state)?;
                keys.extend(part.keys);
            }
            self.insert(keys, state);
        }
        self.entry(first)
    }

    fn with_entry<T>(
        &mut self,
        keys: &[StateKey],
        f: impl FnOnce(&DensityMatrix, &[usize]) -> fock::Result<(DensityMatrix, T)>,
    ) -> Result<T> {
        Self::check_distinct(keys)?;
        self.merge(keys)?;
        let id = self.entry_id(keys[0])?;
        let entry = self.entries.get_mut(&id).expect("indexed entry");
        let modes: Vec<usize> = keys.iter().map(|k| entry.position(*k)).collect();
        let (state, out) = f(&entry.state, &modes)?;
        entry.state = state;
        Ok(out)
    }

    pub fn apply_channel_at(&mut self, key: StateKey, channel: &KrausChannel) -> Result<()> {
        if channel.loss() == Some(0.0) {
            self.entry_id(key)?;
            return Ok(());
        }
        self.with_entry(&[key], |state, modes| Ok((apply_channel(state, channel, modes[0])?, ())))
    }

    /// Applies `unitary` to `keys` (listed order), merging entries if needed.
    pub fn apply_unitary_at(&mut self, keys: &[StateKey], unitary: &Matrix) -> Result<()> {
        self.with_entry(keys, |state, modes| Ok((apply_unitary(state, unitary, modes)?, ())))
    }

    /// Measures `keys` with `povm`. With `detach`, the measured modes are
    /// traced out and their keys retired; otherwise the post-measurement
    /// state `MρM†/p` is kept on all modes.
    pub fn measure_at(&mut self, keys: &[StateKey], povm: &Povm, draw: f64, detach: bool) -> Result<MeasureOutcome> {
        if !detach {
            return self.with_entry(keys, |state, modes| {
                let m = measure(state, povm, modes, draw)?;
                let outcome = MeasureOutcome {
                    label: m.outcome,
                    index: m.index,
                    probability: m.probability,
                };
                Ok((m.state, outcome))
            });
        }
        Self::check_distinct(keys)?;
        self.merge(keys)?;
        let id = self.entry_id(keys[0])?;
        let entry = self.entries.remove(&id).expect("indexed entry");
        let modes: Vec<usize> = keys.iter().map(|k| entry.position(*k)).collect();
        let detached = match measure_and_discard(&entry.state, povm, &modes, draw) {
            Ok(d) => d,
            Err(e) => {
                self.entries.insert(id, entry);
                return Err(e.into());
            }
        };
        for k in keys {
            self.index.remove(k);
        }
        if let Some(remainder) = detached.remainder {
            let rest: Vec<StateKey> = entry.keys.iter().filter(|k| !keys.contains(k)).copied().collect();
            self.insert(rest, remainder);
        }
        Ok(MeasureOutcome {
            label: detached.outcome,
            index: detached.index,
            probability: detached.probability,
        })
    }

    /// Reduced state of `keys` in the requested order. Keys from different
    /// entries are combined as a product state.
    pub fn get_state(&self, keys: &[StateKey]) -> Result<DensityMatrix> {
        Self::check_distinct(keys)?;
        let mut groups: Vec<(u64, Vec<StateKey>)> = Vec::new();
        for &k in keys {
            let id = self.entry_id(k)?;
            match groups.iter_mut().find(|(g, _)| *g == id) {
                Some((_, members)) => members.push(k),
                None => groups.push((id, vec![k])),
            }
        }
        let mut combined: Option<DensityMatrix> = None;
        let mut order = Vec::with_capacity(keys.len());
        for (id, members) in &groups {
            let entry = &self.entries[id];
            let modes: Vec<usize> = members.iter().map(|k| entry.position(*k)).collect();
            let reduced = if modes.len() == entry.keys.len() && modes.iter().enumerate().all(|(i, m)| i == *m) {
                entry.state.clone()
            } else {
                partial_trace(&entry.state, &modes)?
            };
            combined = Some(match combined {
                None => reduced,
                Some(acc) => tensor(&acc, &reduced)?,
            });
            order.extend(members.iter().copied());
        }
        let combined = combined.ok_or(FockError::NoModes)?;
        if order == keys {
            return Ok(combined);
        }
        let perm: Vec<usize> = keys.iter().map(|k| order.iter().position(|o| o == k).expect("collected")).collect();
        Ok(partial_trace(&combined, &perm)?)
    }

    /// Traces `key` out of its entry and retires it.
    pub fn discard(&mut self, key: StateKey) -> Result<()> {
        let id = self.entry_id(key)?;
        let entry = self.entries.remove(&id).expect("indexed entry");
        self.index.remove(&key);
        let rest: Vec<StateKey> = entry.keys.iter().filter(|k| **k != key).copied().collect();
        if !rest.is_empty() {
            let modes: Vec<usize> = rest.iter().map(|k| entry.position(*k)).collect();
            let reduced = partial_trace(&entry.state, &modes)?;
            self.insert(rest, reduced);
        }
        Ok(())
    }

    /// Checks that keys partition the entries and that every entry is a
    /// valid density matrix of matching dimension.
    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = 0;
        for (id, entry) in &self.entries {
            if entry.state.n_modes() != entry.keys.len() {
                return Err(StateError::ModeCount {
                    keys: entry.keys.len(),
                    modes: entry.state.n_modes(),
                });
            }
            for k in &entry.keys {
                if self.index.get(k) != Some(id) {
                    return Err(StateError::UnknownKey(*k));
                }
            }
            seen += entry.keys.len();
            entry.state.validate()?;
        }
        if seen != self.index.len() {
            return Err(StateError::ModeCount {
                keys: self.index.len(),
                modes: seen,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{detector_povm, gad_channel, outcome_probabilities, tmsv_amplitudes, tmsv_ket, NO_CLICK};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space() -> FockSpace {
        FockSpace::new(2).unwrap()
    }

    #[test]
    fn allocation_gives_distinct_vacuum_keys() {
        let mut sm = StateManager::new(space());
        let a = sm.allocate_vacuum();
        let b = sm.allocate_vacuum();
        assert_eq!(a, StateKey(0));
        assert_ne!(a, b);
        assert_eq!(sm.entry_count(), 2);
        let st = sm.get_state(&[a]).unwrap();
        assert_eq!(st.population(&[0]).unwrap(), 1.0);
        assert_eq!(st.trace(), 1.0);
        sm.check_invariants().unwrap();
    }

    #[test]
    fn set_entangled_and_replace() {
        let mut sm = StateManager::new(space());
        let keys = sm.allocate_ket(&tmsv_ket(0.1, space()).unwrap()).unwrap();
        assert_eq!(sm.entry(keys[0]).unwrap().keys(), &keys[..]);
        sm.set_entangled(&keys, &tmsv_ket(0.2, space()).unwrap()).unwrap();
        assert_eq!(sm.entry_count(), 1);
        let bad = Ket::basis(space(), &[1]).unwrap();
        assert!(matches!(sm.set_entangled(&keys, &bad), Err(StateError::ModeCount { .. })));
        let other = sm.allocate_vacuum();
        let pair = Ket::basis(space(), &[1, 0]).unwrap();
        assert!(matches!(sm.set_entangled(&[keys[0], other], &pair), Err(StateError::KeyCollision(_))));
        assert!(matches!(sm.get_state(&[StateKey(99)]), Err(StateError::UnknownKey(_))));
    }

    #[test]
    fn reduced_tmsv_mode_is_thermal_like() {
        let mut sm = StateManager::new(space());
        let keys = sm.allocate_ket(&tmsv_ket(0.1, space()).unwrap()).unwrap();
        let one = sm.get_state(&[keys[1]]).unwrap();
        let a = tmsv_amplitudes(0.1, space()).unwrap();
        for n in 0..3 {
            assert!((one.population(&[n]).unwrap() - a[n] * a[n]).abs() < 1e-12);
        }
        assert!(one.element(&[0], &[1]).unwrap().norm() < 1e-15);
    }

    #[test]
    fn merge_and_reorder() {
        let mut sm = StateManager::new(space());
        let k1 = sm.allocate_ket(&tmsv_ket(0.1, space()).unwrap()).unwrap();
        let k2 = sm.allocate_ket(&Ket::basis(space(), &[1, 0]).unwrap()).unwrap();
        let before = sm.get_state(&[k1[1], k2[0]]).unwrap();
        let merged = sm.merge(&[k1[0], k2[0]]).unwrap();
        assert_eq!(merged.keys(), &[k1[0], k1[1], k2[0], k2[1]]);
        assert_eq!(merged.state().dim(), 81);
        assert!((merged.state().trace() - 1.0).abs() < 1e-12);
        let after = sm.get_state(&[k1[1], k2[0]]).unwrap();
        assert!(after.max_abs_diff(&before) < 1e-12);
        assert_eq!(sm.entry_count(), 1);
        sm.merge(&[k1[0], k2[1]]).unwrap();
        assert_eq!(sm.entry_count(), 1);

        let reversed = sm.get_state(&[k2[1], k2[0]]).unwrap();
        assert!((reversed.population(&[0, 1]).unwrap() - 1.0).abs() < 1e-12);
        sm.check_invariants().unwrap();
    }

    #[test]
    fn lossless_channel_keeps_entry() {
        let mut sm = StateManager::new(space());
        let keys = sm.allocate_ket(&tmsv_ket(0.1, space()).unwrap()).unwrap();
        let before = sm.get_state(&keys).unwrap();
        sm.apply_channel_at(keys[1], &gad_channel(0.0, space()).unwrap()).unwrap();
        assert!(sm.get_state(&keys).unwrap().max_abs_diff(&before) < 1e-15);
    }

    #[test]
    fn measurement_after_total_loss_never_clicks() {
        let mut sm = StateManager::new(space());
        let keys = sm.allocate_ket(&tmsv_ket(0.5, space()).unwrap()).unwrap();
        sm.apply_channel_at(keys[1], &gad_channel(1.0, space()).unwrap()).unwrap();
        let out = sm.measure_at(&[keys[1]], &detector_povm(1.0, space()).unwrap(), 0.999_999, true).unwrap();
        assert_eq!(out.label, NO_CLICK);
        assert!((out.probability - 1.0).abs() < 1e-12);
        assert!(!sm.contains(keys[1]));
        assert!(sm.contains(keys[0]));

        let vac = sm.allocate_vacuum();
        let out = sm.measure_at(&[vac], &detector_povm(1.0, space()).unwrap(), 0.5, false).unwrap();
        assert_eq!((out.label.as_str(), out.probability), (NO_CLICK, 1.0));
        assert!(sm.contains(vac));
        sm.check_invariants().unwrap();
    }

    #[test]
    fn discard_traces_out_mode() {
        let mut sm = StateManager::new(space());
        let keys = sm.allocate_ket(&tmsv_ket(0.1, space()).unwrap()).unwrap();
        let expected = sm.get_state(&[keys[0]]).unwrap();
        sm.discard(keys[1]).unwrap();
        assert!(sm.get_state(&[keys[0]]).unwrap().max_abs_diff(&expected) < 1e-15);
        assert!(sm.discard(keys[1]).is_err());
        sm.check_invariants().unwrap();
    }

    #[test]
    fn outcome_frequencies_match_born_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let povm = detector_povm(0.6, space()).unwrap();
        let rho = DensityMatrix::from_ket(&tmsv_ket(0.5, space()).unwrap());
        let p_click = outcome_probabilities(&rho, &povm, &[1]).unwrap()[1];
        let trials = 100_000;
        let mut clicks = 0u32;
        for _ in 0..trials {
            let mut sm = StateManager::new(space());
            let keys = sm.allocate_ket(&tmsv_ket(0.5, space()).unwrap()).unwrap();
            let out = sm.measure_at(&[keys[1]], &povm, rng.random::<f64>(), true).unwrap();
            clicks += out.index as u32;
        }
        let freq = f64::from(clicks) / trials as f64;
        let se = (p_click * (1.0 - p_click) / trials as f64).sqrt();
        assert!((freq - p_click).abs() < 3.0 * se, "freq {freq} vs {p_click}");
    }
}
