//! Visited-state store with parent links for trace reconstruction.

use std::collections::HashMap;
use std::mem::size_of;

use super::fingerprint::{digest, Fingerprint};
use crate::netmodel::Action;

pub type StateId = u32;

struct Entry {
    bytes: Box<[u8]>,
    fingerprint: Fingerprint,
    parent: Option<(StateId, Action)>,
}

/// Keys on the 64-bit digest and confirms membership on the full canonical
/// encoding, so a digest collision can never merge two distinct states.
pub struct StateStore {
    /// First state seen per key.
    index: HashMap<u64, StateId>,
    /// Further states whose key collided with a different state.
    collisions: HashMap<u64, Vec<StateId>>,
    entries: Vec<Entry>,
    heap_bytes: usize,
    hasher: fn(&[u8]) -> u64,
    dedup: bool,
}

impl StateStore {
    pub fn new(dedup: bool) -> Self {
        Self::with_hasher(dedup, digest)
    }

    /// Store using a custom digest; tests use a degenerate one to force
    /// collisions.
    pub fn with_hasher(dedup: bool, hasher: fn(&[u8]) -> u64) -> Self {
        StateStore {
            index: HashMap::new(),
            collisions: HashMap::new(),
            entries: Vec::new(),
            heap_bytes: 0,
            hasher,
            dedup,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Approximate heap footprint, counting reserved capacity.
    pub fn memory_bytes(&self) -> usize {
        let slot = size_of::<u64>() + size_of::<StateId>() + 1;
        self.heap_bytes
            + self.entries.capacity() * size_of::<Entry>()
            + self.index.capacity() * slot
            + self.collisions.capacity() * (slot + size_of::<Vec<StateId>>())
    }

    /// Footprint while the largest tables are being regrown.
    pub fn peak_bytes(&self) -> usize {
        let slot = size_of::<u64>() + size_of::<StateId>() + 1;
        self.memory_bytes() + self.entries.capacity() * size_of::<Entry>() + self.index.capacity() * slot
    }

    fn same(&self, id: StateId, bytes: &[u8]) -> bool {
        *self.entries[id as usize].bytes == *bytes
    }

    /// Records a state, returning its id, or `None` if an equal state is
    /// already present. The trace fingerprint is always the real digest.
    pub fn insert(
        &mut self,
        bytes: Vec<u8>,
        parent: Option<(StateId, Action)>,
    ) -> Option<StateId> {
        let fingerprint = Fingerprint(digest(&bytes));
        let id = StateId::try_from(self.entries.len()).ok()?;
        if self.dedup {
            let key = (self.hasher)(&bytes);
            match self.index.get(&key) {
                None => {
                    self.index.insert(key, id);
                }
                Some(&first) => {
                    if self.same(first, &bytes) {
                        return None;
                    }
                    let others = self.collisions.get(&key).map_or(&[][..], Vec::as_slice);
                    if others.iter().any(|&other| self.same(other, &bytes)) {
                        return None;
                    }
                    self.collisions.entry(key).or_default().push(id);
                }
            }
        }
        self.heap_bytes += bytes.len();
        self.entries.push(Entry { bytes: bytes.into_boxed_slice(), fingerprint, parent });
        Some(id)
    }

    pub fn bytes(&self, id: StateId) -> &[u8] {
        &self.entries[id as usize].bytes
    }

    pub fn fingerprint(&self, id: StateId) -> Fingerprint {
        self.entries[id as usize].fingerprint
    }

    /// Actions and resulting fingerprints from the root to `id`.
    pub fn path_to(&self, id: StateId) -> Vec<(Action, Fingerprint)> {
        let mut path = Vec::new();
        let mut cursor = id;
        while let Some((parent, action)) = self.entries[cursor as usize].parent {
            path.push((action, self.entries[cursor as usize].fingerprint));
            cursor = parent;
        }
        path.reverse();
        path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_confirms_on_bytes() {
        let mut store = StateStore::with_hasher(true, |_| 7);
        let a = store.insert(vec![1, 2, 3], None).unwrap();
        assert!(store.insert(vec![1, 2, 3], None).is_none());
        let b = store.insert(vec![1, 2, 4], Some((a, Action::Originate))).unwrap();
        assert_ne!(a, b);
        assert_eq!(store.len(), 2);
        let c = store.insert(vec![9], None).unwrap();
        assert!(store.insert(vec![9], None).is_none());
        assert!(store.insert(vec![1, 2, 4], None).is_none());
        assert_eq!(store.bytes(c), &[9]);
        assert_eq!(store.path_to(b), vec![(Action::Originate, store.fingerprint(b))]);
    }

    #[test]
    fn no_dedup_keeps_duplicates() {
        let mut store = StateStore::new(false);
        store.insert(vec![1], None).unwrap();
        store.insert(vec![1], None).unwrap();
        assert_eq!(store.len(), 2);
    }
}
