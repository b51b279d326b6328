use std::collections::HashMap;
use std::hash::Hash;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::Result;

type Slot<V> = Arc<Mutex<Option<Arc<V>>>>;

/// Build-once store for kernel maps. Builders for one key are serialized;
/// builders for different keys may run concurrently.
pub struct MapCache<K, V> {
    slots: Mutex<HashMap<K, Slot<V>>>,
    builds: AtomicUsize,
}

impl<K: Hash + Eq + Clone, V> Default for MapCache<K, V> {
    fn default() -> Self {
        Self {
            slots: Mutex::new(HashMap::new()),
            builds: AtomicUsize::new(0),
        }
    }
}

impl<K: Hash + Eq + Clone, V> MapCache<K, V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(&self, key: &K, build: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
        let slot = {
            let mut slots = self.slots.lock().expect("map cache poisoned");
            slots.entry(key.clone()).or_default().clone()
        };
        let mut guard = slot.lock().expect("map cache slot poisoned");
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        let v = Arc::new(build()?);
        self.builds.fetch_add(1, Ordering::Relaxed);
        *guard = Some(v.clone());
        Ok(v)
    }

    pub fn get(&self, key: &K) -> Option<Arc<V>> {
        let slot = self.slots.lock().expect("map cache poisoned").get(key).cloned()?;
        let guard = slot.lock().expect("map cache slot poisoned");
        guard.clone()
    }

    /// Number of builder invocations that completed.
    pub fn builds(&self) -> usize {
        self.builds.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("map cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.slots.lock().expect("map cache poisoned").clear();
    }
}
