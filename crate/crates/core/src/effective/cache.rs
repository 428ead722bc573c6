use std::collections::HashMap;
use std::hash::Hash;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

/// Bounded map with least-recently-used eviction. Lookups take the read lock
/// and bump an atomic stamp; inserts take the write lock.
#[derive(Debug)]
pub(crate) struct LruCache<K, V> {
    capacity: usize,
    map: RwLock<HashMap<K, (V, AtomicU64)>>,
    clock: AtomicU64,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<K: Eq + Hash, V: Clone> LruCache<K, V> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            map: RwLock::new(HashMap::new()),
            clock: AtomicU64::new(0),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn get(&self, k: &K) -> Option<V> {
        let map = self.map.read().unwrap_or_else(|e| e.into_inner());
        match map.get(k) {
            Some((v, stamp)) => {
                stamp.store(self.clock.fetch_add(1, Ordering::Relaxed), Ordering::Relaxed);
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(v.clone())
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn insert(&self, k: K, v: V) {
        let mut map = self.map.write().unwrap_or_else(|e| e.into_inner());
        if map.len() >= self.capacity && !map.contains_key(&k) {
            let oldest = map
                .iter()
                .min_by_key(|(_, (_, s))| s.load(Ordering::Relaxed))
                .map(|(_, (_, s))| s.load(Ordering::Relaxed));
            if let Some(oldest) = oldest {
                map.retain(|_, (_, s)| s.load(Ordering::Relaxed) != oldest);
            }
        }
        let stamp = AtomicU64::new(self.clock.fetch_add(1, Ordering::Relaxed));
        map.insert(k, (v, stamp));
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.map.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// `(hits, misses)`
    pub fn stats(&self) -> (u64, u64) {
        (
            self.hits.load(Ordering::Relaxed),
            self.misses.load(Ordering::Relaxed),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_least_recently_used() {
        let c = LruCache::new(2);
        c.insert(1, "a");
        c.insert(2, "b");
        assert_eq!(c.get(&1), Some("a"));
        c.insert(3, "c");
        assert_eq!(c.get(&2), None);
        assert_eq!(c.get(&1), Some("a"));
        assert_eq!(c.get(&3), Some("c"));
        assert_eq!(c.len(), 2);
        assert_eq!(c.stats(), (3, 1));
    }
}
