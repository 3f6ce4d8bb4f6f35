use std::collections::BTreeMap;
use std::ops::Bound;

use super::{KvPairs, StoreBackend};
use crate::error::Result;

/// Ordered in-memory map. Used by tests and as the reference backend.
#[derive(Debug, Default, Clone)]
pub struct MemoryBackend {
    map: BTreeMap<Vec<u8>, Vec<u8>>,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl StoreBackend for MemoryBackend {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<()> {
        self.map.insert(key.to_vec(), value.to_vec());
        Ok(())
    }

    fn get(&self, key: &[u8]) -> Result<Option<Vec<u8>>> {
        Ok(self.map.get(key).cloned())
    }

    fn scan_each(&self, low: &[u8], high: &[u8], f: &mut super::RowVisitor<'_>) -> Result<()> {
        if low >= high {
            return Ok(());
        }
        for (k, v) in self.map.range::<[u8], _>((Bound::Included(low), Bound::Excluded(high))) {
            f(k, v)?;
        }
        Ok(())
    }

    fn scan(&self, low: &[u8], high: &[u8]) -> Result<KvPairs> {
        if low >= high {
            return Ok(Vec::new());
        }
        Ok(self
            .map
            .range::<[u8], _>((Bound::Included(low), Bound::Excluded(high)))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect())
    }
}
