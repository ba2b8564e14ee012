//! Flat state vectors with a named-slice registry.
//!
//! Every device registers its slices once when the system is assembled. The
//! integrator only ever sees `&[f64]`; the layout is used for diagnostics and
//! for pulling named quantities back out of recorded samples.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};

/// One registered slice of the state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceEntry {
    pub device: String,
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl SliceEntry {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Ordered registry of `(device, slice)` pairs.
#[derive(Debug, Clone, Default)]
pub struct StateLayout {
    entries: Vec<SliceEntry>,
    index: HashMap<(String, String), usize>,
    total: usize,
}

impl StateLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a slice and returns its offset.
    pub fn register(&mut self, device: &str, name: &str, len: usize) -> Result<usize> {
        let key = (device.to_string(), name.to_string());
        if self.index.contains_key(&key) {
            return Err(Error::Config(format!(
                "state slice `{device}.{name}` registered twice"
            )));
        }
        let offset = self.total;
        self.index.insert(key, self.entries.len());
        self.entries.push(SliceEntry {
            device: device.to_string(),
            name: name.to_string(),
            offset,
            len,
        });
        self.total += len;
        Ok(offset)
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn entries(&self) -> &[SliceEntry] {
        &self.entries
    }

    pub fn get(&self, device: &str, name: &str) -> Option<&SliceEntry> {
        self.index
            .get(&(device.to_string(), name.to_string()))
            .map(|&i| &self.entries[i])
    }

    pub fn range(&self, device: &str, name: &str) -> Result<Range<usize>> {
        self.get(device, name)
            .map(SliceEntry::range)
            .ok_or_else(|| Error::Config(format!("no state slice `{device}.{name}`")))
    }

    /// Finds the slice owning a flat index.
    pub fn locate(&self, index: usize) -> Option<&SliceEntry> {
        // entries are contiguous and sorted by offset
        let pos = self.entries.partition_point(|e| e.offset + e.len <= index);
        self.entries.get(pos).filter(|e| e.range().contains(&index))
    }
}

/// State values together with the layout that names them.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub values: Vec<f64>,
    pub layout: Arc<StateLayout>,
}

impl StateVector {
    pub fn zeros(layout: Arc<StateLayout>) -> Self {
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn from_values(layout: Arc<StateLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Config(format!(
                "state has {} values but layout expects {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn slice(&self, device: &str, name: &str) -> Result<&[f64]> {
        let r = self.layout.range(device, name)?;
        Ok(&self.values[r])
    }

    pub fn slice_mut(&mut self, device: &str, name: &str) -> Result<&mut [f64]> {
        let r = self.layout.range(device, name)?;
        Ok(&mut self.values[r])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_length_is_sum_of_slices() {
        let mut l = StateLayout::new();
        l.register("gfc1", "dc", 2).unwrap();
        l.register("gfc1", "filter", 4).unwrap();
        l.register("net", "bus4", 2).unwrap();
        assert_eq!(l.len(), 8);
        assert_eq!(l.range("gfc1", "filter").unwrap(), 2..6);
    }

    #[test]
    fn duplicate_slice_is_rejected() {
        let mut l = StateLayout::new();
        l.register("a", "x", 1).unwrap();
        assert!(l.register("a", "x", 3).is_err());
        // same name under another device is fine
        l.register("b", "x", 1).unwrap();
    }

    #[test]
    fn locate_maps_flat_index_back_to_slice() {
        let mut l = StateLayout::new();
        l.register("a", "x", 3).unwrap();
        l.register("a", "empty", 0).unwrap();
        l.register("b", "y", 2).unwrap();
        assert_eq!(l.locate(0).unwrap().name, "x");
        assert_eq!(l.locate(2).unwrap().name, "x");
        assert_eq!(l.locate(3).unwrap().name, "y");
        assert_eq!(l.locate(4).unwrap().device, "b");
        assert!(l.locate(5).is_none());
    }

    #[test]
    fn mismatched_values_rejected() {
        let mut l = StateLayout::new();
        l.register("a", "x", 3).unwrap();
        assert!(StateVector::from_values(Arc::new(l), vec![0.0; 2]).is_err());
    }
}
