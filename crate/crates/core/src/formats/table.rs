use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Default cap on the number of distinct values a compressed matrix may hold.
pub const DEFAULT_TABLE_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressOptions {
    pub table_limit: usize,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self { table_limit: DEFAULT_TABLE_LIMIT }
    }
}

/// Distinct matrix values in strictly ascending order.
///
/// Values are compared by their exact bit pattern (`f64::total_cmp`), so
/// `-0.0` and `0.0` are distinct entries.
#[derive(Debug, Clone)]
pub struct ValueTable {
    entries: Vec<f64>,
}

impl PartialEq for ValueTable {
    fn eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl ValueTable {
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I, limit: usize) -> Result<Self> {
        let mut entries: Vec<f64> = values.into_iter().collect();
        entries.sort_unstable_by(f64::total_cmp);
        entries.dedup_by(|a, b| a.to_bits() == b.to_bits());
        if entries.len() > limit {
            return Err(Error::TableOverflow { distinct: entries.len(), limit });
        }
        Ok(Self { entries })
    }

    /// Wraps an already sorted list, checking strict ascent.
    pub fn from_sorted(entries: Vec<f64>) -> Result<Self> {
        if let Some(w) = entries.windows(2).find(|w| w[0].total_cmp(&w[1]) != Ordering::Less) {
            return Err(Error::Integrity(format!(
                "value table not strictly ascending at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { entries })
    }

    pub fn index_of(&self, v: f64) -> Option<usize> {
        self.entries.binary_search_by(|e| e.total_cmp(&v)).ok()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.entries[k]
    }
}
