//! Sparse storage formats: the padded ELL baseline and the table-compressed
//! layouts built from it.
//!
//! All compressed layouts share a [`ValueTable`] of the distinct matrix
//! values. Within a row, entries are ordered by (value index, column) so that
//! entries with the same value form one contiguous group; a row's group
//! boundaries are stored as exclusive end offsets.

mod ell;
mod pattern;
mod table;
mod vt;

pub use ell::{to_ell, EllMatrix};
pub use pattern::{compress_patterns, compress_patterns_with, Pattern, PatternCompressedMatrix};
pub use table::{CompressOptions, ValueTable, DEFAULT_TABLE_LIMIT};
pub use vt::{compress_values, compress_values_with, VtCompressedMatrix};

use crate::error::{Error, Result};

/// Checks one row's exclusive end offsets: non-decreasing and ending at `len`.
pub(crate) fn check_ends(row: usize, ends: &[u32], len: usize) -> Result<()> {
    let mut prev = 0u32;
    for &e in ends {
        if e < prev {
            return Err(Error::Integrity(format!("row {row}: value-group ends decrease ({prev} -> {e})")));
        }
        prev = e;
    }
    if prev as usize != len {
        return Err(Error::Integrity(format!(
            "row {row}: last group end {prev} does not match {len} entries"
        )));
    }
    Ok(())
}

/// Sorts a row's `(column, value)` pairs ascending by column, rejecting duplicates.
pub(crate) fn finish_row(row: usize, entries: &mut [(u32, f64)]) -> Result<()> {
    entries.sort_unstable_by_key(|&(c, _)| c);
    if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Integrity(format!("row {row}: column {} appears twice", w[0].0)));
    }
    Ok(())
}

/// Value-table index of every entry of row `i`, paired with its column.
pub(crate) fn row_keys(
    m: &crate::StencilMatrix,
    table: &ValueTable,
    i: usize,
) -> Vec<(u32, u32)> {
    let (cols, vals) = m.row(i);
    let mut keys: Vec<(u32, u32)> = cols
        .iter()
        .zip(vals)
        .map(|(&c, &v)| {
            let k = table.index_of(v).expect("table built from this matrix");
            (k as u32, c)
        })
        .collect();
    keys.sort_unstable();
    keys
}

/// Exclusive end offset of each value group in a sorted key list.
pub(crate) fn group_ends(keys: &[(u32, u32)], table_len: usize) -> Vec<u32> {
    let mut ends = vec![0u32; table_len];
    for &(k, _) in keys {
        ends[k as usize] += 1;
    }
    let mut acc = 0;
    for e in &mut ends {
        acc += *e;
        *e = acc;
    }
    ends
}
