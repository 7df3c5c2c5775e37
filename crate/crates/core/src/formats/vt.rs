use super::{check_ends, finish_row, group_ends, row_keys, CompressOptions, ValueTable};
use crate::error::{Error, Result};
use crate::StencilMatrix;

/// Value-table compression: values are replaced by group boundaries.
///
/// Row `i` stores its column list `S_i` ordered by (value, column) and one
/// exclusive end offset per table entry: entries `ends[i][k-1]..ends[i][k]`
/// of `S_i` all carry value `table[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VtCompressedMatrix {
    n: usize,
    table: ValueTable,
    /// `n * table.len()` offsets, row-major.
    ends: Vec<u32>,
    sorted_columns: Vec<u32>,
    /// Start of each row in `sorted_columns`; derived from `ends`, not stored.
    row_start: Vec<usize>,
}

pub fn compress_values(m: &StencilMatrix) -> Result<VtCompressedMatrix> {
    compress_values_with(m, &CompressOptions::default())
}

pub fn compress_values_with(m: &StencilMatrix, opts: &CompressOptions) -> Result<VtCompressedMatrix> {
    let table = ValueTable::from_values(m.values().iter().copied(), opts.table_limit)?;
    let width = table.len();
    let mut ends = Vec::with_capacity(m.n() * width);
    let mut sorted_columns = Vec::with_capacity(m.nnz());
    for i in 0..m.n() {
        let keys = row_keys(m, &table, i);
        ends.extend(group_ends(&keys, width));
        sorted_columns.extend(keys.iter().map(|&(_, c)| c));
    }
    let row_start = row_starts(m.n(), width, &ends);
    Ok(VtCompressedMatrix { n: m.n(), table, ends, sorted_columns, row_start })
}

fn row_starts(n: usize, width: usize, ends: &[u32]) -> Vec<usize> {
    let mut starts = Vec::with_capacity(n + 1);
    let mut acc = 0usize;
    starts.push(0);
    for i in 0..n {
        acc += ends.get(i * width + width.wrapping_sub(1)).map_or(0, |&e| e as usize);
        starts.push(acc);
    }
    starts
}

impl VtCompressedMatrix {
    /// Reassembles a matrix from stored arrays, validating every invariant.
    pub fn from_parts(
        n: usize,
        table: ValueTable,
        ends: Vec<u32>,
        sorted_columns: Vec<u32>,
    ) -> Result<Self> {
        let width = table.len();
        if ends.len() != n * width {
            return Err(Error::Integrity(format!(
                "{} end offsets for {n} rows of a {width}-entry table",
                ends.len()
            )));
        }
        if width == 0 && !sorted_columns.is_empty() {
            return Err(Error::Integrity("entries present but value table is empty".into()));
        }
        let row_start = row_starts(n, width, &ends);
        if row_start[n] != sorted_columns.len() {
            return Err(Error::Integrity(format!(
                "ends account for {} entries, column list holds {}",
                row_start[n],
                sorted_columns.len()
            )));
        }
        if let Some(c) = sorted_columns.iter().find(|&&c| c as usize >= n) {
            return Err(Error::Integrity(format!("column {c} out of range")));
        }
        let vt = Self { n, table, ends, sorted_columns, row_start };
        for i in 0..n {
            check_ends(i, vt.ends(i), vt.sorted_columns(i).len())?;
        }
        Ok(vt)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.sorted_columns.len()
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }

    /// `S_i`: columns of row `i` grouped by ascending value.
    #[inline]
    pub fn sorted_columns(&self, i: usize) -> &[u32] {
        &self.sorted_columns[self.row_start[i]..self.row_start[i + 1]]
    }

    /// Exclusive end offset into `S_i` of each value group.
    #[inline]
    pub fn ends(&self, i: usize) -> &[u32] {
        let w = self.table.len();
        &self.ends[i * w..(i + 1) * w]
    }

    pub fn all_ends(&self) -> &[u32] {
        &self.ends
    }

    pub fn all_sorted_columns(&self) -> &[u32] {
        &self.sorted_columns
    }

    #[cfg(test)]
    pub(crate) fn raw_ends_mut(&mut self) -> &mut Vec<u32> {
        &mut self.ends
    }

    pub fn decompress(&self) -> Result<StencilMatrix> {
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let cols = self.sorted_columns(i);
            let ends = self.ends(i);
            check_ends(i, ends, cols.len())?;
            let mut row = Vec::with_capacity(cols.len());
            let mut start = 0usize;
            for (k, &end) in ends.iter().enumerate() {
                let v = self.table.get(k);
                row.extend(cols[start..end as usize].iter().map(|&c| (c, v)));
                start = end as usize;
            }
            finish_row(i, &mut row)?;
            rows.push(row);
        }
        StencilMatrix::from_rows(self.n, rows)
    }
}
