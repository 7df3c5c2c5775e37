use std::collections::HashMap;

use super::{check_ends, finish_row, group_ends, row_keys, CompressOptions, ValueTable};
use crate::error::{Error, Result};
use crate::StencilMatrix;

/// Column displacements `column - row` of one row class, ordered by
/// (value, column) exactly as the value-table scheme orders `S_i`.
///
/// With values folded into the table, the pattern also carries the exclusive
/// end offset of each value group, which fixes the value at every position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    pub displacements: Vec<i32>,
    pub ends: Option<Vec<u32>>,
}

impl Pattern {
    /// Value-table index of position `pos`, when values are folded in.
    pub fn value_index(&self, pos: usize) -> Option<usize> {
        let ends = self.ends.as_ref()?;
        ends.iter().position(|&e| pos < e as usize)
    }
}

/// Displacement-pattern compression.
///
/// Each row stores a 4-byte pattern id. Without folded values it also keeps
/// its own value-group ends (`row_ends`), the layout of the reference kernel
/// in which the inner loop reads `valueIdxEnd[i][k]`. With folded values the
/// ends live in the pattern and the per-row payload is the id alone.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternCompressedMatrix {
    n: usize,
    table: ValueTable,
    patterns: Vec<Pattern>,
    row_pattern: Vec<u32>,
    /// `n * table.len()` offsets when values are not folded, else empty.
    row_ends: Vec<u32>,
    values_in_pattern: bool,
    nnz: usize,
}

pub fn compress_patterns(m: &StencilMatrix, values_in_pattern: bool) -> Result<PatternCompressedMatrix> {
    compress_patterns_with(m, values_in_pattern, &CompressOptions::default())
}

pub fn compress_patterns_with(
    m: &StencilMatrix,
    values_in_pattern: bool,
    opts: &CompressOptions,
) -> Result<PatternCompressedMatrix> {
    let table = ValueTable::from_values(m.values().iter().copied(), opts.table_limit)?;
    let width = table.len();
    let mut ids: HashMap<Pattern, u32> = HashMap::new();
    let mut patterns = Vec::new();
    let mut row_pattern = Vec::with_capacity(m.n());
    let mut row_ends = Vec::with_capacity(if values_in_pattern { 0 } else { m.n() * width });

    for i in 0..m.n() {
        let keys = row_keys(m, &table, i);
        let ends = group_ends(&keys, width);
        let displacements = keys.iter().map(|&(_, c)| c as i32 - i as i32).collect();
        let pattern = if values_in_pattern {
            Pattern { displacements, ends: Some(ends) }
        } else {
            row_ends.extend(ends);
            Pattern { displacements, ends: None }
        };
        let next = patterns.len();
        let id = *ids.entry(pattern).or_insert_with_key(|p| {
            patterns.push(p.clone());
            next as u32
        });
        if patterns.len() > i32::MAX as usize {
            return Err(Error::PatternOverflow(patterns.len()));
        }
        row_pattern.push(id);
    }
    Ok(PatternCompressedMatrix {
        n: m.n(),
        table,
        patterns,
        row_pattern,
        row_ends,
        values_in_pattern,
        nnz: m.nnz(),
    })
}

impl PatternCompressedMatrix {
    pub fn from_parts(
        n: usize,
        table: ValueTable,
        patterns: Vec<Pattern>,
        row_pattern: Vec<u32>,
        row_ends: Vec<u32>,
        values_in_pattern: bool,
    ) -> Result<Self> {
        let width = table.len();
        if row_pattern.len() != n {
            return Err(Error::Integrity(format!("{} pattern ids for {n} rows", row_pattern.len())));
        }
        let expected_ends = if values_in_pattern { 0 } else { n * width };
        if row_ends.len() != expected_ends {
            return Err(Error::Integrity(format!(
                "{} per-row ends, expected {expected_ends}",
                row_ends.len()
            )));
        }
        for (p, pat) in patterns.iter().enumerate() {
            if pat.ends.is_some() != values_in_pattern {
                return Err(Error::Integrity(format!("pattern {p}: value folding mismatch")));
            }
            if let Some(ends) = &pat.ends {
                if ends.len() != width {
                    return Err(Error::Integrity(format!("pattern {p}: {} ends", ends.len())));
                }
                check_ends(p, ends, pat.displacements.len())?;
            }
        }
        let mut used = vec![false; patterns.len()];
        for (i, &id) in row_pattern.iter().enumerate() {
            let pat = patterns
                .get(id as usize)
                .ok_or_else(|| Error::Integrity(format!("row {i}: pattern id {id} out of range")))?;
            used[id as usize] = true;
            if let Some(d) = pat
                .displacements
                .iter()
                .find(|&&d| !(0..n as i64).contains(&(i as i64 + d as i64)))
            {
                return Err(Error::Integrity(format!("row {i}: displacement {d} leaves the matrix")));
            }
            if !values_in_pattern {
                check_ends(i, &row_ends[i * width..(i + 1) * width], pat.displacements.len())?;
            }
        }
        if let Some(p) = used.iter().position(|u| !u) {
            return Err(Error::Integrity(format!("pattern {p} is not referenced by any row")));
        }
        let nnz = row_pattern.iter().map(|&id| patterns[id as usize].displacements.len()).sum();
        Ok(Self { n, table, patterns, row_pattern, row_ends, values_in_pattern, nnz })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn row_pattern(&self) -> &[u32] {
        &self.row_pattern
    }

    pub fn values_in_pattern(&self) -> bool {
        self.values_in_pattern
    }

    pub fn all_row_ends(&self) -> &[u32] {
        &self.row_ends
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// Pattern of row `i`, or an integrity error for a dangling id.
    #[inline]
    pub fn pattern_of(&self, i: usize) -> Result<&Pattern> {
        let id = self.row_pattern[i];
        self.patterns
            .get(id as usize)
            .ok_or_else(|| Error::Integrity(format!("row {i}: pattern id {id} out of range")))
    }

    /// Value-group ends that apply to row `i`.
    #[inline]
    pub fn ends_of<'a>(&'a self, i: usize, pattern: &'a Pattern) -> &'a [u32] {
        match &pattern.ends {
            Some(ends) => ends,
            None => {
                let w = self.table.len();
                &self.row_ends[i * w..(i + 1) * w]
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn raw_row_pattern_mut(&mut self) -> &mut Vec<u32> {
        &mut self.row_pattern
    }

    pub fn decompress(&self) -> Result<StencilMatrix> {
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let pat = self.pattern_of(i)?;
            let ends = self.ends_of(i, pat);
            check_ends(i, ends, pat.displacements.len())?;
            let mut row = Vec::with_capacity(pat.displacements.len());
            let mut start = 0usize;
            for (k, &end) in ends.iter().enumerate() {
                let v = self.table.get(k);
                for &d in &pat.displacements[start..end as usize] {
                    let col = i as i64 + d as i64;
                    if !(0..self.n as i64).contains(&col) {
                        return Err(Error::Integrity(format!("row {i}: displacement {d} leaves the matrix")));
                    }
                    row.push((col as u32, v));
                }
                start = end as usize;
            }
            finish_row(i, &mut row)?;
            rows.push(row);
        }
        StencilMatrix::from_rows(self.n, rows)
    }
}
