use crate::error::{Error, Result};
use crate::StencilMatrix;

/// Row-major ELLPACK storage padded to a uniform width.
///
/// Real entries occupy the leading slots of each row in ascending column
/// order. Padding slots hold value `+0.0` with the row's own index as column,
/// so they add nothing to `y[i]` and never read outside `x`. A consequence is
/// that an explicit `+0.0` diagonal entry is indistinguishable from padding.
#[derive(Debug, Clone, PartialEq)]
pub struct EllMatrix {
    n: usize,
    width: usize,
    values: Vec<f64>,
    columns: Vec<u32>,
    nnz: usize,
}

pub fn to_ell(m: &StencilMatrix) -> EllMatrix {
    let n = m.n();
    let width = m.max_row_nnz();
    let mut values = vec![0.0; n * width];
    let mut columns = vec![0u32; n * width];
    for i in 0..n {
        let (cols, vals) = m.row(i);
        let base = i * width;
        values[base..base + vals.len()].copy_from_slice(vals);
        columns[base..base + cols.len()].copy_from_slice(cols);
        columns[base + cols.len()..base + width].fill(i as u32);
    }
    EllMatrix { n, width, values, columns, nnz: m.nnz() }
}

impl EllMatrix {
    pub fn from_parts(n: usize, width: usize, values: Vec<f64>, columns: Vec<u32>) -> Result<Self> {
        let slots = n.checked_mul(width).ok_or_else(|| Error::Sizing("ELL size overflows".into()))?;
        if values.len() != slots || columns.len() != slots {
            return Err(Error::Integrity(format!(
                "ELL arrays hold {} values and {} columns, expected {slots}",
                values.len(),
                columns.len()
            )));
        }
        if let Some(c) = columns.iter().find(|&&c| c as usize >= n) {
            return Err(Error::Integrity(format!("ELL column {c} out of range")));
        }
        let mut ell = Self { n, width, values, columns, nnz: 0 };
        ell.nnz = ell.count_nnz();
        Ok(ell)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn columns(&self) -> &[u32] {
        &self.columns
    }

    /// Slots of row `i`, padding included.
    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = i * self.width..(i + 1) * self.width;
        (&self.columns[r.clone()], &self.values[r])
    }

    fn is_padding(i: usize, col: u32, val: f64) -> bool {
        col as usize == i && val.to_bits() == 0
    }

    /// Number of non-padding slots.
    pub fn nnz(&self) -> usize {
        self.nnz
    }

    fn count_nnz(&self) -> usize {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).filter(|&(&c, &v)| !Self::is_padding(i, c, v)).count()
            })
            .sum()
    }

    /// Recovers the source matrix, dropping padding slots.
    pub fn decompress(&self) -> Result<StencilMatrix> {
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut row: Vec<(u32, f64)> = cols
                .iter()
                .zip(vals)
                .filter(|&(&c, &v)| !Self::is_padding(i, c, v))
                .map(|(&c, &v)| (c, v))
                .collect();
            super::finish_row(i, &mut row)?;
            rows.push(row);
        }
        StencilMatrix::from_rows(self.n, rows)
    }
}
