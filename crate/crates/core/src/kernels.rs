//! SpMV over every storage format plus the vector primitives used by CG.
//!
//! Every SpMV kernel overwrites `y` and counts `2 * nnz` flops per call.
//! Summation order per row:
//!
//! - ELL: slot order, i.e. ascending column, padding slots last.
//! - value table: for each value group in table order, the group's `x`
//!   entries are summed in stored order and the sum is scaled by the value.
//! - pattern: like the reference loop, `value * x[i + d]` is accumulated
//!   term by term, groups in table order.
//!
//! The orders differ, so results agree to rounding, not bit for bit.

use std::ops::Range;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::formats::{EllMatrix, PatternCompressedMatrix, VtCompressedMatrix};
use crate::StencilMatrix;

/// A matrix that can compute `y = A x` over any contiguous block of rows.
pub trait SpmvOperator: Sync {
    fn n(&self) -> usize;

    fn nnz(&self) -> usize;

    /// Writes rows `rows` of `A x` into `y`, which holds exactly those rows.
    fn spmv_rows(&self, x: &[f64], rows: Range<usize>, y: &mut [f64]) -> Result<()>;

    /// Flops of one full product: one multiply and one add per nonzero.
    fn spmv_flops(&self) -> u64 {
        2 * self.nnz() as u64
    }

    fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.n(), x.len())?;
        check_len(self.n(), y.len())?;
        self.spmv_rows(x, 0..self.n(), y)
    }

    fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n()];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }
}

fn check_rows(n: usize, x: &[f64], rows: &Range<usize>, y: &[f64]) -> Result<()> {
    check_len(n, x.len())?;
    check_len(rows.len(), y.len())?;
    if rows.end > n {
        return Err(Error::InvalidArgument(format!("row range {rows:?} exceeds {n} rows")));
    }
    Ok(())
}

impl SpmvOperator for EllMatrix {
    fn n(&self) -> usize {
        EllMatrix::n(self)
    }

    fn nnz(&self) -> usize {
        EllMatrix::nnz(self)
    }

    fn spmv_rows(&self, x: &[f64], rows: Range<usize>, y: &mut [f64]) -> Result<()> {
        check_rows(self.n(), x, &rows, y)?;
        for (yi, i) in y.iter_mut().zip(rows) {
            let (cols, vals) = self.row(i);
            let mut sum = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                sum += v * x[c as usize];
            }
            *yi = sum;
        }
        Ok(())
    }
}

impl SpmvOperator for VtCompressedMatrix {
    fn n(&self) -> usize {
        VtCompressedMatrix::n(self)
    }

    fn nnz(&self) -> usize {
        VtCompressedMatrix::nnz(self)
    }

    fn spmv_rows(&self, x: &[f64], rows: Range<usize>, y: &mut [f64]) -> Result<()> {
        check_rows(self.n(), x, &rows, y)?;
        let table = self.table().entries();
        for (yi, i) in y.iter_mut().zip(rows) {
            let cols = self.sorted_columns(i);
            let mut sum = 0.0;
            let mut idx = 0usize;
            for (&value, &end) in table.iter().zip(self.ends(i)) {
                let end = end as usize;
                if end < idx || end > cols.len() {
                    return Err(Error::Integrity(format!("row {i}: malformed value-group end {end}")));
                }
                let mut group = 0.0;
                for &c in &cols[idx..end] {
                    group += x[c as usize];
                }
                sum += value * group;
                idx = end;
            }
            *yi = sum;
        }
        Ok(())
    }
}

impl SpmvOperator for PatternCompressedMatrix {
    fn n(&self) -> usize {
        PatternCompressedMatrix::n(self)
    }

    fn nnz(&self) -> usize {
        PatternCompressedMatrix::nnz(self)
    }

    fn spmv_rows(&self, x: &[f64], rows: Range<usize>, y: &mut [f64]) -> Result<()> {
        check_rows(self.n(), x, &rows, y)?;
        let table = self.table().entries();
        for (yi, i) in y.iter_mut().zip(rows) {
            let pattern = self.pattern_of(i)?;
            let disp = &pattern.displacements;
            let mut sum = 0.0;
            let mut idx = 0usize;
            for (&a_ij, &end) in table.iter().zip(self.ends_of(i, pattern)) {
                let end = end as usize;
                if end < idx || end > disp.len() {
                    return Err(Error::Integrity(format!("row {i}: malformed value-group end {end}")));
                }
                for &d in &disp[idx..end] {
                    let j = (i as isize + d as isize) as usize;
                    sum += a_ij * x[j];
                }
                idx = end;
            }
            *yi = sum;
        }
        Ok(())
    }
}

pub fn spmv_ell(a: &EllMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.spmv(x)
}

pub fn spmv_vt(a: &VtCompressedMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.spmv(x)
}

pub fn spmv_pattern(a: &PatternCompressedMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.spmv(x)
}

/// Splits `0..n` into `parts` contiguous, nearly equal ranges.
pub fn partition_rows(n: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.clamp(1, n.max(1));
    let (base, extra) = (n / parts, n % parts);
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Row-partitioned SpMV on `threads` scoped workers.
///
/// Each worker owns a disjoint block of `y`, so the result is identical to the
/// single-threaded product for every thread count.
pub fn spmv_parallel<A: SpmvOperator + ?Sized>(
    a: &A,
    x: &[f64],
    y: &mut [f64],
    threads: usize,
) -> Result<()> {
    check_len(a.n(), x.len())?;
    check_len(a.n(), y.len())?;
    if threads <= 1 {
        return a.spmv_rows(x, 0..a.n(), y);
    }
    let ranges = partition_rows(a.n(), threads);
    thread::scope(|s| {
        let mut rest = &mut *y;
        let mut handles = Vec::with_capacity(ranges.len());
        for r in ranges {
            let (chunk, tail) = rest.split_at_mut(r.len());
            rest = tail;
            handles.push(s.spawn(move || a.spmv_rows(x, r, chunk)));
        }
        handles.into_iter().try_for_each(|h| h.join().expect("SpMV worker panicked"))
    })
}

/// Row magnitudes `Σ_j |a_ij x_j|`, the natural scale of rounding error in `A x`.
pub fn abs_row_products(m: &StencilMatrix, x: &[f64]) -> Result<Vec<f64>> {
    check_len(m.n(), x.len())?;
    Ok((0..m.n())
        .map(|i| {
            let (cols, vals) = m.row(i);
            cols.iter().zip(vals).map(|(&c, &v)| (v * x[c as usize]).abs()).sum()
        })
        .collect())
}

/// Largest `|a_i - b_i| / max(|a_i|, |b_i|, scale_i)` over all entries.
///
/// With `scale` from [`abs_row_products`] this is the element-wise relative
/// deviation, guarded against rows whose exact result cancels to near zero.
pub fn max_relative_deviation(a: &[f64], b: &[f64], scale: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    check_len(a.len(), scale.len())?;
    Ok(a.iter()
        .zip(b)
        .zip(scale)
        .map(|((&x, &y), &s)| {
            let diff = (x - y).abs();
            if x.to_bits() == y.to_bits() || diff == 0.0 {
                0.0
            } else if diff.is_nan() {
                f64::INFINITY
            } else {
                diff / x.abs().max(y.abs()).max(s)
            }
        })
        .fold(0.0, f64::max))
}

/// `Σ u[i] v[i]`, accumulated in ascending index order.
pub fn dot(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u.len(), v.len())?;
    Ok(dot_unchecked(u, v))
}

#[inline]
fn dot_unchecked(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).fold(0.0, |acc, (a, b)| acc + a * b)
}

/// Dot product over `parts` contiguous blocks reduced in block order.
///
/// The result depends on `parts` but never on scheduling.
pub fn dot_partitioned(u: &[f64], v: &[f64], parts: usize) -> Result<f64> {
    check_len(u.len(), v.len())?;
    let ranges = partition_rows(u.len(), parts);
    let partials: Vec<f64> = thread::scope(|s| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| s.spawn(move || dot_unchecked(&u[r.clone()], &v[r])))
            .collect();
        handles.into_iter().map(|h| h.join().expect("dot worker panicked")).collect()
    });
    Ok(partials.into_iter().fold(0.0, |acc, p| acc + p))
}

/// `w = alpha x + beta y`.
pub fn waxpby(alpha: f64, x: &[f64], beta: f64, y: &[f64]) -> Result<Vec<f64>> {
    let mut w = vec![0.0; x.len()];
    waxpby_into(alpha, x, beta, y, &mut w)?;
    Ok(w)
}

pub fn waxpby_into(alpha: f64, x: &[f64], beta: f64, y: &[f64], w: &mut [f64]) -> Result<()> {
    check_len(x.len(), y.len())?;
    check_len(x.len(), w.len())?;
    for ((wi, &xi), &yi) in w.iter_mut().zip(x).zip(y) {
        *wi = alpha * xi + beta * yi;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    Forward,
    Backward,
}

/// Flops charged for one symmetric sweep: two passes over every nonzero.
pub fn symgs_flops(m: &StencilMatrix) -> u64 {
    4 * m.nnz() as u64
}

fn diagonal_positions(m: &StencilMatrix) -> Result<Vec<usize>> {
    (0..m.n())
        .map(|i| {
            let (cols, vals) = m.row(i);
            match cols.binary_search(&(i as u32)) {
                Ok(k) if vals[k] != 0.0 => Ok(m.row_ptr()[i] + k),
                _ => Err(Error::Singular { row: i }),
            }
        })
        .collect()
}

fn gs_pass(m: &StencilMatrix, diag: &[usize], x: &mut [f64], b: &[f64], dir: SweepDirection) {
    let (row_ptr, cols, vals) = (m.row_ptr(), m.columns(), m.values());
    let mut relax = |i: usize| {
        let mut sum = b[i];
        for k in row_ptr[i]..row_ptr[i + 1] {
            sum -= vals[k] * x[cols[k] as usize];
        }
        let d = vals[diag[i]];
        // the loop above also subtracted the diagonal term
        x[i] = (sum + d * x[i]) / d;
    };
    match dir {
        SweepDirection::Forward => (0..m.n()).for_each(&mut relax),
        SweepDirection::Backward => (0..m.n()).rev().for_each(&mut relax),
    }
}

/// One Gauss–Seidel pass in natural row order.
pub fn gauss_seidel(m: &StencilMatrix, x: &mut [f64], b: &[f64], dir: SweepDirection) -> Result<()> {
    check_len(m.n(), x.len())?;
    check_len(m.n(), b.len())?;
    let diag = diagonal_positions(m)?;
    gs_pass(m, &diag, x, b, dir);
    Ok(())
}

/// Symmetric Gauss–Seidel: a forward pass followed by a backward pass,
/// always using the latest values of `x`.
pub fn symgs_sweep(m: &StencilMatrix, x: &mut [f64], b: &[f64]) -> Result<()> {
    check_len(m.n(), x.len())?;
    check_len(m.n(), b.len())?;
    let diag = diagonal_positions(m)?;
    gs_pass(m, &diag, x, b, SweepDirection::Forward);
    gs_pass(m, &diag, x, b, SweepDirection::Backward);
    Ok(())
}

/// Reusable symmetric Gauss–Seidel operator with the diagonal located once.
#[derive(Debug, Clone)]
pub struct SymGs<'a> {
    matrix: &'a StencilMatrix,
    diag: Vec<usize>,
}

impl<'a> SymGs<'a> {
    pub fn new(matrix: &'a StencilMatrix) -> Result<Self> {
        Ok(Self { matrix, diag: diagonal_positions(matrix)? })
    }

    pub fn sweep(&self, x: &mut [f64], b: &[f64]) -> Result<()> {
        check_len(self.matrix.n(), x.len())?;
        check_len(self.matrix.n(), b.len())?;
        gs_pass(self.matrix, &self.diag, x, b, SweepDirection::Forward);
        gs_pass(self.matrix, &self.diag, x, b, SweepDirection::Backward);
        Ok(())
    }
}
