//! 27-point stencil matrix generation on a regular 3D grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod market;

/// Largest admissible row count: column indices must fit a 4-byte signed integer.
pub const MAX_ROWS: u64 = (1 << 31) - 1;

/// Node counts of the regular grid along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let spec = Self { nx, ny, nz };
        spec.validate()?;
        Ok(spec)
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::Sizing(format!(
                "grid {}x{}x{} has an empty axis",
                self.nx, self.ny, self.nz
            )));
        }
        let rows = (self.nx as u64)
            .checked_mul(self.ny as u64)
            .and_then(|r| r.checked_mul(self.nz as u64));
        match rows {
            Some(r) if r <= MAX_ROWS => Ok(()),
            _ => Err(Error::Sizing(format!(
                "grid {}x{}x{} needs at least 2^31 rows",
                self.nx, self.ny, self.nz
            ))),
        }
    }

    pub fn rows(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Row index of node `(ix, iy, iz)`; x varies fastest.
    #[inline]
    pub fn row_of(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.nx * (iy + self.ny * iz)
    }

    #[inline]
    pub fn node_of(&self, row: usize) -> (usize, usize, usize) {
        (row % self.nx, (row / self.nx) % self.ny, row / (self.nx * self.ny))
    }

    /// Number of nodes whose 26 neighbours all lie inside the grid.
    pub fn interior_rows(&self) -> usize {
        self.nx.saturating_sub(2) * self.ny.saturating_sub(2) * self.nz.saturating_sub(2)
    }

    pub fn is_interior(&self, row: usize) -> bool {
        let (ix, iy, iz) = self.node_of(row);
        let inner = |i: usize, n: usize| i > 0 && i + 1 < n;
        inner(ix, self.nx) && inner(iy, self.ny) && inner(iz, self.nz)
    }

    /// Total nonzero count, `(3nx-2)(3ny-2)(3nz-2)`.
    pub fn nnz(&self) -> usize {
        (3 * self.nx - 2) * (3 * self.ny - 2) * (3 * self.nz - 2)
    }
}

/// Diagonal and off-diagonal coefficients of the stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilValues {
    pub diagonal: f64,
    pub off_diagonal: f64,
}

impl Default for StencilValues {
    fn default() -> Self {
        Self { diagonal: 26.0, off_diagonal: -1.0 }
    }
}

/// Square sparse matrix in compressed-row layout with ascending columns per row.
///
/// Equality compares the entries bit for bit and ignores the optional grid
/// metadata.
#[derive(Debug, Clone)]
pub struct StencilMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    grid: Option<GridSpec>,
}

impl PartialEq for StencilMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.row_ptr == other.row_ptr
            && self.cols == other.cols
            && self.vals.len() == other.vals.len()
            && self.vals.iter().zip(&other.vals).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl StencilMatrix {
    /// Builds a matrix from explicit rows of `(column, value)` pairs.
    ///
    /// Columns must be strictly ascending and below `n` in every row. Rows may
    /// be empty.
    pub fn from_rows<R>(n: usize, rows: R) -> Result<Self>
    where
        R: IntoIterator,
        R::Item: AsRef<[(u32, f64)]>,
    {
        if n as u64 > MAX_ROWS {
            return Err(Error::Sizing(format!("{n} rows exceed 2^31 - 1")));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            if i >= n {
                return Err(Error::InvalidArgument(format!("more than {n} rows supplied")));
            }
            let mut prev: Option<u32> = None;
            for &(c, v) in row.as_ref() {
                if c as usize >= n {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: column {c} out of range for {n} columns"
                    )));
                }
                if prev.is_some_and(|p| p >= c) {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: columns not strictly ascending at {c}"
                    )));
                }
                prev = Some(c);
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        if row_ptr.len() != n + 1 {
            return Err(Error::LengthMismatch { expected: n, actual: row_ptr.len() - 1 });
        }
        Ok(Self { n, row_ptr, cols, vals, grid: None })
    }

    pub(crate) fn from_csr_unchecked(
        n: usize,
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        vals: Vec<f64>,
        grid: Option<GridSpec>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        debug_assert_eq!(cols.len(), vals.len());
        Self { n, row_ptr, cols, vals, grid }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Grid this matrix was generated from, if any.
    pub fn grid(&self) -> Option<GridSpec> {
        self.grid
    }

    pub fn with_grid(mut self, grid: Option<GridSpec>) -> Self {
        self.grid = grid;
        self
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn columns(&self) -> &[u32] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// Columns and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.n).map(|i| self.row_nnz(i)).max().unwrap_or(0)
    }

    /// Value at `(i, j)`, or `None` when the entry is structurally zero.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&(j as u32)).ok().map(|k| vals[k])
    }

    pub fn diagonal(&self, i: usize) -> Option<f64> {
        self.get(i, i)
    }

    /// Iterates `(row, column, value)` triples in row-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&c, &v)| (i, c as usize, v))
        })
    }

    /// True when every `(i, j, v)` has a matching `(j, i, v)`.
    pub fn is_symmetric(&self) -> bool {
        self.triples()
            .all(|(i, j, v)| self.get(j, i).is_some_and(|w| w.to_bits() == v.to_bits()))
    }
}

/// Generates the HPCG matrix: 26 on the diagonal, -1 for each in-grid neighbour.
pub fn generate_matrix(spec: GridSpec) -> Result<StencilMatrix> {
    generate_matrix_with(spec, StencilValues::default())
}

/// Generates the 27-point stencil matrix with caller-chosen coefficients.
///
/// Couplings that would fall outside the grid are omitted.
pub fn generate_matrix_with(spec: GridSpec, coeffs: StencilValues) -> Result<StencilMatrix> {
    spec.validate()?;
    let n = spec.rows();
    let nnz = spec.nnz();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    row_ptr.push(0);

    let range = |i: usize, len: usize| i.saturating_sub(1)..(i + 2).min(len);
    for iz in 0..spec.nz {
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                let row = spec.row_of(ix, iy, iz);
                // z-major, then y, then x gives ascending column order.
                for jz in range(iz, spec.nz) {
                    for jy in range(iy, spec.ny) {
                        for jx in range(ix, spec.nx) {
                            let col = spec.row_of(jx, jy, jz);
                            cols.push(col as u32);
                            vals.push(if col == row { coeffs.diagonal } else { coeffs.off_diagonal });
                        }
                    }
                }
                row_ptr.push(cols.len());
            }
        }
    }
    Ok(StencilMatrix::from_csr_unchecked(n, row_ptr, cols, vals, Some(spec)))
}

/// Content of a generated test vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorKind {
    Ones,
    /// Entry `i` equals `i`.
    Linear,
    /// Uniform in `[-1, 1)`, reproducible for a given seed.
    SeededRandom { seed: u64 },
}

pub fn make_test_vector(n: usize, kind: VectorKind) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("test vector length must be at least 1".into()));
    }
    Ok(match kind {
        VectorKind::Ones => vec![1.0; n],
        VectorKind::Linear => (0..n).map(|i| i as f64).collect(),
        VectorKind::SeededRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force neighbour count: test every node pair for adjacency.
    fn oracle_row(spec: GridSpec, row: usize) -> Vec<(usize, f64)> {
        let (ix, iy, iz) = spec.node_of(row);
        let mut out = Vec::new();
        for col in 0..spec.rows() {
            let (jx, jy, jz) = spec.node_of(col);
            let near = |a: usize, b: usize| a.abs_diff(b) <= 1;
            if near(ix, jx) && near(iy, jy) && near(iz, jz) {
                out.push((col, if col == row { 26.0 } else { -1.0 }));
            }
        }
        out
    }

    #[test]
    fn single_node_grid() {
        let m = generate_matrix(GridSpec::new(1, 1, 1).unwrap()).unwrap();
        assert_eq!(m.n(), 1);
        assert_eq!(m.row(0), (&[0u32][..], &[26.0][..]));
    }

    #[test]
    fn two_cubed_rows_have_eight_entries_and_sum_nineteen() {
        let m = generate_matrix(GridSpec::cube(2).unwrap()).unwrap();
        assert_eq!(m.n(), 8);
        for i in 0..8 {
            let (_, vals) = m.row(i);
            assert_eq!(vals.len(), 8);
            assert_eq!(vals.iter().sum::<f64>(), 19.0);
        }
    }

    #[test]
    fn interior_node_of_four_cubed() {
        let spec = GridSpec::cube(4).unwrap();
        let m = generate_matrix(spec).unwrap();
        let row = spec.row_of(1, 1, 1);
        let (_, vals) = m.row(row);
        assert_eq!(vals.len(), 27);
        assert_eq!(vals.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn matches_brute_force_on_small_grids() {
        for (nx, ny, nz) in [(1, 1, 1), (2, 3, 1), (3, 3, 3), (4, 2, 5), (1, 5, 2)] {
            let spec = GridSpec::new(nx, ny, nz).unwrap();
            let m = generate_matrix(spec).unwrap();
            assert_eq!(m.nnz(), spec.nnz());
            for i in 0..m.n() {
                let (cols, vals) = m.row(i);
                let got: Vec<(usize, f64)> =
                    cols.iter().zip(vals).map(|(&c, &v)| (c as usize, v)).collect();
                assert_eq!(got, oracle_row(spec, i), "grid {spec:?} row {i}");
            }
        }
    }

    #[test]
    fn custom_coefficients() {
        let coeffs = StencilValues { diagonal: 4.0, off_diagonal: -0.5 };
        let m = generate_matrix_with(GridSpec::cube(3).unwrap(), coeffs).unwrap();
        assert_eq!(m.diagonal(13), Some(4.0));
        assert_eq!(m.get(13, 12), Some(-0.5));
    }

    #[test]
    fn rejects_oversized_and_empty_grids() {
        assert!(matches!(GridSpec::new(100_000, 100_000, 100_000), Err(Error::Sizing(_))));
        assert!(matches!(GridSpec::new(1 << 11, 1 << 10, 1 << 10), Err(Error::Sizing(_))));
        assert!(GridSpec::new(1 << 11, 1 << 10, (1 << 10) - 1).is_ok());
        assert!(matches!(GridSpec::new(0, 4, 4), Err(Error::Sizing(_))));
        let bad = GridSpec { nx: usize::MAX, ny: 2, nz: 1 };
        assert!(matches!(generate_matrix(bad), Err(Error::Sizing(_))));
    }

    #[test]
    fn from_rows_validates_columns() {
        assert!(StencilMatrix::from_rows(2, [vec![(1u32, 1.0), (0, 1.0)], vec![]]).is_err());
        assert!(StencilMatrix::from_rows(2, [vec![(2u32, 1.0)], vec![]]).is_err());
        assert!(StencilMatrix::from_rows(2, [vec![(0u32, 1.0)]]).is_err());
        let m = StencilMatrix::from_rows(2, [vec![(0u32, 1.0)], vec![]]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.row_nnz(1), 0);
    }

    #[test]
    fn test_vectors() {
        assert_eq!(make_test_vector(3, VectorKind::Ones).unwrap(), vec![1.0; 3]);
        assert_eq!(make_test_vector(3, VectorKind::Linear).unwrap(), vec![0.0, 1.0, 2.0]);
        let a = make_test_vector(4, VectorKind::SeededRandom { seed: 7 }).unwrap();
        let b = make_test_vector(4, VectorKind::SeededRandom { seed: 7 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_test_vector(4, VectorKind::SeededRandom { seed: 8 }).unwrap());
        assert!(a.iter().all(|v| (-1.0..1.0).contains(v)));
        assert!(make_test_vector(0, VectorKind::Ones).is_err());
    }
}
