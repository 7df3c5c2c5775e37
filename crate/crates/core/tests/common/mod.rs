//! Independent oracles shared by the integration tests.
//!
//! Nothing here goes through the crate's generator or kernels: the dense
//! matrix is built from grid geometry alone.
#![allow(dead_code)]

use sparsetab::GridSpec;

/// Dense HPCG matrix from pairwise node adjacency.
pub fn dense_hpcg(spec: GridSpec) -> Vec<Vec<f64>> {
    let n = spec.nx * spec.ny * spec.nz;
    let coords = |r: usize| (r % spec.nx, (r / spec.nx) % spec.ny, r / (spec.nx * spec.ny));
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        let (ix, iy, iz) = coords(i);
        for (j, aij) in row.iter_mut().enumerate() {
            let (jx, jy, jz) = coords(j);
            if ix.abs_diff(jx) <= 1 && iy.abs_diff(jy) <= 1 && iz.abs_diff(jz) <= 1 {
                *aij = if i == j { 26.0 } else { -1.0 };
            }
        }
    }
    a
}

pub fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(v, xj)| v * xj).sum()).collect()
}

/// `Σ_j |a_ij x_j|` per row.
pub fn dense_abs_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(v, xj)| (v * xj).abs()).sum()).collect()
}

/// Element-wise relative deviation, with each row's magnitude `Σ|a_ij x_j|`
/// as a floor on the denominator.
pub fn rel_dev(a: &[f64], b: &[f64], scale: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut worst = 0.0f64;
    for i in 0..a.len() {
        let diff = (a[i] - b[i]).abs();
        if diff == 0.0 {
            continue;
        }
        let d = diff / a[i].abs().max(b[i].abs()).max(scale[i]);
        worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
    }
    worst
}

/// Sorted displacement lists of all rows, keyed by (value, column) order.
pub fn brute_force_patterns(spec: GridSpec) -> std::collections::BTreeSet<Vec<(u8, i64)>> {
    let a = dense_hpcg(spec);
    a.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut entries: Vec<(u8, i64)> = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (u8::from(v > 0.0), j as i64 - i as i64))
                .collect();
            entries.sort();
            entries
        })
        .collect()
}
