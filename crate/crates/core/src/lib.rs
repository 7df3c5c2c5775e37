//! Table-based lossless compression of sparse matrices for bandwidth-bound SpMV.
//!
//! The crate generates HPCG-style 27-point stencil matrices, stores them in a
//! padded ELL baseline and in three compressed layouts (value table, value
//! table plus displacement-pattern table, and patterns with folded values),
//! and provides SpMV kernels over every layout, a preconditioned CG driver, a
//! byte-accounting roofline model and a small benchmark harness.

pub mod bench;
pub mod error;
pub mod formats;
pub mod kernels;
pub mod perf_model;
pub mod solver;
pub mod stencil;
pub mod wire;

pub use error::{Error, Result};
pub use formats::{EllMatrix, PatternCompressedMatrix, ValueTable, VtCompressedMatrix};
pub use kernels::{dot, spmv_ell, spmv_pattern, spmv_vt, symgs_sweep, waxpby, SpmvOperator};
pub use stencil::{generate_matrix, make_test_vector, GridSpec, StencilMatrix, VectorKind};
