//! Verification-gated SpMV benchmark and host bandwidth calibration.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{compress_patterns, compress_values, to_ell, ValueTable};
use crate::kernels::{abs_row_products, max_relative_deviation, spmv_parallel, SpmvOperator};
use crate::perf_model::{format_cost, roofline, FormatKind, LimitingResource, MachineSpec, MeasuredCost};
use crate::stencil::{make_test_vector, StencilMatrix, VectorKind};
use crate::wire::Wire;

/// Relative tolerance between a compressed kernel and the ELL baseline.
pub const VERIFY_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub format: FormatKind,
    pub repetitions: usize,
    pub threads: usize,
    /// Seed of the random input vector.
    pub seed: u64,
    pub machine: MachineSpec,
}

impl BenchConfig {
    pub fn new(format: FormatKind) -> Self {
        Self { format, repetitions: 10, threads: 1, seed: 42, machine: MachineSpec::pezy_sc() }
    }
}

/// Result of one benchmark run; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub format: FormatKind,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub nz: Option<usize>,
    pub rows: usize,
    pub nnz: usize,
    pub repetitions: usize,
    pub threads: usize,
    pub wall_time_s: f64,
    /// `2 * nnz * repetitions / wall_time_s`, in Gflop/s.
    pub achieved_gflops: f64,
    /// `matrix_bytes * repetitions / wall_time_s`, in GB/s.
    pub effective_bandwidth_gbs: f64,
    /// Size of the serialized format, framing and value table included.
    pub matrix_bytes: u64,
    /// Array payload per row, excluding framing and the value table.
    pub bytes_per_row: f64,
    /// ELL bytes per row over this format's bytes per row, whole matrix.
    pub compression_ratio: f64,
    /// The same ratio for a full-width row, from the analytic cost model.
    pub interior_compression_ratio: f64,
    pub machine_bandwidth_gbs: f64,
    pub predicted_gflops: f64,
    pub limiting_resource: LimitingResource,
    pub within_roofline: bool,
    /// `Σ |y_i|` of this format's product.
    pub checksum: f64,
    pub ell_checksum: f64,
    pub max_deviation: f64,
}

/// Builds `format` for `m`, checks its product against ELL, then times it.
///
/// Numbers are reported only after the format's output matches the ELL
/// baseline to [`VERIFY_TOLERANCE`]. The verification pass doubles as the
/// untimed warm-up.
pub fn run_bench(m: &StencilMatrix, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    if cfg.threads == 0 {
        return Err(Error::InvalidArgument("threads must be at least 1".into()));
    }
    let n = m.n();
    let ell = to_ell(m);
    let ell_cost = ell.measured_cost();
    let (op, cost, matrix_bytes): (Box<dyn SpmvOperator>, _, _) = match cfg.format {
        FormatKind::Ell => (Box::new(ell.clone()), ell_cost, ell.serialized_len()),
        FormatKind::Vt => {
            let c = compress_values(m)?;
            let (cost, bytes) = (c.measured_cost(), c.serialized_len());
            (Box::new(c), cost, bytes)
        }
        FormatKind::Pattern | FormatKind::PatternValues => {
            let c = compress_patterns(m, cfg.format == FormatKind::PatternValues)?;
            let (cost, bytes) = (c.measured_cost(), c.serialized_len());
            (Box::new(c), cost, bytes)
        }
    };

    let x = make_test_vector(n, VectorKind::SeededRandom { seed: cfg.seed })?;
    let baseline = ell.spmv(&x)?;
    let mut y = vec![0.0; n];
    spmv_parallel(op.as_ref(), &x, &mut y, cfg.threads)?;
    let scale = abs_row_products(m, &x)?;
    let max_deviation = max_relative_deviation(&y, &baseline, &scale)?;
    let format_sum = checksum(&y);
    let ell_checksum = checksum(&baseline);
    verify(max_deviation, format_sum, ell_checksum)?;
    let verified = y.clone();

    let start = Instant::now();
    for _ in 0..cfg.repetitions {
        spmv_parallel(op.as_ref(), black_box(&x), &mut y, cfg.threads)?;
        black_box(&y);
    }
    let wall = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    if y != verified {
        return Err(Error::Verification("timed products differ from the verified product".into()));
    }

    let reps = cfg.repetitions as f64;
    let achieved = op.spmv_flops() as f64 * reps / wall;
    let estimate = roofline(&cost, &cfg.machine);
    let table = ValueTable::from_values(m.values().iter().copied(), usize::MAX)?.len().max(1);
    let full = m.max_row_nnz().max(1);
    let interior_ratio = format_cost(FormatKind::Ell, full, table)?.bytes_per_row
        / format_cost(cfg.format, full, table)?.bytes_per_row;
    let grid = m.grid();

    Ok(BenchReport {
        format: cfg.format,
        nx: grid.map(|g| g.nx),
        ny: grid.map(|g| g.ny),
        nz: grid.map(|g| g.nz),
        rows: n,
        nnz: m.nnz(),
        repetitions: cfg.repetitions,
        threads: cfg.threads,
        wall_time_s: wall,
        achieved_gflops: achieved / 1e9,
        effective_bandwidth_gbs: matrix_bytes as f64 * reps / wall / 1e9,
        matrix_bytes,
        bytes_per_row: cost.bytes_per_row,
        compression_ratio: ell_cost.bytes_per_row / cost.bytes_per_row,
        interior_compression_ratio: interior_ratio,
        machine_bandwidth_gbs: cfg.machine.read_bandwidth / 1e9,
        predicted_gflops: estimate.predicted_flops / 1e9,
        limiting_resource: estimate.limiting_resource,
        within_roofline: achieved <= estimate.predicted_flops,
        checksum: format_sum,
        ell_checksum,
        max_deviation,
    })
}

/// `Σ |y_i|` in index order; free of cancellation, so it inherits the
/// element-wise relative accuracy of `y`.
pub fn checksum(y: &[f64]) -> f64 {
    y.iter().map(|v| v.abs()).sum()
}

/// Fails unless both the element-wise deviation and the checksum agree.
pub fn verify(max_deviation: f64, checksum: f64, baseline: f64) -> Result<()> {
    if max_deviation.is_nan() || max_deviation > VERIFY_TOLERANCE {
        return Err(Error::Verification(format!(
            "element-wise deviation {max_deviation:e} exceeds {VERIFY_TOLERANCE:e}"
        )));
    }
    let rel = (checksum - baseline).abs() / baseline.abs().max(f64::MIN_POSITIVE);
    if !(checksum == baseline || rel <= VERIFY_TOLERANCE) {
        return Err(Error::Verification(format!(
            "checksum {checksum} differs from ELL checksum {baseline} (relative {rel:e})"
        )));
    }
    Ok(())
}

/// CSV header matching [`BenchReport`]'s field order.
pub const BENCH_CSV_HEADER: &str = "format,nx,ny,nz,rows,nnz,repetitions,threads,wall_time_s,\
achieved_gflops,effective_bandwidth_gbs,matrix_bytes,bytes_per_row,compression_ratio,\
interior_compression_ratio,machine_bandwidth_gbs,predicted_gflops,limiting_resource,\
within_roofline,checksum,ell_checksum,max_deviation";

pub fn write_bench_csv<W: Write>(reports: &[BenchReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Options for the sequential-read bandwidth sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalibrateOptions {
    pub bytes: usize,
    pub repetitions: usize,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self { bytes: 256 << 20, repetitions: 5 }
    }
}

/// Best-of-`repetitions` sequential read bandwidth in bytes per second.
///
/// The array is written once before timing so page faults stay out of the
/// measurement; four independent accumulators keep the add chain from
/// limiting the read rate.
pub fn measure_read_bandwidth(opts: &CalibrateOptions) -> Result<f64> {
    let len = (opts.bytes / 8).max(1024);
    if opts.repetitions == 0 {
        return Err(Error::InvalidArgument("calibration needs at least one repetition".into()));
    }
    let data: Vec<f64> = (0..len).map(|i| (i & 7) as f64).collect();
    let mut best = f64::INFINITY;
    for _ in 0..opts.repetitions {
        let start = Instant::now();
        let mut acc = [0.0f64; 4];
        let chunks = black_box(&data).chunks_exact(4);
        for c in chunks {
            acc[0] += c[0];
            acc[1] += c[1];
            acc[2] += c[2];
            acc[3] += c[3];
        }
        black_box(acc);
        best = best.min(start.elapsed().as_secs_f64());
    }
    let bytes = (len / 4 * 4 * 8) as f64;
    Ok(bytes / best.max(f64::MIN_POSITIVE))
}

pub fn calibrate(opts: &CalibrateOptions) -> Result<MachineSpec> {
    MachineSpec::new(measure_read_bandwidth(opts)?, None)
}
