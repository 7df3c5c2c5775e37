//! Byte accounting and a bandwidth roofline for SpMV.
//!
//! SpMV on a large matrix streams every stored byte once and performs one
//! multiply and one add per nonzero, so its attainable rate is
//! `read_bandwidth / bytes_per_flop`. The analytic costs below count matrix
//! bytes only; traffic for the input vector is ignored unless requested with
//! [`XTraffic`].

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{EllMatrix, PatternCompressedMatrix, VtCompressedMatrix};

/// Bytes of one stored value, index, offset or id.
const VALUE_BYTES: f64 = 8.0;
const INDEX_BYTES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatKind {
    Ell,
    Vt,
    Pattern,
    PatternValues,
}

impl FormatKind {
    pub const ALL: [FormatKind; 4] = [Self::Ell, Self::Vt, Self::Pattern, Self::PatternValues];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ell => "ell",
            Self::Vt => "vt",
            Self::Pattern => "pattern",
            Self::PatternValues => "pattern-values",
        }
    }
}

impl fmt::Display for FormatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FormatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown format `{s}`")))
    }
}

/// Named byte contributions per row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ByteBreakdown {
    pub values: f64,
    pub indices: f64,
    pub ends: f64,
    pub pattern_id: f64,
    /// Shared pattern tables amortized over all rows.
    pub tables: f64,
    /// Input-vector traffic, zero unless [`XTraffic`] asks for it.
    pub vector: f64,
}

impl ByteBreakdown {
    pub fn total(&self) -> f64 {
        self.values + self.indices + self.ends + self.pattern_id + self.tables + self.vector
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormatCost {
    pub format: FormatKind,
    pub bytes_per_row: f64,
    pub flops_per_row: f64,
    pub bytes_per_flop: f64,
    pub breakdown: ByteBreakdown,
}

impl FormatCost {
    fn from_breakdown(format: FormatKind, breakdown: ByteBreakdown, flops_per_row: f64) -> Self {
        let bytes_per_row = breakdown.total();
        Self { format, bytes_per_row, flops_per_row, bytes_per_flop: bytes_per_row / flops_per_row, breakdown }
    }
}

/// Analytic bytes per row of a row with `row_nnz` entries and a value table
/// of `table_size` entries.
///
/// - ELL: an 8-byte value and a 4-byte column per entry.
/// - value table: a 4-byte column per entry plus one 4-byte group end per
///   table entry.
/// - pattern: a 4-byte pattern id plus the per-row group ends.
/// - pattern with values: the pattern id alone.
pub fn format_cost(format: FormatKind, row_nnz: usize, table_size: usize) -> Result<FormatCost> {
    if row_nnz == 0 || table_size == 0 {
        return Err(Error::InvalidArgument("row_nnz and table_size must be positive".into()));
    }
    let nnz = row_nnz as f64;
    let table = table_size as f64;
    let b = match format {
        FormatKind::Ell => ByteBreakdown { values: nnz * VALUE_BYTES, indices: nnz * INDEX_BYTES, ..Default::default() },
        FormatKind::Vt => ByteBreakdown { indices: nnz * INDEX_BYTES, ends: table * INDEX_BYTES, ..Default::default() },
        FormatKind::Pattern => ByteBreakdown { pattern_id: INDEX_BYTES, ends: table * INDEX_BYTES, ..Default::default() },
        FormatKind::PatternValues => ByteBreakdown { pattern_id: INDEX_BYTES, ..Default::default() },
    };
    Ok(FormatCost::from_breakdown(format, b, 2.0 * nnz))
}

/// How input-vector reads are charged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XTraffic {
    #[default]
    Ignored,
    /// Each `x` element is fetched from memory once per product.
    CacheResident,
    /// Every nonzero fetches its `x` element from memory.
    NoReuse,
}

/// Adds input-vector bytes to a cost for rows of `row_nnz` entries.
pub fn with_x_traffic(cost: FormatCost, mode: XTraffic, row_nnz: f64) -> FormatCost {
    let mut b = cost.breakdown;
    b.vector = match mode {
        XTraffic::Ignored => 0.0,
        XTraffic::CacheResident => VALUE_BYTES,
        XTraffic::NoReuse => VALUE_BYTES * row_nnz,
    };
    FormatCost::from_breakdown(cost.format, b, cost.flops_per_row)
}

/// Memory read rate (bytes/s) needed to sustain `flops` on a format.
pub fn required_bandwidth(flops: f64, cost: &FormatCost) -> f64 {
    flops * cost.bytes_per_flop
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineSpec {
    /// Sustained memory read bandwidth in bytes per second.
    pub read_bandwidth: f64,
    /// Peak floating-point rate in flops per second, if known.
    #[serde(default)]
    pub peak_flops: Option<f64>,
}

impl MachineSpec {
    pub fn new(read_bandwidth: f64, peak_flops: Option<f64>) -> Result<Self> {
        if !(read_bandwidth > 0.0 && read_bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("read bandwidth {read_bandwidth} must be positive")));
        }
        if peak_flops.is_some_and(|p| p.is_nan() || p <= 0.0) {
            return Err(Error::InvalidArgument("peak flops must be positive".into()));
        }
        Ok(Self { read_bandwidth, peak_flops })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    /// Reads a machine file, re-checking its invariants.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let spec: Self = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        Self::new(spec.read_bandwidth, spec.peak_flops)
    }

    /// One PEZY-SC chip: 75 GB/s measured read bandwidth, 1024 cores issuing
    /// one double-precision multiply-add per cycle at 733 MHz.
    pub fn pezy_sc() -> Self {
        Self { read_bandwidth: 75e9, peak_flops: Some(1024.0 * 733e6 * 2.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitingResource {
    Bandwidth,
    Compute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RooflineEstimate {
    pub predicted_flops: f64,
    pub limiting_resource: LimitingResource,
}

pub fn roofline(cost: &FormatCost, machine: &MachineSpec) -> RooflineEstimate {
    let bandwidth_bound = machine.read_bandwidth / cost.bytes_per_flop;
    match machine.peak_flops {
        Some(peak) if peak < bandwidth_bound => {
            RooflineEstimate { predicted_flops: peak, limiting_resource: LimitingResource::Compute }
        }
        _ => RooflineEstimate { predicted_flops: bandwidth_bound, limiting_resource: LimitingResource::Bandwidth },
    }
}

/// Byte audit of a concrete structure.
///
/// Counts the stored array payload (values, column indices, group ends,
/// pattern ids and pattern tables) divided by the row count. File framing and
/// the value table itself are not counted: the table has at most a few
/// hundred entries regardless of matrix size.
pub trait MeasuredCost {
    fn measured_cost(&self) -> FormatCost;
}

fn per_row(total_bytes: usize, n: usize) -> f64 {
    total_bytes as f64 / n.max(1) as f64
}

fn flops_per_row(nnz: usize, n: usize) -> f64 {
    2.0 * nnz as f64 / n.max(1) as f64
}

impl MeasuredCost for EllMatrix {
    fn measured_cost(&self) -> FormatCost {
        let slots = self.values().len();
        let b = ByteBreakdown {
            values: per_row(slots * 8, self.n()),
            indices: per_row(slots * 4, self.n()),
            ..Default::default()
        };
        FormatCost::from_breakdown(FormatKind::Ell, b, flops_per_row(self.nnz(), self.n()))
    }
}

impl MeasuredCost for VtCompressedMatrix {
    fn measured_cost(&self) -> FormatCost {
        let b = ByteBreakdown {
            indices: per_row(self.nnz() * 4, self.n()),
            ends: per_row(self.all_ends().len() * 4, self.n()),
            ..Default::default()
        };
        FormatCost::from_breakdown(FormatKind::Vt, b, flops_per_row(self.nnz(), self.n()))
    }
}

impl MeasuredCost for PatternCompressedMatrix {
    fn measured_cost(&self) -> FormatCost {
        let pats = self.patterns();
        // offsets (count + 1), displacements and folded ends
        let table_words = pats.len()
            + 1
            + pats
                .iter()
                .map(|p| p.displacements.len() + p.ends.as_ref().map_or(0, Vec::len))
                .sum::<usize>();
        let b = ByteBreakdown {
            pattern_id: per_row(self.row_pattern().len() * 4, self.n()),
            ends: per_row(self.all_row_ends().len() * 4, self.n()),
            tables: per_row(table_words * 4, self.n()),
            ..Default::default()
        };
        let kind = if self.values_in_pattern() { FormatKind::PatternValues } else { FormatKind::Pattern };
        FormatCost::from_breakdown(kind, b, flops_per_row(self.nnz(), self.n()))
    }
}

/// One line of the roofline table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub format: FormatKind,
    pub bytes_per_row: f64,
    pub bytes_per_flop: f64,
    pub predicted_gflops: f64,
    pub limiting_resource: LimitingResource,
}

impl ModelRow {
    pub fn new(cost: &FormatCost, machine: &MachineSpec) -> Self {
        let est = roofline(cost, machine);
        Self {
            format: cost.format,
            bytes_per_row: cost.bytes_per_row,
            bytes_per_flop: cost.bytes_per_flop,
            predicted_gflops: est.predicted_flops / 1e9,
            limiting_resource: est.limiting_resource,
        }
    }
}

/// Roofline predictions for interior rows of `row_nnz` entries.
pub fn model_table(
    machine: &MachineSpec,
    formats: &[FormatKind],
    row_nnz: usize,
    table_size: usize,
    x_traffic: XTraffic,
) -> Result<Vec<ModelRow>> {
    formats
        .iter()
        .map(|&f| {
            let cost = with_x_traffic(format_cost(f, row_nnz, table_size)?, x_traffic, row_nnz as f64);
            Ok(ModelRow::new(&cost, machine))
        })
        .collect()
}

/// CSV with columns `format,bytes_per_row,bytes_per_flop,predicted_gflops,limiting_resource`.
pub fn write_model_csv<W: Write>(rows: &[ModelRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_model_json<W: Write>(rows: &[ModelRow], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)?;
    Ok(())
}
