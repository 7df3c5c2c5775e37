//! Preconditioned conjugate gradients with a swappable SpMV backend.
//!
//! One iteration performs the single-level HPCG operation sequence: a
//! preconditioner application, three dot products, three `waxpby` updates and
//! one SpMV. Convergence is declared when `‖r‖₂ / ‖b‖₂ <= tolerance`.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::formats::{compress_patterns, compress_values, to_ell};
use crate::kernels::{dot, symgs_flops, SpmvOperator, SymGs};
use crate::StencilMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Ell,
    Vt,
    Pattern,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Ell, Backend::Vt, Backend::Pattern];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Ell => "ell",
            Backend::Vt => "vt",
            Backend::Pattern => "pattern",
        }
    }

    /// Builds this backend's storage for `m`.
    pub fn build(self, m: &StencilMatrix) -> Result<Box<dyn SpmvOperator>> {
        Ok(match self {
            Backend::Ell => Box::new(to_ell(m)),
            Backend::Vt => Box::new(compress_values(m)?),
            Backend::Pattern => Box::new(compress_patterns(m, false)?),
        })
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown backend `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Preconditioner {
    None,
    /// `sweeps` symmetric Gauss–Seidel sweeps from a zero initial guess.
    SymGs { sweeps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub preconditioner: Preconditioner,
    pub spmv_backend: Backend,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
            preconditioner: Preconditioner::None,
            spmv_backend: Backend::Ell,
        }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidArgument(format!("tolerance {} must be positive", self.tolerance)));
        }
        if let Preconditioner::SymGs { sweeps: 0 } = self.preconditioner {
            return Err(Error::InvalidArgument("SymGS preconditioner needs at least one sweep".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionStats {
    pub calls: u64,
    pub flops: u64,
    pub seconds: f64,
}

impl SectionStats {
    fn record(&mut self, flops: u64, started: Instant) {
        self.calls += 1;
        self.flops += flops;
        self.seconds += started.elapsed().as_secs_f64();
    }
}

/// Per-operation cost of a solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Sections {
    pub spmv: SectionStats,
    pub symgs: SectionStats,
    pub dot: SectionStats,
    pub waxpby: SectionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub backend: Backend,
    pub iterations: usize,
    /// `‖r_k‖₂ / ‖b‖₂` for `k = 0..=iterations`.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub flops_total: u64,
    pub sections: Sections,
}

impl CgReport {
    pub fn final_relative_residual(&self) -> f64 {
        *self.residual_history.last().expect("history starts with the initial residual")
    }
}

/// Analytic flop count of a solve that ran `iterations` iterations.
pub fn expected_flops(m: &StencilMatrix, cfg: &CgConfig, iterations: usize) -> u64 {
    let n = m.n() as u64;
    let precond = match cfg.preconditioner {
        Preconditioner::None => 0,
        Preconditioner::SymGs { sweeps } => sweeps as u64 * symgs_flops(m),
    };
    // ‖b‖ once, then SpMV + preconditioner + 3 waxpby + 3 dot per iteration
    2 * n + iterations as u64 * (2 * m.nnz() as u64 + precond + 6 * n + 6 * n)
}

/// Solves `m x = b` from `x = 0`, using `cfg.spmv_backend` for every SpMV.
pub fn cg_solve(m: &StencilMatrix, b: &[f64], cfg: &CgConfig) -> Result<(Vec<f64>, CgReport)> {
    cfg.validate()?;
    let op = cfg.spmv_backend.build(m)?;
    cg_solve_with(m, op.as_ref(), b, cfg)
}

/// Like [`cg_solve`] with a prebuilt SpMV operator for `m`.
pub fn cg_solve_with(
    m: &StencilMatrix,
    op: &dyn SpmvOperator,
    b: &[f64],
    cfg: &CgConfig,
) -> Result<(Vec<f64>, CgReport)> {
    cfg.validate()?;
    let n = m.n();
    check_len(n, b.len())?;
    check_len(n, op.n())?;
    let symgs = match cfg.preconditioner {
        Preconditioner::SymGs { .. } => Some(SymGs::new(m)?),
        Preconditioner::None => None,
    };
    let vec_flops = 2 * n as u64;
    let mut sec = Sections::default();

    let t = Instant::now();
    let normb = dot(b, b)?.sqrt();
    sec.dot.record(vec_flops, t);
    if !normb.is_finite() {
        return Err(Error::Divergence { iteration: 0, quantity: "right-hand side norm" });
    }
    if normb == 0.0 {
        return Err(Error::InvalidArgument("right-hand side is zero".into()));
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut history = vec![1.0];
    let mut converged = 1.0 <= cfg.tolerance;
    let mut rtz_old = 0.0;
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let k = iterations;

        match (&symgs, cfg.preconditioner) {
            (Some(gs), Preconditioner::SymGs { sweeps }) => {
                let t = Instant::now();
                z.fill(0.0);
                for _ in 0..sweeps {
                    gs.sweep(&mut z, &r)?;
                }
                sec.symgs.record(sweeps as u64 * symgs_flops(m), t);
            }
            _ => z.copy_from_slice(&r),
        }

        let t = Instant::now();
        let rtz = dot(&r, &z)?;
        sec.dot.record(vec_flops, t);

        let beta = if k == 1 { 0.0 } else { rtz / rtz_old };
        rtz_old = rtz;
        let t = Instant::now();
        scale_add(1.0, &z, beta, &mut p);
        sec.waxpby.record(vec_flops, t);

        let t = Instant::now();
        op.spmv_into(&p, &mut ap)?;
        sec.spmv.record(op.spmv_flops(), t);

        let t = Instant::now();
        let pap = dot(&p, &ap)?;
        sec.dot.record(vec_flops, t);
        let alpha = rtz / pap;
        if !alpha.is_finite() {
            return Err(Error::Divergence { iteration: k, quantity: "step length" });
        }

        let t = Instant::now();
        scale_add(alpha, &p, 1.0, &mut x);
        sec.waxpby.record(vec_flops, t);
        let t = Instant::now();
        scale_add(-alpha, &ap, 1.0, &mut r);
        sec.waxpby.record(vec_flops, t);

        let t = Instant::now();
        let normr = dot(&r, &r)?.sqrt();
        sec.dot.record(vec_flops, t);
        if !normr.is_finite() {
            return Err(Error::Divergence { iteration: k, quantity: "residual norm" });
        }
        let rel = normr / normb;
        history.push(rel);
        converged = rel <= cfg.tolerance;
    }

    let flops_total = sec.spmv.flops + sec.symgs.flops + sec.dot.flops + sec.waxpby.flops;
    let report = CgReport {
        backend: cfg.spmv_backend,
        iterations,
        residual_history: history,
        converged,
        flops_total,
        sections: sec,
    };
    Ok((x, report))
}

/// `w = alpha a + beta w`, counted as one waxpby.
fn scale_add(alpha: f64, a: &[f64], beta: f64, w: &mut [f64]) {
    for (wi, &ai) in w.iter_mut().zip(a) {
        *wi = alpha * ai + beta * *wi;
    }
}
