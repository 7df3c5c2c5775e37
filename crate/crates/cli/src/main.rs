use std::env;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sparsetab::bench::{calibrate, run_bench, write_bench_csv, BenchConfig, CalibrateOptions};
use sparsetab::perf_model::{model_table, write_model_csv, write_model_json, FormatKind, MachineSpec, XTraffic};
use sparsetab::solver::{cg_solve, Backend, CgConfig, Preconditioner};
use sparsetab::stencil::market::write_matrix_market;
use sparsetab::wire::Wire;
use sparsetab::{generate_matrix, Error, GridSpec, StencilMatrix};

/// Directory that receives copies of bench and solve reports, and the default
/// location of the calibration file.
const REPORT_DIR_ENV: &str = "SPARSETAB_REPORT_DIR";

#[derive(Parser)]
#[command(name = "sparsetab", version, about = "Table-compressed SpMV: generate, bench, solve, model, calibrate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a 27-point stencil matrix and write it in binary form.
    Generate {
        #[arg(long, required = true, num_args = 3, value_names = ["NX", "NY", "NZ"])]
        grid: Vec<usize>,
        #[arg(long, default_value = "matrix.bin")]
        out: PathBuf,
        /// Also export a Matrix Market coordinate file.
        #[arg(long)]
        mtx: Option<PathBuf>,
    },
    /// Time SpMV in one format after verifying it against ELL.
    Bench {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Ell)]
        format: FormatArg,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        out: ReportFormat,
        /// Machine file from `calibrate`; defaults to one PEZY-SC chip.
        #[arg(long)]
        machine: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Solve A x = A·1 with CG and print the report as JSON.
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_enum, default_value_t = BackendArg::Ell)]
        backend: BackendArg,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        /// `none`, `symgs` or `symgs:<sweeps>`.
        #[arg(long, default_value = "none", value_parser = parse_precond)]
        precond: Preconditioner,
    },
    /// Print the roofline table for full-width rows.
    Model {
        /// Read bandwidth in GB/s.
        #[arg(long, default_value_t = 75.0)]
        bandwidth: f64,
        #[arg(long)]
        peak_gflops: Option<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [FormatArg::Ell, FormatArg::Vt, FormatArg::Pattern, FormatArg::PatternValues])]
        formats: Vec<FormatArg>,
        #[arg(long, default_value_t = 27)]
        row_nnz: usize,
        #[arg(long, default_value_t = 2)]
        table_size: usize,
        #[arg(long, value_enum, default_value_t = XTrafficArg::Ignored)]
        x_traffic: XTrafficArg,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        out: ReportFormat,
    },
    /// Measure host read bandwidth and write a machine file.
    Calibrate {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        size_mb: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Ell,
    Vt,
    Pattern,
    PatternValues,
}

impl From<FormatArg> for FormatKind {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Ell => FormatKind::Ell,
            FormatArg::Vt => FormatKind::Vt,
            FormatArg::Pattern => FormatKind::Pattern,
            FormatArg::PatternValues => FormatKind::PatternValues,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Ell,
    Vt,
    Pattern,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Ell => Backend::Ell,
            BackendArg::Vt => Backend::Vt,
            BackendArg::Pattern => Backend::Pattern,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum XTrafficArg {
    Ignored,
    CacheResident,
    NoReuse,
}

impl From<XTrafficArg> for XTraffic {
    fn from(x: XTrafficArg) -> Self {
        match x {
            XTrafficArg::Ignored => XTraffic::Ignored,
            XTrafficArg::CacheResident => XTraffic::CacheResident,
            XTrafficArg::NoReuse => XTraffic::NoReuse,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    fn ext(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

fn parse_precond(s: &str) -> Result<Preconditioner, String> {
    match s.split_once(':') {
        None if s == "none" => Ok(Preconditioner::None),
        None if s == "symgs" => Ok(Preconditioner::SymGs { sweeps: 1 }),
        Some(("symgs", n)) => match n.parse() {
            Ok(sweeps) if sweeps > 0 => Ok(Preconditioner::SymGs { sweeps }),
            _ => Err(format!("bad sweep count `{n}`")),
        },
        _ => Err(format!("unknown preconditioner `{s}` (none, symgs, symgs:<n>)")),
    }
}

/// Failure with the process exit code it maps to.
enum Failure {
    /// Exit 1: verification, convergence or I/O failures.
    Run(String),
    /// Exit 2: invalid input.
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Sizing(_) | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn report_dir() -> Option<PathBuf> {
    env::var_os(REPORT_DIR_ENV).map(PathBuf::from)
}

/// Writes `body` to stdout and, when the report directory is set, to `name` there.
fn emit(body: &[u8], name: &str) -> Result<(), Failure> {
    let mut stdout = io::stdout().lock();
    stdout.write_all(body)?;
    stdout.flush()?;
    if let Some(dir) = report_dir() {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn load_matrix(path: &Path) -> Result<StencilMatrix, Failure> {
    StencilMatrix::load(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { grid, out, mtx } => {
            let spec = GridSpec::new(grid[0], grid[1], grid[2])?;
            let m = generate_matrix(spec)?;
            m.save(&out)?;
            if let Some(path) = mtx {
                write_matrix_market(&m, BufWriter::new(File::create(path)?))?;
            }
            eprintln!("wrote {} rows, {} nonzeros to {}", m.n(), m.nnz(), out.display());
            Ok(())
        }
        Command::Bench { matrix, format, reps, threads, out, machine, seed } => {
            let m = load_matrix(&matrix)?;
            let machine = match machine {
                Some(path) => MachineSpec::load(path)?,
                None => MachineSpec::pezy_sc(),
            };
            let cfg = BenchConfig { format: format.into(), repetitions: reps, threads, seed, machine };
            let report = run_bench(&m, &cfg)?;
            let mut body = Vec::new();
            match out {
                ReportFormat::Json => {
                    serde_json::to_writer_pretty(&mut body, &report)?;
                    body.push(b'\n');
                }
                ReportFormat::Csv => write_bench_csv(&[report], &mut body)?,
            }
            emit(&body, &format!("bench-{}.{}", cfg.format, out.ext()))
        }
        Command::Solve { matrix, backend, tol, max_iter, precond } => {
            let m = load_matrix(&matrix)?;
            let cfg = CgConfig {
                max_iterations: max_iter,
                tolerance: tol,
                preconditioner: precond,
                spmv_backend: backend.into(),
            };
            cfg.validate()?;
            let b = cfg.spmv_backend.build(&m)?.spmv(&vec![1.0; m.n()])?;
            let (_, report) = cg_solve(&m, &b, &cfg)?;
            let mut body = serde_json::to_vec_pretty(&report)?;
            body.push(b'\n');
            emit(&body, &format!("solve-{}.json", cfg.spmv_backend))?;
            if report.converged {
                Ok(())
            } else {
                Err(Failure::Run(format!(
                    "not converged after {} iterations (relative residual {:e})",
                    report.iterations,
                    report.final_relative_residual()
                )))
            }
        }
        Command::Model { bandwidth, peak_gflops, formats, row_nnz, table_size, x_traffic, out } => {
            let machine = MachineSpec::new(bandwidth * 1e9, peak_gflops.map(|p| p * 1e9))?;
            let formats: Vec<FormatKind> = formats.into_iter().map(Into::into).collect();
            let rows = model_table(&machine, &formats, row_nnz, table_size, x_traffic.into())?;
            let stdout = io::stdout().lock();
            match out {
                ReportFormat::Csv => write_model_csv(&rows, stdout)?,
                ReportFormat::Json => write_model_json(&rows, stdout)?,
            }
            Ok(())
        }
        Command::Calibrate { out, size_mb, reps } => {
            let opts = CalibrateOptions { bytes: size_mb << 20, repetitions: reps };
            let spec = calibrate(&opts)?;
            let path = out.unwrap_or_else(|| report_dir().unwrap_or_default().join("machine.json"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            spec.save(&path)?;
            println!("{}", serde_json::to_string_pretty(&spec)?);
            eprintln!("read bandwidth {:.2} GB/s written to {}", spec.read_bandwidth / 1e9, path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
