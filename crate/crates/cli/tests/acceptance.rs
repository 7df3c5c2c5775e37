//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! fails at the end if any criterion failed.
//!
//! Run with `cargo test -p sparsetab-cli --test acceptance -- --nocapture`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sparsetab::formats::{compress_patterns, compress_values, to_ell};
use sparsetab::kernels::{spmv_ell, spmv_pattern, spmv_vt};
use sparsetab::perf_model::{format_cost, required_bandwidth, FormatKind, MeasuredCost};
use sparsetab::solver::{cg_solve, Backend, CgConfig, Preconditioner};
use sparsetab::wire::Wire;
use sparsetab::{generate_matrix, GridSpec, StencilMatrix};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsetab"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Neighbors of node `(x, y, z)` inside the grid, itself included.
fn neighbors(s: GridSpec, x: usize, y: usize, z: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (a, b, c) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                if (0..s.nx as i64).contains(&a) && (0..s.ny as i64).contains(&b) && (0..s.nz as i64).contains(&c) {
                    out.push(a as usize + s.nx * (b as usize + s.ny * c as usize));
                }
            }
        }
    }
    out
}

/// Row-major dense copy of the stencil operator built from node adjacency.
fn dense(s: GridSpec) -> Vec<Vec<f64>> {
    let n = s.nx * s.ny * s.nz;
    let mut a = vec![vec![0.0; n]; n];
    for z in 0..s.nz {
        for y in 0..s.ny {
            for x in 0..s.nx {
                let i = x + s.nx * (y + s.ny * z);
                for j in neighbors(s, x, y, z) {
                    a[i][j] = if i == j { 26.0 } else { -1.0 };
                }
            }
        }
    }
    a
}

fn c1_byte_accounting() -> Outcome {
    let want = [(FormatKind::Ell, 324.0), (FormatKind::Vt, 116.0), (FormatKind::Pattern, 12.0), (FormatKind::PatternValues, 4.0)];
    let mut got = Vec::new();
    for (f, w) in want {
        let b = format_cost(f, 27, 2).map_err(|e| e.to_string())?.bytes_per_row;
        ensure(b == w, || format!("{f}: {b} != {w}"))?;
        got.push(format!("{f}={b}"));
    }
    Ok(got.join(" "))
}

fn c2_roofline() -> Outcome {
    let out = bin().args(["model", "--bandwidth", "75"]).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("model exited {}", out.status))?;
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let mut gf = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        gf.insert(rec[0].to_string(), rec[3].parse::<f64>().map_err(|e| e.to_string())?);
    }
    let get = |k: &str| gf.get(k).copied().ok_or_else(|| format!("missing row {k}"));
    let (ell, vt, pat) = (get("ell")?, get("vt")?, get("pattern")?);
    ensure(ell == 12.5, || format!("ell {ell} != 12.5"))?;
    ensure(rel(vt, 34.8) <= 0.01, || format!("vt {vt} not within 1% of 34.8"))?;
    ensure(rel(pat, 326.0) <= 0.05, || format!("pattern {pat} not within 5% of 326"))?;
    Ok(format!("ell={ell} vt={vt:.2} pattern={pat}"))
}

fn c3_required_bandwidth() -> Outcome {
    let cost = format_cost(FormatKind::Ell, 27, 2).map_err(|e| e.to_string())?;
    let bw = required_bandwidth(11.6e9, &cost);
    ensure(rel(bw, 69.6e9) <= 1e-12, || format!("{bw} != 69.6e9"))?;
    ensure(rel(bw, 70e9) <= 0.01, || format!("{bw} not within 1% of 70e9"))?;
    Ok(format!("{:.1} GB/s", bw / 1e9))
}

fn c4_lossless() -> Outcome {
    let t = Instant::now();
    let mut count = 0;
    for nz in 1..=6 {
        for ny in 1..=6 {
            for nx in 1..=6 {
                let m = generate_matrix(GridSpec::new(nx, ny, nz).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
                let tag = format!("{nx}x{ny}x{nz}");
                let back = compress_values(&m).and_then(|c| c.decompress()).map_err(|e| format!("{tag} vt: {e}"))?;
                ensure(back == m, || format!("{tag}: vt round trip differs"))?;
                for folded in [false, true] {
                    let back = compress_patterns(&m, folded)
                        .and_then(|c| c.decompress())
                        .map_err(|e| format!("{tag} pattern: {e}"))?;
                    ensure(back == m, || format!("{tag}: pattern (folded={folded}) round trip differs"))?;
                }
                count += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{count} grids in {secs:.2} s"))
}

fn c5_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for case in 0..25 {
        let s = GridSpec::new(rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=6)).map_err(|e| e.to_string())?;
        let m = generate_matrix(s).map_err(|e| e.to_string())?;
        let n = m.n();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = dense(s);
        let want: Vec<f64> = a.iter().map(|r| r.iter().zip(&x).map(|(a, x)| a * x).sum()).collect();
        let mag: Vec<f64> = a.iter().map(|r| r.iter().zip(&x).map(|(a, x)| (a * x).abs()).sum()).collect();
        let e = |err: sparsetab::Error| err.to_string();
        let ell = spmv_ell(&to_ell(&m), &x).map_err(e)?;
        let vt = spmv_vt(&compress_values(&m).map_err(e)?, &x).map_err(e)?;
        let pat = spmv_pattern(&compress_patterns(&m, false).map_err(e)?, &x).map_err(e)?;
        let fold = spmv_pattern(&compress_patterns(&m, true).map_err(e)?, &x).map_err(e)?;
        for (name, y) in [("vt", &vt), ("pattern", &pat), ("pattern-values", &fold)] {
            for i in 0..n {
                for (what, r) in [("oracle", want[i]), ("ell", ell[i])] {
                    let d = (y[i] - r).abs() / y[i].abs().max(r.abs()).max(mag[i]).max(f64::MIN_POSITIVE);
                    worst = worst.max(d);
                    ensure(d <= 1e-13, || format!("case {case} {s:?} {name} vs {what} row {i}: {} vs {r}", y[i]))?;
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!("25 cases, max deviation {worst:.1e}"))
}

fn c6_pattern_bound() -> Outcome {
    let mut grids: Vec<(usize, usize, usize)> = Vec::new();
    for nz in 1..=6 {
        for ny in 1..=6 {
            for nx in 1..=6 {
                grids.push((nx, ny, nz));
            }
        }
    }
    grids.extend([(7, 9, 5), (12, 4, 10), (16, 16, 16)]);
    for (nx, ny, nz) in grids {
        let m = generate_matrix(GridSpec::new(nx, ny, nz).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let want = nx.min(3) * ny.min(3) * nz.min(3);
        for folded in [false, true] {
            let got = compress_patterns(&m, folded).map_err(|e| e.to_string())?.pattern_count();
            ensure(got == want, || format!("{nx}x{ny}x{nz} folded={folded}: {got} != {want}"))?;
            if nx.min(ny).min(nz) >= 4 {
                ensure(got == 27, || format!("{nx}x{ny}x{nz}: {got} != 27"))?;
            }
        }
    }
    Ok("219 grids".into())
}

fn c7_sample_row() -> Outcome {
    let row = vec![(45u32, -1.0), (49, -1.0), (50, 26.0), (51, -1.0), (65, -1.0)];
    let m = StencilMatrix::from_rows(66, (0..66).map(|i| if i == 50 { row.clone() } else { vec![] }))
        .map_err(|e| e.to_string())?;
    let vt = compress_values(&m).map_err(|e| e.to_string())?;
    ensure(vt.table().entries() == [-1.0, 26.0], || format!("table {:?}", vt.table().entries()))?;
    ensure(vt.sorted_columns(50) == [45, 49, 51, 65, 50], || format!("S {:?}", vt.sorted_columns(50)))?;
    ensure(vt.ends(50) == [4, 5], || format!("ends {:?}", vt.ends(50)))?;
    let pc = compress_patterns(&m, false).map_err(|e| e.to_string())?;
    let p = pc.pattern_of(50).map_err(|e| e.to_string())?;
    ensure(p.displacements == [-5, -1, 1, 15, 0], || format!("displacements {:?}", p.displacements))?;
    ensure(pc.ends_of(50, p) == [4, 5], || format!("pattern ends {:?}", pc.ends_of(50, p)))?;
    Ok("table [-1, 26], S [45 49 51 65 50], ends [4, 5], d [-5 -1 1 15 0]".into())
}

fn c8_solver() -> Outcome {
    let t = Instant::now();
    let s = GridSpec::cube(16).map_err(|e| e.to_string())?;
    let m = generate_matrix(s).map_err(|e| e.to_string())?;
    // A·1 row by row: 26 minus the number of neighbors
    let mut b = vec![0.0; m.n()];
    for z in 0..16 {
        for y in 0..16 {
            for x in 0..16 {
                b[x + 16 * (y + 16 * z)] = 27.0 - neighbors(s, x, y, z).len() as f64;
            }
        }
    }
    let mut runs = Vec::new();
    for backend in [Backend::Ell, Backend::Vt, Backend::Pattern] {
        let cfg = CgConfig { max_iterations: 500, tolerance: 1e-8, preconditioner: Preconditioner::None, spmv_backend: backend };
        let (x, rep) = cg_solve(&m, &b, &cfg).map_err(|e| format!("{backend}: {e}"))?;
        let res = rep.final_relative_residual();
        ensure(rep.converged && res <= 1e-8, || format!("{backend}: residual {res:e}"))?;
        let err = x.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-6, || format!("{backend}: max |x - 1| = {err:e}"))?;
        runs.push((backend, rep.iterations, x));
    }
    let (_, it0, x0) = &runs[0];
    for (backend, it, x) in &runs[1..] {
        ensure(it == it0, || format!("{backend}: {it} iterations vs {it0}"))?;
        let d = x.iter().zip(x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(d <= 1e-9, || format!("{backend}: solutions differ by {d:e}"))?;
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{it0} iterations on every backend, {secs:.2} s"))
}

fn c9_bench(dir: &Path) -> Outcome {
    let matrix = dir.join("m.bin");
    let m = generate_matrix(GridSpec::cube(24).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    m.save(&matrix).map_err(|e| e.to_string())?;
    let audit = [
        to_ell(&m).measured_cost().bytes_per_row,
        compress_values(&m).map_err(|e| e.to_string())?.measured_cost().bytes_per_row,
        compress_patterns(&m, false).map_err(|e| e.to_string())?.measured_cost().bytes_per_row,
        compress_patterns(&m, true).map_err(|e| e.to_string())?.measured_cost().bytes_per_row,
    ];
    let mut bytes = Vec::new();
    let mut gflops = Vec::new();
    for (k, f) in ["ell", "vt", "pattern", "pattern-values"].into_iter().enumerate() {
        let out = bin()
            .args(["bench", "--matrix"])
            .arg(&matrix)
            .args(["--format", f, "--reps", "5", "--out", "json"])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{f}: bench exited {}", out.status))?;
        let r: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        let num = |key: &str| r[key].as_f64().ok_or_else(|| format!("{f}: missing {key}"));
        let dev = num("max_deviation")?;
        ensure(dev <= 1e-13, || format!("{f}: deviation {dev:e}"))?;
        let bpr = num("bytes_per_row")?;
        ensure(bpr == audit[k], || format!("{f}: report {bpr} vs audit {}", audit[k]))?;
        bytes.push(bpr);
        gflops.push(num("achieved_gflops")?);
    }
    ensure(bytes.windows(2).all(|w| w[0] > w[1]), || format!("bytes per row not decreasing: {bytes:?}"))?;
    let speedups: Vec<String> = gflops.iter().map(|g| format!("{:.2}x", g / gflops[0])).collect();
    Ok(format!(
        "bytes/row {:.1} > {:.1} > {:.2} > {:.2}; speedup vs ell (informational) {}",
        bytes[0],
        bytes[1],
        bytes[2],
        bytes[3],
        speedups.join(" ")
    ))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("byte accounting 324/116/12/4", Box::new(c1_byte_accounting)),
        ("roofline table at 75 GB/s", Box::new(c2_roofline)),
        ("required bandwidth for 11.6 GF on ELL", Box::new(c3_required_bandwidth)),
        ("lossless compression on all grids up to 6^3", Box::new(c4_lossless)),
        ("kernels match dense oracle and ELL", Box::new(c5_oracle)),
        ("pattern table size", Box::new(c6_pattern_bound)),
        ("worked example row", Box::new(c7_sample_row)),
        ("CG agrees across backends on 16^3", Box::new(c8_solver)),
        ("bench byte ordering with verified reports", Box::new(move || c9_bench(dir.path()))),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] {} {name}: {detail}", k + 1),
            Err(why) => {
                println!("[FAIL] {} {name}: {why}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
