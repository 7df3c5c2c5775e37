//! Matrix Market coordinate export and import.

use std::io::{BufRead, Write};

use super::StencilMatrix;
use crate::error::{Error, Result};

const SYMMETRIC_HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

/// Writes the lower triangle of a symmetric matrix with 1-based indices.
pub fn write_matrix_market<W: Write>(m: &StencilMatrix, mut out: W) -> Result<()> {
    if !m.is_symmetric() {
        return Err(Error::InvalidArgument(
            "symmetric Matrix Market export requires a symmetric matrix".into(),
        ));
    }
    let lower: Vec<_> = m.triples().filter(|&(i, j, _)| j <= i).collect();
    writeln!(out, "{SYMMETRIC_HEADER}")?;
    writeln!(out, "{} {} {}", m.n(), m.n(), lower.len())?;
    for (i, j, v) in lower {
        // `{:?}` prints the shortest representation that round-trips.
        writeln!(out, "{} {} {:?}", i + 1, j + 1, v)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a square `coordinate real` file, `general` or `symmetric`.
pub fn read_matrix_market<R: BufRead>(input: R) -> Result<StencilMatrix> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty Matrix Market file".into()))??;
    let fields: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::Format(format!("bad header line: {header}")));
    }
    if fields[2] != "coordinate" || fields[3] != "real" {
        return Err(Error::Format(format!("unsupported storage: {} {}", fields[2], fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::Format(format!("unsupported symmetry: {other}"))),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::new();
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parse_err = || Error::Format(format!("malformed line: {line}"));
        let mut it = line.split_whitespace();
        match size {
            None => {
                let mut next = || -> Result<usize> {
                    it.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)
                };
                let (r, c, nnz) = (next()?, next()?, next()?);
                if r != c {
                    return Err(Error::Format(format!("matrix is {r}x{c}, not square")));
                }
                rows = vec![Vec::new(); r];
                size = Some((r, nnz));
            }
            Some((n, _)) => {
                let i: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
                let j: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
                let v: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(Error::Format(format!("index out of range: {line}")));
                }
                rows[i - 1].push((j as u32 - 1, v));
                if symmetric && i != j {
                    rows[j - 1].push((i as u32 - 1, v));
                }
                seen += 1;
            }
        }
    }
    let (n, nnz) = size.ok_or_else(|| Error::Format("missing size line".into()))?;
    if seen != nnz {
        return Err(Error::Format(format!("expected {nnz} entries, found {seen}")));
    }
    for row in &mut rows {
        row.sort_by_key(|&(c, _)| c);
    }
    StencilMatrix::from_rows(n, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::{generate_matrix, GridSpec};

    #[test]
    fn export_then_import_is_identity() {
        let m = generate_matrix(GridSpec::new(3, 2, 2).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n12 12 "));
        assert!(text.contains("\n1 1 26.0\n"));
        let back = read_matrix_market(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn reads_general_files() {
        let text = "%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 2 3.5\n2 1 -1\n";
        let m = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.get(0, 1), Some(3.5));
        assert_eq!(m.get(1, 0), Some(-1.0));
        assert_eq!(m.get(0, 0), None);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_matrix_market("".as_bytes()).is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err());
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n";
        assert!(read_matrix_market(short.as_bytes()).is_err());
        let oob = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n";
        assert!(read_matrix_market(oob.as_bytes()).is_err());
    }
}
