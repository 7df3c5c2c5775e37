//! Little-endian binary files for matrices in every storage format.
//!
//! A file starts with a 16-byte header: the magic `SPARSTAB`, a `u32` format
//! version and a `u32` kind tag. Fields follow in declaration order; scalars
//! are `u64`, and every array is a `u64` element count followed by its
//! elements. `docs/FORMAT.md` lists the field order per kind.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::formats::{EllMatrix, Pattern, PatternCompressedMatrix, ValueTable, VtCompressedMatrix};
use crate::stencil::{GridSpec, StencilMatrix};

pub const MAGIC: [u8; 8] = *b"SPARSTAB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 16;

/// Kind tag stored in the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Kind {
    Stencil = 1,
    Ell = 2,
    ValueTable = 3,
    Pattern = 4,
}

impl Kind {
    fn from_tag(tag: u32) -> Result<Self> {
        Ok(match tag {
            1 => Kind::Stencil,
            2 => Kind::Ell,
            3 => Kind::ValueTable,
            4 => Kind::Pattern,
            other => return Err(Error::Format(format!("unknown kind tag {other}"))),
        })
    }
}

/// Fixed-width little-endian element of a stored array.
pub trait Element: Copy {
    const SIZE: usize;
    fn put(self, out: &mut Vec<u8>);
    fn take(bytes: &[u8]) -> Self;
}

macro_rules! element {
    ($($t:ty),*) => {$(
        impl Element for $t {
            const SIZE: usize = std::mem::size_of::<$t>();
            fn put(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn take(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("element width"))
            }
        }
    )*};
}
element!(u32, i32, u64, f64);

struct Encoder<W: Write> {
    out: W,
    buf: Vec<u8>,
}

impl<W: Write> Encoder<W> {
    fn new(out: W, kind: Kind) -> Result<Self> {
        let mut enc = Self { out, buf: Vec::with_capacity(1 << 16) };
        enc.out.write_all(&MAGIC)?;
        enc.out.write_all(&VERSION.to_le_bytes())?;
        enc.out.write_all(&(kind as u32).to_le_bytes())?;
        Ok(enc)
    }

    fn scalar(&mut self, v: u64) -> Result<()> {
        self.out.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    fn array<T: Element>(&mut self, items: impl ExactSizeIterator<Item = T>) -> Result<()> {
        self.scalar(items.len() as u64)?;
        for item in items {
            item.put(&mut self.buf);
            if self.buf.len() >= 1 << 16 {
                self.out.write_all(&self.buf)?;
                self.buf.clear();
            }
        }
        self.out.write_all(&self.buf)?;
        self.buf.clear();
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

struct Decoder<R: Read> {
    input: R,
}

impl<R: Read> Decoder<R> {
    fn new(mut input: R, expected: Kind) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN as usize];
        input.read_exact(&mut header)?;
        if header[..8] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let kind = Kind::from_tag(u32::from_le_bytes(header[12..16].try_into().unwrap()))?;
        if kind != expected {
            return Err(Error::Format(format!("file holds {kind:?}, expected {expected:?}")));
        }
        Ok(Self { input })
    }

    fn scalar(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.input.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.scalar()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("value {v} does not fit usize")))
    }

    fn array<T: Element>(&mut self) -> Result<Vec<T>> {
        let len = self.usize()?;
        // grow with the data actually present so a corrupt length cannot
        // trigger a huge allocation up front
        const CHUNK: usize = 1 << 14;
        let mut out = Vec::with_capacity(len.min(CHUNK));
        let mut bytes = vec![0u8; CHUNK * T::SIZE];
        let mut left = len;
        while left > 0 {
            let take = left.min(CHUNK);
            let buf = &mut bytes[..take * T::SIZE];
            self.input.read_exact(buf)?;
            out.extend(buf.chunks_exact(T::SIZE).map(T::take));
            left -= take;
        }
        Ok(out)
    }

    fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.input.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::Format("trailing bytes after payload".into())),
        }
    }
}

/// A structure with a binary file representation.
pub trait Wire: Sized {
    const KIND: Kind;

    fn write_to<W: Write>(&self, out: W) -> Result<()>;

    fn read_from<R: Read>(input: R) -> Result<Self>;

    /// Exact size in bytes of the serialized form.
    fn serialized_len(&self) -> u64;

    fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::with_capacity(self.serialized_len() as usize);
        self.write_to(&mut buf)?;
        Ok(buf)
    }
}

fn array_len<T: Element>(count: usize) -> u64 {
    8 + (count * T::SIZE) as u64
}

impl Wire for StencilMatrix {
    const KIND: Kind = Kind::Stencil;

    fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut enc = Encoder::new(out, Self::KIND)?;
        enc.scalar(self.n() as u64)?;
        let g = self.grid();
        enc.scalar(u64::from(g.is_some()))?;
        let g = g.unwrap_or(GridSpec { nx: 0, ny: 0, nz: 0 });
        for v in [g.nx, g.ny, g.nz] {
            enc.scalar(v as u64)?;
        }
        enc.array(self.row_ptr().iter().map(|&p| p as u64))?;
        enc.array(self.columns().iter().copied())?;
        enc.array(self.values().iter().copied())?;
        enc.finish()
    }

    fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut dec = Decoder::new(input, Self::KIND)?;
        let n = dec.usize()?;
        let has_grid = dec.scalar()? != 0;
        let (nx, ny, nz) = (dec.usize()?, dec.usize()?, dec.usize()?);
        let row_ptr: Vec<u64> = dec.array()?;
        let cols: Vec<u32> = dec.array()?;
        let vals: Vec<f64> = dec.array()?;
        dec.finish()?;
        if row_ptr.len() != n + 1 || row_ptr.first() != Some(&0) {
            return Err(Error::Format("row pointer array does not match row count".into()));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) || row_ptr[n] as usize != cols.len() || cols.len() != vals.len() {
            return Err(Error::Format("inconsistent compressed-row arrays".into()));
        }
        let rows = row_ptr.windows(2).map(|w| {
            let r = w[0] as usize..w[1] as usize;
            cols[r.clone()].iter().copied().zip(vals[r].iter().copied()).collect::<Vec<_>>()
        });
        let m = StencilMatrix::from_rows(n, rows)?;
        let grid = if has_grid {
            let g = GridSpec::new(nx, ny, nz)?;
            if g.rows() != n {
                return Err(Error::Format(format!("grid {g:?} does not have {n} rows")));
            }
            Some(g)
        } else {
            None
        };
        Ok(m.with_grid(grid))
    }

    fn serialized_len(&self) -> u64 {
        HEADER_LEN
            + 5 * 8
            + array_len::<u64>(self.n() + 1)
            + array_len::<u32>(self.nnz())
            + array_len::<f64>(self.nnz())
    }
}

impl Wire for EllMatrix {
    const KIND: Kind = Kind::Ell;

    fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut enc = Encoder::new(out, Self::KIND)?;
        enc.scalar(self.n() as u64)?;
        enc.scalar(self.width() as u64)?;
        enc.array(self.values().iter().copied())?;
        enc.array(self.columns().iter().copied())?;
        enc.finish()
    }

    fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut dec = Decoder::new(input, Self::KIND)?;
        let (n, width) = (dec.usize()?, dec.usize()?);
        let values = dec.array()?;
        let columns = dec.array()?;
        dec.finish()?;
        EllMatrix::from_parts(n, width, values, columns)
    }

    fn serialized_len(&self) -> u64 {
        HEADER_LEN + 2 * 8 + array_len::<f64>(self.values().len()) + array_len::<u32>(self.columns().len())
    }
}

impl Wire for VtCompressedMatrix {
    const KIND: Kind = Kind::ValueTable;

    fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut enc = Encoder::new(out, Self::KIND)?;
        enc.scalar(self.n() as u64)?;
        enc.array(self.table().entries().iter().copied())?;
        enc.array(self.all_ends().iter().copied())?;
        enc.array(self.all_sorted_columns().iter().copied())?;
        enc.finish()
    }

    fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut dec = Decoder::new(input, Self::KIND)?;
        let n = dec.usize()?;
        let table = ValueTable::from_sorted(dec.array()?)?;
        let ends = dec.array()?;
        let cols = dec.array()?;
        dec.finish()?;
        VtCompressedMatrix::from_parts(n, table, ends, cols)
    }

    fn serialized_len(&self) -> u64 {
        HEADER_LEN
            + 8
            + array_len::<f64>(self.table().len())
            + array_len::<u32>(self.all_ends().len())
            + array_len::<u32>(self.nnz())
    }
}

impl Wire for PatternCompressedMatrix {
    const KIND: Kind = Kind::Pattern;

    fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut enc = Encoder::new(out, Self::KIND)?;
        enc.scalar(self.n() as u64)?;
        enc.scalar(u64::from(self.values_in_pattern()))?;
        enc.array(self.table().entries().iter().copied())?;
        let pats = self.patterns();
        let offsets = std::iter::once(0u32).chain(pats.iter().scan(0u32, |acc, p| {
            *acc += p.displacements.len() as u32;
            Some(*acc)
        }));
        enc.array(offsets.collect::<Vec<_>>().into_iter())?;
        enc.array(pats.iter().flat_map(|p| p.displacements.iter().copied()).collect::<Vec<_>>().into_iter())?;
        enc.array(
            pats.iter()
                .flat_map(|p| p.ends.iter().flatten().copied())
                .collect::<Vec<_>>()
                .into_iter(),
        )?;
        enc.array(self.row_pattern().iter().copied())?;
        enc.array(self.all_row_ends().iter().copied())?;
        enc.finish()
    }

    fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut dec = Decoder::new(input, Self::KIND)?;
        let n = dec.usize()?;
        let folded = match dec.scalar()? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("bad folding flag {other}"))),
        };
        let table = ValueTable::from_sorted(dec.array()?)?;
        let offsets: Vec<u32> = dec.array()?;
        let disps: Vec<i32> = dec.array()?;
        let pattern_ends: Vec<u32> = dec.array()?;
        let row_pattern = dec.array()?;
        let row_ends = dec.array()?;
        dec.finish()?;

        let count = offsets.len().checked_sub(1).ok_or_else(|| Error::Format("empty offset array".into()))?;
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) || offsets[count] as usize != disps.len() {
            return Err(Error::Format("inconsistent pattern offsets".into()));
        }
        let width = table.len();
        if pattern_ends.len() != if folded { count * width } else { 0 } {
            return Err(Error::Format("pattern ends do not match pattern count".into()));
        }
        let patterns = (0..count)
            .map(|p| Pattern {
                displacements: disps[offsets[p] as usize..offsets[p + 1] as usize].to_vec(),
                ends: folded.then(|| pattern_ends[p * width..(p + 1) * width].to_vec()),
            })
            .collect();
        PatternCompressedMatrix::from_parts(n, table, patterns, row_pattern, row_ends, folded)
    }

    fn serialized_len(&self) -> u64 {
        let pats = self.patterns();
        let disp: usize = pats.iter().map(|p| p.displacements.len()).sum();
        let ends: usize = pats.iter().map(|p| p.ends.as_ref().map_or(0, Vec::len)).sum();
        HEADER_LEN
            + 2 * 8
            + array_len::<f64>(self.table().len())
            + array_len::<u32>(pats.len() + 1)
            + array_len::<i32>(disp)
            + array_len::<u32>(ends)
            + array_len::<u32>(self.n())
            + array_len::<u32>(self.all_row_ends().len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{compress_patterns, compress_values, to_ell};
    use crate::stencil::generate_matrix;

    fn sample() -> StencilMatrix {
        generate_matrix(GridSpec::new(4, 3, 5).unwrap()).unwrap()
    }

    fn round_trip<T: Wire + PartialEq + std::fmt::Debug>(v: &T) {
        let bytes = v.to_bytes().unwrap();
        assert_eq!(bytes.len() as u64, v.serialized_len());
        assert_eq!(&bytes[..8], b"SPARSTAB");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), VERSION);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), T::KIND as u32);
        assert_eq!(&T::read_from(&bytes[..]).unwrap(), v);
    }

    #[test]
    fn every_kind_round_trips() {
        let m = sample();
        round_trip(&m);
        round_trip(&to_ell(&m));
        round_trip(&compress_values(&m).unwrap());
        round_trip(&compress_patterns(&m, false).unwrap());
        round_trip(&compress_patterns(&m, true).unwrap());
    }

    #[test]
    fn grid_metadata_survives() {
        let m = sample();
        let back = StencilMatrix::read_from(&m.to_bytes().unwrap()[..]).unwrap();
        assert_eq!(back.grid(), m.grid());
        let plain = m.clone().with_grid(None);
        let back = StencilMatrix::read_from(&plain.to_bytes().unwrap()[..]).unwrap();
        assert_eq!(back.grid(), None);
    }

    #[test]
    fn ell_file_size() {
        let ell = to_ell(&generate_matrix(GridSpec::cube(3).unwrap()).unwrap());
        // header, n, width, two length prefixes, 27 rows of 27 slots
        assert_eq!(ell.to_bytes().unwrap().len(), 16 + 16 + 16 + 27 * 27 * 12);
    }

    #[test]
    fn rejects_wrong_kind_magic_and_truncation() {
        let m = sample();
        let bytes = m.to_bytes().unwrap();
        assert!(matches!(EllMatrix::read_from(&bytes[..]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(StencilMatrix::read_from(&bad[..]), Err(Error::Format(_))));
        assert!(StencilMatrix::read_from(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(StencilMatrix::read_from(&long[..]).is_err());
    }

    #[test]
    fn corrupt_ends_fail_integrity_on_load() {
        let vt = compress_values(&sample()).unwrap();
        let mut bytes = vt.to_bytes().unwrap();
        // first end offset sits after header, n, table prefix + 2 values, ends prefix
        let pos = 16 + 8 + 8 + 16 + 8;
        bytes[pos..pos + 4].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(VtCompressedMatrix::read_from(&bytes[..]), Err(Error::Integrity(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = sample();
        m.save(&path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), m.serialized_len());
        assert_eq!(StencilMatrix::load(&path).unwrap(), m);
    }
}
