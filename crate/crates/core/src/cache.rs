//! On-disk caches for class groups and coefficient tables.
//!
//! Files are written once through a temporary name and renamed into place,
//! so a cache hit never rewrites a file and an interrupted run never leaves a
//! truncated one.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::engine::choose_n;
use crate::error::{Error, Result};
use crate::forms::{CharIndex, ClassGroup, Discriminant};
use crate::theta::{char_coeffs, stored_characters, CoeffTable, Normalization, RepTable};

/// Magic bytes of the coefficient file format.
pub const COEFF_MAGIC: &[u8; 4] = b"LFC1";

pub fn forms_path(dir: &Path, q: u64) -> PathBuf {
    dir.join(format!("forms_{q}.tsv"))
}

/// Ideal-normalized tables use the plain name; other normalizations get a
/// suffix so they never collide.
pub fn coeffs_path(dir: &Path, q: u64, digits: u32, normalization: Normalization) -> PathBuf {
    match normalization {
        Normalization::Ideal => dir.join(format!("coeffs_{q}_{digits}.bin")),
        other => dir.join(format!("coeffs_{q}_{digits}_{other}.bin")),
    }
}

/// Writes through a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(bytes)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads the class group of `-q` from `dir`, computing and storing it on a
/// miss.  The flag reports whether anything was computed.
pub fn load_or_build_forms(dir: &Path, q: u64) -> Result<(ClassGroup, bool)> {
    let path = forms_path(dir, q);
    if path.exists() {
        let g = ClassGroup::read_tsv(BufReader::new(File::open(&path)?))?;
        if g.discriminant().q() != q {
            return Err(Error::input(format!("{} holds a different discriminant", path.display())));
        }
        return Ok((g, false));
    }
    let g = ClassGroup::compute(Discriminant::new(q)?)?;
    let mut buf = Vec::new();
    g.write_tsv(&mut buf)?;
    write_atomic(&path, &buf)?;
    Ok((g, true))
}

/// Header of a coefficient file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoeffHeader {
    pub q: u64,
    pub digits: u32,
    pub n_max: u64,
    pub h: u64,
    pub invariant_factors: Vec<u64>,
    pub normalization: Normalization,
    /// Real characters are stored too.
    pub include_real: bool,
    pub rows: u64,
}

/// Serializes a table: magic, `q`, `D`, `N`, `h`, `r`, the invariant
/// factors, normalization code, real-character flag, row count, then per row
/// the `r` character coordinates followed by `N` little-endian doubles.
pub fn encode_coeffs(table: &CoeffTable, digits: u32, include_real: bool) -> Vec<u8> {
    let r = table.invariant_factors.len();
    let rows = table.rows();
    let mut out = Vec::with_capacity(64 + rows.len() * (4 * r + 8 * table.n_max));
    out.extend_from_slice(COEFF_MAGIC);
    out.extend_from_slice(&table.q.q().to_le_bytes());
    out.extend_from_slice(&digits.to_le_bytes());
    out.extend_from_slice(&(table.n_max as u64).to_le_bytes());
    out.extend_from_slice(&table.invariant_factors.iter().product::<u64>().to_le_bytes());
    out.extend_from_slice(&(r as u32).to_le_bytes());
    for m in &table.invariant_factors {
        out.extend_from_slice(&m.to_le_bytes());
    }
    out.push(table.normalization.code());
    out.push(u8::from(include_real));
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for (chi, row) in table.characters().iter().zip(rows) {
        for a in &chi.0 {
            out.extend_from_slice(&a.to_le_bytes());
        }
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::input(format!("coefficient file truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode_header(c: &mut Cursor) -> Result<CoeffHeader> {
    if c.take(4)? != COEFF_MAGIC {
        return Err(Error::input("not a coefficient file (bad magic)"));
    }
    let q = c.u64()?;
    let digits = c.u32()?;
    let n_max = c.u64()?;
    let h = c.u64()?;
    let r = c.u32()? as usize;
    let invariant_factors = (0..r).map(|_| c.u64()).collect::<Result<Vec<_>>>()?;
    let normalization = Normalization::from_code(c.u8()?)?;
    let include_real = match c.u8()? {
        0 => false,
        1 => true,
        f => return Err(Error::input(format!("bad stored-set flag {f}"))),
    };
    let rows = c.u64()?;
    if invariant_factors.iter().product::<u64>() != h {
        return Err(Error::input("invariant factors do not multiply to h"));
    }
    Ok(CoeffHeader { q, digits, n_max, h, invariant_factors, normalization, include_real, rows })
}

/// Parses a coefficient file produced by [`encode_coeffs`].
pub fn decode_coeffs(bytes: &[u8]) -> Result<(CoeffHeader, CoeffTable)> {
    let mut c = Cursor { bytes, pos: 0 };
    let hd = decode_header(&mut c)?;
    let n = usize::try_from(hd.n_max).map_err(|_| Error::input("N does not fit in memory"))?;
    let r = hd.invariant_factors.len();
    let per_row = 4 * r as u64 + 8 * hd.n_max;
    if per_row.checked_mul(hd.rows) != Some((bytes.len() - c.pos) as u64) {
        return Err(Error::input("coefficient file length does not match its header"));
    }
    let mut chars = Vec::with_capacity(hd.rows as usize);
    let mut rows = Vec::with_capacity(hd.rows as usize);
    for _ in 0..hd.rows {
        let chi = CharIndex((0..r).map(|_| c.u32()).collect::<Result<_>>()?);
        if chi.0.iter().zip(&hd.invariant_factors).any(|(&a, &m)| a as u64 >= m) {
            return Err(Error::input(format!("character {chi} out of range")));
        }
        let row = c.take(8 * n)?.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        chars.push(chi);
        rows.push(row);
    }
    let table = CoeffTable::from_rows(
        Discriminant::new(hd.q)?,
        n,
        hd.normalization,
        hd.invariant_factors.clone(),
        chars,
        rows,
    )?;
    Ok((hd, table))
}

pub fn read_coeffs(path: &Path) -> Result<(CoeffHeader, CoeffTable)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_coeffs(&bytes)
}

/// Outcome of [`load_or_build_coeffs`].
#[derive(Clone, Debug)]
pub struct CoeffCache {
    pub path: PathBuf,
    pub table: CoeffTable,
    /// The table was computed on this call.
    pub built: bool,
}

/// Loads the coefficient table for `(q, D, normalization)`, computing it on
/// a miss or when the cached one lacks requested real characters.
pub fn load_or_build_coeffs(
    dir: &Path,
    g: &ClassGroup,
    digits: u32,
    normalization: Normalization,
    include_real: bool,
) -> Result<CoeffCache> {
    let q = g.discriminant().q();
    let path = coeffs_path(dir, q, digits, normalization);
    let n_max = choose_n(q, digits);
    if path.exists() {
        let (hd, table) = read_coeffs(&path)?;
        let matches = hd.q == q
            && hd.digits == digits
            && hd.normalization == normalization
            && hd.n_max == n_max as u64
            && hd.invariant_factors == g.invariant_factors();
        if matches && (hd.include_real || !include_real) {
            return Ok(CoeffCache { path, table, built: false });
        }
        if !matches {
            return Err(Error::input(format!("{} does not match its key; remove it to rebuild", path.display())));
        }
    }
    let rep = RepTable::compute(g, n_max)?;
    let table = char_coeffs(g, &rep, normalization, digits, &stored_characters(g, include_real))?;
    write_atomic(&path, &encode_coeffs(&table, digits, include_real))?;
    Ok(CoeffCache { path, table, built: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_round_trip_and_idempotence() {
        let dir = tempfile::tempdir().unwrap();
        let (g, built) = load_or_build_forms(dir.path(), 10_000_088).unwrap();
        assert!(built);
        let (g2, built) = load_or_build_forms(dir.path(), 10_000_088).unwrap();
        assert!(!built);
        assert_eq!(g.forms(), g2.forms());

        let a = load_or_build_coeffs(dir.path(), &g, 6, Normalization::Ideal, false).unwrap();
        assert!(a.built);
        let first = fs::read(&a.path).unwrap();
        let b = load_or_build_coeffs(dir.path(), &g, 6, Normalization::Ideal, false).unwrap();
        assert!(!b.built);
        assert_eq!(first, fs::read(&b.path).unwrap());
        assert_eq!(a.table.characters(), b.table.characters());
        for (x, y) in a.table.rows().iter().zip(b.table.rows()) {
            assert!(x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
        assert_eq!(&first[..4], COEFF_MAGIC);
        let (hd, _) = decode_coeffs(&first).unwrap();
        assert_eq!((hd.q, hd.digits, hd.n_max, hd.h), (10_000_088, 6, choose_n(10_000_088, 6) as u64, g.class_number() as u64));

        // Asking for real characters upgrades the cache in place.
        let c = load_or_build_coeffs(dir.path(), &g, 6, Normalization::Ideal, true).unwrap();
        assert!(c.built);
        assert_eq!(c.table.characters().len(), a.table.characters().len() + 8);
    }

    #[test]
    fn malformed_files_are_input_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (g, _) = load_or_build_forms(dir.path(), 23).unwrap();
        let a = load_or_build_coeffs(dir.path(), &g, 4, Normalization::Lattice, true).unwrap();
        let bytes = fs::read(&a.path).unwrap();
        assert!(a.path.to_string_lossy().ends_with("coeffs_23_4_lattice.bin"));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_coeffs(&bad).unwrap_err().exit_code(), 2);
        assert_eq!(decode_coeffs(&bytes[..bytes.len() - 3]).unwrap_err().exit_code(), 2);
        assert_eq!(decode_coeffs(&bytes[..10]).unwrap_err().exit_code(), 2);
    }
}
