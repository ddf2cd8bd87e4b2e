//! Field snapshot container and CSV export.
//!
//! Container layout, all integers little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `SPDEFLD\0`                         |
//! | 4     | schema version (`u32`)                    |
//! | 1     | endianness tag, `1` = little-endian body  |
//! | 3     | reserved, zero                            |
//! | 8     | cutoff `N` (`u64`)                        |
//! | 8     | grid size `M` (`u64`)                     |
//! | 16·(2N+1)² | coefficients, `k1` outer, `k2` inner, `k` from `-N` to `N`, each as `re, im` `f64` |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;

use super::{to_grid, FourierField};
use crate::error::{Result, SpdeError};

pub const CONTAINER_MAGIC: [u8; 8] = *b"SPDEFLD\0";
pub const CONTAINER_VERSION: u32 = 1;
const LITTLE_ENDIAN_TAG: u8 = 1;
const MAX_CUTOFF: u64 = 1 << 14;

pub fn write_container<W: Write>(field: &FourierField, mut w: W) -> Result<()> {
    w.write_all(&CONTAINER_MAGIC)?;
    w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
    w.write_all(&[LITTLE_ENDIAN_TAG, 0, 0, 0])?;
    w.write_all(&(field.cutoff() as u64).to_le_bytes())?;
    w.write_all(&(field.grid_size() as u64).to_le_bytes())?;
    for c in field.raw() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)
        .map_err(|e| SpdeError::Format(format!("truncated container: {e}")))?;
    Ok(buf)
}

pub fn read_container<R: Read>(mut r: R) -> Result<FourierField> {
    if read_array::<8, _>(&mut r)? != CONTAINER_MAGIC {
        return Err(SpdeError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != CONTAINER_VERSION {
        return Err(SpdeError::Format(format!("unsupported schema version {version}")));
    }
    let tag = read_array::<4, _>(&mut r)?;
    if tag[0] != LITTLE_ENDIAN_TAG {
        return Err(SpdeError::Format(format!("unsupported endianness tag {}", tag[0])));
    }
    let n = u64::from_le_bytes(read_array(&mut r)?);
    let m = u64::from_le_bytes(read_array(&mut r)?);
    if n > MAX_CUTOFF || m > 4 * MAX_CUTOFF + 1 {
        return Err(SpdeError::Format(format!("implausible sizes N = {n}, M = {m}")));
    }
    let mut field = FourierField::zeros(n as usize, m as usize)
        .map_err(|e| SpdeError::Format(e.to_string()))?;
    let raw = field.raw_mut();
    for c in raw.iter_mut() {
        let re = f64::from_le_bytes(read_array(&mut r)?);
        let im = f64::from_le_bytes(read_array(&mut r)?);
        *c = Complex64::new(re, im);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(SpdeError::Format("trailing bytes after coefficients".into()));
    }
    let outside = field
        .raw()
        .iter()
        .enumerate()
        .any(|(i, c)| {
            let side = 2 * n as usize + 1;
            let k1 = (i / side) as i64 - n as i64;
            let k2 = (i % side) as i64 - n as i64;
            (k1.unsigned_abs() + k2.unsigned_abs()) > n && (c.re != 0.0 || c.im != 0.0)
        });
    if outside {
        return Err(SpdeError::Format("coefficients outside the cutoff are non-zero".into()));
    }
    Ok(field)
}

pub fn write_field_file(field: &FourierField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_container(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_field_file(path: &Path) -> Result<FourierField> {
    read_container(BufReader::new(File::open(path)?))
}

/// Grid values as CSV with columns `i,j,x1,x2,value`.
pub fn write_grid_csv<W: Write>(field: &FourierField, mut w: W) -> Result<()> {
    let m = field.grid_size();
    let values = to_grid(field);
    writeln!(w, "i,j,x1,x2,value")?;
    for i in 0..m {
        for j in 0..m {
            writeln!(
                w,
                "{i},{j},{},{},{:e}",
                i as f64 / m as f64,
                j as f64 / m as f64,
                values[i * m + j]
            )?;
        }
    }
    Ok(())
}
