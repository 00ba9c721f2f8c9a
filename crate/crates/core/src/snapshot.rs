//! Distribution snapshots.
//!
//! CSV: the header line `N,n,R`, one line with those three values, then one
//! value per line in row-major order (last axis fastest).
//!
//! Binary (little endian): the magic bytes `LPKD`, `N` and `n` as `u32`,
//! `R` as `f64`, then the `n^N` values as `f64`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::state::{Distribution, VelocityGrid};

const MAGIC: &[u8; 4] = b"LPKD";

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn write_csv(f: &Distribution, mut w: impl Write) -> Result<()> {
    writeln!(w, "N,n,R").map_err(io)?;
    writeln!(w, "{},{},{:e}", f.grid.dim, f.grid.n, f.grid.radius).map_err(io)?;
    for x in &f.values {
        writeln!(w, "{x:e}").map_err(io)?;
    }
    Ok(())
}

/// Reads a CSV snapshot. Values are not required to be nonnegative, so
/// signed fields such as `Q` round-trip too.
pub fn read_csv(r: impl Read) -> Result<(VelocityGrid, Vec<f64>)> {
    let mut lines = BufReader::new(r).lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| io("truncated snapshot"))?
            .map_err(io)
    };
    if next()?.trim() != "N,n,R" {
        return Err(io("missing N,n,R header"));
    }
    let head = next()?;
    let parts: Vec<&str> = head.trim().split(',').collect();
    if parts.len() != 3 {
        return Err(io(format!("malformed grid line {head:?}")));
    }
    let dim: usize = parts[0].parse().map_err(io)?;
    let n: usize = parts[1].parse().map_err(io)?;
    let radius: f64 = parts[2].parse().map_err(io)?;
    let grid = VelocityGrid::new(dim, n, radius)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(next()?.trim().parse::<f64>().map_err(io)?);
    }
    Ok((grid, values))
}

pub fn write_binary(f: &Distribution, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(f.grid.dim as u32).to_le_bytes())
        .map_err(io)?;
    w.write_all(&(f.grid.n as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&f.grid.radius.to_le_bytes()).map_err(io)?;
    for x in &f.values {
        w.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_binary(mut r: impl Read) -> Result<(VelocityGrid, Vec<f64>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(io("bad magic bytes"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(io)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8).map_err(io)?;
    let grid = VelocityGrid::new(dim, n, f64::from_le_bytes(b8))?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut b8).map_err(io)?;
        values.push(f64::from_le_bytes(b8));
    }
    Ok((grid, values))
}

/// Loads a snapshot, choosing the format from the extension (`.csv` or binary).
pub fn load(path: &Path) -> Result<Distribution> {
    let file = std::fs::File::open(path).map_err(|e| io(format!("{}: {e}", path.display())))?;
    let (grid, values) = if path.extension().is_some_and(|e| e == "csv") {
        read_csv(file)?
    } else {
        read_binary(file)?
    };
    Distribution::new(grid, values)
}

pub fn save(f: &Distribution, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| io(format!("{}: {e}", path.display())))?;
    let w = std::io::BufWriter::new(file);
    if path.extension().is_some_and(|e| e == "csv") {
        write_csv(f, w)
    } else {
        write_binary(f, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::maxwellian;

    #[test]
    fn csv_and_binary_round_trip() {
        let g = VelocityGrid::new(2, 8, 3.0).unwrap();
        let m = maxwellian(g, 1.0, &[0.1, 0.0], 0.9).unwrap();
        let mut buf = Vec::new();
        write_csv(&m, &mut buf).unwrap();
        assert_eq!(read_csv(&buf[..]).unwrap(), (g, m.values.clone()));
        let mut buf = Vec::new();
        write_binary(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"LPKD");
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 8 * 64);
        assert_eq!(read_binary(&buf[..]).unwrap(), (g, m.values));
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(read_binary(&b"XXXX"[..]).is_err());
        assert!(read_csv(&b"N,n,R\n2,8,1\n0.5\n"[..]).is_err());
        assert!(read_csv(&b"a,b\n"[..]).is_err());
    }
}
