//! Binary container for cell tables.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic  b"LPCT"
//! u32    version (1)
//! u32    d, n_x, n_y
//! u32    scheme (0 spectral, 1 finite volume)
//! f64    max_residual, max_mean, lipschitz[0], lipschitz[1]
//! f64[]  primal values, grad_y, grad_x, then adjoint values, grad_y, grad_x
//! ```
//!
//! Array lengths follow from the header: `n_x^d d n_y^d` for values and `n_x^d d² n_y^d`
//! for each gradient, with the index orders documented on [`CellSet`](super::CellSet).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CellSet, CellSolutions};
use crate::coeff::CellScheme;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;

const MAGIC: &[u8; 4] = b"LPCT";
const VERSION: u32 = 1;

pub fn write_cell_table(table: &CellSolutions, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(MAGIC)?;
    let scheme = match table.scheme {
        CellScheme::Spectral => 0u32,
        CellScheme::FiniteVolume => 1,
    };
    for v in [
        VERSION,
        table.dim() as u32,
        table.slow.n as u32,
        table.cell.n as u32,
        scheme,
    ] {
        put(&v.to_le_bytes())?;
    }
    for v in [
        table.max_residual,
        table.max_mean,
        table.lipschitz[0],
        table.lipschitz[1],
    ] {
        put(&v.to_le_bytes())?;
    }
    for set in [&table.primal, &table.adjoint] {
        for arr in [&set.values, &set.grad_y, &set.grad_x] {
            let mut buf = Vec::with_capacity(arr.len() * 8);
            for v in arr.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            put(&buf)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn take<const N: usize>(r: &mut impl Read, path: &Path) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(b)
}

fn read_f64s(r: &mut impl Read, len: usize, path: &Path) -> Result<Vec<f64>> {
    let mut raw = vec![0u8; len * 8];
    r.read_exact(&mut raw)
        .map_err(|_| Error::Format(format!("{}: truncated array data", path.display())))?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_cell_table(path: &Path) -> Result<CellSolutions> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    if &take::<4>(&mut r, path)? != MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    let mut hdr = [0u32; 5];
    for h in hdr.iter_mut() {
        *h = u32::from_le_bytes(take::<4>(&mut r, path)?);
    }
    let [version, d, n_x, n_y, scheme] = hdr;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let scheme = match scheme {
        0 => CellScheme::Spectral,
        1 => CellScheme::FiniteVolume,
        s => return Err(Error::Format(format!("unknown scheme tag {s}"))),
    };
    let slow = TorusGrid::new(d as usize, n_x as usize).map_err(|e| Error::Format(e.to_string()))?;
    let cell = TorusGrid::new(d as usize, n_y as usize).map_err(|e| Error::Format(e.to_string()))?;
    let mut stats = [0.0; 4];
    for s in stats.iter_mut() {
        *s = f64::from_le_bytes(take::<8>(&mut r, path)?);
    }
    let d = d as usize;
    let base = slow.len() * d * cell.len();
    let mut sets = Vec::new();
    for _ in 0..2 {
        sets.push(CellSet {
            values: read_f64s(&mut r, base, path)?,
            grad_y: read_f64s(&mut r, base * d, path)?,
            grad_x: read_f64s(&mut r, base * d, path)?,
        });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    let adjoint = sets.pop().unwrap();
    let primal = sets.pop().unwrap();
    Ok(CellSolutions {
        slow,
        cell,
        scheme,
        primal,
        adjoint,
        max_residual: stats[0],
        max_mean: stats[1],
        lipschitz: [stats[2], stats[3]],
    })
}
