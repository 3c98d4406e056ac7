//! Binary field snapshots.
//!
//! Layout, all little-endian: magic `AHTF`, `u32` version (= 1), `u32` d,
//! `u32` n, `f64` time, then `d` components of `n×n` `f64` values each,
//! `x₁` fastest.

use std::io::{Read, Write};

use super::{FieldError, Grid, ScalarField, VectorField};

pub const MAGIC: &[u8; 4] = b"AHTF";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut out: W, time: f64, field: &VectorField) -> std::io::Result<()> {
    let n = field.grid().n() as u32;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(Grid::DIM as u32).to_le_bytes())?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&time.to_le_bytes())?;
    let mut buf = Vec::with_capacity(field.grid().len() * 8);
    for c in field.components() {
        buf.clear();
        for v in c.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, FieldError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<(f64, VectorField), FieldError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FieldError::Snapshot("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(FieldError::Snapshot(format!("unsupported version {version}")));
    }
    let d = read_u32(&mut input)?;
    if d as usize != Grid::DIM {
        return Err(FieldError::Snapshot(format!("unsupported dimension {d}")));
    }
    let grid = Grid::new(read_u32(&mut input)? as usize)?;
    let mut tb = [0u8; 8];
    input.read_exact(&mut tb)?;
    let time = f64::from_le_bytes(tb);
    let mut comps = Vec::with_capacity(2);
    let mut raw = vec![0u8; grid.len() * 8];
    for _ in 0..2 {
        input.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        comps.push(ScalarField::from_values(grid, values)?);
    }
    let c2 = comps.pop().unwrap();
    let c1 = comps.pop().unwrap();
    Ok((time, VectorField::new(c1, c2)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(8).unwrap();
        let v = VectorField::from_fn(g, |x1, x2| [x1, -x2]);
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, 1.5, &v).unwrap();
        assert_eq!(bytes.len(), 4 + 4 + 4 + 4 + 8 + 2 * 64 * 8);
        assert_eq!(&bytes[..4], b"AHTF");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &8u32.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        // second value of first component is x₁ at i = 1
        assert_eq!(&bytes[32..40], &g.h().to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_header() {
        let mut bytes = b"AHTX".to_vec();
        bytes.extend_from_slice(&[0; 40]);
        assert!(matches!(read_snapshot(&bytes[..]), Err(FieldError::Snapshot(_))));
        assert!(matches!(read_snapshot(&b"AH"[..]), Err(FieldError::Io(_))));
    }
}
