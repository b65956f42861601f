//! `ANLS` binary field snapshots.
//!
//! Layout, all little-endian: magic `ANLS`, format version `u32` = 1,
//! `nx` and `ny` as `u64`, `Lx` and `Ly` as `f64`, then `nx * ny`
//! `(re, im)` pairs of `f64`, row-major with x as the slow axis.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid2D;

pub const MAGIC: &[u8; 4] = b"ANLS";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 16 + 16;

/// Exact file size for an `nx x ny` field.
pub fn encoded_len(nx: usize, ny: usize) -> usize {
    HEADER_LEN + 16 * nx * ny
}

pub fn encode(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(encoded_len(g.nx(), g.ny()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.nx() as u64).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u64).to_le_bytes());
    out.extend_from_slice(&g.lx().to_le_bytes());
    out.extend_from_slice(&g.ly().to_le_bytes());
    for z in f.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> [u8; N] {
    let mut a = [0u8; N];
    a.copy_from_slice(&bytes[*at..*at + N]);
    *at += N;
    a
}

pub fn decode(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected \"ANLS\"".into()));
    }
    let mut at = 4;
    let version = u32::from_le_bytes(take(bytes, &mut at));
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let nx = u64::from_le_bytes(take(bytes, &mut at));
    let ny = u64::from_le_bytes(take(bytes, &mut at));
    let lx = f64::from_le_bytes(take(bytes, &mut at));
    let ly = f64::from_le_bytes(take(bytes, &mut at));
    let (nx, ny) = match (usize::try_from(nx), usize::try_from(ny)) {
        (Ok(a), Ok(b)) if a.checked_mul(b).and_then(|n| n.checked_mul(16)).is_some() => (a, b),
        _ => return Err(Error::Format(format!("grid {nx} x {ny} is too large"))),
    };
    let grid = Grid2D::new(nx, ny, lx, ly)?;
    let expected = encoded_len(nx, ny);
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "file is {} bytes, expected {expected} for a {nx} x {ny} grid",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    let mut f = Field::from_vec(grid, data)?;
    if !f.is_finite() {
        f.mark_post_blowup();
    }
    Ok(f)
}

pub fn write_snapshot(path: &Path, f: &Field) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&encode(f))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Field> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = Grid2D::new(4, 2, 3.0, 5.0).unwrap();
        let f = Field::from_fn(g, |x, y| Complex64::new(x, y));
        let b = encode(&f);
        assert_eq!(b.len(), 4 + 4 + 16 + 16 + 16 * 8);
        assert_eq!(&b[..4], b"ANLS");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 3.0);
        assert_eq!(f64::from_le_bytes(b[32..40].try_into().unwrap()), 5.0);
        let first = f.data()[0];
        assert_eq!(f64::from_le_bytes(b[40..48].try_into().unwrap()), first.re);
        assert_eq!(f64::from_le_bytes(b[48..56].try_into().unwrap()), first.im);
    }

    #[test]
    fn rejects_corruption() {
        let g = Grid2D::new(2, 2, 1.0, 1.0).unwrap();
        let b = encode(&Field::zeros(g));
        assert!(decode(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = b.clone();
        bad[4] = 2;
        assert!(decode(&bad).is_err());
        let mut bad = b;
        bad[8] = 3;
        assert!(matches!(decode(&bad), Err(Error::InvalidGrid(_))));
    }
}
