//! Field snapshot formats.
//!
//! Binary layout, all little-endian: `n_points: u64`, `half_width: f64`,
//! `time: f64`, then `n_points` pairs `(re, im)` of `f64`.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::grid::{FieldState, SpatialGrid};

pub const FIELD_CSV_HEADER: &str = "x,re_u,im_u,abs2_u";

pub fn write_field_csv(f: &FieldState, mut w: impl Write) -> Result<()> {
    writeln!(w, "{FIELD_CSV_HEADER}")?;
    for (x, v) in f.grid().x().iter().zip(f.values()) {
        writeln!(w, "{x:.17e},{:.17e},{:.17e},{:.17e}", v.re, v.im, v.norm_sqr())?;
    }
    Ok(())
}

pub fn write_field_binary(f: &FieldState, mut w: impl Write) -> Result<()> {
    w.write_all(&(f.grid().n_points() as u64).to_le_bytes())?;
    w.write_all(&f.grid().half_width().to_le_bytes())?;
    w.write_all(&f.time().to_le_bytes())?;
    for v in f.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Reads a snapshot, reusing `grid` when it matches the header.
pub fn read_field_binary(mut r: impl Read, grid: Option<&Arc<SpatialGrid>>) -> Result<FieldState> {
    let n = read_u64(&mut r)? as usize;
    let half_width = read_f64(&mut r)?;
    let time = read_f64(&mut r)?;
    let grid = match grid {
        Some(g) if g.n_points() == n && g.half_width() == half_width => g.clone(),
        Some(g) => {
            return Err(invalid(format!(
                "snapshot grid ({n}, {half_width}) differs from ({}, {})",
                g.n_points(),
                g.half_width()
            )))
        }
        None => SpatialGrid::new(n, half_width)?,
    };
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        values.push(Complex64::new(re, im));
    }
    FieldState::new(grid, values, time)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(g: &Arc<SpatialGrid>, t: f64) -> FieldState {
        FieldState::from_fn(g.clone(), t, |x| Complex64::from_polar((-x * x).exp(), 0.3 * x)).unwrap()
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let g = SpatialGrid::new(64, 10.0).unwrap();
        let f = bump(&g, 0.7);
        let mut buf = Vec::new();
        write_field_binary(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 16 * 64);
        assert_eq!(&buf[..8], &64u64.to_le_bytes());
        let back = read_field_binary(&buf[..], None).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.time(), 0.7);
        assert!(read_field_binary(&buf[..], Some(&SpatialGrid::new(32, 10.0).unwrap())).is_err());
        assert!(read_field_binary(&buf[..100], None).is_err());
    }

    #[test]
    fn csv_columns() {
        let g = SpatialGrid::new(16, 5.0).unwrap();
        let f = bump(&g, 0.0);
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], FIELD_CSV_HEADER);
        assert_eq!(lines.len(), 17);
        let cols: Vec<f64> = lines[9].split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[3] - (cols[1].powi(2) + cols[2].powi(2))).abs() < 1e-15);
    }
}
