//! Flat binary layout for fields.
//!
//! Header: `u32` dimension `d`, then `d` values `u32 M_j`. Payload: one
//! `(f64 re, f64 im)` pair per mode in storage order. Everything is
//! little-endian. The signature is not stored; callers supply it.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::SpectralField;
use crate::error::{LabError, Result};
use crate::lattice::{Signature, MAX_DIM};

pub fn write_binary<W: Write>(f: &SpectralField, mut w: W) -> Result<()> {
    w.write_all(&(f.dim() as u32).to_le_bytes())?;
    for &m in f.half() {
        w.write_all(&(m as u32).to_le_bytes())?;
    }
    for c in f.coeffs() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_binary<R: Read>(sig: &Signature, mut r: R) -> Result<SpectralField> {
    let d = read_u32(&mut r)? as usize;
    if d == 0 || d > MAX_DIM {
        return Err(LabError::Format(format!("dimension {d} in header")));
    }
    if d != sig.dim() {
        return Err(LabError::DimensionMismatch {
            expected: sig.dim(),
            got: d,
        });
    }
    let mut half = Vec::with_capacity(d);
    for _ in 0..d {
        let m = read_u32(&mut r)? as usize;
        if m > 1 << 16 {
            return Err(LabError::Format(format!("half width {m} in header")));
        }
        half.push(m);
    }
    let mut f = SpectralField::zeros(sig, &half)?;
    for c in f.coeffs_mut() {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        *c = Complex64::new(re, im);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(LabError::Format("trailing bytes after payload".into()));
    }
    Ok(f)
}
