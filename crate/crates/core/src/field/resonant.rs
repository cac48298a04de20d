//! Exact space-time `L²` norms of products of two free evolutions.
//!
//! For integer symbols and an integer horizon `T`,
//! `u₁u₂ = Σ_{K,S} B(K,S) e^{2πi(K·x − S t)}` with
//! `B(K,S) = Σ_{k₁+k₂=K, s(k₁)+s(k₂)=S} c₁(k₁)c₂(k₂)`, and Parseval on
//! `[0,T] × T^d` gives `‖u₁u₂‖²_{L²} = T Σ_{K,S} |B(K,S)|²`.

use num_complex::Complex64;

use super::SpectralField;
use crate::error::{LabError, Result};
use crate::exec::Execution;
use crate::stats::{compensated_sum, CompensatedSum};

/// Largest padded lookup table, in entries, before falling back to
/// bounds-checked indexing.
const PAD_LIMIT: usize = 1 << 23;

/// Row-major index of `k` in the box `[−h, h]^d`.
fn flat_index(k: &[i64], half: &[i64]) -> usize {
    k.iter()
        .zip(half)
        .fold(0usize, |acc, (kj, h)| acc * (2 * h + 1) as usize + (kj + h) as usize)
}

/// Change in row-major index caused by adding `k` inside the box `[−h, h]^d`.
fn flat_offset(k: &[i64], half: &[i64]) -> isize {
    k.iter()
        .zip(half)
        .fold(0isize, |acc, (kj, h)| acc * (2 * h + 1) as isize + *kj as isize)
}

fn accumulate(buf: &mut [Complex64], touched: &mut Vec<usize>, slot: usize, v: Complex64) {
    if buf[slot] == Complex64::default() {
        touched.push(slot);
    }
    buf[slot] += v;
}

struct Mode {
    k: Vec<i64>,
    s: i64,
    c: Complex64,
}

fn nonzero_modes(f: &SpectralField, coef: &[i64]) -> Vec<Mode> {
    let mut out = Vec::new();
    f.for_each_mode(|idx, k| {
        let c = f.coeffs()[idx];
        if c != Complex64::default() {
            let s = coef.iter().zip(k).map(|(a, kj)| a * kj * kj).sum();
            out.push(Mode { k: k.to_vec(), s, c });
        }
    });
    out
}

fn integer_horizon(t_max: f64) -> Result<u64> {
    if t_max >= 1.0 && t_max.fract() == 0.0 {
        Ok(t_max as u64)
    } else {
        Err(LabError::ExactUnavailable(format!(
            "horizon {t_max} is not a positive integer"
        )))
    }
}

/// `∫₀^T ∫ |u₁ u₂|² dx dt` for the free evolutions of `f1` and `f2`.
///
/// Needs integer weights (so the flow is 1-periodic) and an integer `T`.
/// Work is split over the output frequencies `K`; partial sums are reduced in
/// `K` order, so the value does not depend on `exec`.
pub fn bilinear_l2_squared(f1: &SpectralField, f2: &SpectralField, t_max: f64, exec: Execution) -> Result<f64> {
    bilinear_with_limit(f1, f2, t_max, exec, PAD_LIMIT)
}

fn bilinear_with_limit(
    f1: &SpectralField,
    f2: &SpectralField,
    t_max: f64,
    exec: Execution,
    pad_limit: usize,
) -> Result<f64> {
    let sig = f1.sig();
    if sig != f2.sig() {
        return Err(LabError::InvalidParameter("fields carry different signatures".into()));
    }
    let coef = sig
        .integer_coefficients()
        .ok_or_else(|| LabError::ExactUnavailable("weights are not all integers".into()))?;
    let periods = integer_horizon(t_max)?;

    // Iterate over the sparser field, look the other one up densely.
    let (dense, sparse) = if nonzero_modes(f1, &coef).len() >= nonzero_modes(f2, &coef).len() {
        (f1, f2)
    } else {
        (f2, f1)
    };
    let sparse = nonzero_modes(sparse, &coef);
    if sparse.is_empty() {
        return Ok(0.0);
    }
    let d = sig.dim();
    let dense_sym: Vec<i64> = {
        let mut v = vec![0i64; dense.len()];
        dense.for_each_mode(|idx, k| v[idx] = coef.iter().zip(k).map(|(a, kj)| a * kj * kj).sum());
        v
    };
    let dense_range = dense_sym.iter().fold((i64::MAX, i64::MIN), |(l, h), &s| (l.min(s), h.max(s)));
    let sparse_range = sparse.iter().fold((i64::MAX, i64::MIN), |(l, h), m| (l.min(m.s), h.max(m.s)));
    let s_min = dense_range.0 + sparse_range.0;
    let s_len = (dense_range.1 + sparse_range.1 - s_min + 1) as usize;

    let dh: Vec<i64> = dense.half().iter().map(|&m| m as i64).collect();
    let sh: Vec<i64> = (0..d)
        .map(|j| sparse.iter().map(|m| m.k[j].abs()).max().unwrap_or(0))
        .collect();
    let out_half: Vec<i64> = dh.iter().zip(&sh).map(|(a, b)| a + b).collect();
    let out_len: usize = out_half.iter().map(|h| (2 * h + 1) as usize).product();
    let dense_coeffs = dense.coeffs();

    // Dense lookup table padded by the sparse extent, so that `K − k₂` is
    // always in range and becomes a fixed flat offset per sparse mode.
    let pad_half: Vec<i64> = dh.iter().zip(&sh).map(|(a, b)| a + 2 * b).collect();
    let pad_len: usize = pad_half.iter().map(|h| (2 * h + 1) as usize).product();
    let padded = (pad_len <= pad_limit).then(|| {
        let mut coeffs = vec![Complex64::default(); pad_len];
        let mut sym = vec![0i64; pad_len];
        dense.for_each_mode(|idx, k| {
            let p = flat_index(k, &pad_half);
            coeffs[p] = dense_coeffs[idx];
            sym[p] = dense_sym[idx];
        });
        let offsets: Vec<isize> = sparse.iter().map(|m| flat_offset(&m.k, &pad_half)).collect();
        (coeffs, sym, offsets)
    });

    let chunk = 256;
    let partial = exec.map_chunks(out_len, chunk, |range| {
        let mut buf = vec![Complex64::default(); s_len];
        let mut touched: Vec<usize> = Vec::new();
        let mut acc = CompensatedSum::new();
        let mut big_k = vec![0i64; d];
        for flat in range {
            let mut rem = flat;
            for j in (0..d).rev() {
                let w = (2 * out_half[j] + 1) as usize;
                big_k[j] = (rem % w) as i64 - out_half[j];
                rem /= w;
            }
            if let Some((coeffs, sym, offsets)) = &padded {
                let base = flat_index(&big_k, &pad_half) as isize;
                for (m, off) in sparse.iter().zip(offsets) {
                    let idx = (base - off) as usize;
                    let c1 = coeffs[idx];
                    if c1 != Complex64::default() {
                        accumulate(&mut buf, &mut touched, (sym[idx] + m.s - s_min) as usize, c1 * m.c);
                    }
                }
            } else {
                'modes: for m in &sparse {
                    let mut idx = 0usize;
                    for j in 0..d {
                        let k1 = big_k[j] - m.k[j];
                        if k1.abs() > dh[j] {
                            continue 'modes;
                        }
                        idx = idx * (2 * dh[j] + 1) as usize + (k1 + dh[j]) as usize;
                    }
                    let c1 = dense_coeffs[idx];
                    if c1 != Complex64::default() {
                        accumulate(&mut buf, &mut touched, (dense_sym[idx] + m.s - s_min) as usize, c1 * m.c);
                    }
                }
            }
            for &slot in &touched {
                acc.add(buf[slot].norm_sqr());
                buf[slot] = Complex64::default();
            }
            touched.clear();
        }
        acc.value()
    });
    Ok(periods as f64 * compensated_sum(partial))
}

/// `‖e^{itΔ±} f‖_{L⁴([0,T] × T^d)}` computed exactly as `(‖u²‖²_{L²})^{1/4}`.
pub fn l4_norm_resonant(f: &SpectralField, t_max: f64, exec: Execution) -> Result<f64> {
    Ok(bilinear_l2_squared(f, f, t_max, exec)?.powf(0.25))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Signature;

    #[test]
    fn padded_lookup_matches_checked_indexing() {
        let sig = Signature::unit(3, 1).unwrap();
        let f1 = SpectralField::from_fn(&sig, &[4, 3, 5], |k| {
            Complex64::new((k[0] - 2 * k[1]) as f64, (k[2] * k[2]) as f64 * 0.1)
        })
        .unwrap();
        let f2 = SpectralField::from_fn(&sig, &[2, 2, 1], |k| Complex64::new(1.0, (k[0] + k[2]) as f64)).unwrap();
        let fast = bilinear_with_limit(&f1, &f2, 2.0, Execution::Sequential, PAD_LIMIT).unwrap();
        let slow = bilinear_with_limit(&f1, &f2, 2.0, Execution::Sequential, 0).unwrap();
        assert_eq!(fast, slow);
        assert!(fast > 0.0);
    }
}
