//! Separable fields `f̂(k) = Π_j a_j(k_j)`.
//!
//! The free flow preserves the product structure, and so does `|u|^p`, so
//! space-time norms reduce to one-dimensional transforms per axis.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::norms::{mean_abs_pow, sentinel, GridPolicy, NormMeasurement, SpaceTimeGrid};
use super::SpectralField;
use crate::error::{LabError, Result};
use crate::exec::Execution;
use crate::lattice::Signature;
use crate::stats::compensated_sum;

/// One-dimensional coefficients on `[−half, half]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub half: usize,
    pub coeffs: Vec<Complex64>,
}

impl Factor {
    pub fn from_fn<F: FnMut(i64) -> Complex64>(half: usize, mut f: F) -> Self {
        let h = half as i64;
        Self {
            half,
            coeffs: (-h..=h).map(&mut f).collect(),
        }
    }

    pub fn get(&self, k: i64) -> Complex64 {
        let i = k + self.half as i64;
        if i < 0 || i as usize >= self.coeffs.len() {
            Complex64::default()
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn l2_norm(&self) -> f64 {
        compensated_sum(self.coeffs.iter().map(|c| c.norm_sqr())).sqrt()
    }

    fn nonzero(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let h = self.half as i64;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::default())
            .map(move |(i, c)| (i as i64 - h, *c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorField {
    sig: Signature,
    factors: Vec<Factor>,
}

impl TensorField {
    pub fn new(sig: &Signature, factors: Vec<Factor>) -> Result<Self> {
        if factors.len() != sig.dim() {
            return Err(LabError::DimensionMismatch {
                expected: sig.dim(),
                got: factors.len(),
            });
        }
        Ok(Self {
            sig: sig.clone(),
            factors,
        })
    }

    /// The same one-dimensional factor on every axis.
    pub fn uniform(sig: &Signature, factor: Factor) -> Self {
        Self {
            sig: sig.clone(),
            factors: vec![factor; sig.dim()],
        }
    }

    pub fn sig(&self) -> &Signature {
        &self.sig
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn max_half(&self) -> usize {
        self.factors.iter().map(|f| f.half).max().unwrap_or(0)
    }

    pub fn to_field(&self) -> SpectralField {
        let half: Vec<usize> = self.factors.iter().map(|f| f.half).collect();
        SpectralField::from_fn(&self.sig, &half, |k| {
            k.iter()
                .zip(&self.factors)
                .map(|(&kj, f)| f.get(kj))
                .product()
        })
        .expect("dimension matches by construction")
    }

    pub fn l2_norm(&self) -> f64 {
        self.factors.iter().map(Factor::l2_norm).product()
    }

    /// Every factor scaled to unit norm, so the product has unit norm.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for f in &mut out.factors {
            let n = f.l2_norm();
            if n > 0.0 {
                f.coeffs.iter_mut().for_each(|c| *c /= n);
            }
        }
        out
    }

    pub fn scaled(&self, lambda: Complex64) -> Self {
        let mut out = self.clone();
        if let Some(f) = out.factors.first_mut() {
            f.coeffs.iter_mut().for_each(|c| *c *= lambda);
        }
        out
    }

    /// `(Σ_k ⟨k⟩^{2s} Π_j |a_j(k_j)|²)^{1/2}`, summed over the support.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let supports: Vec<Vec<(f64, f64)>> = self
            .factors
            .iter()
            .map(|f| f.nonzero().map(|(k, c)| ((k * k) as f64, c.norm_sqr())).collect())
            .collect();
        let mut acc = crate::stats::CompensatedSum::new();
        fn rec(
            supports: &[Vec<(f64, f64)>],
            j: usize,
            k2: f64,
            w: f64,
            s: f64,
            acc: &mut crate::stats::CompensatedSum,
        ) {
            if j == supports.len() {
                acc.add((1.0 + k2).powf(s) * w);
                return;
            }
            for &(kk, a) in &supports[j] {
                rec(supports, j + 1, k2 + kk, w * a, s, acc);
            }
        }
        rec(&supports, 0, 0.0, 1.0, s, &mut acc);
        acc.value().sqrt()
    }

    pub fn evolve(&self, t: f64) -> Self {
        let mut out = self.clone();
        for (j, f) in out.factors.iter_mut().enumerate() {
            let a = self.sig.coefficient(j);
            let h = f.half as i64;
            for (i, c) in f.coeffs.iter_mut().enumerate() {
                let k = i as i64 - h;
                *c *= crate::propagator::phase(a * (k * k) as f64, t);
            }
        }
        out
    }

    /// Range of the symbol over the support.
    pub fn symbol_range(&self) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (j, f) in self.factors.iter().enumerate() {
            let a = self.sig.coefficient(j);
            let vals = f.nonzero().map(|(k, _)| a * (k * k) as f64);
            let (l, h) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if l <= h {
                lo += l;
                hi += h;
            }
        }
        (lo, hi)
    }
}

/// Samples one-dimensional factors of evolved tensor fields on a grid of
/// `g` points.
#[derive(Clone)]
pub(crate) struct AxisSampler {
    pub g: usize,
    plan: Arc<dyn Fft<f64>>,
}

impl AxisSampler {
    pub fn new(g: usize) -> Self {
        let plan = FftPlanner::new().plan_fft_inverse(g);
        Self { g, plan }
    }

    /// Values of axis `j` of `f` at time `t`, written into `out` (length `g`).
    pub fn sample(&self, f: &TensorField, j: usize, t: f64, out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = Complex64::default());
        let a = f.sig.coefficient(j);
        let gi = self.g as i64;
        for (k, c) in f.factors[j].nonzero() {
            out[k.rem_euclid(gi) as usize] += c * crate::propagator::phase(a * (k * k) as f64, t);
        }
        self.plan.process(out);
    }
}

fn tensor_norm_on(f: &TensorField, p: f64, grid: &SpaceTimeGrid, exec: Execution) -> Result<f64> {
    let min = 2 * f.max_half() + 1;
    if grid.g < min {
        return Err(LabError::BelowNyquist { g: grid.g, min });
    }
    let sampler = AxisSampler::new(grid.g);
    let dt = grid.t_max / grid.n_t as f64;
    let d = f.sig.dim();
    let vals = exec.map(grid.n_t, |i| {
        let t = i as f64 * dt;
        let mut buf = vec![Complex64::default(); grid.g];
        (0..d)
            .map(|j| {
                sampler.sample(f, j, t, &mut buf);
                mean_abs_pow(&buf, p)
            })
            .product::<f64>()
    });
    Ok((compensated_sum(vals) * dt).powf(1.0 / p))
}

/// `L^p_{t,x}([0,T] × T^d)` norm of the free evolution of a separable field,
/// on the grid chosen by `policy` and with the same refinement sentinel as
/// the full quadrature.
pub fn lp_norm_tensor(
    f: &TensorField,
    p: f64,
    policy: &GridPolicy,
    t_max: f64,
    exec: Execution,
) -> Result<NormMeasurement> {
    if !(p >= 1.0) {
        return Err(LabError::InvalidParameter(format!("exponent p = {p} below 1")));
    }
    let (g, n_t) = policy.sizes(&f.sig, f.max_half(), f.symbol_range(), p, t_max);
    let grid = SpaceTimeGrid {
        t_max,
        n_t,
        g,
        oversample: policy.oversample,
    };
    if let Some(cap) = policy.max_cost {
        let cost = (n_t as u128) * (g as u128) * f.sig.dim() as u128 * 3;
        if cost > cap {
            return Err(LabError::ResourceCap(format!(
                "separable grid G={g} n_t={n_t} exceeds cap {cap}"
            )));
        }
    }
    let value = tensor_norm_on(f, p, &grid, exec)?;
    sentinel(value, grid, policy, || tensor_norm_on(f, p, &grid.refined(), exec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_view_matches_product() {
        let sig = Signature::unit(2, 1).unwrap();
        let f = TensorField::new(
            &sig,
            vec![
                Factor::from_fn(1, |k| Complex64::new(k as f64 + 2.0, 0.0)),
                Factor::from_fn(2, |k| Complex64::new(0.0, k as f64)),
            ],
        )
        .unwrap();
        let dense = f.to_field();
        assert_eq!(dense.get(&[1, -2]), Complex64::new(3.0, 0.0) * Complex64::new(0.0, -2.0));
        assert!((dense.l2_norm() - f.l2_norm()).abs() < 1e-12);
        for s in [-1.0, 0.0, 0.6, 1.0] {
            assert!((dense.sobolev_norm(s) - f.sobolev_norm(s)).abs() < 1e-12 * dense.sobolev_norm(s));
        }
        assert!((f.normalized().l2_norm() - 1.0).abs() < 1e-15);
        let range = f.symbol_range();
        assert_eq!(range, (-4.0, 0.0));
    }
}
