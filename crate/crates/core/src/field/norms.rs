//! Space-time Lebesgue norms by uniform Riemann sums.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SpectralField;
use crate::error::{LabError, Result};
use crate::exec::Execution;
use crate::fft::NdFft;
use crate::lattice::Signature;
use crate::stats::{compensated_sum, CompensatedSum};

/// A linear flow acting on spectral fields.
pub trait Evolution: Sync {
    fn evolve(&self, f: &SpectralField, t: f64) -> SpectralField;
}

/// The trivial flow `u(t) = u₀`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Static;

impl Evolution for Static {
    fn evolve(&self, f: &SpectralField, _t: f64) -> SpectralField {
        f.clone()
    }
}

/// Discretization of `[0, T] × T^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub t_max: f64,
    pub n_t: usize,
    pub g: usize,
    pub oversample: usize,
}

impl SpaceTimeGrid {
    pub fn refined(&self) -> Self {
        Self {
            n_t: 2 * self.n_t,
            g: 2 * self.g,
            ..*self
        }
    }

    /// Number of space-time samples, `G^d · n_t`.
    pub fn cost(&self, d: usize) -> u128 {
        (self.g as u128).pow(d as u32) * self.n_t as u128
    }
}

/// Rules for choosing a [`SpaceTimeGrid`] for a given field and exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridPolicy {
    /// `G ≥ oversample · (2M + 1)`.
    pub oversample: usize,
    pub min_time_samples: usize,
    /// `n_t ≥ time_samples_per_m2 · M²`.
    pub time_samples_per_m2: usize,
    /// Raise `n_t` so the time sum is exact for even `p` when the flow is
    /// periodic with a period dividing `T`.
    pub exact_time: bool,
    pub max_time_samples: Option<usize>,
    /// Relative tolerance of the refinement sentinel; `None` disables it.
    pub sentinel_tol: Option<f64>,
    /// Cap on `G^d · n_t` summed over the base and refined grids.
    pub max_cost: Option<u128>,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            oversample: 4,
            min_time_samples: 64,
            time_samples_per_m2: 8,
            exact_time: true,
            max_time_samples: None,
            sentinel_tol: Some(1e-8),
            max_cost: None,
        }
    }
}

/// `ℓ` when `p = 2ℓ` is an even integer.
pub(crate) fn even_half(p: f64) -> Option<u32> {
    (p >= 2.0 && p.fract() == 0.0 && (p as u64) % 2 == 0).then_some((p / 2.0) as u32)
}

/// `n_t` making the uniform time sum of `|u|^{2ℓ}` exact, if any.
pub(crate) fn exact_time_samples(sig: &Signature, s_range: (f64, f64), p: f64, t_max: f64) -> Option<usize> {
    let l = even_half(p)?;
    let period = sig.time_period()? as f64;
    let cycles = t_max / period;
    if cycles < 1.0 - 1e-12 || (cycles - cycles.round()).abs() > 1e-12 {
        return None;
    }
    let top = l as f64 * (s_range.1 - s_range.0) * t_max;
    Some(top.round() as usize + 1)
}

/// Range of the symbol over the nonzero coefficients.
pub(crate) fn symbol_range(f: &SpectralField) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    f.for_each_mode(|idx, k| {
        if f.coeffs()[idx] != Complex64::default() {
            let s = f.sig().symbol_unchecked(k);
            lo = lo.min(s);
            hi = hi.max(s);
        }
    });
    if lo > hi {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

impl GridPolicy {
    pub fn resolve(&self, f: &SpectralField, p: f64, t_max: f64) -> Result<SpaceTimeGrid> {
        let m = f.max_half();
        let (g, n_t) = self.sizes(f.sig(), m, symbol_range(f), p, t_max);
        Ok(SpaceTimeGrid {
            t_max,
            n_t,
            g,
            oversample: self.oversample,
        })
    }

    pub(crate) fn sizes(&self, sig: &Signature, m: usize, s_range: (f64, f64), p: f64, t_max: f64) -> (usize, usize) {
        let mut g = self.oversample.max(1) * (2 * m + 1);
        if let Some(l) = even_half(p) {
            g = g.max(2 * l as usize * m + 1);
        }
        let mut n_t = self.min_time_samples.max(self.time_samples_per_m2 * m * m).max(2);
        if self.exact_time {
            if let Some(exact) = exact_time_samples(sig, s_range, p, t_max) {
                n_t = n_t.max(exact);
            }
        }
        if let Some(cap) = self.max_time_samples {
            n_t = n_t.min(cap.max(2));
        }
        (g, n_t)
    }

    pub(crate) fn check_cost(&self, d: usize, grid: &SpaceTimeGrid) -> Result<()> {
        if let Some(cap) = self.max_cost {
            let mut cost = grid.cost(d);
            if self.sentinel_tol.is_some() {
                cost += grid.refined().cost(d);
            }
            if cost > cap {
                return Err(LabError::ResourceCap(format!(
                    "grid G={} n_t={} needs {cost} space-time samples, cap is {cap}",
                    grid.g, grid.n_t
                )));
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn abs_pow(z: Complex64, p: f64) -> f64 {
    match even_half(p) {
        Some(l) => z.norm_sqr().powi(l as i32),
        None => z.norm().powf(p),
    }
}

/// Spatial mean of `|u|^p` over sampled values.
pub(crate) fn mean_abs_pow(data: &[Complex64], p: f64) -> f64 {
    let s: CompensatedSum = data.iter().map(|z| abs_pow(*z, p)).collect();
    s.value() / data.len() as f64
}

/// `(∫₀^T ∫_{T^d} |u|^p dx dt)^{1/p}` for `u(t) = evolution(f₀, t)`, by a
/// left Riemann sum in time and the uniform grid in space.
///
/// Per-time spatial means are gathered in time order and summed
/// sequentially, so the result does not depend on `exec`.
pub fn lp_spacetime_norm(
    f0: &SpectralField,
    p: f64,
    grid: &SpaceTimeGrid,
    evolution: &dyn Evolution,
    exec: Execution,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(LabError::InvalidParameter(format!("exponent p = {p} below 1")));
    }
    if grid.n_t < 2 {
        return Err(LabError::InvalidParameter("n_t must be at least 2".into()));
    }
    if !(grid.t_max > 0.0) {
        return Err(LabError::InvalidParameter("time horizon must be positive".into()));
    }
    f0.check_grid(grid.g)?;
    let plan = NdFft::new(&vec![grid.g; f0.dim()]);
    let dt = grid.t_max / grid.n_t as f64;
    let means = exec.map(grid.n_t, |i| {
        let u = evolution.evolve(f0, i as f64 * dt);
        let mut data = vec![Complex64::default(); plan.len()];
        u.scatter_into(grid.g, &mut data);
        plan.inverse(&mut data);
        mean_abs_pow(&data, p)
    });
    Ok((compensated_sum(means) * dt).powf(1.0 / p))
}

/// `∫₀^T ∫ |u₁ u₂|² dx dt` by the same Riemann sums. The product is exact
/// on the grid once `G ≥ 2(M₁ + M₂) + 1`.
pub fn bilinear_l2_quadrature(
    f1: &SpectralField,
    f2: &SpectralField,
    grid: &SpaceTimeGrid,
    evolution: &dyn Evolution,
    exec: Execution,
) -> Result<f64> {
    if f1.dim() != f2.dim() {
        return Err(LabError::DimensionMismatch {
            expected: f1.dim(),
            got: f2.dim(),
        });
    }
    let min = 2 * (f1.max_half() + f2.max_half()) + 1;
    if grid.g < min {
        return Err(LabError::BelowNyquist { g: grid.g, min });
    }
    let plan = NdFft::new(&vec![grid.g; f1.dim()]);
    let dt = grid.t_max / grid.n_t as f64;
    let means = exec.map(grid.n_t, |i| {
        let t = i as f64 * dt;
        let mut a = vec![Complex64::default(); plan.len()];
        let mut b = vec![Complex64::default(); plan.len()];
        evolution.evolve(f1, t).scatter_into(grid.g, &mut a);
        evolution.evolve(f2, t).scatter_into(grid.g, &mut b);
        plan.inverse(&mut a);
        plan.inverse(&mut b);
        let s: CompensatedSum = a.iter().zip(&b).map(|(x, y)| (x * y).norm_sqr()).collect();
        s.value() / a.len() as f64
    });
    Ok(compensated_sum(means) * dt)
}

/// A norm value together with its refinement check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormMeasurement {
    pub value: f64,
    pub grid: SpaceTimeGrid,
    pub refined: Option<f64>,
    pub rel_change: Option<f64>,
}

/// Like [`lp_spacetime_norm`] with the grid chosen by `policy`, followed by
/// the refinement sentinel: the norm is recomputed on `(2n_t, 2G)` and the
/// relative change must stay within `policy.sentinel_tol`.
pub fn lp_spacetime_norm_checked(
    f0: &SpectralField,
    p: f64,
    policy: &GridPolicy,
    t_max: f64,
    evolution: &dyn Evolution,
    exec: Execution,
) -> Result<NormMeasurement> {
    let grid = policy.resolve(f0, p, t_max)?;
    policy.check_cost(f0.dim(), &grid)?;
    let value = lp_spacetime_norm(f0, p, &grid, evolution, exec)?;
    sentinel(value, grid, policy, || {
        lp_spacetime_norm(f0, p, &grid.refined(), evolution, exec)
    })
}

pub(crate) fn sentinel<F>(value: f64, grid: SpaceTimeGrid, policy: &GridPolicy, refine: F) -> Result<NormMeasurement>
where
    F: FnOnce() -> Result<f64>,
{
    let Some(tol) = policy.sentinel_tol else {
        return Ok(NormMeasurement {
            value,
            grid,
            refined: None,
            rel_change: None,
        });
    };
    let refined = refine()?;
    let change = if refined == 0.0 {
        value.abs()
    } else {
        (value - refined).abs() / refined.abs()
    };
    if change > tol {
        return Err(LabError::UnderResolved {
            base: value,
            refined,
            change,
            tol,
        });
    }
    Ok(NormMeasurement {
        value,
        grid,
        refined: Some(refined),
        rel_change: Some(change),
    })
}
