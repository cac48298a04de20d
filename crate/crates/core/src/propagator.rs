//! The free flow `e^{itΔ±}`, the hyperbolic Galilean boost and Duhamel
//! quadrature.
//!
//! Phase convention: `evolve` multiplies `f̂(k)` by `e^{−2πi t |k|²_±}`, so
//! `u(t, x) = Σ_k e^{2πi(k·x − t|k|²_±)} f̂(k)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{Evolution, SpectralField};
use crate::lattice::{project, Cube, CutoffProfile, Selector};

/// `e^{−2πi t s}`, with `t·s` reduced mod 1 before the trigonometric call.
#[inline]
pub fn phase(s: f64, t: f64) -> Complex64 {
    let theta = (t * s).rem_euclid(1.0);
    Complex64::cis(-std::f64::consts::TAU * theta)
}

pub fn evolve(f: &SpectralField, t: f64) -> SpectralField {
    if t == 0.0 {
        return f.clone();
    }
    let sig = f.sig().clone();
    let mut out = f.clone();
    out.map_coeffs(|k, c| {
        if c == Complex64::default() {
            c
        } else {
            c * phase(sig.symbol_unchecked(k), t)
        }
    });
    out
}

/// [`evolve`] as an [`Evolution`] handle.
#[derive(Clone, Copy, Debug, Default)]
pub struct FreeEvolution;

impl Evolution for FreeEvolution {
    fn evolve(&self, f: &SpectralField, t: f64) -> SpectralField {
        evolve(f, t)
    }
}

/// Modulation and drift produced by recentering a cube at `r`.
///
/// With `H = −|·|²_±` and `ε̄r_j = −ε_j r_j` for `j < j0`, `+ε_j r_j`
/// otherwise:
/// `e^{itΔ±}(P_C f)(x) = e^{2πi(x·r + tH(r))} · e^{itΔ±}(P_{C−r} f₀)(x + 2tε̄r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostDescriptor {
    pub center: Vec<i64>,
    pub t: f64,
    /// `H(r)`.
    pub h_center: f64,
    /// `ε̄r`.
    pub eps_bar_r: Vec<f64>,
}

impl BoostDescriptor {
    /// Drift velocity `2ε̄r`.
    pub fn velocity(&self) -> Vec<f64> {
        self.eps_bar_r.iter().map(|v| 2.0 * v).collect()
    }

    /// `e^{2πi(x·r + tH(r))}`.
    pub fn modulation(&self, x: &[f64]) -> Complex64 {
        let xr: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(xj, &rj)| (xj * rj as f64).rem_euclid(1.0))
            .sum();
        let th = (self.t * self.h_center).rem_euclid(1.0);
        Complex64::cis(std::f64::consts::TAU * (xr + th))
    }

    /// `x + 2tε̄r`, reduced to the unit torus.
    pub fn shifted(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.eps_bar_r)
            .map(|(xj, v)| (xj + 2.0 * self.t * v).rem_euclid(1.0))
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.h_center == 0.0 && self.eps_bar_r.iter().all(|v| *v == 0.0)
    }
}

/// Recenters `P_C f` at the cube's integer center `r`: the returned field is
/// `f₀(k) = (P_C f)(k + r)`, supported in `C − r`.
pub fn galilean_boost(f: &SpectralField, cube: &Cube, t: f64) -> Result<(SpectralField, BoostDescriptor)> {
    let r = cube.integer_center().ok_or(LabError::NonIntegerCenter)?;
    let sig = f.sig();
    if r.len() != sig.dim() {
        return Err(LabError::DimensionMismatch {
            expected: sig.dim(),
            got: r.len(),
        });
    }
    let pc = project(f, &Selector::Cube(cube.clone()), &CutoffProfile::Sharp);
    let half: Vec<usize> = f
        .half()
        .iter()
        .zip(&r)
        .map(|(&m, rj)| m + rj.unsigned_abs() as usize)
        .collect();
    let mut f0 = SpectralField::zeros(sig, &half)?;
    let mut shifted = vec![0i64; r.len()];
    pc.for_each_mode(|idx, k| {
        let c = pc.coeffs()[idx];
        if c != Complex64::default() {
            for j in 0..k.len() {
                shifted[j] = k[j] - r[j];
            }
            f0.set(&shifted, c).expect("box enlarged by |r|");
        }
    });
    let eps_bar_r = (0..sig.dim())
        .map(|j| -sig.coefficient(j) * r[j] as f64)
        .collect();
    let desc = BoostDescriptor {
        h_center: -sig.symbol_unchecked(&r),
        center: r,
        t,
        eps_bar_r,
    };
    Ok((f0, desc))
}

/// Largest pointwise gap between the two sides of the boost identity over
/// the grid `x = n/G`, `n ∈ {0,…,G−1}^d`.
pub fn boost_deviation(f: &SpectralField, cube: &Cube, t: f64, g: usize) -> Result<f64> {
    let (f0, desc) = galilean_boost(f, cube, t)?;
    let pc = project(f, &Selector::Cube(cube.clone()), &CutoffProfile::Sharp);
    let lhs = evolve(&pc, t);
    let rhs = evolve(&f0, t);
    let d = f.dim();
    let mut x = vec![0.0; d];
    let mut worst = 0.0f64;
    for flat in 0..g.pow(d as u32) {
        let mut r = flat;
        for j in (0..d).rev() {
            x[j] = (r % g) as f64 / g as f64;
            r /= g;
        }
        let a = lhs.eval_at(&x);
        let b = desc.modulation(&x) * rhs.eval_at(&desc.shifted(&x));
        worst = worst.max((a - b).norm());
    }
    Ok(worst)
}

/// `∫₀^t e^{i(t−τ)Δ±} F(τ) dτ` by the composite trapezoid rule on `n_quad`
/// equally spaced nodes, applied to `w(τ) = e^{−iτΔ±}F(τ)`.
///
/// All forcing values must live on the same box.
pub fn duhamel<F>(forcing: F, t: f64, n_quad: usize) -> Result<SpectralField>
where
    F: Fn(f64) -> SpectralField,
{
    if n_quad < 2 {
        return Err(LabError::TooFewNodes(n_quad));
    }
    let h = t / (n_quad - 1) as f64;
    let mut acc: Option<SpectralField> = None;
    for i in 0..n_quad {
        let tau = i as f64 * h;
        let w = evolve(&forcing(tau), -tau);
        let weight = if i == 0 || i == n_quad - 1 { 0.5 * h } else { h };
        match acc.as_mut() {
            None => acc = Some(w.scaled(Complex64::new(weight, 0.0))),
            Some(a) => {
                if a.half() != w.half() {
                    return Err(LabError::InvalidParameter("forcing changes its box".into()));
                }
                a.coeffs_mut()
                    .iter_mut()
                    .zip(w.coeffs())
                    .for_each(|(x, y)| *x += y * weight);
            }
        }
    }
    Ok(evolve(&acc.expect("n_quad >= 2"), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Signature;

    #[test]
    fn zero_time_is_identity() {
        let sig = Signature::unit(2, 1).unwrap();
        let f = SpectralField::from_fn(&sig, &[2, 2], |k| Complex64::new(k[0] as f64, k[1] as f64)).unwrap();
        assert_eq!(evolve(&f, 0.0), f);
    }

    #[test]
    fn light_cone_modes_are_stationary() {
        let sig = Signature::unit(2, 1).unwrap();
        let mut f = SpectralField::zeros_cube(&sig, 1);
        f.set(&[1, 1], Complex64::new(1.0, 0.5)).unwrap();
        f.set(&[1, -1], Complex64::new(-0.3, 2.0)).unwrap();
        for t in [0.1, 0.37, 0.9] {
            assert_eq!(evolve(&f, t), f);
        }
    }

    #[test]
    fn phase_sign() {
        let sig = Signature::unit(1, 1).unwrap();
        let f = SpectralField::single_mode(&sig, &[1], Complex64::new(1.0, 0.0)).unwrap();
        let u = evolve(&f, 0.25);
        assert!((u.get(&[1]) - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_center_boost_is_identity() {
        let sig = Signature::unit(2, 1).unwrap();
        let f = SpectralField::from_fn(&sig, &[2, 2], |k| Complex64::new(1.0, k[0] as f64)).unwrap();
        let cube = Cube::with_side(&[0, 0], 4).unwrap();
        let (f0, desc) = galilean_boost(&f, &cube, 0.3).unwrap();
        assert!(desc.is_identity());
        assert_eq!(f0, f);
    }

    #[test]
    fn boost_descriptor_example() {
        let sig = Signature::unit(2, 1).unwrap();
        let f = SpectralField::zeros_cube(&sig, 8);
        let cube = Cube::with_side(&[5, -3], 4).unwrap();
        let (_, desc) = galilean_boost(&f, &cube, 0.1).unwrap();
        assert_eq!(desc.eps_bar_r, vec![-5.0, -3.0]);
        let v = desc.velocity();
        assert_eq!(v, vec![-10.0, -6.0]);
        assert_eq!(desc.h_center, -(25.0 - 9.0));
    }

    #[test]
    fn non_integer_center_rejected() {
        let sig = Signature::unit(1, 1).unwrap();
        let f = SpectralField::zeros_cube(&sig, 2);
        let cube = Cube::new(vec![num_rational::Rational64::new(1, 2)], 1.into()).unwrap();
        assert!(matches!(galilean_boost(&f, &cube, 0.1), Err(LabError::NonIntegerCenter)));
    }

    #[test]
    fn duhamel_edge_cases() {
        let sig = Signature::unit(2, 1).unwrap();
        let zero = SpectralField::zeros_cube(&sig, 2);
        let out = duhamel(|_| zero.clone(), 0.7, 5).unwrap();
        assert_eq!(out.mass(), 0.0);
        assert!(matches!(duhamel(|_| zero.clone(), 0.7, 1), Err(LabError::TooFewNodes(1))));
        // symbol zero on the support: integrand constant, trapezoid exact
        let g = SpectralField::single_mode(&sig, &[2, 2], Complex64::new(0.4, -1.0)).unwrap();
        let out = duhamel(|_| g.clone(), 0.7, 2).unwrap();
        assert!((out.get(&[2, 2]) - g.get(&[2, 2]) * 0.7).norm() < 1e-15);
    }
}
