//! Spectral fields on the torus.
//!
//! Fourier convention: `f(x) = Σ_k e^{2πi k·x} f̂(k)` on `T^d = [0,1)^d`, so
//! the `L²` norm of a field is the `ℓ²` norm of its coefficients.

mod io;
mod norms;
mod resonant;
mod tensor;

pub use io::{read_binary, write_binary};
pub use norms::{
    bilinear_l2_quadrature, lp_spacetime_norm, lp_spacetime_norm_checked, Evolution, GridPolicy, NormMeasurement,
    SpaceTimeGrid, Static,
};
pub use resonant::{bilinear_l2_squared, l4_norm_resonant};
pub use tensor::{lp_norm_tensor, Factor, TensorField};
pub(crate) use tensor::AxisSampler;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fft::NdFft;
use crate::lattice::Signature;

/// Complex coefficients on the box `Π_j [−M_j, M_j]`, stored row-major with
/// the last coordinate fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct SpectralField {
    sig: Signature,
    half: Vec<usize>,
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldRepr {
    sig: Signature,
    half: Vec<usize>,
    coeffs: Vec<Complex64>,
}

impl TryFrom<FieldRepr> for SpectralField {
    type Error = LabError;

    fn try_from(r: FieldRepr) -> Result<Self> {
        SpectralField::from_coeffs(&r.sig, &r.half, r.coeffs)
    }
}

impl From<SpectralField> for FieldRepr {
    fn from(f: SpectralField) -> Self {
        FieldRepr {
            sig: f.sig,
            half: f.half,
            coeffs: f.coeffs,
        }
    }
}

impl SpectralField {
    pub fn zeros(sig: &Signature, half: &[usize]) -> Result<Self> {
        if half.len() != sig.dim() {
            return Err(LabError::DimensionMismatch {
                expected: sig.dim(),
                got: half.len(),
            });
        }
        let len = half.iter().map(|m| 2 * m + 1).product();
        Ok(Self {
            sig: sig.clone(),
            half: half.to_vec(),
            coeffs: vec![Complex64::default(); len],
        })
    }

    /// Same half width `m` in every direction.
    pub fn zeros_cube(sig: &Signature, m: usize) -> Self {
        Self::zeros(sig, &vec![m; sig.dim()]).expect("dimension matches by construction")
    }

    pub fn from_fn<F: FnMut(&[i64]) -> Complex64>(
        sig: &Signature,
        half: &[usize],
        mut f: F,
    ) -> Result<Self> {
        let mut out = Self::zeros(sig, half)?;
        out.map_coeffs(|k, _| f(k));
        Ok(out)
    }

    pub fn from_coeffs(sig: &Signature, half: &[usize], coeffs: Vec<Complex64>) -> Result<Self> {
        let mut out = Self::zeros(sig, half)?;
        if coeffs.len() != out.coeffs.len() {
            return Err(LabError::Format(format!(
                "expected {} coefficients, got {}",
                out.coeffs.len(),
                coeffs.len()
            )));
        }
        out.coeffs = coeffs;
        Ok(out)
    }

    /// A single Fourier mode `c e^{2πi k·x}` on the smallest box holding it.
    pub fn single_mode(sig: &Signature, k: &[i64], c: Complex64) -> Result<Self> {
        let half: Vec<usize> = k.iter().map(|kj| kj.unsigned_abs() as usize).collect();
        let mut out = Self::zeros(sig, &half)?;
        out.set(k, c)?;
        Ok(out)
    }

    pub fn sig(&self) -> &Signature {
        &self.sig
    }

    pub fn dim(&self) -> usize {
        self.sig.dim()
    }

    pub fn half(&self) -> &[usize] {
        &self.half
    }

    pub fn max_half(&self) -> usize {
        self.half.iter().copied().max().unwrap_or(0)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.half.len() {
            return None;
        }
        let mut idx = 0usize;
        for (&kj, &m) in k.iter().zip(&self.half) {
            if kj.unsigned_abs() as usize > m {
                return None;
            }
            idx = idx * (2 * m + 1) + (kj + m as i64) as usize;
        }
        Some(idx)
    }

    /// Lattice point stored at flat index `idx`.
    pub fn mode_at(&self, mut idx: usize, k: &mut [i64]) {
        for j in (0..self.half.len()).rev() {
            let w = 2 * self.half[j] + 1;
            k[j] = (idx % w) as i64 - self.half[j] as i64;
            idx /= w;
        }
    }

    /// Coefficient at `k`; zero outside the box.
    pub fn get(&self, k: &[i64]) -> Complex64 {
        self.index_of(k).map_or(Complex64::default(), |i| self.coeffs[i])
    }

    pub fn set(&mut self, k: &[i64], c: Complex64) -> Result<()> {
        match self.index_of(k) {
            Some(i) => {
                self.coeffs[i] = c;
                Ok(())
            }
            None => Err(LabError::InvalidParameter(format!(
                "mode {k:?} outside box {:?}",
                self.half
            ))),
        }
    }

    /// Visits every stored mode in storage order.
    pub fn for_each_mode<F: FnMut(usize, &[i64])>(&self, mut f: F) {
        let d = self.half.len();
        let mut k: Vec<i64> = self.half.iter().map(|&m| -(m as i64)).collect();
        for idx in 0..self.coeffs.len() {
            f(idx, &k);
            for j in (0..d).rev() {
                if k[j] < self.half[j] as i64 {
                    k[j] += 1;
                    break;
                }
                k[j] = -(self.half[j] as i64);
            }
        }
    }

    pub fn map_coeffs<F: FnMut(&[i64], Complex64) -> Complex64>(&mut self, mut f: F) {
        let d = self.half.len();
        let half = self.half.clone();
        let mut k: Vec<i64> = half.iter().map(|&m| -(m as i64)).collect();
        for c in self.coeffs.iter_mut() {
            *c = f(&k, *c);
            for j in (0..d).rev() {
                if k[j] < half[j] as i64 {
                    k[j] += 1;
                    break;
                }
                k[j] = -(half[j] as i64);
            }
        }
    }

    /// `Σ_k |f̂(k)|²`.
    pub fn mass(&self) -> f64 {
        crate::stats::compensated_sum(self.coeffs.iter().map(|c| c.norm_sqr()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// `(Σ_k ⟨k⟩^{2s} |f̂(k)|²)^{1/2}` with `⟨k⟩² = 1 + |k|²`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let mut acc = crate::stats::CompensatedSum::new();
        self.for_each_mode(|idx, k| {
            let c = self.coeffs[idx];
            if c != Complex64::default() {
                let jk = 1.0 + k.iter().map(|&x| (x * x) as f64).sum::<f64>();
                acc.add(jk.powf(s) * c.norm_sqr());
            }
        });
        acc.value().sqrt()
    }

    pub fn scaled(&self, lambda: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= lambda);
        out
    }

    /// Scales to unit `L²` norm; the zero field is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.l2_norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scaled(Complex64::new(1.0 / n, 0.0))
        }
    }

    /// Copies the coefficients into a box with half widths `half`,
    /// truncating modes that do not fit.
    pub fn resized(&self, half: &[usize]) -> Result<Self> {
        let mut out = Self::zeros(&self.sig, half)?;
        self.for_each_mode(|idx, k| {
            if let Some(j) = out.index_of(k) {
                out.coeffs[j] = self.coeffs[idx];
            }
        });
        Ok(out)
    }

    /// Same coefficients viewed under another signature of equal dimension.
    pub fn with_signature(&self, sig: &Signature) -> Result<Self> {
        if sig.dim() != self.dim() {
            return Err(LabError::DimensionMismatch {
                expected: self.dim(),
                got: sig.dim(),
            });
        }
        let mut out = self.clone();
        out.sig = sig.clone();
        Ok(out)
    }

    fn same_box(&self, other: &Self) -> Result<()> {
        if self.half != other.half {
            return Err(LabError::InvalidParameter(format!(
                "box mismatch: {:?} vs {:?}",
                self.half, other.half
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_box(other)?;
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_box(other)?;
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    /// Largest `|k|_∞` carrying a nonzero coefficient, `None` for the zero field.
    pub fn support_radius(&self) -> Option<usize> {
        let mut k = vec![0i64; self.dim()];
        let mut best = None;
        for (idx, c) in self.coeffs.iter().enumerate() {
            if *c != Complex64::default() {
                self.mode_at(idx, &mut k);
                let r = k.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0);
                best = Some(best.map_or(r, |b: usize| b.max(r)));
            }
        }
        best
    }

    /// Direct evaluation `Σ_k e^{2πi k·x} f̂(k)`.
    pub fn eval_at(&self, x: &[f64]) -> Complex64 {
        let mut acc = Complex64::default();
        self.for_each_mode(|idx, k| {
            let c = self.coeffs[idx];
            if c != Complex64::default() {
                let ph: f64 = k.iter().zip(x).map(|(&kj, &xj)| (kj as f64 * xj).rem_euclid(1.0)).sum();
                acc += c * Complex64::cis(std::f64::consts::TAU * ph);
            }
        });
        acc
    }

    fn check_grid(&self, g: usize) -> Result<()> {
        let min = 2 * self.max_half() + 1;
        if g < min {
            Err(LabError::BelowNyquist { g, min })
        } else {
            Ok(())
        }
    }

    /// Values on the uniform grid `x = n/G`, `n ∈ {0,…,G−1}^d`.
    pub fn sample_spatial(&self, g: usize) -> Result<SpatialArray> {
        self.check_grid(g)?;
        let plan = NdFft::new(&vec![g; self.dim()]);
        let mut data = vec![Complex64::default(); plan.len()];
        self.scatter_into(g, &mut data);
        plan.inverse(&mut data);
        Ok(SpatialArray {
            d: self.dim(),
            g,
            data,
        })
    }

    /// Places coefficient `k` at grid index `k mod G`. `data` must be zeroed.
    pub(crate) fn scatter_into(&self, g: usize, data: &mut [Complex64]) {
        let d = self.dim();
        let gi = g as i64;
        self.for_each_mode(|idx, k| {
            let c = self.coeffs[idx];
            if c != Complex64::default() {
                let mut flat = 0usize;
                for &kj in k.iter().take(d) {
                    flat = flat * g + kj.rem_euclid(gi) as usize;
                }
                data[flat] += c;
            }
        });
    }

    /// Inverse of [`SpectralField::sample_spatial`], keeping modes in the box `half`.
    pub fn from_spatial(sig: &Signature, arr: &SpatialArray, half: &[usize]) -> Result<Self> {
        if arr.d != sig.dim() {
            return Err(LabError::DimensionMismatch {
                expected: sig.dim(),
                got: arr.d,
            });
        }
        let mut out = Self::zeros(sig, half)?;
        out.check_grid(arr.g)?;
        let plan = NdFft::new(&vec![arr.g; arr.d]);
        let mut data = arr.data.clone();
        plan.forward(&mut data);
        out.gather_from(arr.g, &data, 1.0 / plan.len() as f64);
        Ok(out)
    }

    pub(crate) fn gather_from(&mut self, g: usize, data: &[Complex64], scale: f64) {
        let gi = g as i64;
        let half = self.half.clone();
        let mut k: Vec<i64> = half.iter().map(|&m| -(m as i64)).collect();
        let d = half.len();
        for c in self.coeffs.iter_mut() {
            let mut flat = 0usize;
            for &kj in &k {
                flat = flat * g + kj.rem_euclid(gi) as usize;
            }
            *c = data[flat] * scale;
            for j in (0..d).rev() {
                if k[j] < half[j] as i64 {
                    k[j] += 1;
                    break;
                }
                k[j] = -(half[j] as i64);
            }
        }
    }
}

/// Field values on a uniform `G^d` grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialArray {
    pub d: usize,
    pub g: usize,
    pub data: Vec<Complex64>,
}

impl SpatialArray {
    pub fn get(&self, idx: &[usize]) -> Complex64 {
        let flat = idx.iter().fold(0usize, |acc, &i| acc * self.g + i);
        self.data[flat]
    }

    /// Grid point `n/G` for flat index `flat`.
    pub fn point(&self, mut flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        for j in (0..self.d).rev() {
            x[j] = (flat % self.g) as f64 / self.g as f64;
            flat /= self.g;
        }
        x
    }
}
