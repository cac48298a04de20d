//! Scaling experiments on free evolutions: Strichartz norm sweeps over
//! dyadic `N` with log-log fits, bilinear product sweeps and multilinear
//! ratio tables.
//!
//! Free evolutions of `L²`-normalized data stand in for the adapted function
//! space norms, which can only be bounded by the data norms from one side.
//! These experiments can corroborate upper bounds and expose growth; they
//! cannot refute an estimate.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Rational64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exec::Execution;
use crate::field::{
    bilinear_l2_quadrature, bilinear_l2_squared, l4_norm_resonant, lp_norm_tensor,
    lp_spacetime_norm_checked, AxisSampler, Factor, GridPolicy, SpaceTimeGrid, SpectralField,
    TensorField,
};
use crate::lattice::{critical_index, Signature};
use crate::propagator::FreeEvolution;
use crate::seed::{streams, task_rng};
use crate::stats::{compensated_sum, fit_log2, LineFit};

/// Exponent `a` in `‖e^{itΔ±}P_{≤N}φ‖_{L^p} ≲ N^a ‖φ‖_{L²}`:
/// `d/2 − (d+2)/p` for `p ≥ p*`, `(1/2 − 1/p)δ` for `2 ≤ p < p*`.
pub fn predict_exponent(sig: &Signature, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(LabError::ExponentBelowTwo(p));
    }
    let d = sig.dim() as f64;
    Ok(if p >= sig.admissible_threshold() {
        d / 2.0 - (d + 2.0) / p
    } else {
        (0.5 - 1.0 / p) * sig.delta() as f64
    })
}

pub fn predict_exponent_exact(sig: &Signature, p: Rational64) -> Result<Rational64> {
    let two = Rational64::from_integer(2);
    if p < two {
        return Err(LabError::ExponentBelowTwo(*p.numer() as f64 / *p.denom() as f64));
    }
    let d = Rational64::from_integer(sig.dim() as i64);
    Ok(if p >= sig.admissible_threshold_exact() {
        d / two - (d + two) / p
    } else {
        (Rational64::new(1, 2) - p.recip()) * Rational64::from_integer(sig.delta() as i64)
    })
}

type CustomBuilder = Arc<dyn Fn(&Signature, u64, u64) -> SpectralField + Send + Sync>;

/// Initial data indexed by the frequency scale `N`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataFamily {
    /// All coefficients 1 on `[−N, N]^d`.
    Dirichlet,
    /// Seeded complex Gaussian coefficients on `[−N, N]^d`.
    Gaussian,
    /// Indicator of the cube `c + [−N, N]^d`.
    Cube { center: Vec<i64> },
    /// Ones on the light-cone diagonal `{n(e₁ + e₂) : |n| ≤ N}`.
    Diagonal,
    #[serde(skip)]
    Custom { name: String, build: CustomBuilder },
}

impl fmt::Debug for DataFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Data either in separable form or as a dense coefficient box.
#[derive(Clone, Debug)]
pub enum InitialData {
    Tensor(TensorField),
    Dense(SpectralField),
}

impl InitialData {
    pub fn to_field(&self) -> SpectralField {
        match self {
            InitialData::Tensor(t) => t.to_field(),
            InitialData::Dense(f) => f.clone(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        match self {
            InitialData::Tensor(t) => t.l2_norm(),
            InitialData::Dense(f) => f.l2_norm(),
        }
    }

    fn scaled(&self, lambda: f64) -> Self {
        let z = Complex64::new(lambda, 0.0);
        match self {
            InitialData::Tensor(t) => InitialData::Tensor(t.scaled(z)),
            InitialData::Dense(f) => InitialData::Dense(f.scaled(z)),
        }
    }
}

fn ones(lo: i64, hi: i64, half: usize) -> Factor {
    Factor::from_fn(half, |k| {
        if (lo..=hi).contains(&k) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::default()
        }
    })
}

/// Complex Gaussian with `E|z|² = 1`.
pub fn gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

impl DataFamily {
    pub fn label(&self) -> String {
        match self {
            DataFamily::Dirichlet => "dirichlet".into(),
            DataFamily::Gaussian => "gaussian".into(),
            DataFamily::Cube { center } => format!("cube{center:?}"),
            DataFamily::Diagonal => "diagonal".into(),
            DataFamily::Custom { name, .. } => format!("custom:{name}"),
        }
    }

    /// Unit-`L²` data at scale `N`.
    pub fn build(&self, sig: &Signature, n: u64, seed: u64) -> Result<InitialData> {
        let ni = n as i64;
        let d = sig.dim();
        let data = match self {
            DataFamily::Dirichlet => {
                InitialData::Tensor(TensorField::uniform(sig, ones(-ni, ni, n as usize)))
            }
            DataFamily::Cube { center } => {
                if center.len() != d {
                    return Err(LabError::DimensionMismatch {
                        expected: d,
                        got: center.len(),
                    });
                }
                let factors = center
                    .iter()
                    .map(|&c| ones(c - ni, c + ni, (c.unsigned_abs() + n) as usize))
                    .collect();
                InitialData::Tensor(TensorField::new(sig, factors)?)
            }
            DataFamily::Gaussian => {
                let mut rng = task_rng(seed, streams::STRICHARTZ, n);
                InitialData::Dense(SpectralField::from_fn(sig, &vec![n as usize; d], |_| {
                    gaussian(&mut rng)
                })?)
            }
            DataFamily::Diagonal => {
                if d < 2 {
                    return Err(LabError::InvalidParameter(
                        "the diagonal family needs d ≥ 2".into(),
                    ));
                }
                InitialData::Dense(SpectralField::from_fn(sig, &vec![n as usize; d], |k| {
                    let on = k[0] == k[1] && k[2..].iter().all(|&x| x == 0);
                    Complex64::new(f64::from(u8::from(on)), 0.0)
                })?)
            }
            DataFamily::Custom { build, .. } => InitialData::Dense(build(sig, n, seed)),
        };
        let norm = data.l2_norm();
        if norm == 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "{} data vanish at N = {n}",
                self.label()
            )));
        }
        Ok(data.scaled(1.0 / norm))
    }
}

/// How a space-time norm is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormRoute {
    /// Separable data use `Tensor`; `p = 4` with integer weights and an
    /// integer horizon uses `Resonant`; everything else `Quadrature`.
    Auto,
    /// Full `G^d × n_t` Riemann sum.
    Quadrature,
    /// Per-axis transforms for separable data.
    Tensor,
    /// Exact resonance sum (`p = 4`).
    Resonant,
}

/// Acceptance band around the prediction: `predicted − below ≤ slope ≤
/// predicted + above`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub below: f64,
    pub above: f64,
}

impl Tolerance {
    pub fn symmetric(t: f64) -> Self {
        Self { below: t, above: t }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub predicted: f64,
    /// `slope − predicted`.
    pub deviation: f64,
    pub tolerance: Option<Tolerance>,
    pub pass: Option<bool>,
}

impl ScalingFit {
    pub fn new(line: LineFit, predicted: f64, tolerance: Option<Tolerance>) -> Self {
        let deviation = line.slope - predicted;
        Self {
            slope: line.slope,
            intercept: line.intercept,
            residual: line.residual,
            predicted,
            deviation,
            pass: tolerance.map(|t| -t.below <= deviation && deviation <= t.above),
            tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sig: Signature,
    pub p: f64,
    pub family: DataFamily,
    pub ns: Vec<u64>,
    pub policy: GridPolicy,
    pub route: NormRoute,
    pub seed: u64,
    pub t_max: f64,
    /// Multiplies the unit-norm data; norms are divided by it again.
    pub amplitude: f64,
    pub tolerance: Option<Tolerance>,
}

impl SweepConfig {
    pub fn new(sig: Signature, p: f64, family: DataFamily, ns: Vec<u64>) -> Self {
        Self {
            sig,
            p,
            family,
            ns,
            policy: GridPolicy::default(),
            route: NormRoute::Auto,
            seed: 0,
            t_max: 1.0,
            amplitude: 1.0,
            tolerance: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    /// Norm of the unit-`L²` data's evolution.
    pub norm: f64,
    pub route: NormRoute,
    pub grid: Option<SpaceTimeGrid>,
    pub rel_change: Option<f64>,
}

/// An `N` whose evaluation was abandoned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub n: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormSweep {
    pub sig: Signature,
    pub p: f64,
    pub family: String,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrichartzResult {
    pub sweep: NormSweep,
    pub fit: ScalingFit,
}

fn check_dyadic(ns: &[u64]) -> Result<()> {
    if ns.iter().any(|n| !n.is_power_of_two()) || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::InvalidParameter(format!(
            "N list {ns:?} is not strictly increasing and dyadic"
        )));
    }
    Ok(())
}

fn integer_horizon(t: f64) -> bool {
    t >= 1.0 && t.fract() == 0.0
}

fn measure(cfg: &SweepConfig, data: &InitialData, exec: Execution) -> Result<SweepRow> {
    let route = match cfg.route {
        NormRoute::Auto => match data {
            InitialData::Tensor(_) => NormRoute::Tensor,
            InitialData::Dense(_)
                if cfg.p == 4.0
                    && cfg.sig.integer_coefficients().is_some()
                    && integer_horizon(cfg.t_max) =>
            {
                NormRoute::Resonant
            }
            InitialData::Dense(_) => NormRoute::Quadrature,
        },
        r => r,
    };
    let (norm, grid, rel_change) = match route {
        NormRoute::Tensor => {
            let InitialData::Tensor(t) = data else {
                return Err(LabError::InvalidParameter(
                    "tensor route needs separable data".into(),
                ));
            };
            let m = lp_norm_tensor(t, cfg.p, &cfg.policy, cfg.t_max, exec)?;
            (m.value, Some(m.grid), m.rel_change)
        }
        NormRoute::Resonant => {
            if cfg.p != 4.0 {
                return Err(LabError::ExactUnavailable(format!("p = {} is not 4", cfg.p)));
            }
            (l4_norm_resonant(&data.to_field(), cfg.t_max, exec)?, None, None)
        }
        NormRoute::Quadrature | NormRoute::Auto => {
            let m = lp_spacetime_norm_checked(
                &data.to_field(),
                cfg.p,
                &cfg.policy,
                cfg.t_max,
                &FreeEvolution,
                exec,
            )?;
            (m.value, Some(m.grid), m.rel_change)
        }
    };
    Ok(SweepRow {
        n: 0,
        norm,
        route,
        grid,
        rel_change,
    })
}

/// Measures `‖e^{itΔ±}φ_N‖_{L^p([0,T] × T^d)}` for unit-norm data at each
/// `N` and fits the log-log slope against [`predict_exponent`].
///
/// An `N` whose grid fails the refinement sentinel is recorded in
/// `failures`; the fit needs at least three surviving points.
pub fn strichartz_sweep(cfg: &SweepConfig, exec: Execution) -> Result<StrichartzResult> {
    check_dyadic(&cfg.ns)?;
    if cfg.ns.len() < 3 {
        return Err(LabError::InsufficientPoints(cfg.ns.len()));
    }
    if !(cfg.amplitude > 0.0) {
        return Err(LabError::InvalidParameter("amplitude must be positive".into()));
    }
    let predicted = predict_exponent(&cfg.sig, cfg.p)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &n in &cfg.ns {
        let data = cfg.family.build(&cfg.sig, n, cfg.seed)?.scaled(cfg.amplitude);
        match measure(cfg, &data, exec) {
            Ok(mut row) => {
                row.n = n;
                row.norm /= cfg.amplitude;
                rows.push(row);
            }
            Err(e @ LabError::UnderResolved { .. }) => failures.push(SweepFailure {
                n,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if rows.len() < 3 {
        return Err(LabError::InsufficientPoints(rows.len()));
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let line = fit_log2(&ns, &norms).ok_or(LabError::InsufficientPoints(rows.len()))?;
    Ok(StrichartzResult {
        sweep: NormSweep {
            sig: cfg.sig.clone(),
            p: cfg.p,
            family: cfg.family.label(),
            rows,
            failures,
        },
        fit: ScalingFit::new(line, predicted, cfg.tolerance),
    })
}

/// Data supported on the sharp dyadic band `N/2 < |k|_∞ ≤ N` (`|k|_∞ ≤ 1`
/// for `N = 1`) with seeded Gaussian coefficients, unit `L²` norm.
pub fn gaussian_band(sig: &Signature, n: u64, seed: u64, stream: u64, index: u64) -> SpectralField {
    let mut rng = task_rng(seed, stream, index);
    let lo = if n <= 1 { -1 } else { (n / 2) as i64 };
    let f = SpectralField::from_fn(sig, &vec![n as usize; sig.dim()], |k| {
        let r = k.iter().map(|x| x.abs()).max().unwrap_or(0);
        if r > lo {
            gaussian(&mut rng)
        } else {
            Complex64::default()
        }
    })
    .expect("dimension matches by construction");
    f.normalized()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BilinearConfig {
    pub sig: Signature,
    pub n1: u64,
    pub n2s: Vec<u64>,
    pub samples: usize,
    pub seed: u64,
    pub t_max: f64,
    pub policy: GridPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearRow {
    pub n2: u64,
    pub sample: usize,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BilinearSweep {
    pub rows: Vec<BilinearRow>,
    /// `(N₂, mean norm over samples)`.
    pub means: Vec<(u64, f64)>,
    pub fit: LineFit,
    pub exact: bool,
}

/// `‖u₁u₂‖_{L²([0,T] × T^d)}` for the free evolutions of two fields. Exact
/// when weights are integers and `T` is an integer, quadrature otherwise.
pub fn product_norm(
    f1: &SpectralField,
    f2: &SpectralField,
    t_max: f64,
    policy: &GridPolicy,
    exec: Execution,
) -> Result<(f64, bool)> {
    if f1.sig().integer_coefficients().is_some() && integer_horizon(t_max) {
        return Ok((bilinear_l2_squared(f1, f2, t_max, exec)?.sqrt(), true));
    }
    let m = f1.max_half() + f2.max_half();
    let (g, n_t) = policy.sizes(f1.sig(), m, (0.0, 0.0), 2.0, t_max);
    let grid = SpaceTimeGrid {
        t_max,
        n_t,
        g: g.max(2 * m + 1),
        oversample: policy.oversample,
    };
    policy.check_cost(f1.dim(), &grid)?;
    Ok((bilinear_l2_quadrature(f1, f2, &grid, &FreeEvolution, exec)?.sqrt(), false))
}

/// `‖P_{N₁}u₁ · P_{N₂}u₂‖_{L²_{t,x}}` for unit-norm Gaussian band data,
/// averaged over seeds, with the slope of the mean against `N₂`.
pub fn bilinear_sweep(cfg: &BilinearConfig, exec: Execution) -> Result<BilinearSweep> {
    let mut all = cfg.n2s.clone();
    all.push(cfg.n1);
    check_dyadic(&cfg.n2s)?;
    if cfg.n2s.iter().any(|&n2| n2 > cfg.n1) || !cfg.n1.is_power_of_two() {
        return Err(LabError::InvalidParameter("need dyadic N₂ ≤ N₁".into()));
    }
    if cfg.samples == 0 {
        return Err(LabError::InvalidParameter("at least one sample is needed".into()));
    }
    let mut rows = Vec::new();
    let mut exact = true;
    for s in 0..cfg.samples {
        let u1 = gaussian_band(&cfg.sig, cfg.n1, cfg.seed, streams::BILINEAR_HIGH, s as u64);
        for &n2 in &cfg.n2s {
            let index = ((s as u64) << 32) | n2;
            let u2 = gaussian_band(&cfg.sig, n2, cfg.seed, streams::BILINEAR_LOW, index);
            let (norm, ex) = product_norm(&u1, &u2, cfg.t_max, &cfg.policy, exec)?;
            exact &= ex;
            rows.push(BilinearRow { n2, sample: s, norm });
        }
    }
    let means: Vec<(u64, f64)> = cfg
        .n2s
        .iter()
        .map(|&n2| {
            let v: Vec<f64> = rows.iter().filter(|r| r.n2 == n2).map(|r| r.norm).collect();
            (n2, compensated_sum(v.iter().copied()) / v.len() as f64)
        })
        .collect();
    let x: Vec<f64> = means.iter().map(|m| m.0 as f64).collect();
    let y: Vec<f64> = means.iter().map(|m| m.1).collect();
    let fit = fit_log2(&x, &y).ok_or(LabError::InsufficientPoints(means.len()))?;
    Ok(BilinearSweep {
        rows,
        means,
        fit,
        exact,
    })
}

/// Unit-norm separable data with every axis factor equal to ones on the
/// one-dimensional band `N/2 < |k| ≤ N`; `{−1, 0, 1}` for `N = 1` and the
/// zero mode for `N = 0`.
pub fn band_tensor(sig: &Signature, n: u64) -> TensorField {
    let ni = n as i64;
    let f = Factor::from_fn(n as usize, |k| {
        let on = match n {
            0 => k == 0,
            1 => true,
            _ => k.abs() > ni / 2,
        };
        Complex64::new(f64::from(u8::from(on)), 0.0)
    });
    TensorField::uniform(sig, f).normalized()
}

/// Which of `u₁, u₂, u₃` enter the integrand conjugated.
pub type ConjugationPattern = [bool; 3];

pub fn all_patterns() -> Vec<ConjugationPattern> {
    (0..8u8)
        .map(|b| [b & 4 != 0, b & 2 != 0, b & 1 != 0])
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultilinearConfig {
    pub sig: Signature,
    pub m: usize,
    pub s: f64,
    /// Dyadic scales `(N₀, N₁, N₂, N₃)` of `v, u₁, u₂, u₃`.
    pub profile: [u64; 4],
    pub patterns: Vec<ConjugationPattern>,
    pub t_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultilinearValue {
    pub pattern: ConjugationPattern,
    pub integral: Complex64,
    pub ratio: f64,
}

/// `R = |∫₀^T∫ ũ₁ũ₂ũ₃ v̄| / (‖v₀‖_{H^{−s}} ‖u₀₁‖_{H^s} ‖u₀₂‖_{H^{s_c}} ‖u₀₃‖_{H^{s_c}})`
/// for free evolutions of [`band_tensor`] data, one value per pattern.
///
/// The integrand is separable, so each time sample costs one transform per
/// axis and field. With integer weights and an integer horizon the time
/// grid is fine enough for the sum to be exact.
pub fn multilinear_ratio(cfg: &MultilinearConfig, exec: Execution) -> Result<Vec<MultilinearValue>> {
    let sig = &cfg.sig;
    let d = sig.dim();
    let fields: Vec<TensorField> = cfg.profile.iter().map(|&n| band_tensor(sig, n)).collect();
    let s_c = critical_index(d, cfg.m).s_c;
    let denom = fields[0].sobolev_norm(-cfg.s)
        * fields[1].sobolev_norm(cfg.s)
        * fields[2].sobolev_norm(s_c)
        * fields[3].sobolev_norm(s_c);

    let reach: usize = fields.iter().map(|f| f.max_half()).sum();
    let g = 2 * reach + 1;
    let top: f64 = fields
        .iter()
        .map(|f| {
            let (lo, hi) = f.symbol_range();
            lo.abs().max(hi.abs())
        })
        .sum();
    let n_t = if sig.integer_coefficients().is_some() && integer_horizon(cfg.t_max) {
        (top * cfg.t_max).round() as usize + 1
    } else {
        GridPolicy::default().sizes(sig, reach, (-top, top), 2.0, cfg.t_max).1
    }
    .max(2);
    let sampler = AxisSampler::new(g);
    let dt = cfg.t_max / n_t as f64;
    let patterns = &cfg.patterns;

    let per_time = exec.map(n_t, |i| {
        let t = i as f64 * dt;
        let mut vals = vec![vec![Complex64::default(); g]; 4];
        let mut out = vec![Complex64::new(1.0, 0.0); patterns.len()];
        for j in 0..d {
            for (f, buf) in fields.iter().zip(vals.iter_mut()) {
                sampler.sample(f, j, t, buf);
            }
            for (pi, pat) in patterns.iter().enumerate() {
                let mut acc = Complex64::default();
                for x in 0..g {
                    let pick = |z: Complex64, c: bool| if c { z.conj() } else { z };
                    acc += pick(vals[1][x], pat[0])
                        * pick(vals[2][x], pat[1])
                        * pick(vals[3][x], pat[2])
                        * vals[0][x].conj();
                }
                out[pi] *= acc / g as f64;
            }
        }
        out
    });
    Ok(patterns
        .iter()
        .enumerate()
        .map(|(pi, &pattern)| {
            let re = compensated_sum(per_time.iter().map(|v| v[pi].re)) * dt;
            let im = compensated_sum(per_time.iter().map(|v| v[pi].im)) * dt;
            let integral = Complex64::new(re, im);
            MultilinearValue {
                pattern,
                integral,
                ratio: integral.norm() / denom,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultilinearRow {
    pub base: [u64; 4],
    pub scale: u64,
    pub pattern: ConjugationPattern,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultilinearStability {
    pub base: [u64; 4],
    pub pattern: ConjugationPattern,
    /// `max R / min R` over the rescaled profiles.
    pub variation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultilinearReport {
    pub rows: Vec<MultilinearRow>,
    pub stability: Vec<MultilinearStability>,
}

impl MultilinearReport {
    pub fn max_variation(&self) -> f64 {
        self.stability.iter().map(|s| s.variation).fold(0.0, f64::max)
    }
}

/// Ratio table over `base · 2^i`, `i < rescales + 1`, for every pattern.
pub fn multilinear_table(
    sig: &Signature,
    m: usize,
    s: f64,
    bases: &[[u64; 4]],
    rescales: u32,
    exec: Execution,
) -> Result<MultilinearReport> {
    let patterns = all_patterns();
    let mut rows = Vec::new();
    let mut stability = Vec::new();
    for &base in bases {
        let mut per_pattern = vec![Vec::new(); patterns.len()];
        for i in 0..=rescales {
            let scale = 1u64 << i;
            let profile = base.map(|n| n * scale);
            let cfg = MultilinearConfig {
                sig: sig.clone(),
                m,
                s,
                profile,
                patterns: patterns.clone(),
                t_max: 1.0,
            };
            for (pi, v) in multilinear_ratio(&cfg, exec)?.into_iter().enumerate() {
                per_pattern[pi].push(v.ratio);
                rows.push(MultilinearRow {
                    base,
                    scale,
                    pattern: v.pattern,
                    ratio: v.ratio,
                });
            }
        }
        for (pi, vals) in per_pattern.iter().enumerate() {
            let max = vals.iter().copied().fold(f64::MIN, f64::max);
            let min = vals.iter().copied().fold(f64::MAX, f64::min);
            stability.push(MultilinearStability {
                base,
                pattern: patterns[pi],
                variation: if min > 0.0 { max / min } else { f64::INFINITY },
            });
        }
    }
    Ok(MultilinearReport { rows, stability })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_examples() {
        let s31 = Signature::unit(3, 1).unwrap();
        assert!((predict_exponent(&s31, 4.0).unwrap() - 0.25).abs() < 1e-15);
        let s20 = Signature::unit(2, 0).unwrap();
        assert!((predict_exponent(&s20, 6.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            predict_exponent_exact(&s20, Rational64::from_integer(6)).unwrap(),
            Rational64::new(1, 3)
        );
        assert!(matches!(predict_exponent(&s20, 1.5), Err(LabError::ExponentBelowTwo(_))));
    }

    #[test]
    fn branch_continuity_is_exact() {
        for d in 1..=4usize {
            for j0 in 0..=d {
                let sig = Signature::unit(d, j0).unwrap();
                let p = sig.admissible_threshold_exact();
                let dd = Rational64::from_integer(d as i64);
                let two = Rational64::from_integer(2);
                let upper = dd / two - (dd + two) / p;
                let lower = (Rational64::new(1, 2) - p.recip()) * Rational64::from_integer(sig.delta() as i64);
                assert_eq!(upper, lower, "d={d} j0={j0}");
                assert_eq!(predict_exponent_exact(&sig, p).unwrap(), upper);
            }
        }
    }

    #[test]
    fn families_are_normalized() {
        let sig = Signature::unit(2, 1).unwrap();
        for fam in [
            DataFamily::Dirichlet,
            DataFamily::Gaussian,
            DataFamily::Cube { center: vec![3, -1] },
            DataFamily::Diagonal,
        ] {
            let data = fam.build(&sig, 4, 9).unwrap();
            assert!((data.to_field().l2_norm() - 1.0).abs() < 1e-14, "{fam:?}");
        }
        let one = Signature::unit(1, 1).unwrap();
        assert!(DataFamily::Diagonal.build(&one, 4, 0).is_err());
    }

    #[test]
    fn band_tensor_supports() {
        let sig = Signature::unit(1, 1).unwrap();
        let f = band_tensor(&sig, 8).to_field();
        let support: Vec<i64> = (-8..=8).filter(|&k| f.get(&[k]).norm() > 0.0).collect();
        assert_eq!(support, vec![-8, -7, -6, -5, 5, 6, 7, 8]);
        assert_eq!(band_tensor(&sig, 0).to_field().get(&[0]).re, 1.0);
        assert_eq!(band_tensor(&sig, 1).to_field().len(), 3);
    }

    #[test]
    fn constant_modes_give_unit_ratio() {
        let sig = Signature::unit(3, 1).unwrap();
        let cfg = MultilinearConfig {
            sig,
            m: 1,
            s: 0.37,
            profile: [0, 0, 0, 0],
            patterns: all_patterns(),
            t_max: 1.0,
        };
        for v in multilinear_ratio(&cfg, Execution::Sequential).unwrap() {
            assert!((v.ratio - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn pattern_enumeration() {
        let p = all_patterns();
        assert_eq!(p.len(), 8);
        assert_eq!(p[0], [false, false, false]);
        assert_eq!(p[7], [true, true, true]);
    }
}
