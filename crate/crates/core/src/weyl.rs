//! The truncated kernel `K_N^±(t,x) = [e^{itΔ±} P_{≤N} δ₀](x)` as a product
//! of quadratic Weyl sums, with rational approximation of `ε_j t`, major
//! arcs and the dispersive bound.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::lattice::{CutoffProfile, Signature};
use crate::seed::{streams, task_rng};
use crate::stats::{fit_log2, LineFit};

const TAU: f64 = std::f64::consts::TAU;

/// `frac(a·b)` for integer-valued `b`; the product's rounding error is
/// recovered by an FMA.
fn frac_product(a: f64, b: f64) -> f64 {
    let p = a * b;
    let e = a.mul_add(b, -p);
    ((p - p.floor()) + e).rem_euclid(1.0)
}

/// `Σ_k φ(k/N) e^{2πi(x k + sign·ε t k²)}` over the support of `φ(·/N)`.
pub fn weyl_sum_1d(n: u64, cutoff: &CutoffProfile, sign: i64, eps: f64, t: f64, x: f64) -> Complex64 {
    let reach = cutoff.reach(n);
    let nf = n as f64;
    // k² and k are integers, so both coefficients may be reduced mod 1. The
    // sign is applied after reduction so that both signs see the same phases.
    let c2 = (eps * t).rem_euclid(1.0);
    let c1 = x.rem_euclid(1.0);
    let s = sign.signum() as f64;
    let mut acc = Complex64::default();
    for k in -reach..=reach {
        let w = cutoff.phi(k as f64 / nf);
        if w == 0.0 {
            continue;
        }
        let theta = s * frac_product(c2, (k * k) as f64) + frac_product(c1, k as f64);
        acc += Complex64::cis(TAU * theta) * w;
    }
    acc
}

/// `Σ_{k mod q} e^{2πi a k²/q}` with exact residue arithmetic.
pub fn complete_gauss_sum(a: i64, q: u64) -> Complex64 {
    let qi = q as i128;
    let a = (a as i128).rem_euclid(qi);
    (0..qi)
        .map(|k| {
            let r = (a * (k * k % qi)) % qi;
            Complex64::cis(TAU * r as f64 / q as f64)
        })
        .sum()
}

/// `K_N^±(t,x) = Π_j S_j` with `S_j` the Weyl sum carrying sign `−1` on the
/// first `j0` coordinates and `+1` after, matching the propagator's phase.
pub fn kernel(n: u64, sig: &Signature, cutoff: &CutoffProfile, t: f64, x: &[f64]) -> Complex64 {
    assert_eq!(x.len(), sig.dim(), "evaluation point has wrong dimension");
    (0..sig.dim())
        .map(|j| weyl_sum_1d(n, cutoff, -sig.sign(j), sig.eps()[j].value(), t, x[j]))
        .product()
}

/// `|α − a/q| = η` with `q < N` and `gcd(a, q) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalApprox {
    pub a: i64,
    pub q: u64,
    pub eta: f64,
}

impl RationalApprox {
    /// Dirichlet guarantee `q < N`, `η ≤ 1/(qN)`.
    pub fn satisfies_dirichlet(&self, n: u64) -> bool {
        self.q >= 1 && self.q < n && self.eta * (self.q as f64) * (n as f64) <= 1.0 + 1e-12
    }
}

/// Largest supported `N` for [`dirichlet_approx`]; keeps the exact
/// arithmetic inside 128 bits.
pub const MAX_DIRICHLET_N: u64 = 1 << 24;

/// Last continued-fraction convergent of `α = ε t` with denominator below
/// `N`, computed exactly on the binary value of the floating-point `α`.
///
/// # Panics
/// If `N < 2` or `N > MAX_DIRICHLET_N`, or if `ε t` is not finite.
pub fn dirichlet_approx(eps: f64, t: f64, n: u64) -> RationalApprox {
    assert!((2..=MAX_DIRICHLET_N).contains(&n), "N = {n} outside 2..=2^24");
    let alpha = eps * t;
    assert!(alpha.is_finite(), "ε t is not finite");
    if alpha < 0.0 {
        let r = dirichlet_approx(1.0, -alpha, n);
        return RationalApprox { a: -r.a, ..r };
    }
    let whole = alpha.floor();
    let frac = alpha - whole;
    let a0 = whole as i64;
    if frac == 0.0 {
        return RationalApprox { a: a0, q: 1, eta: 0.0 };
    }
    if frac < 0.5 / n as f64 {
        // the next partial quotient is at least 2N
        return RationalApprox { a: a0, q: 1, eta: frac };
    }
    // frac = mant / 2^shift exactly, with frac ≥ 1/(2N) bounding the shift.
    let (mant, exp) = decode(frac);
    let shift = (-exp) as u32;
    let num = mant as u128;
    let den = 1u128 << shift;

    let (mut p_prev, mut p) = (1u128, 0u128);
    let (mut q_prev, mut q) = (0u128, 1u128);
    let (mut r_num, mut r_den) = (num, den);
    while r_num != 0 {
        let a = r_den / r_num;
        let q_next = a * q + q_prev;
        if q_next >= n as u128 {
            break;
        }
        let p_next = a * p + p_prev;
        (p_prev, p) = (p, p_next);
        (q_prev, q) = (q, q_next);
        (r_num, r_den) = (r_den - a * r_num, r_num);
    }
    let lhs = num * q;
    let rhs = p * den;
    let diff = lhs.abs_diff(rhs);
    let eta = diff as f64 / den as f64 / q as f64;
    RationalApprox {
        a: a0 * q as i64 + p as i64,
        q: q as u64,
        eta,
    }
}

/// `x = mant · 2^exp` with odd `mant`, for finite positive `x`.
fn decode(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut exp) = if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    };
    let tz = mant.trailing_zeros();
    mant >>= tz;
    exp += tz as i32;
    (mant, exp)
}

/// Major arc: some coordinate has `q_j ≤ N^{2σ}` and `q_j N² η_j ≤ N^{2σ}`.
pub fn classify_major_arc(approx: &[RationalApprox], n: u64, sigma: f64) -> bool {
    let nf = n as f64;
    let level = nf.powf(2.0 * sigma);
    approx
        .iter()
        .any(|r| (r.q as f64) <= level && r.q as f64 * nf * nf * r.eta <= level)
}

/// `Π_j N / (√q_j (1 + N √η_j))`.
pub fn dispersive_bound(approx: &[RationalApprox], n: u64) -> f64 {
    let nf = n as f64;
    approx
        .iter()
        .map(|r| nf / ((r.q as f64).sqrt() * (1.0 + nf * r.eta.sqrt())))
        .product()
}

/// One kernel evaluation with its arithmetic context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub n: u64,
    pub t: f64,
    pub x: Vec<f64>,
    pub value: Complex64,
    pub approx: Vec<RationalApprox>,
    pub major_arc: bool,
    pub bound: f64,
    pub ratio: f64,
    /// Whether every coordinate meets the Dirichlet hypotheses; samples that
    /// do not are excluded from bound statistics.
    pub admissible: bool,
}

impl KernelSample {
    pub fn new(n: u64, sig: &Signature, cutoff: &CutoffProfile, t: f64, x: &[f64], sigma: f64) -> Self {
        let value = kernel(n, sig, cutoff, t, x);
        let approx: Vec<RationalApprox> = sig
            .eps()
            .iter()
            .map(|e| dirichlet_approx(e.value(), t, n))
            .collect();
        let bound = dispersive_bound(&approx, n);
        let admissible = approx.iter().all(|r| r.satisfies_dirichlet(n) && r.a >= 0 && r.a as u64 <= r.q);
        Self {
            n,
            t,
            x: x.to_vec(),
            value,
            major_arc: classify_major_arc(&approx, n, sigma),
            ratio: value.norm() / bound,
            bound,
            approx,
            admissible,
        }
    }

    /// `(K̃, K − K̃)` with `K̃ = 1_𝒯 K`.
    pub fn split(&self) -> (Complex64, Complex64) {
        if self.major_arc {
            (self.value, Complex64::default())
        } else {
            (Complex64::default(), self.value)
        }
    }

    /// `|K − K̃| / N^{d(1−σ)}`.
    pub fn minor_ratio(&self, sigma: f64) -> f64 {
        let d = self.x.len() as f64;
        self.split().1.norm() / (self.n as f64).powf(d * (1.0 - sigma))
    }
}

/// Where kernel samples are evaluated in space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialPoints {
    Origin,
    Random,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSweepConfig {
    pub sig: Signature,
    pub cutoff: CutoffProfile,
    pub ns: Vec<u64>,
    pub samples: usize,
    pub sigma: f64,
    pub seed: u64,
    pub points: SpatialPoints,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub n: u64,
    pub samples: usize,
    pub admissible: usize,
    pub major: usize,
    pub max_ratio: f64,
    pub max_minor_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSweep {
    pub samples: Vec<KernelSample>,
    pub summaries: Vec<KernelSummary>,
    /// `log₂ max ratio` against `log₂ N`.
    pub ratio_fit: Option<LineFit>,
    pub minor_fit: Option<LineFit>,
}

impl KernelSweep {
    pub fn max_ratio(&self) -> f64 {
        self.summaries.iter().map(|s| s.max_ratio).fold(0.0, f64::max)
    }

    pub fn max_minor_ratio(&self) -> f64 {
        self.summaries.iter().map(|s| s.max_minor_ratio).fold(0.0, f64::max)
    }
}

/// The `(t, x)` points of sample `i`; identical for every `N`.
pub fn sample_point(cfg: &KernelSweepConfig, i: usize) -> (f64, Vec<f64>) {
    let mut rng = task_rng(cfg.seed, streams::KERNEL, i as u64);
    let t: f64 = rng.random();
    let x = match cfg.points {
        SpatialPoints::Origin => vec![0.0; cfg.sig.dim()],
        SpatialPoints::Random => (0..cfg.sig.dim()).map(|_| rng.random()).collect(),
    };
    (t, x)
}

/// Evaluates the kernel at `samples` seeded points for every `N` and
/// aggregates the dispersive and minor-arc ratios.
pub fn dispersive_sweep(cfg: &KernelSweepConfig, exec: Execution) -> KernelSweep {
    let points: Vec<(f64, Vec<f64>)> = (0..cfg.samples).map(|i| sample_point(cfg, i)).collect();
    let tasks: Vec<(u64, usize)> = cfg
        .ns
        .iter()
        .flat_map(|&n| (0..cfg.samples).map(move |i| (n, i)))
        .collect();
    let samples = exec.map(tasks.len(), |j| {
        let (n, i) = tasks[j];
        let (t, x) = &points[i];
        KernelSample::new(n, &cfg.sig, &cfg.cutoff, *t, x, cfg.sigma)
    });
    let summaries: Vec<KernelSummary> = cfg
        .ns
        .iter()
        .map(|&n| {
            let rows: Vec<&KernelSample> = samples.iter().filter(|s| s.n == n).collect();
            let ok: Vec<&&KernelSample> = rows.iter().filter(|s| s.admissible).collect();
            KernelSummary {
                n,
                samples: rows.len(),
                admissible: ok.len(),
                major: rows.iter().filter(|s| s.major_arc).count(),
                max_ratio: ok.iter().map(|s| s.ratio).fold(0.0, f64::max),
                max_minor_ratio: rows.iter().map(|s| s.minor_ratio(cfg.sigma)).fold(0.0, f64::max),
            }
        })
        .collect();
    let ns: Vec<f64> = summaries.iter().map(|s| s.n as f64).collect();
    let ratios: Vec<f64> = summaries.iter().map(|s| s.max_ratio).collect();
    let minors: Vec<f64> = summaries.iter().map(|s| s.max_minor_ratio).collect();
    let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0);
    KernelSweep {
        ratio_fit: positive(&ratios).then(|| fit_log2(&ns, &ratios)).flatten(),
        minor_fit: positive(&minors).then(|| fit_log2(&ns, &minors)).flatten(),
        samples,
        summaries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_sums() {
        for n in [1u64, 4, 9] {
            let s = weyl_sum_1d(n, &CutoffProfile::Sharp, 1, 1.0, 0.0, 0.0);
            assert!((s - Complex64::new((2 * n + 1) as f64, 0.0)).norm() < 1e-12);
        }
        let sig = Signature::unit(3, 1).unwrap();
        let k = kernel(5, &sig, &CutoffProfile::Sharp, 0.0, &[0.0; 3]);
        assert!((k.re - 1331.0).abs() < 1e-9 && k.im.abs() < 1e-9);
    }

    #[test]
    fn dirichlet_examples() {
        let r = dirichlet_approx(1.0, 1.0 / 3.0, 10);
        assert_eq!((r.a, r.q), (1, 3));
        assert!(r.eta < 1e-16);
        let r = dirichlet_approx(1.0, 0.49, 10);
        assert_eq!((r.a, r.q), (1, 2));
        assert!((r.eta - 0.01).abs() < 1e-15);
        assert!(r.satisfies_dirichlet(10));
        assert_eq!(dirichlet_approx(1.0, 0.0, 10), RationalApprox { a: 0, q: 1, eta: 0.0 });
        assert_eq!(dirichlet_approx(1.0, 1.0, 10), RationalApprox { a: 1, q: 1, eta: 0.0 });
        let tiny = dirichlet_approx(1.0, 1e-300, 64);
        assert_eq!((tiny.a, tiny.q), (0, 1));
    }

    #[test]
    fn major_arc_examples() {
        let zero = [RationalApprox { a: 0, q: 1, eta: 0.0 }];
        assert!(classify_major_arc(&zero, 16, 0.1));
        assert!((16f64.powf(0.2) - 1.7411).abs() < 1e-4);
        let two = [RationalApprox { a: 1, q: 2, eta: 0.0 }];
        assert!(!classify_major_arc(&two, 16, 0.1));
        let far = [RationalApprox { a: 0, q: 1, eta: 0.01 }];
        assert!(!classify_major_arc(&far, 16, 0.1));
    }

    #[test]
    fn split_is_exclusive() {
        let sig = Signature::unit(2, 1).unwrap();
        let major = KernelSample::new(16, &sig, &CutoffProfile::Sharp, 0.0, &[0.1, 0.2], 0.1);
        assert!(major.major_arc);
        assert_eq!(major.split().1, Complex64::default());
        let minor = KernelSample::new(16, &sig, &CutoffProfile::Sharp, 0.3131, &[0.1, 0.2], 0.1);
        assert!(!minor.major_arc);
        assert_eq!(minor.split().0, Complex64::default());
        assert_eq!(minor.split().1, minor.value);
    }

    #[test]
    fn origin_ratio_closed_form() {
        let sig = Signature::unit(2, 1).unwrap();
        for n in [8u64, 16, 32] {
            let s = KernelSample::new(n, &sig, &CutoffProfile::Sharp, 0.0, &[0.0, 0.0], 0.1);
            let want = ((2 * n + 1) as f64 / n as f64).powi(2);
            assert!((s.ratio - want).abs() < 1e-10);
        }
    }
}
