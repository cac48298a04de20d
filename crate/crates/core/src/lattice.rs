//! Frequency-lattice geometry: signatures, the signed quadratic symbol,
//! admissibility arithmetic, cutoff profiles and frequency projections.

use std::fmt;
use std::sync::Arc;

use num_rational::Rational64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::field::SpectralField;

/// Largest supported torus dimension.
pub const MAX_DIM: usize = 4;

/// An anisotropy weight `ε_j ∈ (0, 1]`.
///
/// Rational weights are kept exact so that time periodicity of the free flow
/// can be detected. In configuration files a weight is either a JSON number
/// (an integer literal is exact, a float is real) or a string `"a/b"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    Rational(Rational64),
    Real(f64),
}

impl Weight {
    pub fn one() -> Self {
        Weight::Rational(Rational64::from_integer(1))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Weight::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            Weight::Real(x) => x,
        }
    }

    pub fn as_rational(&self) -> Option<Rational64> {
        match *self {
            Weight::Rational(r) => Some(r),
            Weight::Real(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Weight::Rational(r) => r > Rational64::from_integer(0) && r <= Rational64::from_integer(1),
            Weight::Real(x) => x.is_finite() && x > 0.0 && x <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::InvalidSignature(format!(
                "weight {self} outside (0, 1]"
            )))
        }
    }
}

impl From<f64> for Weight {
    fn from(x: f64) -> Self {
        Weight::Real(x)
    }
}

impl From<Rational64> for Weight {
    fn from(r: Rational64) -> Self {
        Weight::Rational(r)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Rational(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Weight::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Weight::Real(x) => write!(f, "{x}"),
        }
    }
}

impl std::str::FromStr for Weight {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::InvalidSignature(format!("cannot parse weight {s:?}"));
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let a: i64 = a.trim().parse().map_err(|_| bad())?;
            let b: i64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0 {
                return Err(bad());
            }
            Ok(Weight::Rational(Rational64::new(a, b)))
        } else if let Ok(a) = s.parse::<i64>() {
            Ok(Weight::Rational(Rational64::from_integer(a)))
        } else {
            s.parse::<f64>().map(Weight::Real).map_err(|_| bad())
        }
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Weight::Rational(r) if *r.denom() == 1 => s.serialize_i64(*r.numer()),
            Weight::Rational(_) => s.serialize_str(&self.to_string()),
            Weight::Real(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(a) => Ok(Weight::Rational(Rational64::from_integer(a))),
            Repr::Float(x) => Ok(Weight::Real(x)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Torus geometry: dimension `d`, split index `j0` and weights `ε_j`.
///
/// The symbol is `|k|²_± = Σ_{j<j0} ε_j k_j² − Σ_{j≥j0} ε_j k_j²` with
/// 0-based coordinates, so the first `j0` coordinates carry the plus sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignatureRepr", into = "SignatureRepr")]
pub struct Signature {
    d: usize,
    j0: usize,
    eps: Vec<Weight>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignatureRepr {
    d: usize,
    j0: usize,
    eps: Vec<Weight>,
}

impl TryFrom<SignatureRepr> for Signature {
    type Error = LabError;

    fn try_from(r: SignatureRepr) -> Result<Self> {
        Signature::new(r.d, r.j0, r.eps)
    }
}

impl From<Signature> for SignatureRepr {
    fn from(s: Signature) -> Self {
        SignatureRepr {
            d: s.d,
            j0: s.j0,
            eps: s.eps,
        }
    }
}

impl Signature {
    pub fn new(d: usize, j0: usize, eps: Vec<Weight>) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(LabError::InvalidSignature(format!(
                "dimension {d} outside 1..={MAX_DIM}"
            )));
        }
        if j0 > d {
            return Err(LabError::InvalidSignature(format!("j0 = {j0} exceeds d = {d}")));
        }
        if eps.len() != d {
            return Err(LabError::DimensionMismatch {
                expected: d,
                got: eps.len(),
            });
        }
        for w in &eps {
            w.validate()?;
        }
        Ok(Self { d, j0, eps })
    }

    /// Unit weights.
    pub fn unit(d: usize, j0: usize) -> Result<Self> {
        Self::new(d, j0, vec![Weight::one(); d])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn j0(&self) -> usize {
        self.j0
    }

    pub fn eps(&self) -> &[Weight] {
        &self.eps
    }

    pub fn eps_values(&self) -> Vec<f64> {
        self.eps.iter().map(Weight::value).collect()
    }

    /// `+1` for the first `j0` coordinates, `-1` after.
    pub fn sign(&self, j: usize) -> i64 {
        if j < self.j0 {
            1
        } else {
            -1
        }
    }

    /// Signed weight `±ε_j` multiplying `k_j²` in the symbol.
    pub fn coefficient(&self, j: usize) -> f64 {
        self.sign(j) as f64 * self.eps[j].value()
    }

    pub fn symbol(&self, k: &[i64]) -> Result<f64> {
        self.check_dim(k.len())?;
        Ok(self.symbol_unchecked(k))
    }

    #[inline]
    pub fn symbol_unchecked(&self, k: &[i64]) -> f64 {
        k.iter()
            .enumerate()
            .map(|(j, &kj)| self.coefficient(j) * (kj * kj) as f64)
            .sum()
    }

    /// Exact symbol when every weight is rational.
    pub fn symbol_exact(&self, k: &[i64]) -> Option<Rational64> {
        let mut acc = Rational64::from_integer(0);
        for (j, &kj) in k.iter().enumerate() {
            acc += self.eps[j].as_rational()? * Rational64::from_integer(self.sign(j) * kj * kj);
        }
        Some(acc)
    }

    /// Signed integer weights, present when every `ε_j` is an integer.
    pub fn integer_coefficients(&self) -> Option<Vec<i64>> {
        self.eps
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let r = w.as_rational()?;
                (*r.denom() == 1).then(|| self.sign(j) * r.numer())
            })
            .collect()
    }

    pub fn integer_symbol(&self, k: &[i64]) -> Option<i64> {
        let c = self.integer_coefficients()?;
        Some(c.iter().zip(k).map(|(c, kj)| c * kj * kj).sum())
    }

    /// Smallest `L > 0` with `e^{-2πi L |k|²_±} = 1` for every `k`, when all
    /// weights are rational: the lcm of their denominators.
    pub fn time_period(&self) -> Option<i64> {
        let mut l = 1i64;
        for w in &self.eps {
            let q = *w.as_rational()?.denom();
            l = lcm(l, q);
        }
        Some(l)
    }

    pub fn delta(&self) -> usize {
        self.j0.min(self.d - self.j0)
    }

    /// `j0 ↦ d − j0` with the weight vector reversed.
    ///
    /// Together with reversing `k`, this negates the symbol.
    pub fn reflected(&self) -> Self {
        let mut eps = self.eps.clone();
        eps.reverse();
        Self {
            d: self.d,
            j0: self.d - self.j0,
            eps,
        }
    }

    pub fn is_elliptic(&self) -> bool {
        self.delta() == 0
    }

    /// `p* = 2(d + 2 − δ)/(d − δ)`.
    pub fn admissible_threshold(&self) -> f64 {
        admissible_threshold(self.d, self.delta())
    }

    pub fn admissible_threshold_exact(&self) -> Rational64 {
        admissible_threshold_exact(self.d, self.delta())
    }

    /// Admissibility is strict: `p > p*`.
    pub fn is_admissible(&self, p: f64) -> bool {
        p > self.admissible_threshold()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n == self.d {
            Ok(())
        } else {
            Err(LabError::DimensionMismatch {
                expected: self.d,
                got: n,
            })
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} j0={} eps=(", self.d, self.j0)?;
        for (i, w) in self.eps.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, ")")
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

pub fn admissible_threshold(d: usize, delta: usize) -> f64 {
    let r = admissible_threshold_exact(d, delta);
    *r.numer() as f64 / *r.denom() as f64
}

pub fn admissible_threshold_exact(d: usize, delta: usize) -> Rational64 {
    assert!(delta < d, "δ must be below d");
    let (d, delta) = (d as i64, delta as i64);
    Rational64::new(2 * (d + 2 - delta), d - delta)
}

/// Threshold covering every mixed signature `j0 ∈ {1, …, d−1}`:
/// `2 + 8/d` for even `d`, `2 + 8/(d+1)` for odd `d`.
pub fn worst_case_threshold(d: usize) -> f64 {
    let d = d as f64;
    if d as usize % 2 == 0 {
        2.0 + 8.0 / d
    } else {
        2.0 + 8.0 / (d + 1.0)
    }
}

/// Critical regularity `s_c = d/2 − 1/m` and the companion exponent
/// `p_{d,m} = m(d+2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPair {
    pub s_c: f64,
    pub p: f64,
}

pub fn critical_index(d: usize, m: usize) -> CriticalPair {
    let r = critical_index_exact(d, m);
    CriticalPair {
        s_c: *r.numer() as f64 / *r.denom() as f64,
        p: (m * (d + 2)) as f64,
    }
}

pub fn critical_index_exact(d: usize, m: usize) -> Rational64 {
    assert!(d >= 1 && m >= 1);
    Rational64::new(d as i64, 2) - Rational64::new(1, m as i64)
}

/// One-dimensional cutoff profile `φ`, applied coordinate-wise.
#[derive(Clone)]
pub enum CutoffProfile {
    /// Indicator of `[−1, 1]`.
    Sharp,
    /// The default bump: `1` on `[−1, 1]`, an exponential taper on
    /// `1 < |x| < 2`, `0` beyond.
    Smooth,
    Custom(CustomProfile),
}

/// User-supplied even profile with support in `[−support, support]`.
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    pub support: f64,
    pub phi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CutoffProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutoffProfile::Sharp => f.write_str("Sharp"),
            CutoffProfile::Smooth => f.write_str("Smooth"),
            CutoffProfile::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

impl PartialEq for CutoffProfile {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (CutoffProfile::Sharp, CutoffProfile::Sharp) => true,
            (CutoffProfile::Smooth, CutoffProfile::Smooth) => true,
            (CutoffProfile::Custom(a), CutoffProfile::Custom(b)) => Arc::ptr_eq(&a.phi, &b.phi),
            _ => false,
        }
    }
}

impl Serialize for CutoffProfile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CutoffProfile::Sharp => s.serialize_str("sharp"),
            CutoffProfile::Smooth => s.serialize_str("smooth"),
            CutoffProfile::Custom(c) => s.serialize_str(&format!("custom:{}", c.name)),
        }
    }
}

impl<'de> Deserialize<'de> for CutoffProfile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "sharp" => Ok(CutoffProfile::Sharp),
            "smooth" => Ok(CutoffProfile::Smooth),
            other => Err(serde::de::Error::unknown_variant(other, &["sharp", "smooth"])),
        }
    }
}

impl CutoffProfile {
    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        match self {
            CutoffProfile::Sharp => {
                if x.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            CutoffProfile::Smooth => smooth_bump(x),
            CutoffProfile::Custom(c) => (c.phi)(x),
        }
    }

    /// Radius outside which `φ` vanishes.
    pub fn support(&self) -> f64 {
        match self {
            CutoffProfile::Sharp => 1.0,
            CutoffProfile::Smooth => 2.0,
            CutoffProfile::Custom(c) => c.support,
        }
    }

    /// Largest `|k|` with `φ(k/N)` possibly nonzero.
    pub fn reach(&self, n: u64) -> i64 {
        (self.support() * n as f64).floor() as i64
    }
}

/// `φ(x) = 1` for `|x| ≤ 1`, `exp(1 − 1/(1 − (|x|−1)²))` for `1 < |x| < 2`,
/// `0` for `|x| ≥ 2`.
pub fn smooth_bump(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let y = a - 1.0;
        (1.0 - 1.0 / (1.0 - y * y)).exp()
    }
}

/// `Π_j φ(k_j/N)`.
pub fn low_multiplier(profile: &CutoffProfile, n: u64, k: &[i64]) -> f64 {
    let nf = n as f64;
    k.iter().map(|&kj| profile.phi(kj as f64 / nf)).product()
}

/// Closed axis-aligned cube `{k : |k_j − c_j| ≤ h}` with rational center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    center: Vec<Rational64>,
    half_side: Rational64,
}

impl Cube {
    pub fn new(center: Vec<Rational64>, half_side: Rational64) -> Result<Self> {
        if half_side <= Rational64::from_integer(0) {
            return Err(LabError::InvalidParameter("cube half side must be positive".into()));
        }
        Ok(Self { center, half_side })
    }

    /// Cube of side length `side` (so half side `side/2`) centered at an
    /// integer point.
    pub fn with_side(center: &[i64], side: i64) -> Result<Self> {
        Self::new(
            center.iter().map(|&c| Rational64::from_integer(c)).collect(),
            Rational64::new(side, 2),
        )
    }

    pub fn center(&self) -> &[Rational64] {
        &self.center
    }

    pub fn half_side(&self) -> Rational64 {
        self.half_side
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Integer center, if the center lies on the lattice.
    pub fn integer_center(&self) -> Option<Vec<i64>> {
        self.center
            .iter()
            .map(|c| c.is_integer().then(|| *c.numer()))
            .collect()
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        k.len() == self.center.len()
            && k.iter().zip(&self.center).all(|(&kj, &c)| {
                let diff = Rational64::from_integer(kj) - c;
                diff <= self.half_side && -diff <= self.half_side
            })
    }

    /// `C − v` for an integer shift.
    pub fn translated(&self, v: &[i64]) -> Self {
        Self {
            center: self
                .center
                .iter()
                .zip(v)
                .map(|(c, &vj)| c - Rational64::from_integer(vj))
                .collect(),
            half_side: self.half_side,
        }
    }

    /// Lattice points of the cube as an integer box.
    pub fn lattice_box(&self) -> FrequencyBox {
        let lo = self.center.iter().map(|c| (c - self.half_side).ceil().to_integer()).collect();
        let hi = self.center.iter().map(|c| (c + self.half_side).floor().to_integer()).collect();
        FrequencyBox { lo, hi }
    }

    pub fn intersect(&self, other: &Cube) -> FrequencyBox {
        self.lattice_box().intersect(&other.lattice_box())
    }
}

/// Integer box `{k : lo_j ≤ k_j ≤ hi_j}`; empty when some `lo_j > hi_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl FrequencyBox {
    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        k.len() == self.lo.len()
            && k.iter().zip(self.lo.iter().zip(&self.hi)).all(|(kj, (l, h))| l <= kj && kj <= h)
    }

    pub fn intersect(&self, other: &FrequencyBox) -> FrequencyBox {
        FrequencyBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| *a.max(b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| *a.min(b)).collect(),
        }
    }

    pub fn count(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l + 1) as usize).product()
        }
    }
}

/// Fourier multiplier selecting part of the lattice.
#[derive(Clone, Debug, PartialEq)]
pub enum Selector {
    /// `P_{≤N}`: `Π_j φ(k_j/N)`.
    Low(u64),
    /// Dyadic band `P_N = Φ(k/N) − Φ(2k/N)` with `Φ = Π_j φ`; `P_1 = P_{≤1}`.
    /// With the sharp profile this is `N/2 < |k|_∞ ≤ N`.
    Band(u64),
    /// Indicator of a cube.
    Cube(Cube),
    /// Indicator of an integer box.
    Box(FrequencyBox),
}

impl Selector {
    pub fn multiplier(&self, profile: &CutoffProfile, k: &[i64]) -> f64 {
        match self {
            Selector::Low(n) => low_multiplier(profile, *n, k),
            Selector::Band(n) => band_multiplier(profile, *n, k),
            Selector::Cube(c) => f64::from(u8::from(c.contains(k))),
            Selector::Box(b) => f64::from(u8::from(b.contains(k))),
        }
    }
}

pub fn band_multiplier(profile: &CutoffProfile, n: u64, k: &[i64]) -> f64 {
    if n <= 1 {
        return low_multiplier(profile, 1, k);
    }
    // Φ(2k/N) = Π φ(k_j/(N/2)); N is dyadic so N/2 is exact.
    let outer = low_multiplier(profile, n, k);
    let nf = n as f64 / 2.0;
    let inner: f64 = k.iter().map(|&kj| profile.phi(kj as f64 / nf)).product();
    outer - inner
}

/// Coefficient-wise multiplication by the selector's symbol.
pub fn project(field: &SpectralField, selector: &Selector, profile: &CutoffProfile) -> SpectralField {
    let mut out = field.clone();
    out.map_coeffs(|k, c| c * selector.multiplier(profile, k));
    out
}
