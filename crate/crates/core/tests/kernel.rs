use hnls_core::lattice::{CutoffProfile, Signature};
use hnls_core::weyl::{
    complete_gauss_sum, dirichlet_approx, dispersive_sweep, kernel, weyl_sum_1d, KernelSweepConfig, SpatialPoints,
};
use hnls_core::{Complex64, Execution};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: f64 = std::f64::consts::TAU;

/// `frac(a·b)` for integer-valued `b`, with the rounding error of the
/// product recovered by an FMA.
fn frac_product(a: f64, b: f64) -> f64 {
    let p = a * b;
    let e = a.mul_add(b, -p);
    ((p - p.floor()) + e).rem_euclid(1.0)
}

/// Direct d-dimensional lattice sum `Σ_k Π φ(k_j/N) e^{2πi(k·x − t|k|²_±)}`,
/// with exactly reduced phases and Kahan accumulation.
fn brute_kernel(n: u64, sig: &Signature, cutoff: &CutoffProfile, t: f64, x: &[f64]) -> Complex64 {
    let d = sig.dim();
    let reach = 2 * n as i64;
    let side = (2 * reach + 1) as usize;
    let (mut acc, mut comp) = (Complex64::default(), Complex64::default());
    let mut k = vec![0i64; d];
    for flat in 0..side.pow(d as u32) {
        let mut r = flat;
        for j in (0..d).rev() {
            k[j] = (r % side) as i64 - reach;
            r /= side;
        }
        let w: f64 = k.iter().map(|&kj| cutoff.phi(kj as f64 / n as f64)).product();
        if w == 0.0 {
            continue;
        }
        // unit weights: the symbol is an integer
        let s: i64 = (0..d).map(|j| sig.sign(j) * k[j] * k[j]).sum();
        let mut theta = -frac_product(t, s as f64);
        for j in 0..d {
            theta += frac_product(x[j], k[j] as f64);
        }
        let term = Complex64::cis(TAU * theta.rem_euclid(1.0)) * w - comp;
        let next = acc + term;
        comp = (next - acc) - term;
        acc = next;
    }
    acc
}

#[test]
fn separable_kernel_matches_lattice_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for d in 1..=3 {
        for j0 in 0..=d {
            let sig = Signature::unit(d, j0).unwrap();
            for cutoff in [CutoffProfile::Sharp, CutoffProfile::Smooth] {
                for n in [1u64, 3, 8] {
                    let t: f64 = rng.random();
                    let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
                    let a = kernel(n, &sig, &cutoff, t, &x);
                    let b = brute_kernel(n, &sig, &cutoff, t, &x);
                    assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0), "{d} {j0} {n}: {a} {b}");
                }
            }
        }
    }
}

/// Classical evaluation `G(1,q) = √q` for `q ≡ 1 (4)` and `i√q` for `q ≡ 3 (4)`.
#[test]
fn gauss_sum_sign_law() {
    for q in (3u64..200).step_by(2) {
        let g = complete_gauss_sum(1, q);
        let r = (q as f64).sqrt();
        let want = if q % 4 == 1 { Complex64::new(r, 0.0) } else { Complex64::new(0.0, r) };
        assert!((g - want).norm() < 1e-9, "q = {q}");
    }
}

#[test]
fn gauss_sum_by_residue_block() {
    // one complete block k = 0..q−1 of the Weyl sum at t = a/q, x = 0
    for q in [3u64, 5, 7, 11, 13, 47] {
        for a in 1..q as i64 {
            let block: Complex64 = (0..q as i64)
                .map(|k| Complex64::cis(TAU * ((a * k * k) as f64 / q as f64)))
                .sum();
            assert!((block - complete_gauss_sum(a, q)).norm() < 1e-9);
            assert!((block.norm() - (q as f64).sqrt()).abs() < 1e-9);
        }
    }
}

#[test]
fn weyl_sum_is_conjugate_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for cutoff in [CutoffProfile::Sharp, CutoffProfile::Smooth] {
        for _ in 0..50 {
            let (t, x): (f64, f64) = (rng.random(), rng.random());
            let a = weyl_sum_1d(16, &cutoff, 1, 1.0, t, x);
            let b = weyl_sum_1d(16, &cutoff, -1, 1.0, t, -x);
            assert!((a - b.conj()).norm() < 1e-11 * a.norm().max(1.0));
        }
    }
}

#[test]
fn kernel_modulus_independent_of_j0() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for cutoff in [CutoffProfile::Sharp, CutoffProfile::Smooth] {
        for _ in 0..100 {
            let t: f64 = rng.random();
            let x = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let mods: Vec<f64> = (0..=3)
                .map(|j0| kernel(12, &Signature::unit(3, j0).unwrap(), &cutoff, t, &x).norm())
                .collect();
            for m in &mods[1..] {
                if mods[0] > 1e-6 {
                    assert!((m - mods[0]).abs() <= 1e-10 * mods[0]);
                }
            }
        }
    }
}

#[test]
fn kernel_at_time_zero_origin_counts_modes() {
    let sig = Signature::unit(2, 1).unwrap();
    let k = kernel(5, &sig, &CutoffProfile::Sharp, 0.0, &[0.0, 0.0]);
    assert!((k - Complex64::new(121.0, 0.0)).norm() < 1e-10);
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn dirichlet_guarantee(alpha in -50.0f64..50.0, n in 2u64..5000) {
        let r = dirichlet_approx(1.0, alpha, n);
        prop_assert!(r.q >= 1 && r.q < n);
        prop_assert!(r.eta * r.q as f64 * n as f64 <= 1.0 + 1e-12);
        prop_assert_eq!(gcd(r.a.unsigned_abs(), r.q), if r.a == 0 { r.q } else { 1 });
        let direct = (alpha - r.a as f64 / r.q as f64).abs();
        prop_assert!((direct - r.eta).abs() <= 1e-12 * alpha.abs().max(1.0));
    }

    #[test]
    fn dirichlet_is_best_below_n(alpha in 0.0f64..1.0, n in 2u64..300) {
        // min over q' < N of ‖q'α‖ is attained by the returned denominator
        let r = dirichlet_approx(1.0, alpha, n);
        let best = (1..n).map(|q| dist_to_int(q as f64 * alpha)).fold(f64::INFINITY, f64::min);
        prop_assert!((dist_to_int(r.q as f64 * alpha) - best).abs() <= 1e-12);
    }
}

#[test]
fn sweep_is_execution_independent() {
    let cfg = KernelSweepConfig {
        sig: Signature::unit(2, 1).unwrap(),
        cutoff: CutoffProfile::Smooth,
        ns: vec![8, 16],
        samples: 30,
        sigma: 0.1,
        seed: 5,
        points: SpatialPoints::Random,
    };
    let a = dispersive_sweep(&cfg, Execution::Sequential);
    let b = dispersive_sweep(&cfg, Execution::Parallel);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.samples.len(), 60);
}
