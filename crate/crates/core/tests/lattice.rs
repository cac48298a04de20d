use hnls_core::lattice::{
    admissible_threshold_exact, critical_index_exact, project, smooth_bump, Cube, CutoffProfile, Selector,
    Signature, Weight,
};
use hnls_core::{Complex64, SpectralField};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(sig: &Signature, m: usize, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralField::from_fn(sig, &vec![m; sig.dim()], |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
    .unwrap()
}

fn close(a: &SpectralField, b: &SpectralField, tol: f64) -> bool {
    a.sub(b).unwrap().l2_norm() <= tol * b.l2_norm().max(1.0)
}

#[test]
fn sharp_projections_are_idempotent() {
    let sig = Signature::unit(2, 1).unwrap();
    let f = random_field(&sig, 20, 1);
    let p = CutoffProfile::Sharp;
    for sel in [Selector::Low(8), Selector::Band(8), Selector::Cube(Cube::with_side(&[3, -2], 6).unwrap())] {
        let once = project(&f, &sel, &p);
        assert_eq!(project(&once, &sel, &p), once);
    }
}

#[test]
fn bands_telescope_to_low_projection() {
    let sig = Signature::unit(3, 1).unwrap();
    let f = random_field(&sig, 40, 2);
    for p in [CutoffProfile::Sharp, CutoffProfile::Smooth] {
        let mut sum = SpectralField::zeros(&sig, f.half()).unwrap();
        for n in [1u64, 2, 4, 8, 16] {
            sum = sum.add(&project(&f, &Selector::Band(n), &p)).unwrap();
        }
        assert!(close(&sum, &project(&f, &Selector::Low(16), &p), 1e-13));
    }
}

#[test]
fn sharp_bands_are_orthogonal() {
    let sig = Signature::unit(2, 1).unwrap();
    let f = random_field(&sig, 20, 3);
    let p = CutoffProfile::Sharp;
    let total: f64 = [1u64, 2, 4, 8, 16, 32].iter().map(|&n| project(&f, &Selector::Band(n), &p).mass()).sum();
    assert!((total - f.mass()).abs() < 1e-10 * f.mass());
}

#[test]
fn smooth_low_projection_brute_force() {
    let sig = Signature::unit(2, 0).unwrap();
    let f = random_field(&sig, 12, 4);
    let n = 4u64;
    let out = project(&f, &Selector::Low(n), &CutoffProfile::Smooth);
    let phi = |x: f64| {
        let a = x.abs();
        if a <= 1.0 {
            1.0
        } else if a < 2.0 {
            (1.0 - 1.0 / (1.0 - (a - 1.0).powi(2))).exp()
        } else {
            0.0
        }
    };
    f.for_each_mode(|idx, k| {
        let want = f.coeffs()[idx] * phi(k[0] as f64 / 4.0) * phi(k[1] as f64 / 4.0);
        assert!((out.get(k) - want).norm() < 1e-15);
    });
    assert_eq!(smooth_bump(1.5), phi(1.5));
}

#[test]
fn cubes_tile_a_box() {
    let sig = Signature::unit(2, 1).unwrap();
    let f = random_field(&sig, 11, 5);
    let p = CutoffProfile::Sharp;
    let mut sum = SpectralField::zeros(&sig, f.half()).unwrap();
    // side-8 cubes with half-integer half side 4: centers at 8a + 1/2 cover the
    // integers exactly once
    for a in -2..=1 {
        for b in -2..=1 {
            let c = vec![Rational64::new(16 * a + 1, 2), Rational64::new(16 * b + 1, 2)];
            let cube = Cube::new(c, Rational64::from_integer(4)).unwrap();
            sum = sum.add(&project(&f, &Selector::Cube(cube), &p)).unwrap();
        }
    }
    let covered = project(&f, &Selector::Low(11), &p);
    assert!(close(&sum, &covered, 1e-14));
}

#[test]
fn symbol_is_odd_under_reflection() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for d in 1..=4 {
        for j0 in 0..=d {
            let eps = (0..d).map(|_| Weight::Real(rng.random_range(0.1..=1.0))).collect();
            let sig = Signature::new(d, j0, eps).unwrap();
            let r = sig.reflected();
            assert_eq!(r.delta(), sig.delta());
            let k: Vec<i64> = (0..d).map(|_| rng.random_range(-9..=9)).collect();
            let a = sig.symbol(&k).unwrap();
            let rev: Vec<i64> = k.iter().rev().copied().collect();
            let b = r.symbol(&rev).unwrap();
            assert!((a + b).abs() < 1e-12 * a.abs().max(1.0));
        }
    }
}

#[test]
fn threshold_table() {
    // p* = 2(d + 2 − δ)/(d − δ)
    for d in 2..=6usize {
        for j0 in 0..=d {
            let delta = j0.min(d - j0);
            let want = Rational64::new(2 * (d + 2 - delta) as i64, (d - delta) as i64);
            assert_eq!(admissible_threshold_exact(d, delta), want);
            if let Ok(sig) = Signature::unit(d, j0) {
                assert_eq!(sig.admissible_threshold_exact(), want);
            }
        }
    }
    assert_eq!(Signature::unit(3, 1).unwrap().admissible_threshold(), 4.0);
    assert_eq!(critical_index_exact(3, 1), Rational64::new(1, 2));
}

#[test]
fn signature_json_round_trip() {
    let sig = Signature::new(
        3,
        1,
        vec![Weight::Rational(Rational64::new(1, 2)), Weight::one(), Weight::Real(0.5f64.sqrt())],
    )
    .unwrap();
    let s = serde_json::to_string(&sig).unwrap();
    let back: Signature = serde_json::from_str(&s).unwrap();
    assert_eq!(back, sig);
    assert!(serde_json::from_str::<Signature>(r#"{"d":2,"j0":3,"eps":[1,1]}"#).is_err());
    assert!(serde_json::from_str::<Signature>(r#"{"d":2,"j0":1,"eps":[1,1],"x":0}"#).is_err());
    assert!(serde_json::from_str::<Signature>(r#"{"d":2,"j0":1,"eps":[1,"3/2"]}"#).is_err());
}
