use hnls_core::nls::{
    hamiltonian, inflation_probe, picard_iterate, plane_wave, split_step, step_halving, ContractionStatus,
    EnergyVariant, NlsProblem, Nonlinearity,
};
use hnls_core::propagator::{duhamel, evolve};
use hnls_core::{Complex64, Signature, SpectralField};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_field(sig: &Signature, m: usize, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralField::from_fn(sig, &vec![m; sig.dim()], |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
    .unwrap()
}

/// `|u|^{2m}u` by collocation on `G = 2M+1` points per axis, built through
/// the public sampling routines rather than the solver's workspace.
fn collocated_nonlinearity(u: &SpectralField, m: usize) -> SpectralField {
    let g = 2 * u.max_half() + 1;
    let mut arr = u.sample_spatial(g).unwrap();
    for z in arr.data.iter_mut() {
        *z *= z.norm_sqr().powi(m as i32);
    }
    SpectralField::from_spatial(u.sig(), &arr, u.half()).unwrap()
}

#[test]
fn plane_wave_matches_closed_form() {
    for (d, j0) in [(1, 0), (2, 1), (3, 2)] {
        let sig = Signature::unit(d, j0).unwrap();
        let k: Vec<i64> = (0..d as i64).map(|j| 2 - j).collect();
        let c = Complex64::new(0.7, -0.4);
        let u0 = SpectralField::single_mode(&sig, &k, c).unwrap();
        for nl in [Nonlinearity::Focusing, Nonlinearity::Defocusing] {
            for m in [1, 2] {
                let p = NlsProblem::new(u0.clone(), m, nl, 0.1).unwrap();
                let run = split_step(&p, 0.005, 20).unwrap();
                let got = run.final_state().get(&k);
                let want = plane_wave(&sig, &k, c, m, nl, 0.1);
                assert!((got - want).norm() < 1e-10, "{d} {j0} {nl:?} {m}: {got} vs {want}");
                assert!(run.final_state().mass() - c.norm_sqr() < 1e-14);
            }
        }
    }
}

#[test]
fn mass_conserved_either_sign() {
    let sig = Signature::unit(2, 1).unwrap();
    let u0 = random_field(&sig, 3, 5).normalized();
    for nl in [Nonlinearity::Focusing, Nonlinearity::Defocusing] {
        let p = NlsProblem::new(u0.clone(), 1, nl, 1.0).unwrap();
        let run = split_step(&p, 0.01, 10).unwrap();
        assert!(run.mass_drift <= 1e-10, "{}", run.mass_drift);
        let ts: Vec<f64> = run.trajectory.iter().map(|s| s.0).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn step_halving_is_second_order() {
    let sig = Signature::unit(2, 1).unwrap();
    let u0 = random_field(&sig, 2, 9).normalized().scaled(Complex64::new(1.5, 0.0));
    let p = NlsProblem::new(u0, 1, Nonlinearity::Focusing, 1.0).unwrap();
    let r = step_halving(&p, 0.02).unwrap();
    assert!((3.0..=5.0).contains(&r.ratio), "{r:?}");
    assert!((3.0..=5.0).contains(&r.energy_ratio), "{r:?}");
    assert!(r.resolved);
}

#[test]
fn energy_variants_agree_on_padded_box() {
    let sig = Signature::unit(2, 1).unwrap();
    let u = random_field(&sig, 2, 4).resized(&[4, 4]).unwrap();
    for nl in [Nonlinearity::Focusing, Nonlinearity::Defocusing] {
        let a = hamiltonian(1, nl, &u, EnergyVariant::Exact);
        let b = hamiltonian(1, nl, &u, EnergyVariant::Discrete);
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }
}

#[test]
fn energy_potential_matches_brute_force() {
    let sig = Signature::unit(1, 1).unwrap();
    let u = random_field(&sig, 3, 2);
    let n = 4000;
    let pot: f64 = (0..n)
        .map(|i| u.eval_at(&[i as f64 / n as f64]).norm_sqr().powi(2))
        .sum::<f64>()
        / n as f64;
    let kin = hamiltonian(1, Nonlinearity::Off, &u, EnergyVariant::Exact);
    let e = hamiltonian(1, Nonlinearity::Defocusing, &u, EnergyVariant::Exact);
    assert!((e - (kin + pot / 4.0)).abs() < 1e-10 * e.abs());
}

#[test]
fn gauge_covariance() {
    let sig = Signature::unit(2, 1).unwrap();
    let u0 = random_field(&sig, 2, 11).normalized();
    let rot = Complex64::cis(0.9);
    let p = NlsProblem::new(u0.clone(), 1, Nonlinearity::Focusing, 0.2).unwrap();
    let q = p.with_data(u0.scaled(rot));
    let a = split_step(&p, 0.01, 20).unwrap();
    let b = split_step(&q, 0.01, 20).unwrap();
    let diff = b.final_state().sub(&a.final_state().scaled(rot)).unwrap().l2_norm();
    assert!(diff < 1e-13, "{diff}");
    let a = picard_iterate(&p, 3, 11).unwrap();
    let b = picard_iterate(&q, 3, 11).unwrap();
    for (x, y) in a.last().iter().zip(b.last()) {
        assert!(y.sub(&x.scaled(rot)).unwrap().l2_norm() < 1e-13);
    }
}

#[test]
fn linear_time_reversal() {
    let sig = Signature::unit(3, 1).unwrap();
    let u0 = random_field(&sig, 2, 3);
    let p = NlsProblem::new(u0.clone(), 1, Nonlinearity::Off, 0.7).unwrap();
    let forward = split_step(&p, 0.07, 10).unwrap();
    let back = evolve(forward.final_state(), -0.7);
    let err = back.resized(u0.half()).unwrap().sub(&u0).unwrap().l2_norm();
    assert!(err < 1e-12 * u0.l2_norm());
}

#[test]
fn picard_first_iterate_is_duhamel_of_free_nonlinearity() {
    let sig = Signature::unit(2, 1).unwrap();
    let u0 = random_field(&sig, 1, 8).normalized().scaled(Complex64::new(0.3, 0.0));
    let p = NlsProblem::new(u0, 1, Nonlinearity::Focusing, 0.1).unwrap();
    let n_time = 9;
    let run = picard_iterate(&p, 1, n_time).unwrap();
    let half = p.work_half();
    let free0 = p.u0.resized(&half).unwrap();
    let t = p.t_max;
    // trapezoid with the solver's nodes, forcing built independently
    let forcing = |tau: f64| {
        collocated_nonlinearity(&evolve(&free0, tau), 1).scaled(Complex64::new(0.0, 1.0))
    };
    let want = duhamel(forcing, t, n_time).unwrap();
    let got = run.iterates[1][n_time - 1].sub(&run.iterates[0][n_time - 1]).unwrap();
    let err = got.sub(&want).unwrap().l2_norm();
    assert!(err < 1e-12, "{err}");
}

fn small_problem(amp: f64) -> NlsProblem {
    let sig = Signature::unit(3, 1).unwrap();
    let u0 = random_field(&sig, 2, 12);
    let p = NlsProblem::new(u0.clone(), 1, Nonlinearity::Focusing, 0.1).unwrap();
    let scale = amp / u0.sobolev_norm(p.critical_index());
    p.with_data(u0.scaled(Complex64::new(scale, 0.0)))
}

#[test]
fn small_data_contracts_and_matches_split_step() {
    let p = small_problem(0.01);
    let run = picard_iterate(&p, 6, 41).unwrap();
    assert_ne!(run.report.status, ContractionStatus::Diverging);
    assert!(run.report.contracts_by(0.5), "{:?}", run.report);
    let reference = split_step(&p, 0.0025, 40).unwrap();
    let err = run.last().last().unwrap().sub(reference.final_state()).unwrap().l2_norm();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn smaller_data_contracts_faster() {
    let ratios: Vec<f64> = [1.0, 0.5, 0.25]
        .iter()
        .map(|l| {
            let run = picard_iterate(&small_problem(2.0 * l), 4, 21).unwrap();
            run.report.max_ratio_from(0).unwrap()
        })
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] <= w[0]), "{ratios:?}");
}

#[test]
fn large_data_leaves_contraction_regime() {
    let run = picard_iterate(&small_problem(200.0), 8, 21).unwrap();
    assert!(!run.report.contracts_by(0.5), "{:?}", run.report);
    assert_eq!(run.report.status, ContractionStatus::Diverging);
}

#[test]
fn inflation_probe_small_and_zero() {
    let r = inflation_probe(&small_problem(0.05), 0.005, 0.5).unwrap();
    assert!(r.max_growth <= 2.0);
    let sig = Signature::unit(2, 1).unwrap();
    let z = SpectralField::zeros_cube(&sig, 2);
    let p = NlsProblem::new(z, 1, Nonlinearity::Focusing, 0.1).unwrap();
    let r = inflation_probe(&p, 0.01, 0.3).unwrap();
    assert!(r.growth.iter().all(|g| *g == 1.0));
}
