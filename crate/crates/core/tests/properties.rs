use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

use qdenoise::analytics::{
    small_p_expansion_haar, two_level_exact, worst_case_fidelity, worst_case_noise, TwoLevelNoise,
};
use qdenoise::applications::{
    cool_gibbs, denoiser_expected_copies, msd_expected_copies, QuadraticMsdMap,
};
use qdenoise::channels::{
    amplitude_damping, depolarizing, dit_flip, dit_phase_flip, gaussian_dephasing, gibbs_state,
    phase_flip, Channel, FixedStateMix, KrausChannel,
};
use qdenoise::denoiser::{
    average_fidelity_mc, build_perfect_denoiser, denoise, ensemble_state, fidelity_cost,
    fidelity_training_set, train_fidelity, train_population, OptimizerConfig,
};
use qdenoise::mesh::{
    coherent_intensities, mesh_from_unitary, single_photon_populations, unitary_from_mesh,
    MeshParams,
};
use qdenoise::qstate::{
    dominant_projector, eigen_decompose, fidelity, frobenius, haar_random_state,
    haar_random_unitary, hermitian_deviation, random_subspace, sample_in_subspace, trace,
    CMatrix, DensityMatrix, PureState,
};
use qdenoise::rng;

fn random_hermitian(n: usize, seed: u64) -> CMatrix {
    let u = haar_random_unitary(n, &mut rng::seeded(seed)).unwrap();
    let e: Vec<Complex64> = (0..n).map(|j| Complex64::new(j as f64 * 0.7 - 1.3, 0.0)).collect();
    let d = CMatrix::from_diagonal(&DVector::from_vec(e));
    u.matrix() * d * u.matrix().adjoint()
}

fn check_density(rho: &DensityMatrix) {
    assert!((trace(rho.matrix()).re - 1.0).abs() < 1e-12);
    assert!(hermitian_deviation(rho.matrix()) < 1e-12);
    let eig = eigen_decompose(rho).unwrap();
    assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
}

fn kraus_channels(n: usize, p: f64) -> Vec<KrausChannel> {
    let mut out = vec![amplitude_damping(p, n).unwrap(), gaussian_dephasing(p, n).unwrap()];
    if n >= 2 {
        out.push(dit_flip(p, n).unwrap());
        out.push(phase_flip(p, n).unwrap());
        out.push(dit_phase_flip(p, n).unwrap());
    }
    out
}

#[test]
fn kraus_completeness_grid() {
    for n in 1..=8 {
        for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
            for ch in kraus_channels(n, p) {
                assert!(ch.completeness_deviation() < 1e-10, "n={n} p={p}");
            }
            let ch = depolarizing(p, n).unwrap().to_kraus().unwrap();
            assert!(ch.completeness_deviation() < 1e-10);
        }
    }
}

#[test]
fn small_p_expansion_grows_with_dimension() {
    let values: Vec<f64> = (3..=12).map(|n| small_p_expansion_haar(n, 0.05).value).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
}

#[test]
fn copies_bounded_and_msd_gap() {
    let map = QuadraticMsdMap::default();
    for i in 0..=100 {
        let p_in = i as f64 / 100.0;
        let ae = denoiser_expected_copies(p_in, 0.02, 3).unwrap();
        assert!(ae.expected_copies <= 3.0 + 1e-12);
        if p_in >= 0.1 {
            let msd = msd_expected_copies(&map, p_in, ae.achieved_fidelity).unwrap();
            assert!(msd.expected_copies / ae.expected_copies >= 100.0, "p_in={p_in}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigen_reconstructs(n in 1usize..=16, seed in any::<u64>()) {
        let rho = DensityMatrix::random(n, &mut rng::seeded(seed)).unwrap();
        let eig = eigen_decompose(&rho).unwrap();
        prop_assert!(frobenius(&(eig.reconstruct() - rho.matrix())) < 1e-10);
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn full_rank_projector_is_identity(n in 1usize..=8, seed in any::<u64>()) {
        let rho = DensityMatrix::random(n, &mut rng::seeded(seed)).unwrap();
        let (d, _) = dominant_projector(&rho, n).unwrap();
        prop_assert!(frobenius(&(d - CMatrix::identity(n, n))) < 1e-10);
    }

    #[test]
    fn fidelity_is_linear(n in 1usize..=6, a in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let r1 = DensityMatrix::random(n, &mut r).unwrap();
        let r2 = DensityMatrix::random(n, &mut r).unwrap();
        let psi = haar_random_state(n, &mut r).unwrap();
        let mixed = DensityMatrix::mix(a, &r1, &r2).unwrap();
        let lhs = fidelity(&mixed, &psi).unwrap();
        let rhs = a * fidelity(&r1, &psi).unwrap() + (1.0 - a) * fidelity(&r2, &psi).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn haar_samplers_reproducible(n in 1usize..=8, seed in any::<u64>()) {
        let a = haar_random_unitary(n, &mut rng::seeded(seed)).unwrap();
        let b = haar_random_unitary(n, &mut rng::seeded(seed)).unwrap();
        prop_assert_eq!(a, b);
        let a = haar_random_state(n, &mut rng::seeded(seed)).unwrap();
        let b = haar_random_state(n, &mut rng::seeded(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn channels_preserve_states(n in 2usize..=6, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let rho = DensityMatrix::random(n, &mut r).unwrap();
        for ch in kraus_channels(n, p) {
            check_density(&ch.apply(&rho).unwrap());
        }
        let noise = DensityMatrix::random(n, &mut r).unwrap();
        check_density(&FixedStateMix::new(p, noise).unwrap().apply(&rho).unwrap());
    }

    #[test]
    fn gibbs_commutes(n in 1usize..=8, beta in 0.0f64..10.0, seed in any::<u64>()) {
        let h = random_hermitian(n, seed);
        let rho = gibbs_state(&h, beta).unwrap();
        let comm = &h * rho.matrix() - rho.matrix() * &h;
        prop_assert!(frobenius(&comm) < 1e-10);
    }

    #[test]
    fn denoised_states_valid(n in 2usize..=6, k in 1usize..=3, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let k = k.min(n);
        let mut r = rng::seeded(seed);
        let s = random_subspace(n, k, &mut r).unwrap();
        let ch: Channel = dit_flip(p, n).unwrap().into();
        let (d, _) = train_population(&ensemble_state(&ch, &s).unwrap(), k).unwrap();
        let rho = DensityMatrix::random(n, &mut r).unwrap();
        let out = denoise(&d, &rho).unwrap();
        if out.success_probability > 1e-9 {
            check_density(out.state.as_ref().unwrap());
        }
    }

    #[test]
    fn population_cost_saturates(n in 1usize..=8, k in 1usize..=8, seed in any::<u64>()) {
        let k = k.min(n);
        let rho = DensityMatrix::random(n, &mut rng::seeded(seed)).unwrap();
        let (_, rep) = train_population(&rho, k).unwrap();
        let eig = eigen_decompose(&rho).unwrap();
        let kept: f64 = eig.eigenvalues[..k].iter().sum();
        prop_assert!((rep.cost - (1.0 - kept)).abs() < 1e-10);
    }

    #[test]
    fn population_training_unitarily_invariant(
        n in 2usize..=5, k in 1usize..=2, p in 0.0f64..0.9, seed in any::<u64>()
    ) {
        let k = k.min(n - 1);
        let mut r = rng::seeded(seed);
        let s = random_subspace(n, k, &mut r).unwrap();
        let ch: Channel = amplitude_damping(p, n).unwrap().into();
        let rho_s = ensemble_state(&ch, &s).unwrap();
        let w = haar_random_unitary(n, &mut r).unwrap();
        let (d, _) = train_population(&rho_s, k).unwrap();
        let (dw, _) = train_population(&rho_s.conjugate(&w).unwrap(), k).unwrap();
        for _ in 0..4 {
            let psi = sample_in_subspace(&s, &mut r).unwrap();
            let noisy = ch.apply_pure(&psi).unwrap();
            let f = fidelity(denoise(&d, &noisy).unwrap().state.as_ref().unwrap(), &psi).unwrap();
            let out = denoise(&dw, &noisy.conjugate(&w).unwrap()).unwrap();
            let fw = fidelity(out.state.as_ref().unwrap(), &w.apply(&psi).unwrap()).unwrap();
            prop_assert!((f - fw).abs() < 1e-9, "{f} vs {fw}");
        }
    }

    #[test]
    fn small_noise_safety(n in 3usize..=5, k in 1usize..=2, p in 0.0f64..=0.02, which in 0usize..3, seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let s = random_subspace(n, k, &mut r).unwrap();
        let ch: Channel = match which {
            0 => depolarizing(p, n).unwrap().into(),
            1 => dit_flip(p, n).unwrap().into(),
            _ => phase_flip(p, n).unwrap().into(),
        };
        let (d, _) = train_population(&ensemble_state(&ch, &s).unwrap(), k).unwrap();
        let est = average_fidelity_mc(&d, &ch, &s, 500, &mut r).unwrap();
        let slack = 5.0 * est.denoised.stderr.max(est.bare.stderr) + 10.0 * p * p;
        prop_assert!(est.denoised.mean >= est.bare.mean - slack);
    }

    #[test]
    fn perfect_denoiser_invariants(k in 1usize..=3, extra in 0usize..=2, ov in 0.0f64..0.95, seed in any::<u64>()) {
        let n = 2 * k + extra;
        let mut r = rng::seeded(seed);
        let s = random_subspace(n, k, &mut r).unwrap();
        let chi = haar_random_state(n, &mut r).unwrap();
        let comp = s.complement_basis();
        let v = s.basis_vector(0).amplitudes() * Complex64::new(ov.sqrt(), 0.0)
            + comp * chi.amplitudes().rows(0, n - k) * Complex64::new((1.0 - ov).sqrt(), 0.0);
        let noise = PureState::normalized(v).unwrap();
        let (d, success) = build_perfect_denoiser(&s, &noise).unwrap();
        let c_true = (s.basis().adjoint() * noise.amplitudes()).norm_squared();
        prop_assert!((success - (1.0 - c_true)).abs() < 1e-10);
        let latent = d.encoder().matrix().rows(0, k).into_owned();
        prop_assert!((&latent * noise.amplitudes()).norm() < 1e-10);
        for j in 0..k {
            let x = &latent * s.basis_vector(j).amplitudes();
            prop_assert!((x.norm_squared() - (1.0 - c_true)).abs() < 1e-10);
        }
    }

    #[test]
    fn mesh_round_trip(n in 1usize..=12, seed in any::<u64>()) {
        let u = haar_random_unitary(n, &mut rng::seeded(seed)).unwrap();
        let mesh = mesh_from_unitary(&u).unwrap();
        let back = unitary_from_mesh(&mesh).unwrap();
        prop_assert!(frobenius(&(back.matrix() - u.matrix())) < 1e-8);
        let again = unitary_from_mesh(&mesh_from_unitary(&back).unwrap()).unwrap();
        prop_assert!(frobenius(&(again.matrix() - back.matrix())) < 1e-8);
    }

    #[test]
    fn mesh_parameters_round_trip(n in 1usize..=8, seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let mut mesh = MeshParams::identity(n);
        let flat: Vec<f64> = (0..MeshParams::n_params(n))
            .map(|_| rand::Rng::random_range(&mut r, -3.0..3.0))
            .collect();
        mesh.set_flat(&flat).unwrap();
        let u = unitary_from_mesh(&mesh).unwrap();
        let u2 = unitary_from_mesh(&mesh_from_unitary(&u).unwrap()).unwrap();
        prop_assert!(frobenius(&(u2.matrix() - u.matrix())) < 1e-8);
    }

    #[test]
    fn coherent_ratio(n in 1usize..=8, input in 0usize..8, re in -3.0f64..3.0, im in -3.0f64..3.0, seed in any::<u64>()) {
        let input = input % n;
        let u = haar_random_unitary(n, &mut rng::seeded(seed)).unwrap();
        let alpha = Complex64::new(re, im);
        let pops = single_photon_populations(&u, input).unwrap();
        let ints = coherent_intensities(&u, input, alpha).unwrap();
        for (p, i) in pops.iter().zip(&ints) {
            if *p > 1e-15 {
                prop_assert!((i / p - alpha.norm_sqr()).abs() < 1e-12 * alpha.norm_sqr().max(1.0));
            }
        }
    }

    #[test]
    fn worst_case_bound_holds(n in 2usize..=6, step in 1usize..=10, seed in any::<u64>()) {
        let p = step as f64 * 0.05;
        let mut r = rng::seeded(seed);
        let psi = haar_random_state(n, &mut r).unwrap();
        let noise = DensityMatrix::random(n, &mut r).unwrap();
        let rho = DensityMatrix::mix(1.0 - p, &DensityMatrix::pure(&psi), &noise).unwrap();
        let (d, _) = train_population(&rho, 1).unwrap();
        let f = fidelity(denoise(&d, &rho).unwrap().state.as_ref().unwrap(), &psi).unwrap();
        prop_assert!(f >= worst_case_fidelity(p) - 1e-9);
        // exact two-fold degeneracy at p = 1/2
        let p = p.min(0.5 - 1e-6);
        let (ideal, worst) = worst_case_noise(n, p).unwrap();
        let rho = DensityMatrix::mix(1.0 - p, &DensityMatrix::pure(&ideal), &worst).unwrap();
        let (d, _) = train_population(&rho, 1).unwrap();
        let f = fidelity(denoise(&d, &rho).unwrap().state.as_ref().unwrap(), &ideal).unwrap();
        prop_assert!((f - worst_case_fidelity(p)).abs() < 1e-9);
    }

    #[test]
    fn pure_noise_is_worst(p in 0.0f64..=0.5, rho00 in 0.0f64..=1.0, frac in 0.0f64..=1.0, phase in 0.0f64..6.3) {
        let pure = two_level_exact(p, TwoLevelNoise::pure(rho00).unwrap()).unwrap();
        let mag = frac * (rho00 * (1.0 - rho00)).sqrt();
        let mixed = TwoLevelNoise::new(rho00, Complex64::from_polar(mag, phase)).unwrap();
        let f = two_level_exact(p, mixed).unwrap();
        prop_assert!(f.fidelity >= pure.fidelity - 1e-12);
    }

    #[test]
    fn cooling_reaches_ground(n in 2usize..=8, beta in prop::sample::select(vec![0.1, 1.0, 10.0]), seed in any::<u64>()) {
        let h = random_hermitian(n, seed);
        let out = cool_gibbs(&h, beta).unwrap();
        prop_assert!((out.fidelity - 1.0).abs() < 1e-9);
        let z: f64 = (0..n).map(|j| (-beta * 0.7 * j as f64).exp()).sum();
        prop_assert!((out.success_probability - 1.0 / z).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn fidelity_training_never_worse_than_population(p in 0.05f64..0.5, seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let s = random_subspace(3, 2, &mut r).unwrap();
        let ch: Channel = amplitude_damping(p, 3).unwrap().into();
        let opt = OptimizerConfig { restarts: 3, training_samples: 32, ..Default::default() };
        let set = fidelity_training_set(&ch, &s, opt.training_samples, &mut r).unwrap();
        let mean = set.iter().fold(CMatrix::zeros(3, 3), |acc, (_, noisy)| acc + noisy.matrix());
        let mean = DensityMatrix::new(mean / Complex64::new(set.len() as f64, 0.0)).unwrap();
        let (pop, _) = train_population(&mean, 2).unwrap();
        let (_, rep) = train_fidelity(&set, 3, 2, &opt, &mut r).unwrap();
        prop_assert!(rep.cost <= fidelity_cost(&pop, &set).unwrap() + opt.tolerance);
    }
}
