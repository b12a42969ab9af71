//! Invariant suite behind `qdenoise validate`.

use std::fmt::Write as _;

use qdenoise::analytics::{
    davis_kahan_check, haar_noise_avg_fidelity_exact_n2, noise_with_overlap,
    subspace_avg_fidelity, two_level_exact, worst_case_fidelity, worst_case_noise,
    SubspaceNoiseParams, TwoLevelNoise,
};
use qdenoise::applications::{
    cool_gibbs, denoiser_expected_copies, msd_expected_copies, QuadraticMsdMap,
};
use qdenoise::channels::{
    amplitude_damping, depolarizing, dit_flip, dit_phase_flip, gaussian_dephasing, phase_flip,
    Channel, FixedStateMix, KrausChannel,
};
use qdenoise::denoiser::{
    average_fidelity_mc, build_perfect_denoiser, denoise, ensemble_state, train_population,
};
use qdenoise::mesh::{
    coherent_intensities, mesh_from_unitary, single_photon_populations, unitary_from_mesh,
};
use qdenoise::qstate::{
    eigen_decompose, fidelity, frobenius, haar_random_state, haar_random_unitary,
    hermitian_deviation, random_subspace, trace, CMatrix, CVector, DensityMatrix, C64,
};
use qdenoise::rng;

use crate::config::ExperimentConfig;
use crate::experiments;

/// Deliberate defects for exercising the failure path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Adds a channel whose Kraus operators sum to 1.01·I.
    BrokenCompleteness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<(bool, String), String>;

fn worst(values: impl IntoIterator<Item = f64>, tol: f64, label: &str) -> (bool, String) {
    let m = values.into_iter().fold(0.0f64, f64::max);
    (m <= tol, format!("max {label} {m:.3e} (tol {tol:.0e})"))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn kraus_catalog(fault: Option<Fault>) -> Result<Vec<(String, KrausChannel)>, String> {
    let mut out = Vec::new();
    for n in 2..=8 {
        for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
            out.push((format!("dit_flip n={n} p={p}"), dit_flip(p, n).map_err(err)?));
            out.push((format!("phase_flip n={n} p={p}"), phase_flip(p, n).map_err(err)?));
            out.push((format!("dit_phase_flip n={n} p={p}"), dit_phase_flip(p, n).map_err(err)?));
            out.push((format!("amplitude_damping n={n} p={p}"), amplitude_damping(p, n).map_err(err)?));
            out.push((format!("gaussian_dephasing n={n} s={p}"), gaussian_dephasing(p, n).map_err(err)?));
            let dep = depolarizing(p, n).map_err(err)?.to_kraus().map_err(err)?;
            out.push((format!("depolarizing n={n} p={p}"), dep));
        }
    }
    if fault == Some(Fault::BrokenCompleteness) {
        let op = CMatrix::identity(3, 3) * C64::new(1.01f64.sqrt(), 0.0);
        out.push(("injected".into(), KrausChannel::new_unchecked(vec![op]).map_err(err)?));
    }
    Ok(out)
}

fn completeness(fault: Option<Fault>) -> Outcome {
    let cat = kraus_catalog(fault)?;
    let bad: Vec<&str> = cat
        .iter()
        .filter(|(_, ch)| ch.completeness_deviation() > 1e-10)
        .map(|(name, _)| name.as_str())
        .collect();
    if bad.is_empty() {
        Ok((true, format!("{} channels complete within 1e-10", cat.len())))
    } else {
        Ok((false, format!("incomplete: {}", bad.join("; "))))
    }
}

fn trace_preservation(fault: Option<Fault>) -> Outcome {
    let mut r = rng::seeded(11);
    let mut dev = 0.0f64;
    let mut min_eig = 0.0f64;
    for (_, ch) in kraus_catalog(fault)? {
        let rho = DensityMatrix::random(ch.dim(), &mut r).map_err(err)?;
        let out = ch.apply(&rho).map_err(err)?;
        dev = dev
            .max((trace(out.matrix()).re - 1.0).abs())
            .max(hermitian_deviation(out.matrix()));
        let eig = eigen_decompose(&out).map_err(err)?;
        min_eig = eig.eigenvalues.iter().fold(min_eig, |a, &l| a.min(l));
    }
    Ok((
        dev <= 1e-12 && min_eig >= -1e-10,
        format!("max trace/Hermiticity deviation {dev:.3e}, min eigenvalue {min_eig:.3e}"),
    ))
}

fn eigen_reconstruct() -> Outcome {
    let mut r = rng::seeded(12);
    let mut dev = Vec::new();
    for n in 1..=16 {
        for _ in 0..10 {
            let rho = DensityMatrix::random(n, &mut r).map_err(err)?;
            let e = eigen_decompose(&rho).map_err(err)?;
            dev.push(frobenius(&(e.reconstruct() - rho.matrix())));
        }
    }
    Ok(worst(dev, 1e-10, "reconstruction error"))
}

fn haar_reproducible() -> Outcome {
    let a = haar_random_unitary(6, &mut rng::seeded(13)).map_err(err)?;
    let b = haar_random_unitary(6, &mut rng::seeded(13)).map_err(err)?;
    Ok((a == b, "identical seed gives identical unitary".into()))
}

fn population_cost() -> Outcome {
    let mut r = rng::seeded(14);
    let mut dev = Vec::new();
    for n in 1..=8 {
        for k in 1..=n {
            let rho = DensityMatrix::random(n, &mut r).map_err(err)?;
            let (_, rep) = train_population(&rho, k).map_err(err)?;
            let e = eigen_decompose(&rho).map_err(err)?;
            let kept: f64 = e.eigenvalues[..k].iter().sum();
            dev.push((rep.cost - (1.0 - kept)).abs());
        }
    }
    Ok(worst(dev, 1e-10, "cost deviation"))
}

fn depolarizing_perfect() -> Outcome {
    let mut r = rng::seeded(15);
    let s = random_subspace(5, 1, &mut r).map_err(err)?;
    let (mut fid, mut succ) = (0.0f64, 0.0f64);
    for i in 1..=9 {
        let p = i as f64 / 10.0;
        let ch: Channel = depolarizing(p, 5).map_err(err)?.into();
        let (d, _) = train_population(&ensemble_state(&ch, &s).map_err(err)?, 1).map_err(err)?;
        let est = average_fidelity_mc(&d, &ch, &s, 50, &mut r).map_err(err)?;
        fid = fid.max((est.denoised.mean - 1.0).abs());
        succ = succ.max((est.mean_success - (1.0 - 0.8 * p)).abs());
    }
    Ok((
        fid <= 1e-6 && succ <= 1e-9,
        format!("max fidelity deviation {fid:.3e}, max success deviation {succ:.3e}"),
    ))
}

fn perfect_rejection() -> Outcome {
    let mut r = rng::seeded(16);
    let mut dev = Vec::new();
    for k in 1..=2 {
        for i in 0..10 {
            let s = random_subspace(2 * k, k, &mut r).map_err(err)?;
            let (noise, _) = noise_with_overlap(&s, 0.09 * i as f64).map_err(err)?;
            let (d, _) = build_perfect_denoiser(&s, &noise).map_err(err)?;
            let latent = d.encoder().matrix().rows(0, k).into_owned();
            dev.push((&latent * noise.amplitudes()).norm());
        }
    }
    Ok(worst(dev, 1e-10, "noise-branch norm"))
}

fn worst_case_bound() -> Outcome {
    let mut r = rng::seeded(17);
    let mut gap = Vec::new();
    for i in 1..=10 {
        let p = 0.05 * i as f64;
        for _ in 0..100 {
            let n = 2 + (gap.len() % 5);
            let psi = haar_random_state(n, &mut r).map_err(err)?;
            let noise = DensityMatrix::random(n, &mut r).map_err(err)?;
            let rho = DensityMatrix::mix(1.0 - p, &DensityMatrix::pure(&psi), &noise).map_err(err)?;
            let (d, _) = train_population(&rho, 1).map_err(err)?;
            let out = denoise(&d, &rho).map_err(err)?;
            let f = fidelity(out.state.as_ref().ok_or("rejected")?, &psi).map_err(err)?;
            gap.push(worst_case_fidelity(p) - f);
        }
        let q = p.min(0.5 - 1e-6);
        let (ideal, noise) = worst_case_noise(3, q).map_err(err)?;
        let rho = DensityMatrix::mix(1.0 - q, &DensityMatrix::pure(&ideal), &noise).map_err(err)?;
        let (d, _) = train_population(&rho, 1).map_err(err)?;
        let out = denoise(&d, &rho).map_err(err)?;
        let f = fidelity(out.state.as_ref().ok_or("rejected")?, &ideal).map_err(err)?;
        gap.push((f - worst_case_fidelity(q)).abs());
    }
    Ok(worst(gap, 1e-9, "bound violation"))
}

fn pure_noise_worst() -> Outcome {
    let mut viol = Vec::new();
    for i in 0..=10 {
        let p = 0.05 * i as f64;
        for j in 0..=10 {
            let rho00 = 0.1 * j as f64;
            let pure = two_level_exact(p, TwoLevelNoise::pure(rho00).map_err(err)?).map_err(err)?;
            for f in [0.0, 0.5, 0.9] {
                let off = C64::new(f * (rho00 * (1.0 - rho00)).sqrt(), 0.0);
                let mixed = TwoLevelNoise::new(rho00, off).map_err(err)?;
                let v = two_level_exact(p, mixed).map_err(err)?;
                viol.push(pure.fidelity - v.fidelity);
            }
        }
    }
    Ok(worst(viol, 1e-12, "pure-noise excess"))
}

fn haar_closed_form() -> Outcome {
    let a = haar_noise_avg_fidelity_exact_n2(0.5);
    let b = haar_noise_avg_fidelity_exact_n2(1.0);
    Ok(((a - 5.0 / 6.0).abs() < 1e-15 && (b - 0.5).abs() < 1e-15, format!("{a:.15} {b:.15}")))
}

fn subspace_formula() -> Outcome {
    let mut r = rng::seeded(18);
    let mut dev = Vec::new();
    for (n, k, p, c) in [(4, 2, 0.3, 0.5), (5, 3, 0.6, 0.2), (6, 2, 0.1, 0.8)] {
        let s = random_subspace(n, k, &mut r).map_err(err)?;
        let (noise, _) = noise_with_overlap(&s, c).map_err(err)?;
        let ch: Channel =
            FixedStateMix::new(p, DensityMatrix::pure(&noise)).map_err(err)?.into();
        let (d, _) = train_population(&ensemble_state(&ch, &s).map_err(err)?, k).map_err(err)?;
        let est = average_fidelity_mc(&d, &ch, &s, 4000, &mut r).map_err(err)?;
        let exact = subspace_avg_fidelity(&SubspaceNoiseParams::new(n, k, p, c).map_err(err)?)
            .map_err(err)?;
        dev.push((est.denoised.mean - exact).abs() / (4.0 * est.denoised.stderr).max(1e-9));
    }
    Ok(worst(dev, 1.0, "deviation in units of 4 stderr"))
}

fn davis_kahan() -> Outcome {
    let mut r = rng::seeded(19);
    let mut viol = 0;
    let mut checked = 0;
    for i in 0..200 {
        let n = 2 + i % 5;
        let k = 1 + i % n.min(3);
        let k = k.min(n - 1).max(1);
        let p = 0.3 * (i as f64 + 0.5) / 200.0;
        let s = random_subspace(n, k, &mut r).map_err(err)?;
        let noise = DensityMatrix::random(n, &mut r).map_err(err)?;
        if let Some(h) = davis_kahan_check(&noise, &s, p).map_err(err)?.holds {
            checked += 1;
            if !h {
                viol += 1;
            }
        }
    }
    Ok((viol == 0, format!("{viol} violations in {checked} instances")))
}

fn msd_costs() -> Outcome {
    let map = QuadraticMsdMap::default();
    let mut ok = true;
    let mut min_ratio = f64::INFINITY;
    for i in 0..=100 {
        let p_in = i as f64 / 100.0;
        let ae = denoiser_expected_copies(p_in, 0.02, 3).map_err(err)?;
        ok &= ae.expected_copies <= 3.0 + 1e-12;
        let msd = msd_expected_copies(&map, p_in, ae.achieved_fidelity).map_err(err)?;
        ok &= msd.is_infinite() == (p_in >= 0.233);
        if p_in >= 0.1 {
            min_ratio = min_ratio.min(msd.expected_copies / ae.expected_copies);
        }
    }
    ok &= min_ratio >= 100.0;
    Ok((ok, format!("min MSD/denoiser ratio {min_ratio:.3e}")))
}

fn cooling() -> Outcome {
    let mut r = rng::seeded(20);
    let (mut fid, mut succ) = (0.0f64, 0.0f64);
    for i in 0..30 {
        let n = 2 + i % 7;
        let u = haar_random_unitary(n, &mut r).map_err(err)?;
        let levels = CVector::from_fn(n, |j, _| C64::new(0.5 * j as f64, 0.0));
        let h = u.matrix() * CMatrix::from_diagonal(&levels) * u.matrix().adjoint();
        for beta in [0.1, 1.0, 10.0] {
            let out = cool_gibbs(&h, beta).map_err(err)?;
            let z: f64 = (0..n).map(|j| (-beta * 0.5 * j as f64).exp()).sum();
            fid = fid.max((out.fidelity - 1.0).abs());
            succ = succ.max((out.success_probability - 1.0 / z).abs());
        }
    }
    Ok((
        fid <= 1e-9 && succ <= 1e-10,
        format!("max fidelity deviation {fid:.3e}, max success deviation {succ:.3e}"),
    ))
}

fn mesh_round_trip() -> Outcome {
    let mut r = rng::seeded(21);
    let mut dev = Vec::new();
    for n in 1..=12 {
        let u = haar_random_unitary(n, &mut r).map_err(err)?;
        let back = unitary_from_mesh(&mesh_from_unitary(&u).map_err(err)?).map_err(err)?;
        dev.push(frobenius(&(back.matrix() - u.matrix())));
    }
    Ok(worst(dev, 1e-8, "reconstruction error"))
}

fn coherent_ratio() -> Outcome {
    let mut r = rng::seeded(22);
    let alpha = C64::new(1.3, -0.4);
    let mut dev = Vec::new();
    for _ in 0..100 {
        let u = haar_random_unitary(5, &mut r).map_err(err)?;
        let pops = single_photon_populations(&u, 0).map_err(err)?;
        let ints = coherent_intensities(&u, 0, alpha).map_err(err)?;
        for (p, i) in pops.iter().zip(&ints) {
            if *p > 1e-15 {
                dev.push((i / p - alpha.norm_sqr()).abs());
            }
        }
    }
    Ok(worst(dev, 1e-12, "ratio deviation"))
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::from_toml(
        r#"
kind = "sweep"
seed = 23
samples = 100
n = 4
k = 2
[channel]
kind = "amplitude_damping"
[grid]
values = [0.1, 0.3, 0.5]
"#,
    )
    .map_err(err)?;
    let a = experiments::run(&cfg).map_err(err)?.to_csv();
    let b = experiments::run(&cfg).map_err(err)?.to_csv();
    Ok((a == b, format!("{} CSV bytes", a.len())))
}

/// Runs every check with fixed seeds. Output is independent of timing and
/// thread count.
pub fn run_checks(fault: Option<Fault>) -> Vec<CheckResult> {
    let checks: Vec<(&'static str, Box<dyn Fn() -> Outcome>)> = vec![
        ("channels.completeness", Box::new(move || completeness(fault))),
        ("channels.trace_preservation", Box::new(move || trace_preservation(fault))),
        ("qstate.eigen_reconstruct", Box::new(eigen_reconstruct)),
        ("qstate.haar_reproducible", Box::new(haar_reproducible)),
        ("denoiser.population_cost", Box::new(population_cost)),
        ("denoiser.depolarizing_perfect", Box::new(depolarizing_perfect)),
        ("denoiser.perfect_rejection", Box::new(perfect_rejection)),
        ("analytics.worst_case_bound", Box::new(worst_case_bound)),
        ("analytics.pure_noise_worst", Box::new(pure_noise_worst)),
        ("analytics.haar_closed_form", Box::new(haar_closed_form)),
        ("analytics.subspace_formula", Box::new(subspace_formula)),
        ("analytics.davis_kahan", Box::new(davis_kahan)),
        ("applications.msd_costs", Box::new(msd_costs)),
        ("applications.cooling", Box::new(cooling)),
        ("mesh.round_trip", Box::new(mesh_round_trip)),
        ("mesh.coherent_ratio", Box::new(coherent_ratio)),
        ("cli.determinism", Box::new(determinism)),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f() {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
        })
        .collect()
}

pub fn report(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{status}  {:<32} {}", r.name, r.detail).unwrap();
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    writeln!(out, "{} checks, {} failed", results.len(), failed).unwrap();
    out
}
