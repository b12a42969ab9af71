use std::time::Instant;

use qdenoise::analytics::noise_with_overlap;
use qdenoise::channels::{amplitude_damping, Channel, FixedStateMix};
use qdenoise::denoiser::{
    average_fidelity_mc, ensemble_state, fidelity_training_set, train_fidelity, train_population,
    OptimizerConfig,
};
use qdenoise::qstate::{random_subspace, DensityMatrix};
use qdenoise::rng;

#[test]
fn amplitude_damping_fidelity_beats_population() {
    let t0 = Instant::now();
    let mut r = rng::seeded(801);
    let s = random_subspace(4, 3, &mut r).unwrap();
    let ch: Channel = amplitude_damping(0.3, 4).unwrap().into();
    let (pop, _) = train_population(&ensemble_state(&ch, &s).unwrap(), 3).unwrap();
    let set = fidelity_training_set(&ch, &s, 128, &mut r).unwrap();
    let (fid, rep) = train_fidelity(&set, 4, 3, &OptimizerConfig::default(), &mut r).unwrap();
    let mut eval = rng::seeded(802);
    let a = average_fidelity_mc(&pop, &ch, &s, 4000, &mut eval).unwrap();
    let mut eval = rng::seeded(802);
    let b = average_fidelity_mc(&fid, &ch, &s, 4000, &mut eval).unwrap();
    println!(
        "pop {:?} fid {:?} rep {rep:?} in {:?}",
        a.denoised,
        b.denoised,
        t0.elapsed()
    );
    assert!(b.denoised.mean >= a.denoised.mean);
}

#[test]
fn fixed_pure_noise_reaches_near_unity() {
    let t0 = Instant::now();
    let mut r = rng::seeded(803);
    let s = random_subspace(3, 1, &mut r).unwrap();
    let (noise, _) = noise_with_overlap(&s, 0.1).unwrap();
    let ch: Channel = FixedStateMix::new(0.8, DensityMatrix::pure(&noise)).unwrap().into();
    let set = fidelity_training_set(&ch, &s, 128, &mut r).unwrap();
    let (fid, rep) = train_fidelity(&set, 3, 1, &OptimizerConfig::default(), &mut r).unwrap();
    let b = average_fidelity_mc(&fid, &ch, &s, 2000, &mut rng::seeded(804)).unwrap();
    println!("fid {:?} rep {rep:?} in {:?}", b.denoised, t0.elapsed());
    assert!(b.denoised.mean >= 0.99);
}
