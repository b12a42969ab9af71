//! Experiment kinds: grid evaluation of one point per row.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use qdenoise::analytics::{noise_with_overlap, subspace_avg_fidelity, SubspaceNoiseParams};
use qdenoise::applications::{
    cool_gibbs, denoiser_expected_copies, msd_expected_copies, QuadraticMsdMap,
};
use qdenoise::channels::{
    amplitude_damping, depolarizing, dit_flip, dit_phase_flip, gaussian_dephasing,
    gaussian_phase, phase_flip, Channel, FixedStateMix,
};
use qdenoise::denoiser::{
    average_fidelity_mc, build_perfect_denoiser, ensemble_state, fidelity_training_set,
    quenched_fidelity, train_fidelity, train_population, Denoiser, OptimizerConfig, TrainReport,
};
use qdenoise::qstate::{
    eigen_hermitian, haar_random_state, random_subspace, CMatrix, DensityMatrix, PureState,
    Subspace, C64,
};
use qdenoise::rng::{self, Rng};

use crate::config::{
    ChannelKind, ChannelSpec, ExperimentConfig, ExperimentKind, MsdSpec, TrainingMethod,
};
use crate::oracle;
use crate::table::{SweepResult, SWEEP_COLUMNS};

/// Statistical tolerance for Monte Carlo against an exact average.
const MC_SIGMAS: f64 = 4.0;
/// Floor for tolerances when the Monte Carlo spread vanishes.
const EXACT_TOL: f64 = 1e-9;
/// Quenched approximation against Monte Carlo.
const QUENCHED_TOL: f64 = 0.05;
const COOL_TOL: f64 = 1e-10;
const DEFAULT_PHASE_SAMPLES: usize = 100;

/// Runs every grid point and returns rows in grid order.
pub fn run(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let points = cfg.grid.points()?;
    match cfg.kind {
        ExperimentKind::Sweep
        | ExperimentKind::Subspace
        | ExperimentKind::Quenched
        | ExperimentKind::Perfect => fidelity_sweep(cfg, &points),
        ExperimentKind::Msd => msd_sweep(cfg, &points),
        ExperimentKind::Cool => cool_sweep(cfg, &points),
        ExperimentKind::Oracle => oracle_sweep(cfg, &points),
    }
}

/// Denoiser trained exactly as `run` would at grid point `index`.
pub fn denoiser_at(cfg: &ExperimentConfig, index: usize) -> Result<Denoiser> {
    cfg.validate()?;
    let points = cfg.grid.points()?;
    let value = *points
        .get(index)
        .with_context(|| format!("point {index} outside grid of {}", points.len()))?;
    let ctx = Sweep::new(cfg)?;
    let mut r = rng::stream(cfg.seed(), index as u64 + 1);
    Ok(ctx.train(value, &mut r)?.denoiser)
}

fn par_rows<F>(points: &[f64], param: &str, f: F) -> Result<Vec<Vec<Option<f64>>>>
where
    F: Fn(usize, f64) -> Result<Vec<Option<f64>>> + Sync,
{
    points
        .par_iter()
        .enumerate()
        .map(|(i, &v)| f(i, v).with_context(|| format!("grid point {i} ({param} = {v})")))
        .collect()
}

/// Shared state for one fidelity sweep: dimensions, the ideal subspace and
/// any noise state fixed across the grid. Drawn from stream 0.
struct Sweep<'a> {
    cfg: &'a ExperimentConfig,
    spec: ChannelSpec,
    n: usize,
    k: usize,
    s: Subspace,
    haar_noise: PureState,
}

struct Trained {
    channel: Channel,
    denoiser: Denoiser,
    report: Option<TrainReport>,
}

impl<'a> Sweep<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let (n, k) = cfg.dims()?;
        let spec = cfg.channel.clone().context("channel: required")?;
        let needs_pure = matches!(cfg.kind, ExperimentKind::Subspace | ExperimentKind::Perfect);
        if needs_pure && spec.kind != ChannelKind::FixedPure {
            bail!("channel.kind: this experiment needs `fixed_pure`");
        }
        if cfg.kind == ExperimentKind::Perfect && n < 2 * k {
            bail!("n: the perfect denoiser needs n >= 2k");
        }
        if !["p", "c", "sigma"].contains(&cfg.grid.param.as_str()) {
            bail!("grid.param: `{}` is not a channel parameter", cfg.grid.param);
        }
        let mut r = rng::stream(cfg.seed(), 0);
        let s = match cfg.subspace {
            crate::config::SubspaceChoice::Random => random_subspace(n, k, &mut r)?,
            crate::config::SubspaceChoice::Computational => Subspace::computational(n, k)?,
        };
        let haar_noise = haar_random_state(n, &mut r)?;
        Ok(Self { cfg, spec, n, k, s, haar_noise })
    }

    fn param(&self, name: &str, value: f64) -> Result<f64> {
        if self.cfg.grid.param == name {
            return Ok(value);
        }
        let v = match name {
            "p" => self.spec.p,
            "c" => self.spec.c,
            _ => self.spec.sigma,
        };
        v.with_context(|| format!("channel.{name}: required"))
    }

    fn channel(&self, value: f64, r: &mut Rng) -> Result<Channel> {
        let n = self.n;
        let field = |e: qdenoise::Error| anyhow::anyhow!("channel: {e}");
        let ch: Channel = match self.spec.kind {
            ChannelKind::Depolarizing => depolarizing(self.param("p", value)?, n).map_err(field)?.into(),
            ChannelKind::DitFlip => dit_flip(self.param("p", value)?, n).map_err(field)?.into(),
            ChannelKind::PhaseFlip => phase_flip(self.param("p", value)?, n).map_err(field)?.into(),
            ChannelKind::DitPhaseFlip => {
                dit_phase_flip(self.param("p", value)?, n).map_err(field)?.into()
            }
            ChannelKind::AmplitudeDamping => {
                amplitude_damping(self.param("p", value)?, n).map_err(field)?.into()
            }
            ChannelKind::GaussianDephasing => {
                gaussian_dephasing(self.param("sigma", value)?, n).map_err(field)?.into()
            }
            ChannelKind::GaussianPhase => {
                let draws = self.spec.phase_samples.unwrap_or(DEFAULT_PHASE_SAMPLES);
                gaussian_phase(self.param("sigma", value)?, n, draws, r).map_err(field)?.into()
            }
            ChannelKind::FixedPure => {
                let noise = self.pure_noise(value)?;
                FixedStateMix::new(self.param("p", value)?, DensityMatrix::pure(&noise))
                    .map_err(field)?
                    .into()
            }
            ChannelKind::HaarPure => FixedStateMix::new(
                self.param("p", value)?,
                DensityMatrix::pure(&self.haar_noise),
            )
            .map_err(field)?
            .into(),
        };
        Ok(ch)
    }

    fn pure_noise(&self, value: f64) -> Result<PureState> {
        let c = self.param("c", value)?;
        Ok(noise_with_overlap(&self.s, c).map_err(|e| anyhow::anyhow!("channel.c: {e}"))?.0)
    }

    fn train(&self, value: f64, r: &mut Rng) -> Result<Trained> {
        let channel = self.channel(value, r)?;
        if self.cfg.kind == ExperimentKind::Perfect {
            let (denoiser, _) = build_perfect_denoiser(&self.s, &self.pure_noise(value)?)?;
            return Ok(Trained { channel, denoiser, report: None });
        }
        let t = &self.cfg.training;
        let (denoiser, report) = match t.method {
            TrainingMethod::Population => {
                let (d, _) = train_population(&ensemble_state(&channel, &self.s)?, self.k)?;
                (d, None)
            }
            TrainingMethod::Fidelity => {
                let opt = OptimizerConfig {
                    restarts: t.restarts,
                    max_iter: t.max_iter,
                    training_samples: t.samples,
                    ..Default::default()
                };
                let set = fidelity_training_set(&channel, &self.s, t.samples, r)?;
                let (d, rep) = train_fidelity(&set, self.n, self.k, &opt, r)?;
                (d, Some(rep))
            }
        };
        Ok(Trained { channel, denoiser, report })
    }

    fn point(&self, index: usize, value: f64) -> Result<Vec<Option<f64>>> {
        let mut r = rng::stream(self.cfg.seed(), index as u64 + 1);
        let trained = self.train(value, &mut r)?;
        let est =
            average_fidelity_mc(&trained.denoiser, &trained.channel, &self.s, self.cfg.samples, &mut r)?;
        let stat_tol = (MC_SIGMAS * est.denoised.stderr).max(EXACT_TOL);
        let population = self.cfg.training.method == TrainingMethod::Population;
        let analytic = match self.cfg.kind {
            ExperimentKind::Sweep if population && self.spec.kind == ChannelKind::Depolarizing => {
                let (n, k, p) = (self.n as f64, self.k as f64, self.param("p", value)?);
                Some(((1.0 - p + p / n) / (1.0 - p + p * k / n), stat_tol))
            }
            ExperimentKind::Subspace if population => {
                let params = SubspaceNoiseParams::new(
                    self.n,
                    self.k,
                    self.param("p", value)?,
                    self.param("c", value)?,
                )?;
                Some((subspace_avg_fidelity(&params)?, stat_tol))
            }
            ExperimentKind::Quenched => {
                let kraus = trained.channel.to_kraus()?;
                let q = quenched_fidelity(&trained.denoiser.compression(), &self.s, &kraus)?;
                Some((q, QUENCHED_TOL))
            }
            ExperimentKind::Perfect => Some((1.0, EXACT_TOL)),
            _ => None,
        };
        let mut row = vec![
            Some(value),
            Some(est.bare.mean),
            Some(est.bare.stderr),
            Some(est.denoised.mean),
            Some(est.denoised.stderr),
            Some(est.mean_success),
            analytic.map(|a| a.0),
            analytic.map(|a| a.1),
        ];
        if self.cfg.kind == ExperimentKind::Perfect {
            let (p, c) = (self.param("p", value)?, self.param("c", value)?);
            row.push(Some((1.0 - p) * (1.0 - c)));
        }
        if let Some(rep) = trained.report {
            row.push(Some(rep.cost));
            row.push(Some(rep.iterations as f64));
            row.push(Some(if rep.converged { 1.0 } else { 0.0 }));
        }
        Ok(row)
    }
}

fn fidelity_sweep(cfg: &ExperimentConfig, points: &[f64]) -> Result<SweepResult> {
    let ctx = Sweep::new(cfg)?;
    let mut columns: Vec<&str> = SWEEP_COLUMNS.to_vec();
    if cfg.kind == ExperimentKind::Perfect {
        columns.push("success_analytic");
    } else if cfg.training.method == TrainingMethod::Fidelity {
        columns.extend(["train_cost", "train_iterations", "train_converged"]);
    }
    let mut out = SweepResult::new(&columns);
    out.rows = par_rows(points, &cfg.grid.param, |i, v| ctx.point(i, v))?;
    Ok(out)
}

fn msd_sweep(cfg: &ExperimentConfig, points: &[f64]) -> Result<SweepResult> {
    let n = cfg.n.context("n: required")?;
    let spec = cfg.msd.clone().unwrap_or(MsdSpec {
        p_ae: 0.02,
        a: None,
        threshold: None,
        success: 0.04,
        target_fidelity: None,
    });
    let map = match (spec.threshold, spec.a) {
        (Some(t), _) => QuadraticMsdMap::with_threshold(t, spec.success),
        (None, Some(a)) => QuadraticMsdMap::new(a, spec.success),
        (None, None) => QuadraticMsdMap::new(QuadraticMsdMap::default().a, spec.success),
    }
    .map_err(|e| anyhow::anyhow!("msd: {e}"))?;
    let mut out = SweepResult::new(&[
        "param",
        "denoiser_copies",
        "denoiser_fidelity",
        "msd_copies",
        "msd_iterations",
        "copies_ratio",
    ]);
    out.rows = par_rows(points, "p_in", |_, p_in| {
        let ae = denoiser_expected_copies(p_in, spec.p_ae, n)?;
        let target = spec.target_fidelity.unwrap_or(ae.achieved_fidelity);
        let msd = msd_expected_copies(&map, p_in, target)?;
        Ok(vec![
            Some(p_in),
            Some(ae.expected_copies),
            Some(ae.achieved_fidelity),
            Some(msd.expected_copies),
            Some(msd.iterations as f64),
            Some(msd.expected_copies / ae.expected_copies),
        ])
    })?;
    Ok(out)
}

fn cool_sweep(cfg: &ExperimentConfig, points: &[f64]) -> Result<SweepResult> {
    let spec = cfg.cool.as_ref().context("cool: required")?;
    let n = spec.hamiltonian.len();
    let h = CMatrix::from_fn(n, n, |i, j| {
        let im = spec.hamiltonian_im.as_ref().and_then(|m| m.get(i)?.get(j).copied());
        C64::new(spec.hamiltonian[i][j], im.unwrap_or(0.0))
    });
    let energies = eigen_hermitian(&h).map_err(|e| anyhow::anyhow!("cool.hamiltonian: {e}"))?;
    let e_min = energies.eigenvalues[n - 1];
    let mut out =
        SweepResult::new(&["param", "fidelity", "success", "analytic", "analytic_tol", "degenerate"]);
    out.rows = par_rows(points, "beta", |_, beta| {
        let res = cool_gibbs(&h, beta)?;
        let z: f64 = energies.eigenvalues.iter().map(|e| (-beta * (e - e_min)).exp()).sum();
        Ok(vec![
            Some(beta),
            Some(res.fidelity),
            Some(res.success_probability),
            Some(1.0 / z),
            Some(COOL_TOL),
            Some(if res.degenerate { 1.0 } else { 0.0 }),
        ])
    })?;
    Ok(out)
}

fn oracle_sweep(cfg: &ExperimentConfig, points: &[f64]) -> Result<SweepResult> {
    let spec = cfg.oracle.as_ref().context("oracle: required")?;
    let mut out = SweepResult::new(&["param", "value", "in_regime"]);
    out.rows = par_rows(points, &cfg.grid.param, |_, v| {
        let mut params = spec.params.clone();
        params.insert(cfg.grid.param.clone(), v);
        let o = oracle::evaluate(&spec.formula, &params)?;
        Ok(vec![Some(v), Some(o.value), o.in_regime.map(|b| if b { 1.0 } else { 0.0 })])
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn depolarizing_sweep_is_perfect() {
        let c = cfg(r#"
kind = "sweep"
seed = 1
samples = 200
n = 5
k = 1
[channel]
kind = "depolarizing"
[grid]
start = 0.0
stop = 0.9
steps = 10
"#);
        let t = run(&c).unwrap();
        for row in &t.rows {
            assert!((row[3].unwrap() - 1.0).abs() < 1e-6);
            let p = row[0].unwrap();
            assert!((row[5].unwrap() - (1.0 - p * 0.8)).abs() < 1e-9);
        }
        assert!(t.analytic_violations("denoised_mean").is_empty());
    }

    #[test]
    fn msd_columns() {
        let c = cfg(r#"
kind = "msd"
seed = 1
n = 3
[msd]
p_ae = 0.02
[grid]
values = [0.05, 0.1, 0.233, 0.5, 1.0]
"#);
        let t = run(&c).unwrap();
        let ae = t.column("denoiser_copies").unwrap();
        assert!(ae.iter().all(|x| x.unwrap() <= 3.0));
        let msd = t.column("msd_copies").unwrap();
        assert!(msd[0].unwrap().is_finite());
        assert!(msd[2..].iter().all(|x| x.unwrap().is_infinite()));
    }

    #[test]
    fn cool_two_level() {
        let c = cfg(r#"
kind = "cool"
seed = 1
[cool]
hamiltonian = [[0.0, 0.0], [0.0, 1.0]]
[grid]
values = [2.0]
"#);
        let t = run(&c).unwrap();
        let s = t.column("success").unwrap()[0].unwrap();
        assert!((s - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn oracle_grid() {
        let c = cfg(r#"
kind = "oracle"
seed = 1
[oracle]
formula = "haar-n2"
[grid]
values = [0.5, 1.0]
"#);
        let t = run(&c).unwrap();
        assert_eq!(t.column("value").unwrap(), vec![Some(5.0 / 6.0), Some(0.5)]);
    }

    #[test]
    fn missing_channel_parameter_is_named() {
        let c = cfg(r#"
kind = "subspace"
seed = 1
n = 4
k = 2
[channel]
kind = "fixed_pure"
[grid]
values = [0.1]
"#);
        let e = format!("{:#}", run(&c).unwrap_err());
        assert!(e.contains("channel.c"), "{e}");
    }
}
