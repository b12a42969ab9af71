//! TOML experiment configuration.
//!
//! Precedence for every overridable field: command-line flag, then the
//! config file, then the built-in default. The output directory default comes
//! from `QDENOISE_OUTPUT_DIR` when set, else the current directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const OUTPUT_DIR_ENV: &str = "QDENOISE_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sweep,
    Subspace,
    Quenched,
    Msd,
    Cool,
    Perfect,
    Oracle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMethod {
    #[default]
    Population,
    Fidelity,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceChoice {
    #[default]
    Random,
    Computational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Depolarizing,
    DitFlip,
    PhaseFlip,
    DitPhaseFlip,
    AmplitudeDamping,
    GaussianDephasing,
    GaussianPhase,
    /// (1−p)ρ + p|χ⟩⟨χ| with ⟨χ|Π|χ⟩ = c.
    FixedPure,
    /// (1−p)ρ + p|χ⟩⟨χ| with Haar-random |χ⟩.
    HaarPure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub p: Option<f64>,
    pub c: Option<f64>,
    pub sigma: Option<f64>,
    /// Phase draws for `gaussian_phase`.
    pub phase_samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    #[serde(default)]
    pub method: TrainingMethod,
    #[serde(default = "default_training_samples")]
    pub samples: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_training_samples() -> usize {
    128
}
fn default_restarts() -> usize {
    8
}
fn default_max_iter() -> usize {
    2000
}

impl Default for TrainingSpec {
    fn default() -> Self {
        Self {
            method: TrainingMethod::Population,
            samples: default_training_samples(),
            restarts: default_restarts(),
            max_iter: default_max_iter(),
        }
    }
}

/// Swept parameter: explicit `values`, or `steps` points from `start` to
/// `stop` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default = "default_param")]
    pub param: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub steps: Option<usize>,
}

fn default_param() -> String {
    "p".into()
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match (&self.values, self.start, self.stop, self.steps) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n)
                    .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
                    .collect(),
            },
            _ => bail!("grid: give either `values` or all of `start`, `stop`, `steps`"),
        };
        if pts.is_empty() {
            bail!("grid: empty");
        }
        if let Some(x) = pts.iter().find(|x| !x.is_finite()) {
            bail!("grid: non-finite value {x}");
        }
        Ok(pts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsdSpec {
    #[serde(default = "default_p_ae")]
    pub p_ae: f64,
    /// ε_out = a·ε²; ignored when `threshold` is set.
    pub a: Option<f64>,
    pub threshold: Option<f64>,
    #[serde(default = "default_msd_success")]
    pub success: f64,
    /// Defaults to the denoiser's achieved fidelity.
    pub target_fidelity: Option<f64>,
}

fn default_p_ae() -> f64 {
    0.02
}
fn default_msd_success() -> f64 {
    0.04
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolSpec {
    /// Real part of H, row-major rows.
    pub hamiltonian: Vec<Vec<f64>>,
    pub hamiltonian_im: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub formula: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Output stem; `.csv` and `.json` are appended.
    pub output: Option<PathBuf>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    #[serde(default)]
    pub subspace: SubspaceChoice,
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub training: TrainingSpec,
    pub grid: Grid,
    pub msd: Option<MsdSpec>,
    pub cool: Option<CoolSpec>,
    pub oracle: Option<OracleSpec>,
}

fn default_samples() -> usize {
    2000
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub output: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        if cfg.output.is_none() {
            cfg.output = path.file_stem().map(PathBuf::from);
        }
        Ok(cfg)
    }

    /// Applies flag overrides and resolves the output stem against the
    /// output directory.
    pub fn resolve(mut self, ov: &Overrides) -> Result<Self> {
        if let Some(s) = ov.seed {
            self.seed = Some(s);
        }
        if let Some(s) = ov.samples {
            self.samples = s;
        }
        if let Some(o) = &ov.output {
            self.output = Some(o.clone());
        }
        if let Some(dir) = &ov.output_dir {
            let stem = self.output.take().unwrap_or_else(|| PathBuf::from("experiment"));
            self.output = Some(if stem.is_absolute() { stem } else { dir.join(stem) });
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            bail!("seed: required (set `seed` in the config or pass --seed)");
        }
        self.grid.points()?;
        let dims = matches!(
            self.kind,
            ExperimentKind::Sweep
                | ExperimentKind::Subspace
                | ExperimentKind::Quenched
                | ExperimentKind::Perfect
        );
        if dims {
            let (n, k) = self.dims()?;
            if k == 0 || k > n {
                bail!("k: need 1 <= k <= n, got n = {n}, k = {k}");
            }
            if self.samples < 2 {
                bail!("samples: need at least 2, got {}", self.samples);
            }
        }
        match self.kind {
            ExperimentKind::Sweep | ExperimentKind::Quenched => {
                let ch = self.channel.as_ref().context("channel: required")?;
                if self.kind == ExperimentKind::Quenched
                    && matches!(ch.kind, ChannelKind::GaussianPhase | ChannelKind::HaarPure)
                {
                    bail!("channel.kind: quenched needs a fixed Kraus channel");
                }
            }
            ExperimentKind::Msd => {
                if self.n.is_none() {
                    bail!("n: required");
                }
            }
            ExperimentKind::Cool => {
                let h = self.cool.as_ref().context("cool: required")?;
                let n = h.hamiltonian.len();
                if n == 0 || h.hamiltonian.iter().any(|r| r.len() != n) {
                    bail!("cool.hamiltonian: must be a non-empty square matrix");
                }
            }
            ExperimentKind::Oracle => {
                self.oracle.as_ref().context("oracle: required")?;
            }
            ExperimentKind::Subspace | ExperimentKind::Perfect => {}
        }
        if self.training.method == TrainingMethod::Fidelity
            && (self.training.samples == 0 || self.training.restarts == 0)
        {
            bail!("training: samples and restarts must be positive");
        }
        Ok(())
    }

    pub fn dims(&self) -> Result<(usize, usize)> {
        Ok((self.n.context("n: required")?, self.k.context("k: required")?))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    pub fn csv_path(&self) -> Option<PathBuf> {
        self.output.as_ref().map(|o| o.with_extension("csv"))
    }

    pub fn sidecar_path(&self) -> Option<PathBuf> {
        self.output.as_ref().map(|o| o.with_extension("json"))
    }
}
