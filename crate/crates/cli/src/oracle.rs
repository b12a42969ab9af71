//! Direct evaluation of the closed-form fidelities, bounds and costs.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use qdenoise::analytics::{
    bare_fidelity_appendix, bare_fidelity_main, breakeven_p, haar_noise_avg_fidelity_exact_n2,
    hyp2f1_series, small_p_expansion_haar, subspace_avg_fidelity,
    subspace_avg_fidelity_orthogonal, subspace_exact_fidelity, subspace_lambda_plus,
    subspace_taylor, two_level_exact, worst_case_fidelity, SubspaceNoiseParams, TwoLevelNoise,
};
use qdenoise::applications::{denoiser_expected_copies, msd_expected_copies, QuadraticMsdMap};
use qdenoise::denoiser::noisy_ae_model;
use qdenoise::qstate::C64;

/// Formula names and their parameters; bracketed ones are optional.
pub const FORMULAS: &[(&str, &str)] = &[
    ("worst-case", "p"),
    ("two-level", "p rho00 [rho01_re rho01_im]"),
    ("two-level-lambda", "p rho00 [rho01_re rho01_im]"),
    ("haar-n2", "p"),
    ("small-p-haar", "n p"),
    ("depolarizing-subspace", "n k p"),
    ("subspace-exact", "n k p c alpha"),
    ("subspace-avg", "n k p c"),
    ("subspace-orthogonal", "k p"),
    ("subspace-taylor", "n k p c"),
    ("subspace-lambda", "n k p c"),
    ("breakeven", "k c"),
    ("bare-main", "k c p"),
    ("bare-appendix", "k c p"),
    ("noisy-ae-success", "p_ae p_in n"),
    ("noisy-ae-fidelity", "p_ae p_in n"),
    ("denoiser-copies", "p_in p_ae n"),
    ("msd-copies", "p_in target [threshold success]"),
    ("hyp2f1", "a b c z"),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    /// Validity-regime flag for expansions.
    pub in_regime: Option<bool>,
}

impl OracleValue {
    fn exact(value: f64) -> Self {
        Self { value, in_regime: None }
    }
}

struct Params<'a>(&'a BTreeMap<String, f64>);

impl Params<'_> {
    fn get(&self, name: &str) -> Result<f64> {
        self.0.get(name).copied().ok_or_else(|| anyhow!("missing parameter `{name}`"))
    }

    fn opt(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    fn count(&self, name: &str) -> Result<usize> {
        let x = self.get(name)?;
        if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 {
            bail!("parameter `{name}` must be a non-negative integer, got {x}");
        }
        Ok(x as usize)
    }

    fn subspace(&self) -> Result<SubspaceNoiseParams> {
        Ok(SubspaceNoiseParams::new(
            self.count("n")?,
            self.count("k")?,
            self.get("p")?,
            self.get("c")?,
        )?)
    }

    fn two_level(&self) -> Result<TwoLevelNoise> {
        let rho00 = self.get("rho00")?;
        Ok(match (self.opt("rho01_re"), self.opt("rho01_im")) {
            (None, None) => TwoLevelNoise::pure(rho00)?,
            (re, im) => {
                TwoLevelNoise::new(rho00, C64::new(re.unwrap_or(0.0), im.unwrap_or(0.0)))?
            }
        })
    }
}

pub fn evaluate(formula: &str, params: &BTreeMap<String, f64>) -> Result<OracleValue> {
    let p = Params(params);
    let v = match formula {
        "worst-case" => OracleValue::exact(worst_case_fidelity(p.get("p")?)),
        "two-level" => OracleValue::exact(two_level_exact(p.get("p")?, p.two_level()?)?.fidelity),
        "two-level-lambda" => {
            OracleValue::exact(two_level_exact(p.get("p")?, p.two_level()?)?.lambda1)
        }
        "haar-n2" => OracleValue::exact(haar_noise_avg_fidelity_exact_n2(p.get("p")?)),
        "small-p-haar" => {
            let e = small_p_expansion_haar(p.count("n")?, p.get("p")?);
            OracleValue { value: e.value, in_regime: Some(e.in_regime) }
        }
        "depolarizing-subspace" => {
            let (n, k, q) = (p.count("n")? as f64, p.count("k")? as f64, p.get("p")?);
            OracleValue::exact((1.0 - q + q / n) / (1.0 - q + q * k / n))
        }
        "subspace-exact" => {
            OracleValue::exact(subspace_exact_fidelity(&p.subspace()?, p.get("alpha")?)?)
        }
        "subspace-avg" => OracleValue::exact(subspace_avg_fidelity(&p.subspace()?)?),
        "subspace-orthogonal" => {
            OracleValue::exact(subspace_avg_fidelity_orthogonal(p.count("k")?, p.get("p")?)?)
        }
        "subspace-taylor" => {
            let e = subspace_taylor(&p.subspace()?);
            OracleValue { value: e.value, in_regime: Some(e.in_regime) }
        }
        "subspace-lambda" => OracleValue::exact(subspace_lambda_plus(&p.subspace()?)),
        "breakeven" => OracleValue::exact(breakeven_p(p.count("k")?, p.get("c")?)),
        "bare-main" => {
            OracleValue::exact(bare_fidelity_main(p.count("k")?, p.get("c")?, p.get("p")?))
        }
        "bare-appendix" => {
            OracleValue::exact(bare_fidelity_appendix(p.count("k")?, p.get("c")?, p.get("p")?))
        }
        "noisy-ae-success" => OracleValue::exact(
            noisy_ae_model(p.get("p_ae")?, p.get("p_in")?, p.count("n")?)?.p_denoise,
        ),
        "noisy-ae-fidelity" => OracleValue::exact(
            noisy_ae_model(p.get("p_ae")?, p.get("p_in")?, p.count("n")?)?.fidelity,
        ),
        "denoiser-copies" => OracleValue::exact(
            denoiser_expected_copies(p.get("p_in")?, p.get("p_ae")?, p.count("n")?)?
                .expected_copies,
        ),
        "msd-copies" => {
            let success = p.opt("success").unwrap_or(0.04);
            let map = match p.opt("threshold") {
                Some(t) => QuadraticMsdMap::with_threshold(t, success)?,
                None => QuadraticMsdMap { success, ..Default::default() },
            };
            OracleValue::exact(
                msd_expected_copies(&map, p.get("p_in")?, p.get("target")?)?.expected_copies,
            )
        }
        "hyp2f1" => OracleValue::exact(hyp2f1_series(
            p.get("a")?,
            p.get("b")?,
            p.get("c")?,
            p.get("z")?,
        )?),
        other => bail!("unknown formula `{other}`; see `qdenoise oracle --list`"),
    };
    Ok(v)
}

/// Parses `name=value` arguments.
pub fn parse_params(args: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for a in args {
        let (k, v) = a.split_once('=').ok_or_else(|| anyhow!("expected name=value, got `{a}`"))?;
        let x: f64 = v.trim().parse().map_err(|_| anyhow!("parameter `{k}`: bad number `{v}`"))?;
        out.insert(k.trim().to_string(), x);
    }
    Ok(out)
}
