//! Magic-state distillation cost comparison and Gibbs-state cooling.

use crate::channels::gibbs_state;
use crate::denoiser::{denoise, noisy_ae_model, train_population};
use crate::error::{check_probability, Error, Result};
use crate::qstate::{eigen_hermitian, fidelity, trace, CMatrix, PureState, DEGENERACY_TOL};

/// One round of a distillation protocol acting on the input error ε.
pub trait MsdIterationMap: Sync {
    fn success_probability(&self, eps: f64) -> f64;
    fn output_error(&self, eps: f64) -> f64;
    /// Unstable fixed point ε*.
    fn threshold(&self) -> f64;
    /// Noisy inputs consumed per attempt.
    fn inputs_per_attempt(&self) -> f64 {
        5.0
    }
}

/// ε_out = A·ε² with constant acceptance probability. The default puts the
/// fixed point at ε* = 0.233 with 4% acceptance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticMsdMap {
    pub a: f64,
    pub success: f64,
}

impl Default for QuadraticMsdMap {
    fn default() -> Self {
        Self { a: 1.0 / 0.233, success: 0.04 }
    }
}

impl QuadraticMsdMap {
    pub fn new(a: f64, success: f64) -> Result<Self> {
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::InvalidParameter { name: "a", reason: format!("{a} must exceed 1") });
        }
        check_probability("success", success)?;
        if success == 0.0 {
            return Err(Error::InvalidParameter { name: "success", reason: "zero".into() });
        }
        Ok(Self { a, success })
    }

    /// Map with its fixed point at `threshold`.
    pub fn with_threshold(threshold: f64, success: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidParameter {
                name: "threshold",
                reason: format!("{threshold} outside (0, 1)"),
            });
        }
        Self::new(1.0 / threshold, success)
    }
}

impl MsdIterationMap for QuadraticMsdMap {
    fn success_probability(&self, _eps: f64) -> f64 {
        self.success
    }

    fn output_error(&self, eps: f64) -> f64 {
        (self.a * eps * eps).min(1.0)
    }

    fn threshold(&self) -> f64 {
        1.0 / self.a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostMethod {
    Msd,
    Denoiser,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub method: CostMethod,
    /// `f64::INFINITY` when the target cannot be reached.
    pub expected_copies: f64,
    pub achieved_fidelity: f64,
    pub iterations: usize,
}

impl CostReport {
    pub fn is_infinite(&self) -> bool {
        self.expected_copies.is_infinite()
    }
}

const MAX_ROUNDS: usize = 64;

/// Expected noisy copies to distill from error p_in down to
/// 1 − target_fidelity, with C_k = inputs·C_{k−1}/success(ε_{k−1}), C₀ = 1.
pub fn msd_expected_copies(
    map: &dyn MsdIterationMap,
    p_in: f64,
    target_fidelity: f64,
) -> Result<CostReport> {
    check_probability("p_in", p_in)?;
    check_probability("target_fidelity", target_fidelity)?;
    let target = 1.0 - target_fidelity;
    if p_in >= map.threshold() {
        return Ok(CostReport {
            method: CostMethod::Msd,
            expected_copies: f64::INFINITY,
            achieved_fidelity: 1.0 - p_in,
            iterations: 0,
        });
    }
    let mut eps = p_in;
    let mut copies = 1.0;
    let mut trace = vec![eps];
    while eps > target {
        if trace.len() > MAX_ROUNDS {
            return Err(Error::Unreachable { iterations: MAX_ROUNDS, trace });
        }
        let s = map.success_probability(eps);
        if !(s > 0.0) {
            return Err(Error::ZeroDenominator);
        }
        copies *= map.inputs_per_attempt() / s;
        eps = map.output_error(eps);
        trace.push(eps);
    }
    Ok(CostReport {
        method: CostMethod::Msd,
        expected_copies: copies,
        achieved_fidelity: 1.0 - eps,
        iterations: trace.len() - 1,
    })
}

/// Expected copies 1/p_denoise for a K = 1 denoiser with depolarizing
/// encoder/decoder noise p_AE.
pub fn denoiser_expected_copies(p_in: f64, p_ae: f64, n: usize) -> Result<CostReport> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("N = {n}, need at least 2")));
    }
    let model = noisy_ae_model(p_ae, p_in, n)?;
    if model.p_denoise <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(CostReport {
        method: CostMethod::Denoiser,
        expected_copies: 1.0 / model.p_denoise,
        achieved_fidelity: model.fidelity,
        iterations: 1,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoolingResult {
    /// Dominant eigenvector of the Gibbs state, as extracted by the denoiser.
    pub ground: PureState,
    /// Fidelity of the denoised state with the exact ground state of H, or
    /// its overlap with the ground eigenspace when that is degenerate.
    pub fidelity: f64,
    pub success_probability: f64,
    pub degenerate: bool,
}

/// Population-trained K = 1 denoiser applied to e^{−βH}/𝒵.
pub fn cool_gibbs(h: &CMatrix, beta: f64) -> Result<CoolingResult> {
    let rho = gibbs_state(h, beta)?;
    let (d, _) = train_population(&rho, 1)?;
    let out = denoise(&d, &rho)?;
    let state = out.state.ok_or(Error::ZeroDenominator)?;
    let ground = PureState::new(d.decoder().matrix().column(0).into_owned())?;

    let eig = eigen_hermitian(h)?;
    let n = h.nrows();
    let e_min = eig.eigenvalues[n - 1];
    let ground_cols: Vec<usize> =
        (0..n).filter(|&j| eig.eigenvalues[j] - e_min <= DEGENERACY_TOL).collect();
    let degenerate = ground_cols.len() > 1;
    let fid = if degenerate {
        let mut proj = CMatrix::zeros(n, n);
        for &j in &ground_cols {
            let v = eig.eigenvectors.column(j);
            proj += &v * v.adjoint();
        }
        trace(&(proj * state.matrix())).re.clamp(0.0, 1.0)
    } else {
        let exact = PureState::new(eig.eigenvectors.column(n - 1).into_owned())?;
        fidelity(&state, &exact)?
    };
    Ok(CoolingResult {
        ground,
        fidelity: fid,
        success_probability: out.success_probability,
        degenerate,
    })
}
