//! Closed-form fidelities, bounds and expansions for the denoiser.

use rand::Rng;

use crate::error::{check_probability, Error, Result};
use crate::qstate::{
    c, dominant_projector, eigen_decompose, expect_dim, frobenius, haar_random_state, trace,
    CMatrix, CVector, DensityMatrix, PureState, Subspace, C64,
};
use crate::quad;
use crate::stats::{estimate, Estimate};

/// An expansion value together with whether p lies in its small-p regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expansion {
    pub value: f64,
    pub in_regime: bool,
}

/// Sharp lower bound on single-state denoising fidelity under
/// (1−p)ρ + pρ_noise; trivially 0 for p > 1/2.
pub fn worst_case_fidelity(p: f64) -> f64 {
    if p > 0.5 {
        return 0.0;
    }
    let delta = p / (1.0 - p);
    0.5 * (1.0 + (1.0 - delta * delta).max(0.0).sqrt())
}

/// Ideal state |0⟩ and the pure noise state that saturates
/// [`worst_case_fidelity`]: |χ⟩ = √((1−δ)/2)|0⟩ + √((1+δ)/2)|1⟩, δ = p/(1−p).
pub fn worst_case_noise(n: usize, p: f64) -> Result<(PureState, DensityMatrix)> {
    check_probability("p", p)?;
    if n < 2 {
        return Err(Error::InvalidDimension(format!("N = {n}, need at least 2")));
    }
    if p > 0.5 {
        return Err(Error::InvalidParameter { name: "p", reason: format!("{p} > 1/2") });
    }
    let delta = p / (1.0 - p);
    let mut chi = CVector::zeros(n);
    chi[0] = c(((1.0 - delta) / 2.0).sqrt());
    chi[1] = c(((1.0 + delta) / 2.0).sqrt());
    let noise = DensityMatrix::pure(&PureState::normalized(chi)?);
    Ok((PureState::basis(n, 0)?, noise))
}

/// Noise restricted to span{|ψ⟩, |ψ⊥⟩}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelNoise {
    pub rho00: f64,
    pub rho01: C64,
}

impl TwoLevelNoise {
    pub fn new(rho00: f64, rho01: C64) -> Result<Self> {
        check_probability("rho00", rho00)?;
        if rho01.norm_sqr() > rho00 * (1.0 - rho00) + 1e-12 {
            return Err(Error::InvalidState(format!(
                "|rho01|^2 = {} exceeds rho00(1-rho00) = {}",
                rho01.norm_sqr(),
                rho00 * (1.0 - rho00)
            )));
        }
        Ok(Self { rho00, rho01 })
    }

    /// Pure noise with overlap ρ₀₀ (saturated coherence).
    pub fn pure(rho00: f64) -> Result<Self> {
        check_probability("rho00", rho00)?;
        Self::new(rho00, c((rho00 * (1.0 - rho00)).sqrt()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelResult {
    pub lambda1: f64,
    pub fidelity: f64,
}

/// Largest eigenvalue and dominant-eigenvector fidelity for
/// (1−p)|ψ⟩⟨ψ| + pρ_noise with ρ_noise in the 2-level subspace.
pub fn two_level_exact(p: f64, noise: TwoLevelNoise) -> Result<TwoLevelResult> {
    check_probability("p", p)?;
    let x = 1.0 - 2.0 * p * (1.0 - noise.rho00);
    let b2 = p * p * noise.rho01.norm_sqr();
    let r = (x * x + 4.0 * b2).sqrt();
    let lambda1 = 0.5 * (1.0 + r);
    // a = λ₁ − p(1 − ρ₀₀), in a cancellation-free form
    let a = if x >= 0.0 { 0.5 * (x + r) } else { 2.0 * b2 / (r - x) };
    let norm2 = a * a + b2;
    let fidelity = if norm2 == 0.0 { 0.0 } else { a * a / norm2 };
    Ok(TwoLevelResult { lambda1, fidelity })
}

/// Monte Carlo average of the optimal single-state fidelity over Haar pure
/// noise states in dimension N.
pub fn haar_noise_avg_fidelity<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    check_probability("p", p)?;
    if n_samples < 2 {
        return Err(Error::InvalidParameter { name: "n_samples", reason: "need at least 2".into() });
    }
    let mut values = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let noise = haar_random_state(n, rng)?;
        let rho00 = noise.amplitudes()[0].norm_sqr().min(1.0);
        values.push(two_level_exact(p, TwoLevelNoise::pure(rho00)?)?.fidelity);
    }
    Ok(estimate(&values))
}

/// Exact Haar average for N = 2.
pub fn haar_noise_avg_fidelity_exact_n2(p: f64) -> f64 {
    if p <= 0.5 {
        (6.0 + p * (5.0 * p - 12.0)) / (6.0 * (p - 1.0).powi(2))
    } else {
        (2.0 + p) / (6.0 * p)
    }
}

/// 1 − (N−1)/(N(N+1))·p². In regime for p ≤ (N+2)/(16N).
pub fn small_p_expansion_haar(n: usize, p: f64) -> Expansion {
    let nf = n as f64;
    Expansion {
        value: 1.0 - (nf - 1.0) / (nf * (nf + 1.0)) * p * p,
        in_regime: p <= (nf + 2.0) / (16.0 * nf),
    }
}

/// Subspace noise (1−p)ρ + p|ψ_noise⟩⟨ψ_noise| with c = ⟨ψ_noise|Π_K|ψ_noise⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubspaceNoiseParams {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub c: f64,
}

impl SubspaceNoiseParams {
    pub fn new(n: usize, k: usize, p: f64, c: f64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidDimension(format!("K = {k}, N = {n}")));
        }
        check_probability("p", p)?;
        check_probability("c", c)?;
        if k == n && c < 1.0 {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: "K = N leaves no room for noise outside the subspace".into(),
            });
        }
        Ok(Self { n, k, p, c })
    }
}

/// β = |⟨ξ|λ₊⟩|² and γ = |⟨λ₊|ψ_noise⟩|² from the 2×2 block of ρ_S on
/// span{|ξ⟩, |ξ⊥⟩}.
fn beta_gamma(params: &SubspaceNoiseParams) -> (f64, f64) {
    let SubspaceNoiseParams { k, p, c: ov, .. } = *params;
    let a11 = (1.0 - p) / k as f64 + p * ov;
    let a22 = p * (1.0 - ov);
    let a12 = p * (ov * (1.0 - ov)).sqrt();
    let d = a11 - a22;
    let r = (d * d + 4.0 * a12 * a12).sqrt();
    // r = 0 only for c = 0 at p = 1/(K+1); the noise direction is taken as dominant
    let beta = if r == 0.0 { 0.0 } else { (0.5 * (1.0 + d / r)).clamp(0.0, 1.0) };
    let gamma = (ov.sqrt() * beta.sqrt() + (1.0 - ov).sqrt() * (1.0 - beta).sqrt()).powi(2);
    (beta, gamma)
}

/// Largest non-trivial eigenvalue λ₊ of ρ_S.
pub fn subspace_lambda_plus(params: &SubspaceNoiseParams) -> f64 {
    let SubspaceNoiseParams { k, p, c: ov, .. } = *params;
    let a11 = (1.0 - p) / k as f64 + p * ov;
    let a22 = p * (1.0 - ov);
    let a12 = p * (ov * (1.0 - ov)).sqrt();
    0.5 * (a11 + a22 + ((a11 - a22).powi(2) + 4.0 * a12 * a12).sqrt())
}

fn fidelity_at(alpha: f64, p: f64, beta: f64, gamma: f64) -> f64 {
    let s = alpha * beta + 1.0 - alpha;
    let den = (1.0 - p) * s + p * gamma;
    if den <= 0.0 {
        return 0.0;
    }
    ((1.0 - p) * s * s + p * alpha * beta * gamma) / den
}

/// Fidelity after population training for an ideal state with
/// α = |⟨ξ|ψ⟩|², ξ the direction of Π_K|ψ_noise⟩.
pub fn subspace_exact_fidelity(params: &SubspaceNoiseParams, alpha: f64) -> Result<f64> {
    check_probability("alpha", alpha)?;
    let (beta, gamma) = beta_gamma(params);
    Ok(fidelity_at(alpha, params.p, beta, gamma))
}

/// Haar average of [`subspace_exact_fidelity`]: weight (K−1)(1−α)^{K−2} on
/// α ∈ [0, 1], by adaptive quadrature at absolute tolerance 1e-8.
pub fn subspace_avg_fidelity_quadrature(params: &SubspaceNoiseParams) -> Result<f64> {
    let (beta, gamma) = beta_gamma(params);
    let p = params.p;
    if params.k == 1 {
        return Ok(fidelity_at(1.0, p, beta, gamma));
    }
    let km = (params.k - 1) as f64;
    quad::integrate(
        |alpha| km * (1.0 - alpha).powf(km - 1.0) * fidelity_at(alpha, p, beta, gamma),
        0.0,
        1.0,
        1e-8,
    )
}

/// ₂F₁(a, b; c; z) by its power series, stopping once a term falls below
/// 1e-14 of the running sum. Requires |z| < 1.
pub fn hyp2f1_series(a: f64, b: f64, cc: f64, z: f64) -> Result<f64> {
    if !(z.abs() < 1.0) {
        return Err(Error::InvalidParameter { name: "z", reason: format!("|{z}| >= 1") });
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..1_000_000u32 {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((cc + nf) * (nf + 1.0)) * z;
        sum += term;
        if term.abs() <= 1e-14 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Quadrature(format!("2F1 series did not converge at z = {z}")))
}

/// c = 0 limit: 1 for p < 1/(K+1), else (K−1)/(K+1)·(1−p)·₂F₁(1, 1; K+2; 1−p).
pub fn subspace_avg_fidelity_orthogonal(k: usize, p: f64) -> Result<f64> {
    check_probability("p", p)?;
    if k == 0 {
        return Err(Error::InvalidDimension("K = 0".into()));
    }
    let kf = k as f64;
    if p < 1.0 / (kf + 1.0) {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    Ok((kf - 1.0) / (kf + 1.0) * (1.0 - p) * hyp2f1_series(1.0, 1.0, kf + 2.0, 1.0 - p)?)
}

/// Haar-averaged denoising fidelity for subspace noise. Uses the
/// hypergeometric closed form at c = 0 and quadrature otherwise.
pub fn subspace_avg_fidelity(params: &SubspaceNoiseParams) -> Result<f64> {
    if params.c == 0.0 {
        subspace_avg_fidelity_orthogonal(params.k, params.p)
    } else {
        subspace_avg_fidelity_quadrature(params)
    }
}

/// 1 − ((K−1)/K)·c·p − ((K(3K−1)−1)/K)·c(1−c)·p². In regime for p ≤ 1/(4K).
pub fn subspace_taylor(params: &SubspaceNoiseParams) -> Expansion {
    let SubspaceNoiseParams { k, p, c: ov, .. } = *params;
    let kf = k as f64;
    Expansion {
        value: 1.0
            - (kf - 1.0) / kf * ov * p
            - (kf * (3.0 * kf - 1.0) - 1.0) / kf * ov * (1.0 - ov) * p * p,
        in_regime: p <= 1.0 / (4.0 * kf),
    }
}

/// Noise level below which the quadratic denoised fidelity beats
/// [`bare_fidelity_appendix`]. Clamped to [0, 1]; 1 when c = 0.
pub fn breakeven_p(k: usize, ov: f64) -> f64 {
    let kf = k as f64;
    let num = kf * (kf + 1.0) - ov * (kf * kf + 1.0);
    let den = ov * (1.0 - ov) * (kf + 1.0) * (kf * (3.0 * kf - 1.0) - 1.0);
    if ov <= 0.0 || den <= 0.0 {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Average fidelity without denoising, 1 − p(1 − c/K).
pub fn bare_fidelity_main(k: usize, ov: f64, p: f64) -> f64 {
    1.0 - p * (1.0 - ov / k as f64)
}

/// Alternative baseline 1 − (1 − 2c/(K(K+1)))·p. Agrees with
/// [`bare_fidelity_main`] only for K = 1.
pub fn bare_fidelity_appendix(k: usize, ov: f64, p: f64) -> f64 {
    let kf = k as f64;
    1.0 - (1.0 - 2.0 * ov / (kf * (kf + 1.0))) * p
}

/// Ensemble (1−p)Π_K/K + pρ_noise.
pub fn subspace_ensemble(s: &Subspace, noise: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_probability("p", p)?;
    expect_dim(s.dim_full(), noise.dim())?;
    DensityMatrix::mix(1.0 - p, &s.maximally_mixed(), noise)
}

/// Compact Haar approximation for the fixed-state channel, with D_K the
/// dominant projector of the ensemble:
/// [(1−p)/(K+1)·(tr(ΠD)² + tr((ΠD)²)) + p·tr(ΠDσD)] / [(1−p)·tr(ΠD) + Kp·tr(Dσ)].
pub fn subspace_approx_fidelity(s: &Subspace, noise: &DensityMatrix, p: f64) -> Result<f64> {
    let rho_s = subspace_ensemble(s, noise, p)?;
    let k = s.dim_sub();
    let (d, _) = dominant_projector(&rho_s, k)?;
    let pi = s.projector();
    let sigma = noise.matrix();
    let pd = &pi * &d;
    let tr_pd = trace(&pd).re;
    let num = (1.0 - p) / (k as f64 + 1.0) * (tr_pd * tr_pd + trace(&(&pd * &pd)).re)
        + p * trace(&(&pd * sigma * &d)).re;
    let den = (1.0 - p) * tr_pd + k as f64 * p * trace(&(&d * sigma)).re;
    if den <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DavisKahan {
    /// ‖Π_K − D_K‖_F
    pub lhs: f64,
    /// (1−p)/K − p·ν₁
    pub delta: f64,
    /// √2·p·‖ρ_noise‖_F/δ; `None` when δ ≤ 0.
    pub rhs_appendix: Option<f64>,
    /// √(2√2·K·p/(1−p))
    pub rhs_main: f64,
    /// lhs ≤ rhs_appendix + 1e-9; `None` when the bound does not apply.
    pub holds: Option<bool>,
}

pub fn davis_kahan_check(noise: &DensityMatrix, s: &Subspace, p: f64) -> Result<DavisKahan> {
    let rho_s = subspace_ensemble(s, noise, p)?;
    let k = s.dim_sub();
    let (d, _) = dominant_projector(&rho_s, k)?;
    let lhs = frobenius(&(s.projector() - d));
    let nu1 = eigen_decompose(noise)?.eigenvalues[0];
    let delta = (1.0 - p) / k as f64 - p * nu1;
    let rhs_main = (2.0 * 2f64.sqrt() * k as f64 * p / (1.0 - p)).sqrt();
    let (rhs_appendix, holds) = if delta > 0.0 {
        let rhs = 2f64.sqrt() * p * frobenius(noise.matrix()) / delta;
        (Some(rhs), Some(lhs <= rhs + 1e-9))
    } else {
        (None, None)
    };
    Ok(DavisKahan { lhs, delta, rhs_appendix, rhs_main, holds })
}

/// Pure noise state with overlap `ov` on S: √c·(basis vector 0) + √(1−c)·(a
/// complement vector). Returns (state, ξ).
pub fn noise_with_overlap(s: &Subspace, ov: f64) -> Result<(PureState, PureState)> {
    check_probability("c", ov)?;
    let xi = s.basis_vector(0);
    if ov == 1.0 {
        return Ok((xi.clone(), xi));
    }
    let comp: CMatrix = s.complement_basis();
    if comp.ncols() == 0 {
        return Err(Error::InvalidParameter { name: "c", reason: "no complement for c < 1".into() });
    }
    let v = xi.amplitudes() * c(ov.sqrt()) + comp.column(0) * c((1.0 - ov).sqrt());
    Ok((PureState::normalized(v)?, xi))
}
