//! The autoencoder: encoder U_e, projection onto K latent modes with
//! post-selection, decoder U_d.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{Channel, KrausChannel};
use crate::error::{check_probability, Error, Result};
use crate::mesh::{mesh_from_unitary, mesh_matrix_flat, rectangular_pairs};
use crate::optim::{minimize, BfgsConfig};
use crate::qstate::{
    c, eigen_decompose, expect_dim, fidelity, frobenius_sq, haar_random_unitary,
    sample_in_subspace, trace, CMatrix, CVector, DensityMatrix, PureState, Subspace, Unitary,
};
use crate::rng;
use crate::stats::{estimate, Estimate};

/// Below this success probability the denoised state is undefined.
pub const MIN_SUCCESS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Denoiser {
    n: usize,
    k: usize,
    encoder: Unitary,
    decoder: Unitary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseOutcome {
    /// `None` when `success_probability` ≤ [`MIN_SUCCESS`].
    pub state: Option<DensityMatrix>,
    pub success_probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Serialize, Deserialize)]
struct DenoiserDoc {
    n: usize,
    k: usize,
    encoder: Vec<[f64; 2]>,
    decoder: Vec<[f64; 2]>,
}

fn to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
    let n = m.nrows();
    (0..n * n).map(|i| m[(i / n, i % n)]).map(|z| [z.re, z.im]).collect()
}

fn from_pairs(n: usize, v: &[[f64; 2]]) -> Result<CMatrix> {
    if v.len() != n * n {
        return Err(Error::Serialization(format!("{} entries for a {n}x{n} matrix", v.len())));
    }
    Ok(CMatrix::from_fn(n, n, |r, col| {
        let [re, im] = v[r * n + col];
        crate::qstate::C64::new(re, im)
    }))
}

impl Denoiser {
    pub fn new(k: usize, encoder: Unitary, decoder: Unitary) -> Result<Self> {
        let n = encoder.dim();
        expect_dim(n, decoder.dim())?;
        if k == 0 || k > n {
            return Err(Error::InvalidDimension(format!("K = {k}, N = {n}")));
        }
        Ok(Self { n, k, encoder, decoder })
    }

    pub fn dim_full(&self) -> usize {
        self.n
    }

    pub fn dim_latent(&self) -> usize {
        self.k
    }

    pub fn encoder(&self) -> &Unitary {
        &self.encoder
    }

    pub fn decoder(&self) -> &Unitary {
        &self.decoder
    }

    /// B = U_d·P_K·U_e
    pub fn compression(&self) -> CMatrix {
        self.decoder.matrix().columns(0, self.k) * self.encoder.matrix().rows(0, self.k)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DenoiserDoc {
            n: self.n,
            k: self.k,
            encoder: to_pairs(self.encoder.matrix()),
            decoder: to_pairs(self.decoder.matrix()),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: DenoiserDoc =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        let encoder = Unitary::new(from_pairs(doc.n, &doc.encoder)?)?;
        let decoder = Unitary::new(from_pairs(doc.n, &doc.decoder)?)?;
        Self::new(doc.k, encoder, decoder)
    }
}

/// P_K = I_K ⊕ 0_{N−K}
pub fn latent_projector(n: usize, k: usize) -> Result<CMatrix> {
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!("K = {k}, N = {n}")));
    }
    Ok(CMatrix::from_fn(n, n, |r, col| if r == col && r < k { c(1.0) } else { c(0.0) }))
}

fn post_select(d: &Denoiser, latent: CMatrix) -> DenoiseOutcome {
    let g = trace(&latent).re;
    if g <= MIN_SUCCESS {
        return DenoiseOutcome { state: None, success_probability: g.max(0.0) };
    }
    let w = d.decoder.matrix().columns(0, d.k);
    let out = w * latent * w.adjoint() / c(g);
    DenoiseOutcome { state: Some(DensityMatrix::from_hermitized(out)), success_probability: g }
}

/// G = tr(P_K U_e ρ U_e†); state = U_d P_K U_e ρ U_e† P_K U_d† / G.
pub fn denoise(d: &Denoiser, rho: &DensityMatrix) -> Result<DenoiseOutcome> {
    expect_dim(d.n, rho.dim())?;
    let e = d.encoder.matrix().rows(0, d.k);
    Ok(post_select(d, e * rho.matrix() * e.adjoint()))
}

/// Rotates the K dominant eigenvectors of ρ_S onto the latent modes.
pub fn train_population(rho_s: &DensityMatrix, k: usize) -> Result<(Denoiser, TrainReport)> {
    let n = rho_s.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!("K = {k}, N = {n}")));
    }
    let eig = eigen_decompose(rho_s)?;
    let decoder = Unitary::from_trusted(eig.eigenvectors.clone());
    let encoder = decoder.dagger();
    let kept: f64 = eig.eigenvalues[..k].iter().sum();
    let cost = (1.0 - kept).clamp(0.0, 1.0);
    let d = Denoiser::new(k, encoder, decoder)?;
    Ok((d, TrainReport { cost, iterations: 1, converged: true }))
}

/// ρ_S = channel(Π_K/K), the noisy ensemble over Haar states in S.
pub fn ensemble_state(channel: &Channel, s: &Subspace) -> Result<DensityMatrix> {
    expect_dim(channel.dim(), s.dim_full())?;
    channel.apply(&s.maximally_mixed())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityEstimate {
    pub denoised: Estimate,
    pub bare: Estimate,
    pub mean_success: f64,
}

/// Monte Carlo average of ⟨ψ|ρ_denoise|ψ⟩ over Haar |ψ⟩ in S. Samples that
/// are never accepted score 0.
pub fn average_fidelity_mc<R: Rng + ?Sized>(
    d: &Denoiser,
    channel: &Channel,
    s: &Subspace,
    n_samples: usize,
    rng: &mut R,
) -> Result<FidelityEstimate> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter { name: "n_samples", reason: "need at least 2".into() });
    }
    expect_dim(channel.dim(), s.dim_full())?;
    expect_dim(d.n, s.dim_full())?;
    let mut denoised = Vec::with_capacity(n_samples);
    let mut bare = Vec::with_capacity(n_samples);
    let mut success = 0.0;
    for _ in 0..n_samples {
        let psi = sample_in_subspace(s, rng)?;
        let noisy = channel.apply_pure(&psi)?;
        bare.push(fidelity(&noisy, &psi)?);
        let out = denoise(d, &noisy)?;
        success += out.success_probability;
        denoised.push(match &out.state {
            Some(state) => fidelity(state, &psi)?,
            None => 0.0,
        });
    }
    Ok(FidelityEstimate {
        denoised: estimate(&denoised),
        bare: estimate(&bare),
        mean_success: success / n_samples as f64,
    })
}

/// Haar-averaged numerator over Haar-averaged denominator:
/// Σₙ(|tr(Π B Mₙ)|² + ‖Π B Mₙ Π‖²) / ((K+1)·Σₙ‖B Mₙ Π‖²).
pub fn quenched_fidelity(b: &CMatrix, s: &Subspace, kraus: &KrausChannel) -> Result<f64> {
    let n = s.dim_full();
    expect_dim(n, b.nrows())?;
    expect_dim(n, b.ncols())?;
    expect_dim(n, kraus.dim())?;
    let k = s.dim_sub() as f64;
    let pi = s.projector();
    let mut num = 0.0;
    let mut den = 0.0;
    for m in kraus.operators() {
        let bm = b * m;
        let pbm = &pi * &bm;
        num += trace(&pbm).norm_sqr() + frobenius_sq(&(&pbm * &pi));
        den += frobenius_sq(&(&bm * &pi));
    }
    if den <= 1e-300 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / ((k + 1.0) * den))
}

/// Orthonormal columns starting from `first`, completed from `pool`.
fn complete_basis(first: CVector, pool: &CMatrix, count: usize) -> CMatrix {
    let mut vectors = vec![first];
    for col in pool.column_iter() {
        if vectors.len() == count {
            break;
        }
        let mut v = col.into_owned();
        for _ in 0..2 {
            for u in &vectors {
                let proj = u.dotc(&v);
                v -= u * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            vectors.push(v.unscale(norm));
        }
    }
    CMatrix::from_columns(&vectors)
}

/// Explicit encoder/decoder for the channel (1−p)ρ + p|ψ_noise⟩⟨ψ_noise| that
/// rejects the noise branch exactly and passes every state in S with
/// probability 1 − c, c = ⟨ψ_noise|Π_K|ψ_noise⟩. Returns (denoiser, 1 − c).
pub fn build_perfect_denoiser(s: &Subspace, psi_noise: &PureState) -> Result<(Denoiser, f64)> {
    let n = s.dim_full();
    let k = s.dim_sub();
    expect_dim(n, psi_noise.dim())?;
    if n < 2 * k {
        return Err(Error::InvalidDimension(format!("need N >= 2K, got N = {n}, K = {k}")));
    }
    let pi = s.projector();
    let v = psi_noise.amplitudes();
    let inside = &pi * v;
    let outside = v - &inside;
    let overlap = inside.norm_squared().clamp(0.0, 1.0);
    if 1.0 - overlap <= 1e-14 {
        return Err(Error::DegenerateNoise);
    }
    let comp = s.complement_basis();
    let (phi1, root_c) = if overlap.sqrt() <= 1e-12 {
        (s.basis().column(0).into_owned(), 0.0)
    } else {
        (inside.unscale(inside.norm()), overlap.sqrt())
    };
    let root_1mc = (1.0 - overlap).sqrt();
    let phi1_perp = outside.unscale(outside.norm());
    let phis = complete_basis(phi1, s.basis(), k);
    let perps = complete_basis(phi1_perp, &comp, n - k);

    let noise = phis.column(0) * c(root_c) + perps.column(0) * c(root_1mc);
    let noise_perp = phis.column(0) * c(root_1mc) - perps.column(0) * c(root_c);

    // U₁ = |N−1⟩⟨ψ_n| + |0⟩⟨ψ_n⊥| + Σ_{j=1}^{K−1}|j⟩⟨φ_{j+1}| + Σ_{j=2}^{N−K}|j+K−2⟩⟨φ⊥_j|
    let mut u1 = CMatrix::zeros(n, n);
    u1.set_row(n - 1, &noise.adjoint());
    u1.set_row(0, &noise_perp.adjoint());
    for j in 1..k {
        u1.set_row(j, &phis.column(j).adjoint());
    }
    for j in 2..=n - k {
        u1.set_row(j + k - 2, &perps.column(j - 1).adjoint());
    }

    // U₂ mixes mode j with mode j+K−1 for j = 1..K−1.
    let mut u2 = CMatrix::identity(n, n);
    for j in 1..k {
        let r = j + k - 1;
        u2[(j, j)] = c(root_1mc);
        u2[(r, j)] = c(root_c);
        u2[(j, r)] = c(root_c);
        u2[(r, r)] = c(-root_1mc);
    }

    // U_d = Σ_{j=1}^{K}|φ_j⟩⟨j−1| + Σ_{j=1}^{N−K}|φ⊥_j⟩⟨j+K−1|
    let mut ud = CMatrix::zeros(n, n);
    for j in 0..k {
        ud.set_column(j, &phis.column(j));
    }
    for j in 0..n - k {
        ud.set_column(j + k, &perps.column(j));
    }

    let encoder = Unitary::new(u2 * u1)?;
    let decoder = Unitary::new(ud)?;
    Ok((Denoiser::new(k, encoder, decoder)?, 1.0 - overlap))
}

/// Variant for (1−p)VρV† + p|ψ_noise⟩⟨ψ_noise|: built on the rotated subspace
/// V·S, with V† folded into the decoder.
pub fn build_perfect_denoiser_coherent(
    s: &Subspace,
    v: &Unitary,
    psi_noise: &PureState,
) -> Result<(Denoiser, f64)> {
    expect_dim(s.dim_full(), v.dim())?;
    let rotated = Subspace::new(v.matrix() * s.basis())?;
    let (d, success) = build_perfect_denoiser(&rotated, psi_noise)?;
    let decoder = Unitary::from_trusted(v.matrix().adjoint() * d.decoder.matrix());
    Ok((Denoiser::new(d.k, d.encoder, decoder)?, success))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyAeModel {
    pub p_denoise: f64,
    pub fidelity: f64,
}

/// K = 1 denoiser of a depolarized input, with depolarizing(p_AE) after both
/// the encoder and the decoder.
pub fn noisy_ae_model(p_ae: f64, p_in: f64, n: usize) -> Result<NoisyAeModel> {
    check_probability("p_AE", p_ae)?;
    check_probability("p_in", p_in)?;
    if n == 0 {
        return Err(Error::InvalidDimension("N = 0".into()));
    }
    let nf = n as f64;
    Ok(NoisyAeModel {
        p_denoise: (1.0 - p_ae) * (1.0 - p_in) + (p_in + p_ae * (1.0 - p_in)) / nf,
        fidelity: 1.0 - (nf - 1.0) * p_ae / nf,
    })
}

/// Exact density-matrix simulation of a denoiser whose encoder and decoder
/// are each followed by depolarizing(p_AE).
pub fn noisy_denoise_simulate(
    d: &Denoiser,
    p_ae: f64,
    rho: &DensityMatrix,
) -> Result<DenoiseOutcome> {
    check_probability("p_AE", p_ae)?;
    expect_dim(d.n, rho.dim())?;
    let n = d.n;
    let white = CMatrix::identity(n, n) * c(1.0 / n as f64);
    let encoded = d.encoder.matrix() * rho.matrix() * d.encoder.matrix().adjoint();
    let noisy = encoded * c(1.0 - p_ae) + &white * c(p_ae);
    let latent = noisy.view((0, 0), (d.k, d.k)).into_owned();
    let mut out = post_select(d, latent);
    if let Some(state) = out.state.take() {
        let mixed = state.into_inner() * c(1.0 - p_ae) + white * c(p_ae);
        out.state = Some(DensityMatrix::from_hermitized(mixed));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    /// Total starts: the population solution plus `restarts − 1` Haar starts.
    pub restarts: usize,
    pub fd_step: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Restart agreement below which the search counts as converged.
    pub tolerance: f64,
    pub training_samples: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            fd_step: 1e-5,
            grad_tol: 1e-7,
            max_iter: 2000,
            tolerance: 1e-6,
            training_samples: 128,
        }
    }
}

/// (ideal, noisy) pairs for Haar states in S sent through `channel`.
pub fn fidelity_training_set<R: Rng + ?Sized>(
    channel: &Channel,
    s: &Subspace,
    size: usize,
    rng: &mut R,
) -> Result<Vec<(PureState, DensityMatrix)>> {
    expect_dim(channel.dim(), s.dim_full())?;
    (0..size)
        .map(|_| {
            let psi = sample_in_subspace(s, rng)?;
            let noisy = channel.apply_pure(&psi)?;
            Ok((psi, noisy))
        })
        .collect()
}

struct FidelityObjective {
    n: usize,
    k: usize,
    pairs: Vec<usize>,
    samples: Vec<(CVector, CMatrix)>,
}

impl FidelityObjective {
    fn cost(&self, ue: &CMatrix, ud: &CMatrix) -> f64 {
        let e = ue.rows(0, self.k);
        let w = ud.columns(0, self.k);
        let mut total = 0.0;
        for (psi, rho) in &self.samples {
            let latent = e * rho * e.adjoint();
            let g = trace(&latent).re;
            if g <= MIN_SUCCESS {
                continue;
            }
            let a = w.adjoint() * psi;
            total += a.dotc(&(&latent * &a)).re / g;
        }
        1.0 - total / self.samples.len() as f64
    }

    fn unitaries(&self, x: &[f64]) -> (CMatrix, CMatrix) {
        let m = self.n * self.n;
        (
            mesh_matrix_flat(self.n, &self.pairs, &x[..m]),
            mesh_matrix_flat(self.n, &self.pairs, &x[m..]),
        )
    }

    fn cost_flat(&self, x: &[f64]) -> f64 {
        let (ue, ud) = self.unitaries(x);
        self.cost(&ue, &ud)
    }
}

fn flat_start(encoder: &Unitary, decoder: &Unitary) -> Result<Vec<f64>> {
    let mut x = mesh_from_unitary(encoder)?.to_flat();
    x.extend(mesh_from_unitary(decoder)?.to_flat());
    Ok(x)
}

/// C_F = 1 − mean fidelity(denoise(ρᵢ), ψᵢ)
pub fn fidelity_cost(d: &Denoiser, training_set: &[(PureState, DensityMatrix)]) -> Result<f64> {
    if training_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let obj = objective(training_set, d.n, d.k)?;
    Ok(obj.cost(d.encoder.matrix(), d.decoder.matrix()))
}

fn objective(
    training_set: &[(PureState, DensityMatrix)],
    n: usize,
    k: usize,
) -> Result<FidelityObjective> {
    let mut samples = Vec::with_capacity(training_set.len());
    for (psi, rho) in training_set {
        expect_dim(n, psi.dim())?;
        expect_dim(n, rho.dim())?;
        samples.push((psi.amplitudes().clone(), rho.matrix().clone()));
    }
    Ok(FidelityObjective { n, k, pairs: rectangular_pairs(n), samples })
}

/// Supervised training of independent encoder and decoder meshes. The first
/// start is the population solution on the mean noisy state.
pub fn train_fidelity<R: Rng + ?Sized>(
    training_set: &[(PureState, DensityMatrix)],
    n: usize,
    k: usize,
    opt: &OptimizerConfig,
    rng: &mut R,
) -> Result<(Denoiser, TrainReport)> {
    if training_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!("K = {k}, N = {n}")));
    }
    let obj = objective(training_set, n, k)?;

    let mut mean = CMatrix::zeros(n, n);
    for (_, rho) in &obj.samples {
        mean += rho;
    }
    let mean = DensityMatrix::from_trusted(mean / c(obj.samples.len() as f64));
    let (pop, _) = train_population(&mean, k)?;
    let mut starts = vec![flat_start(&pop.encoder, &pop.decoder)?];
    let seed: u64 = rng.random();
    for i in 1..opt.restarts.max(1) {
        let mut r = rng::stream(seed, i as u64);
        let ue = haar_random_unitary(n, &mut r)?;
        let ud = haar_random_unitary(n, &mut r)?;
        starts.push(flat_start(&ue, &ud)?);
    }

    let cfg = BfgsConfig { fd_step: opt.fd_step, grad_tol: opt.grad_tol, max_iter: opt.max_iter };
    let runs: Vec<_> =
        starts.par_iter().map(|x0| minimize(|x| obj.cost_flat(x), x0, &cfg)).collect();
    if runs.iter().any(|r| !r.value.is_finite()) {
        return Err(Error::NonFiniteCost);
    }
    let best = runs
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let run = &runs[best];
    let converged = if runs.len() == 1 {
        run.converged
    } else {
        runs.iter()
            .enumerate()
            .any(|(i, r)| i != best && r.value - run.value < opt.tolerance)
    };
    let (ue, ud) = obj.unitaries(&run.x);
    let d = Denoiser::new(k, Unitary::from_trusted(ue), Unitary::from_trusted(ud))?;
    let report = TrainReport {
        cost: run.value.clamp(0.0, 1.0),
        iterations: run.iterations,
        converged,
    };
    Ok((d, report))
}
