//! Noise channels: Kraus maps, the fixed-state replacement map, sampled
//! unitary mixtures, and Gibbs states.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_probability, Error, Result};
use crate::qstate::{
    c, eigen_hermitian, expect_dim, frobenius, hermitian_deviation, square_dim, CMatrix,
    CVector, DensityMatrix, PureState, Unitary, C64,
};

const COMPLETENESS_TOL: f64 = 1e-10;

/// ρ ↦ Σₙ Mₙ ρ Mₙ†
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    operators: Vec<CMatrix>,
    /// Set by `new_unchecked`: outputs are validated rather than trusted.
    unchecked: bool,
}

impl KrausChannel {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let mut ch = Self::new_unchecked(operators)?;
        let dev = ch.completeness_deviation();
        if dev > COMPLETENESS_TOL {
            return Err(Error::Incomplete(dev));
        }
        ch.unchecked = false;
        Ok(ch)
    }

    /// Builds a channel without the completeness check. Shapes are still
    /// validated, and `apply` checks every output. Used by the validation
    /// harness to inject broken channels.
    #[doc(hidden)]
    pub fn new_unchecked(operators: Vec<CMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidParameter { name: "operators", reason: "empty".into() })?;
        let dim = square_dim(first)?;
        for op in &operators {
            expect_dim(dim, square_dim(op)?)?;
        }
        Ok(Self { dim, operators, unchecked: true })
    }

    pub fn identity(n: usize) -> Self {
        Self { dim: n, operators: vec![CMatrix::identity(n, n)], unchecked: false }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// ‖Σ M†M − I‖_F
    pub fn completeness_deviation(&self) -> f64 {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for m in &self.operators {
            sum += m.adjoint() * m;
        }
        frobenius(&(sum - CMatrix::identity(self.dim, self.dim)))
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        expect_dim(self.dim, rho.dim())?;
        let out = self.apply_raw(rho.matrix());
        if self.unchecked {
            DensityMatrix::new(out)
        } else {
            Ok(DensityMatrix::from_trusted(out))
        }
    }

    pub(crate) fn apply_raw(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for m in &self.operators {
            out += m * rho * m.adjoint();
        }
        out
    }
}

/// ρ ↦ (1 − p)·VρV† + p·ρ_noise, with V = I unless a coherent error is set.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedStateMix {
    p: f64,
    noise: DensityMatrix,
    coherent: Option<Unitary>,
}

impl FixedStateMix {
    pub fn new(p: f64, noise: DensityMatrix) -> Result<Self> {
        check_probability("p", p)?;
        Ok(Self { p, noise, coherent: None })
    }

    /// The channel (1 − p)·VρV† + p·|ψ_noise⟩⟨ψ_noise| family, with arbitrary
    /// noise state.
    pub fn with_coherent_error(p: f64, v: Unitary, noise: DensityMatrix) -> Result<Self> {
        check_probability("p", p)?;
        expect_dim(noise.dim(), v.dim())?;
        Ok(Self { p, noise, coherent: Some(v) })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn noise(&self) -> &DensityMatrix {
        &self.noise
    }

    pub fn coherent_error(&self) -> Option<&Unitary> {
        self.coherent.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.noise.dim()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        expect_dim(self.dim(), rho.dim())?;
        Ok(DensityMatrix::from_trusted(self.apply_raw(rho.matrix())))
    }

    fn apply_raw(&self, rho: &CMatrix) -> CMatrix {
        let kept = match &self.coherent {
            Some(v) => v.matrix() * rho * v.matrix().adjoint(),
            None => rho.clone(),
        };
        let tr = crate::qstate::trace(rho);
        kept * c(1.0 - self.p) + self.noise.matrix() * (tr * self.p)
    }

    /// Kraus form: √(1−p)·V plus √(p·wᵢ)·|χᵢ⟩⟨j| over the eigenpairs
    /// (wᵢ, |χᵢ⟩) of ρ_noise and every basis vector |j⟩.
    pub fn to_kraus(&self) -> Result<KrausChannel> {
        let n = self.dim();
        let mut ops = Vec::new();
        if self.p < 1.0 {
            let keep = match &self.coherent {
                Some(v) => v.matrix().clone(),
                None => CMatrix::identity(n, n),
            };
            ops.push(keep * c((1.0 - self.p).sqrt()));
        }
        if self.p > 0.0 {
            let eig = eigen_hermitian(self.noise.matrix())?;
            for (i, &w) in eig.eigenvalues.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                let chi = eig.eigenvectors.column(i) * c((self.p * w).sqrt());
                for j in 0..n {
                    let mut op = CMatrix::zeros(n, n);
                    op.set_column(j, &chi);
                    ops.push(op);
                }
            }
        }
        // eigenvalues clipped at zero leave a residual of order 1e-16
        KrausChannel::new(ops)
    }
}

/// Σₖ pₖ·Vₖ ρ Vₖ†
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMixture {
    branches: Vec<(f64, Unitary)>,
}

impl UnitaryMixture {
    pub fn new(branches: Vec<(f64, Unitary)>) -> Result<Self> {
        let Some((_, first)) = branches.first() else {
            return Err(Error::InvalidParameter { name: "branches", reason: "empty".into() });
        };
        let n = first.dim();
        for (p, v) in &branches {
            check_probability("p_k", *p)?;
            expect_dim(n, v.dim())?;
        }
        let total: f64 = branches.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "branches",
                reason: format!("probabilities sum to {total}"),
            });
        }
        Ok(Self { branches })
    }

    pub fn branches(&self) -> &[(f64, Unitary)] {
        &self.branches
    }

    pub fn dim(&self) -> usize {
        self.branches[0].1.dim()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        expect_dim(self.dim(), rho.dim())?;
        Ok(DensityMatrix::from_trusted(self.apply_raw(rho.matrix())))
    }

    fn apply_raw(&self, rho: &CMatrix) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (p, v) in &self.branches {
            out += v.matrix() * rho * v.matrix().adjoint() * c(*p);
        }
        out
    }

    /// Kraus operators √pₖ·Vₖ.
    pub fn to_kraus(&self) -> Result<KrausChannel> {
        KrausChannel::new(
            self.branches.iter().map(|(p, v)| v.matrix() * c(p.sqrt())).collect(),
        )
    }
}

/// Any channel the simulator can apply.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Kraus(KrausChannel),
    FixedState(FixedStateMix),
    Mixture(UnitaryMixture),
}

impl Channel {
    pub fn dim(&self) -> usize {
        match self {
            Channel::Kraus(k) => k.dim(),
            Channel::FixedState(f) => f.dim(),
            Channel::Mixture(m) => m.dim(),
        }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match self {
            Channel::Kraus(k) => k.apply(rho),
            Channel::FixedState(f) => f.apply(rho),
            Channel::Mixture(m) => m.apply(rho),
        }
    }

    pub fn apply_pure(&self, psi: &PureState) -> Result<DensityMatrix> {
        self.apply(&DensityMatrix::pure(psi))
    }

    pub fn to_kraus(&self) -> Result<KrausChannel> {
        match self {
            Channel::Kraus(k) => Ok(k.clone()),
            Channel::FixedState(f) => f.to_kraus(),
            Channel::Mixture(m) => m.to_kraus(),
        }
    }
}

impl From<KrausChannel> for Channel {
    fn from(k: KrausChannel) -> Self {
        Channel::Kraus(k)
    }
}

impl From<FixedStateMix> for Channel {
    fn from(f: FixedStateMix) -> Self {
        Channel::FixedState(f)
    }
}

impl From<UnitaryMixture> for Channel {
    fn from(m: UnitaryMixture) -> Self {
        Channel::Mixture(m)
    }
}

pub fn fixed_state_mix(p: f64, noise: DensityMatrix) -> Result<FixedStateMix> {
    FixedStateMix::new(p, noise)
}

/// Replacement by I/N with probability p.
pub fn depolarizing(p: f64, n: usize) -> Result<FixedStateMix> {
    if n == 0 {
        return Err(Error::InvalidDimension("N = 0".into()));
    }
    FixedStateMix::new(p, DensityMatrix::maximally_mixed(n))
}

/// W_{mn} = Σⱼ ω^{jm} |j⟩⟨j ⊕ n|, ω = e^{2πi/N}, ⊕ addition mod N.
pub fn weyl(m: usize, n: usize, dim: usize) -> Result<Unitary> {
    if dim == 0 || m >= dim || n >= dim {
        return Err(Error::InvalidParameter {
            name: "weyl indices",
            reason: format!("(m, n) = ({m}, {n}) with N = {dim}"),
        });
    }
    let mut w = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        let angle = 2.0 * std::f64::consts::PI * ((j * m) % dim) as f64 / dim as f64;
        w[(j, (j + n) % dim)] = C64::from_polar(1.0, angle);
    }
    Ok(Unitary::from_trusted(w))
}

fn flip_checks(p: f64, n: usize) -> Result<()> {
    check_probability("p", p)?;
    if n < 2 {
        return Err(Error::InvalidDimension(format!("flip channels need N >= 2, got {n}")));
    }
    Ok(())
}

fn weyl_channel(p: f64, n: usize, indices: &[(usize, usize)], weight: f64) -> Result<KrausChannel> {
    let mut ops = vec![CMatrix::identity(n, n) * c((1.0 - p).sqrt())];
    if p > 0.0 {
        for &(a, b) in indices {
            ops.push(weyl(a, b, n)?.into_inner() * c(weight));
        }
    }
    KrausChannel::new(ops)
}

/// E₀₀ = √(1−p)·I, E₀ⱼ = √(p/(N−1))·W₀ⱼ.
pub fn dit_flip(p: f64, n: usize) -> Result<KrausChannel> {
    flip_checks(p, n)?;
    let idx: Vec<_> = (1..n).map(|j| (0, j)).collect();
    weyl_channel(p, n, &idx, (p / (n - 1) as f64).sqrt())
}

/// E₀₀ = √(1−p)·I, Eⱼ₀ = √(p/(N−1))·Wⱼ₀.
pub fn phase_flip(p: f64, n: usize) -> Result<KrausChannel> {
    flip_checks(p, n)?;
    let idx: Vec<_> = (1..n).map(|j| (j, 0)).collect();
    weyl_channel(p, n, &idx, (p / (n - 1) as f64).sqrt())
}

/// E₀₀ = √(1−p)·I, E_{mn} = √p/(N−1)·W_{mn} for m, n ≥ 1.
pub fn dit_phase_flip(p: f64, n: usize) -> Result<KrausChannel> {
    flip_checks(p, n)?;
    let idx: Vec<_> = (1..n).flat_map(|a| (1..n).map(move |b| (a, b))).collect();
    weyl_channel(p, n, &idx, p.sqrt() / (n - 1) as f64)
}

/// E₀ = |0⟩⟨0| + √(1−p)·Σ_{j≥1}|j⟩⟨j|, Eⱼ = √p·|0⟩⟨j|.
pub fn amplitude_damping(p: f64, n: usize) -> Result<KrausChannel> {
    check_probability("p", p)?;
    if n == 0 {
        return Err(Error::InvalidDimension("N = 0".into()));
    }
    let mut e0 = CMatrix::identity(n, n) * c((1.0 - p).sqrt());
    e0[(0, 0)] = c(1.0);
    let mut ops = vec![e0];
    if p > 0.0 {
        for j in 1..n {
            let mut e = CMatrix::zeros(n, n);
            e[(0, j)] = c(p.sqrt());
            ops.push(e);
        }
    }
    KrausChannel::new(ops)
}

/// Empirical thermal noise: `n_samples` equiprobable diagonal unitaries with
/// i.i.d. N(0, σ²) phases on every mode.
pub fn gaussian_phase<R: Rng + ?Sized>(
    sigma: f64,
    n: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<UnitaryMixture> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter { name: "sigma", reason: format!("{sigma} < 0") });
    }
    if n_samples == 0 || n == 0 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: "need at least one sample and N >= 1".into(),
        });
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter {
        name: "sigma",
        reason: e.to_string(),
    })?;
    let weight = 1.0 / n_samples as f64;
    let mut branches = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let phases = CVector::from_fn(n, |_, _| C64::from_polar(1.0, normal.sample(rng)));
        branches.push((weight, Unitary::from_trusted(CMatrix::from_diagonal(&phases))));
    }
    // the weights sum to 1 up to rounding of n_samples * (1/n_samples)
    Ok(UnitaryMixture { branches })
}

/// Infinite-sample limit of [`gaussian_phase`]: off-diagonals scaled by
/// e^{−σ²}. Kraus form √(1−q)·I, √q·|j⟩⟨j| with 1 − q = e^{−σ²}.
pub fn gaussian_dephasing(sigma: f64, n: usize) -> Result<KrausChannel> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter { name: "sigma", reason: format!("{sigma} < 0") });
    }
    if n == 0 {
        return Err(Error::InvalidDimension("N = 0".into()));
    }
    let q = 1.0 - (-sigma * sigma).exp();
    let mut ops = vec![CMatrix::identity(n, n) * c((1.0 - q).sqrt())];
    if q > 0.0 {
        for j in 0..n {
            let mut e = CMatrix::zeros(n, n);
            e[(j, j)] = c(q.sqrt());
            ops.push(e);
        }
    }
    KrausChannel::new(ops)
}

pub fn apply_mixture(mix: &UnitaryMixture, rho: &DensityMatrix) -> Result<DensityMatrix> {
    mix.apply(rho)
}

/// e^{−βH}/Tr e^{−βH} via the eigendecomposition of H.
pub fn gibbs_state(h: &CMatrix, beta: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter { name: "beta", reason: format!("{beta} < 0") });
    }
    let dev = hermitian_deviation(h);
    if dev > 1e-10 {
        return Err(Error::NotHermitian(dev));
    }
    let eig = eigen_hermitian(h)?;
    let e_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    // shifted by the ground energy so large β cannot underflow the ground weight
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let n = h.nrows();
    let mut rho = CMatrix::zeros(n, n);
    for (j, w) in weights.iter().enumerate() {
        let v = eig.eigenvectors.column(j);
        rho += &v * v.adjoint() * c(w / z);
    }
    Ok(DensityMatrix::from_trusted(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{fidelity, frobenius, haar_random_state, haar_random_unitary};
    use crate::rng;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        frobenius(&(a - b)) < tol
    }

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&v| c(v))))
    }

    #[test]
    fn identity_channel_is_identity() {
        let rho = DensityMatrix::random(3, &mut rng::seeded(1)).unwrap();
        let out = KrausChannel::identity(3).apply(&rho).unwrap();
        assert!(close(out.matrix(), rho.matrix(), 1e-15));
    }

    #[test]
    fn full_depolarizing_gives_maximally_mixed() {
        let rho = DensityMatrix::random(4, &mut rng::seeded(2)).unwrap();
        let out = depolarizing(1.0, 4).unwrap().apply(&rho).unwrap();
        assert!(close(out.matrix(), DensityMatrix::maximally_mixed(4).matrix(), 1e-12));
        let same = depolarizing(0.0, 4).unwrap().apply(&rho).unwrap();
        assert!(close(same.matrix(), rho.matrix(), 1e-15));
    }

    #[test]
    fn dit_flip_on_ground_state() {
        let rho = DensityMatrix::pure(&PureState::basis(2, 0).unwrap());
        let out = dit_flip(0.3, 2).unwrap().apply(&rho).unwrap();
        assert!(close(out.matrix(), &diag(&[0.7, 0.3]), 1e-12));
    }

    #[test]
    fn fixed_state_mix_limits_and_fidelity() {
        let mut r = rng::seeded(3);
        let psi = haar_random_state(5, &mut r).unwrap();
        let noise = DensityMatrix::random(5, &mut r).unwrap();
        let rho = DensityMatrix::pure(&psi);
        let id = fixed_state_mix(0.0, noise.clone()).unwrap().apply(&rho).unwrap();
        assert!(close(id.matrix(), rho.matrix(), 1e-15));
        let replaced = fixed_state_mix(1.0, noise.clone()).unwrap().apply(&rho).unwrap();
        assert!(close(replaced.matrix(), noise.matrix(), 1e-15));

        let out = depolarizing(0.4, 5).unwrap().apply(&rho).unwrap();
        assert!((fidelity(&out, &psi).unwrap() - (0.6 + 0.4 / 5.0)).abs() < 1e-12);
        let out = depolarizing(0.5, 5).unwrap().apply(&rho).unwrap();
        assert!((fidelity(&out, &psi).unwrap() - 0.6).abs() < 1e-12);

        assert!(matches!(
            fixed_state_mix(1.2, noise.clone()),
            Err(Error::InvalidProbability { .. })
        ));
        assert!(fixed_state_mix(-0.1, noise).is_err());
    }

    #[test]
    fn fixed_state_kraus_form_agrees() {
        let mut r = rng::seeded(4);
        let noise = DensityMatrix::random(4, &mut r).unwrap();
        let v = haar_random_unitary(4, &mut r).unwrap();
        for p in [0.0, 0.3, 1.0] {
            let mix = FixedStateMix::with_coherent_error(p, v.clone(), noise.clone()).unwrap();
            let kraus = mix.to_kraus().unwrap();
            assert!(kraus.completeness_deviation() < 1e-10);
            let rho = DensityMatrix::random(4, &mut r).unwrap();
            let a = mix.apply(&rho).unwrap();
            let b = kraus.apply(&rho).unwrap();
            assert!(close(a.matrix(), b.matrix(), 1e-12));
        }
    }

    #[test]
    fn weyl_structure() {
        assert!(close(weyl(0, 0, 4).unwrap().matrix(), &CMatrix::identity(4, 4), 1e-15));
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let z = diag(&[1.0, -1.0]);
        assert!(close(weyl(0, 1, 2).unwrap().matrix(), &x, 1e-15));
        assert!(close(weyl(1, 0, 2).unwrap().matrix(), &z, 1e-15));
        for n in 1..=7 {
            for a in 0..n {
                for b in 0..n {
                    let w = weyl(a, b, n).unwrap();
                    let prod = w.matrix() * w.matrix().adjoint();
                    assert!(close(&prod, &CMatrix::identity(n, n), 1e-12));
                }
            }
        }
        assert!(weyl(2, 0, 2).is_err());
        assert!(weyl(0, 3, 3).is_err());
    }

    #[test]
    fn flip_channels() {
        for n in 2..=7 {
            for p in [0.0, 0.3, 1.0] {
                for ch in [dit_flip(p, n), phase_flip(p, n), dit_phase_flip(p, n)] {
                    let ch = ch.unwrap();
                    assert!(ch.completeness_deviation() < 1e-12);
                    if p == 0.0 {
                        assert_eq!(ch.operators().len(), 1);
                        assert!(close(&ch.operators()[0], &CMatrix::identity(n, n), 1e-15));
                    }
                }
            }
        }
        assert!(matches!(dit_flip(0.1, 1), Err(Error::InvalidDimension(_))));
        assert!(phase_flip(0.1, 1).is_err());
        assert!(dit_phase_flip(0.1, 1).is_err());
    }

    #[test]
    fn phase_flip_preserves_populations() {
        let mut r = rng::seeded(5);
        for n in 2..=6 {
            let rho = DensityMatrix::random(n, &mut r).unwrap();
            let out = phase_flip(0.7, n).unwrap().apply(&rho).unwrap();
            for j in 0..n {
                assert!((out.matrix()[(j, j)] - rho.matrix()[(j, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn amplitude_damping_cases() {
        let mut r = rng::seeded(6);
        let rho = DensityMatrix::random(4, &mut r).unwrap();
        let full = amplitude_damping(1.0, 4).unwrap().apply(&rho).unwrap();
        assert!(close(full.matrix(), &diag(&[1.0, 0.0, 0.0, 0.0]), 1e-12));
        let none = amplitude_damping(0.0, 4).unwrap().apply(&rho).unwrap();
        assert!(close(none.matrix(), rho.matrix(), 1e-15));
        let one = DensityMatrix::pure(&PureState::basis(2, 1).unwrap());
        let out = amplitude_damping(0.4, 2).unwrap().apply(&one).unwrap();
        assert!(close(out.matrix(), &diag(&[0.4, 0.6]), 1e-12));
        assert!(amplitude_damping(1.5, 3).is_err());
    }

    #[test]
    fn completeness_sweep() {
        for n in 2..=8 {
            for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let chans = [
                    dit_flip(p, n).unwrap(),
                    phase_flip(p, n).unwrap(),
                    dit_phase_flip(p, n).unwrap(),
                    amplitude_damping(p, n).unwrap(),
                    depolarizing(p, n).unwrap().to_kraus().unwrap(),
                ];
                for ch in chans {
                    assert!(ch.completeness_deviation() < 1e-10, "n={n} p={p}");
                }
            }
        }
    }

    #[test]
    fn gaussian_phase_noise() {
        let mut r = rng::seeded(7);
        let mix = gaussian_phase(0.0, 3, 5, &mut r).unwrap();
        for (_, v) in mix.branches() {
            assert!(close(v.matrix(), &CMatrix::identity(3, 3), 1e-15));
        }
        assert!(gaussian_phase(-0.1, 3, 5, &mut r).is_err());
        assert!(gaussian_phase(0.1, 3, 0, &mut r).is_err());

        let psi = haar_random_state(3, &mut r).unwrap();
        let rho = DensityMatrix::pure(&psi);
        let sigma = 0.6;
        let mix = gaussian_phase(sigma, 3, 20_000, &mut r).unwrap();
        let out = mix.apply(&rho).unwrap();
        let exact = gaussian_dephasing(sigma, 3).unwrap().apply(&rho).unwrap();
        let damp = (-sigma * sigma).exp();
        for j in 0..3 {
            assert!((out.matrix()[(j, j)] - rho.matrix()[(j, j)]).norm() < 1e-12);
            for k in 0..3 {
                if j != k {
                    let want = rho.matrix()[(j, k)] * damp;
                    assert!((exact.matrix()[(j, k)] - want).norm() < 1e-12);
                    // MC error ~ |ρ_jk| / sqrt(n_samples)
                    assert!((out.matrix()[(j, k)] - want).norm() < 0.02);
                }
            }
        }
    }

    #[test]
    fn mixtures() {
        let mut r = rng::seeded(8);
        let rho = DensityMatrix::random(3, &mut r).unwrap();
        let u = haar_random_unitary(3, &mut r).unwrap();
        let single = UnitaryMixture::new(vec![(1.0, u.clone())]).unwrap();
        let want = rho.conjugate(&u).unwrap();
        assert!(close(apply_mixture(&single, &rho).unwrap().matrix(), want.matrix(), 1e-14));
        let twice =
            UnitaryMixture::new(vec![(0.5, Unitary::identity(3)), (0.5, Unitary::identity(3))])
                .unwrap();
        assert!(close(twice.apply(&rho).unwrap().matrix(), rho.matrix(), 1e-15));

        let v = haar_random_unitary(3, &mut r).unwrap();
        let mix = UnitaryMixture::new(vec![(0.3, u), (0.7, v)]).unwrap();
        let a = mix.apply(&rho).unwrap();
        let b = mix.to_kraus().unwrap().apply(&rho).unwrap();
        assert!(close(a.matrix(), b.matrix(), 1e-12));

        assert!(UnitaryMixture::new(vec![(0.6, Unitary::identity(2))]).is_err());
        assert!(UnitaryMixture::new(vec![]).is_err());
    }

    #[test]
    fn gibbs_states() {
        let h = diag(&[0.0, 1.0, 2.0]);
        let hot = gibbs_state(&h, 0.0).unwrap();
        assert!(close(hot.matrix(), DensityMatrix::maximally_mixed(3).matrix(), 1e-14));

        let rho = gibbs_state(&h, 1.0).unwrap();
        let z = 1.0 + (-1.0f64).exp() + (-2.0f64).exp();
        let want = diag(&[1.0 / z, (-1.0f64).exp() / z, (-2.0f64).exp() / z]);
        assert!(close(rho.matrix(), &want, 1e-14));

        let cold = gibbs_state(&diag(&[0.0, 1.0]), 60.0).unwrap();
        assert!(close(cold.matrix(), &diag(&[1.0, 0.0]), 1e-20));

        let mut bad = h.clone();
        bad[(0, 1)] = c(1.0);
        assert!(matches!(gibbs_state(&bad, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn gibbs_commutes_with_hamiltonian() {
        let mut r = rng::seeded(9);
        for n in 2..=6 {
            let g = crate::qstate::ginibre(n, &mut r);
            let h = &g + g.adjoint();
            let rho = gibbs_state(&h, 0.7).unwrap();
            let comm = &h * rho.matrix() - rho.matrix() * &h;
            assert!(frobenius(&comm) < 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            dit_flip(0.1, 4).unwrap().apply(&rho),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
