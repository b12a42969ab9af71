//! State representations, Haar sampling, fidelity and spectral primitives.
//!
//! Everything is dense `nalgebra` storage over `Complex64`. Vectors returned
//! by samplers and eigensolvers are phase-fixed: the first component with
//! modulus above [`PHASE_EPS`] is real and positive.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Components below this modulus are skipped when fixing the global phase.
pub const PHASE_EPS: f64 = 1e-12;
/// Eigenvalues closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

const STATE_NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;
// Looser gate for accepting user matrices before they are symmetrized.
const INPUT_HERMITIAN_TOL: f64 = 1e-10;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    frobenius_sq(m).sqrt()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Largest elementwise |M − M†|.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

pub(crate) fn square_dim(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimension(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidDimension("empty matrix".into()));
    }
    Ok(m.nrows())
}

pub(crate) fn expect_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Rotates `v` so its first non-negligible component is real positive.
pub fn fix_phase(v: &mut CVector) {
    if let Some(z) = v.iter().find(|z| z.norm() > PHASE_EPS).copied() {
        let phase = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

fn fix_column_phase(m: &mut CMatrix, col: usize) {
    let mut v = m.column(col).into_owned();
    fix_phase(&mut v);
    m.set_column(col, &v);
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState(CVector);

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension("state of dimension 0".into()));
        }
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidState(format!("squared norm {norm_sq}")));
        }
        Ok(Self(amplitudes))
    }

    /// Normalizes `amplitudes`; fails on the zero vector.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.is_empty() || norm < PHASE_EPS {
            return Err(Error::InvalidState("cannot normalize zero vector".into()));
        }
        Ok(Self(amplitudes.unscale(norm)))
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::InvalidDimension(format!("basis index {index} >= {n}")));
        }
        let mut v = CVector::zeros(n);
        v[index] = c(1.0);
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn into_inner(self) -> CVector {
        self.0
    }

    /// ⟨self|other⟩
    pub fn overlap(&self, other: &PureState) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn projector(&self) -> CMatrix {
        &self.0 * self.0.adjoint()
    }

    pub fn phase_fixed(mut self) -> Self {
        fix_phase(&mut self.0);
        self
    }
}

/// Hermitian, PSD, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates the matrix and stores its Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        square_dim(&m)?;
        let dev = hermitian_deviation(&m);
        if dev > INPUT_HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let rho = Self(hermitize(&m));
        let tr = trace(&rho.0).re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min_eig = rho.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(rho)
    }

    /// Hermitian part of `m`, no further checks. For outputs of maps that
    /// preserve the invariants analytically.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        let rho = Self(hermitize(&m));
        debug_assert!(rho.validate().is_ok(), "{:?}", rho.validate());
        rho
    }

    /// Hermitian part of `m` with no checks at all. For post-selected outputs
    /// whose normalization amplifies rounding.
    pub(crate) fn from_hermitized(m: CMatrix) -> Self {
        Self(hermitize(&m))
    }

    pub fn pure(psi: &PureState) -> Self {
        Self(psi.projector())
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(CMatrix::identity(n, n) * c(1.0 / n as f64))
    }

    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let diag = DVector::from_iterator(populations.len(), populations.iter().map(|&p| c(p)));
        Self::new(CMatrix::from_diagonal(&diag))
    }

    /// Random mixed state G·G†/tr(G·G†) from a square Ginibre matrix.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("N = 0".into()));
        }
        let g = ginibre(n, rng);
        let m = &g * g.adjoint();
        let tr = trace(&m).re;
        Ok(Self::from_trusted(m / c(tr)))
    }

    /// a·ρ₁ + (1 − a)·ρ₂
    pub fn mix(a: f64, first: &DensityMatrix, second: &DensityMatrix) -> Result<Self> {
        crate::error::check_probability("a", a)?;
        expect_dim(first.dim(), second.dim())?;
        Ok(Self::from_trusted(&first.0 * c(a) + &second.0 * c(1.0 - a)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// U ρ U†
    pub fn conjugate(&self, u: &Unitary) -> Result<Self> {
        expect_dim(self.dim(), u.dim())?;
        Ok(Self::from_trusted(u.matrix() * &self.0 * u.matrix().adjoint()))
    }

    fn min_eigenvalue(&self) -> f64 {
        self.0
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity at the crate tolerances.
    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.0);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = trace(&self.0);
        if (tr.re - 1.0).abs() > TRACE_TOL * self.dim() as f64 || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(CMatrix);

impl Unitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        let n = square_dim(&m)?;
        let dev = unitarity_deviation(&m);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        debug_assert_eq!(n, m.ncols());
        Ok(Self(m))
    }

    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        debug_assert!(unitarity_deviation(&m) < 1e-8);
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, after: &Unitary) -> Result<Self> {
        expect_dim(self.dim(), after.dim())?;
        Ok(Self(after.matrix() * &self.0))
    }

    pub fn apply(&self, psi: &PureState) -> Result<PureState> {
        expect_dim(self.dim(), psi.dim())?;
        Ok(PureState(&self.0 * psi.amplitudes()))
    }
}

/// Frobenius norm of U†U − I.
pub fn unitarity_deviation(m: &CMatrix) -> f64 {
    let n = m.ncols();
    frobenius(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

/// K-dimensional subspace of C^N with an orthonormal basis (N×K).
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: CMatrix,
}

impl Subspace {
    pub fn new(basis: CMatrix) -> Result<Self> {
        let (n, k) = basis.shape();
        if k == 0 || k > n {
            return Err(Error::InvalidDimension(format!("subspace basis {n}x{k}")));
        }
        let dev = frobenius(&(basis.adjoint() * &basis - CMatrix::identity(k, k)));
        if dev > UNITARY_TOL {
            return Err(Error::InvalidParameter {
                name: "basis",
                reason: format!("columns not orthonormal (deviation {dev:e})"),
            });
        }
        Ok(Self { basis })
    }

    /// Span of the first `k` computational basis vectors.
    pub fn computational(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidDimension(format!("K = {k}, N = {n}")));
        }
        Ok(Self { basis: CMatrix::identity(n, k) })
    }

    pub fn dim_full(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim_sub(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn basis_vector(&self, j: usize) -> PureState {
        PureState(self.basis.column(j).into_owned())
    }

    /// Π_K = B·B†
    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Π_K / K, the Haar average of |ψ⟩⟨ψ| over the subspace.
    pub fn maximally_mixed(&self) -> DensityMatrix {
        DensityMatrix::from_trusted(self.projector() * c(1.0 / self.dim_sub() as f64))
    }

    /// Orthonormal basis (N×(N−K)) of the orthogonal complement.
    pub fn complement_basis(&self) -> CMatrix {
        let n = self.dim_full();
        let k = self.dim_sub();
        let mut vectors: Vec<CVector> =
            self.basis.column_iter().map(|col| col.into_owned()).collect();
        for e in 0..n {
            if vectors.len() == n {
                break;
            }
            let mut v = CVector::zeros(n);
            v[e] = c(1.0);
            // two passes of Gram-Schmidt
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
        CMatrix::from_columns(&vectors[k..])
    }
}

/// Eigenpairs sorted by non-increasing eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column j pairs with `eigenvalues[j]`.
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> CMatrix {
        let d = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&l| c(l)),
        );
        &self.eigenvectors * CMatrix::from_diagonal(&d) * self.eigenvectors.adjoint()
    }

    pub fn vector(&self, j: usize) -> PureState {
        PureState(self.eigenvectors.column(j).into_owned())
    }
}

fn lexicographic(a: &CVector, b: &CVector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if (p - q).abs() > PHASE_EPS {
                // larger component first
                return q.partial_cmp(&p).unwrap_or(Ordering::Equal);
            }
        }
    }
    Ordering::Equal
}

/// Eigendecomposition of a Hermitian matrix, sorted descending.
///
/// Within runs of eigenvalues closer than [`DEGENERACY_TOL`], the phase-fixed
/// eigenvectors are ordered lexicographically (larger real part first, then
/// imaginary part) so the dominant subspace choice is deterministic.
pub fn eigen_hermitian(m: &CMatrix) -> Result<EigenDecomposition> {
    let n = square_dim(m)?;
    let dev = hermitian_deviation(m);
    if dev > INPUT_HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut pairs: Vec<(f64, CVector)> = (0..n)
        .map(|j| {
            let mut v = eig.eigenvectors.column(j).into_owned();
            fix_phase(&mut v);
            (eig.eigenvalues[j], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end - 1].0 - pairs[end].0).abs() < DEGENERACY_TOL {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        }
        start = end;
    }

    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let columns: Vec<CVector> = pairs.into_iter().map(|p| p.1).collect();
    let mut eigenvectors = CMatrix::from_columns(&columns);
    for j in 0..n {
        fix_column_phase(&mut eigenvectors, j);
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

pub fn eigen_decompose(rho: &DensityMatrix) -> Result<EigenDecomposition> {
    eigen_hermitian(rho.matrix())
}

/// Projector onto the K dominant eigenvectors of ρ and their eigenvalue mass.
pub fn dominant_projector(rho: &DensityMatrix, k: usize) -> Result<(CMatrix, f64)> {
    let n = rho.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!("K = {k}, N = {n}")));
    }
    let eig = eigen_decompose(rho)?;
    let top = eig.eigenvectors.columns(0, k);
    let projector = &top * top.adjoint();
    let mass = eig.eigenvalues[..k].iter().sum();
    Ok((projector, mass))
}

/// ⟨ψ|ρ|ψ⟩
pub fn fidelity(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    expect_dim(rho.dim(), psi.dim())?;
    let v = psi.amplitudes();
    let f = v.dotc(&(rho.matrix() * v)).re;
    Ok(f.clamp(0.0, 1.0))
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    // column-major fill order is part of the reproducibility contract
    CMatrix::from_fn(n, n, |_, _| gaussian(rng))
}

/// Haar-random pure state in dimension `n`.
pub fn haar_random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PureState> {
    if n == 0 {
        return Err(Error::InvalidDimension("N = 0".into()));
    }
    let v = CVector::from_fn(n, |_, _| gaussian(rng));
    Ok(PureState::normalized(v)?.phase_fixed())
}

/// Haar-random unitary: Ginibre matrix, QR, then R-diagonal phase correction.
pub fn haar_random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Unitary> {
    if n == 0 {
        return Err(Error::InvalidDimension("N = 0".into()));
    }
    let qr = ginibre(n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
    }
    Ok(Unitary(q))
}

/// First K columns of a Haar-random N×N unitary.
pub fn random_subspace<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Subspace> {
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!("K = {k}, N = {n}")));
    }
    let u = haar_random_unitary(n, rng)?;
    Ok(Subspace { basis: u.matrix().columns(0, k).into_owned() })
}

/// Haar-random state inside the subspace.
pub fn sample_in_subspace<R: Rng + ?Sized>(s: &Subspace, rng: &mut R) -> Result<PureState> {
    let v = haar_random_state(s.dim_sub(), rng)?;
    let psi = PureState::normalized(s.basis() * v.amplitudes())?;
    Ok(psi.phase_fixed())
}
