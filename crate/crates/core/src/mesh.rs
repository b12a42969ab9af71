//! Rectangular MZI-mesh parameterization of N×N unitaries, and the
//! single-photon / coherent-state intensity relations used for on-chip
//! training.
//!
//! Block convention, acting on neighbouring modes (m, m+1):
//!
//! ```text
//! T(θ, φ) = [ e^{iφ}·cos θ   −sin θ ]
//!           [ e^{iφ}·sin θ    cos θ ]
//! ```
//!
//! `blocks` are stored in the order light traverses them, so the mesh
//! realizes U = D · T_last ⋯ T_1 · T_0 with D = diag(e^{iαₖ}) the output
//! phase screen. θ = 0, φ = 0 is the identity block. The decomposition
//! returns θ ∈ [0, π/2] and φ ∈ (−π, π].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{expect_dim, unitarity_deviation, CMatrix, DensityMatrix, Unitary, C64};

const NULL_EPS: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziBlock {
    pub layer: usize,
    /// Modes (i, i+1).
    pub pair: [usize; 2],
    pub theta: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub dim: usize,
    pub blocks: Vec<MziBlock>,
    pub output_phases: Vec<f64>,
}

/// Wraps an angle into (−π, π].
fn wrap(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

fn arg(z: C64) -> f64 {
    if z.norm() == 0.0 {
        0.0
    } else {
        z.arg()
    }
}

/// Left-multiplies `m` by T(θ, φ) on rows (mode, mode+1).
fn apply_block_rows(m: &mut CMatrix, mode: usize, theta: f64, phi: f64) {
    let e = Complex64::from_polar(1.0, phi);
    let (s, co) = theta.sin_cos();
    for col in 0..m.ncols() {
        let a = m[(mode, col)];
        let b = m[(mode + 1, col)];
        m[(mode, col)] = e * co * a - b * s;
        m[(mode + 1, col)] = e * s * a + b * co;
    }
}

/// Right-multiplies `m` by T(θ, φ)⁻¹ on columns (mode, mode+1).
fn apply_inverse_block_cols(m: &mut CMatrix, mode: usize, theta: f64, phi: f64) {
    let e = Complex64::from_polar(1.0, -phi);
    let (s, co) = theta.sin_cos();
    for row in 0..m.nrows() {
        let a = m[(row, mode)];
        let b = m[(row, mode + 1)];
        m[(row, mode)] = a * e * co - b * s;
        m[(row, mode + 1)] = a * e * s + b * co;
    }
}

/// Mode pairs of the rectangular layout in traversal order. Depends on N only.
pub fn rectangular_pairs(n: usize) -> Vec<usize> {
    let mut right = Vec::new();
    let mut left = Vec::new();
    for i in 0..n.saturating_sub(1) {
        if i % 2 == 0 {
            for j in 0..=i {
                right.push(i - j);
            }
        } else {
            for j in 1..=i + 1 {
                left.push(n + j - i - 3);
            }
        }
    }
    right.extend(left.into_iter().rev());
    right
}

fn assign_layers(n: usize, pairs: &[usize]) -> Vec<usize> {
    let mut depth = vec![0usize; n];
    pairs
        .iter()
        .map(|&m| {
            let layer = depth[m].max(depth[m + 1]);
            depth[m] = layer + 1;
            depth[m + 1] = layer + 1;
            layer
        })
        .collect()
}

impl MeshParams {
    /// All blocks at θ = φ = 0 and zero output phases: the identity.
    pub fn identity(n: usize) -> Self {
        let pairs = rectangular_pairs(n);
        let layers = assign_layers(n, &pairs);
        let blocks = pairs
            .iter()
            .zip(layers)
            .map(|(&m, layer)| MziBlock { layer, pair: [m, m + 1], theta: 0.0, phi: 0.0 })
            .collect();
        Self { dim: n, blocks, output_phases: vec![0.0; n] }
    }

    pub fn n_blocks(n: usize) -> usize {
        n * n.saturating_sub(1) / 2
    }

    /// Number of real parameters: two per block plus N output phases (= N²).
    pub fn n_params(n: usize) -> usize {
        2 * Self::n_blocks(n) + n
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::MalformedMesh("dimension 0".into()));
        }
        if self.blocks.len() != Self::n_blocks(n) {
            return Err(Error::MalformedMesh(format!(
                "{} blocks, expected {}",
                self.blocks.len(),
                Self::n_blocks(n)
            )));
        }
        if self.output_phases.len() != n {
            return Err(Error::MalformedMesh(format!(
                "{} output phases, expected {n}",
                self.output_phases.len()
            )));
        }
        for b in &self.blocks {
            if b.pair[1] != b.pair[0] + 1 || b.pair[1] >= n {
                return Err(Error::MalformedMesh(format!("invalid mode pair {:?}", b.pair)));
            }
            if !b.theta.is_finite() || !b.phi.is_finite() {
                return Err(Error::MalformedMesh("non-finite angle".into()));
            }
        }
        if self.output_phases.iter().any(|a| !a.is_finite()) {
            return Err(Error::MalformedMesh("non-finite output phase".into()));
        }
        Ok(())
    }

    /// Flat layout `[θ…, φ…, α…]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.blocks.iter().map(|b| b.theta).collect();
        v.extend(self.blocks.iter().map(|b| b.phi));
        v.extend(&self.output_phases);
        v
    }

    /// Overwrites angles from a flat vector produced by [`MeshParams::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let nb = self.blocks.len();
        if flat.len() != 2 * nb + self.dim {
            return Err(Error::MalformedMesh(format!(
                "flat vector of length {}, expected {}",
                flat.len(),
                2 * nb + self.dim
            )));
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.theta = flat[i];
            b.phi = flat[nb + i];
        }
        self.output_phases.copy_from_slice(&flat[2 * nb..]);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let params: Self =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }
}

/// Mesh unitary straight from a flat `[θ…, φ…, α…]` vector over the layout
/// `pairs`.
pub(crate) fn mesh_matrix_flat(n: usize, pairs: &[usize], flat: &[f64]) -> CMatrix {
    let nb = pairs.len();
    let mut u = CMatrix::identity(n, n);
    for (i, &m) in pairs.iter().enumerate() {
        apply_block_rows(&mut u, m, flat[i], flat[nb + i]);
    }
    for (k, &alpha) in flat[2 * nb..].iter().enumerate() {
        let e = Complex64::from_polar(1.0, alpha);
        u.row_mut(k).iter_mut().for_each(|z| *z *= e);
    }
    u
}

pub(crate) fn mesh_matrix(params: &MeshParams) -> CMatrix {
    let n = params.dim;
    let mut u = CMatrix::identity(n, n);
    for b in &params.blocks {
        apply_block_rows(&mut u, b.pair[0], b.theta, b.phi);
    }
    for (k, &alpha) in params.output_phases.iter().enumerate() {
        let e = Complex64::from_polar(1.0, alpha);
        u.row_mut(k).iter_mut().for_each(|z| *z *= e);
    }
    u
}

pub fn unitary_from_mesh(params: &MeshParams) -> Result<Unitary> {
    params.validate()?;
    Ok(Unitary::from_trusted(mesh_matrix(params)))
}

/// Rectangular nulling decomposition (alternating column and row nulling,
/// then the row operations are pushed through the diagonal).
pub fn mesh_from_unitary(u: &Unitary) -> Result<MeshParams> {
    let n = u.dim();
    let dev = unitarity_deviation(u.matrix());
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }
    let mut w = u.matrix().clone();
    let mut right: Vec<(usize, f64, f64)> = Vec::new();
    let mut left: Vec<(usize, f64, f64)> = Vec::new();

    for i in 0..n.saturating_sub(1) {
        if i % 2 == 0 {
            for j in 0..=i {
                let col = i - j;
                let row = n - 1 - j;
                let a = w[(row, col)];
                let b = w[(row, col + 1)];
                let (theta, phi) = if a.norm() <= NULL_EPS {
                    (0.0, 0.0)
                } else {
                    (a.norm().atan2(b.norm()), wrap(arg(a) - arg(b)))
                };
                apply_inverse_block_cols(&mut w, col, theta, phi);
                right.push((col, theta, phi));
            }
        } else {
            for j in 1..=i + 1 {
                let row = n + j - i - 2;
                let col = j - 1;
                let a = w[(row - 1, col)];
                let b = w[(row, col)];
                let (theta, phi) = if b.norm() <= NULL_EPS {
                    (0.0, 0.0)
                } else {
                    (b.norm().atan2(a.norm()), wrap(PI + arg(b) - arg(a)))
                };
                apply_block_rows(&mut w, row - 1, theta, phi);
                left.push((row - 1, theta, phi));
            }
        }
    }

    // w = L·U·R⁻¹ is diagonal; rewrite Tₗ⁻¹·D = D'·T' for each row operation,
    // innermost first.
    let mut d: Vec<C64> = (0..n).map(|k| w[(k, k)]).collect();
    let mut moved = Vec::with_capacity(left.len());
    for &(m, theta, phi) in left.iter().rev() {
        let (d1, d2) = (d[m], d[m + 1]);
        if theta.sin().abs() <= NULL_EPS {
            d[m] = d1 * Complex64::from_polar(1.0, -phi);
            moved.push((m, 0.0, 0.0));
        } else {
            let new_phi = wrap(arg(-d1 / d2));
            d[m] = -Complex64::from_polar(1.0, -phi) * d2;
            moved.push((m, theta, new_phi));
        }
    }

    let mut ops = right;
    ops.extend(moved);
    let pairs: Vec<usize> = ops.iter().map(|o| o.0).collect();
    let layers = assign_layers(n, &pairs);
    let blocks = ops
        .into_iter()
        .zip(layers)
        .map(|((m, theta, phi), layer)| MziBlock { layer, pair: [m, m + 1], theta, phi })
        .collect();
    let output_phases = d.iter().map(|&z| arg(z)).collect();
    Ok(MeshParams { dim: n, blocks, output_phases })
}

fn row_populations(u: &Unitary, input_mode: usize) -> Result<Vec<f64>> {
    let n = u.dim();
    if input_mode >= n {
        return Err(Error::InvalidParameter {
            name: "input_mode",
            reason: format!("{input_mode} >= {n}"),
        });
    }
    Ok((0..n).map(|k| u.matrix()[(input_mode, k)].norm_sqr()).collect())
}

/// Mean photon number per output mode for one photon entering `input_mode`.
pub fn single_photon_populations(u: &Unitary, input_mode: usize) -> Result<Vec<f64>> {
    row_populations(u, input_mode)
}

/// Mean photon number per output mode for a coherent state |α⟩ entering
/// `input_mode`: |α|²·|U_{input,k}|².
pub fn coherent_intensities(u: &Unitary, input_mode: usize, alpha: C64) -> Result<Vec<f64>> {
    let scale = alpha.norm_sqr();
    Ok(row_populations(u, input_mode)?.into_iter().map(|p| scale * p).collect())
}

/// ⟨0|T†ρT|0⟩: population of mode 0 after undoing the state preparation T.
pub fn compute_uncompute_fidelity(t: &Unitary, rho: &DensityMatrix) -> Result<f64> {
    expect_dim(t.dim(), rho.dim())?;
    let col = t.matrix().column(0);
    Ok(col.dotc(&(rho.matrix() * col)).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{fidelity, frobenius, haar_random_unitary, PureState};
    use crate::rng;

    #[test]
    fn identity_mesh() {
        for n in 1..=6 {
            let p = MeshParams::identity(n);
            assert_eq!(p.blocks.len(), n * (n - 1) / 2);
            let u = unitary_from_mesh(&p).unwrap();
            assert!(frobenius(&(u.matrix() - CMatrix::identity(n, n))) < 1e-15);
            let back = mesh_from_unitary(&Unitary::identity(n)).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn diagonal_unitary_goes_to_output_layer() {
        let phases = [0.3, -1.2, 2.0, 0.0];
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            phases.iter().map(|&a| Complex64::from_polar(1.0, a)),
        ));
        let p = mesh_from_unitary(&Unitary::new(d).unwrap()).unwrap();
        assert!(p.blocks.iter().all(|b| b.theta == 0.0 && b.phi == 0.0));
        for (a, b) in p.output_phases.iter().zip(phases) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn two_mode_blocks_are_unitary() {
        let mut p = MeshParams::identity(2);
        for t in 0..20 {
            p.blocks[0].theta = t as f64 * 0.17;
            p.blocks[0].phi = t as f64 * -0.4;
            let u = unitary_from_mesh(&p).unwrap();
            for col in 0..2 {
                assert!((u.matrix().column(col).norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn haar_round_trip() {
        let mut r = rng::seeded(21);
        for n in 1..=12 {
            for _ in 0..20 {
                let u = haar_random_unitary(n, &mut r).unwrap();
                let p = mesh_from_unitary(&u).unwrap();
                p.validate().unwrap();
                for b in &p.blocks {
                    assert!((0.0..=PI / 2.0).contains(&b.theta));
                    assert!(b.phi > -PI && b.phi <= PI);
                }
                let back = unitary_from_mesh(&p).unwrap();
                assert!(frobenius(&(u.matrix() - back.matrix())) < 1e-8, "n = {n}");
            }
        }
    }

    #[test]
    fn layout_is_fixed_by_dimension() {
        let mut r = rng::seeded(22);
        for n in 2..=7 {
            let u = haar_random_unitary(n, &mut r).unwrap();
            let p = mesh_from_unitary(&u).unwrap();
            let pairs: Vec<usize> = p.blocks.iter().map(|b| b.pair[0]).collect();
            assert_eq!(pairs, rectangular_pairs(n));
            let depth = p.blocks.iter().map(|b| b.layer).max().unwrap() + 1;
            assert!(depth <= n, "depth {depth} for n = {n}");
        }
    }

    #[test]
    fn malformed_layouts_rejected() {
        let mut p = MeshParams::identity(4);
        p.blocks.pop();
        assert!(matches!(unitary_from_mesh(&p), Err(Error::MalformedMesh(_))));
        let mut p = MeshParams::identity(4);
        p.blocks[0].pair = [3, 4];
        assert!(unitary_from_mesh(&p).is_err());
        let mut p = MeshParams::identity(3);
        p.output_phases.push(0.0);
        assert!(unitary_from_mesh(&p).is_err());
    }

    #[test]
    fn json_round_trip() {
        let u = haar_random_unitary(4, &mut rng::seeded(23)).unwrap();
        let p = mesh_from_unitary(&u).unwrap();
        let back = MeshParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);
        assert!(p.to_json().unwrap().contains("\"pair\""));
    }

    #[test]
    fn photon_and_coherent_intensities() {
        let id = Unitary::identity(4);
        assert_eq!(single_photon_populations(&id, 0).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            coherent_intensities(&id, 0, Complex64::new(2.0, 0.0)).unwrap(),
            vec![4.0, 0.0, 0.0, 0.0]
        );
        let u = haar_random_unitary(5, &mut rng::seeded(24)).unwrap();
        let pops = single_photon_populations(&u, 2).unwrap();
        assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(coherent_intensities(&u, 1, Complex64::new(0.0, 0.0))
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
        let unit = coherent_intensities(&u, 2, Complex64::from_polar(1.0, 0.7)).unwrap();
        for (a, b) in unit.iter().zip(&pops) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(single_photon_populations(&u, 5).is_err());
    }

    #[test]
    fn compute_uncompute_matches_fidelity() {
        let mut r = rng::seeded(25);
        for n in 2..=6 {
            let t = haar_random_unitary(n, &mut r).unwrap();
            let psi = t.apply(&PureState::basis(n, 0).unwrap()).unwrap();
            let pure = DensityMatrix::pure(&psi);
            assert!((compute_uncompute_fidelity(&t, &pure).unwrap() - 1.0).abs() < 1e-12);
            let mixed = DensityMatrix::maximally_mixed(n);
            let f = compute_uncompute_fidelity(&t, &mixed).unwrap();
            assert!((f - 1.0 / n as f64).abs() < 1e-12);
            let rho = DensityMatrix::random(n, &mut r).unwrap();
            let a = compute_uncompute_fidelity(&t, &rho).unwrap();
            let b = fidelity(&rho, &psi).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}
