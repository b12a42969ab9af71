//! Quasi-Newton minimization on finite-difference gradients.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsConfig {
    /// Central-difference step.
    pub fd_step: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self { fd_step: 1e-5, grad_tol: 1e-7, max_iter: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Gradient norm fell below `grad_tol`.
    pub converged: bool,
}

pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> DVector<f64> {
    let mut probe = x.to_vec();
    DVector::from_fn(x.len(), |i, _| {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        (up - down) / (2.0 * h)
    })
}

/// BFGS with Armijo backtracking. The returned value never exceeds `f(x0)`.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], cfg: &BfgsConfig) -> BfgsResult {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if n == 0 {
        return BfgsResult { x: vec![], value: fx, iterations: 0, converged: true };
    }
    let mut g = central_gradient(&f, x.as_slice(), cfg.fd_step);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        if g.norm() < cfg.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h_inv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-14 {
            let trial = &x + &dir * step;
            let ft = f(trial.as_slice());
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if h_inv != DMatrix::identity(n, n) {
                h_inv = DMatrix::identity(n, n);
                continue;
            }
            break;
        };
        let g_new = central_gradient(&f, x_new.as_slice(), cfg.fd_step);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            h_inv += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    BfgsResult { x: x.as_slice().to_vec(), value: fx, iterations, converged }
}
