//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 50;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    p: Panel,
    tol: f64,
    depth: usize,
    evals: &mut usize,
) -> std::result::Result<f64, (f64, f64)> {
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let delta = left + right - p.whole;
    if !delta.is_finite() {
        return Err((p.a, p.b));
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err((p.a, p.b));
    }
    let l = Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left };
    let r = Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right };
    Ok(refine(f, l, 0.5 * tol, depth + 1, evals)? + refine(f, r, 0.5 * tol, depth + 1, evals)?)
}

/// ∫ₐᵇ f within absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let mut evals = 3;
    let whole = simpson(a, b, fa, fm, fb);
    // split once up front so a symmetric integrand cannot fool the first estimate
    let m = 0.5 * (a + b);
    let halves = [(a, m), (m, b)];
    let mut total = 0.0;
    for (lo, hi) in halves {
        let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        evals += 3;
        let panel =
            Panel { a: lo, b: hi, fa: flo, fm: fmid, fb: fhi, whole: simpson(lo, hi, flo, fmid, fhi) };
        total += refine(&f, panel, 0.5 * tol, 1, &mut evals).map_err(|(x, y)| {
            Error::Quadrature(format!(
                "no convergence on [{x}, {y}] after {evals} evaluations (coarse estimate {whole})"
            ))
        })?;
    }
    Ok(total)
}
