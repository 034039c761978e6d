//! Small fitting utilities shared by the kernel laboratory: log-log slope
//! regression, normalized complex polynomial least squares, Richardson
//! extrapolation, and geometric sample grids.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Factorize, Solve};
use num_complex::Complex64 as C64;

use crate::{Result, WicklabError};

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx: f64 = xs.iter().sum::<f64>() / n;
    let my: f64 = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Geometric grid of `n` points spanning `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let r = (hi / lo).powf(1.0 / (n as f64 - 1.0));
    (0..n).map(|k| lo * r.powi(k as i32)).collect()
}

/// Least-squares coefficients `c_0..c_deg` of `y ~ sum c_n x^n`. The basis is
/// normalized by `max |x|` internally so the normal equations stay
/// well-conditioned on geometric grids; an estimated condition number beyond
/// 1e12 reports a fit-window error (sample range too narrow for the degree).
pub fn complex_poly_fit(xs: &[C64], ys: &[C64], deg: usize) -> Result<Vec<C64>> {
    let m = xs.len();
    let n = deg + 1;
    if m < n + 1 {
        return Err(WicklabError::FitWindow(format!(
            "{m} samples cannot support a degree-{deg} fit"
        )));
    }
    let scale = xs.iter().map(|x| x.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(WicklabError::FitWindow("all sample abscissae vanish".into()));
    }
    let mut v = Array2::from_elem((m, n), C64::new(0.0, 0.0));
    for (i, &x) in xs.iter().enumerate() {
        let t = x / scale;
        let mut p = C64::new(1.0, 0.0);
        for j in 0..n {
            v[[i, j]] = p;
            p *= t;
        }
    }
    // normal equations G c = b with G = V^H V
    let vh = v.t().mapv(|z| z.conj());
    let g = vh.dot(&v);
    let b = vh.dot(&Array1::from_vec(ys.to_vec()));
    let lu = g
        .factorize()
        .map_err(|e| WicklabError::FitWindow(format!("degenerate sample set: {e}")))?;
    let c = lu
        .solve(&b)
        .map_err(|e| WicklabError::FitWindow(format!("degenerate sample set: {e}")))?;
    // crude condition estimate: |G|_1 |G^{-1}|_1 via solves on unit columns
    let norm_g = one_norm(&g);
    let mut norm_inv = 0.0f64;
    for j in 0..n {
        let mut e = Array1::from_elem(n, C64::new(0.0, 0.0));
        e[j] = C64::new(1.0, 0.0);
        let col = lu
            .solve(&e)
            .map_err(|e| WicklabError::FitWindow(format!("degenerate sample set: {e}")))?;
        norm_inv = norm_inv.max(col.iter().map(|z| z.norm()).sum());
    }
    let cond = norm_g * norm_inv;
    if !cond.is_finite() || cond > 1e12 {
        return Err(WicklabError::FitWindow(format!(
            "normal equations condition {cond:.1e}; widen the sample range"
        )));
    }
    Ok((0..n).map(|j| c[j] / C64::from(scale).powu(j as u32)).collect())
}

fn one_norm(a: &Array2<C64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        worst = worst.max((0..a.nrows()).map(|i| a[[i, j]].norm()).sum());
    }
    worst
}

/// Eliminate the leading `O(h^2)` error from samples at spacings `h` and
/// `h/2`: `(4 fine - coarse) / 3`.
pub fn richardson(coarse: &[C64], fine: &[C64]) -> Vec<C64> {
    coarse
        .iter()
        .zip(fine)
        .map(|(c, f)| (C64::from(4.0) * f - c) / 3.0)
        .collect()
}
