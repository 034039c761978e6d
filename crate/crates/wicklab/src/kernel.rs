//! Discrete kernel laboratory: materialize the integral kernel of the
//! lattice semigroup, verify the kernel laws (reproduction, Hermiticity,
//! Chapman-Kolmogorov, heat equation), fit the diagonal short-time expansion
//! against the transport predictions, and probe smoothing rates.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Factorize, Solve};
use num_complex::Complex64 as C64;

use crate::fit::{complex_poly_fit, slope};
use crate::geometry::AdmField;
use crate::lattice::{assemble_delta_theta, LatticeOperator, OperatorKind, SeparableParts, TorusGrid};
use crate::parametrix::predicted_diagonal_series;
use crate::semigroup::{
    evolve_contour_separable, evolve_dense, theta_tilde, ContourSpec, DENSE_THRESHOLD,
};
use crate::{Result, WicklabError};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn family_theta(op: &LatticeOperator) -> Result<f64> {
    match op.kind {
        OperatorKind::Theta(theta) => Ok(theta),
        OperatorKind::Lorentzian => Err(WicklabError::ContractViolation(
            "kernel laws are formulated for the theta family".into(),
        )),
    }
}

/// Dense kernel `K[i,j]` with `(T(zeta) psi)_i = sum_j w_j K[i,j] psi_j`,
/// i.e. the matrix of `T(zeta)` against the weighted volume measure.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub zeta: C64,
    pub theta: f64,
    pub entries: Array2<C64>,
    pub weights: Vec<f64>,
}

impl KernelMatrix {
    /// Weighted summation against `psi`.
    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let m = self.weights.len();
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| c(self.weights[j]) * self.entries[[i, j]] * psi[j])
                    .sum()
            })
            .collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.weights.len())
            .map(|i| self.entries[[i, i]])
            .collect()
    }
}

/// Kernel through the dense exponential: `K = exp(zeta A) diag(1/w)`.
pub fn build_kernel(op: &LatticeOperator, zeta: C64) -> Result<KernelMatrix> {
    let theta = family_theta(op)?;
    let m = op.grid.m_tot;
    if m > DENSE_THRESHOLD {
        return Err(WicklabError::SizeOverThreshold {
            size: m,
            threshold: DENSE_THRESHOLD,
        });
    }
    let mut entries = crate::expm::expm(&(op.to_dense() * zeta))?;
    for j in 0..m {
        let w = c(1.0 / op.weights[j]);
        for i in 0..m {
            entries[[i, j]] *= w;
        }
    }
    Ok(KernelMatrix {
        zeta,
        theta,
        entries,
        weights: op.weights.clone(),
    })
}

/// Kernel through contour quadrature: an independent route for the discrete
/// uniqueness check. One LU factorization per quadrature node, all columns
/// solved against it.
pub fn build_kernel_contour(
    op: &LatticeOperator,
    zeta: C64,
    quad_points: usize,
) -> Result<KernelMatrix> {
    let theta = family_theta(op)?;
    let m = op.grid.m_tot;
    if m > DENSE_THRESHOLD {
        return Err(WicklabError::SizeOverThreshold {
            size: m,
            threshold: DENSE_THRESHOLD,
        });
    }
    let spec = ContourSpec::auto(zeta, theta_tilde(theta), quad_points)?;
    let a = op.to_dense();
    let h = 2.0 * spec.half_width / (quad_points as f64 - 1.0);
    let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
    let mut acc = Array2::from_elem((m, m), C64::new(0.0, 0.0));
    for k in 0..quad_points {
        let u = -spec.half_width + k as f64 * h;
        let lam = spec.lambda(u);
        let mut shifted = -a.clone();
        for i in 0..m {
            shifted[[i, i]] += lam;
        }
        let lu = shifted
            .factorize()
            .map_err(|e| WicklabError::Contour(format!("kernel node factorization: {e}")))?;
        let endpoint = k == 0 || k == quad_points - 1;
        let w = (zeta * lam).exp() * spec.lambda_prime(u)
            * c(h * if endpoint { 0.5 } else { 1.0 })
            / two_pi_i;
        for j in 0..m {
            let mut e = Array1::from_elem(m, C64::new(0.0, 0.0));
            e[j] = c(1.0 / op.weights[j]);
            let x = lu
                .solve(&e)
                .map_err(|e| WicklabError::Contour(format!("kernel node solve: {e}")))?;
            for i in 0..m {
                acc[[i, j]] += w * x[i];
            }
        }
    }
    Ok(KernelMatrix {
        zeta,
        theta,
        entries: acc,
        weights: op.weights.clone(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct HeatResidual {
    /// `max_ij |(K(z+d) - K(z-d))/(2d) - (A K(z))[i,j]|`
    pub residual: f64,
    /// centered-difference error bound `|d|^2 max|A^3 K(z)| / 6`
    pub differencing_bound: f64,
}

/// Heat-equation residual of a kernel triple at equally spaced `zeta`.
pub fn heat_equation_residual(
    op: &LatticeOperator,
    lo: &KernelMatrix,
    mid: &KernelMatrix,
    hi: &KernelMatrix,
) -> Result<HeatResidual> {
    let d1 = mid.zeta - lo.zeta;
    let d2 = hi.zeta - mid.zeta;
    if (d1 - d2).norm() > 1e-12 * d1.norm() {
        return Err(WicklabError::ContractViolation(
            "kernel triple is not equally spaced in zeta".into(),
        ));
    }
    let m = op.grid.m_tot;
    let apply_cols = |k: &Array2<C64>| -> Array2<C64> {
        let mut out = Array2::from_elem((m, m), C64::new(0.0, 0.0));
        for j in 0..m {
            let col: Vec<C64> = (0..m).map(|i| k[[i, j]]).collect();
            let ak = op.apply(&col);
            for i in 0..m {
                out[[i, j]] = ak[i];
            }
        }
        out
    };
    let ak = apply_cols(&mid.entries);
    let mut residual = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let fd = (hi.entries[[i, j]] - lo.entries[[i, j]]) / (2.0 * d1);
            residual = residual.max((fd - ak[[i, j]]).norm());
        }
    }
    let a3k = apply_cols(&apply_cols(&ak));
    let third = a3k.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    Ok(HeatResidual {
        residual,
        differencing_bound: d1.norm_sqr() * third / 6.0,
    })
}

/// Diagonal kernel value `K[i,i]` at one node, by evolving the weighted
/// coordinate vector: the separable contour route when frequency blocks are
/// available, the dense exponential otherwise.
pub fn kernel_diagonal(
    op: &LatticeOperator,
    parts: Option<&SeparableParts>,
    zeta: C64,
    index: usize,
    quad_points: usize,
) -> Result<C64> {
    let m = op.grid.m_tot;
    let mut psi = vec![C64::new(0.0, 0.0); m];
    psi[index] = c(1.0 / op.weights[index]);
    let state = match parts {
        Some(p) => evolve_contour_separable(op, p, zeta, &psi, quad_points)?.state,
        None => evolve_dense(op, zeta, &psi)?.state,
    };
    Ok(state[index])
}

pub fn diagonal_samples(
    op: &LatticeOperator,
    parts: Option<&SeparableParts>,
    zeta_grid: &[f64],
    index: usize,
    quad_points: usize,
) -> Result<Vec<C64>> {
    zeta_grid
        .iter()
        .map(|&z| kernel_diagonal(op, parts, c(z), index, quad_points))
        .collect()
}

/// Default fit window `[25 h^2, (period/8)^2]`: below it the lattice kernel
/// departs from continuum scaling, above it periodization images contaminate
/// the Gaussian.
pub fn default_fit_window(spacing: f64, period: f64) -> (f64, f64) {
    (25.0 * spacing * spacing, (period / 8.0).powi(2))
}

#[derive(Debug, Clone)]
pub struct DiagonalFit {
    pub theta: f64,
    pub y: Vec<f64>,
    pub n_order: usize,
    /// fitted coefficients in the basis `(i e^{-i theta} zeta)^n` after
    /// removing the `(4 pi zeta)^{-(d+1)/2} (-i e^{i theta})^{(d-1)/2}` front
    pub fitted: Vec<C64>,
    /// transport coefficients `A_n(y)`
    pub predicted: Vec<C64>,
    /// `|fitted - predicted| / max(|predicted_n|, |predicted_0|)`
    pub rel_dev: Vec<f64>,
}

/// Rescale raw diagonal values to the expansion normalization: divide out
/// the parametrix front factor so the remainder is `sum A_n x^n` in
/// `x = i e^{-i theta} zeta`.
pub fn scaled_diagonal(adm: &AdmField, theta: f64, zeta: f64, value: C64) -> C64 {
    let d = adm.dim_space as f64;
    let front = c(4.0 * std::f64::consts::PI * zeta).powf((d + 1.0) / 2.0);
    let top = (-C64::new(0.0, 1.0) * C64::from_polar(1.0, theta)).powf((d - 1.0) / 2.0);
    value * front / top
}

/// Least-squares fit of scaled diagonal samples against the short-time
/// expansion basis, compared to the transport coefficients at `y`.
pub fn fit_diagonal_from_samples(
    adm: &AdmField,
    theta: f64,
    y: &[f64],
    zeta_grid: &[f64],
    samples: &[C64],
    n_order: usize,
) -> Result<DiagonalFit> {
    let zt = C64::new(0.0, 1.0) * C64::from_polar(1.0, -theta);
    let xs: Vec<C64> = zeta_grid.iter().map(|&z| zt * z).collect();
    let ys: Vec<C64> = zeta_grid
        .iter()
        .zip(samples)
        .map(|(&z, &v)| scaled_diagonal(adm, theta, z, v))
        .collect();
    let fitted = complex_poly_fit(&xs, &ys, n_order)?;
    let series = predicted_diagonal_series(adm, theta, n_order, y)?;
    let d = adm.dim_space as f64;
    let top = (-C64::new(0.0, 1.0) * C64::from_polar(1.0, theta)).powf((d - 1.0) / 2.0);
    let predicted: Vec<C64> = series
        .iter()
        .enumerate()
        .map(|(n, &v)| v / (top * zt.powu(n as u32)))
        .collect();
    let scale0 = predicted[0].norm();
    let rel_dev = fitted
        .iter()
        .zip(&predicted)
        .map(|(f, p)| (f - p).norm() / p.norm().max(scale0))
        .collect();
    Ok(DiagonalFit {
        theta,
        y: y.to_vec(),
        n_order,
        fitted,
        predicted,
        rel_dev,
    })
}

/// Two-grid diagonal fit: samples on `sizes` and on the doubled grid,
/// Richardson-extrapolated to cancel the `O(h^2)` lattice error, then fitted.
/// `y` must be a node of the coarse grid.
pub fn fit_diagonal_richardson(
    adm: &AdmField,
    theta: f64,
    sizes: &[usize],
    y: &[f64],
    zeta_grid: &[f64],
    n_order: usize,
    quad_points: usize,
) -> Result<DiagonalFit> {
    let extrap = richardson_diagonal_samples(adm, theta, sizes, y, zeta_grid, quad_points)?;
    fit_diagonal_from_samples(adm, theta, y, zeta_grid, &extrap, n_order)
}

/// Diagonal samples at `y` on the `sizes` grid and its doubling, Richardson
/// extrapolated; `y` must be a node of the coarse grid.
pub fn richardson_diagonal_samples(
    adm: &AdmField,
    theta: f64,
    sizes: &[usize],
    y: &[f64],
    zeta_grid: &[f64],
    quad_points: usize,
) -> Result<Vec<C64>> {
    let mut levels = Vec::new();
    for factor in [1usize, 2] {
        let sz: Vec<usize> = sizes.iter().map(|&s| s * factor).collect();
        let grid = TorusGrid::new(&sz, &adm.periods)?;
        let idx: Vec<i64> = y
            .iter()
            .zip(&grid.sizes)
            .zip(&grid.periods)
            .map(|((&c, &s), &p)| {
                let t = c / p * s as f64;
                let r = t.round();
                if (t - r).abs() > 1e-9 {
                    return -1;
                }
                r as i64
            })
            .collect();
        if idx.iter().any(|&v| v < 0) {
            return Err(WicklabError::Config(format!(
                "fit point {y:?} is not a node of the {sz:?} grid"
            )));
        }
        let flat = grid.flat_index(&idx);
        let op = assemble_delta_theta(&grid, adm, OperatorKind::Theta(theta))?;
        let parts = crate::lattice::separable_parts(&grid, adm, OperatorKind::Theta(theta))?;
        levels.push(diagonal_samples(&op, Some(&parts), zeta_grid, flat, quad_points)?);
    }
    Ok(crate::fit::richardson(&levels[0], &levels[1]))
}

#[derive(Debug, Clone)]
pub struct RemainderFit {
    pub n_order: usize,
    /// fitted exponent `p` in `|scaled remainder| ~ c zeta^p`
    pub exponent: f64,
    /// per-sample `(zeta, |scaled remainder|)`
    pub values: Vec<(f64, f64)>,
}

/// Fit the decay of the difference between the scaled kernel diagonal and
/// the order-`n_order` predicted series; the next expansion term gives
/// `p = n_order + 1` when the window is clean.
pub fn difference_to_parametrix(
    adm: &AdmField,
    theta: f64,
    y: &[f64],
    zeta_grid: &[f64],
    samples: &[C64],
    n_order: usize,
) -> Result<RemainderFit> {
    let series = predicted_diagonal_series(adm, theta, n_order, y)?;
    let d = adm.dim_space as f64;
    let top = (-C64::new(0.0, 1.0) * C64::from_polar(1.0, theta)).powf((d - 1.0) / 2.0);
    let mut values = Vec::with_capacity(zeta_grid.len());
    for (&z, &v) in zeta_grid.iter().zip(samples) {
        let s = scaled_diagonal(adm, theta, z, v);
        // series entries already carry the (i e^{-i theta})^n factors, so the
        // scaled prediction is sum_n series[n] z^n / top
        let pred: C64 = series
            .iter()
            .enumerate()
            .map(|(n, &a)| a / top * c(z).powu(n as u32))
            .sum();
        values.push((z, (s - pred).norm()));
    }
    let xs: Vec<f64> = values.iter().map(|(z, _)| z.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|(_, r)| r.max(1e-300).ln()).collect();
    Ok(RemainderFit {
        n_order,
        exponent: slope(&xs, &ys),
        values,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SmoothingRate {
    pub order: usize,
    /// fitted growth exponent of the C^m surrogate norm against `1/zeta`
    pub exponent: f64,
    pub norms_bounded: bool,
}

fn surrogate_norm(grid: &TorusGrid, u: &[C64], m: usize) -> f64 {
    match m {
        0 => u.iter().map(|z| z.norm()).fold(0.0, f64::max),
        1 => {
            let mut worst = 0.0f64;
            for i in 0..grid.m_tot {
                for d in 0..grid.sizes.len() {
                    let j = grid.neighbor(i, d, 1);
                    worst = worst.max((u[j] - u[i]).norm() / grid.spacings[d]);
                }
            }
            worst
        }
        2 => {
            let mut worst = 0.0f64;
            for i in 0..grid.m_tot {
                for d in 0..grid.sizes.len() {
                    let jp = grid.neighbor(i, d, 1);
                    let jm = grid.neighbor(i, d, -1);
                    let h2 = grid.spacings[d] * grid.spacings[d];
                    worst = worst.max((u[jp] - 2.0 * u[i] + u[jm]).norm() / h2);
                }
            }
            worst
        }
        _ => panic!("surrogate norms implemented for m <= 2"),
    }
}

/// Fit the blow-up of discrete C^m surrogate norms of `T(zeta) psi` as
/// `zeta` shrinks; for white-noise input the exponents probe the smoothing
/// scale of the semigroup.
pub fn smoothing_rate_probe(
    op: &LatticeOperator,
    psi: &[C64],
    zeta_grid: &[f64],
    m_max: usize,
) -> Result<Vec<SmoothingRate>> {
    let states: Vec<Vec<C64>> = zeta_grid
        .iter()
        .map(|&z| evolve_dense(op, c(z), psi).map(|r| r.state))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for m in 0..=m_max {
        let norms: Vec<f64> = states.iter().map(|u| surrogate_norm(&op.grid, u, m)).collect();
        let xs: Vec<f64> = zeta_grid.iter().map(|&z| (1.0 / z).ln()).collect();
        let ys: Vec<f64> = norms.iter().map(|n| n.max(1e-300).ln()).collect();
        let lo = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = norms.iter().cloned().fold(0.0f64, f64::max);
        out.push(SmoothingRate {
            order: m,
            exponent: slope(&xs, &ys),
            norms_bounded: hi <= 2.0 * lo,
        });
    }
    Ok(out)
}
