//! Divergence-form lattice discretization on the metric torus.
//!
//! The stencil samples diagonal coefficients at face midpoints and mixed
//! coefficients at nodes, with centered differences throughout. This makes
//! the flux matrix complex-symmetric by construction, so the weighted
//! adjoint identity between the theta and pi - theta operators holds at the
//! discrete level exactly, not just in the continuum limit.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::geometry::{density_at, signature_inverses_at, AdmField};
use crate::{Result, WicklabError};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Uniform periodic grid on the (d+1)-torus, row-major node ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    pub sizes: Vec<usize>,
    pub periods: Vec<f64>,
    pub spacings: Vec<f64>,
    pub m_tot: usize,
}

impl TorusGrid {
    pub fn new(sizes: &[usize], periods: &[f64]) -> Result<Self> {
        if sizes.len() != periods.len() || sizes.is_empty() {
            return Err(WicklabError::Config(
                "grid sizes and periods must have equal nonzero length".into(),
            ));
        }
        if sizes.iter().any(|&n| n < 4) || periods.iter().any(|&p| p <= 0.0) {
            return Err(WicklabError::Config(
                "grid needs at least 4 nodes per dimension and positive periods".into(),
            ));
        }
        let spacings = sizes.iter().zip(periods).map(|(&n, &p)| p / n as f64).collect();
        let m_tot = sizes.iter().product();
        Ok(TorusGrid {
            sizes: sizes.to_vec(),
            periods: periods.to_vec(),
            spacings,
            m_tot,
        })
    }

    pub fn nvars(&self) -> usize {
        self.sizes.len()
    }

    /// Multi-index of a flat node index (row-major).
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.nvars()];
        for j in (0..self.nvars()).rev() {
            idx[j] = flat % self.sizes[j];
            flat /= self.sizes[j];
        }
        idx
    }

    /// Flat index with periodic wrapping of each component.
    pub fn flat_index(&self, idx: &[i64]) -> usize {
        let mut flat = 0usize;
        for j in 0..self.nvars() {
            let n = self.sizes[j] as i64;
            flat = flat * self.sizes[j] + (idx[j].rem_euclid(n)) as usize;
        }
        flat
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.spacings)
            .map(|(&i, &h)| i as f64 * h)
            .collect()
    }

    /// Neighbor of `flat` shifted by `step` nodes along `dim`.
    pub fn neighbor(&self, flat: usize, dim: usize, step: i64) -> usize {
        let mut idx: Vec<i64> = self.multi_index(flat).iter().map(|&i| i as i64).collect();
        idx[dim] += step;
        self.flat_index(&idx)
    }
}

/// Which member of the operator family a lattice matrix represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// The rotated operator at angle theta in (0, pi).
    Theta(f64),
    /// The Lorentzian-signature divergence operator (real coefficients),
    /// the coefficient of -i cos(theta) in the family decomposition.
    Lorentzian,
}

impl OperatorKind {
    /// Coefficients (a, b) in `C = rho (a g_+ + b g_-)` and the scalar
    /// multiplying `-V` on the diagonal.
    fn weights(self) -> (C64, C64, C64) {
        match self {
            OperatorKind::Theta(theta) => {
                let a = c(theta.sin());
                let b = C64::new(0.0, theta.cos());
                (a, b, a + b) // a + b = i e^{-i theta}
            }
            OperatorKind::Lorentzian => (c(0.0), c(1.0), c(1.0)),
        }
    }
}

/// Sparse lattice operator with its quadrature weights.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    pub grid: TorusGrid,
    pub kind: OperatorKind,
    /// `w_i = |g|^{1/2}(y_i) prod h` for the inner product `sum w_i conj(u_i) v_i`
    pub weights: Vec<f64>,
    pub resolution_warning: bool,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl LatticeOperator {
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        assert_eq!(u.len(), self.grid.m_tot);
        let mut out = vec![c(0.0); u.len()];
        for i in 0..u.len() {
            let mut acc = c(0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * u[self.cols[k]];
            }
            out[i] = acc;
        }
        out
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let m = self.grid.m_tot;
        let mut a = Array2::from_elem((m, m), c(0.0));
        for i in 0..m {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                a[[i, self.cols[k]]] += self.vals[k];
            }
        }
        a
    }

    pub fn max_nonzeros_per_row(&self) -> usize {
        (0..self.grid.m_tot)
            .map(|i| self.row_ptr[i + 1] - self.row_ptr[i])
            .max()
            .unwrap_or(0)
    }

    pub fn inner_w(&self, u: &[C64], v: &[C64]) -> C64 {
        u.iter()
            .zip(v)
            .zip(&self.weights)
            .map(|((a, b), &w)| a.conj() * b * c(w))
            .sum()
    }

    pub fn norm_w(&self, u: &[C64]) -> f64 {
        self.inner_w(u, u).re.sqrt()
    }

    /// Largest entry deviation in `W A_self - (W A_other)^H`.
    pub fn adjoint_defect(&self, other: &LatticeOperator) -> f64 {
        assert_eq!(self.grid, other.grid);
        let m = self.grid.m_tot;
        let a = self.to_dense();
        let b = other.to_dense();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let lhs = c(self.weights[i]) * a[[i, j]];
                let rhs = (c(other.weights[j]) * b[[j, i]]).conj();
                worst = worst.max((lhs - rhs).norm());
            }
        }
        worst
    }

    /// Coordinate triplet export: one `row col re im` line per stored entry,
    /// followed by `w i value` weight lines.
    pub fn to_triplets(&self) -> String {
        let mut out = String::new();
        for i in 0..self.grid.m_tot {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push_str(&format!(
                    "{} {} {:.17e} {:.17e}\n",
                    i, self.cols[k], self.vals[k].re, self.vals[k].im
                ));
            }
        }
        for (i, w) in self.weights.iter().enumerate() {
            out.push_str(&format!("w {} {:.17e}\n", i, w));
        }
        out
    }
}

/// Pointwise coefficient matrix `C^{mu nu}(y) = rho (a g_+ + b g_-)`.
fn coefficient_matrix(adm: &AdmField, kind: OperatorKind, y: &[f64]) -> Array2<C64> {
    let (gp, gm) = signature_inverses_at(adm, y);
    let rho = density_at(adm, y);
    let (a, b, _) = kind.weights();
    let n = gp.nrows();
    let mut out = Array2::from_elem((n, n), c(0.0));
    for mu in 0..n {
        for nu in 0..n {
            out[[mu, nu]] = c(rho) * (a * c(gp[[mu, nu]]) + b * c(gm[[mu, nu]]));
        }
    }
    out
}

fn resolution_ok(adm: &AdmField, grid: &TorusGrid) -> bool {
    let mut series = vec![&adm.lapse, &adm.potential];
    series.extend(adm.shift.iter());
    series.extend(adm.spatial_metric.iter());
    series.iter().all(|f| {
        f.max_mode()
            .iter()
            .zip(&grid.sizes)
            .all(|(&m, &n)| n >= 4 * m.unsigned_abs() as usize)
    })
}

/// Assemble the divergence-form lattice operator
/// `A = W^{-1} d_mu(C^{mu nu} d_nu) - q V` with `q` from the family
/// decomposition: diagonal coefficients at face midpoints, mixed terms as the
/// symmetrized centered product with node-centered coefficients.
pub fn assemble_delta_theta(
    grid: &TorusGrid,
    adm: &AdmField,
    kind: OperatorKind,
) -> Result<LatticeOperator> {
    if grid.nvars() != adm.dim_space + 1 {
        return Err(WicklabError::Config(format!(
            "grid dimension {} does not match spacetime dimension {}",
            grid.nvars(),
            adm.dim_space + 1
        )));
    }
    if let OperatorKind::Theta(theta) = kind {
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(WicklabError::Config(format!(
                "theta = {theta} outside (0, pi)"
            )));
        }
    }
    adm.validate(0.0)?;
    let n = grid.nvars();
    let cell: f64 = grid.spacings.iter().product();
    let (_, _, q) = kind.weights();

    let mut row_ptr = Vec::with_capacity(grid.m_tot + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut weights = Vec::with_capacity(grid.m_tot);
    row_ptr.push(0);

    for i in 0..grid.m_tot {
        let y = grid.node(i);
        let rho = density_at(adm, &y);
        weights.push(rho * cell);
        let mut row: BTreeMap<usize, C64> = BTreeMap::new();
        let add = |row: &mut BTreeMap<usize, C64>, j: usize, v: C64| {
            *row.entry(j).or_insert(c(0.0)) += v;
        };

        // face-midpoint diagonal fluxes
        for mu in 0..n {
            let h = grid.spacings[mu];
            for (sign, step) in [(1.0, 1i64), (-1.0, -1)] {
                let mut yf = y.clone();
                yf[mu] += sign * 0.5 * h;
                let cf = coefficient_matrix(adm, kind, &yf)[[mu, mu]] / c(rho * h * h);
                add(&mut row, grid.neighbor(i, mu, step), cf);
                add(&mut row, i, -cf);
            }
        }

        // node-centered symmetrized mixed terms
        for mu in 0..n {
            for nu in 0..n {
                if mu == nu {
                    continue;
                }
                let hm = grid.spacings[mu];
                let hn = grid.spacings[nu];
                for (sign, step) in [(1.0, 1i64), (-1.0, -1)] {
                    let mut yn = y.clone();
                    yn[mu] += sign * hm;
                    let cf = coefficient_matrix(adm, kind, &yn)[[mu, nu]]
                        * c(sign / (4.0 * hm * hn * rho));
                    let base = grid.neighbor(i, mu, step);
                    add(&mut row, grid.neighbor(base, nu, 1), cf);
                    add(&mut row, grid.neighbor(base, nu, -1), -cf);
                }
            }
        }

        add(&mut row, i, -q * c(adm.potential_at(&y)));

        for (j, v) in row {
            if v.norm() > 0.0 {
                cols.push(j);
                vals.push(v);
            }
        }
        row_ptr.push(cols.len());
    }

    Ok(LatticeOperator {
        grid: grid.clone(),
        kind,
        weights,
        resolution_warning: !resolution_ok(adm, grid),
        row_ptr,
        cols,
        vals,
    })
}

/// The sesquilinear energy form: `<u, A v>_w = -energy_form(u, v)` exactly,
/// by discrete summation by parts on the periodic grid.
pub fn energy_form(
    grid: &TorusGrid,
    adm: &AdmField,
    kind: OperatorKind,
    u: &[C64],
    v: &[C64],
) -> C64 {
    let n = grid.nvars();
    let cell: f64 = grid.spacings.iter().product();
    let (_, _, q) = kind.weights();
    let mut acc = c(0.0);
    for i in 0..grid.m_tot {
        let y = grid.node(i);
        // face fluxes (forward face only; the sum runs over all faces once)
        for mu in 0..n {
            let h = grid.spacings[mu];
            let mut yf = y.clone();
            yf[mu] += 0.5 * h;
            let cf = coefficient_matrix(adm, kind, &yf)[[mu, mu]];
            let du = (u[grid.neighbor(i, mu, 1)] - u[i]).conj();
            let dv = v[grid.neighbor(i, mu, 1)] - v[i];
            acc += cf * du * dv * c(cell / (h * h));
        }
        // node-centered mixed contributions
        let cf = coefficient_matrix(adm, kind, &y);
        for mu in 0..n {
            for nu in 0..n {
                if mu == nu {
                    continue;
                }
                let hm = grid.spacings[mu];
                let hn = grid.spacings[nu];
                let du = (u[grid.neighbor(i, mu, 1)] - u[grid.neighbor(i, mu, -1)]).conj()
                    / c(2.0 * hm);
                let dv = (v[grid.neighbor(i, nu, 1)] - v[grid.neighbor(i, nu, -1)]) / c(2.0 * hn);
                acc += cf[[mu, nu]] * du * dv * c(cell);
            }
        }
        // potential term
        acc += q * c(adm.potential_at(&y) * density_at(adm, &y) * cell) * u[i].conj() * v[i];
    }
    acc
}

/// Separable structure of the 1+1 operator when the foliation data are
/// time-independent and shift-free: the Fourier transform in t block-
/// diagonalizes `A` into one `N_x x N_x` system per time frequency,
/// `A_hat(k) = -s_t(k) diag(ctt_over_rho) + x_matrix`.
#[derive(Debug, Clone)]
pub struct SeparableParts {
    pub grid: TorusGrid,
    /// `C^{tt}(x) / rho(x)` at each spatial node
    pub ctt_over_rho: Vec<C64>,
    /// spatial divergence part plus the potential coupling
    pub x_matrix: Array2<C64>,
}

impl SeparableParts {
    /// The dense frequency block for time wave number `k`.
    pub fn frequency_block(&self, k: i64) -> Array2<C64> {
        let nx = self.grid.sizes[1];
        let sym = fourier_symbol(k, self.grid.sizes[0], self.grid.spacings[0]);
        let mut m = self.x_matrix.clone();
        for i in 0..nx {
            m[[i, i]] -= c(sym) * self.ctt_over_rho[i];
        }
        m
    }
}

/// Extract the separable structure; errors unless the data are
/// time-independent, shift-free, and the grid is 1+1.
pub fn separable_parts(
    grid: &TorusGrid,
    adm: &AdmField,
    kind: OperatorKind,
) -> Result<SeparableParts> {
    if grid.nvars() != 2 || adm.dim_space != 1 {
        return Err(WicklabError::Config(
            "separable structure requires a 1+1 grid".into(),
        ));
    }
    let t_independent = adm.lapse.independent_of(0)
        && adm.potential.independent_of(0)
        && adm.spatial_metric.iter().all(|g| g.independent_of(0))
        && adm.shift.iter().all(|s| s.independent_of(0));
    if !t_independent || adm.has_shift() {
        return Err(WicklabError::Config(
            "separable structure requires time-independent shift-free data".into(),
        ));
    }
    let nx = grid.sizes[1];
    let hx = grid.spacings[1];
    let (_, _, q) = kind.weights();
    let mut ctt_over_rho = Vec::with_capacity(nx);
    let mut x_matrix = Array2::from_elem((nx, nx), c(0.0));
    for i in 0..nx {
        let y = [0.0, i as f64 * hx];
        let rho = density_at(adm, &y);
        ctt_over_rho.push(coefficient_matrix(adm, kind, &y)[[0, 0]] / c(rho));
        for (sign, step) in [(1.0, 1i64), (-1.0, -1)] {
            let yf = [0.0, y[1] + sign * 0.5 * hx];
            let cf = coefficient_matrix(adm, kind, &yf)[[1, 1]] / c(rho * hx * hx);
            let j = (i as i64 + step).rem_euclid(nx as i64) as usize;
            x_matrix[[i, j]] += cf;
            x_matrix[[i, i]] -= cf;
        }
        x_matrix[[i, i]] -= q * c(adm.potential_at(&y));
    }
    Ok(SeparableParts {
        grid: grid.clone(),
        ctt_over_rho,
        x_matrix,
    })
}

/// Discrete symbol of the 1D second-difference operator.
pub fn fourier_symbol(k: i64, size: usize, spacing: f64) -> f64 {
    let s = (std::f64::consts::PI * k as f64 / size as f64).sin();
    4.0 * s * s / (spacing * spacing)
}

/// Plane-wave grid vector for integer wave numbers.
pub fn plane_wave(grid: &TorusGrid, k: &[i64]) -> Vec<C64> {
    (0..grid.m_tot)
        .map(|i| {
            let y = grid.node(i);
            let phase: f64 = k
                .iter()
                .zip(&y)
                .zip(&grid.periods)
                .map(|((&kj, &yj), &pj)| 2.0 * std::f64::consts::PI * kj as f64 * yj / pj)
                .sum();
            C64::from_polar(1.0, phase)
        })
        .collect()
}

/// Full eigenvalue multiset of the dense operator.
pub fn dense_spectrum(op: &LatticeOperator) -> Result<Vec<C64>> {
    use ndarray_linalg::EigVals;
    // eigvals on a row-major complex array sees the transpose, whose
    // spectrum is identical, so no correction is needed
    let vals = op
        .to_dense()
        .eigvals()
        .map_err(|e| WicklabError::LinearSolve(format!("dense eigenvalues: {e}")))?;
    Ok(vals.to_vec())
}

/// Rayleigh quotients `<psi, A psi>_w / <psi, psi>_w` on random unit vectors.
pub fn numerical_range_probe(op: &LatticeOperator, samples: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = op.grid.m_tot;
    (0..samples)
        .map(|_| {
            let psi: Vec<C64> = (0..m)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            op.inner_w(&psi, &op.apply(&psi)) / op.inner_w(&psi, &psi)
        })
        .collect()
}

/// Distance from `q` to the closed cone `C \ Sigma_alpha` (the complement of
/// the open sector of half-angle `alpha`), scaled naturally by `|q|`.
pub fn cone_distance(q: C64, alpha: f64) -> f64 {
    let r = q.norm();
    if r == 0.0 {
        return 0.0;
    }
    let gap = alpha - q.arg().abs();
    if gap <= 0.0 {
        0.0
    } else if gap >= std::f64::consts::FRAC_PI_2 {
        r
    } else {
        r * gap.sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierSeries;
    use std::f64::consts::PI;

    fn curved_with_shift() -> AdmField {
        let periods = [1.0, 1.0];
        let mut adm = AdmField::flat(1, &periods, 0.0);
        adm.lapse = FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.2, 0.0);
        adm.spatial_metric[0] =
            FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.3, 0.05);
        adm.shift[0] =
            FourierSeries::constant(2, &periods, 0.1).with_mode(vec![1, 1], 0.05, 0.02);
        adm.potential = FourierSeries::constant(2, &periods, 0.1).with_mode(vec![0, 1], 0.05, 0.0);
        adm
    }

    #[test]
    fn grid_index_roundtrip() {
        let grid = TorusGrid::new(&[6, 8], &[1.0, 2.0]).unwrap();
        assert_eq!(grid.m_tot, 48);
        for i in 0..grid.m_tot {
            let idx: Vec<i64> = grid.multi_index(i).iter().map(|&k| k as i64).collect();
            assert_eq!(grid.flat_index(&idx), i);
        }
        assert_eq!(grid.neighbor(0, 0, -1), grid.flat_index(&[5, 0]));
        assert_eq!(grid.neighbor(7, 1, 1), grid.flat_index(&[0, 0]));
    }

    #[test]
    fn dense_spectrum_matches_flat_oracle_multiset() {
        // anisotropic grid at theta != pi/2: the oracle multiset is not
        // conjugation-symmetric, so this pins the eigenvalue routine's
        // orientation, not just its moduli
        let flat = AdmField::flat(1, &[1.0, 2.0], 0.0);
        let grid = TorusGrid::new(&[6, 8], &[1.0, 2.0]).unwrap();
        let theta = 0.7;
        let op = assemble_delta_theta(&grid, &flat, OperatorKind::Theta(theta)).unwrap();
        let mut got = dense_spectrum(&op).unwrap();
        let mut want = Vec::new();
        for k0 in 0..6i64 {
            for k1 in 0..8i64 {
                want.push(
                    C64::new(0.0, 1.0) * C64::from_polar(1.0, theta)
                        * c(fourier_symbol(k0, 6, grid.spacings[0]))
                        - C64::new(0.0, 1.0) * C64::from_polar(1.0, -theta)
                            * c(fourier_symbol(k1, 8, grid.spacings[1])),
                );
            }
        }
        // greedy nearest-neighbor multiset matching: ties in the sort key
        // (conjugate pairs share a real part) make ordered comparison fragile
        for b in &want {
            let (j, dist) = got
                .iter()
                .enumerate()
                .map(|(j, a)| (j, (a - b).norm()))
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .unwrap();
            assert!(dist < 1e-10, "no spectrum match for {b}: nearest {dist:e}");
            got.swap_remove(j);
        }
    }

    #[test]
    fn flat_plane_waves_are_eigenvectors() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let grid = TorusGrid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        for theta in [0.4, PI / 2.0, 2.5] {
            let op = assemble_delta_theta(&grid, &flat, OperatorKind::Theta(theta)).unwrap();
            for k in [[0i64, 0], [1, 0], [0, 3], [2, 5], [4, 4]] {
                let psi = plane_wave(&grid, &k);
                let got = op.apply(&psi);
                let lam = C64::new(0.0, 1.0) * C64::from_polar(1.0, theta)
                    * c(fourier_symbol(k[0], 8, grid.spacings[0]))
                    - C64::new(0.0, 1.0) * C64::from_polar(1.0, -theta)
                        * c(fourier_symbol(k[1], 8, grid.spacings[1]));
                for i in 0..grid.m_tot {
                    assert!((got[i] - lam * psi[i]).norm() < 1e-12, "k {:?} theta {}", k, theta);
                }
            }
        }
    }

    #[test]
    fn euclidean_flat_is_real_negative_semidefinite() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let grid = TorusGrid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let op = assemble_delta_theta(&grid, &flat, OperatorKind::Theta(PI / 2.0)).unwrap();
        let a = op.to_dense();
        for i in 0..grid.m_tot {
            for j in 0..grid.m_tot {
                // cos(pi/2) is ~6e-17 in floating point, so "real" means
                // imaginary dust at the entry scale
                assert!(a[[i, j]].im.abs() < 1e-13);
                assert!((a[[i, j]] - a[[j, i]]).norm() < 1e-13);
            }
        }
        // kernel contains the constants
        let ones = vec![c(1.0); grid.m_tot];
        assert!(op.apply(&ones).iter().all(|v| v.norm() < 1e-12));
        for q in numerical_range_probe(&op, 10, 7) {
            assert!(q.im.abs() < 1e-12 && q.re < 1e-12);
        }
    }

    #[test]
    fn weighted_adjoint_pairing_exact() {
        let adm = curved_with_shift();
        let grid = TorusGrid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        for theta in [0.3, 1.1] {
            let a = assemble_delta_theta(&grid, &adm, OperatorKind::Theta(theta)).unwrap();
            let b = assemble_delta_theta(&grid, &adm, OperatorKind::Theta(PI - theta)).unwrap();
            let scale = a.to_dense().iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(a.adjoint_defect(&b) < 1e-13 * scale, "theta {}", theta);
        }
    }

    #[test]
    fn lorentzian_member_is_hermitian() {
        let adm = curved_with_shift();
        let grid = TorusGrid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let op = assemble_delta_theta(&grid, &adm, OperatorKind::Lorentzian).unwrap();
        let scale = op.to_dense().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(op.adjoint_defect(&op) < 1e-13 * scale);
    }

    #[test]
    fn stencil_bound_and_resolution_flag() {
        let adm = curved_with_shift();
        let grid = TorusGrid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let op = assemble_delta_theta(&grid, &adm, OperatorKind::Theta(0.7)).unwrap();
        assert!(op.max_nonzeros_per_row() <= 13);
        assert!(!op.resolution_warning);
        let mut sharp = adm;
        sharp.potential =
            FourierSeries::constant(2, &[1.0, 1.0], 0.1).with_mode(vec![0, 3], 0.05, 0.0);
        let coarse = TorusGrid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        assert!(assemble_delta_theta(&coarse, &sharp, OperatorKind::Theta(0.7))
            .unwrap()
            .resolution_warning);
    }

    #[test]
    fn energy_form_pairs_with_operator() {
        let adm = curved_with_shift();
        let grid = TorusGrid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [OperatorKind::Theta(0.9), OperatorKind::Lorentzian] {
            let op = assemble_delta_theta(&grid, &adm, kind).unwrap();
            for _ in 0..5 {
                let u: Vec<C64> = (0..grid.m_tot)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let v: Vec<C64> = (0..grid.m_tot)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let lhs = op.inner_w(&u, &op.apply(&v));
                let rhs = -energy_form(&grid, &adm, kind, &u, &v);
                assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
            }
        }
    }

    #[test]
    fn constant_vector_quotient_is_zero_without_potential() {
        let mut adm = curved_with_shift();
        adm.potential = FourierSeries::constant(2, &[1.0, 1.0], 0.0);
        let grid = TorusGrid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let op = assemble_delta_theta(&grid, &adm, OperatorKind::Theta(0.8)).unwrap();
        let ones = vec![c(1.0); grid.m_tot];
        let q = op.inner_w(&ones, &op.apply(&ones)) / op.inner_w(&ones, &ones);
        assert!(q.norm() < 1e-12, "quotient {}", q);
    }

    #[test]
    fn separable_blocks_reproduce_full_operator() {
        let periods = [1.0, 1.0];
        let mut adm = AdmField::flat(1, &periods, 0.0);
        adm.lapse = FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.2, 0.0);
        adm.spatial_metric[0] =
            FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.3, 0.0);
        adm.potential = FourierSeries::constant(2, &periods, 0.1).with_mode(vec![0, 1], 0.05, 0.0);
        let grid = TorusGrid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let kind = OperatorKind::Theta(0.7);
        let op = assemble_delta_theta(&grid, &adm, kind).unwrap();
        let parts = separable_parts(&grid, &adm, kind).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<C64> = (0..8)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        for k in [0i64, 1, 3, 5] {
            // u = (time plane wave) x (spatial profile v)
            let mut u = vec![c(0.0); grid.m_tot];
            for it in 0..8 {
                let ph = C64::from_polar(1.0, 2.0 * PI * k as f64 * it as f64 / 8.0);
                for ix in 0..8 {
                    u[grid.flat_index(&[it as i64, ix as i64])] = ph * v[ix];
                }
            }
            let got = op.apply(&u);
            let block = parts.frequency_block(k);
            for it in 0..8 {
                let ph = C64::from_polar(1.0, 2.0 * PI * k as f64 * it as f64 / 8.0);
                for ix in 0..8 {
                    let want: C64 = (0..8).map(|jx| block[[ix, jx]] * v[jx]).sum::<C64>() * ph;
                    let g = got[grid.flat_index(&[it as i64, ix as i64])];
                    assert!((g - want).norm() < 1e-10, "k {} node ({},{})", k, it, ix);
                }
            }
        }
        // shifted or time-dependent data are refused
        assert!(separable_parts(&grid, &curved_with_shift(), kind).is_err());
    }

    #[test]
    fn triplet_export_shape() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.3);
        let grid = TorusGrid::new(&[4, 4], &[1.0, 1.0]).unwrap();
        let op = assemble_delta_theta(&grid, &flat, OperatorKind::Theta(1.0)).unwrap();
        let text = op.to_triplets();
        let weight_lines = text.lines().filter(|l| l.starts_with("w ")).count();
        assert_eq!(weight_lines, 16);
        let entry_lines = text.lines().filter(|l| !l.starts_with("w ")).count();
        assert_eq!(entry_lines, op.vals.len());
        assert!(text.lines().next().unwrap().split_whitespace().count() == 4);
    }
}
