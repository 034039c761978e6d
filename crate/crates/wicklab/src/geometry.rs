//! ADM foliation data on a torus and the lapse-Wick-rotated metric family.
//!
//! The spacetime metric interpolates between Euclidean and Lorentzian
//! signature through a phase rotation of the lapse only:
//! `g = eps N^2 dt^2 + ghat_ab (dx^a + N^a dt)(dx^b + N^b dt)` with
//! `eps = -e^{-2 i theta}`, so `theta = pi/2` gives the Euclidean metric
//! `g^+` and `theta -> 0` the Lorentzian metric `g^-`. The volume density
//! `N sqrt(ghat)` is real and theta-independent.

use crate::error::{Result, WicklabError};
use crate::fourier::FourierSeries;
use crate::poly::{exp_factorial, indices_to_exp, Poly};
use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `eps = -e^{-2 i theta}` multiplying `N^2 dt^2`.
pub fn signature_factor(theta: f64) -> C64 {
    -(C64::new(0.0, -2.0 * theta)).exp()
}

/// ADM component fields as finite Fourier series; all jets are exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmField {
    pub dim_space: usize,
    pub periods: Vec<f64>,
    pub lapse: FourierSeries,
    pub shift: Vec<FourierSeries>,
    /// Upper triangle of ghat_ab, row-major: (0,0), (0,1), ..., (1,1), ...
    pub spatial_metric: Vec<FourierSeries>,
    pub potential: FourierSeries,
}

impl AdmField {
    /// Flat data: N = 1, zero shift, ghat = identity, V = v0.
    pub fn flat(dim_space: usize, periods: &[f64], v0: f64) -> Self {
        let n = dim_space + 1;
        assert_eq!(periods.len(), n);
        let mut spatial = Vec::new();
        for a in 0..dim_space {
            for b in a..dim_space {
                let val = if a == b { 1.0 } else { 0.0 };
                spatial.push(FourierSeries::constant(n, periods, val));
            }
        }
        AdmField {
            dim_space,
            periods: periods.to_vec(),
            lapse: FourierSeries::constant(n, periods, 1.0),
            shift: vec![FourierSeries::constant(n, periods, 0.0); dim_space],
            spatial_metric: spatial,
            potential: FourierSeries::constant(n, periods, v0),
        }
    }

    pub fn dim_total(&self) -> usize {
        self.dim_space + 1
    }

    fn tri_index(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        // offset of row a in the packed upper triangle
        a * self.dim_space - a * (a + 1) / 2 + b
    }

    pub fn spatial_series(&self, a: usize, b: usize) -> &FourierSeries {
        &self.spatial_metric[self.tri_index(a, b)]
    }

    pub fn lapse_at(&self, y: &[f64]) -> f64 {
        self.lapse.eval(y)
    }

    pub fn shift_at(&self, y: &[f64]) -> Vec<f64> {
        self.shift.iter().map(|s| s.eval(y)).collect()
    }

    pub fn spatial_at(&self, y: &[f64]) -> Array2<f64> {
        let d = self.dim_space;
        let mut g = Array2::zeros((d, d));
        for a in 0..d {
            for b in a..d {
                let v = self.spatial_series(a, b).eval(y);
                g[[a, b]] = v;
                g[[b, a]] = v;
            }
        }
        g
    }

    pub fn potential_at(&self, y: &[f64]) -> f64 {
        self.potential.eval(y)
    }

    pub fn has_shift(&self) -> bool {
        self.shift.iter().any(|s| !s.is_constant() || s.constant != 0.0)
    }

    /// Positivity of N and ghat plus V >= 0, sampled on 4x the Nyquist grid.
    pub fn validate(&self, margin: f64) -> Result<()> {
        let n = self.dim_total();
        let mut sizes = vec![8usize; n];
        let mut track = |f: &FourierSeries| {
            for (j, k) in f.max_mode().iter().enumerate() {
                sizes[j] = sizes[j].max(4 * (*k as usize).max(1));
            }
        };
        track(&self.lapse);
        for s in &self.shift {
            track(s);
        }
        for g in &self.spatial_metric {
            track(g);
        }
        track(&self.potential);

        let total: usize = sizes.iter().product();
        let mut y = vec![0.0; n];
        for flat in 0..total {
            let mut rem = flat;
            for j in 0..n {
                let i = rem % sizes[j];
                rem /= sizes[j];
                y[j] = self.periods[j] * (i as f64) / (sizes[j] as f64);
            }
            if self.lapse_at(&y) <= margin {
                return Err(WicklabError::InvalidGeometry(format!(
                    "lapse not positive at {:?}",
                    y
                )));
            }
            let g = self.spatial_at(&y);
            let min_eig = if self.dim_space == 1 {
                g[[0, 0]]
            } else {
                let (w, _) = g
                    .eigh(UPLO::Lower)
                    .map_err(|e| WicklabError::Internal(format!("eigh: {}", e)))?;
                w.iter().cloned().fold(f64::INFINITY, f64::min)
            };
            if min_eig <= margin {
                return Err(WicklabError::InvalidGeometry(format!(
                    "spatial metric not positive-definite at {:?}",
                    y
                )));
            }
            if self.potential_at(&y) < -1e-12 {
                return Err(WicklabError::InvalidGeometry(format!(
                    "potential negative at {:?}",
                    y
                )));
            }
        }
        Ok(())
    }

    /// Taylor jet of all component fields at `y` up to total order `order`.
    pub fn jet(&self, y: &[f64], order: usize) -> JetPoint {
        let n = self.dim_total();
        let taylor = |f: &FourierSeries| taylor_poly(f, y, order);
        JetPoint {
            base: y.to_vec(),
            order,
            nvars: n,
            lapse: taylor(&self.lapse),
            shift: self.shift.iter().map(taylor).collect(),
            spatial: self.spatial_metric.iter().map(taylor).collect(),
            potential: taylor(&self.potential),
        }
    }
}

/// Taylor polynomial of a Fourier series around `y` (coefficients are
/// `d^alpha f / alpha!`), exact at every order.
pub fn taylor_poly(f: &FourierSeries, y: &[f64], order: usize) -> Poly {
    let n = f.nvars;
    let mut p = Poly::zero(n, order);
    let mut exps: Vec<Vec<u8>> = vec![vec![0; n]];
    collect_exps(n, order, &mut vec![0u8; n], 0, &mut exps);
    exps.sort();
    exps.dedup();
    for e in exps {
        let orders: Vec<usize> = e.iter().map(|&k| k as usize).collect();
        let d = f.deriv(&orders, y);
        if d != 0.0 {
            p.set(e.clone(), c(d / exp_factorial(&e)));
        }
    }
    p
}

fn collect_exps(n: usize, order: usize, cur: &mut Vec<u8>, var: usize, out: &mut Vec<Vec<u8>>) {
    if var == n {
        out.push(cur.clone());
        return;
    }
    let used: usize = cur.iter().map(|&k| k as usize).sum();
    for k in 0..=(order - used) {
        cur[var] = k as u8;
        collect_exps(n, order, cur, var + 1, out);
    }
    cur[var] = 0;
}

/// Exact partial derivatives of the ADM fields at a point, as Taylor polys.
#[derive(Debug, Clone)]
pub struct JetPoint {
    pub base: Vec<f64>,
    pub order: usize,
    pub nvars: usize,
    pub lapse: Poly,
    pub shift: Vec<Poly>,
    /// packed upper triangle of ghat
    pub spatial: Vec<Poly>,
    pub potential: Poly,
}

impl JetPoint {
    fn dim_space(&self) -> usize {
        self.nvars - 1
    }

    fn spatial_poly(&self, a: usize, b: usize) -> &Poly {
        let d = self.dim_space();
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        &self.spatial[a * d - a * (a + 1) / 2 + b]
    }
}

/// Pointwise lapse-Wick-rotated metric, its inverse, and the volume density.
#[derive(Debug, Clone)]
pub struct ThetaMetric {
    pub theta: f64,
    pub components: Array2<C64>,
    pub inverse: Array2<C64>,
    pub density: f64,
}

/// Metric data as a real matrix for the Euclidean (+) / Lorentzian (-) ends.
fn signature_metric_at(adm: &AdmField, eps: f64, y: &[f64]) -> (Array2<f64>, Array2<f64>) {
    let d = adm.dim_space;
    let n = d + 1;
    let lapse = adm.lapse_at(y);
    let shift = adm.shift_at(y);
    let ghat = adm.spatial_at(y);
    let mut lower = Array2::zeros((n, n));
    let mut g00 = eps * lapse * lapse;
    for a in 0..d {
        for b in 0..d {
            g00 += ghat[[a, b]] * shift[a] * shift[b];
        }
    }
    lower[[0, 0]] = g00;
    for a in 0..d {
        let mut v = 0.0;
        for b in 0..d {
            v += ghat[[a, b]] * shift[b];
        }
        lower[[0, a + 1]] = v;
        lower[[a + 1, 0]] = v;
        for b in 0..d {
            lower[[a + 1, b + 1]] = ghat[[a, b]];
        }
    }
    let ghat_inv = invert_real(&ghat);
    let mut upper = Array2::zeros((n, n));
    let n2 = lapse * lapse;
    upper[[0, 0]] = 1.0 / (eps * n2);
    for a in 0..d {
        let v = -shift[a] / (eps * n2);
        upper[[0, a + 1]] = v;
        upper[[a + 1, 0]] = v;
        for b in 0..d {
            upper[[a + 1, b + 1]] = ghat_inv[[a, b]] + shift[a] * shift[b] / (eps * n2);
        }
    }
    (lower, upper)
}

fn invert_real(m: &Array2<f64>) -> Array2<f64> {
    let d = m.nrows();
    if d == 1 {
        let mut out = Array2::zeros((1, 1));
        out[[0, 0]] = 1.0 / m[[0, 0]];
        return out;
    }
    use ndarray_linalg::Inverse;
    m.inv().expect("spatial metric inversion")
}

/// Inverse ADM metrics `g_+^{mu nu}` (Euclidean) and `g_-^{mu nu}` (Lorentzian).
pub fn signature_inverses_at(adm: &AdmField, y: &[f64]) -> (Array2<f64>, Array2<f64>) {
    let (_, up_plus) = signature_metric_at(adm, 1.0, y);
    let (_, up_minus) = signature_metric_at(adm, -1.0, y);
    (up_plus, up_minus)
}

/// The theta-independent volume density `N sqrt(det ghat)`.
pub fn density_at(adm: &AdmField, y: &[f64]) -> f64 {
    let ghat = adm.spatial_at(y);
    let det = if adm.dim_space == 1 {
        ghat[[0, 0]]
    } else {
        use ndarray_linalg::Determinant;
        ghat.det().expect("ghat determinant")
    };
    adm.lapse_at(y) * det.sqrt()
}

/// Assemble `g^theta`, its inverse, and the volume density at a point.
pub fn build_theta_metric(adm: &AdmField, theta: f64, y: &[f64]) -> Result<ThetaMetric> {
    let d = adm.dim_space;
    let n = d + 1;
    let lapse = adm.lapse_at(y);
    if lapse <= 0.0 {
        return Err(WicklabError::InvalidGeometry(format!(
            "non-positive lapse at {:?}",
            y
        )));
    }
    let ghat = adm.spatial_at(y);
    let pd = if d == 1 {
        ghat[[0, 0]] > 0.0
    } else {
        ghat.eigh(UPLO::Lower)
            .map(|(w, _)| w.iter().all(|&x| x > 0.0))
            .unwrap_or(false)
    };
    if !pd {
        return Err(WicklabError::InvalidGeometry(format!(
            "spatial metric not positive-definite at {:?}",
            y
        )));
    }
    let eps = signature_factor(theta);
    let shift = adm.shift_at(y);
    let ghat_inv = invert_real(&ghat);

    let mut lower = Array2::from_elem((n, n), c(0.0));
    let mut g00 = eps * c(lapse * lapse);
    for a in 0..d {
        for b in 0..d {
            g00 += c(ghat[[a, b]] * shift[a] * shift[b]);
        }
    }
    lower[[0, 0]] = g00;
    for a in 0..d {
        let mut v = 0.0;
        for b in 0..d {
            v += ghat[[a, b]] * shift[b];
        }
        lower[[0, a + 1]] = c(v);
        lower[[a + 1, 0]] = c(v);
        for b in 0..d {
            lower[[a + 1, b + 1]] = c(ghat[[a, b]]);
        }
    }
    let mut upper = Array2::from_elem((n, n), c(0.0));
    let inv_eps_n2 = c(1.0) / (eps * c(lapse * lapse));
    upper[[0, 0]] = inv_eps_n2;
    for a in 0..d {
        let v = -c(shift[a]) * inv_eps_n2;
        upper[[0, a + 1]] = v;
        upper[[a + 1, 0]] = v;
        for b in 0..d {
            upper[[a + 1, b + 1]] =
                c(ghat_inv[[a, b]]) + c(shift[a] * shift[b]) * inv_eps_n2;
        }
    }
    Ok(ThetaMetric {
        theta,
        components: lower,
        inverse: upper,
        density: density_at(adm, y),
    })
}

/// Max componentwise deviation of
/// `i e^{-i theta} g_theta^{mu nu} - (sin(theta) g_+^{mu nu} + i cos(theta) g_-^{mu nu})`.
pub fn combination_identity_check(adm: &AdmField, theta: f64, y: &[f64]) -> Result<f64> {
    let tm = build_theta_metric(adm, theta, y)?;
    let (gp, gm) = signature_inverses_at(adm, y);
    let phase = C64::new(0.0, 1.0) * C64::new(0.0, -theta).exp();
    let mut max = 0.0f64;
    let n = adm.dim_total();
    for mu in 0..n {
        for nu in 0..n {
            let lhs = phase * tm.inverse[[mu, nu]];
            let rhs = c(theta.sin() * gp[[mu, nu]]) + C64::new(0.0, theta.cos()) * c(gm[[mu, nu]]);
            max = max.max((lhs - rhs).norm());
        }
    }
    Ok(max)
}

/// Taylor jets of the metric family at a point: everything downstream
/// (eikonal, transport, parametrix) consumes this.
#[derive(Debug, Clone)]
pub struct MetricJets {
    pub base: Vec<f64>,
    pub nvars: usize,
    pub eps: C64,
    pub max_deg: usize,
    /// g^theta_{mu nu} as Taylor polys
    pub lower: Vec<Vec<Poly>>,
    /// g_theta^{mu nu}
    pub upper: Vec<Vec<Poly>>,
    /// N sqrt(det ghat)
    pub density: Poly,
    pub density_inv: Poly,
    /// gamma^mu = |g|^{-1/2} d_nu(|g|^{1/2} g^{nu mu})
    pub gamma: Vec<Poly>,
    pub potential: Poly,
}

impl MetricJets {
    pub fn from_adm(adm: &AdmField, theta: f64, y: &[f64], max_deg: usize) -> Self {
        Self::from_jet(&adm.jet(y, max_deg), signature_factor(theta), max_deg)
    }

    /// `eps` parameterizes the family: `signature_factor(theta)` for g^theta,
    /// `+1` for g^+, `-1` for g^-.
    pub fn from_jet(jet: &JetPoint, eps: C64, max_deg: usize) -> Self {
        assert!(jet.order >= max_deg, "jet order too low for requested degree");
        let d = jet.dim_space();
        let n = jet.nvars;
        let lapse = &jet.lapse;
        let n2 = lapse.mul(lapse);

        // lower components
        let mut lower = vec![vec![Poly::zero(n, max_deg); n]; n];
        let mut g00 = n2.scale(eps);
        for a in 0..d {
            for b in 0..d {
                g00 = g00.add(
                    &jet.spatial_poly(a, b)
                        .mul(&jet.shift[a])
                        .mul(&jet.shift[b]),
                );
            }
        }
        lower[0][0] = g00;
        for a in 0..d {
            let mut v = Poly::zero(n, max_deg);
            for b in 0..d {
                v = v.add(&jet.spatial_poly(a, b).mul(&jet.shift[b]));
            }
            lower[0][a + 1] = v.clone();
            lower[a + 1][0] = v;
            for b in 0..d {
                lower[a + 1][b + 1] = jet.spatial_poly(a, b).clone();
            }
        }

        // inverse spatial metric (series Gauss-Jordan)
        let ghat: Vec<Vec<Poly>> = (0..d)
            .map(|a| (0..d).map(|b| jet.spatial_poly(a, b).clone()).collect())
            .collect();
        let ghat_inv = invert_poly_matrix(&ghat);

        let inv_eps_n2 = n2.scale(eps).inverse();
        let mut upper = vec![vec![Poly::zero(n, max_deg); n]; n];
        upper[0][0] = inv_eps_n2.clone();
        for a in 0..d {
            let v = jet.shift[a].mul(&inv_eps_n2).scale(c(-1.0));
            upper[0][a + 1] = v.clone();
            upper[a + 1][0] = v;
            for b in 0..d {
                upper[a + 1][b + 1] = ghat_inv[a][b]
                    .add(&jet.shift[a].mul(&jet.shift[b]).mul(&inv_eps_n2));
            }
        }

        // density N sqrt(det ghat); det via Leibniz (d is small)
        let det = poly_det(&ghat);
        let density = lapse.mul(&det.sqrt());
        let density_inv = density.inverse();

        let mut gamma = Vec::with_capacity(n);
        for mu in 0..n {
            let mut acc = Poly::zero(n, max_deg.saturating_sub(1));
            for nu in 0..n {
                acc = acc.add(&density.mul(&upper[nu][mu]).deriv(nu));
            }
            gamma.push(density_inv.mul(&acc));
        }

        MetricJets {
            base: jet.base.clone(),
            nvars: n,
            eps,
            max_deg,
            lower,
            upper,
            density,
            density_inv,
            gamma,
            potential: jet.potential.clone(),
        }
    }

    pub fn upper_at_base(&self) -> Array2<C64> {
        let n = self.nvars;
        let zero = vec![0u8; n];
        let mut m = Array2::from_elem((n, n), c(0.0));
        for mu in 0..n {
            for nu in 0..n {
                m[[mu, nu]] = self.upper[mu][nu].coeff(&zero);
            }
        }
        m
    }
}

fn poly_det(m: &[Vec<Poly>]) -> Poly {
    let d = m.len();
    match d {
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        _ => {
            // Laplace expansion along the first row
            let mut acc = Poly::zero(m[0][0].nvars, m[0][0].max_deg);
            for j in 0..d {
                let minor: Vec<Vec<Poly>> = (1..d)
                    .map(|r| {
                        (0..d)
                            .filter(|&cc| cc != j)
                            .map(|cc| m[r][cc].clone())
                            .collect()
                    })
                    .collect();
                let term = m[0][j].mul(&poly_det(&minor));
                acc = if j % 2 == 0 {
                    acc.add(&term)
                } else {
                    acc.sub(&term)
                };
            }
            acc
        }
    }
}

fn invert_poly_matrix(m: &[Vec<Poly>]) -> Vec<Vec<Poly>> {
    let d = m.len();
    if d == 1 {
        return vec![vec![m[0][0].inverse()]];
    }
    let nvars = m[0][0].nvars;
    let deg = m[0][0].max_deg;
    // Gauss-Jordan over the truncated series ring; ghat is positive-definite
    // at the base point so pivots have nonzero constant terms.
    let mut a: Vec<Vec<Poly>> = m.to_vec();
    let mut inv: Vec<Vec<Poly>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    Poly::constant(nvars, deg, if i == j { c(1.0) } else { c(0.0) })
                })
                .collect()
        })
        .collect();
    for p in 0..d {
        let piv = a[p][p].inverse();
        for j in 0..d {
            a[p][j] = a[p][j].mul(&piv);
            inv[p][j] = inv[p][j].mul(&piv);
        }
        for i in 0..d {
            if i == p {
                continue;
            }
            let f = a[i][p].clone();
            for j in 0..d {
                a[i][j] = a[i][j].sub(&f.mul(&a[p][j]));
                inv[i][j] = inv[i][j].sub(&f.mul(&inv[p][j]));
            }
        }
    }
    inv
}

/// `gamma^mu_theta = |g|^{-1/2} d_nu(|g|^{1/2} g_theta^{nu mu})` from exact jets.
pub fn gamma_vector(theta: f64, jet: &JetPoint) -> Result<Vec<C64>> {
    if jet.order < 1 {
        return Err(WicklabError::ContractViolation(
            "gamma_vector needs a jet of order >= 1".into(),
        ));
    }
    let mj = MetricJets::from_jet(jet, signature_factor(theta), jet.order.min(1));
    let zero = vec![0u8; jet.nvars];
    Ok(mj.gamma.iter().map(|g| g.coeff(&zero)).collect())
}

/// Second-order differential action `g^{mu nu} d_mu d_nu u + gamma^mu d_mu u`
/// at the base point, with `u` supplied as a Taylor jet.
fn laplacian_from_jets(mj: &MetricJets, u: &Poly) -> C64 {
    let n = mj.nvars;
    let zero = vec![0u8; n];
    let mut acc = c(0.0);
    for mu in 0..n {
        for nu in 0..n {
            let e = indices_to_exp(n, &[mu, nu]);
            // Taylor coefficient -> derivative: d_mu d_nu u = coeff * alpha!
            acc += mj.upper[mu][nu].coeff(&zero) * u.coeff(&e) * c(exp_factorial(&e));
        }
        let e = indices_to_exp(n, &[mu]);
        acc += mj.gamma[mu].coeff(&zero) * u.coeff(&e);
    }
    acc
}

/// `Delta_theta u(y)` for a test field given as a Taylor jet of order >= 2,
/// computed through the ADM decomposition `-sin(theta) D_+ - i cos(theta) D_-`
/// and cross-checked against `i e^{-i theta} (nabla_theta^2 - V) u`.
pub fn apply_delta_theta(adm: &AdmField, theta: f64, u: &Poly, y: &[f64]) -> Result<C64> {
    if u.max_deg < 2 {
        return Err(WicklabError::ContractViolation(
            "apply_delta_theta needs a field jet of order >= 2".into(),
        ));
    }
    let jet = adm.jet(y, 2);
    let v = adm.potential_at(y);
    let u0 = u.coeff(&vec![0u8; adm.dim_total()]);

    let mj_plus = MetricJets::from_jet(&jet, c(1.0), 1);
    let mj_minus = MetricJets::from_jet(&jet, c(-1.0), 1);
    let d_plus = -laplacian_from_jets(&mj_plus, u) + c(v) * u0;
    let d_minus = -laplacian_from_jets(&mj_minus, u) + c(v) * u0;
    let adm_route = -c(theta.sin()) * d_plus - C64::new(0.0, theta.cos()) * d_minus;

    let mj_theta = MetricJets::from_jet(&jet, signature_factor(theta), 1);
    let phase = C64::new(0.0, 1.0) * C64::new(0.0, -theta).exp();
    let gamma_route = phase * (laplacian_from_jets(&mj_theta, u) - c(v) * u0);

    let scale = adm_route.norm().max(gamma_route.norm()).max(1.0);
    if (adm_route - gamma_route).norm() > 1e-11 * scale {
        return Err(WicklabError::Internal(format!(
            "Delta_theta route mismatch: {} vs {}",
            adm_route, gamma_route
        )));
    }
    Ok(adm_route)
}

/// Complex-exponential test field `exp(i k . y)` as a Taylor jet at `y`.
pub fn plane_wave_jet(k: &[f64], y: &[f64], order: usize) -> Poly {
    let n = k.len();
    let mut p = Poly::zero(n, order);
    let phase: f64 = k.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let base = C64::new(0.0, phase).exp();
    let mut exps: Vec<Vec<u8>> = Vec::new();
    collect_exps(n, order, &mut vec![0u8; n], 0, &mut exps);
    for e in exps {
        let mut coeff = base;
        for (j, &kk) in e.iter().enumerate() {
            coeff *= C64::new(0.0, k[j]).powu(u32::from(kk));
        }
        p.set(e.clone(), coeff / c(exp_factorial(&e)));
    }
    p
}

/// Weighted max-deviation of `components * inverse` from the identity.
pub fn metric_inverse_deviation(tm: &ThetaMetric) -> f64 {
    let n = tm.components.nrows();
    let prod = tm.components.dot(&tm.inverse);
    let mut max = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { c(1.0) } else { c(0.0) };
            max = max.max((prod[[i, j]] - expect).norm());
        }
    }
    max
}

/// `det g^theta`, for the invariant `det g^theta = -e^{-2 i theta} N^2 det ghat`.
pub fn theta_metric_det(tm: &ThetaMetric) -> C64 {
    let n = tm.components.nrows();
    // LU-free determinant for the small sizes used here
    det_complex(&tm.components, n)
}

fn det_complex(m: &Array2<C64>, n: usize) -> C64 {
    match n {
        1 => m[[0, 0]],
        2 => m[[0, 0]] * m[[1, 1]] - m[[0, 1]] * m[[1, 0]],
        _ => {
            let mut acc = c(0.0);
            for j in 0..n {
                let mut minor = Array2::from_elem((n - 1, n - 1), c(0.0));
                for r in 1..n {
                    let mut cc = 0;
                    for col in 0..n {
                        if col == j {
                            continue;
                        }
                        minor[[r - 1, cc]] = m[[r, col]];
                        cc += 1;
                    }
                }
                let term = m[[0, j]] * det_complex(&minor, n - 1);
                acc += if j % 2 == 0 { term } else { -term };
            }
            acc
        }
    }
}

/// Dense positivity probe values used by reports: min lapse, min ghat eigenvalue.
pub fn positivity_margins(adm: &AdmField, samples: usize) -> (f64, f64) {
    let n = adm.dim_total();
    let mut min_lapse = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    let total = samples.pow(n as u32);
    let mut y = vec![0.0; n];
    for flat in 0..total {
        let mut rem = flat;
        for j in 0..n {
            let i = rem % samples;
            rem /= samples;
            y[j] = adm.periods[j] * (i as f64) / (samples as f64);
        }
        min_lapse = min_lapse.min(adm.lapse_at(&y));
        let g = adm.spatial_at(&y);
        let e = if adm.dim_space == 1 {
            g[[0, 0]]
        } else {
            g.eigh(UPLO::Lower)
                .map(|(w, _)| w.iter().cloned().fold(f64::INFINITY, f64::min))
                .unwrap_or(f64::NEG_INFINITY)
        };
        min_eig = min_eig.min(e);
    }
    (min_lapse, min_eig)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierSeries;
    use std::f64::consts::PI;

    fn curved_1p1() -> AdmField {
        let periods = [1.0, 1.0];
        let mut adm = AdmField::flat(1, &periods, 0.0);
        adm.lapse = FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.2, 0.0);
        adm.spatial_metric[0] =
            FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.3, 0.05);
        adm.potential =
            FourierSeries::constant(2, &periods, 0.1).with_mode(vec![0, 1], 0.05, 0.0);
        adm
    }

    fn curved_with_shift() -> AdmField {
        let mut adm = curved_1p1();
        adm.shift[0] =
            FourierSeries::constant(2, &[1.0, 1.0], 0.1).with_mode(vec![1, 1], 0.05, 0.02);
        adm
    }

    #[test]
    fn flat_theta_metric_is_diagonal() {
        let adm = AdmField::flat(2, &[1.0, 1.0, 1.0], 0.0);
        let th = 0.7;
        let tm = build_theta_metric(&adm, th, &[0.1, 0.2, 0.3]).unwrap();
        let want00 = -(C64::new(0.0, -2.0 * th)).exp();
        assert!((tm.components[[0, 0]] - want00).norm() < 1e-14);
        for i in 1..3 {
            assert!((tm.components[[i, i]] - c(1.0)).norm() < 1e-14);
            assert!((tm.components[[0, i]]).norm() < 1e-14);
        }
        // theta = pi/2 is the Euclidean metric
        let tm2 = build_theta_metric(&adm, PI / 2.0, &[0.0, 0.0, 0.0]).unwrap();
        assert!((tm2.components[[0, 0]] - c(1.0)).norm() < 1e-14);
        assert!(metric_inverse_deviation(&tm2) < 1e-12);
    }

    #[test]
    fn shift_example_components() {
        // N = 1, N^1 = c, ghat = 1, d = 1
        let periods = [1.0, 1.0];
        let mut adm = AdmField::flat(1, &periods, 0.0);
        let cc = 0.4;
        adm.shift[0] = FourierSeries::constant(2, &periods, cc);
        let th = 1.1;
        let tm = build_theta_metric(&adm, th, &[0.3, 0.6]).unwrap();
        let e = -(C64::new(0.0, -2.0 * th)).exp();
        assert!((tm.components[[0, 0]] - (e + c(cc * cc))).norm() < 1e-14);
        assert!((tm.components[[0, 1]] - c(cc)).norm() < 1e-14);
        assert!((tm.components[[1, 1]] - c(1.0)).norm() < 1e-14);
        assert!(metric_inverse_deviation(&tm) < 1e-12);
    }

    #[test]
    fn combination_identity_random_points() {
        let adm = curved_with_shift();
        adm.validate(1e-6).unwrap();
        // flat case, any theta
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        assert!(combination_identity_check(&flat, 0.9, &[0.2, 0.7]).unwrap() < 1e-14);
        // curved with shift, theta = pi/3, a spread of points
        for i in 0..100 {
            let y = [0.01 * f64::from(i), 0.37 + 0.003 * f64::from(i)];
            let dev = combination_identity_check(&adm, PI / 3.0, &y).unwrap();
            assert!(dev < 1e-12, "deviation {} at {:?}", dev, y);
        }
        // theta = pi/2 reduces to g_+
        let tm = build_theta_metric(&adm, PI / 2.0, &[0.1, 0.4]).unwrap();
        let (gp, _) = signature_inverses_at(&adm, &[0.1, 0.4]);
        for mu in 0..2 {
            for nu in 0..2 {
                assert!((tm.inverse[[mu, nu]] - c(gp[[mu, nu]])).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn involution_identity() {
        // g_-^{mu sigma} g^+_{sigma rho} g_-^{rho nu} = g_+^{mu nu}
        let adm = curved_with_shift();
        for y in [[0.0, 0.0], [0.13, 0.71], [0.52, 0.29]] {
            let (gp_up, gm_up) = signature_inverses_at(&adm, &y);
            let (gp_low, _) = signature_metric_at(&adm, 1.0, &y);
            let prod = gm_up.dot(&gp_low).dot(&gm_up);
            for mu in 0..2 {
                for nu in 0..2 {
                    assert!((prod[[mu, nu]] - gp_up[[mu, nu]]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn det_identity() {
        let adm = curved_with_shift();
        let y = [0.23, 0.61];
        let th = 0.8;
        let tm = build_theta_metric(&adm, th, &y).unwrap();
        let det = theta_metric_det(&tm);
        let n = adm.lapse_at(&y);
        let gh = adm.spatial_at(&y)[[0, 0]];
        let want = -(C64::new(0.0, -2.0 * th)).exp() * c(n * n * gh);
        assert!((det - want).norm() < 1e-13);
    }

    #[test]
    fn gamma_flat_and_fd_oracle() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let jet = flat.jet(&[0.1, 0.8], 2);
        let g = gamma_vector(0.77, &jet).unwrap();
        assert!(g.iter().all(|v| v.norm() < 1e-14));

        // theta = pi/2 on curved data is real
        let adm = curved_1p1();
        let jet = adm.jet(&[0.31, 0.12], 2);
        let gpi2 = gamma_vector(PI / 2.0, &jet).unwrap();
        assert!(gpi2.iter().all(|v| v.im.abs() < 1e-13));

        // finite-difference oracle for gamma on the 1+1 example
        let th = 1.05;
        let y = [0.31, 0.12];
        let g = gamma_vector(th, &adm.jet(&y, 2)).unwrap();
        let h = 1e-4;
        for mu in 0..2 {
            let mut fd = c(0.0);
            for nu in 0..2 {
                let f = |yy: &[f64]| {
                    let tm = build_theta_metric(&adm, th, yy).unwrap();
                    c(tm.density) * tm.inverse[[nu, mu]]
                };
                let mut yp = y.to_vec();
                let mut ym = y.to_vec();
                yp[nu] += h;
                ym[nu] -= h;
                fd += (f(&yp) - f(&ym)) / c(2.0 * h);
            }
            fd /= c(density_at(&adm, &y));
            assert!(
                (fd - g[mu]).norm() < 1e-6,
                "gamma fd mismatch {} vs {}",
                fd,
                g[mu]
            );
        }
    }

    #[test]
    fn delta_theta_plane_waves() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let y = [0.2, 0.5];
        // theta = pi/2, V = 0: Delta u = -(k0^2 + k^2) u
        let k = [2.0 * PI, 4.0 * PI];
        let u = plane_wave_jet(&k, &y, 3);
        let u0 = u.coeff(&[0, 0]);
        let got = apply_delta_theta(&flat, PI / 2.0, &u, &y).unwrap();
        let want = c(-(k[0] * k[0] + k[1] * k[1])) * u0;
        assert!((got - want).norm() < 1e-9 * want.norm());

        // theta = pi/4, k0 = 1, k = 0: lambda = e^{i 3 pi / 4}
        let u = plane_wave_jet(&[1.0, 0.0], &y, 2);
        let u0 = u.coeff(&[0, 0]);
        let got = apply_delta_theta(&flat, PI / 4.0, &u, &y).unwrap();
        let want = C64::from_polar(1.0, 3.0 * PI / 4.0) * u0;
        assert!((got - want).norm() < 1e-12);

        // constant field, V = 0 -> 0
        let konst = Poly::constant(2, 2, c(1.0));
        let got = apply_delta_theta(&flat, 0.9, &konst, &y).unwrap();
        assert!(got.norm() < 1e-14);
    }

    #[test]
    fn delta_theta_two_routes_curved() {
        let adm = curved_with_shift();
        let y = [0.41, 0.17];
        for th in [0.3, PI / 2.0, 2.4] {
            // the two-route agreement is asserted inside apply_delta_theta
            let u = plane_wave_jet(&[2.0 * PI, 2.0 * PI], &y, 3);
            apply_delta_theta(&adm, th, &u, &y).unwrap();
        }
    }

    #[test]
    fn jet_order_contract() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let u = Poly::constant(2, 1, c(1.0));
        assert!(apply_delta_theta(&flat, 1.0, &u, &[0.0, 0.0]).is_err());
        let jet0 = flat.jet(&[0.0, 0.0], 0);
        assert!(gamma_vector(1.0, &jet0).is_err());
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut adm = AdmField::flat(1, &[1.0, 1.0], 0.0);
        adm.lapse = FourierSeries::constant(2, &[1.0, 1.0], 0.2).with_mode(vec![0, 1], 0.5, 0.0);
        assert!(adm.validate(1e-6).is_err());
        let y = [0.0, 0.5]; // lapse = 0.2 + 0.5 cos(pi) < 0
        assert!(build_theta_metric(&adm, 1.0, &y).is_err());
    }
}
