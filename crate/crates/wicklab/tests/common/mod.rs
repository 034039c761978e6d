//! Shared test oracles, written independently of the library internals.
//!
//! The Synge coefficient oracle evaluates the displayed low-order closed
//! forms (orders 2 to 4) directly from the foliation data, using exact
//! Fourier derivatives and explicit Leibniz expansion of the metric
//! component products.

#![allow(dead_code)]

use ndarray::Array2;
use ndarray_linalg::Inverse;
use num_complex::Complex64 as C64;
use wicklab::fourier::FourierSeries;
use wicklab::geometry::{signature_factor, AdmField};

/// A sum of terms `scalar * product of derived Fourier factors`.
#[derive(Clone)]
struct ProdSum {
    terms: Vec<(C64, Vec<(FourierSeries, Vec<usize>)>)>,
}

impl ProdSum {
    fn new() -> Self {
        ProdSum { terms: Vec::new() }
    }

    fn push(&mut self, scalar: C64, factors: &[&FourierSeries]) {
        let nvars = factors[0].nvars;
        self.terms.push((
            scalar,
            factors.iter().map(|f| ((*f).clone(), vec![0; nvars])).collect(),
        ));
    }

    /// Leibniz rule: distribute one more derivative over every factor.
    fn deriv(&self, var: usize) -> ProdSum {
        let mut out = ProdSum::new();
        for (s, factors) in &self.terms {
            for i in 0..factors.len() {
                let mut f = factors.clone();
                f[i].1[var] += 1;
                out.terms.push((*s, f));
            }
        }
        out
    }

    fn eval(&self, y: &[f64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (s, factors) in &self.terms {
            let mut prod = *s;
            for (f, orders) in factors {
                prod *= C64::new(f.deriv(orders, y), 0.0);
            }
            acc += prod;
        }
        acc
    }
}

/// Metric component `g^theta_{mu nu}` as a product-sum over the foliation
/// fields, assembled from the line element directly.
fn metric_component(adm: &AdmField, theta: f64, mu: usize, nu: usize) -> ProdSum {
    let d = adm.dim_space;
    let one = C64::new(1.0, 0.0);
    let mut ps = ProdSum::new();
    if mu == 0 && nu == 0 {
        ps.push(signature_factor(theta), &[&adm.lapse, &adm.lapse]);
        for a in 0..d {
            for b in 0..d {
                ps.push(one, &[adm.spatial_series(a, b), &adm.shift[a], &adm.shift[b]]);
            }
        }
    } else if mu == 0 || nu == 0 {
        let a = mu.max(nu) - 1;
        for b in 0..d {
            ps.push(one, &[adm.spatial_series(a, b), &adm.shift[b]]);
        }
    } else {
        ps.push(one, &[adm.spatial_series(mu - 1, nu - 1)]);
    }
    ps
}

/// `d_rho g^theta_{mu nu}(y)` evaluated exactly.
fn dg(adm: &AdmField, theta: f64, y: &[f64], rho: usize, mu: usize, nu: usize) -> C64 {
    metric_component(adm, theta, mu, nu).deriv(rho).eval(y)
}

fn ddg(
    adm: &AdmField,
    theta: f64,
    y: &[f64],
    rho: usize,
    sig: usize,
    mu: usize,
    nu: usize,
) -> C64 {
    metric_component(adm, theta, mu, nu).deriv(rho).deriv(sig).eval(y)
}

fn upper_metric(adm: &AdmField, theta: f64, y: &[f64]) -> Array2<C64> {
    let n = adm.dim_space + 1;
    let mut g = Array2::from_elem((n, n), C64::new(0.0, 0.0));
    for mu in 0..n {
        for nu in 0..n {
            g[[mu, nu]] = metric_component(adm, theta, mu, nu).eval(y);
        }
    }
    g.inv().expect("metric invertible at probe point")
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Closed-form Synge coefficient `s_{indices}(y)`, orders 2 to 4, from the
/// displayed differential polynomials, fully symmetrized.
pub fn synge_closed_form(adm: &AdmField, theta: f64, y: &[f64], indices: &[usize]) -> C64 {
    let n = indices.len();
    match n {
        2 => metric_component(adm, theta, indices[0], indices[1]).eval(y),
        3 => {
            let mut acc = C64::new(0.0, 0.0);
            for p in permutations(3) {
                let (m1, m2, m3) = (indices[p[0]], indices[p[1]], indices[p[2]]);
                acc += dg(adm, theta, y, m1, m2, m3);
            }
            acc * C64::new(-1.5 / 6.0, 0.0)
        }
        4 => {
            let gup = upper_metric(adm, theta, y);
            let nn = adm.dim_space + 1;
            let mut acc = C64::new(0.0, 0.0);
            for p in permutations(4) {
                let (m1, m2, m3, m4) =
                    (indices[p[0]], indices[p[1]], indices[p[2]], indices[p[3]]);
                let mut term = C64::new(2.0, 0.0) * ddg(adm, theta, y, m1, m2, m3, m4);
                for rho in 0..nn {
                    for sig in 0..nn {
                        let grs = gup[[rho, sig]];
                        term -= C64::new(0.25, 0.0)
                            * grs
                            * dg(adm, theta, y, rho, m1, m2)
                            * dg(adm, theta, y, sig, m3, m4);
                        term += grs
                            * dg(adm, theta, y, rho, m1, m2)
                            * dg(adm, theta, y, m3, sig, m4);
                        term -= grs
                            * dg(adm, theta, y, m1, rho, m2)
                            * dg(adm, theta, y, m3, sig, m4);
                    }
                }
                acc += term;
            }
            acc / C64::new(24.0, 0.0)
        }
        _ => panic!("closed forms available only for orders 2..=4"),
    }
}

/// The curved 1+1 example used across the test suites.
pub fn curved_1p1() -> AdmField {
    let periods = [1.0, 1.0];
    let mut adm = AdmField::flat(1, &periods, 0.0);
    adm.lapse = FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.2, 0.0);
    adm.spatial_metric[0] =
        FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.3, 0.05);
    adm.potential = FourierSeries::constant(2, &periods, 0.1).with_mode(vec![0, 1], 0.05, 0.0);
    adm
}

/// Variant with a nonvanishing shift, exercising the off-diagonal blocks.
pub fn curved_with_shift() -> AdmField {
    let mut adm = curved_1p1();
    adm.shift[0] = FourierSeries::constant(2, &[1.0, 1.0], 0.1).with_mode(vec![1, 1], 0.05, 0.02);
    adm
}

/// Least-squares slope of `y` against `x`.
pub fn regression_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Scalar curvature of the Euclidean member of the metric family, from the
/// textbook Christoffel formulas with exact derivatives. Convention: positive
/// for the round sphere.
pub fn scalar_curvature_plus(adm: &AdmField, y: &[f64]) -> f64 {
    let nn = adm.dim_space + 1;
    let th = std::f64::consts::FRAC_PI_2;
    let gup = upper_metric(adm, th, y);

    let mut dgl = vec![vec![vec![C64::new(0.0, 0.0); nn]; nn]; nn];
    let mut ddgl = vec![vec![vec![vec![C64::new(0.0, 0.0); nn]; nn]; nn]; nn];
    for k in 0..nn {
        for m in 0..nn {
            for n in 0..nn {
                dgl[k][m][n] = dg(adm, th, y, k, m, n);
                for l in 0..nn {
                    ddgl[k][l][m][n] = ddg(adm, th, y, k, l, m, n);
                }
            }
        }
    }
    let mut dgup = vec![vec![vec![C64::new(0.0, 0.0); nn]; nn]; nn];
    for k in 0..nn {
        for l in 0..nn {
            for r in 0..nn {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..nn {
                    for b in 0..nn {
                        acc -= gup[[l, a]] * dgl[k][a][b] * gup[[b, r]];
                    }
                }
                dgup[k][l][r] = acc;
            }
        }
    }
    let mut gam = vec![vec![vec![C64::new(0.0, 0.0); nn]; nn]; nn];
    for l in 0..nn {
        for m in 0..nn {
            for n in 0..nn {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..nn {
                    acc += gup[[l, r]] * (dgl[m][r][n] + dgl[n][r][m] - dgl[r][m][n]);
                }
                gam[l][m][n] = acc * C64::new(0.5, 0.0);
            }
        }
    }
    let mut dgam = vec![vec![vec![vec![C64::new(0.0, 0.0); nn]; nn]; nn]; nn];
    for k in 0..nn {
        for l in 0..nn {
            for m in 0..nn {
                for n in 0..nn {
                    let mut acc = C64::new(0.0, 0.0);
                    for r in 0..nn {
                        acc += dgup[k][l][r] * (dgl[m][r][n] + dgl[n][r][m] - dgl[r][m][n]);
                        acc += gup[[l, r]]
                            * (ddgl[k][m][r][n] + ddgl[k][n][r][m] - ddgl[k][r][m][n]);
                    }
                    dgam[k][l][m][n] = acc * C64::new(0.5, 0.0);
                }
            }
        }
    }

    let mut r_scalar = C64::new(0.0, 0.0);
    for m in 0..nn {
        for n in 0..nn {
            let mut ric = C64::new(0.0, 0.0);
            for l in 0..nn {
                ric += dgam[l][l][m][n] - dgam[n][l][m][l];
                for r in 0..nn {
                    ric += gam[l][l][r] * gam[r][m][n] - gam[l][n][r] * gam[r][m][l];
                }
            }
            r_scalar += gup[[m, n]] * ric;
        }
    }
    assert!(r_scalar.im.abs() < 1e-10);
    r_scalar.re
}
