//! Order-by-order solution of the complex eikonal equation in coordinate
//! differences, producing the truncated Synge jet at a base point.
//!
//! The phase function obeys `sigma = (i/2) e^{-i theta} g^{mu nu}(y) d_mu
//! sigma d_nu sigma` with `sigma(y,y) = 0` and Hessian `-i e^{i theta}
//! g_{mu nu}` on the diagonal. Writing `sigma = -i e^{i theta} S` and
//! expanding `S` in `Delta y` about the base point turns the equation into
//! `S = (1/2) g^{mu nu}(base + Delta) d_mu S d_nu S`, a purely algebraic
//! recursion: at order m the unknown coefficient enters with the invertible
//! factor (1 - m), so forward substitution fixes everything.

use ndarray::Array2;
use ndarray_linalg::Eigh;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::geometry::{build_theta_metric, signature_factor, AdmField, JetPoint, MetricJets};
use crate::poly::{exp_degree, exp_factorial, indices_to_exp, Exp, Poly};
use crate::{Result, WicklabError};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Totally symmetric coefficient table `s_{mu_1 .. mu_n}(base)` for orders
/// `min_order..=max_order`, keyed by exponent multi-index (the canonical form
/// of a sorted index tuple).
#[derive(Debug, Clone)]
pub struct SymJet {
    pub base: Vec<f64>,
    pub theta: f64,
    pub min_order: usize,
    pub max_order: usize,
    coeffs: BTreeMap<Exp, C64>,
}

impl SymJet {
    pub fn nvars(&self) -> usize {
        self.base.len()
    }

    /// Tensor component for an index tuple in any order; storage is already
    /// symmetric so sorting is implicit in the exponent representation.
    pub fn coeff(&self, indices: &[usize]) -> C64 {
        let e = indices_to_exp(self.nvars(), indices);
        self.coeffs.get(&e).copied().unwrap_or(c(0.0))
    }

    pub fn coeff_by_exp(&self, e: &[u8]) -> C64 {
        self.coeffs.get(e).copied().unwrap_or(c(0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Exp, &C64)> {
        self.coeffs.iter()
    }

    /// `sigma(Delta y) = -i e^{i theta} sum_n (1/n!) s_{mu_1..mu_n}
    /// Delta^{mu_1}..Delta^{mu_n}` as a polynomial of degree `max_order`.
    /// Summing ordered index tuples collapses to `s_alpha Delta^alpha / alpha!`
    /// per exponent.
    pub fn sigma_poly(&self) -> Poly {
        let pref = -C64::new(0.0, 1.0) * C64::from_polar(1.0, self.theta);
        let mut p = Poly::zero(self.nvars(), self.max_order);
        for (e, s) in &self.coeffs {
            p.set(e.clone(), pref * s / c(exp_factorial(e)));
        }
        p
    }

    pub fn eval(&self, dy: &[f64]) -> C64 {
        self.sigma_poly().eval(dy)
    }

    /// CSV rows `index,re,im` with the index tuple rendered like `0;0;1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,re,im\n");
        for (e, s) in &self.coeffs {
            let mut idx = Vec::new();
            for (j, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    idx.push(j.to_string());
                }
            }
            let _ = writeln!(out, "{},{:.17e},{:.17e}", idx.join(";"), s.re, s.im);
        }
        out
    }
}

/// Solve the eikonal recursion from metric jets, returning `s` coefficients
/// for orders `2..=l_order-1`. The order-2 coefficient is exactly
/// `g^theta_{mu nu}(base)`.
pub fn solve_eikonal_jets(jet: &JetPoint, theta: f64, l_order: usize) -> Result<SymJet> {
    if l_order < 3 {
        return Err(WicklabError::ContractViolation(
            "solve_eikonal_jets needs L >= 3".into(),
        ));
    }
    if jet.order + 1 < l_order {
        return Err(WicklabError::ContractViolation(format!(
            "metric jet order {} too low for L = {}",
            jet.order, l_order
        )));
    }
    let deg = l_order - 1;
    let mj = MetricJets::from_jet(jet, signature_factor(theta), deg);
    let n = mj.nvars;

    // S = sum_m S_m, S_m homogeneous of degree m; the coefficients are the
    // base-point expansion with Delta = y - base, so the result is the
    // primed-point recursion of the series ansatz. Start with
    // S_2 = (1/2) g_{mu nu}(base) Delta^mu Delta^nu.
    let zero = vec![0u8; n];
    let mut s = Poly::zero(n, deg);
    for mu in 0..n {
        for nu in 0..n {
            let e = indices_to_exp(n, &[mu, nu]);
            s.add_to(e, mj.lower[mu][nu].coeff(&zero) * c(0.5));
        }
    }

    for m in 3..=deg {
        // F = S - (1/2) g^{mu nu}(base + Delta) dS dS, evaluated with the
        // order-m slot still empty; its degree-m part divided by (m - 1)
        // is the missing homogeneous piece.
        let grads: Vec<Poly> = (0..n).map(|mu| s.deriv(mu).with_max_deg(deg)).collect();
        let mut quad = Poly::zero(n, deg);
        for mu in 0..n {
            for nu in mu..n {
                let w = if mu == nu { 0.5 } else { 1.0 };
                quad = quad.add(&mj.upper[mu][nu].mul(&grads[mu]).mul(&grads[nu]).scale(c(w)));
            }
        }
        let f_m = s.sub(&quad).homogeneous_part(m);
        s = s.add(&f_m.scale(c(1.0 / (m as f64 - 1.0))));
    }

    // Base-point coefficients differ from the primed ones by the sign (-1)^n:
    // the truncated series is symmetric under swapping the two arguments to
    // this order, which sends Delta -> -Delta and moves the expansion point.
    let mut coeffs = BTreeMap::new();
    for (e, cc) in s.iter() {
        let m = exp_degree(e);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let v = cc * c(sign * exp_factorial(e));
        if v.norm() > 0.0 {
            coeffs.insert(e.clone(), v);
        }
    }
    Ok(SymJet {
        base: jet.base.clone(),
        theta,
        min_order: 2,
        max_order: deg,
        coeffs,
    })
}

/// Defect of the truncated phase at separation `Delta y`, evaluated exactly:
/// `E = sigma(Dy) - (i/2) e^{-i theta} g^{mu nu}(base - Dy) d sigma d sigma`
/// with the analytic inverse metric at the displaced point. The base point
/// plays the role of the second argument of the two-point defect, so `E`
/// vanishes to order `max_order + 1` in `|Dy|`.
pub fn eikonal_residual(sj: &SymJet, adm: &AdmField, dy: &[f64]) -> Result<C64> {
    let n = sj.nvars();
    if dy.len() != n {
        return Err(WicklabError::ContractViolation(
            "separation dimension mismatch".into(),
        ));
    }
    let sigma = sj.sigma_poly();
    let point: Vec<f64> = sj.base.iter().zip(dy).map(|(b, d)| b - d).collect();
    let tm = build_theta_metric(adm, sj.theta, &point)?;
    let val = sigma.eval(dy);
    let grads: Vec<C64> = (0..n).map(|mu| sigma.deriv(mu).eval(dy)).collect();
    let mut quad = c(0.0);
    for mu in 0..n {
        for nu in 0..n {
            quad += tm.inverse[[mu, nu]] * grads[mu] * grads[nu];
        }
    }
    let pref = C64::new(0.0, 0.5) * C64::from_polar(1.0, -sj.theta);
    Ok(val - pref * quad)
}

/// The defect as a truncated polynomial in `Delta y`; every coefficient
/// through degree `max_order` must vanish by construction.
pub fn eikonal_residual_poly(sj: &SymJet, jet: &JetPoint) -> Result<Poly> {
    let deg = sj.max_order;
    if jet.order < deg {
        return Err(WicklabError::ContractViolation(
            "metric jet order too low for residual polynomial".into(),
        ));
    }
    let mj = MetricJets::from_jet(jet, signature_factor(sj.theta), deg);
    let n = sj.nvars();
    let sigma = sj.sigma_poly();
    let grads: Vec<Poly> = (0..n).map(|mu| sigma.deriv(mu).with_max_deg(deg)).collect();
    let mut quad = Poly::zero(n, deg);
    for mu in 0..n {
        for nu in mu..n {
            let w = if mu == nu { 1.0 } else { 2.0 };
            // metric at base - Delta: parity flip of the base-point jet
            let g = mj.upper[mu][nu].parity_flip();
            quad = quad.add(&g.mul(&grads[mu]).mul(&grads[nu]).scale(c(w)));
        }
    }
    let pref = C64::new(0.0, 0.5) * C64::from_polar(1.0, -sj.theta);
    Ok(sigma.sub(&quad.scale(pref)))
}

/// Estimate the real-part cone constants: min/max of `Re sigma(Dy) / |Dy|^2`
/// over `|Dy| <= r` in seeded random directions. A nonpositive lower estimate
/// means the probe radius is too large or theta is too close to 0 or pi.
pub fn real_part_cone(sj: &SymJet, r: f64, ndirs: usize, seed: u64) -> Result<(f64, f64)> {
    let n = sj.nvars();
    let sigma = sj.sigma_poly();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_minus = f64::INFINITY;
    let mut c_plus = f64::NEG_INFINITY;
    for k in 0..ndirs {
        let mut dir = vec![0.0; n];
        if n == 2 {
            let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / ndirs as f64;
            dir[0] = phi.cos();
            dir[1] = phi.sin();
        } else {
            let mut norm = 0.0;
            for d in dir.iter_mut() {
                // Box-Muller normal deviate
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                *d = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                norm += *d * *d;
            }
            let norm = norm.sqrt();
            for d in dir.iter_mut() {
                *d /= norm;
            }
        }
        for frac in [0.25, 0.5, 0.75, 1.0] {
            let rho = frac * r;
            let dy: Vec<f64> = dir.iter().map(|d| d * rho).collect();
            let ratio = sigma.eval(&dy).re / (rho * rho);
            c_minus = c_minus.min(ratio);
            c_plus = c_plus.max(ratio);
        }
    }
    if c_minus <= 0.0 {
        return Err(WicklabError::ConeViolation(c_minus));
    }
    Ok((c_minus, c_plus))
}

/// Eigenvalue range of the quadratic form `(1/2) Re(-i e^{i theta} g^theta)`
/// at a point; the small-radius limit of the cone constants.
pub fn quadratic_cone_bounds(adm: &AdmField, theta: f64, y: &[f64]) -> Result<(f64, f64)> {
    let tm = build_theta_metric(adm, theta, y)?;
    let n = tm.components.nrows();
    let pref = -C64::new(0.0, 1.0) * C64::from_polar(1.0, theta);
    let mut b = Array2::<f64>::zeros((n, n));
    for mu in 0..n {
        for nu in 0..n {
            b[[mu, nu]] = 0.5 * (pref * tm.components[[mu, nu]]).re;
        }
    }
    let (vals, _) = b
        .eigh(ndarray_linalg::UPLO::Upper)
        .map_err(|e| WicklabError::LinearSolve(format!("cone form eigh: {e}")))?;
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
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
        adm.potential = FourierSeries::constant(2, &periods, 0.1).with_mode(vec![0, 1], 0.05, 0.0);
        adm
    }

    fn curved_with_shift() -> AdmField {
        let mut adm = curved_1p1();
        adm.shift[0] = FourierSeries::constant(2, &[1.0, 1.0], 0.1).with_mode(vec![1, 1], 0.05, 0.02);
        adm
    }

    #[test]
    fn flat_metric_is_exactly_quadratic() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let th = 0.9;
        let l = 8;
        let sj = solve_eikonal_jets(&flat.jet(&[0.2, 0.6], l - 1), th, l).unwrap();
        let e = signature_factor(th);
        assert!((sj.coeff(&[0, 0]) - e).norm() < 1e-15);
        assert!((sj.coeff(&[1, 1]) - c(1.0)).norm() < 1e-15);
        assert!(sj.coeff(&[0, 1]).norm() < 1e-15);
        for (exp, cc) in sj.iter() {
            if exp_degree(exp) >= 3 {
                assert!(cc.norm() < 1e-14, "order >= 3 coefficient {:?}", exp);
            }
        }
        // sigma = -(i/2) e^{i theta} g_{mu nu} Dy^mu Dy^nu, residual zero
        let dy = [0.3, -0.4];
        let want = c(-0.5) * C64::new(0.0, 1.0) * C64::from_polar(1.0, th)
            * (e * c(dy[0] * dy[0]) + c(dy[1] * dy[1]));
        assert!((sj.eval(&dy) - want).norm() < 1e-14);
        assert!(eikonal_residual(&sj, &flat, &dy).unwrap().norm() < 1e-14);
    }

    #[test]
    fn order_two_is_metric_and_residual_poly_vanishes() {
        let adm = curved_with_shift();
        let y = [0.37, 0.12];
        let th = PI / 3.0;
        let l = 8;
        let jet = adm.jet(&y, l - 1);
        let sj = solve_eikonal_jets(&jet, th, l).unwrap();
        let tm = build_theta_metric(&adm, th, &y).unwrap();
        for mu in 0..2 {
            for nu in 0..2 {
                assert!((sj.coeff(&[mu, nu]) - tm.components[[mu, nu]]).norm() < 1e-13);
            }
        }
        // every Taylor coefficient of the defect through degree L-1 vanishes
        let res = eikonal_residual_poly(&sj, &jet).unwrap();
        for (exp, cc) in res.iter() {
            assert!(cc.norm() < 1e-10, "defect coeff {:?} = {:.3e}", exp, cc.norm());
        }
        // residual at Dy = 0 is exactly zero
        assert_eq!(eikonal_residual(&sj, &adm, &[0.0, 0.0]).unwrap(), c(0.0));
    }

    #[test]
    fn residual_scales_at_truncation_order() {
        let adm = curved_with_shift();
        let th = PI / 4.0;
        let l = 8;
        let sj = solve_eikonal_jets(&adm.jet(&[0.41, 0.23], l - 1), th, l).unwrap();
        let dir = [0.6, -0.8];
        let mut pts = Vec::new();
        for k in 0..12 {
            let rho = 1e-1 * 0.7f64.powi(k);
            let dy = [dir[0] * rho, dir[1] * rho];
            let e = eikonal_residual(&sj, &adm, &dy).unwrap().norm();
            if e > 1e-300 {
                pts.push((rho.ln(), e.ln()));
            }
        }
        let slope = regression_slope(&pts);
        assert!(slope >= l as f64 - 0.5, "slope {}", slope);
    }

    #[test]
    fn theta_pi_half_coefficients_are_real() {
        let adm = curved_1p1();
        let sj = solve_eikonal_jets(&adm.jet(&[0.11, 0.73], 7), PI / 2.0, 8).unwrap();
        for (_, cc) in sj.iter() {
            assert!(cc.im.abs() < 1e-13);
        }
    }

    #[test]
    fn recursion_is_deterministic() {
        let adm = curved_with_shift();
        let jet = adm.jet(&[0.3, 0.9], 9);
        let a = solve_eikonal_jets(&jet, 0.8, 10).unwrap();
        let b = solve_eikonal_jets(&jet, 0.8, 10).unwrap();
        for (e, cc) in a.iter() {
            assert_eq!(*cc, b.coeff_by_exp(e));
        }
    }

    #[test]
    fn cone_flat_euclidean() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let sj = solve_eikonal_jets(&flat.jet(&[0.0, 0.0], 5), PI / 2.0, 6).unwrap();
        let (lo, hi) = real_part_cone(&sj, 0.1, 64, 7).unwrap();
        assert!((lo - 0.5).abs() < 1e-12);
        assert!((hi - 0.5).abs() < 1e-12);
        // quadratic-form oracle agrees
        let (qlo, qhi) = quadratic_cone_bounds(&flat, PI / 2.0, &[0.0, 0.0]).unwrap();
        assert!((qlo - 0.5).abs() < 1e-12 && (qhi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cone_flat_general_theta_matches_eigenvalues() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        for th in [0.3, 1.0, 2.5] {
            let sj = solve_eikonal_jets(&flat.jet(&[0.5, 0.5], 5), th, 6).unwrap();
            let (lo, hi) = real_part_cone(&sj, 0.05, 400, 1).unwrap();
            let (qlo, qhi) = quadratic_cone_bounds(&flat, th, &[0.5, 0.5]).unwrap();
            // direction sampling reaches the extremes to a few digits
            assert!((lo - qlo).abs() < 2e-4 * qlo.abs().max(1.0), "{} vs {}", lo, qlo);
            assert!((hi - qhi).abs() < 2e-4 * qhi.abs().max(1.0));
            // flat, theta: eigenvalues are sin(th)/2 doubled in x and the
            // rotated time form (1/2)Re(-i e^{i th}(-e^{-2i th})) = sin(th)/2
            assert!((qlo - 0.5 * th.sin()).abs() < 1e-12);
            assert!((qhi - 0.5 * th.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn cone_curved_small_radius_near_quadratic_form() {
        let adm = curved_with_shift();
        let y = [0.21, 0.67];
        let th = PI / 3.0;
        let sj = solve_eikonal_jets(&adm.jet(&y, 7), th, 8).unwrap();
        let (lo, _hi) = real_part_cone(&sj, 1e-3, 256, 3).unwrap();
        let (qlo, _) = quadratic_cone_bounds(&adm, th, &y).unwrap();
        assert!((lo - qlo).abs() < 0.1 * qlo, "cone {} vs form {}", lo, qlo);
    }

    #[test]
    fn cone_violation_reported_near_lorentzian() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        // theta = 0 is Lorentzian: Re(-i g^0) has a negative direction
        let sj = solve_eikonal_jets(&flat.jet(&[0.0, 0.0], 5), 0.0, 6).unwrap();
        assert!(matches!(
            real_part_cone(&sj, 0.1, 64, 11),
            Err(WicklabError::ConeViolation(_))
        ));
    }

    #[test]
    fn rejects_insufficient_jet() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        assert!(solve_eikonal_jets(&flat.jet(&[0.0, 0.0], 3), 1.0, 6).is_err());
        assert!(solve_eikonal_jets(&flat.jet(&[0.0, 0.0], 3), 1.0, 2).is_err());
    }

    #[test]
    fn csv_roundtrip_format() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let sj = solve_eikonal_jets(&flat.jet(&[0.0, 0.0], 3), PI / 2.0, 4).unwrap();
        let csv = sj.to_csv();
        assert!(csv.starts_with("index,re,im\n"));
        assert!(csv.contains("1;1,"));
    }

    pub(crate) fn regression_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }
}
