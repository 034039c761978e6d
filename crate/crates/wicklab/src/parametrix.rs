//! Local parametrix evaluation: the Gaussian-weighted truncated series built
//! from the Synge jet and the transport coefficients, its exact heat
//! residual, and the predicted diagonal small-time series.

use num_complex::Complex64 as C64;

use crate::eikonal::solve_eikonal_jets;
use crate::geometry::{build_theta_metric, gamma_vector, AdmField};
use crate::poly::Poly;
use crate::transport::{expand_transport_operator, solve_transport};
use crate::{Result, WicklabError};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn ie_mth(theta: f64) -> C64 {
    C64::new(0.0, 1.0) * C64::from_polar(1.0, -theta)
}

/// One evaluation of the parametrix.
#[derive(Debug, Clone)]
pub struct ParametrixEval {
    pub theta: f64,
    pub n_order: usize,
    pub zeta: C64,
    pub value: C64,
    pub prefactor: C64,
    pub phase: C64,
}

/// Parametrix data with the second argument frozen at `base`: the phase and
/// coefficient polynomials in `Delta y = y - base`, evaluable at any
/// admissible `zeta` and first argument.
#[derive(Debug, Clone)]
pub struct LocalParametrix {
    pub base: Vec<f64>,
    pub theta: f64,
    pub n_order: usize,
    pub dim_space: usize,
    /// `s_theta(y, base)` as a polynomial in `Delta y` (prefactor included)
    phase: Poly,
    a_polys: Vec<Poly>,
    cutoff: Option<f64>,
}

impl LocalParametrix {
    pub fn new(adm: &AdmField, theta: f64, n_order: usize, base: &[f64]) -> Result<Self> {
        let l = 2 * n_order + 8;
        let jet = adm.jet(base, l);
        let sj = solve_eikonal_jets(&jet, theta, l)?;
        let lop = expand_transport_operator(&jet, &sj, theta)?;
        let ts = solve_transport(&lop, &jet, theta, n_order)?;
        Ok(LocalParametrix {
            base: base.to_vec(),
            theta,
            n_order,
            dim_space: adm.dim_space,
            phase: sj.sigma_poly().parity_flip(),
            a_polys: ts.a_polys,
            cutoff: None,
        })
    }

    /// Multiply evaluations by a smooth bump vanishing for `|Delta y| >= r`.
    pub fn with_cutoff(mut self, r: f64) -> Self {
        self.cutoff = Some(r);
        self
    }

    fn bump(&self, sep: f64) -> f64 {
        match self.cutoff {
            None => 1.0,
            Some(r) => {
                // 1 on [0, r/2], 0 beyond r, smooth in between
                let t = sep / r;
                if t <= 0.5 {
                    1.0
                } else if t >= 1.0 {
                    0.0
                } else {
                    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
                    let a = f(2.0 - 2.0 * t);
                    a / (a + f(2.0 * t - 1.0))
                }
            }
        }
    }

    /// `(-i e^{i theta})^{(d-1)/2} / (4 pi zeta)^{(d+1)/2}`, principal branch.
    pub fn prefactor(&self, zeta: C64) -> C64 {
        let d = self.dim_space as f64;
        let top = (-C64::new(0.0, 1.0) * C64::from_polar(1.0, self.theta)).powf((d - 1.0) / 2.0);
        top / (c(4.0 * std::f64::consts::PI) * zeta).powf((d + 1.0) / 2.0)
    }

    fn check_zeta(&self, zeta: C64) -> Result<()> {
        let wedge = self.theta.min(std::f64::consts::PI - self.theta);
        if zeta.norm() == 0.0 || zeta.arg().abs() >= wedge {
            return Err(WicklabError::ContractViolation(format!(
                "zeta = {zeta} outside the open wedge |Arg| < {wedge:.3}"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, zeta: C64, y: &[f64]) -> Result<ParametrixEval> {
        self.check_zeta(zeta)?;
        let dy: Vec<f64> = y.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let s = self.phase.eval(&dy);
        let sep = dy.iter().map(|d| d * d).sum::<f64>().sqrt();
        if s.re < 0.0 {
            return Err(WicklabError::OutsideCone { re_s: s.re, sep });
        }
        let pref = self.prefactor(zeta);
        let mut series = c(0.0);
        let zt = ie_mth(self.theta) * zeta;
        let mut zp = c(1.0);
        for a in &self.a_polys {
            series += a.eval(&dy) * zp;
            zp *= zt;
        }
        let value = pref * (-s / (c(2.0) * zeta)).exp() * series * c(self.bump(sep));
        Ok(ParametrixEval {
            theta: self.theta,
            n_order: self.n_order,
            zeta,
            value,
            prefactor: pref,
            phase: s,
        })
    }

    /// Analytic `d/d zeta` of the evaluation (cutoff ignored).
    pub fn zeta_derivative(&self, zeta: C64, y: &[f64]) -> Result<C64> {
        self.check_zeta(zeta)?;
        let dy: Vec<f64> = y.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let s = self.phase.eval(&dy);
        let pref = self.prefactor(zeta);
        let gauss = (-s / (c(2.0) * zeta)).exp();
        let zt = ie_mth(self.theta);
        let mut series = c(0.0);
        let mut dseries = c(0.0);
        for (n, a) in self.a_polys.iter().enumerate() {
            let an = a.eval(&dy) * zt.powu(n as u32);
            series += an * zeta.powu(n as u32);
            if n > 0 {
                dseries += an * c(n as f64) * zeta.powu(n as u32 - 1);
            }
        }
        let d1 = (self.dim_space + 1) as f64;
        let log_deriv = -c(d1) / (c(2.0) * zeta) + s / (c(2.0) * zeta * zeta);
        Ok(pref * gauss * (log_deriv * series + dseries))
    }

    /// Exact heat residual `(d_zeta - Delta_theta in y) F_zeta(y, base)`:
    /// polynomial derivatives of phase and coefficients, analytic metric data
    /// at `y`. The cutoff is ignored.
    pub fn heat_residual(&self, adm: &AdmField, zeta: C64, y: &[f64]) -> Result<C64> {
        self.check_zeta(zeta)?;
        let n = self.base.len();
        let dy: Vec<f64> = y.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let s = self.phase.eval(&dy);
        let ds: Vec<C64> = (0..n).map(|mu| self.phase.deriv(mu).eval(&dy)).collect();
        let zt = ie_mth(self.theta);

        let mut p = c(0.0);
        let mut dp = vec![c(0.0); n];
        let mut ddp = vec![vec![c(0.0); n]; n];
        for (k, a) in self.a_polys.iter().enumerate() {
            let zk = zt.powu(k as u32) * zeta.powu(k as u32);
            p += a.eval(&dy) * zk;
            for mu in 0..n {
                let da = a.deriv(mu);
                dp[mu] += da.eval(&dy) * zk;
                for nu in mu..n {
                    let v = da.deriv(nu).eval(&dy) * zk;
                    ddp[mu][nu] += v;
                    if nu != mu {
                        ddp[nu][mu] += v;
                    }
                }
            }
        }

        let pref = self.prefactor(zeta);
        let gauss = (-s / (c(2.0) * zeta)).exp();
        let two_zeta = c(2.0) * zeta;

        // first and second y-derivatives of F
        let mut df = vec![c(0.0); n];
        for mu in 0..n {
            df[mu] = pref * gauss * (-ds[mu] / two_zeta * p + dp[mu]);
        }
        let mut ddf = vec![vec![c(0.0); n]; n];
        for mu in 0..n {
            for nu in 0..n {
                let dds = {
                    let mut e = self.phase.deriv(mu).deriv(nu);
                    e.max_deg = self.phase.max_deg;
                    e.eval(&dy)
                };
                ddf[mu][nu] = pref
                    * gauss
                    * ((-dds / two_zeta + ds[mu] * ds[nu] / (two_zeta * two_zeta)) * p
                        - ds[mu] / two_zeta * dp[nu]
                        - ds[nu] / two_zeta * dp[mu]
                        + ddp[mu][nu]);
            }
        }

        let tm = build_theta_metric(adm, self.theta, y)?;
        let gamma = gamma_vector(self.theta, &adm.jet(y, 2))?;
        let v = adm.potential_at(y);
        let f = pref * gauss * p;
        let mut lap = c(0.0);
        for mu in 0..n {
            for nu in 0..n {
                lap += tm.inverse[[mu, nu]] * ddf[mu][nu];
            }
            lap += gamma[mu] * df[mu];
        }
        let delta_f = zt * (lap - c(v) * f);
        let dzeta_f = self.zeta_derivative(zeta, y)?;
        Ok(dzeta_f - delta_f)
    }

    /// Coefficients of `(4 pi zeta)^{(d+1)/2} K(y,y)` in powers of `zeta`:
    /// `(-i e^{i theta})^{(d-1)/2} A_n(y) (i e^{-i theta})^n`.
    pub fn diagonal_series(&self) -> Vec<C64> {
        let d = self.dim_space as f64;
        let top = (-C64::new(0.0, 1.0) * C64::from_polar(1.0, self.theta)).powf((d - 1.0) / 2.0);
        let zt = ie_mth(self.theta);
        let zero = vec![0u8; self.base.len()];
        self.a_polys
            .iter()
            .enumerate()
            .map(|(k, a)| top * a.coeff(&zero) * zt.powu(k as u32))
            .collect()
    }
}

/// Single-shot evaluation `F_zeta(y, yp)` with tables based at `yp`.
pub fn eval_parametrix(
    adm: &AdmField,
    theta: f64,
    n_order: usize,
    zeta: C64,
    y: &[f64],
    yp: &[f64],
) -> Result<C64> {
    Ok(LocalParametrix::new(adm, theta, n_order, yp)?.eval(zeta, y)?.value)
}

pub fn heat_residual(
    adm: &AdmField,
    theta: f64,
    n_order: usize,
    zeta: C64,
    y: &[f64],
    yp: &[f64],
) -> Result<C64> {
    LocalParametrix::new(adm, theta, n_order, yp)?.heat_residual(adm, zeta, y)
}

pub fn predicted_diagonal_series(
    adm: &AdmField,
    theta: f64,
    n_order: usize,
    y: &[f64],
) -> Result<Vec<C64>> {
    Ok(LocalParametrix::new(adm, theta, n_order, y)?.diagonal_series())
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

    #[test]
    fn flat_euclidean_gaussian() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let y0 = [0.5, 0.5];
        let lp = LocalParametrix::new(&flat, PI / 2.0, 2, &y0).unwrap();
        for zeta in [0.01, 0.1] {
            let diag = lp.eval(c(zeta), &y0).unwrap().value;
            let want = 1.0 / (4.0 * PI * zeta);
            assert!((diag - c(want)).norm() < 1e-13 * want);
            let y = [0.53, 0.46];
            let r2 = (y[0] - y0[0]).powi(2) + (y[1] - y0[1]).powi(2);
            let off = lp.eval(c(zeta), &y).unwrap().value;
            let want = (-r2 / (4.0 * zeta)).exp() / (4.0 * PI * zeta);
            assert!((off - c(want)).norm() < 1e-12 * want);
        }
    }

    #[test]
    fn flat_constant_potential_truncated_exponential() {
        let v0 = 0.6;
        let flat0 = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let flatv = AdmField::flat(1, &[1.0, 1.0], v0);
        let y0 = [0.2, 0.7];
        let n_order = 3;
        for th in [0.6, PI / 2.0, 2.2] {
            let free = LocalParametrix::new(&flat0, th, n_order, &y0).unwrap();
            let with_v = LocalParametrix::new(&flatv, th, n_order, &y0).unwrap();
            let mut errs = Vec::new();
            for zeta in [0.02, 0.01, 0.005] {
                let ratio = with_v.eval(c(zeta), &y0).unwrap().value
                    / free.eval(c(zeta), &y0).unwrap().value;
                let exact = (-ie_mth(th) * c(v0 * zeta)).exp();
                errs.push(((ratio - exact).norm(), zeta));
            }
            // remainder of the truncated exponential is O(zeta^{N+1})
            for w in errs.windows(2) {
                let (e1, z1) = w[0];
                let (e2, z2) = w[1];
                let slope = (e1 / e2).ln() / (z1 / z2).ln();
                assert!(slope > n_order as f64 + 0.5, "slope {}", slope);
            }
        }
    }

    #[test]
    fn flat_residual_vanishes() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let lp = LocalParametrix::new(&flat, 0.9, 2, &[0.5, 0.5]).unwrap();
        for y in [[0.5, 0.5], [0.55, 0.42], [0.7, 0.6]] {
            let r = lp.heat_residual(&flat, c(0.05), &y).unwrap();
            let scale = lp.eval(c(0.05), &y).unwrap().value.norm();
            assert!(r.norm() < 1e-12 * scale.max(1.0), "residual {}", r);
        }
    }

    #[test]
    fn zeta_derivative_matches_finite_difference() {
        let adm = curved_1p1();
        let lp = LocalParametrix::new(&adm, PI / 3.0, 1, &[0.3, 0.6]).unwrap();
        let y = [0.33, 0.57];
        let zeta = 0.04;
        let h = 1e-6;
        let fd = (lp.eval(c(zeta + h), &y).unwrap().value - lp.eval(c(zeta - h), &y).unwrap().value)
            / c(2.0 * h);
        let an = lp.zeta_derivative(c(zeta), &y).unwrap();
        assert!((fd - an).norm() < 1e-9 * an.norm().max(1.0), "{} vs {}", fd, an);
    }

    #[test]
    fn residual_scaling_in_zeta() {
        let adm = curved_1p1();
        let n_order = 1;
        let th = PI / 3.0;
        let y0 = [0.3, 0.6];
        let lp = LocalParametrix::new(&adm, th, n_order, &y0).unwrap();
        // fixed rescaled separation Delta y = sqrt(zeta) z
        let z = [0.6, -0.4];
        let mut pts = Vec::new();
        for k in 0..8 {
            let zeta = 1e-2 * 0.5f64.powi(k);
            let y = [y0[0] + zeta.sqrt() * z[0], y0[1] + zeta.sqrt() * z[1]];
            let r = lp.heat_residual(&adm, c(zeta), &y).unwrap().norm();
            pts.push((zeta.ln(), r.ln()));
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let predicted = n_order as f64 - (adm.dim_space as f64 + 1.0) / 2.0;
        assert!(
            (slope - predicted).abs() <= 0.5,
            "slope {} predicted {}",
            slope,
            predicted
        );
    }

    #[test]
    fn diagonal_series_flat_and_potential() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let s = predicted_diagonal_series(&flat, PI / 2.0, 2, &[0.1, 0.1]).unwrap();
        assert!((s[0] - c(1.0)).norm() < 1e-14);
        assert!(s[1].norm() < 1e-13 && s[2].norm() < 1e-13);

        let v0 = 0.45;
        let flatv = AdmField::flat(1, &[1.0, 1.0], v0);
        let th = 0.8;
        let s = predicted_diagonal_series(&flatv, th, 3, &[0.4, 0.9]).unwrap();
        let mut fact = 1.0;
        for (n, got) in s.iter().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            let want = c((-v0).powi(n as i32) / fact) * ie_mth(th).powu(n as u32);
            assert!((got - want).norm() < 1e-12, "n = {}", n);
        }
    }

    #[test]
    fn cone_error_outside_taylor_domain() {
        // strong curvature: the real part of the phase goes negative at
        // large separation, which the evaluator must refuse
        let periods = [1.0, 1.0];
        let mut adm = AdmField::flat(1, &periods, 0.0);
        adm.lapse = FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.5, 0.0);
        adm.spatial_metric[0] =
            FourierSeries::constant(2, &periods, 1.0).with_mode(vec![0, 1], 0.8, 0.0);
        adm.shift[0] = FourierSeries::constant(2, &periods, 0.3).with_mode(vec![1, 1], 0.2, 0.0);
        let lp = LocalParametrix::new(&adm, 0.5, 1, &[0.13, 0.0]).unwrap();
        match lp.eval(c(0.05), &[0.13 - 0.8, -0.8]) {
            Err(crate::WicklabError::OutsideCone { re_s, sep }) => {
                assert!(re_s < 0.0 && sep > 1.0);
            }
            other => panic!("expected cone error, got {:?}", other.map(|e| e.value)),
        }
        // near the base the same table evaluates fine
        assert!(lp.eval(c(0.05), &[0.18, 0.04]).is_ok());
    }

    #[test]
    fn wedge_and_cutoff() {
        let flat = AdmField::flat(1, &[1.0, 1.0], 0.0);
        let lp = LocalParametrix::new(&flat, PI / 4.0, 1, &[0.5, 0.5]).unwrap();
        // |Arg zeta| beyond theta is rejected
        assert!(lp.eval(C64::from_polar(0.1, PI / 3.0), &[0.5, 0.5]).is_err());
        assert!(lp.eval(C64::from_polar(0.1, PI / 5.0), &[0.5, 0.5]).is_ok());
        // cutoff kills far separations and is inert near the diagonal
        let lpc = LocalParametrix::new(&flat, PI / 2.0, 1, &[0.5, 0.5])
            .unwrap()
            .with_cutoff(0.2);
        let near = lpc.eval(c(0.05), &[0.52, 0.5]).unwrap().value;
        let bare = LocalParametrix::new(&flat, PI / 2.0, 1, &[0.5, 0.5])
            .unwrap()
            .eval(c(0.05), &[0.52, 0.5])
            .unwrap()
            .value;
        assert!((near - bare).norm() < 1e-14);
        let far = lpc.eval(c(0.05), &[0.75, 0.5]).unwrap().value;
        assert_eq!(far, c(0.0));
    }
}
