//! Truncated multivariate polynomials (Taylor jets) with complex coefficients.
//!
//! Coefficients are keyed by exponent multi-index, so a symmetric tensor
//! coefficient table of order n never stores more than the distinct monomials.
//! All products truncate at `max_deg`; ordering is deterministic (BTreeMap).

use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

pub type Exp = Vec<u8>;

pub fn exp_degree(e: &[u8]) -> usize {
    e.iter().map(|&k| k as usize).sum()
}

/// Multinomial factor alpha! for an exponent vector.
pub fn exp_factorial(e: &[u8]) -> f64 {
    e.iter()
        .map(|&k| (1..=k as u64).product::<u64>() as f64)
        .product()
}

/// Canonical exponent vector for an index tuple, e.g. (0,1,0) -> [2,1] in 2 vars.
pub fn indices_to_exp(nvars: usize, indices: &[usize]) -> Exp {
    let mut e = vec![0u8; nvars];
    for &i in indices {
        e[i] += 1;
    }
    e
}

#[derive(Debug, Clone)]
pub struct Poly {
    pub nvars: usize,
    pub max_deg: usize,
    coeffs: BTreeMap<Exp, C64>,
}

impl Poly {
    pub fn zero(nvars: usize, max_deg: usize) -> Self {
        Poly { nvars, max_deg, coeffs: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, max_deg: usize, c: C64) -> Self {
        let mut p = Poly::zero(nvars, max_deg);
        p.set(vec![0; nvars], c);
        p
    }

    pub fn set(&mut self, e: Exp, c: C64) {
        debug_assert_eq!(e.len(), self.nvars);
        if exp_degree(&e) > self.max_deg {
            return;
        }
        if c == C64::new(0.0, 0.0) {
            self.coeffs.remove(&e);
        } else {
            self.coeffs.insert(e, c);
        }
    }

    pub fn add_to(&mut self, e: Exp, c: C64) {
        if exp_degree(&e) > self.max_deg {
            return;
        }
        let entry = self.coeffs.entry(e).or_insert(C64::new(0.0, 0.0));
        *entry += c;
    }

    pub fn coeff(&self, e: &[u8]) -> C64 {
        self.coeffs.get(e).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Exp, &C64)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|c| c.norm() == 0.0)
    }

    pub fn truncate(&self, deg: usize) -> Poly {
        let mut p = Poly::zero(self.nvars, deg);
        for (e, c) in &self.coeffs {
            if exp_degree(e) <= deg {
                p.set(e.clone(), *c);
            }
        }
        p
    }

    /// Keep only the terms of total degree exactly `deg`.
    pub fn homogeneous_part(&self, deg: usize) -> Poly {
        let mut p = Poly::zero(self.nvars, self.max_deg);
        for (e, c) in &self.coeffs {
            if exp_degree(e) == deg {
                p.set(e.clone(), *c);
            }
        }
        p
    }

    /// Smallest total degree with a coefficient above `tol` in modulus.
    pub fn min_degree(&self, tol: f64) -> Option<usize> {
        self.coeffs
            .iter()
            .filter(|(_, c)| c.norm() > tol)
            .map(|(e, _)| exp_degree(e))
            .min()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.max_deg = self.max_deg.min(other.max_deg);
        out.coeffs.retain(|e, _| exp_degree(e) <= out.max_deg);
        for (e, c) in &other.coeffs {
            out.add_to(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Poly {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= s;
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let deg = self.max_deg.min(other.max_deg);
        let mut out = Poly::zero(self.nvars, deg);
        for (ea, ca) in &self.coeffs {
            let da = exp_degree(ea);
            if da > deg {
                continue;
            }
            for (eb, cb) in &other.coeffs {
                if da + exp_degree(eb) > deg {
                    continue;
                }
                let e: Exp = ea.iter().zip(eb.iter()).map(|(a, b)| a + b).collect();
                out.add_to(e, ca * cb);
            }
        }
        out
    }

    /// Same coefficients under a new truncation cap. Binary ops truncate to
    /// the smaller cap of their operands; use this to restore the working
    /// degree after `deriv` lowers it.
    pub fn with_max_deg(&self, deg: usize) -> Poly {
        let mut out = self.truncate(deg);
        out.max_deg = deg;
        out
    }

    /// Substitute `Delta -> -Delta`: flips the sign of odd-degree terms.
    pub fn parity_flip(&self) -> Poly {
        let mut out = self.clone();
        for (e, c) in out.coeffs.iter_mut() {
            if exp_degree(e) % 2 == 1 {
                *c = -*c;
            }
        }
        out
    }

    /// Partial derivative with respect to variable `var`.
    pub fn deriv(&self, var: usize) -> Poly {
        let mut out = Poly::zero(self.nvars, self.max_deg.saturating_sub(1));
        for (e, c) in &self.coeffs {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.add_to(e2, c * C64::new(f64::from(e[var]), 0.0));
        }
        out
    }

    pub fn eval(&self, dy: &[f64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (e, c) in &self.coeffs {
            let mut term = *c;
            for (j, &k) in e.iter().enumerate() {
                term *= C64::new(dy[j], 0.0).powu(u32::from(k));
            }
            acc += term;
        }
        acc
    }

    /// Multiplicative inverse as a truncated power series; requires a nonzero
    /// constant term.
    pub fn inverse(&self) -> Poly {
        let c0 = self.coeff(&vec![0; self.nvars]);
        assert!(c0.norm() > 0.0, "series inverse needs nonzero constant term");
        // x_{k+1} = x_k (2 - p x_k), Newton iteration; doubles correct order.
        let mut x = Poly::constant(self.nvars, self.max_deg, C64::new(1.0, 0.0) / c0);
        let two = Poly::constant(self.nvars, self.max_deg, C64::new(2.0, 0.0));
        let mut order = 1;
        while order <= self.max_deg {
            let px = self.mul(&x);
            x = x.mul(&two.sub(&px));
            order *= 2;
        }
        x
    }

    /// Principal-branch square root as a truncated power series; requires a
    /// nonzero constant term.
    pub fn sqrt(&self) -> Poly {
        let c0 = self.coeff(&vec![0; self.nvars]);
        assert!(c0.norm() > 0.0, "series sqrt needs nonzero constant term");
        let s0 = c0.sqrt();
        let mut x = Poly::constant(self.nvars, self.max_deg, s0);
        // Newton: x <- (x + p/x)/2
        for _ in 0..(usize::BITS - self.max_deg.leading_zeros() + 1) {
            let px = self.mul(&x.inverse());
            x = x.add(&px).scale(C64::new(0.5, 0.0));
        }
        x
    }
}
