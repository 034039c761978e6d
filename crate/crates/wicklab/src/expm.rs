//! Dense complex matrix exponential by scaling and squaring with a
//! Pade(13, 13) rational approximant. Reference evaluation for the
//! semigroup: near machine precision for moderate norms.

use ndarray::Array2;
use ndarray_linalg::{Factorize, Solve};
use num_complex::Complex64 as C64;

use crate::{Result, WicklabError};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Pade(13, 13) coefficients, exact integers (the common factor cancels in
/// the rational approximant).
const PADE_COEFFS: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest scaled 1-norm for which the order-13 approximant stays at
/// machine accuracy.
const THETA_13: f64 = 5.37;

fn one_norm(a: &Array2<C64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = (0..a.nrows()).map(|i| a[[i, j]].norm()).sum();
        worst = worst.max(s);
    }
    worst
}

fn pade13(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    let eye = Array2::from_diag_elem(n, c(1.0));
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let w1 = &a6 * c(PADE_COEFFS[13]) + &a4 * c(PADE_COEFFS[11]) + &a2 * c(PADE_COEFFS[9]);
    let w2 = w1.dot(&a6)
        + &a6 * c(PADE_COEFFS[7])
        + &a4 * c(PADE_COEFFS[5])
        + &a2 * c(PADE_COEFFS[3])
        + &eye * c(PADE_COEFFS[1]);
    let u = a.dot(&w2);

    let v1 = &a6 * c(PADE_COEFFS[12]) + &a4 * c(PADE_COEFFS[10]) + &a2 * c(PADE_COEFFS[8]);
    let v = v1.dot(&a6)
        + &a6 * c(PADE_COEFFS[6])
        + &a4 * c(PADE_COEFFS[4])
        + &a2 * c(PADE_COEFFS[2])
        + &eye * c(PADE_COEFFS[0]);

    let numerator = &v + &u;
    let denominator = &v - &u;
    let lu = denominator
        .factorize()
        .map_err(|e| WicklabError::LinearSolve(format!("exponential denominator: {e}")))?;
    let mut x = Array2::zeros((n, n));
    for j in 0..n {
        let col = lu
            .solve(&numerator.column(j).to_owned())
            .map_err(|e| WicklabError::LinearSolve(format!("exponential denominator: {e}")))?;
        x.column_mut(j).assign(&col);
    }
    Ok(x)
}

/// `exp(A)` for a square complex matrix.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(WicklabError::ContractViolation(format!(
            "exponential of a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    if n == 1 {
        return Ok(Array2::from_elem((1, 1), a[[0, 0]].exp()));
    }
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a * c(1.0 / (1u64 << s) as f64);
    let mut e = pade13(&scaled)?;
    for _ in 0..s {
        e = e.dot(&e);
    }
    Ok(e)
}
