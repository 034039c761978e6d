//! Real truncated Fourier series on a torus, with exact derivatives of any order.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// One Fourier mode: amplitude pair for cos / sin of `2*pi * k . (y / L)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierMode {
    pub wave: Vec<i32>,
    pub cos_amp: f64,
    #[serde(default)]
    pub sin_amp: f64,
}

/// A finite real Fourier series in `nvars` periodic variables.
///
/// The value is `constant + sum_m [a_m cos(phi_m) + b_m sin(phi_m)]` with
/// `phi_m = 2*pi * sum_j k_{m,j} y_j / L_j`. All partial derivatives are exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierSeries {
    pub nvars: usize,
    pub periods: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub modes: Vec<FourierMode>,
}

impl FourierSeries {
    pub fn constant(nvars: usize, periods: &[f64], value: f64) -> Self {
        assert_eq!(periods.len(), nvars);
        FourierSeries {
            nvars,
            periods: periods.to_vec(),
            constant: value,
            modes: Vec::new(),
        }
    }

    pub fn with_mode(mut self, wave: Vec<i32>, cos_amp: f64, sin_amp: f64) -> Self {
        assert_eq!(wave.len(), self.nvars);
        self.modes.push(FourierMode { wave, cos_amp, sin_amp });
        self
    }

    pub fn is_constant(&self) -> bool {
        self.modes.iter().all(|m| m.cos_amp == 0.0 && m.sin_amp == 0.0)
    }

    /// True if no mode has a nonzero wave-vector component along variable `j`.
    pub fn independent_of(&self, j: usize) -> bool {
        self.modes
            .iter()
            .all(|m| m.wave[j] == 0 || (m.cos_amp == 0.0 && m.sin_amp == 0.0))
    }

    /// Largest |k_j| over modes, per variable. Used for grid resolution checks.
    pub fn max_mode(&self) -> Vec<i32> {
        let mut out = vec![0; self.nvars];
        for m in &self.modes {
            for (j, k) in m.wave.iter().enumerate() {
                out[j] = out[j].max(k.abs());
            }
        }
        out
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.deriv(&vec![0; self.nvars], y)
    }

    /// Exact partial derivative `d^|orders| f / dy^orders` at `y`.
    ///
    /// Each mode is `Re[(a - i b) e^{i phi}]`; differentiating along `y_j`
    /// multiplies by `i * 2*pi*k_j/L_j`.
    pub fn deriv(&self, orders: &[usize], y: &[f64]) -> f64 {
        assert_eq!(orders.len(), self.nvars);
        let total: usize = orders.iter().sum();
        let mut acc = if total == 0 { self.constant } else { 0.0 };
        for m in &self.modes {
            let mut phi = 0.0;
            let mut factor = C64::new(m.cos_amp, -m.sin_amp);
            let mut dead = false;
            for j in 0..self.nvars {
                let w = 2.0 * std::f64::consts::PI * f64::from(m.wave[j]) / self.periods[j];
                phi += w * y[j];
                if orders[j] > 0 {
                    if w == 0.0 {
                        dead = true;
                        break;
                    }
                    factor *= C64::new(0.0, w).powu(orders[j] as u32);
                }
            }
            if !dead {
                acc += (factor * C64::from_polar(1.0, phi)).re;
            }
        }
        acc
    }
}
