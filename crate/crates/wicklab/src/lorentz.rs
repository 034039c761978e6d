//! The theta -> 0+ limit probes: the unitary Schrodinger group generated by
//! the Hermitian lattice member, and finite-rank trace gaps quantifying the
//! weak-star convergence of the analytic semigroup toward it.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::expm::expm;
use crate::geometry::AdmField;
use crate::lattice::{assemble_delta_theta, LatticeOperator, OperatorKind, TorusGrid};
use crate::{Result, WicklabError};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `exp(i s A) psi` for the Hermitian Lorentzian member `A`, through the
/// eigendecomposition of the weighted similarity `W^{1/2} A W^{-1/2}`. The
/// forward branch of the family limit is `s > 0`; the mirror (`pi - theta`)
/// branch is the same group at `-s`.
pub fn schrodinger_group(op: &LatticeOperator, s: f64, psi: &[C64]) -> Result<Vec<C64>> {
    if op.kind != OperatorKind::Lorentzian {
        return Err(WicklabError::ContractViolation(
            "the Schrodinger group is generated by the Lorentzian member".into(),
        ));
    }
    let m = op.grid.m_tot;
    let a = op.to_dense();
    let mut b = Array2::from_elem((m, m), C64::new(0.0, 0.0));
    for i in 0..m {
        for j in 0..m {
            b[[i, j]] = a[[i, j]] * c((op.weights[i] / op.weights[j]).sqrt());
        }
    }
    let scale = b.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let mut herm_defect = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            herm_defect = herm_defect.max((b[[i, j]] - b[[j, i]].conj()).norm());
        }
    }
    if herm_defect > 1e-12 * scale {
        return Err(WicklabError::ContractViolation(format!(
            "Lorentzian member not Hermitian in the weighted product (defect {herm_defect:e})"
        )));
    }
    // eigh on a row-major complex array decomposes the conjugate, so
    // conjugate the input first
    let (vals, vecs) = b
        .mapv(|z| z.conj())
        .eigh(UPLO::Lower)
        .map_err(|e| WicklabError::LinearSolve(format!("Hermitian eigendecomposition: {e}")))?;
    let tilde = Array1::from_shape_fn(m, |i| psi[i] * c(op.weights[i].sqrt()));
    let coeff = vecs.t().mapv(|z| z.conj()).dot(&tilde);
    let evolved = Array1::from_shape_fn(m, |k| coeff[k] * (C64::new(0.0, s * vals[k])).exp());
    let back = vecs.dot(&evolved);
    Ok((0..m)
        .map(|i| back[i] / c(op.weights[i].sqrt()))
        .collect())
}

/// Probe factors from seeded noise mollified by the self-adjoint member's
/// semigroup at time `tau`. Raw lattice noise is useless as a trace probe:
/// its high modes are fully damped by `e^{s Delta_theta}` at every tested
/// angle while the unitary limit preserves them, so the gap saturates at the
/// noise power instead of shrinking. Smoothing concentrates the probe on
/// slow modes, where the gap is angle-limited.
pub fn smoothed_probe_factors(
    grid: &TorusGrid,
    adm: &AdmField,
    rank: usize,
    tau: f64,
    seed: u64,
) -> Result<Vec<(Vec<C64>, Vec<C64>)>> {
    use rand::{Rng, SeedableRng};
    let heat = assemble_delta_theta(grid, adm, OperatorKind::Theta(std::f64::consts::FRAC_PI_2))?;
    let e = expm(&(heat.to_dense() * c(tau)))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(rank);
    for _ in 0..rank {
        let noise = Array1::from_shape_fn(grid.m_tot, |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let u = e.dot(&noise).to_vec();
        out.push((u.clone(), u));
    }
    Ok(out)
}

/// Finite-rank probe `T = sum_r u_r <v_r, .>_w` applied at evolution time
/// `s` along a decreasing list of angles.
#[derive(Debug, Clone)]
pub struct TraceProbe {
    pub factors: Vec<(Vec<C64>, Vec<C64>)>,
    pub s: f64,
    pub theta_list: Vec<f64>,
}

impl TraceProbe {
    /// `tr T = sum_r <v_r, u_r>_w`
    pub fn trace(&self, op: &LatticeOperator) -> C64 {
        self.factors
            .iter()
            .map(|(u, v)| op.inner_w(v, u))
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GapSample {
    pub theta: f64,
    /// `|tr[T e^{s Delta_theta}] - tr[T U(s)]|`
    pub gap: f64,
    /// the `pi - theta` branch against `U(-s)`
    pub mirror_gap: f64,
}

fn probe_trace_of(op: &LatticeOperator, probe: &TraceProbe, states: &[Vec<C64>]) -> C64 {
    probe
        .factors
        .iter()
        .zip(states)
        .map(|((_, v), mu)| op.inner_w(v, mu))
        .sum()
}

/// Trace gaps between the analytic semigroup at each listed angle and the
/// Schrodinger group; each exponential is contracted against the probe with
/// rank-by-rank vector work only.
pub fn trace_gap(grid: &TorusGrid, adm: &AdmField, probe: &TraceProbe) -> Result<Vec<GapSample>> {
    let lor = assemble_delta_theta(grid, adm, OperatorKind::Lorentzian)?;
    let limit_fwd: Vec<Vec<C64>> = probe
        .factors
        .iter()
        .map(|(u, _)| schrodinger_group(&lor, probe.s, u))
        .collect::<Result<_>>()?;
    let limit_adj: Vec<Vec<C64>> = probe
        .factors
        .iter()
        .map(|(u, _)| schrodinger_group(&lor, -probe.s, u))
        .collect::<Result<_>>()?;
    let t_fwd = probe_trace_of(&lor, probe, &limit_fwd);
    let t_adj = probe_trace_of(&lor, probe, &limit_adj);

    let mut out = Vec::with_capacity(probe.theta_list.len());
    for &theta in &probe.theta_list {
        let mut traces = [C64::new(0.0, 0.0); 2];
        for (slot, angle) in [(0usize, theta), (1, std::f64::consts::PI - theta)] {
            let op = assemble_delta_theta(grid, adm, OperatorKind::Theta(angle))?;
            let e = expm(&(op.to_dense() * c(probe.s)))?;
            let states: Vec<Vec<C64>> = probe
                .factors
                .iter()
                .map(|(u, _)| e.dot(&Array1::from_vec(u.clone())).to_vec())
                .collect();
            traces[slot] = probe_trace_of(&op, probe, &states);
        }
        out.push(GapSample {
            theta,
            gap: (traces[0] - t_fwd).norm(),
            mirror_gap: (traces[1] - t_adj).norm(),
        });
    }
    Ok(out)
}
