//! The recursion output must reproduce the closed-form low-order Synge
//! coefficients on curved data, and the defect must scale at the truncation
//! order.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use wicklab::eikonal::{eikonal_residual, solve_eikonal_jets};

#[test]
fn closed_forms_orders_2_to_4_random_points() {
    let adm = common::curved_with_shift();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let index_sets: [&[usize]; 9] = [
        &[0, 0],
        &[0, 1],
        &[1, 1],
        &[1, 1, 1],
        &[0, 1, 1],
        &[0, 0, 1],
        &[1, 1, 1, 1],
        &[0, 1, 1, 1],
        &[0, 0, 1, 1],
    ];
    for _ in 0..20 {
        let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let theta = rng.gen_range(0.2..PI - 0.2);
        let sj = solve_eikonal_jets(&adm.jet(&y, 5), theta, 6).unwrap();
        for idx in index_sets {
            let got = sj.coeff(idx);
            let want = common::synge_closed_form(&adm, theta, &y, idx);
            assert!(
                (got - want).norm() < 1e-10,
                "indices {:?} at y = {:?}, theta = {}: {} vs {}",
                idx,
                y,
                theta,
                got,
                want
            );
        }
    }
}

#[test]
fn residual_slope_l_ten() {
    let adm = common::curved_with_shift();
    let l = 10;
    let theta = PI / 4.0;
    let sj = solve_eikonal_jets(&adm.jet(&[0.31, 0.57], l - 1), theta, l).unwrap();
    for dir in [[0.6, -0.8], [1.0, 0.0], [0.0, 1.0], [0.707, 0.707]] {
        let mut pts = Vec::new();
        for k in 0..6 {
            let rho = 1e-1 * 0.6f64.powi(k);
            let dy = [dir[0] * rho, dir[1] * rho];
            let e = eikonal_residual(&sj, &adm, &dy).unwrap().norm();
            // stay above the ~1e-21 cancellation floor of the evaluation
            if e > 1e-19 {
                pts.push((rho.ln(), e.ln()));
            }
        }
        let slope = common::regression_slope(&pts);
        assert!(slope >= l as f64 - 0.5, "slope {} in dir {:?}", slope, dir);
    }
}
