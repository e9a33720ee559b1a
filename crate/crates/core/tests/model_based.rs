mod common;

use nalgebra::DMatrix;

use common::*;
use structured_lqr::model_based::{
    kleinman_structured, modified_are_residual, solve_unstructured_lqr, suboptimality_bound, IterationSettings,
};
use structured_lqr::system::{evaluate_cost_analytic, spectral_abscissa};
use structured_lqr::Error;

const TIGHT: IterationSettings = IterationSettings { tol: 1e-10, max_iter: 200 };

#[test]
fn scenario_a_reproduces_printed_gain() {
    let pa = paper("paper-a");
    let res = kleinman_structured(&pa.sys, &pa.weights, &pa.mask, &pa.k0, &TIGHT).unwrap();
    assert!(max_entry_diff(&res.k, &printed(&K_A)) < 0.05);
    for (i, j) in pa.mask.zeros() {
        assert_eq!(res.k[(i, j)], 0.0);
    }
    assert!((res.k[(2, 2)] - 2.9976).abs() < 5e-3);
    let cost = evaluate_cost_analytic(&pa.sys, &pa.weights, &res.k, &pa.x0).unwrap();
    assert!((cost - COST_A).abs() < 0.05, "cost {cost}");
    let resid = modified_are_residual(&res.p, &res.l, &pa.sys, &pa.weights).unwrap();
    assert!(resid <= 1e-6 * pa.weights.q().norm(), "residual {resid}");
}

#[test]
fn unstructured_matches_printed_and_solves_riccati() {
    let pa = paper("paper-a");
    let res = solve_unstructured_lqr(&pa.sys, &pa.weights, &pa.k0, &TIGHT).unwrap();
    assert!(max_entry_diff(&res.k, &printed(&K_UNSTRUCTURED)) < 0.02);
    assert!(are_residual(&pa.sys, &pa.weights, &res.p).norm() < 1e-8);
    assert!(res.l.norm() == 0.0);
    let cost = evaluate_cost_analytic(&pa.sys, &pa.weights, &res.k, &pa.x0).unwrap();
    assert!((cost - COST_UNSTRUCTURED).abs() < 0.02);
}

#[test]
fn printed_b_pattern_reproduces_printed_gain_and_spectrum() {
    let pb = paper("paper-b-printed");
    let res = kleinman_structured(&pb.sys, &pb.weights, &pb.mask, &pb.k0, &TIGHT).unwrap();
    assert!(max_entry_diff(&res.k, &printed(&K_B)) < 0.05);
    let cost = evaluate_cost_analytic(&pb.sys, &pb.weights, &res.k, &pb.x0).unwrap();
    assert!((cost - COST_B).abs() < 0.05, "cost {cost}");
    let mut ev: Vec<f64> = structured_lqr::linalg::eigenvalues(&pb.sys.closed_loop(&res.k).unwrap())
        .unwrap()
        .iter()
        .map(|z| z.re)
        .collect();
    ev.sort_by(f64::total_cmp);
    let mut listed = EIGS_B.to_vec();
    listed.sort_by(f64::total_cmp);
    for (a, b) in ev.iter().zip(&listed) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
}

#[test]
fn listed_b_pattern_keeps_entry_six_six() {
    let pb = paper("paper-b");
    let res = kleinman_structured(&pb.sys, &pb.weights, &pb.mask, &pb.k0, &TIGHT).unwrap();
    assert!(res.k[(5, 5)] > 1.0);
    assert_eq!(pb.mask.check_membership(&res.k, 0.0).unwrap().violations.len(), 0);
}

#[test]
fn accepted_iterates_are_stabilizing() {
    let pa = paper("paper-a");
    let res = kleinman_structured(&pa.sys, &pa.weights, &pa.mask, &pa.k0, &TIGHT).unwrap();
    for rec in &res.history {
        assert!(spectral_abscissa(&pa.sys.closed_loop(&rec.gain).unwrap()).unwrap() < 0.0);
    }
}

#[test]
fn unstructured_values_decrease_monotonically() {
    // P_{k+1} <= P_k holds for the classical iteration only; the masked
    // update can overshoot.
    let pa = paper("paper-a");
    let res = solve_unstructured_lqr(&pa.sys, &pa.weights, &pa.k0, &TIGHT).unwrap();
    for w in res.history.windows(2) {
        let drop = &w[0].value - &w[1].value;
        assert!(drop.symmetric_eigen().eigenvalues.min() >= -1e-9);
    }
}

#[test]
fn bound_holds_on_both_patterns() {
    for name in ["paper-a", "paper-b", "paper-b-printed"] {
        let sc = paper(name);
        let s = kleinman_structured(&sc.sys, &sc.weights, &sc.mask, &sc.k0, &TIGHT).unwrap();
        let u = solve_unstructured_lqr(&sc.sys, &sc.weights, &sc.k0, &TIGHT).unwrap();
        let j = evaluate_cost_analytic(&sc.sys, &sc.weights, &s.k, &sc.x0).unwrap();
        let jb = evaluate_cost_analytic(&sc.sys, &sc.weights, &u.k, &sc.x0).unwrap();
        let rep = suboptimality_bound(&sc.sys, &sc.weights, &sc.x0, j, jb).unwrap();
        // B = R = I: g = 1; A - I is symmetric with top eigenvalue -1, so l = 2
        assert!((rep.g - 1.0).abs() < 1e-12);
        assert!((rep.l - 2.0).abs() < 1e-9, "l = {}", rep.l);
        assert!((rep.x0_kron_norm - sc.x0.norm_squared()).abs() < 1e-12);
        assert!(rep.within_bound && j >= jb);
    }
}

#[test]
fn k0_zero_rejected_on_marginal_network() {
    let pa = paper("paper-a");
    let err = kleinman_structured(&pa.sys, &pa.weights, &pa.mask, &DMatrix::zeros(6, 6), &TIGHT).unwrap_err();
    assert!(matches!(err, Error::NotStabilizing { .. }));
}

#[test]
fn iteration_budget_exhaustion_reported() {
    let pa = paper("paper-a");
    let s = IterationSettings { tol: 1e-14, max_iter: 3 };
    let err = kleinman_structured(&pa.sys, &pa.weights, &pa.mask, &pa.k0, &s).unwrap_err();
    assert!(matches!(err, Error::NotConverged { iterations: 3, .. }));
}
