use std::sync::Arc;

use ttfeedback::basis::{Basis, BasisKind};
use ttfeedback::control::{
    lqr_law, metrics, simulate, two_boxes_calibrate, FeedbackLaw, Integrator, SimOptions, TrajectoryResult,
};
use ttfeedback::ftt::Ftt;
use ttfeedback::matops::Mat;
use ttfeedback::models::make_2d_exact;
use ttfeedback::sampler::ControlProblem;

fn scalar(a: f64, q: f64, r: f64) -> ControlProblem {
    let af = Arc::new(move |_: &[f64]| Mat::from_element(1, 1, a));
    ControlProblem::new("scalar", af, Mat::identity(1, 1), vec![], Mat::from_element(1, 1, q), Mat::from_element(1, 1, r), 1.0)
        .unwrap()
}

fn rk4(h: f64) -> Integrator {
    Integrator::Rk4 { h }
}

#[test]
fn exponential_decay() {
    let p = scalar(-1.0, 1.0, 1.0);
    let tr = simulate(&p, &FeedbackLaw::Zero, &[1.0], 2.0, rk4(0.01), SimOptions::default()).unwrap();
    assert_eq!(tr.steps, 200);
    assert_eq!(tr.times.len(), 201);
    assert!((tr.times[200] - 2.0).abs() < 1e-12);
    assert!((tr.final_state()[0] - (-2.0f64).exp()).abs() < 1e-9);
    assert!((tr.y_max - (-2.0f64).exp()).abs() < 1e-9);
    // ∫ e^{-2t} dt; trapezoid error O(h²).
    let exact = 0.5 * (1.0 - (-4.0f64).exp());
    assert!((tr.cost - exact).abs() < 1e-4);
    assert!(tr.controls.iter().all(|u| u[0] == 0.0));
    assert_eq!(tr.out_of_domain, 0);
}

#[test]
fn rk4_is_fourth_order() {
    let p = scalar(-1.0, 1.0, 1.0);
    let err = |h: f64| {
        let tr = simulate(&p, &FeedbackLaw::Zero, &[1.0], 1.0, rk4(h), SimOptions::default()).unwrap();
        (tr.final_state()[0] - (-1.0f64).exp()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
}

#[test]
fn rk45_hits_the_tolerance_and_the_horizon() {
    let p = scalar(-1.0, 1.0, 1.0);
    let tr = simulate(&p, &FeedbackLaw::Zero, &[1.0], 5.0, Integrator::rk45(), SimOptions::default()).unwrap();
    assert!((tr.times.last().unwrap() - 5.0).abs() < 1e-12);
    assert!((tr.final_state()[0] - (-5.0f64).exp()).abs() < 1e-6);
    assert!(tr.steps < 200, "{} steps", tr.steps);
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn stored_cost_matches_recomputation() {
    let spec = make_2d_exact();
    let p = spec.problem().unwrap();
    for (law, opts) in [
        (FeedbackLaw::SdreRiccati, SimOptions::default()),
        (lqr_law(p).unwrap(), SimOptions { u_max: Some(0.5) }),
    ] {
        let tr = simulate(p, &law, &[1.0, -1.0], 5.0, rk4(0.01), opts).unwrap();
        let again = tr.recompute_cost(p, opts.u_max);
        assert!((tr.cost - again).abs() <= 1e-12 * tr.cost);
        assert!((tr.costs.last().unwrap() - tr.cost).abs() <= 1e-12 * tr.cost);
        assert!(tr.costs.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn saturation_limits_applied_controls() {
    let spec = make_2d_exact();
    let p = spec.problem().unwrap();
    let law = lqr_law(p).unwrap();
    let tr = simulate(p, &law, &[1.0, -1.0], 5.0, rk4(0.01), SimOptions { u_max: Some(0.3) }).unwrap();
    assert!(tr.controls.iter().all(|u| u[0].abs() <= 0.3));
    assert!(tr.signals.iter().any(|u| u[0].abs() > 0.3));
    let free = simulate(p, &law, &[1.0, -1.0], 5.0, rk4(0.01), SimOptions::default()).unwrap();
    assert_eq!(free.controls, free.signals);
}

#[test]
fn scalar_lqr_gain() {
    let (a, q, r) = (0.5, 2.0, 0.25);
    let p = scalar(a, q, r);
    let FeedbackLaw::Lqr { gain, pi } = lqr_law(&p).unwrap() else { panic!("lqr law") };
    let expected = r * (a + (a * a + q / r).sqrt());
    assert!((pi[(0, 0)] - expected).abs() < 1e-12);
    assert!((gain[(0, 0)] - expected / r).abs() < 1e-12);
}

#[test]
fn tt_law_uses_the_value_gradient() {
    // Ṽ = x₁² + x₂² gives u = -½ R⁻¹ Bᵀ (2x) = -2 x₂ with R = ½.
    let b = Basis::new(BasisKind::Lagrange, 5, (-1.0, 1.0)).unwrap();
    let grid: Vec<f64> = b.nodes().iter().flat_map(|x| b.nodes().iter().map(move |y| x * x + y * y)).collect();
    let ftt = Ftt::from_dense(&grid, vec![b.clone(), b], 1e-14).unwrap();
    let spec = make_2d_exact();
    let u = FeedbackLaw::Tt(ftt).feedback(spec.problem().unwrap(), &[0.3, -0.4]).unwrap();
    assert!((u[0] - 0.8).abs() < 1e-12);
}

#[test]
fn composite_switches_on_the_box_boundary() {
    let spec = make_2d_exact();
    let p = spec.problem().unwrap();
    let inner = lqr_law(p).unwrap();
    let law = FeedbackLaw::composite(FeedbackLaw::Zero, inner.clone(), 0.5);
    let on_edge = [0.5, -0.2];
    assert_eq!(law.feedback(p, &on_edge).unwrap(), inner.feedback(p, &on_edge).unwrap());
    assert_eq!(law.feedback(p, &[0.50001, 0.0]).unwrap(), vec![0.0]);
    assert_eq!(law.feedback(p, &[0.1, -0.6]).unwrap(), vec![0.0]);
}

#[test]
fn two_boxes_calibration() {
    let spec = make_2d_exact();
    let p = spec.problem().unwrap();
    let lqr = lqr_law(p).unwrap();
    assert_eq!(two_boxes_calibrate(p, &lqr, 5.0, rk4(0.01)).unwrap(), 0.0);
    // A law with u(0) ≠ 0 drives the state away from the origin.
    let b = Basis::new(BasisKind::Lagrange, 3, (-1.0, 1.0)).unwrap();
    let grid: Vec<f64> = b.nodes().iter().flat_map(|_| b.nodes().iter().map(|y| 0.01 * y + 0.002)).collect();
    let ftt = Ftt::from_dense(&grid, vec![b.clone(), b], 1e-14).unwrap();
    let outer = FeedbackLaw::composite(lqr.clone(), FeedbackLaw::Tt(ftt.clone()), 10.0);
    let tt = FeedbackLaw::Tt(ftt);
    let a = two_boxes_calibrate(p, &tt, 5.0, rk4(0.01)).unwrap();
    let traj = simulate(p, &tt, &[0.0, 0.0], 5.0, rk4(0.01), SimOptions::default()).unwrap();
    let peak = traj.states.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(a > 0.0);
    assert_eq!(a, 2.0 * peak);
    assert_eq!(two_boxes_calibrate(p, &outer, 5.0, rk4(0.01)).unwrap(), a);
}

fn flat(times: Vec<f64>, u: f64, cost: f64) -> TrajectoryResult {
    let n = times.len();
    TrajectoryResult {
        times,
        states: vec![vec![0.0]; n],
        controls: vec![vec![u]; n],
        signals: vec![vec![u]; n],
        costs: vec![cost; n],
        cost,
        steps: n - 1,
        y_max: 0.25,
        out_of_domain: 0,
        rejected: 0,
    }
}

#[test]
fn metrics_examples() {
    let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.04).collect();
    let reference = flat(t.clone(), 1.0, 2.0);
    let m = metrics(&reference, &reference).unwrap();
    assert_eq!((m.err_j, m.err_u), (0.0, 0.0));
    let shifted = flat(t, 1.5, 2.5);
    let m = metrics(&shifted, &reference).unwrap();
    assert!((m.err_j - 0.5).abs() < 1e-15);
    // ‖0.5‖ over [0, 4] is 0.5·2.
    assert!((m.err_u - 1.0).abs() < 1e-12);
    assert_eq!(m.y_max, 0.25);
    // A reference on a different grid is interpolated.
    let coarse = flat((0..=8).map(|i| i as f64 * 0.5).collect(), 1.0, 2.0);
    assert!((metrics(&shifted, &coarse).unwrap().err_u - 1.0).abs() < 1e-12);
    assert!(metrics(&flat(vec![0.0], 0.0, 0.0), &reference).is_err());
}

#[test]
fn simulate_validates_input() {
    let p = scalar(-1.0, 1.0, 1.0);
    assert!(simulate(&p, &FeedbackLaw::Zero, &[1.0, 2.0], 1.0, rk4(0.1), SimOptions::default()).is_err());
    assert!(simulate(&p, &FeedbackLaw::Zero, &[1.0], 0.0, rk4(0.1), SimOptions::default()).is_err());
}

#[test]
fn out_of_domain_states_are_counted() {
    let p = scalar(1.0, 1.0, 1.0);
    let tr = simulate(&p, &FeedbackLaw::Zero, &[1.0], 1.0, rk4(0.01), SimOptions::default()).unwrap();
    // e^t leaves [-1.1, 1.1] after t ≈ 0.095.
    assert!(tr.out_of_domain > 80 && tr.out_of_domain <= 91, "{}", tr.out_of_domain);
}
