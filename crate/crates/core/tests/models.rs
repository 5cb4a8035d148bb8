use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttfeedback::matops::{riccati_residual, Mat};
use ttfeedback::models::{
    cs_consensus, cs_kernel, exact_pi, lookup, make_2d_constrained, make_2d_exact, make_cucker_smale, make_lorenz,
    test_function_a, test_function_b, LorenzForm, ModelParams, BENCHMARKS, CUCKER_SMALE_SEED,
};
use ttfeedback::sampler::{sdre_pi, sdre_sample, ControlProblem, Oracle};

fn points(d: usize, a: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..d).map(|_| rng.random_range(-a..a)).collect()).collect()
}

fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

#[test]
fn exact_pi_solves_the_frozen_riccati_equation() {
    let spec = make_2d_exact();
    let p = spec.problem().unwrap();
    for x1 in [-1.0, -0.3, 0.0, 0.5, 1.0, 2.0] {
        let x = [x1, 0.7];
        let pi = exact_pi(x1);
        let res = riccati_residual(&p.a(&x), p.w(), p.q(), &pi);
        assert!(max_abs(&res) <= 1e-12, "x1={x1}: residual {}", max_abs(&res));
        let solved = sdre_pi(p, &x).unwrap().pi;
        assert!(max_abs(&(solved - &pi)) <= 1e-10);
    }
}

#[test]
fn exact_pi_at_origin() {
    // q = 0: s = 1, t = √3.
    let pi = exact_pi(0.0);
    let t = 3f64.sqrt();
    assert!((pi[(0, 0)] - 0.5 * t).abs() < 1e-15);
    assert!((pi[(0, 1)] - 0.5).abs() < 1e-15);
    assert!((pi[(1, 1)] - 0.5 * t).abs() < 1e-15);
}

#[test]
fn sdre_values_are_even() {
    let cs = make_cucker_smale(2).unwrap();
    let cases = [(make_2d_exact(), 1.0), (cs, 0.5)];
    for (spec, a) in cases {
        let p = spec.problem().unwrap();
        for x in points(spec.dim, a, 10, 3) {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let v = sdre_sample(p, &x, false).unwrap().value;
            let w = sdre_sample(p, &neg, false).unwrap().value;
            assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0), "{}: {v} vs {w}", spec.name);
        }
    }
}

fn classic_lorenz(s: &[f64], sigma: f64, rho: f64, beta: f64) -> [f64; 3] {
    [sigma * (s[1] - s[0]), s[0] * (rho - s[2]) - s[1], s[0] * s[1] - beta * s[2]]
}

#[test]
fn lorenz_factorizations_reproduce_the_drift() {
    for form in [LorenzForm::Standard, LorenzForm::Alternate] {
        let spec = make_lorenz(10.0, 2.0, 8.0 / 3.0, 1e-3, form).unwrap();
        let p = spec.problem().unwrap();
        for y in points(3, 1.0, 20, 5) {
            let f = p.rhs(&y, &[0.0]);
            let g = classic_lorenz(&y, 10.0, 2.0, 8.0 / 3.0);
            for i in 0..3 {
                assert!((f[i] - g[i]).abs() < 1e-13, "{form:?}");
            }
            let fu = p.rhs(&y, &[1.5]);
            assert!((fu[0] - f[0]).abs() < 1e-15 && (fu[1] - f[1] - 1.5).abs() < 1e-13 && fu[2] == f[2]);
        }
    }
}

#[test]
fn lorenz_rejects_bad_parameters() {
    assert!(make_lorenz(10.0, 2.0, 8.0 / 3.0, 0.0, LorenzForm::Standard).is_err());
    assert!(make_lorenz(-1.0, 2.0, 8.0 / 3.0, 1e-3, LorenzForm::Standard).is_err());
}

#[test]
fn cucker_smale_consensus_structure() {
    assert_eq!(cs_kernel(0.3, 0.3), 1.0);
    assert!((cs_kernel(0.0, 2.0) - 0.2).abs() < 1e-15);
    for y in points(5, 0.5, 10, 9) {
        let m = cs_consensus(&y);
        for i in 0..5 {
            let row: f64 = (0..5).map(|j| m[(i, j)]).sum();
            assert!(row.abs() < 1e-15);
            for j in 0..5 {
                if i != j {
                    assert!((m[(i, j)] - cs_kernel(y[i], y[j]) / 5.0).abs() < 1e-15);
                    assert_eq!(m[(i, j)], m[(j, i)]);
                }
            }
        }
    }
    // Equal positions give 1/N couplings.
    let m = cs_consensus(&[0.2; 4]);
    assert!((m[(0, 1)] - 0.25).abs() < 1e-15);
}

#[test]
fn cucker_smale_dynamics_and_start() {
    let spec = make_cucker_smale(3).unwrap();
    assert_eq!(spec.dim, 6);
    let p = spec.problem().unwrap();
    assert_eq!(p.controls(), 3);
    let y = [0.1, -0.2, 0.3, 0.0, 0.1, -0.1];
    let u = [0.5, 0.0, -0.5];
    let f = p.rhs(&y, &u);
    for i in 0..3 {
        assert!((f[i] - y[3 + i]).abs() < 1e-15);
        let mut acc = u[i];
        for j in 0..3 {
            if i != j {
                acc += cs_kernel(y[i], y[j]) / 3.0 * (y[3 + j] - y[3 + i]);
            }
        }
        assert!((f[3 + i] - acc).abs() < 1e-14);
    }
    let x0 = spec.x0.clone().unwrap();
    assert!(x0.iter().all(|v| v.abs() <= 0.5));
    assert_eq!(make_cucker_smale(3).unwrap().x0.unwrap(), x0);
    assert_eq!(CUCKER_SMALE_SEED, 7);
    assert!(make_cucker_smale(0).is_err());
}

fn check_da(p: &ControlProblem, x: &[f64]) {
    let h = 1e-6;
    for (i, da) in p.da() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[*i] += h;
        xm[*i] -= h;
        let fd = (p.a(&xp) - p.a(&xm)) / (2.0 * h);
        assert!(max_abs(&(fd - da(x))) < 1e-8, "{} dA/dx{i}", p.name);
    }
    // Variables without a listed derivative leave A unchanged.
    for i in 0..x.len() {
        if p.da().iter().any(|(j, _)| *j == i) {
            continue;
        }
        let mut xp = x.to_vec();
        xp[i] += 0.3;
        assert_eq!(p.a(&xp), p.a(x), "{} depends on x{i}", p.name);
    }
}

#[test]
fn state_matrix_derivatives_match_finite_differences() {
    let specs = [
        make_2d_exact(),
        make_2d_constrained(20.0).unwrap(),
        make_lorenz(10.0, 2.0, 8.0 / 3.0, 1e-3, LorenzForm::Standard).unwrap(),
        make_lorenz(10.0, 2.0, 8.0 / 3.0, 1e-3, LorenzForm::Alternate).unwrap(),
        make_cucker_smale(3).unwrap(),
    ];
    for spec in &specs {
        for x in points(spec.dim, spec.half_width, 5, 13) {
            check_da(spec.problem().unwrap(), &x);
        }
    }
}

#[test]
fn test_function_gradients_match_finite_differences() {
    for oracle in [test_function_a(7), test_function_b(7)] {
        for x in points(7, 1.0, 10, 17) {
            let s = oracle.sample(&x, true).unwrap();
            let g = s.grad.unwrap();
            for i in 0..7 {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (oracle.sample(&xp, false).unwrap().value - oracle.sample(&xm, false).unwrap().value) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-8);
            }
        }
    }
    let a = test_function_a(4).sample(&[0.5; 4], false).unwrap().value;
    assert!((a - (-0.25f64).exp()).abs() < 1e-15);
    let b = test_function_b(3).sample(&[0.5, -1.0, 1.0], false).unwrap().value;
    assert!((b - 0.5f64.exp()).abs() < 1e-15);
}

#[test]
fn registry_lookup() {
    for name in BENCHMARKS {
        let spec = lookup(name, &ModelParams::default()).unwrap();
        assert_eq!(&spec.name, name);
        assert_eq!(spec.bases().unwrap().len(), spec.dim);
    }
    assert!(lookup("pendulum", &ModelParams::default()).is_err());
    let p = ModelParams { na: Some(4), d: Some(12), ..Default::default() };
    assert_eq!(lookup("cucker-smale", &p).unwrap().dim, 8);
    assert_eq!(lookup("function-b", &p).unwrap().dim, 12);
    let spec = lookup("2d-constrained", &ModelParams { u_max: Some(5.0), ..Default::default() }).unwrap();
    assert_eq!(spec.u_max, Some(5.0));
    assert!(spec.reference("cost_best_r6").is_none());
    assert!(make_2d_constrained(0.0).is_err());
    assert!(make_2d_exact().problem().is_ok());
    assert!(lookup("function-a", &p).unwrap().problem().is_err());
}
