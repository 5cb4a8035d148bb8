//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Failures are reported, not hidden. The process exits nonzero on a failing
//! criterion only when `ACCEPTANCE_STRICT=1`, so that the workspace test run
//! still completes and records every line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttfeedback::basis::{Basis, BasisKind};
use ttfeedback::control::{
    lqr_law, metrics, simulate, two_boxes_calibrate, FeedbackLaw, Integrator, SimOptions, TrajectoryResult,
};
use ttfeedback::cross::{gradient_cross, gradient_cross_2d, solve_core_ls, CoreSystem, CrossConfig, RankPolicy};
use ttfeedback::ftt::Ftt;
use ttfeedback::io::ftt_to_bytes;
use ttfeedback::matops::{maxvol, riccati_residual, solve_are, solve_sylvester, Mat};
use ttfeedback::models::{
    function_oracle, lookup, make_2d_constrained, make_2d_exact, make_cucker_smale, make_lorenz, LorenzForm,
    ModelParams,
};
use ttfeedback::sampler::{noisy_wrap, pmp_sample, ControlProblem, FnOracle, Oracle, PmpConfig, PmpOracle, SdreOracle};

mod common;

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

fn report(id: usize, pass: bool, detail: String) -> Verdict {
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    Verdict { id, pass, detail }
}

fn points(d: usize, count: usize, half: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..d).map(|_| rng.random_range(-half..half)).collect()).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Closed-loop statistics of the 2D model over fixed starts.
struct TwoDStats {
    err_j: f64,
    err_u: f64,
    diverged: usize,
}

fn two_d_starts(count: usize) -> Vec<Vec<f64>> {
    points(2, count, 1.0, 1)
}

fn two_d_stats(problem: &ControlProblem, ftts: &[Ftt], starts: &[Vec<f64>], refs: &[TrajectoryResult]) -> TwoDStats {
    let integ = Integrator::Rk4 { h: 0.02 };
    let (mut ej, mut eu, mut ok, mut diverged) = (0.0, 0.0, 0usize, 0usize);
    for ftt in ftts {
        let law = FeedbackLaw::Tt(ftt.clone());
        for (x0, rf) in starts.iter().zip(refs) {
            match simulate(problem, &law, x0, 20.0, integ, SimOptions::default()) {
                Ok(tr) => {
                    let m = metrics(&tr, rf).expect("metrics");
                    ej += m.err_j;
                    eu += m.err_u;
                    ok += 1;
                }
                Err(_) => diverged += 1,
            }
        }
    }
    let n = ok.max(1) as f64;
    TwoDStats { err_j: if ok == 0 { f64::INFINITY } else { ej / n }, err_u: if ok == 0 { f64::INFINITY } else { eu / n }, diverged }
}

fn two_d_refs(problem: &ControlProblem, starts: &[Vec<f64>]) -> Vec<TrajectoryResult> {
    let integ = Integrator::Rk4 { h: 0.02 };
    starts
        .iter()
        .map(|x0| simulate(problem, &FeedbackLaw::SdreGradient, x0, 20.0, integ, SimOptions::default()).expect("reference"))
        .collect()
}

fn two_d_cross(problem: &ControlProblem, sigma: f64, lambda: f64, seed: u64) -> Ftt {
    let spec = make_2d_exact();
    let oracle = noisy_wrap(SdreOracle::new(problem.clone()), sigma, seed);
    let cfg = CrossConfig { lambda, tol: 1e-4, it_max: 10, rank: RankPolicy::Fixed(3), seed, ..Default::default() };
    gradient_cross(&oracle, spec.bases().expect("bases"), &cfg).expect("cross").ftt
}

fn criterion_1() -> Verdict {
    let t0 = Instant::now();
    let spec = make_2d_exact();
    let p = spec.problem().expect("problem").clone();
    let starts = two_d_starts(100);
    let refs = two_d_refs(&p, &starts);
    let ftt = two_d_cross(&p, 0.0, 0.0, 0);
    let s = two_d_stats(&p, &[ftt], &starts, &refs);
    let secs = t0.elapsed().as_secs_f64();
    let pass = s.err_j <= 1e-6 && s.err_u <= 1e-5 && s.diverged == 0 && secs <= 120.0;
    report(
        1,
        pass,
        format!(
            "2d sigma=0 lambda=0: mean err_J {:.3e} (<= 1e-6), mean err_u {:.3e} (<= 1e-5), diverged {}, {secs:.1}s (<= 120s)",
            s.err_j, s.err_u, s.diverged
        ),
    )
}

fn criterion_2() -> Verdict {
    let spec = make_2d_exact();
    let p = spec.problem().expect("problem").clone();
    let starts = two_d_starts(20);
    let refs = two_d_refs(&p, &starts);
    let mut pass = true;
    let mut parts = vec![];
    for sigma in [1e-2, 1e-1] {
        let stats: Vec<TwoDStats> = [0.0, 1.0]
            .iter()
            .map(|&lambda| {
                let ftts: Vec<Ftt> = (0..10).map(|seed| two_d_cross(&p, sigma, lambda, seed)).collect();
                two_d_stats(&p, &ftts, &starts, &refs)
            })
            .collect();
        let (s0, s1) = (&stats[0], &stats[1]);
        let ok = s1.err_u < s0.err_u && s1.err_j < s0.err_j && s1.diverged <= s0.diverged;
        pass &= ok;
        parts.push(format!(
            "sigma={sigma:e}: err_u {:.3e} vs {:.3e}, err_J {:.3e} vs {:.3e}, diverged {} vs {} (lambda=1 vs 0)",
            s1.err_u, s0.err_u, s1.err_j, s0.err_j, s1.diverged, s0.diverged
        ));
    }
    report(2, pass, parts.join("; "))
}

fn function_errors(name: &str, sigma: f64, rank: usize, lambda: f64) -> f64 {
    let spec = lookup(name, &ModelParams::default()).expect("spec");
    let exact = function_oracle(&spec).expect("oracle");
    let oracle = noisy_wrap(function_oracle(&spec).expect("oracle"), sigma, 3);
    let cfg = CrossConfig { lambda, tol: 1e-4, it_max: 10, rank: RankPolicy::Fixed(rank), ..Default::default() };
    let rep = gradient_cross(&oracle, spec.bases().expect("bases"), &cfg).expect("cross");
    let pts = points(spec.dim, 1000, 1.0, 11);
    let errs: Vec<f64> = pts
        .iter()
        .map(|x| (rep.ftt.eval(x).expect("eval") - exact.sample(x, false).expect("sample").value).abs())
        .collect();
    mean(&errs)
}

fn criterion_3() -> Verdict {
    let t0 = Instant::now();
    let err = function_errors("function-a", 0.0, 1, 0.0);
    let secs = t0.elapsed().as_secs_f64();
    report(
        3,
        err <= 1e-6 && secs <= 60.0,
        format!("function (a) d=100 rank 1: mean error {err:.3e} (<= 1e-6), {secs:.1}s (<= 60s)"),
    )
}

fn criterion_4() -> Verdict {
    let t0 = Instant::now();
    let base = function_errors("function-b", 0.1, 2, 0.0);
    let mut best = (f64::INFINITY, 0.0);
    let mut parts = vec![];
    for k in 0..=6 {
        let lambda = 10f64.powi(-k);
        let e = function_errors("function-b", 0.1, 2, lambda);
        parts.push(format!("{lambda:e}:{e:.3e}"));
        if e < best.0 {
            best = (e, lambda);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        4,
        best.0 <= 0.5 * base && secs <= 600.0,
        format!(
            "function (b) d=100 sigma=0.1: best {:.3e} at lambda={:e} vs lambda=0 {base:.3e} (need <= {:.3e}); grid [{}], {secs:.1}s (<= 600s)",
            best.0,
            best.1,
            0.5 * base,
            parts.join(" ")
        ),
    )
}

fn cs_config(lambda: f64, seed: u64) -> CrossConfig {
    CrossConfig {
        lambda,
        tol: 1e-2,
        it_max: 10,
        rank: RankPolicy::Adaptive { init: 2, max_rank: 20, svd_tol: 1e-2, enrich: 2 },
        seed,
        ..Default::default()
    }
}

const CS_STEP: Integrator = Integrator::Rk4 { h: 0.01 };

fn criterion_5() -> Verdict {
    let spec = make_cucker_smale(2).expect("spec");
    let p = spec.problem().expect("problem").clone();
    let x0 = spec.x0.clone().expect("x0");
    let rf = simulate(&p, &FeedbackLaw::SdreGradient, &x0, spec.horizon, CS_STEP, SimOptions::default()).expect("reference");
    let rep = gradient_cross(&SdreOracle::new(p.clone()), spec.bases().expect("bases"), &cs_config(1e-3, 0)).expect("cross");
    let tr = simulate(&p, &FeedbackLaw::Tt(rep.ftt.clone()), &x0, spec.horizon, CS_STEP, SimOptions::default()).expect("tt run");
    let m = metrics(&tr, &rf).expect("metrics");
    let pmp = pmp_sample(&p, &x0, &PmpConfig::default()).expect("pmp");
    let dp = (pmp.value - rf.cost).abs();
    report(
        5,
        m.err_j <= 1e-3 && m.y_max <= 1e-4 && dp <= 1e-3,
        format!(
            "cucker-smale N_a=2: J_SDRE {:.6}, J_TT {:.6}, err_J {:.3e} (<= 1e-3), y_max {:.3e} (<= 1e-4), PMP V(x0) {:.6} diff {dp:.3e} (<= 1e-3)",
            rf.cost, tr.cost, m.err_j, m.y_max, pmp.value
        ),
    )
}

/// Output of the dimension sweep reused by the timing and Two Boxes checks.
struct SweepArtifacts {
    ftt20: Ftt,
    ref20: TrajectoryResult,
}

fn criterion_6() -> (Verdict, SweepArtifacts) {
    let t0 = Instant::now();
    let mut pass = true;
    let mut parts = vec![];
    let mut kept = None;
    let mut pooled = [0.0; 2];
    for d in (4..=20).step_by(2) {
        let spec = make_cucker_smale(d / 2).expect("spec");
        let p = spec.problem().expect("problem").clone();
        let x0 = spec.x0.clone().expect("x0");
        let rf =
            simulate(&p, &FeedbackLaw::SdreGradient, &x0, spec.horizon, CS_STEP, SimOptions::default()).expect("reference");
        let mut means = [0.0; 2];
        let mut max_rank = 0;
        for (slot, lambda) in [0.0, 1e-3].into_iter().enumerate() {
            let mut errs = vec![];
            for seed in 0..5 {
                let rep =
                    gradient_cross(&SdreOracle::new(p.clone()), spec.bases().expect("bases"), &cs_config(lambda, seed))
                        .expect("cross");
                max_rank = max_rank.max(rep.ftt.max_rank());
                let err = match simulate(&p, &FeedbackLaw::Tt(rep.ftt.clone()), &x0, spec.horizon, CS_STEP, SimOptions::default()) {
                    Ok(tr) => metrics(&tr, &rf).expect("metrics").err_j,
                    Err(_) => f64::INFINITY,
                };
                errs.push(err);
                if d == 20 && lambda == 1e-3 && seed == 0 {
                    kept = Some(rep.ftt);
                }
            }
            means[slot] = mean(&errs);
            pooled[slot] += means[slot] / 9.0;
        }
        let ok = max_rank <= 20 && means[1] <= means[0];
        pass &= ok;
        parts.push(format!("d={d} rank {max_rank} err_J {:.2e}/{:.2e}", means[1], means[0]));
        if d == 20 {
            let artifacts = SweepArtifacts { ftt20: kept.take().expect("d=20 run"), ref20: rf };
            let secs = t0.elapsed().as_secs_f64();
            pass &= secs <= 1800.0;
            let v = report(
                6,
                pass,
                format!(
                    "sweep (lambda=1e-3 / lambda=0, mean of 5 seeds, need rank <= 20 and first <= second): {}; pooled over d (info) {:.2e}/{:.2e}; {secs:.0}s (<= 1800s)",
                    parts.join(", "),
                    pooled[1],
                    pooled[0]
                ),
            );
            return (v, artifacts);
        }
    }
    unreachable!("sweep ends at d = 20")
}

fn latency(problem: &ControlProblem, law: &FeedbackLaw, pts: &[Vec<f64>]) -> f64 {
    for x in pts.iter().take(20) {
        law.feedback(problem, x).expect("warmup");
    }
    let times: Vec<f64> = pts
        .iter()
        .map(|x| {
            let t = Instant::now();
            std::hint::black_box(law.feedback(problem, std::hint::black_box(x)).expect("feedback"));
            t.elapsed().as_secs_f64()
        })
        .collect();
    median(times)
}

fn criterion_7(art: &SweepArtifacts) -> Verdict {
    let spec = make_cucker_smale(10).expect("spec");
    let p = spec.problem().expect("problem").clone();
    let pts = points(20, 1000, 0.5, 21);
    let tt = FeedbackLaw::Tt(art.ftt20.clone());
    let a_tb = two_boxes_calibrate(&p, &tt, spec.horizon, CS_STEP).expect("calibrate");
    let composite = FeedbackLaw::composite(tt.clone(), lqr_law(&p).expect("lqr"), a_tb);
    let t_sdre = latency(&p, &FeedbackLaw::SdreGradient, &pts);
    let t_tt = latency(&p, &tt, &pts);
    let t_tb = latency(&p, &composite, &pts);
    report(
        7,
        t_tt < t_sdre / 10.0,
        format!(
            "d=20 median latency: SDRE {t_sdre:.3e}s, TT {t_tt:.3e}s, Two Boxes {t_tb:.3e}s, ratio {:.1} (> 10)",
            t_sdre / t_tt
        ),
    )
}

fn criterion_8() -> Verdict {
    let spec = make_lorenz(10.0, 2.0, 8.0 / 3.0, 1e-3, LorenzForm::Standard).expect("spec");
    let p = spec.problem().expect("problem").clone();
    let x0 = spec.x0.clone().expect("x0");
    let mut steps = [0usize; 2];
    let mut y = [0.0; 2];
    for (slot, lambda) in [0.0, 1.0].into_iter().enumerate() {
        let cfg = CrossConfig {
            lambda,
            tol: 1e-2,
            it_max: 10,
            rank: RankPolicy::Adaptive { init: 2, max_rank: 6, svd_tol: 1e-2, enrich: 2 },
            ..Default::default()
        };
        let rep = gradient_cross(&SdreOracle::new(p.clone()), spec.bases().expect("bases"), &cfg).expect("cross");
        match simulate(&p, &FeedbackLaw::Tt(rep.ftt), &x0, spec.horizon, Integrator::rk45(), SimOptions::default()) {
            Ok(tr) => {
                steps[slot] = tr.steps;
                y[slot] = tr.y_max;
            }
            Err(_) => {
                steps[slot] = usize::MAX;
                y[slot] = f64::INFINITY;
            }
        }
    }
    let ratio = steps[0] as f64 / steps[1] as f64;
    report(
        8,
        y[1] <= 1e-2 && ratio >= 10.0,
        format!(
            "lorenz gamma=1e-3: |y(T)| {:.3e} (lambda=1, <= 1e-2), {:.3e} (lambda=0); RK45 steps lambda=0 {} vs lambda=1 {}, ratio {ratio:.2} (>= 10)",
            y[1], y[0], steps[0], steps[1]
        ),
    )
}

fn constrained_run(r: usize, lambda: f64) -> Result<TrajectoryResult, String> {
    let spec = make_2d_constrained(20.0).expect("spec");
    let p = spec.problem().expect("problem").clone();
    let x0 = spec.x0.clone().expect("x0");
    let pmp = PmpConfig { u_max: Some(20.0), ..Default::default() };
    let oracle = PmpOracle::new(p.clone(), pmp).expect("oracle");
    let cfg = CrossConfig { lambda, tol: 1e-4, it_max: 10, seed: 0, ..Default::default() };
    let b = spec.bases().expect("bases");
    let rep = gradient_cross_2d(&oracle, [b[0].clone(), b[1].clone()], r, &cfg).map_err(|e| e.to_string())?;
    simulate(&p, &FeedbackLaw::Tt(rep.ftt), &x0, spec.horizon, Integrator::Rk4 { h: 0.01 }, SimOptions { u_max: Some(20.0) })
        .map_err(|e| e.to_string())
}

fn criterion_9() -> Verdict {
    let lambdas = [0.0, 1e-4, 1e-3, 1e-2];
    let mut costs = vec![];
    let mut stable = true;
    let mut parts = vec![];
    for &lambda in &lambdas {
        match constrained_run(6, lambda) {
            Ok(tr) => {
                stable &= tr.y_max <= 1e-2;
                parts.push(format!("{lambda:e}: J {:.5} y_max {:.1e}", tr.cost, tr.y_max));
                costs.push(tr.cost);
            }
            Err(e) => {
                stable = false;
                parts.push(format!("{lambda:e}: {e}"));
                costs.push(f64::INFINITY);
            }
        }
    }
    let better = costs[1..].iter().any(|&c| c < costs[0]);
    let r5 = match constrained_run(5, 0.0) {
        Ok(tr) => format!("rank 5 (may fail to stabilize): y_max {:.2e}", tr.y_max),
        Err(e) => format!("rank 5 (may fail to stabilize): {e}"),
    };
    report(9, stable && better, format!("constrained 2d u_max=20 rank 6: {}; {r5}", parts.join(", ")))
}

fn criterion_10(art: &SweepArtifacts) -> Verdict {
    let spec = make_cucker_smale(10).expect("spec");
    let p = spec.problem().expect("problem").clone();
    let x0 = spec.x0.clone().expect("x0");
    let tt = FeedbackLaw::Tt(art.ftt20.clone());
    let a_tb = two_boxes_calibrate(&p, &tt, spec.horizon, CS_STEP).expect("calibrate");
    let composite = FeedbackLaw::composite(tt.clone(), lqr_law(&p).expect("lqr"), a_tb);
    let run = |law: &FeedbackLaw| {
        let tr = simulate(&p, law, &x0, spec.horizon, CS_STEP, SimOptions::default()).expect("run");
        metrics(&tr, &art.ref20).expect("metrics")
    };
    let (m_tt, m_tb) = (run(&tt), run(&composite));
    let ratio = m_tt.y_max / m_tb.y_max;
    let j_ratio = m_tb.err_j / m_tt.err_j;
    report(
        10,
        ratio >= 5.0 && (0.5..=2.0).contains(&j_ratio),
        format!(
            "two boxes d=20 (a_TB {a_tb:.3e}): y_max {:.3e} -> {:.3e} ({ratio:.1}x, >= 5), err_J {:.3e} -> {:.3e} (ratio {j_ratio:.2} in [0.5, 2])",
            m_tt.y_max, m_tb.y_max, m_tt.err_j, m_tb.err_j
        ),
    )
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn criterion_11() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let delta = 1e-2;
    let mut worst_c: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.random_range(1..=6);
        let rows = r + rng.random_range(0..30);
        let m = random_mat(&mut rng, rows, r);
        let res = maxvol(&m, delta).expect("maxvol");
        worst_c = worst_c.max(res.coeff.amax());
    }

    let mut worst_are: f64 = 0.0;
    let mut worst_syl: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=12);
        let a = random_mat(&mut rng, n, n);
        let cols = rng.random_range(1..=n);
        let b = random_mat(&mut rng, n, cols);
        let g = random_mat(&mut rng, n, n);
        let q = &g * g.transpose() + Mat::identity(n, n);
        let r = Mat::identity(b.ncols(), b.ncols());
        let sol = solve_are(&a, &b, &q, &r).expect("are");
        let w = &b * b.transpose();
        let scale = q.norm().max((a.transpose() * &sol.pi + &sol.pi * &a).norm());
        worst_are = worst_are.max(riccati_residual(&a, &w, &q, &sol.pi).norm() / scale);
        let m = rng.random_range(1..=10);
        let sa = random_mat(&mut rng, n, n) + Mat::identity(n, n) * 4.0;
        let sb = random_mat(&mut rng, m, m) + Mat::identity(m, m) * 4.0;
        let c = random_mat(&mut rng, n, m);
        let x = solve_sylvester(&sa, &sb, &c).expect("sylvester");
        worst_syl = worst_syl.max((&sa * &x + &x * &sb - &c).norm() / c.norm());
    }

    let mut worst_grad: f64 = 0.0;
    for trial in 0..20 {
        let d = rng.random_range(1..=5);
        let kind = if trial % 2 == 0 { BasisKind::Legendre } else { BasisKind::Lagrange };
        let bases: Vec<Basis> = (0..d).map(|_| Basis::new(kind, rng.random_range(2..=6), (-1.0, 1.0)).unwrap()).collect();
        let mut ranks = vec![1];
        ranks.extend((1..d).map(|_| rng.random_range(1..=3)));
        ranks.push(1);
        let cores = (0..d)
            .map(|k| (0..ranks[k] * bases[k].len() * ranks[k + 1]).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ftt = Ftt::new(bases, ranks, cores).expect("ftt");
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.9..0.9)).collect();
        let g = ftt.grad(&x).expect("grad");
        let h = 1e-5;
        let fd: Vec<f64> = (0..d)
            .map(|i| {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += h;
                xm[i] -= h;
                (ftt.eval(&xp).unwrap() - ftt.eval(&xm).unwrap()) / (2.0 * h)
            })
            .collect();
        let num = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        worst_grad = worst_grad.max(num / den);
    }

    let mut worst_ls: f64 = 0.0;
    for trial in 0..50 {
        let (r0, n, r1) = (rng.random_range(1..=3), rng.random_range(2..=4), rng.random_range(1..=3));
        let k = rng.random_range(0..3);
        let right_vars = rng.random_range(0..3);
        let d = k + 1 + right_vars;
        let basis = Basis::new(if trial % 2 == 0 { BasisKind::Lagrange } else { BasisKind::Legendre }, n, (-1.0, 1.0)).unwrap();
        let gl = if k == 0 { Mat::identity(1, 1) } else { random_mat(&mut rng, r0 + 1, r0) + Mat::identity(r0 + 1, r0) };
        let (p, r0) = gl.shape();
        let dgl: Vec<Mat> = (0..k).map(|_| random_mat(&mut rng, p, r0)).collect();
        let gr = if right_vars == 0 { Mat::identity(1, 1) } else { random_mat(&mut rng, r1, r1 + 1) + Mat::identity(r1, r1 + 1) };
        let (r1, q) = gr.shape();
        let dgr: Vec<Mat> = (0..right_vars).map(|_| random_mat(&mut rng, r1, q)).collect();
        let npts = p * n * q;
        let values: Vec<f64> = (0..npts).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grads: Vec<f64> = (0..npts * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = [0.0, 0.5, 3.0][trial % 3];
        let sys = CoreSystem { k, basis: &basis, gl: &gl, dgl: &dgl, gr: &gr, dgr: &dgr };
        let h = solve_core_ls(&sys, &values, &grads, lambda).expect("core ls");
        let dense = common::dense_core_solution(&sys, &values, &grads, lambda);
        let scale = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = h.iter().zip(&dense).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst_ls = worst_ls.max(err / scale);
    }

    let rerun = || {
        let oracle = noisy_wrap(FnOracle::exp_prod(6), 1e-3, 5);
        let b: Vec<Basis> = (0..6).map(|_| Basis::new(BasisKind::Legendre, 6, (-1.0, 1.0)).unwrap()).collect();
        let cfg = CrossConfig {
            lambda: 1e-2,
            tol: 1e-6,
            it_max: 4,
            rank: RankPolicy::Adaptive { init: 2, max_rank: 5, svd_tol: 1e-6, enrich: 2 },
            seed: 9,
            ..Default::default()
        };
        ftt_to_bytes(&gradient_cross(&oracle, b, &cfg).expect("cross").ftt)
    };
    let identical = rerun() == rerun();

    let pass = worst_c <= 1.0 + delta + 1e-12
        && worst_are <= 1e-8
        && worst_syl <= 1e-8
        && worst_grad <= 1e-6
        && worst_ls <= 1e-8
        && identical;
    report(
        11,
        pass,
        format!(
            "maxvol max|C| {worst_c:.6} (<= {}), ARE residual {worst_are:.2e}, Sylvester residual {worst_syl:.2e} (<= 1e-8), FTT grad vs FD {worst_grad:.2e} (<= 1e-6), core LS vs dense {worst_ls:.2e} (<= 1e-8), byte-identical rerun {identical}",
            1.0 + delta
        ),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and filters are harmless no-ops here.
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let t0 = Instant::now();
    let mut verdicts = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5()];
    let (v6, sweep) = criterion_6();
    verdicts.push(v6);
    verdicts.push(criterion_7(&sweep));
    verdicts.push(criterion_8());
    verdicts.push(criterion_9());
    verdicts.push(criterion_10(&sweep));
    verdicts.push(criterion_11());
    verdicts.sort_by_key(|v| v.id);
    let failed: Vec<&Verdict> = verdicts.iter().filter(|v| !v.pass).collect();
    println!(
        "acceptance: {} passed, {} failed, {:.0}s",
        verdicts.len() - failed.len(),
        failed.len(),
        t0.elapsed().as_secs_f64()
    );
    for v in &failed {
        println!("  failed {}: {}", v.id, v.detail);
    }
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
