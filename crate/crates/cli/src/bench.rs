//! Benchmark suites. Each writes `<suite>.csv` and `<suite>_verdict.json`
//! into the output directory; the exit code reflects failed checks.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use ttfeedback::control::{
    lqr_law, metrics, simulate, two_boxes_calibrate, FeedbackLaw, Integrator, SimOptions, TrajectoryResult,
};
use ttfeedback::cross::{gradient_cross, gradient_cross_2d, CrossConfig, RankPolicy};
use ttfeedback::ftt::Ftt;
use ttfeedback::io::fmt_f64;
use ttfeedback::models::{
    function_oracle, lookup, make_2d_constrained, make_2d_exact, make_cucker_smale, make_lorenz, LorenzForm,
    ModelParams,
};
use ttfeedback::sampler::{noisy_wrap, ControlProblem, Oracle, PmpConfig, PmpOracle, SdreOracle};

use crate::config::RunConfig;
use crate::{write_json, CliError};

pub const SUITES: &[&str] = &["functions", "2d", "2d-constrained", "lorenz", "cucker-smale", "timing"];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Rows that raised an error, with the message.
    pub row_failures: Vec<String>,
    pub wall_time_s: f64,
}

/// Table under construction.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    checks: Vec<Check>,
    failures: Vec<String>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: vec![], checks: vec![], failures: vec![] }
    }

    fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check { name: name.into(), pass, detail });
    }
}

fn num(v: f64) -> String {
    fmt_f64(v)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::INFINITY
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn points(d: usize, count: usize, half: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..d).map(|_| rng.random_range(-half..half)).collect()).collect()
}

pub fn run_suite(config: &RunConfig) -> Result<(), CliError> {
    let suite = config
        .suite
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("benchmark needs --suite, one of {}", SUITES.join(", "))))?;
    if !SUITES.contains(&suite) {
        return Err(CliError::Usage(format!("unknown suite {suite:?}; expected one of {}", SUITES.join(", "))));
    }
    write_json(&config.out.join("config.json"), config)?;
    let t0 = Instant::now();
    let table = match suite {
        "functions" => functions(config),
        "2d" => two_d(config),
        "2d-constrained" => two_d_constrained(),
        "lorenz" => lorenz(config),
        "cucker-smale" => cucker_smale(config),
        _ => timing(config),
    };
    let mut f = std::fs::File::create(config.out.join(format!("{suite}.csv")))?;
    writeln!(f, "{}", table.header.join(","))?;
    for r in &table.rows {
        writeln!(f, "{}", r.join(","))?;
    }
    let passed = table.failures.is_empty() && table.checks.iter().all(|c| c.pass);
    let verdict = Verdict {
        suite: suite.into(),
        passed,
        checks: table.checks,
        row_failures: table.failures,
        wall_time_s: t0.elapsed().as_secs_f64(),
    };
    write_json(&config.out.join(format!("{suite}_verdict.json")), &verdict)?;
    for c in &verdict.checks {
        eprintln!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for e in &verdict.row_failures {
        eprintln!("row failed: {e}");
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!("suite {suite} failed")))
    }
}

fn function_error(name: &str, dim: usize, sigma: f64, rank: usize, lambda: f64) -> Result<(f64, usize), String> {
    let params = ModelParams { d: Some(dim), ..Default::default() };
    let spec = lookup(name, &params).map_err(|e| e.to_string())?;
    let exact = function_oracle(&spec).map_err(|e| e.to_string())?;
    let oracle = noisy_wrap(function_oracle(&spec).map_err(|e| e.to_string())?, sigma, 3);
    let cfg = CrossConfig { lambda, tol: 1e-4, it_max: 10, rank: RankPolicy::Fixed(rank), ..Default::default() };
    let rep = gradient_cross(&oracle, spec.bases().map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
    let pts = points(dim, 1000, 1.0, 11);
    let mut err = 0.0;
    for x in &pts {
        let v = rep.ftt.eval(x).map_err(|e| e.to_string())?;
        err += (v - exact.sample(x, false).map_err(|e| e.to_string())?.value).abs();
    }
    Ok((err / pts.len() as f64, rep.oracle_calls))
}

fn functions(config: &RunConfig) -> Table {
    let dim = config.params.d.unwrap_or(100);
    let mut t = Table::new(&["function", "d", "sigma", "lambda", "rank", "mean_err", "oracle_calls"]);
    let mut runs = vec![("function-a", 0.0, 1, 0.0)];
    runs.push(("function-b", 0.1, 2, 0.0));
    runs.extend((0..=6).map(|k| ("function-b", 0.1, 2, 10f64.powi(-k))));
    let mut a_err = f64::INFINITY;
    let mut b_base = f64::INFINITY;
    let mut b_best = f64::INFINITY;
    for (name, sigma, rank, lambda) in runs {
        match function_error(name, dim, sigma, rank, lambda) {
            Ok((err, calls)) => {
                t.row(vec![name.into(), dim.to_string(), num(sigma), num(lambda), rank.to_string(), num(err), calls.to_string()]);
                match (name, lambda == 0.0) {
                    ("function-a", _) => a_err = err,
                    (_, true) => b_base = err,
                    _ => b_best = b_best.min(err),
                }
            }
            Err(e) => t.failures.push(format!("{name} sigma={sigma} lambda={lambda}: {e}")),
        }
    }
    t.check("function-a rank 1", a_err <= 1e-6, format!("mean error {a_err:e} <= 1e-6"));
    t.check(
        "function-b gradients help",
        b_best <= 0.5 * b_base,
        format!("best lambda > 0 error {b_best:e} <= 0.5 x lambda=0 error {b_base:e}"),
    );
    t
}

fn two_d_stats(problem: &ControlProblem, ftts: &[Ftt], starts: &[Vec<f64>], refs: &[TrajectoryResult]) -> (f64, f64, usize) {
    let integ = Integrator::Rk4 { h: 0.02 };
    let (mut ej, mut eu, mut diverged) = (vec![], vec![], 0);
    for ftt in ftts {
        let law = FeedbackLaw::Tt(ftt.clone());
        for (x0, rf) in starts.iter().zip(refs) {
            match simulate(problem, &law, x0, 20.0, integ, SimOptions::default()).and_then(|tr| metrics(&tr, rf)) {
                Ok(m) => {
                    ej.push(m.err_j);
                    eu.push(m.err_u);
                }
                Err(_) => diverged += 1,
            }
        }
    }
    (mean(&ej), mean(&eu), diverged)
}

fn two_d(config: &RunConfig) -> Table {
    let spec = make_2d_exact();
    let p = spec.problem().expect("2d problem").clone();
    let mut t = Table::new(&["sigma", "lambda", "err_j", "err_u", "diverged", "runs"]);
    let starts = points(2, 20, 1.0, 1);
    let integ = Integrator::Rk4 { h: 0.02 };
    let refs: Vec<TrajectoryResult> = match starts
        .iter()
        .map(|x0| simulate(&p, &FeedbackLaw::SdreGradient, x0, 20.0, integ, SimOptions::default()))
        .collect()
    {
        Ok(r) => r,
        Err(e) => {
            t.failures.push(format!("reference trajectories: {e}"));
            return t;
        }
    };
    let seeds = config.bench_seeds.max(1) as u64;
    let mut table = std::collections::BTreeMap::new();
    for (si, sigma) in [0.0, 1e-4, 1e-3, 1e-2, 1e-1].into_iter().enumerate() {
        for (li, lambda) in [0.0, 1e-4, 1.0].into_iter().enumerate() {
            let mut ftts = vec![];
            for seed in 0..seeds {
                let oracle = noisy_wrap(SdreOracle::new(p.clone()), sigma, seed);
                let cfg =
                    CrossConfig { lambda, tol: 1e-4, it_max: 10, rank: RankPolicy::Fixed(3), seed, ..Default::default() };
                match gradient_cross(&oracle, spec.bases().expect("bases"), &cfg) {
                    Ok(rep) => ftts.push(rep.ftt),
                    Err(e) => t.failures.push(format!("sigma={sigma} lambda={lambda} seed={seed}: {e}")),
                }
            }
            let (ej, eu, div) = two_d_stats(&p, &ftts, &starts, &refs);
            t.row(vec![num(sigma), num(lambda), num(ej), num(eu), div.to_string(), (ftts.len() * starts.len()).to_string()]);
            table.insert((si, li), (ej, eu, div));
        }
    }
    let (ej, eu, div) = table[&(0, 0)];
    t.check("noise-free accuracy", ej <= 1e-6 && eu <= 1e-5 && div == 0, format!("err_J {ej:e} <= 1e-6, err_u {eu:e} <= 1e-5"));
    for si in [3, 4] {
        let (j0, u0, d0) = table[&(si, 0)];
        let (j1, u1, d1) = table[&(si, 2)];
        let sigma = [0.0, 1e-4, 1e-3, 1e-2, 1e-1][si];
        t.check(
            &format!("gradients help at sigma={sigma:e}"),
            u1 < u0 && j1 < j0 && d1 <= d0,
            format!("lambda=1 vs 0: err_u {u1:e} vs {u0:e}, err_J {j1:e} vs {j0:e}, diverged {d1} vs {d0}"),
        );
    }
    t
}

fn two_d_constrained() -> Table {
    let spec = make_2d_constrained(20.0).expect("constrained spec");
    let p = spec.problem().expect("problem").clone();
    let x0 = spec.x0.clone().expect("x0");
    let mut t = Table::new(&["rank", "lambda", "cost", "y_max", "stabilized", "oracle_calls"]);
    let mut costs = vec![];
    let mut stable = true;
    for (rank, lambda) in [(6, 0.0), (6, 1e-4), (6, 1e-3), (6, 1e-2), (5, 0.0)] {
        let run = || -> Result<(TrajectoryResult, usize), ttfeedback::Error> {
            let oracle = PmpOracle::new(p.clone(), PmpConfig { u_max: Some(20.0), ..Default::default() })?;
            let cfg = CrossConfig { lambda, tol: 1e-4, it_max: 10, seed: 0, ..Default::default() };
            let b = spec.bases()?;
            let rep = gradient_cross_2d(&oracle, [b[0].clone(), b[1].clone()], rank, &cfg)?;
            let tr = simulate(&p, &FeedbackLaw::Tt(rep.ftt), &x0, spec.horizon, Integrator::Rk4 { h: 0.01 }, SimOptions {
                u_max: Some(20.0),
            })?;
            Ok((tr, rep.oracle_calls))
        };
        match run() {
            Ok((tr, calls)) => {
                let ok = tr.y_max <= 1e-2;
                t.row(vec![rank.to_string(), num(lambda), num(tr.cost), num(tr.y_max), ok.to_string(), calls.to_string()]);
                if rank == 6 {
                    stable &= ok;
                    costs.push(tr.cost);
                }
            }
            Err(e) if rank == 5 => {
                t.row(vec!["5".into(), num(lambda), "nan".into(), "nan".into(), "false".into(), "0".into()]);
                eprintln!("rank 5 run did not stabilize: {e}");
            }
            Err(e) => {
                stable = false;
                costs.push(f64::INFINITY);
                t.failures.push(format!("rank {rank} lambda={lambda}: {e}"));
            }
        }
    }
    t.check("rank 6 stabilizes", stable, "y_max <= 1e-2 for every lambda".into());
    let best = costs[1..].iter().copied().fold(f64::INFINITY, f64::min);
    t.check("gradients lower the cost", best < costs[0], format!("best lambda > 0 cost {best} < lambda=0 cost {}", costs[0]));
    t
}

fn lorenz(config: &RunConfig) -> Table {
    let gamma = config.params.gamma.unwrap_or(1e-3);
    let spec = make_lorenz(10.0, 2.0, 8.0 / 3.0, gamma, LorenzForm::Standard).expect("lorenz spec");
    let p = spec.problem().expect("problem").clone();
    let x0 = spec.x0.clone().expect("x0");
    let mut t = Table::new(&["law", "lambda", "max_rank", "steps", "rejected", "cost", "y_max"]);
    let rk45 = Integrator::rk45();
    match simulate(&p, &FeedbackLaw::SdreGradient, &x0, spec.horizon, rk45, SimOptions::default()) {
        Ok(tr) => t.row(vec![
            "sdre".into(),
            "".into(),
            "".into(),
            tr.steps.to_string(),
            tr.rejected.to_string(),
            num(tr.cost),
            num(tr.y_max),
        ]),
        Err(e) => t.failures.push(format!("sdre: {e}")),
    }
    let mut steps = [f64::INFINITY; 2];
    let mut y = [f64::INFINITY; 2];
    for (slot, lambda) in [0.0, 1.0].into_iter().enumerate() {
        let cfg = CrossConfig {
            lambda,
            tol: 1e-2,
            it_max: 10,
            rank: RankPolicy::Adaptive { init: 2, max_rank: 6, svd_tol: 1e-2, enrich: 2 },
            ..Default::default()
        };
        let run = || -> Result<(TrajectoryResult, usize), ttfeedback::Error> {
            let rep = gradient_cross(&SdreOracle::new(p.clone()), spec.bases()?, &cfg)?;
            let r = rep.ftt.max_rank();
            Ok((simulate(&p, &FeedbackLaw::Tt(rep.ftt), &x0, spec.horizon, rk45, SimOptions::default())?, r))
        };
        match run() {
            Ok((tr, r)) => {
                steps[slot] = tr.steps as f64;
                y[slot] = tr.y_max;
                t.row(vec![
                    "tt".into(),
                    num(lambda),
                    r.to_string(),
                    tr.steps.to_string(),
                    tr.rejected.to_string(),
                    num(tr.cost),
                    num(tr.y_max),
                ]);
            }
            Err(e) => t.failures.push(format!("tt lambda={lambda}: {e}")),
        }
    }
    t.check("lambda=1 law stabilizes", y[1] <= 1e-2, format!("|y(T)| {:e} <= 1e-2", y[1]));
    let ratio = steps[0] / steps[1];
    t.check(
        "lambda=0 law is stiff",
        ratio >= 10.0,
        format!("RK45 steps lambda=0 / lambda=1 = {} / {} = {ratio:.2} >= 10", steps[0], steps[1]),
    );
    t
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

fn cucker_smale(config: &RunConfig) -> Table {
    let dims = config.dims.clone().unwrap_or_else(|| (4..=20).step_by(2).collect());
    let seeds = config.bench_seeds.max(1) as u64;
    let mut t = Table::new(&["d", "lambda", "seed", "max_rank", "err_j", "y_max", "oracle_calls"]);
    let mut rank_ok = true;
    let mut order = vec![];
    for d in dims {
        if d % 2 != 0 || d == 0 {
            t.failures.push(format!("d={d}: Cucker-Smale dimensions are even"));
            continue;
        }
        let spec = make_cucker_smale(d / 2).expect("cs spec");
        let p = spec.problem().expect("problem").clone();
        let x0 = spec.x0.clone().expect("x0");
        let rf = match simulate(&p, &FeedbackLaw::SdreGradient, &x0, spec.horizon, CS_STEP, SimOptions::default()) {
            Ok(r) => r,
            Err(e) => {
                t.failures.push(format!("d={d} reference: {e}"));
                continue;
            }
        };
        let mut means = [0.0; 2];
        for (slot, lambda) in [0.0, 1e-3].into_iter().enumerate() {
            let mut errs = vec![];
            for seed in 0..seeds {
                let run = || -> Result<(usize, f64, f64, usize), ttfeedback::Error> {
                    let rep = gradient_cross(&SdreOracle::new(p.clone()), spec.bases()?, &cs_config(lambda, seed))?;
                    let r = rep.ftt.max_rank();
                    let tr = simulate(&p, &FeedbackLaw::Tt(rep.ftt), &x0, spec.horizon, CS_STEP, SimOptions::default())?;
                    let m = metrics(&tr, &rf)?;
                    Ok((r, m.err_j, m.y_max, rep.oracle_calls))
                };
                match run() {
                    Ok((r, ej, ym, calls)) => {
                        rank_ok &= r <= 20;
                        errs.push(ej);
                        t.row(vec![d.to_string(), num(lambda), seed.to_string(), r.to_string(), num(ej), num(ym), calls.to_string()]);
                    }
                    Err(e) => {
                        errs.push(f64::INFINITY);
                        t.failures.push(format!("d={d} lambda={lambda} seed={seed}: {e}"));
                    }
                }
            }
            means[slot] = mean(&errs);
        }
        order.push((d, means[1], means[0]));
    }
    t.check("ranks bounded", rank_ok, "max TT rank <= 20 for every run".into());
    let ok = order.iter().all(|(_, a, b)| a <= b);
    let detail = order.iter().map(|(d, a, b)| format!("d={d}: {a:.2e} vs {b:.2e}")).collect::<Vec<_>>().join(", ");
    t.check("gradients help", ok, format!("mean err_J lambda=1e-3 <= lambda=0: {detail}"));
    t
}

/// Median wall time of single feedback evaluations, after a warmup.
pub fn median_latency(problem: &ControlProblem, law: &FeedbackLaw, pts: &[Vec<f64>]) -> Result<f64, ttfeedback::Error> {
    for x in pts.iter().take(20) {
        law.feedback(problem, x)?;
    }
    let mut times = Vec::with_capacity(pts.len());
    for x in pts {
        let t = Instant::now();
        std::hint::black_box(law.feedback(problem, std::hint::black_box(x))?);
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

fn timing(config: &RunConfig) -> Table {
    let na = config.params.na.unwrap_or(10);
    let mut t = Table::new(&["method", "d", "median_s", "evaluations"]);
    let run = || -> Result<Vec<(&'static str, f64)>, ttfeedback::Error> {
        let spec = make_cucker_smale(na)?;
        let p = spec.problem()?.clone();
        let rep = gradient_cross(&SdreOracle::new(p.clone()), spec.bases()?, &cs_config(1e-3, config.seed))?;
        let tt = FeedbackLaw::Tt(rep.ftt);
        let a_tb = two_boxes_calibrate(&p, &tt, spec.horizon, CS_STEP)?;
        let tb = FeedbackLaw::composite(tt.clone(), lqr_law(&p)?, a_tb);
        let pts = points(2 * na, 1000, 0.5, 21);
        Ok(vec![
            ("sdre", median_latency(&p, &FeedbackLaw::SdreGradient, &pts)?),
            ("tt", median_latency(&p, &tt, &pts)?),
            ("two-boxes", median_latency(&p, &tb, &pts)?),
        ])
    };
    match run() {
        Ok(rows) => {
            for (m, s) in &rows {
                t.row(vec![m.to_string(), (2 * na).to_string(), num(*s), "1000".into()]);
            }
            let (sdre, tt) = (rows[0].1, rows[1].1);
            t.check("tt latency", tt < sdre / 10.0, format!("TT {tt:e}s < SDRE {sdre:e}s / 10 (ratio {:.1})", sdre / tt));
        }
        Err(e) => t.failures.push(format!("timing: {e}")),
    }
    t
}
