//! The `approximate`, `simulate` and `sample-test` commands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use ttfeedback::control::{
    lqr_law, metrics, simulate, two_boxes_calibrate, FeedbackLaw, Integrator, SimOptions, TrajectoryResult,
};
use ttfeedback::cross::{gradient_cross, gradient_cross_2d, CrossConfig};
use ttfeedback::ftt::Ftt;
use ttfeedback::io::{fmt_f64, load_ftt, save_ftt, save_trajectory_csv};
use ttfeedback::models::{function_oracle, BenchmarkSpec};
use ttfeedback::sampler::{noisy_wrap, Oracle, PmpOracle, SdreOracle};

use crate::config::{Algorithm, LawSpec, RunConfig, SamplerSpec};
use crate::{write_json, CliError};

pub const FTT_FILE: &str = "value.ftt";

/// Sampler named by the config, with noise applied on top.
pub fn build_oracle(config: &RunConfig, spec: &BenchmarkSpec) -> Result<Box<dyn Oracle + Send>, CliError> {
    let sampler = config.sampler.ok_or_else(|| CliError::Usage("sampler not resolved".into()))?;
    let inner: Box<dyn Oracle + Send> = match sampler {
        SamplerSpec::Analytic => Box::new(function_oracle(spec).map_err(|e| CliError::Usage(e.to_string()))?),
        SamplerSpec::Sdre => Box::new(SdreOracle::new(spec.problem()?.clone())),
        SamplerSpec::Pmp { .. } | SamplerSpec::PmpConstrained { .. } => {
            let cfg = sampler.pmp_config().expect("pmp sampler");
            Box::new(PmpOracle::new(spec.problem()?.clone(), cfg).map_err(|e| CliError::Usage(e.to_string()))?)
        }
    };
    if config.noise > 0.0 {
        Ok(Box::new(noisy_wrap(inner, config.noise, config.seed)))
    } else {
        Ok(inner)
    }
}

pub fn cross_config(config: &RunConfig) -> CrossConfig {
    CrossConfig {
        lambda: config.lambda.unwrap_or(0.0),
        tol: config.tol.unwrap_or(1e-4),
        it_max: config.it_max,
        rank: config.rank.expect("rank resolved").policy(),
        seed: config.seed,
        verbose: config.verbose,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    pub problem: String,
    pub dim: usize,
    pub ranks: Vec<usize>,
    pub max_rank: usize,
    pub sweeps: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub oracle_calls: usize,
    pub wall_time_s: f64,
    pub log: Vec<String>,
}

/// Runs the configured cross algorithm.
pub fn build_ftt(config: &RunConfig, spec: &BenchmarkSpec) -> Result<(Ftt, ApproxReport), CliError> {
    let oracle = build_oracle(config, spec)?;
    let bases = config.bases(spec)?;
    let cfg = cross_config(config);
    let t0 = Instant::now();
    let (ftt, sweeps, residuals, converged, oracle_calls, log) = match config.algorithm {
        Some(Algorithm::Cross2d) => {
            let rank = match cfg.rank {
                ttfeedback::cross::RankPolicy::Fixed(r) => r,
                _ => return Err(CliError::Usage("cross-2d needs a fixed rank".into())),
            };
            let rep = gradient_cross_2d(oracle.as_ref(), [bases[0].clone(), bases[1].clone()], rank, &cfg)?;
            (rep.ftt, rep.iterations, rep.residuals, rep.converged, rep.oracle_calls, vec![])
        }
        _ => {
            let rep = gradient_cross(oracle.as_ref(), bases, &cfg)?;
            (rep.ftt, rep.iterations, rep.residuals, rep.converged, rep.oracle_calls, rep.log)
        }
    };
    let report = ApproxReport {
        problem: spec.name.clone(),
        dim: spec.dim,
        ranks: ftt.ranks().to_vec(),
        max_rank: ftt.max_rank(),
        sweeps,
        residuals,
        converged,
        oracle_calls,
        wall_time_s: t0.elapsed().as_secs_f64(),
        log,
    };
    Ok((ftt, report))
}

pub fn approximate(config: &RunConfig) -> Result<(), CliError> {
    let spec = config.spec()?;
    write_json(&config.out.join("config.json"), config)?;
    let (ftt, report) = build_ftt(config, &spec)?;
    save_ftt(&ftt, config.out.join(FTT_FILE))?;
    write_json(&config.out.join("report.json"), &report)?;
    eprintln!(
        "approximate: ranks {:?}, {} sweeps, {} oracle calls, final residual {:e}",
        report.ranks,
        report.sweeps,
        report.oracle_calls,
        report.residuals.last().copied().unwrap_or(f64::NAN)
    );
    if !report.converged {
        return Err(CliError::Failed(format!(
            "cross did not reach tol {:e} in {} sweeps; residual trace in report.json",
            config.tol.unwrap_or(0.0),
            report.sweeps
        )));
    }
    Ok(())
}

/// Loads an FTT and checks it lives on the problem's domain.
pub fn load_checked(path: &Path, spec: &BenchmarkSpec) -> Result<Ftt, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("FTT file {} not found", path.display())));
    }
    let ftt = load_ftt(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    if ftt.dim() != spec.dim {
        return Err(CliError::Usage(format!(
            "domain mismatch: FTT has dimension {}, problem {} has {}",
            ftt.dim(),
            spec.name,
            spec.dim
        )));
    }
    let a = spec.half_width;
    for (k, b) in ftt.bases().iter().enumerate() {
        let (lo, hi) = b.interval();
        if (lo + a).abs() > 1e-12 * a || (hi - a).abs() > 1e-12 * a {
            return Err(CliError::Usage(format!(
                "domain mismatch: FTT variable {k} lives on [{lo}, {hi}], problem {} on [{}, {a}]",
                spec.name, -a
            )));
        }
    }
    Ok(ftt)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationMetrics {
    pub law: LawSpec,
    pub cost: f64,
    pub y_max: f64,
    pub step_count: usize,
    pub rejected_steps: usize,
    pub out_of_domain: usize,
    pub a_tb: Option<f64>,
    pub reference_cost: Option<f64>,
    pub err_j: Option<f64>,
    pub err_u: Option<f64>,
}

pub fn feedback_law(
    config: &RunConfig,
    spec: &BenchmarkSpec,
    horizon: f64,
    integrator: Integrator,
) -> Result<(FeedbackLaw, Option<f64>), CliError> {
    let problem = spec.problem()?;
    let ftt_path = || default_ftt_path(config);
    Ok(match config.law {
        LawSpec::Tt => (FeedbackLaw::Tt(load_checked(&ftt_path(), spec)?), None),
        LawSpec::Lqr => (lqr_law(problem)?, None),
        LawSpec::Sdre => (FeedbackLaw::SdreGradient, None),
        LawSpec::TwoBoxes => {
            let tt = FeedbackLaw::Tt(load_checked(&ftt_path(), spec)?);
            let a_tb = two_boxes_calibrate(problem, &tt, horizon, integrator)?;
            (FeedbackLaw::composite(tt, lqr_law(problem)?, a_tb), Some(a_tb))
        }
    })
}

pub struct SimulationOutput {
    pub trajectory: TrajectoryResult,
    pub reference: Option<TrajectoryResult>,
    pub metrics: SimulationMetrics,
}

pub fn run_simulation(config: &RunConfig, spec: &BenchmarkSpec) -> Result<SimulationOutput, CliError> {
    let problem = spec.problem().map_err(|e| CliError::Usage(e.to_string()))?;
    let horizon = config.horizon.unwrap_or(spec.horizon);
    let integrator = config.integrator.unwrap_or_default();
    let x0 = config.x0.clone().ok_or_else(|| CliError::Usage("no initial state".into()))?;
    let (law, a_tb) = feedback_law(config, spec, horizon, integrator)?;
    let options = SimOptions { u_max: spec.u_max };
    let trajectory = simulate(problem, &law, &x0, horizon, integrator, options)?;
    let reference = if config.reference {
        Some(simulate(problem, &FeedbackLaw::SdreGradient, &x0, horizon, integrator, options)?)
    } else {
        None
    };
    let m = reference.as_ref().map(|r| metrics(&trajectory, r)).transpose()?;
    let metrics = SimulationMetrics {
        law: config.law,
        cost: trajectory.cost,
        y_max: trajectory.y_max,
        step_count: trajectory.steps,
        rejected_steps: trajectory.rejected,
        out_of_domain: trajectory.out_of_domain,
        a_tb,
        reference_cost: reference.as_ref().map(|r| r.cost),
        err_j: m.map(|m| m.err_j),
        err_u: m.map(|m| m.err_u),
    };
    Ok(SimulationOutput { trajectory, reference, metrics })
}

pub fn simulate_cmd(config: &RunConfig) -> Result<(), CliError> {
    let spec = config.spec()?;
    write_json(&config.out.join("config.json"), config)?;
    let out = run_simulation(config, &spec)?;
    save_trajectory_csv(&out.trajectory, config.out.join("trajectory.csv"))?;
    if let Some(r) = &out.reference {
        save_trajectory_csv(r, config.out.join("reference.csv"))?;
    }
    write_json(&config.out.join("metrics.json"), &out.metrics)?;
    eprintln!(
        "simulate: cost {:.6}, y_max {:e}, {} steps{}",
        out.metrics.cost,
        out.metrics.y_max,
        out.metrics.step_count,
        out.metrics.err_j.map(|e| format!(", err_J {e:e}")).unwrap_or_default()
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleTestReport {
    pub samples: usize,
    pub max_rel_grad_err: f64,
    pub median_sample_s: f64,
    pub fd_step: f64,
    pub passed: bool,
}

/// Relative gradient agreement required of noise-free oracles.
pub const SAMPLE_TEST_TOL: f64 = 1e-4;

/// Compares oracle gradients with central differences of oracle values.
pub fn sample_test(config: &RunConfig) -> Result<(), CliError> {
    let spec = config.spec()?;
    write_json(&config.out.join("config.json"), config)?;
    let oracle = build_oracle(config, &spec)?;
    let d = spec.dim;
    let a = spec.half_width;
    let h = 1e-5 * a;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Vec::with_capacity(config.samples);
    let mut times = Vec::with_capacity(config.samples);
    let mut worst: f64 = 0.0;
    for _ in 0..config.samples {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.9 * a..0.9 * a)).collect();
        let t = Instant::now();
        let s = oracle.sample(&x, true)?;
        times.push(t.elapsed().as_secs_f64());
        let g = s.grad.expect("gradient requested");
        let mut fd = vec![0.0; d];
        for i in 0..d {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (oracle.sample(&xp, false)?.value - oracle.sample(&xm, false)?.value) / (2.0 * h);
        }
        let num = g.iter().zip(&fd).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let den = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let rel = num / den;
        worst = worst.max(rel);
        let mut row: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
        row.push(fmt_f64(s.value));
        row.extend(g.iter().map(|v| fmt_f64(*v)));
        row.extend(fd.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(rel));
        rows.push(row.join(","));
    }
    let mut f = std::fs::File::create(config.out.join("samples.csv"))?;
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    header.extend((1..=d).map(|i| format!("g{i}")));
    header.extend((1..=d).map(|i| format!("fd{i}")));
    header.push("rel_err".into());
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    times.sort_by(f64::total_cmp);
    let passed = config.noise > 0.0 || worst <= SAMPLE_TEST_TOL;
    let report = SampleTestReport {
        samples: config.samples,
        max_rel_grad_err: worst,
        median_sample_s: times.get(times.len() / 2).copied().unwrap_or(0.0),
        fd_step: h,
        passed,
    };
    write_json(&config.out.join("report.json"), &report)?;
    eprintln!("sample-test: {} samples, max relative gradient error {worst:e}", config.samples);
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!("gradient check failed: {worst:e} > {SAMPLE_TEST_TOL:e}")))
    }
}

pub fn default_ftt_path(config: &RunConfig) -> PathBuf {
    config.ftt.clone().unwrap_or_else(|| config.out.join(FTT_FILE))
}
