//! Browser demo on the two-dimensional model: build a tensor-train value
//! function, run feedback trajectories from clicked states, and compare the
//! Riccati solver with the closed-form SDRE matrix.

use ttfeedback::control::{lqr_law, simulate, FeedbackLaw, Integrator, SimOptions};
use ttfeedback::cross::{gradient_cross, CrossConfig, RankPolicy};
use ttfeedback::ftt::Ftt;
use ttfeedback::models::{exact_pi, make_2d_exact};
use ttfeedback::sampler::{noisy_wrap, sdre_pi, ControlProblem, SdreOracle};
use wasm_bindgen::prelude::*;

const HORIZON: f64 = 20.0;
const STEP: f64 = 0.02;

/// Value of the closed-form SDRE solution, `xᵀ Π(x₁) x`.
pub fn exact_value(x: [f64; 2]) -> f64 {
    let p = exact_pi(x[0]);
    p[(0, 0)] * x[0] * x[0] + 2.0 * p[(0, 1)] * x[0] * x[1] + p[(1, 1)] * x[1] * x[1]
}

/// Grid points `(x₁, x₂)` with `x₁` increasing along rows of the image and
/// `x₂` decreasing down the image.
pub fn grid_point(i: usize, j: usize, n: usize) -> [f64; 2] {
    let s = |k: usize| -1.0 + 2.0 * k as f64 / (n - 1).max(1) as f64;
    [s(j), -s(i)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    /// `(t, x₁, x₂, u)` per stored step.
    pub points: Vec<f64>,
    pub cost: f64,
    pub y_max: f64,
}

pub struct DemoModel {
    problem: ControlProblem,
    ftt: Ftt,
    oracle_calls: usize,
    residual: f64,
}

impl DemoModel {
    pub fn build(rank: usize, lambda: f64, sigma: f64, seed: u64) -> Result<Self, String> {
        if !(1..=8).contains(&rank) {
            return Err(format!("rank must be in 1..=8, got {rank}"));
        }
        let spec = make_2d_exact();
        let problem = spec.problem().map_err(|e| e.to_string())?.clone();
        let oracle = noisy_wrap(SdreOracle::new(problem.clone()), sigma, seed);
        let cfg = CrossConfig { lambda, tol: 1e-4, it_max: 10, rank: RankPolicy::Fixed(rank), seed, ..Default::default() };
        let rep = gradient_cross(&oracle, spec.bases().map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
        Ok(DemoModel { problem, residual: rep.final_residual(), oracle_calls: rep.oracle_calls, ftt: rep.ftt })
    }

    pub fn ftt(&self) -> &Ftt {
        &self.ftt
    }

    pub fn oracle_calls(&self) -> usize {
        self.oracle_calls
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `Ṽ` on an `n × n` grid, row-major.
    pub fn value_grid(&self, n: usize) -> Vec<f64> {
        self.grid(n, |x| self.ftt.eval(&x).unwrap_or(f64::NAN))
    }

    /// `|Ṽ − V|` against the closed-form solution on an `n × n` grid.
    pub fn error_grid(&self, n: usize) -> Vec<f64> {
        self.grid(n, |x| (self.ftt.eval(&x).unwrap_or(f64::NAN) - exact_value(x)).abs())
    }

    fn grid(&self, n: usize, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(f(grid_point(i, j, n)));
            }
        }
        out
    }

    /// Closed loop from `x0` under `law` ∈ {tt, sdre, lqr}.
    pub fn trajectory(&self, x0: [f64; 2], law: &str) -> Result<Run, String> {
        let law = match law {
            "tt" => FeedbackLaw::Tt(self.ftt.clone()),
            "sdre" => FeedbackLaw::SdreGradient,
            "lqr" => lqr_law(&self.problem).map_err(|e| e.to_string())?,
            other => return Err(format!("unknown law {other:?}; expected tt, sdre or lqr")),
        };
        let tr = simulate(&self.problem, &law, &x0, HORIZON, Integrator::Rk4 { h: STEP }, SimOptions::default())
            .map_err(|e| e.to_string())?;
        let mut points = Vec::with_capacity(4 * tr.times.len());
        for i in 0..tr.times.len() {
            points.extend_from_slice(&[tr.times[i], tr.states[i][0], tr.states[i][1], tr.controls[i][0]]);
        }
        Ok(Run { points, cost: tr.cost, y_max: tr.y_max })
    }
}

/// Closed-form `Π(x₁)` followed by the Riccati solver's `Π(x)`, each 2×2
/// row-major.
pub fn sdre_matrices(x: [f64; 2]) -> Result<Vec<f64>, String> {
    let spec = make_2d_exact();
    let problem = spec.problem().map_err(|e| e.to_string())?;
    let exact = exact_pi(x[0]);
    let solved = sdre_pi(problem, &x).map_err(|e| e.to_string())?.pi;
    let mut out = Vec::with_capacity(8);
    for m in [&exact, &solved] {
        out.extend_from_slice(&[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub struct Demo {
    inner: DemoModel,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(rank: usize, lambda: f64, sigma: f64, seed: u32) -> Result<Demo, JsError> {
        DemoModel::build(rank, lambda, sigma, seed as u64).map(|inner| Demo { inner }).map_err(|e| JsError::new(&e))
    }

    pub fn value_grid(&self, n: usize) -> Vec<f64> {
        self.inner.value_grid(n)
    }

    pub fn error_grid(&self, n: usize) -> Vec<f64> {
        self.inner.error_grid(n)
    }

    pub fn ranks(&self) -> Vec<u32> {
        self.inner.ftt.ranks().iter().map(|&r| r as u32).collect()
    }

    pub fn oracle_calls(&self) -> u32 {
        self.inner.oracle_calls as u32
    }

    pub fn residual(&self) -> f64 {
        self.inner.residual
    }

    pub fn trajectory(&self, x1: f64, x2: f64, law: &str) -> Result<RunResult, JsError> {
        self.inner.trajectory([x1, x2], law).map(|run| RunResult { run }).map_err(|e| JsError::new(&e))
    }
}

#[wasm_bindgen]
pub struct RunResult {
    run: Run,
}

#[wasm_bindgen]
impl RunResult {
    pub fn points(&self) -> Vec<f64> {
        self.run.points.clone()
    }

    pub fn cost(&self) -> f64 {
        self.run.cost
    }

    pub fn y_max(&self) -> f64 {
        self.run.y_max
    }
}

#[wasm_bindgen]
pub fn sdre_matrix(x1: f64, x2: f64) -> Result<Vec<f64>, JsError> {
    sdre_matrices([x1, x2]).map_err(|e| JsError::new(&e))
}
