//! Feedback laws, closed-loop simulation and trajectory error metrics.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftt::Ftt;
use crate::matops::{solve_are, Mat};
use crate::sampler::{penalty_cost, saturate, sdre_pi, sdre_sample, ControlProblem};

/// State feedback `u(x)`.
#[derive(Clone, Debug)]
pub enum FeedbackLaw {
    /// `u = -½ R⁻¹ Bᵀ ∇Ṽ(x)` from a tensor-train value function.
    Tt(Ftt),
    /// `u = -K x` with `K = R⁻¹ Bᵀ Π` from the Riccati equation at the origin.
    Lqr { gain: Mat, pi: Mat },
    /// `inner` on the closed box `|x|_∞ ≤ a_tb`, `outer` elsewhere.
    Composite { outer: Box<FeedbackLaw>, inner: Box<FeedbackLaw>, a_tb: f64 },
    /// `u = -½ R⁻¹ Bᵀ ∇(xᵀΠ(x)x)`, solving the frozen Riccati equation and
    /// its derivative equations at every call.
    SdreGradient,
    /// `u = -R⁻¹ Bᵀ Π(x) x`.
    SdreRiccati,
    Zero,
}

impl FeedbackLaw {
    pub fn composite(outer: FeedbackLaw, inner: FeedbackLaw, a_tb: f64) -> Self {
        FeedbackLaw::Composite { outer: Box::new(outer), inner: Box::new(inner), a_tb }
    }

    /// Control at `x`, before any saturation.
    pub fn feedback(&self, problem: &ControlProblem, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeedbackLaw::Tt(ftt) => Ok(problem.feedback_from_grad(&ftt.grad(x)?)),
            FeedbackLaw::Lqr { gain, .. } => {
                let u = -gain * DVector::from_column_slice(x);
                Ok(u.iter().copied().collect())
            }
            FeedbackLaw::Composite { outer, inner, a_tb } => {
                let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if norm <= *a_tb {
                    inner.feedback(problem, x)
                } else {
                    outer.feedback(problem, x)
                }
            }
            FeedbackLaw::SdreGradient => {
                let s = sdre_sample(problem, x, true)?;
                Ok(problem.feedback_from_grad(s.grad.as_ref().expect("gradient requested")))
            }
            FeedbackLaw::SdreRiccati => {
                let pi = sdre_pi(problem, x)?.pi;
                let g = 2.0 * pi * DVector::from_column_slice(x);
                Ok(problem.feedback_from_grad(g.as_slice()))
            }
            FeedbackLaw::Zero => Ok(vec![0.0; problem.controls()]),
        }
    }
}

/// LQR law of the linearization at the origin.
pub fn lqr_law(problem: &ControlProblem) -> Result<FeedbackLaw> {
    let a0 = problem.a(&vec![0.0; problem.dim()]);
    let sol = solve_are(&a0, problem.b(), problem.q(), problem.r())?;
    let gain = problem.r_inv() * problem.b().transpose() * &sol.pi;
    Ok(FeedbackLaw::Lqr { gain, pi: sol.pi })
}

/// Time integrator of the closed loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Integrator {
    Rk4 { h: f64 },
    Rk45 { rtol: f64, atol: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Rk4 { h: 1e-2 }
    }
}

impl Integrator {
    pub fn rk45() -> Self {
        Integrator::Rk45 { rtol: 1e-6, atol: 1e-8 }
    }
}

/// Closed-loop trajectory. `costs[i]` is the trapezoidal running cost up to
/// `times[i]`.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Applied controls.
    pub controls: Vec<Vec<f64>>,
    /// Feedback before saturation; equal to `controls` when unconstrained.
    pub signals: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    /// Total cost over the horizon.
    pub cost: f64,
    pub steps: usize,
    /// `max_i |y_i(T)|`.
    pub y_max: f64,
    /// Number of stored states outside the approximation box by more than
    /// 10% of its width.
    pub out_of_domain: usize,
    /// Number of rejected adaptive steps.
    pub rejected: usize,
}

impl TrajectoryResult {
    /// Trapezoidal quadrature of the running cost over the stored grid.
    pub fn recompute_cost(&self, problem: &ControlProblem, u_max: Option<f64>) -> f64 {
        let l: Vec<f64> = self
            .states
            .iter()
            .zip(&self.signals)
            .map(|(y, u)| stage_cost(problem, y, u, u_max))
            .collect();
        self.times.windows(2).zip(l.windows(2)).map(|(t, c)| 0.5 * (t[1] - t[0]) * (c[0] + c[1])).sum()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one point")
    }
}

/// Simulation options beyond the integrator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Saturates the applied control with `u_max·tanh(u/u_max)` and charges
    /// the matching penalty.
    pub u_max: Option<f64>,
}

fn applied(u: &[f64], u_max: Option<f64>) -> Vec<f64> {
    match u_max {
        Some(um) => u.iter().map(|v| saturate(*v, um)).collect(),
        None => u.to_vec(),
    }
}

/// Running cost of state `y` under the unsaturated feedback signal `u`.
fn stage_cost(problem: &ControlProblem, y: &[f64], u: &[f64], u_max: Option<f64>) -> f64 {
    match u_max {
        None => problem.running_cost(y, u),
        Some(um) => {
            let yv = DVector::from_column_slice(y);
            let state = (yv.transpose() * problem.q() * &yv)[0];
            let r = problem.r()[(0, 0)];
            state + u.iter().map(|v| penalty_cost(*v, um, r)).sum::<f64>()
        }
    }
}

struct ClosedLoop<'a> {
    problem: &'a ControlProblem,
    law: &'a FeedbackLaw,
    u_max: Option<f64>,
}

impl ClosedLoop<'_> {
    /// Unsaturated signal and applied control.
    fn control(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let raw = self.law.feedback(self.problem, y)?;
        let u = applied(&raw, self.u_max);
        Ok((raw, u))
    }

    fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (_, u) = self.control(y)?;
        Ok(self.problem.rhs(y, &u))
    }
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Integrates `ẏ = A(y)y + B u(y)` from `x0` over `[0, T]`.
pub fn simulate(
    problem: &ControlProblem,
    law: &FeedbackLaw,
    x0: &[f64],
    horizon: f64,
    integrator: Integrator,
    options: SimOptions,
) -> Result<TrajectoryResult> {
    let d = problem.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("simulate: horizon must be positive".into()));
    }
    let sys = ClosedLoop { problem, law, u_max: options.u_max };
    let a = problem.half_width();
    let blowup = 1e3 * 2.0 * a;
    let outside = a + 0.1 * 2.0 * a;
    let (raw0, u0) = sys.control(x0)?;
    let mut out = TrajectoryResult {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        controls: vec![u0],
        signals: vec![raw0],
        costs: vec![0.0],
        cost: 0.0,
        steps: 0,
        y_max: 0.0,
        out_of_domain: 0,
        rejected: 0,
    };
    let mut push = |out: &mut TrajectoryResult, t: f64, y: Vec<f64>| -> Result<()> {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > blowup {
            return Err(Error::Divergence { time: t, norm });
        }
        if y.iter().any(|v| v.abs() > outside) {
            out.out_of_domain += 1;
        }
        let (raw, u) = sys.control(&y)?;
        let last = out.times.len() - 1;
        let prev = stage_cost(problem, &out.states[last], &out.signals[last], options.u_max);
        let inc = 0.5 * (t - out.times[last]) * (prev + stage_cost(problem, &y, &raw, options.u_max));
        let total = out.costs[last] + inc;
        out.times.push(t);
        out.states.push(y);
        out.controls.push(u);
        out.signals.push(raw);
        out.costs.push(total);
        out.steps += 1;
        Ok(())
    };
    match integrator {
        Integrator::Rk4 { h } => {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument("simulate: step must be positive".into()));
            }
            let n = (horizon / h).round().max(1.0) as usize;
            let h = horizon / n as f64;
            let mut y = x0.to_vec();
            for i in 0..n {
                let k1 = sys.rhs(&y)?;
                let k2 = sys.rhs(&axpy(&y, 0.5 * h, &k1))?;
                let k3 = sys.rhs(&axpy(&y, 0.5 * h, &k2))?;
                let k4 = sys.rhs(&axpy(&y, h, &k3))?;
                for j in 0..d {
                    y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
                push(&mut out, (i + 1) as f64 * h, y.clone())?;
            }
        }
        Integrator::Rk45 { rtol, atol } => {
            if !(rtol > 0.0 && atol > 0.0) {
                return Err(Error::InvalidArgument("simulate: tolerances must be positive".into()));
            }
            dormand_prince(&sys, x0, horizon, rtol, atol, &mut out, &mut push)?;
        }
    }
    out.cost = out.costs[out.costs.len() - 1];
    out.y_max = out.final_state().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(out)
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order ones.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_ADAPTIVE_STEPS: usize = 2_000_000;

fn dormand_prince(
    sys: &ClosedLoop<'_>,
    x0: &[f64],
    horizon: f64,
    rtol: f64,
    atol: f64,
    out: &mut TrajectoryResult,
    push: &mut dyn FnMut(&mut TrajectoryResult, f64, Vec<f64>) -> Result<()>,
) -> Result<()> {
    let d = x0.len();
    let mut t = 0.0;
    let mut y = x0.to_vec();
    let mut k = vec![vec![0.0; d]; 7];
    k[0] = sys.rhs(&y)?;
    // Initial step from the size of the derivative.
    let scale: f64 = y.iter().map(|v| atol + rtol * v.abs()).fold(f64::INFINITY, f64::min);
    let fnorm = k[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut h = if fnorm > 0.0 { (0.01 * scale / fnorm).max(1e-8) } else { 1e-3 } .min(horizon);
    let mut attempts = 0usize;
    while t < horizon {
        attempts += 1;
        if attempts > MAX_ADAPTIVE_STEPS {
            return Err(Error::InvalidArgument(format!("simulate: adaptive step limit reached at t = {t}")));
        }
        if t + h > horizon {
            h = horizon - t;
        }
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, a) in DP_A[s].iter().enumerate().take(s) {
                if *a != 0.0 {
                    for i in 0..d {
                        ys[i] += h * a * k[j][i];
                    }
                }
            }
            debug_assert!(DP_C[s] > 0.0);
            k[s] = sys.rhs(&ys)?;
        }
        // Stage 7 is evaluated at the fifth-order solution.
        let mut y_new = y.clone();
        for (j, b) in DP_A[6].iter().enumerate() {
            for i in 0..d {
                y_new[i] += h * b * k[j][i];
            }
        }
        let mut err = 0.0f64;
        for i in 0..d {
            let e: f64 = (0..7).map(|j| DP_E[j] * k[j][i]).sum::<f64>() * h;
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            return Err(Error::Divergence { time: t, norm: f64::INFINITY });
        }
        if err <= 1.0 {
            t = if horizon - (t + h) <= 1e-12 * horizon { horizon } else { t + h };
            y = y_new;
            push(out, t, y.clone())?;
            k[0] = k[6].clone();
        } else {
            out.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * horizon {
            return Err(Error::InvalidArgument(format!("simulate: step size underflow at t = {t}")));
        }
    }
    Ok(())
}

/// `err_J`, `err_u` against a reference trajectory and `max_i |y_i(T)|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub err_j: f64,
    pub err_u: f64,
    pub y_max: f64,
}

/// Piecewise-linear interpolation of a trajectory's controls at `t`.
fn control_at(traj: &TrajectoryResult, t: f64) -> Vec<f64> {
    let ts = &traj.times;
    let j = match ts.binary_search_by(|v| v.total_cmp(&t)) {
        Ok(j) => return traj.controls[j].clone(),
        Err(j) => j,
    };
    if j == 0 {
        return traj.controls[0].clone();
    }
    if j >= ts.len() {
        return traj.controls[ts.len() - 1].clone();
    }
    let w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
    traj.controls[j - 1].iter().zip(&traj.controls[j]).map(|(a, b)| (1.0 - w) * a + w * b).collect()
}

pub fn metrics(traj: &TrajectoryResult, reference: &TrajectoryResult) -> Result<Metrics> {
    if traj.times.len() < 2 || reference.times.len() < 2 {
        return Err(Error::InvalidArgument("metrics: empty trajectory".into()));
    }
    let mut acc = 0.0;
    for i in 0..traj.times.len() - 1 {
        let dt = traj.times[i + 1] - traj.times[i];
        let ur = control_at(reference, traj.times[i]);
        let diff: f64 = ur.iter().zip(&traj.controls[i]).map(|(a, b)| (a - b) * (a - b)).sum();
        acc += dt * diff;
    }
    Ok(Metrics { err_j: (reference.cost - traj.cost).abs(), err_u: acc.sqrt(), y_max: traj.y_max })
}

/// Returns `2 max_t |ỹ⁰(t)|_∞` for the closed loop started at the origin.
pub fn two_boxes_calibrate(
    problem: &ControlProblem,
    outer: &FeedbackLaw,
    horizon: f64,
    integrator: Integrator,
) -> Result<f64> {
    let traj = simulate(problem, outer, &vec![0.0; problem.dim()], horizon, integrator, SimOptions::default())?;
    let peak = traj.states.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(2.0 * peak)
}
