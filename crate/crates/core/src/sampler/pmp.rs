use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{ControlProblem, Oracle, Sample};
use crate::error::{Error, Result};
use crate::matops::{solve_are_w, Mat};

/// Settings of the finite-horizon optimality-system solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmpConfig {
    pub horizon: f64,
    /// Number of mesh nodes, including both ends.
    pub mesh: usize,
    /// Scalar control bound; `None` solves the unconstrained system.
    pub u_max: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Re-solve on the doubled mesh and reject samples that move by more
    /// than `1e-4` relative.
    pub check_mesh: bool,
}

impl Default for PmpConfig {
    fn default() -> Self {
        PmpConfig {
            horizon: 20.0,
            mesh: 200,
            u_max: None,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            check_mesh: false,
        }
    }
}

impl PmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument("pmp: horizon must be positive".into()));
        }
        if self.mesh < 3 {
            return Err(Error::InvalidArgument("pmp: mesh needs at least 3 nodes".into()));
        }
        if let Some(u) = self.u_max {
            if !(u > 0.0) {
                return Err(Error::InvalidArgument("pmp: u_max must be positive".into()));
            }
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument("pmp: newton_tol and newton_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Optimal trajectory on the mesh together with `V(x)` and `∇V(x) = p(0)`.
#[derive(Clone, Debug)]
pub struct PmpSolution {
    pub value: f64,
    pub grad: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub costates: Vec<Vec<f64>>,
    /// Applied control, saturated in the constrained case.
    pub controls: Vec<Vec<f64>>,
    /// `|y(T)|₂`, to judge whether the horizon is long enough.
    pub terminal_norm: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// `u_max · tanh(u / u_max)`.
pub fn saturate(u: f64, u_max: f64) -> f64 {
    u_max * (u / u_max).tanh()
}

fn ln_cosh(z: f64) -> f64 {
    let a = z.abs();
    if a < 20.0 {
        let s = (0.5 * a).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    }
}

/// Control penalty `W(v) = 2r ∫₀^v P⁻¹(μ) dμ` evaluated at the applied control
/// `v = P(u)`, written in terms of the unsaturated signal `u` as
/// `2r (v u − u_max² ln cosh(u / u_max))`.
pub fn penalty_cost(u: f64, u_max: f64, r: f64) -> f64 {
    let v = saturate(u, u_max);
    2.0 * r * (v * u - u_max * u_max * ln_cosh(u / u_max))
}

struct Bvp<'a> {
    problem: &'a ControlProblem,
    x: &'a [f64],
    u_max: Option<f64>,
    /// `-½ R⁻¹ Bᵀ`.
    gain: Mat,
    h: f64,
    nodes: usize,
}

impl<'a> Bvp<'a> {
    fn new(problem: &'a ControlProblem, x: &'a [f64], u_max: Option<f64>, horizon: f64, nodes: usize) -> Self {
        let gain = -0.5 * problem.r_inv() * problem.b().transpose();
        let h = horizon / (nodes - 1) as f64;
        Bvp { problem, x, u_max, gain, h, nodes }
    }

    fn d(&self) -> usize {
        self.problem.dim()
    }

    fn blocks(&self) -> usize {
        2 * self.nodes - 1
    }

    fn unknowns(&self) -> usize {
        self.blocks() * 2 * self.d()
    }

    /// Unsaturated signal, applied control and its derivative in `p`.
    fn control(&self, p: &[f64]) -> (DVector<f64>, DVector<f64>, Mat) {
        let u = &self.gain * DVector::from_column_slice(p);
        match self.u_max {
            None => (u.clone(), u, self.gain.clone()),
            Some(um) => {
                let v = u.map(|ui| saturate(ui, um));
                let mut dv = self.gain.clone();
                for i in 0..u.len() {
                    let s = 1.0 / (u[i] / um).cosh();
                    dv.row_mut(i).scale_mut(s * s);
                }
                (u, v, dv)
            }
        }
    }

    fn running_cost(&self, y: &[f64], p: &[f64]) -> f64 {
        let yv = DVector::from_column_slice(y);
        let (u, v, _) = self.control(p);
        let state = (yv.transpose() * self.problem.q() * &yv)[0];
        let ctrl = match self.u_max {
            None => (v.transpose() * self.problem.r() * &v)[0],
            Some(um) => penalty_cost(u[0], um, self.problem.r()[(0, 0)]),
        };
        state + ctrl
    }

    /// Right-hand side of the optimality system and, on request, its Jacobian.
    fn field(&self, z: &[f64], jac: bool) -> (Vec<f64>, Option<Mat>) {
        let d = self.d();
        let (y, p) = z.split_at(d);
        let (_, v, dv) = self.control(p);
        let vs: Vec<f64> = v.iter().copied().collect();
        let ydot = self.problem.rhs(y, &vs);
        let jf = self.problem.drift_jacobian(y);
        let pv = DVector::from_column_slice(p);
        let yv = DVector::from_column_slice(y);
        let pdot = -(jf.transpose() * &pv + 2.0 * self.problem.q() * &yv);
        let mut out = ydot;
        out.extend(pdot.iter());
        if !jac {
            return (out, None);
        }
        let mut m = Mat::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&jf);
        m.view_mut((0, d), (d, d)).copy_from(&(self.problem.b() * &dv));
        m.view_mut((d, d), (d, d)).copy_from(&(-jf.transpose()));
        let mut lower = -2.0 * self.problem.q();
        if !self.problem.da().is_empty() {
            // ∂/∂y (J(y)ᵀ p) by central differences.
            let mut yp = y.to_vec();
            for j in 0..d {
                let eps = 1e-6 * y[j].abs().max(1.0);
                yp[j] = y[j] + eps;
                let plus = self.problem.drift_jacobian(&yp).transpose() * &pv;
                yp[j] = y[j] - eps;
                let minus = self.problem.drift_jacobian(&yp).transpose() * &pv;
                yp[j] = y[j];
                let col = (plus - minus) / (2.0 * eps);
                for i in 0..d {
                    lower[(i, j)] -= col[i];
                }
            }
        }
        m.view_mut((d, 0), (d, d)).copy_from(&lower);
        (out, Some(m))
    }

    fn block<'z>(&self, z: &'z [f64], j: usize) -> &'z [f64] {
        let w = 2 * self.d();
        &z[j * w..(j + 1) * w]
    }

    /// Hermite–Simpson defects in separated form plus the two boundary
    /// conditions. Unknowns are ordered node, midpoint, node, ….
    fn residual(&self, z: &[f64], jac: Option<&mut Band>) -> Vec<f64> {
        let d = self.d();
        let w = 2 * d;
        let h = self.h;
        let need = jac.is_some();
        let fields: Vec<(Vec<f64>, Option<Mat>)> =
            (0..self.blocks()).map(|j| self.field(self.block(z, j), need)).collect();
        let mut g = vec![0.0; self.unknowns()];
        for i in 0..d {
            g[i] = z[i] - self.x[i];
        }
        for k in 0..self.nodes - 1 {
            let (zk, zm, zn) = (self.block(z, 2 * k), self.block(z, 2 * k + 1), self.block(z, 2 * k + 2));
            let (fk, fm, fn_) = (&fields[2 * k].0, &fields[2 * k + 1].0, &fields[2 * k + 2].0);
            let base = d + 2 * w * k;
            for i in 0..w {
                g[base + i] = zm[i] - 0.5 * (zk[i] + zn[i]) - h / 8.0 * (fk[i] - fn_[i]);
                g[base + w + i] = zn[i] - zk[i] - h / 6.0 * (fk[i] + 4.0 * fm[i] + fn_[i]);
            }
        }
        let n = self.unknowns();
        for i in 0..d {
            g[n - d + i] = z[n - d + i];
        }
        if let Some(band) = jac {
            band.clear();
            for i in 0..d {
                band.set(i, i, 1.0);
            }
            for k in 0..self.nodes - 1 {
                let base = d + 2 * w * k;
                let (ck, cm, cn) = (2 * k * w, (2 * k + 1) * w, (2 * k + 2) * w);
                let jk = fields[2 * k].1.as_ref().expect("jacobian requested");
                let jm = fields[2 * k + 1].1.as_ref().expect("jacobian requested");
                let jn = fields[2 * k + 2].1.as_ref().expect("jacobian requested");
                for r in 0..w {
                    for c in 0..w {
                        let id = if r == c { 1.0 } else { 0.0 };
                        band.set(base + r, ck + c, -0.5 * id - h / 8.0 * jk[(r, c)]);
                        band.set(base + r, cm + c, id);
                        band.set(base + r, cn + c, -0.5 * id + h / 8.0 * jn[(r, c)]);
                        band.set(base + w + r, ck + c, -id - h / 6.0 * jk[(r, c)]);
                        band.set(base + w + r, cm + c, -4.0 * h / 6.0 * jm[(r, c)]);
                        band.set(base + w + r, cn + c, id - h / 6.0 * jn[(r, c)]);
                    }
                }
            }
            for i in 0..d {
                band.set(n - d + i, n - d + i, 1.0);
            }
        }
        g
    }

    fn bandwidth(&self) -> usize {
        5 * self.d() - 1
    }

    fn newton(&self, mut z: Vec<f64>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)> {
        let scale = self.x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let kl = self.bandwidth();
        let mut band = Band::new(self.unknowns(), kl, kl);
        let mut g = self.residual(&z, Some(&mut band));
        let mut norm = max_abs(&g);
        for it in 0..max_iter {
            if norm <= tol * scale {
                return Ok((z, it, norm));
            }
            let mut step: Vec<f64> = g.iter().map(|v| -v).collect();
            band.factor_solve(&mut step)?;
            let l2 = norm2(&g);
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = z.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
                let gt = self.residual(&trial, None);
                if norm2(&gt) <= (1.0 - 1e-4 * alpha) * l2 || alpha < 1e-3 {
                    if alpha < 1e-3 && norm2(&gt) > l2 {
                        return Err(Error::NewtonFailed { residual: norm, iterations: it });
                    }
                    z = trial;
                    break;
                }
                alpha *= 0.5;
            }
            g = self.residual(&z, Some(&mut band));
            norm = max_abs(&g);
        }
        if norm <= tol * scale {
            Ok((z, max_iter, norm))
        } else {
            Err(Error::NewtonFailed { residual: norm, iterations: max_iter })
        }
    }

    /// Closed-loop LQR flow of the linearization at the origin, used to seed
    /// Newton from block `from` onward, starting at the state `y0`.
    fn lqr_fill(&self, z: &mut [f64], from: usize, y0: &[f64]) {
        let d = self.d();
        let w = 2 * d;
        let a0 = self.problem.a(&vec![0.0; d]);
        let (step, pi) = match solve_are_w(&a0, self.problem.w(), self.problem.q()) {
            Ok(sol) => {
                let acl = &a0 - self.problem.w() * &sol.pi;
                ((acl * (0.5 * self.h)).exp(), sol.pi)
            }
            Err(_) => (Mat::identity(d, d) * (-0.5 * self.h).exp(), Mat::zeros(d, d)),
        };
        let mut y = DVector::from_column_slice(y0);
        for j in from..self.blocks() {
            let p = 2.0 * &pi * &y;
            z[j * w..j * w + d].copy_from_slice(y.as_slice());
            z[j * w + d..(j + 1) * w].copy_from_slice(p.as_slice());
            y = &step * y;
        }
    }

    fn solution(&self, z: &[f64], iterations: usize, residual: f64) -> PmpSolution {
        let d = self.d();
        let h = self.h;
        let mut value = 0.0;
        for k in 0..self.nodes - 1 {
            let l = |j: usize| {
                let b = self.block(z, j);
                self.running_cost(&b[..d], &b[d..])
            };
            value += h / 6.0 * (l(2 * k) + 4.0 * l(2 * k + 1) + l(2 * k + 2));
        }
        let mut times = Vec::with_capacity(self.nodes);
        let mut states = Vec::with_capacity(self.nodes);
        let mut costates = Vec::with_capacity(self.nodes);
        let mut controls = Vec::with_capacity(self.nodes);
        for k in 0..self.nodes {
            let b = self.block(z, 2 * k);
            times.push(k as f64 * h);
            states.push(b[..d].to_vec());
            costates.push(b[d..].to_vec());
            controls.push(self.control(&b[d..]).1.iter().copied().collect());
        }
        let terminal_norm = states[self.nodes - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
        PmpSolution {
            value,
            grad: costates[0].clone(),
            times,
            states,
            costates,
            controls,
            terminal_norm,
            iterations,
            residual,
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Banded matrix with room for the fill-in of partial pivoting.
struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Band { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + j + self.kl - i
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// In-place LU with partial pivoting followed by a solve for `b`.
    fn factor_solve(&mut self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let amax = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            for i in k + 1..=last {
                if self.get(i, k).abs() > self.get(p, k).abs() {
                    p = i;
                }
            }
            let piv = self.get(p, k);
            if piv.abs() <= f64::EPSILON * amax * n as f64 || !piv.is_finite() {
                return Err(Error::NewtonFailed { residual: f64::INFINITY, iterations: 0 });
            }
            let right = (k + reach).min(n - 1);
            if p != k {
                for j in k..=right {
                    let (a, c) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, c);
                }
                b.swap(k, p);
            }
            for i in k + 1..=last {
                let l = self.get(i, k) / piv;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=right {
                    let v = self.get(i, j) - l * self.get(k, j);
                    self.set(i, j, v);
                }
                b[i] -= l * b[k];
            }
        }
        for k in (0..n).rev() {
            let right = (k + reach).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=right {
                s -= self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
        Ok(())
    }
}

fn at_point(x: &[f64], e: Error) -> Error {
    match e {
        Error::Oracle { .. } => e,
        other => Error::Oracle { point: x.to_vec(), message: other.to_string() },
    }
}

fn nodes_for(config: &PmpConfig, horizon: f64) -> usize {
    let intervals = ((config.mesh - 1) as f64 * horizon / config.horizon).round() as usize;
    intervals.max(2) + 1
}

fn solve(problem: &ControlProblem, x: &[f64], config: &PmpConfig, u_max: Option<f64>) -> Result<PmpSolution> {
    config.validate()?;
    let d = problem.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    let full = Bvp::new(problem, x, u_max, config.horizon, config.mesh);
    let mut z = vec![0.0; full.unknowns()];
    full.lqr_fill(&mut z, 0, x);
    let first = full.newton(z, config.newton_tol, config.newton_max_iter);
    let failure = match first {
        Ok((z, it, res)) => return Ok(full.solution(&z, it, res)),
        Err(e) => e,
    };
    // Horizon continuation: T/4, T/2, T, each seeded by the shorter solution
    // extended with the LQR flow.
    let mut prev: Option<(Vec<f64>, usize)> = None;
    let mut total = 0;
    for frac in [0.25, 0.5, 1.0] {
        let horizon = config.horizon * frac;
        let nodes = if frac == 1.0 { config.mesh } else { nodes_for(config, horizon) };
        let bvp = Bvp::new(problem, x, u_max, horizon, nodes);
        let w = 2 * d;
        let mut z = vec![0.0; bvp.unknowns()];
        match &prev {
            None => bvp.lqr_fill(&mut z, 0, x),
            Some((pz, pblocks)) => {
                let keep = (*pblocks).min(bvp.blocks());
                z[..keep * w].copy_from_slice(&pz[..keep * w]);
                let y_end = pz[(keep - 1) * w..(keep - 1) * w + d].to_vec();
                bvp.lqr_fill(&mut z, keep - 1, &y_end);
            }
        }
        match bvp.newton(z, config.newton_tol, config.newton_max_iter) {
            Ok((z, it, res)) => {
                total += it;
                if frac == 1.0 {
                    return Ok(bvp.solution(&z, total, res));
                }
                prev = Some((z, bvp.blocks()));
            }
            Err(_) if frac < 1.0 => return Err(failure),
            Err(e) => return Err(e),
        }
    }
    Err(failure)
}

/// Unconstrained optimality system on `[0, T]`.
pub fn pmp_sample(problem: &ControlProblem, x: &[f64], config: &PmpConfig) -> Result<PmpSolution> {
    solve(problem, x, config, None).map_err(|e| at_point(x, e))
}

/// Optimality system with the scalar control saturated by `u_max·tanh`.
pub fn pmp_sample_constrained(problem: &ControlProblem, x: &[f64], config: &PmpConfig) -> Result<PmpSolution> {
    let u_max = config
        .u_max
        .ok_or_else(|| Error::InvalidArgument("pmp: constrained solve needs u_max".into()))?;
    if problem.controls() != 1 {
        return Err(Error::InvalidArgument("pmp: control bounds need a scalar control".into()));
    }
    let sol = solve(problem, x, config, Some(u_max)).map_err(|e| at_point(x, e))?;
    assert!(sol.controls.iter().all(|u| u[0].abs() <= u_max), "saturated control left its bound");
    Ok(sol)
}

/// Relative change of `V(x)` when the mesh is doubled; errors above `1e-4`.
pub fn pmp_mesh_check(problem: &ControlProblem, x: &[f64], config: &PmpConfig) -> Result<f64> {
    let run = |c: &PmpConfig| match c.u_max {
        Some(_) => pmp_sample_constrained(problem, x, c),
        None => pmp_sample(problem, x, c),
    };
    let coarse = run(config)?;
    let fine_cfg = PmpConfig { mesh: 2 * config.mesh - 1, ..config.clone() };
    let fine = run(&fine_cfg)?;
    let change = (coarse.value - fine.value).abs() / fine.value.abs().max(f64::MIN_POSITIVE);
    if change > 1e-4 {
        return Err(Error::MeshTooCoarse { change });
    }
    Ok(change)
}

/// Oracle sampling `V` and `∇V = p(0)` from the optimality system; the
/// constrained variant is used when `u_max` is set.
pub struct PmpOracle {
    problem: ControlProblem,
    config: PmpConfig,
    solves: AtomicUsize,
}

impl PmpOracle {
    pub fn new(problem: ControlProblem, config: PmpConfig) -> Result<Self> {
        config.validate()?;
        if config.u_max.is_some() && problem.controls() != 1 {
            return Err(Error::InvalidArgument("pmp: control bounds need a scalar control".into()));
        }
        Ok(PmpOracle { problem, config, solves: AtomicUsize::new(0) })
    }

    pub fn problem(&self) -> &ControlProblem {
        &self.problem
    }

    pub fn config(&self) -> &PmpConfig {
        &self.config
    }

    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }
}

impl Oracle for PmpOracle {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn sample(&self, x: &[f64], need_grad: bool) -> Result<Sample> {
        if x.iter().all(|v| *v == 0.0) {
            let grad = need_grad.then(|| vec![0.0; x.len()]);
            return Ok(Sample { value: 0.0, grad });
        }
        self.solves.fetch_add(1, Ordering::Relaxed);
        if self.config.check_mesh {
            pmp_mesh_check(&self.problem, x, &self.config)?;
        }
        let sol = match self.config.u_max {
            Some(_) => pmp_sample_constrained(&self.problem, x, &self.config)?,
            None => pmp_sample(&self.problem, x, &self.config)?,
        };
        Ok(Sample { value: sol.value, grad: need_grad.then_some(sol.grad) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::gauss_legendre;
    use std::sync::Arc;

    fn lqr_problem() -> ControlProblem {
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, 2.0, -1.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        ControlProblem::new("lin", Arc::new(move |_: &[f64]| a.clone()), b, vec![], Mat::identity(2, 2), Mat::identity(1, 1), 1.0)
            .unwrap()
    }

    #[test]
    fn band_solver_matches_dense() {
        let n = 12;
        let (kl, ku) = (2, 3);
        let mut band = Band::new(n, kl, ku);
        let mut dense = Mat::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                let v = ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 0.1 } else { 0.0 };
                band.set(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        band.factor_solve(&mut x).unwrap();
        let r = dense * DVector::from_column_slice(&x) - DVector::from_column_slice(&rhs);
        assert!(r.amax() < 1e-11);
    }

    #[test]
    fn penalty_matches_quadrature() {
        let (nodes, weights) = gauss_legendre(200, (-1.0, 1.0)).unwrap();
        for &(u, um, r) in &[(0.3, 1.0, 1.0), (-2.5, 1.5, 0.7), (40.0, 20.0, 1.0), (1e-3, 5.0, 2.0)] {
            let v = saturate(u, um);
            let mut quad = 0.0;
            for (t, w) in nodes.iter().zip(&weights) {
                let mu = 0.5 * v * (t + 1.0);
                quad += 0.5 * v * w * um * (mu / um).atanh();
            }
            let exact = penalty_cost(u, um, r);
            assert!((exact - 2.0 * r * quad).abs() <= 1e-10 * exact.abs().max(1.0), "{u} {exact} {}", 2.0 * r * quad);
        }
        let (u, r) = (0.7, 1.3);
        assert!((penalty_cost(u, 1e6, r) - r * u * u).abs() < 1e-9);
    }

    #[test]
    fn linear_problem_matches_riccati() {
        let p = lqr_problem();
        let pi = solve_are_w(&p.a(&[0.0, 0.0]), p.w(), p.q()).unwrap().pi;
        let x = [0.6, -0.4];
        let sol = pmp_sample(&p, &x, &PmpConfig::default()).unwrap();
        let xv = DVector::from_column_slice(&x);
        let v = xv.dot(&(&pi * &xv));
        assert!((sol.value - v).abs() <= 1e-4 * v, "{} {v}", sol.value);
        let g = 2.0 * &pi * &xv;
        for i in 0..2 {
            assert!((sol.grad[i] - g[i]).abs() <= 1e-4 * g.amax());
        }
        assert!(sol.terminal_norm < 1e-6);
    }

    #[test]
    fn origin_stays_put() {
        let p = lqr_problem();
        let sol = pmp_sample(&p, &[0.0, 0.0], &PmpConfig::default()).unwrap();
        assert_eq!(sol.value, 0.0);
        assert!(sol.grad.iter().all(|g| *g == 0.0));
    }
}
