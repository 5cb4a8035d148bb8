use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DVector;

use super::{ControlProblem, Oracle, Sample};
use crate::error::{Error, Result};
use crate::matops::{solve_are_w, Mat, RiccatiSolution, SylvesterSolver};

fn at_point(x: &[f64], e: Error) -> Error {
    match e {
        Error::Oracle { .. } => e,
        other => Error::Oracle { point: x.to_vec(), message: other.to_string() },
    }
}

/// `Π(x)` from the Riccati equation with `A(x)` frozen at `x`.
pub fn sdre_pi(problem: &ControlProblem, x: &[f64]) -> Result<RiccatiSolution> {
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: x.len() });
    }
    solve_are_w(&problem.a(x), problem.w(), problem.q()).map_err(|e| at_point(x, e))
}

/// How `xᵀ ∂_iΠ(x) x` is obtained from the derivative Lyapunov equations
/// `A_clᵀ ∂_iΠ + ∂_iΠ A_cl = -(∂_iAᵀ Π + Π ∂_iA)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LyapunovMode {
    /// One adjoint solve `A_cl Y + Y A_clᵀ = x xᵀ`, then
    /// `xᵀ ∂_iΠ x = -2 ⟨∂_iA, Π Y⟩` for every `i`.
    #[default]
    Adjoint,
    /// One solve per variable of `A`, sharing the Schur factors of `A_cl`.
    PerVariable,
}

/// `V(x) = xᵀΠ(x)x` and, on request, `∇V = 2Π(x)x + (xᵀ ∂_iΠ(x) x)_i`.
pub fn sdre_sample(problem: &ControlProblem, x: &[f64], need_grad: bool) -> Result<Sample> {
    sdre_sample_with(problem, x, need_grad, LyapunovMode::Adjoint)
}

pub fn sdre_sample_with(problem: &ControlProblem, x: &[f64], need_grad: bool, mode: LyapunovMode) -> Result<Sample> {
    let sol = sdre_pi(problem, x)?;
    let pi = sol.pi;
    let xv = DVector::from_column_slice(x);
    let pix = &pi * &xv;
    let value = xv.dot(&pix);
    if !need_grad {
        return Ok(Sample { value, grad: None });
    }
    let mut grad: Vec<f64> = pix.iter().map(|v| 2.0 * v).collect();
    if problem.da().is_empty() {
        return Ok(Sample { value, grad: Some(grad) });
    }
    let acl: Mat = problem.a(x) - problem.w() * &pi;
    match mode {
        LyapunovMode::Adjoint => {
            let adj = SylvesterSolver::new(&acl, &acl.transpose()).map_err(|e| at_point(x, e))?;
            let y = adj.solve(&(&xv * xv.transpose())).map_err(|e| at_point(x, e))?;
            let piy = &pi * y;
            for (i, da) in problem.da() {
                grad[*i] -= 2.0 * da(x).dot(&piy);
            }
        }
        LyapunovMode::PerVariable => {
            let lyap = SylvesterSolver::new(&acl.transpose(), &acl).map_err(|e| at_point(x, e))?;
            for (i, da) in problem.da() {
                let dai = da(x);
                let rhs = -(dai.transpose() * &pi + &pi * &dai);
                let dpi = lyap.solve(&rhs).map_err(|e| at_point(x, e))?;
                grad[*i] += xv.dot(&(dpi * &xv));
            }
        }
    }
    Ok(Sample { value, grad: Some(grad) })
}

/// SDRE oracle counting its Riccati solves.
pub struct SdreOracle {
    problem: ControlProblem,
    mode: LyapunovMode,
    solves: AtomicUsize,
}

impl SdreOracle {
    pub fn new(problem: ControlProblem) -> Self {
        SdreOracle { problem, mode: LyapunovMode::default(), solves: AtomicUsize::new(0) }
    }

    pub fn with_mode(mut self, mode: LyapunovMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> LyapunovMode {
        self.mode
    }

    pub fn problem(&self) -> &ControlProblem {
        &self.problem
    }

    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }
}

impl Oracle for SdreOracle {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn sample(&self, x: &[f64], need_grad: bool) -> Result<Sample> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        sdre_sample_with(&self.problem, x, need_grad, self.mode)
    }
}
