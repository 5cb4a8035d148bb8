use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matops::Mat;

/// State-dependent matrix function.
pub type MatFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;

/// Infinite-horizon problem `min ∫ yᵀQy + uᵀRu dt` subject to the semilinear
/// dynamics `ẏ = A(y) y + B u` on the box `[-a, a]^d`.
#[derive(Clone)]
pub struct ControlProblem {
    pub name: String,
    a: MatFn,
    b: Mat,
    da: Vec<(usize, MatFn)>,
    q: Mat,
    r: Mat,
    r_inv: Mat,
    w: Mat,
    half_width: f64,
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("name", &self.name)
            .field("d", &self.dim())
            .field("m", &self.controls())
            .field("da_vars", &self.da.iter().map(|(i, _)| *i).collect::<Vec<_>>())
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl ControlProblem {
    /// `da` lists `(i, ∂A/∂x_i)` for exactly the variables `A` depends on.
    pub fn new(
        name: impl Into<String>,
        a: MatFn,
        b: Mat,
        da: Vec<(usize, MatFn)>,
        q: Mat,
        r: Mat,
        half_width: f64,
    ) -> Result<Self> {
        let d = b.nrows();
        let m = b.ncols();
        if q.shape() != (d, d) || r.shape() != (m, m) {
            return Err(Error::InvalidArgument("problem: Q must be d×d and R m×m".into()));
        }
        if !(half_width > 0.0) {
            return Err(Error::InvalidArgument("problem: domain half-width must be positive".into()));
        }
        let a0 = a(&vec![0.0; d]);
        if a0.shape() != (d, d) {
            return Err(Error::InvalidArgument("problem: A(x) must be d×d".into()));
        }
        for (i, _) in &da {
            if *i >= d {
                return Err(Error::InvalidArgument(format!("problem: dA variable {i} out of range")));
            }
        }
        let sym = |m: &Mat| (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0);
        if !sym(&q) || !sym(&r) {
            return Err(Error::InvalidArgument("problem: Q and R must be symmetric".into()));
        }
        let qmin = SymmetricEigen::new(q.clone()).eigenvalues.min();
        if qmin < -1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidArgument("problem: Q must be positive semidefinite".into()));
        }
        let r_inv = r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("problem: R must be positive definite".into()))?
            .inverse();
        let w = &b * &r_inv * b.transpose();
        Ok(ControlProblem { name: name.into(), a, b, da, q, r, r_inv, w, half_width })
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn controls(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self, x: &[f64]) -> Mat {
        (self.a)(x)
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn r_inv(&self) -> &Mat {
        &self.r_inv
    }

    /// `W = B R⁻¹ Bᵀ`.
    pub fn w(&self) -> &Mat {
        &self.w
    }

    pub fn da(&self) -> &[(usize, MatFn)] {
        &self.da
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn domain(&self) -> (f64, f64) {
        (-self.half_width, self.half_width)
    }

    /// Drift plus control, `A(y) y + B u`.
    pub fn rhs(&self, y: &[f64], u: &[f64]) -> Vec<f64> {
        let yv = DVector::from_column_slice(y);
        let uv = DVector::from_column_slice(u);
        let f = self.a(y) * yv + &self.b * uv;
        f.iter().copied().collect()
    }

    /// Jacobian of the drift `A(y) y`: `A(y) + [∂A/∂y_i · y]_i`.
    pub fn drift_jacobian(&self, y: &[f64]) -> Mat {
        let mut j = self.a(y);
        let yv = DVector::from_column_slice(y);
        for (i, da) in &self.da {
            let col = da(y) * &yv;
            for r in 0..j.nrows() {
                j[(r, *i)] += col[r];
            }
        }
        j
    }

    pub fn running_cost(&self, y: &[f64], u: &[f64]) -> f64 {
        let yv = DVector::from_column_slice(y);
        let uv = DVector::from_column_slice(u);
        (yv.transpose() * &self.q * &yv)[0] + (uv.transpose() * &self.r * &uv)[0]
    }

    /// `u = -½ R⁻¹ Bᵀ ∇V`.
    pub fn feedback_from_grad(&self, grad: &[f64]) -> Vec<f64> {
        let g = DVector::from_column_slice(grad);
        let u = -0.5 * &self.r_inv * self.b.transpose() * g;
        u.iter().copied().collect()
    }
}
