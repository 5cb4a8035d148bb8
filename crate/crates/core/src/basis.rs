//! Univariate collocation bases.
//!
//! Every variable of a functional tensor train carries a [`Basis`]: a set of
//! Gauss-Legendre collocation nodes on an interval `[a, b]`, the matching
//! quadrature weights, and the basis functions themselves (Lagrange
//! cardinal polynomials on the nodes, or Legendre polynomials mapped affinely
//! to the interval). `values` and `derivs` hold `Φ(X)` and `Φ'(X)`, i.e.
//! basis functions (columns) evaluated at the nodes (rows).
//!
//! Evaluation outside `[a, b]` continues the polynomials analytically.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Lagrange,
    Legendre,
}

impl BasisKind {
    pub fn code(self) -> u8 {
        match self {
            BasisKind::Lagrange => 0,
            BasisKind::Legendre => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BasisKind::Lagrange),
            1 => Some(BasisKind::Legendre),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Basis {
    kind: BasisKind,
    interval: (f64, f64),
    nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    /// Barycentric weights of the nodes (used by the Lagrange kind).
    bary: Vec<f64>,
    values: DMatrix<f64>,
    derivs: DMatrix<f64>,
    values_inv: DMatrix<f64>,
}

/// Gauss-Legendre nodes and weights on `[a, b]`, nodes increasing.
pub fn gauss_legendre(n: usize, interval: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = interval;
    if n == 0 {
        return Err(Error::InvalidArgument("gauss_legendre: n must be >= 1".into()));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gauss_legendre: invalid interval [{a}, {b}]"
        )));
    }
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    // Roots are symmetric; compute the upper half by Newton from Tricomi's guess.
    for i in 0..(n + 1) / 2 {
        let k = (i + 1) as f64;
        let mut x = -(std::f64::consts::PI * (4.0 * k - 1.0) / (4.0 * nf + 2.0)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_deriv(n, x);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - x * x) * dp * dp);
        t[i] = x;
        t[n - 1 - i] = -x;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        t[n / 2] = 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let nodes = t.iter().map(|&ti| mid + half * ti).collect();
    let weights = w.iter().map(|&wi| wi * half).collect();
    Ok((nodes, weights))
}

/// `P_n(x)` and `P_n'(x)` on the reference interval.
fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut d0 = 0.0;
    if n == 0 {
        return (p0, d0);
    }
    let mut p1 = x;
    let mut d1 = 1.0;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

impl Basis {
    pub fn new(kind: BasisKind, n: usize, interval: (f64, f64)) -> Result<Self> {
        let (nodes, quad_weights) = gauss_legendre(n, interval)?;
        Self::with_nodes(kind, interval, nodes, quad_weights)
    }

    /// Builds a basis on explicit nodes. Quadrature weights are taken as given.
    pub fn with_nodes(
        kind: BasisKind,
        interval: (f64, f64),
        nodes: Vec<f64>,
        quad_weights: Vec<f64>,
    ) -> Result<Self> {
        let n = nodes.len();
        if n == 0 || quad_weights.len() != n {
            return Err(Error::InvalidArgument("basis: need n >= 1 nodes and weights".into()));
        }
        let bary = barycentric_weights(&nodes);
        let mut basis = Basis {
            kind,
            interval,
            nodes,
            quad_weights,
            bary,
            values: DMatrix::zeros(n, n),
            derivs: DMatrix::zeros(n, n),
            values_inv: DMatrix::identity(n, n),
        };
        match kind {
            BasisKind::Lagrange => {
                basis.values = DMatrix::identity(n, n);
                basis.derivs = lagrange_diff_matrix(&basis.nodes, &basis.bary);
            }
            BasisKind::Legendre => {
                for i in 0..n {
                    let x = basis.nodes[i];
                    let (v, d) = basis.legendre_rows(x);
                    for j in 0..n {
                        basis.values[(i, j)] = v[j];
                        basis.derivs[(i, j)] = d[j];
                    }
                }
            }
        }
        if kind != BasisKind::Lagrange {
            basis.values_inv = basis
                .values
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::InvalidArgument("basis: singular Vandermonde matrix".into()))?;
        }
        Ok(basis)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// `Φ(X)`: row `i` holds all basis functions evaluated at node `i`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// `Φ'(X)`, including the interval chain-rule factor.
    pub fn derivs(&self) -> &DMatrix<f64> {
        &self.derivs
    }

    /// `Φ(X)⁻¹`, mapping nodal values to coefficients.
    pub fn values_inv(&self) -> &DMatrix<f64> {
        &self.values_inv
    }

    /// Coefficients `c` with `Φ(X) c = v`.
    pub fn solve_values(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: v.len() });
        }
        Ok((&self.values_inv * nalgebra::DVector::from_column_slice(v)).iter().copied().collect())
    }

    /// 2-norm condition number of `Φ(X)`.
    pub fn condition_number(&self) -> f64 {
        let sv = self.values.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    fn to_reference(&self, x: f64) -> f64 {
        let (a, b) = self.interval;
        (2.0 * x - a - b) / (b - a)
    }

    fn legendre_rows(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let (a, b) = self.interval;
        let scale = 2.0 / (b - a);
        let t = self.to_reference(x);
        let mut p = vec![0.0; n];
        let mut d = vec![0.0; n];
        p[0] = 1.0;
        if n > 1 {
            p[1] = t;
            d[1] = 1.0;
        }
        for k in 1..n.saturating_sub(1) {
            let kf = k as f64;
            p[k + 1] = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
            d[k + 1] = d[k - 1] + (2.0 * kf + 1.0) * p[k];
        }
        d.iter_mut().for_each(|v| *v *= scale);
        (p, d)
    }

    /// Writes the basis values at `x` into `out` (length `n`).
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        match self.kind {
            BasisKind::Legendre => {
                let (p, _) = self.legendre_rows(x);
                out.copy_from_slice(&p);
            }
            BasisKind::Lagrange => self.lagrange_values(x, out),
        }
    }

    /// Writes the basis derivatives at `x` into `out` (length `n`).
    pub fn eval_deriv_into(&self, x: f64, out: &mut [f64]) {
        match self.kind {
            BasisKind::Legendre => {
                let (_, d) = self.legendre_rows(x);
                out.copy_from_slice(&d);
            }
            BasisKind::Lagrange => {
                // l_j' is a polynomial of degree n-2, reproduced exactly by
                // interpolating its nodal values D[i, j].
                let n = self.len();
                let mut l = vec![0.0; n];
                self.lagrange_values(x, &mut l);
                for j in 0..n {
                    out[j] = (0..n).map(|i| l[i] * self.derivs[(i, j)]).sum();
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("eval_basis: non-finite x = {x}")));
        }
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    pub fn eval_deriv(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("eval_basis_deriv: non-finite x = {x}")));
        }
        let mut out = vec![0.0; self.len()];
        self.eval_deriv_into(x, &mut out);
        Ok(out)
    }

    fn lagrange_values(&self, x: f64, out: &mut [f64]) {
        let n = self.len();
        for (j, &xj) in self.nodes.iter().enumerate() {
            if x == xj {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[j] = 1.0;
                return;
            }
        }
        let mut denom = 0.0;
        for j in 0..n {
            let t = self.bary[j] / (x - self.nodes[j]);
            out[j] = t;
            denom += t;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] /= nodes[j] - nodes[k];
            }
        }
    }
    // Rescale to avoid overflow for large n; the barycentric formula is
    // invariant under a common factor.
    let max = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= max);
    w
}

fn lagrange_diff_matrix(nodes: &[f64], bary: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}
