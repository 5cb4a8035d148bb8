//! Benchmark control problems and analytic test functions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisKind};
use crate::error::{Error, Result};
use crate::matops::Mat;
use crate::sampler::{ControlProblem, FnOracle, MatFn};

/// Seed of the canonical Cucker–Smale starting point.
pub const CUCKER_SMALE_SEED: u64 = 7;
/// Horizon used for Lorenz runs; long enough for the SDRE loop to settle.
pub const LORENZ_HORIZON: f64 = 10.0;

/// Reference value attached to a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reference {
    pub label: &'static str,
    pub value: f64,
}

/// A benchmark: either a control problem or an analytic function, together
/// with its default discretization and settings.
#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub name: String,
    pub problem: Option<ControlProblem>,
    pub dim: usize,
    pub half_width: f64,
    pub basis: BasisKind,
    pub nodes: usize,
    pub lambdas: Vec<f64>,
    pub tol: f64,
    pub horizon: f64,
    pub x0: Option<Vec<f64>>,
    pub u_max: Option<f64>,
    pub references: Vec<Reference>,
}

impl BenchmarkSpec {
    /// One basis per variable on `[-a, a]`.
    pub fn bases(&self) -> Result<Vec<Basis>> {
        let b = Basis::new(self.basis, self.nodes, (-self.half_width, self.half_width))?;
        Ok(vec![b; self.dim])
    }

    pub fn problem(&self) -> Result<&ControlProblem> {
        self.problem
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("benchmark {} is not a control problem", self.name)))
    }

    pub fn reference(&self, label: &str) -> Option<f64> {
        self.references.iter().find(|r| r.label == label).map(|r| r.value)
    }
}

fn mat_fn(f: impl Fn(&[f64]) -> Mat + Send + Sync + 'static) -> MatFn {
    Arc::new(f)
}

/// Closed-form SDRE solution of the two-dimensional model; depends on `x₁²`.
pub fn exact_pi(x1: f64) -> Mat {
    let q = x1 * x1;
    let s = (q * q + 1.0).sqrt();
    let t = (2.0 * s + 2.0 * q + 1.0).sqrt();
    let off = 0.5 * (s + q);
    Mat::from_row_slice(2, 2, &[0.5 * s * t, off, off, 0.5 * t])
}

fn problem_2d(half_width: f64) -> ControlProblem {
    let a = mat_fn(|x| Mat::from_row_slice(2, 2, &[0.0, 1.0, x[0] * x[0], 0.0]));
    let da = mat_fn(|x| Mat::from_row_slice(2, 2, &[0.0, 0.0, 2.0 * x[0], 0.0]));
    let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
    ControlProblem::new("2d", a, b, vec![(0, da)], Mat::identity(2, 2) * 0.5, Mat::identity(1, 1) * 0.5, half_width)
        .expect("valid 2d problem")
}

/// `ẏ = [[0, 1], [x₁², 0]] y + (0, 1)ᵀ u` with cost `½∫|y|² + u²`.
pub fn make_2d_exact() -> BenchmarkSpec {
    BenchmarkSpec {
        name: "2d".into(),
        problem: Some(problem_2d(1.0)),
        dim: 2,
        half_width: 1.0,
        basis: BasisKind::Lagrange,
        nodes: 14,
        lambdas: vec![0.0, 1e-4, 1.0],
        tol: 1e-4,
        horizon: 20.0,
        x0: Some(vec![1.0, -1.0]),
        u_max: None,
        references: vec![
            Reference { label: "err_j_sigma0", value: 8.6e-9 },
            Reference { label: "err_u_sigma0", value: 5.0e-7 },
        ],
    }
}

/// The two-dimensional model on `[-2, 2]²` with `|u| ≤ u_max` enforced by
/// `u_max·tanh`.
pub fn make_2d_constrained(u_max: f64) -> Result<BenchmarkSpec> {
    if !(u_max > 0.0) {
        return Err(Error::InvalidArgument("2d-constrained: u_max must be positive".into()));
    }
    let mut references = vec![Reference { label: "cost_unconstrained_r6", value: 70.2123 }];
    if (u_max - 20.0).abs() < 1e-12 {
        references.push(Reference { label: "cost_best_r6", value: 91.8594 });
        references.push(Reference { label: "cost_lambda0_r6", value: 93.2145 });
    }
    Ok(BenchmarkSpec {
        name: "2d-constrained".into(),
        problem: Some(problem_2d(2.0)),
        dim: 2,
        half_width: 2.0,
        basis: BasisKind::Lagrange,
        nodes: 14,
        lambdas: vec![0.0, 1e-4, 1e-3, 1e-2],
        tol: 1e-4,
        horizon: 20.0,
        x0: Some(vec![2.0, 2.0]),
        u_max: Some(u_max),
        references,
    })
}

/// Semilinear factorizations of the Lorenz drift.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LorenzForm {
    /// `A` depends on `y` and `z`.
    #[default]
    Standard,
    /// `A` depends on `x` only.
    Alternate,
}

/// Controlled Lorenz system with the control acting on the second equation
/// and cost `∫|y|² + γu²`.
pub fn make_lorenz(sigma: f64, rho: f64, beta: f64, gamma: f64, form: LorenzForm) -> Result<BenchmarkSpec> {
    if !(sigma > 0.0 && beta > 0.0) {
        return Err(Error::InvalidArgument("lorenz: sigma and beta must be positive".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("lorenz: gamma must be positive".into()));
    }
    let (a, da): (MatFn, Vec<(usize, MatFn)>) = match form {
        LorenzForm::Standard => (
            mat_fn(move |s| {
                Mat::from_row_slice(3, 3, &[-sigma, sigma, 0.0, rho - s[2], -1.0, 0.0, s[1], 0.0, -beta])
            }),
            vec![
                (1, mat_fn(|_| Mat::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]))),
                (2, mat_fn(|_| Mat::from_row_slice(3, 3, &[0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]))),
            ],
        ),
        LorenzForm::Alternate => (
            mat_fn(move |s| {
                Mat::from_row_slice(3, 3, &[-sigma, sigma, 0.0, rho, -1.0, -s[0], 0.0, s[0], -beta])
            }),
            vec![(0, mat_fn(|_| Mat::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0])))],
        ),
    };
    let b = Mat::from_row_slice(3, 1, &[0.0, 1.0, 0.0]);
    let problem = ControlProblem::new("lorenz", a, b, da, Mat::identity(3, 3), Mat::identity(1, 1) * gamma, 1.0)?;
    Ok(BenchmarkSpec {
        name: "lorenz".into(),
        problem: Some(problem),
        dim: 3,
        half_width: 1.0,
        basis: BasisKind::Legendre,
        nodes: 6,
        lambdas: vec![0.0, 1.0],
        tol: 1e-2,
        horizon: LORENZ_HORIZON,
        x0: Some(vec![-1.0; 3]),
        u_max: None,
        references: vec![],
    })
}

/// Interaction kernel `1 / (1 + |a - b|²)`.
pub fn cs_kernel(a: f64, b: f64) -> f64 {
    1.0 / (1.0 + (a - b) * (a - b))
}

/// Consensus block: off-diagonal `P(y_i, y_j)/N`, diagonal minus the row sum.
pub fn cs_consensus(y: &[f64]) -> Mat {
    let n = y.len();
    let inv = 1.0 / n as f64;
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if i != j {
                let p = inv * cs_kernel(y[i], y[j]);
                m[(i, j)] = p;
                sum += p;
            }
        }
        m[(i, i)] = -sum;
    }
    m
}

/// `∂/∂y_l` of the consensus block.
fn cs_consensus_deriv(y: &[f64], l: usize) -> Mat {
    let n = y.len();
    let inv = 1.0 / n as f64;
    let dk = |a: f64, b: f64| {
        let p = cs_kernel(a, b);
        -2.0 * (a - b) * p * p
    };
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = if i == l {
                inv * dk(y[i], y[j])
            } else if j == l {
                -inv * dk(y[i], y[j])
            } else {
                0.0
            };
            m[(i, j)] = v;
            m[(i, i)] -= v;
        }
    }
    m
}

/// Cucker–Smale flocking of `N` agents on the line, state `(y, v)` in
/// `[-0.5, 0.5]^{2N}`, cost `(1/N)∫|y|² + |v|² + |u|²`.
pub fn make_cucker_smale(agents: usize) -> Result<BenchmarkSpec> {
    if agents == 0 {
        return Err(Error::InvalidArgument("cucker-smale: need at least one agent".into()));
    }
    let n = agents;
    let d = 2 * n;
    let a = mat_fn(move |x| {
        let mut m = Mat::zeros(d, d);
        for i in 0..n {
            m[(i, n + i)] = 1.0;
        }
        m.view_mut((n, n), (n, n)).copy_from(&cs_consensus(&x[..n]));
        m
    });
    let da = (0..n)
        .map(|l| {
            let f = mat_fn(move |x| {
                let mut m = Mat::zeros(d, d);
                m.view_mut((n, n), (n, n)).copy_from(&cs_consensus_deriv(&x[..n], l));
                m
            });
            (l, f)
        })
        .collect();
    let mut b = Mat::zeros(d, n);
    for i in 0..n {
        b[(n + i, i)] = 1.0;
    }
    let w = 1.0 / n as f64;
    let problem = ControlProblem::new("cucker-smale", a, b, da, Mat::identity(d, d) * w, Mat::identity(n, n) * w, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(CUCKER_SMALE_SEED);
    let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut references = vec![];
    if n == 2 {
        references.push(Reference { label: "sdre_cost", value: 0.150168 });
        references.push(Reference { label: "pmp_cost", value: 0.150173 });
    }
    Ok(BenchmarkSpec {
        name: "cucker-smale".into(),
        problem: Some(problem),
        dim: d,
        half_width: 0.5,
        basis: BasisKind::Legendre,
        nodes: 5,
        lambdas: std::iter::once(0.0).chain((0..=6).map(|k| 10f64.powi(-k))).collect(),
        tol: 1e-2,
        horizon: 20.0,
        x0: Some(x0),
        u_max: None,
        references,
    })
}

/// `exp(-Σ x_i / (2d))` on `[-1, 1]^d`; exact rank one.
pub fn test_function_a(dim: usize) -> FnOracle {
    FnOracle::exp_sum(dim)
}

/// `exp(-Π x_i)` on `[-1, 1]^d`.
pub fn test_function_b(dim: usize) -> FnOracle {
    FnOracle::exp_prod(dim)
}

fn function_spec(name: &str, dim: usize) -> BenchmarkSpec {
    BenchmarkSpec {
        name: name.into(),
        problem: None,
        dim,
        half_width: 1.0,
        basis: BasisKind::Legendre,
        nodes: 33,
        lambdas: std::iter::once(0.0).chain((0..=6).map(|k| 10f64.powi(-k))).collect(),
        tol: 1e-4,
        horizon: 0.0,
        x0: None,
        u_max: None,
        references: vec![],
    }
}

/// Parameters accepted by the registry; unset fields take model defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Number of Cucker–Smale agents.
    pub na: Option<usize>,
    /// Dimension of the analytic test functions.
    pub d: Option<usize>,
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub lorenz_form: Option<LorenzForm>,
    pub u_max: Option<f64>,
}

/// Names understood by [`lookup`].
pub const BENCHMARKS: &[&str] = &["2d", "2d-constrained", "lorenz", "cucker-smale", "function-a", "function-b"];

/// Builds a benchmark by name.
pub fn lookup(name: &str, p: &ModelParams) -> Result<BenchmarkSpec> {
    match name {
        "2d" => Ok(make_2d_exact()),
        "2d-constrained" => make_2d_constrained(p.u_max.unwrap_or(20.0)),
        "lorenz" => make_lorenz(
            p.sigma.unwrap_or(10.0),
            p.rho.unwrap_or(2.0),
            p.beta.unwrap_or(8.0 / 3.0),
            p.gamma.unwrap_or(1e-3),
            p.lorenz_form.unwrap_or_default(),
        ),
        "cucker-smale" => make_cucker_smale(p.na.unwrap_or(2)),
        "function-a" => Ok(function_spec("function-a", p.d.unwrap_or(100))),
        "function-b" => Ok(function_spec("function-b", p.d.unwrap_or(100))),
        other => Err(Error::InvalidArgument(format!(
            "unknown problem {other:?}; expected one of {}",
            BENCHMARKS.join(", ")
        ))),
    }
}

/// Analytic oracle of a function benchmark.
pub fn function_oracle(spec: &BenchmarkSpec) -> Result<FnOracle> {
    match spec.name.as_str() {
        "function-a" => Ok(test_function_a(spec.dim)),
        "function-b" => Ok(test_function_b(spec.dim)),
        other => Err(Error::InvalidArgument(format!("benchmark {other} has no analytic oracle"))),
    }
}
