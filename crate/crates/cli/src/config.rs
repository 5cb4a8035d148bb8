//! Run configuration: a JSON file merged with command-line overrides and
//! resolved against the problem defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ttfeedback::basis::{Basis, BasisKind};
use ttfeedback::control::Integrator;
use ttfeedback::cross::RankPolicy;
use ttfeedback::models::{lookup, BenchmarkSpec, ModelParams};
use ttfeedback::sampler::PmpConfig;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Approximate,
    Simulate,
    Benchmark,
    SampleTest,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum RankSpec {
    Fixed { rank: usize },
    Adaptive { init: usize, max_rank: usize, svd_tol: f64, enrich: usize },
}

impl RankSpec {
    pub fn policy(self) -> RankPolicy {
        match self {
            RankSpec::Fixed { rank } => RankPolicy::Fixed(rank),
            RankSpec::Adaptive { init, max_rank, svd_tol, enrich } => {
                RankPolicy::Adaptive { init, max_rank, svd_tol, enrich }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub nodes: usize,
}

fn default_t_pmp() -> f64 {
    PmpConfig::default().horizon
}

fn default_mesh() -> usize {
    PmpConfig::default().mesh
}

/// Source of training samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerSpec {
    /// Closed-form values of an analytic test function.
    Analytic,
    Sdre,
    Pmp {
        #[serde(default = "default_t_pmp")]
        t_pmp: f64,
        #[serde(default = "default_mesh")]
        mesh: usize,
    },
    PmpConstrained {
        u_max: f64,
        #[serde(default = "default_t_pmp")]
        t_pmp: f64,
        #[serde(default = "default_mesh")]
        mesh: usize,
    },
}

impl SamplerSpec {
    pub fn pmp_config(self) -> Option<PmpConfig> {
        match self {
            SamplerSpec::Pmp { t_pmp, mesh } => Some(PmpConfig { horizon: t_pmp, mesh, ..Default::default() }),
            SamplerSpec::PmpConstrained { u_max, t_pmp, mesh } => {
                Some(PmpConfig { horizon: t_pmp, mesh, u_max: Some(u_max), ..Default::default() })
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// The d-dimensional sweep.
    Cross,
    /// The two-dimensional matrix cross.
    Cross2d,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawSpec {
    #[default]
    Tt,
    Lqr,
    Sdre,
    TwoBoxes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub problem: String,
    pub params: ModelParams,
    pub lambda: Option<f64>,
    pub tol: Option<f64>,
    pub it_max: usize,
    pub rank: Option<RankSpec>,
    pub basis: Option<BasisSpec>,
    pub seed: u64,
    pub sampler: Option<SamplerSpec>,
    /// Standard deviation of additive sample noise.
    pub noise: f64,
    pub algorithm: Option<Algorithm>,
    pub horizon: Option<f64>,
    pub integrator: Option<Integrator>,
    pub x0: Option<Vec<f64>>,
    /// FTT file read by `simulate`.
    pub ftt: Option<PathBuf>,
    pub law: LawSpec,
    /// Also write the SDRE reference trajectory.
    pub reference: bool,
    pub out: PathBuf,
    pub suite: Option<String>,
    /// Number of random points checked by `sample-test`.
    pub samples: usize,
    /// Seeds per benchmark row.
    pub bench_seeds: usize,
    /// Cucker–Smale dimensions of the benchmark sweep.
    pub dims: Option<Vec<usize>>,
    pub verbose: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            problem: "2d".into(),
            params: ModelParams::default(),
            lambda: None,
            tol: None,
            it_max: 10,
            rank: None,
            basis: None,
            seed: 0,
            sampler: None,
            noise: 0.0,
            algorithm: None,
            horizon: None,
            integrator: None,
            x0: None,
            ftt: None,
            law: LawSpec::Tt,
            reference: true,
            out: PathBuf::from("out"),
            suite: None,
            samples: 20,
            bench_seeds: 3,
            dims: None,
            verbose: false,
        }
    }
}

/// Flags that override file fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub problem: Option<String>,
    pub lambda: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub na: Option<usize>,
    pub d: Option<usize>,
    pub gamma: Option<f64>,
    pub u_max: Option<f64>,
    pub ftt: Option<PathBuf>,
    pub law: Option<LawSpec>,
    pub suite: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub verbose: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.problem {
            self.problem = v;
        }
        if o.lambda.is_some() {
            self.lambda = o.lambda;
        }
        if o.tol.is_some() {
            self.tol = o.tol;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.out {
            self.out = v;
        }
        if o.na.is_some() {
            self.params.na = o.na;
        }
        if o.d.is_some() {
            self.params.d = o.d;
        }
        if o.gamma.is_some() {
            self.params.gamma = o.gamma;
        }
        if o.u_max.is_some() {
            self.params.u_max = o.u_max;
        }
        if o.ftt.is_some() {
            self.ftt = o.ftt;
        }
        if let Some(v) = o.law {
            self.law = v;
        }
        if o.suite.is_some() {
            self.suite = o.suite;
        }
        if o.x0.is_some() {
            self.x0 = o.x0;
        }
        self.verbose |= o.verbose;
    }

    pub fn spec(&self) -> Result<BenchmarkSpec, CliError> {
        let mut spec = lookup(&self.problem, &self.params).map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(b) = self.basis {
            spec.basis = b.kind;
            spec.nodes = b.nodes;
        }
        Ok(spec)
    }

    /// Fills every problem-dependent field, so that the echoed config
    /// reproduces the run without relying on defaults.
    pub fn resolve(mut self, command: Command) -> Result<Self, CliError> {
        self.command = Some(command);
        if command == Command::Benchmark {
            return Ok(self);
        }
        let spec = self.spec()?;
        let analytic = spec.problem.is_none();
        self.basis = Some(BasisSpec { kind: spec.basis, nodes: spec.nodes });
        self.lambda.get_or_insert(spec.lambdas[0]);
        let tol = *self.tol.get_or_insert(spec.tol);
        if self.rank.is_none() {
            self.rank = Some(match spec.name.as_str() {
                "function-a" => RankSpec::Fixed { rank: 1 },
                "function-b" => RankSpec::Fixed { rank: 2 },
                "2d" => RankSpec::Fixed { rank: 3 },
                "2d-constrained" => RankSpec::Fixed { rank: 6 },
                "lorenz" => RankSpec::Adaptive { init: 2, max_rank: 6, svd_tol: tol, enrich: 2 },
                _ => RankSpec::Adaptive { init: 2, max_rank: 20, svd_tol: tol, enrich: 2 },
            });
        }
        if self.sampler.is_none() {
            self.sampler = Some(if analytic {
                SamplerSpec::Analytic
            } else if let Some(u_max) = spec.u_max {
                SamplerSpec::PmpConstrained { u_max, t_pmp: default_t_pmp(), mesh: default_mesh() }
            } else {
                SamplerSpec::Sdre
            });
        }
        match (analytic, self.sampler) {
            (true, Some(s)) if s != SamplerSpec::Analytic => {
                return Err(CliError::Usage(format!("problem {} only supports the analytic sampler", spec.name)));
            }
            (false, Some(SamplerSpec::Analytic)) => {
                return Err(CliError::Usage(format!("problem {} has no analytic value function", spec.name)));
            }
            _ => {}
        }
        if self.algorithm.is_none() {
            let two_d = spec.name == "2d-constrained";
            self.algorithm = Some(if two_d { Algorithm::Cross2d } else { Algorithm::Cross });
        }
        if self.algorithm == Some(Algorithm::Cross2d) && spec.dim != 2 {
            return Err(CliError::Usage("algorithm cross-2d needs a two-dimensional problem".into()));
        }
        if !analytic {
            self.horizon.get_or_insert(spec.horizon);
            if self.integrator.is_none() {
                self.integrator = Some(if spec.name == "lorenz" {
                    Integrator::rk45()
                } else {
                    Integrator::Rk4 { h: 1e-2 }
                });
            }
            if self.x0.is_none() {
                self.x0 = spec.x0.clone();
            }
            if let Some(x0) = &self.x0 {
                if x0.len() != spec.dim {
                    return Err(CliError::Usage(format!("x0 has {} entries, problem has dimension {}", x0.len(), spec.dim)));
                }
            }
        }
        Ok(self)
    }

    pub fn bases(&self, spec: &BenchmarkSpec) -> Result<Vec<Basis>, CliError> {
        spec.bases().map_err(|e| CliError::Usage(e.to_string()))
    }
}
