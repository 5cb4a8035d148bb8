//! Oracles producing value and gradient samples of a value function.
//!
//! [`Oracle`] is the interface the cross algorithms consume; [`SampleCache`]
//! evaluates grid points in parallel and deduplicates repeated requests.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::Basis;
use crate::error::{Error, Result};

mod pmp;
mod problem;
mod sdre;

pub use pmp::{
    penalty_cost, pmp_mesh_check, pmp_sample, pmp_sample_constrained, saturate, PmpConfig, PmpOracle, PmpSolution,
};
pub use problem::{ControlProblem, MatFn};
pub use sdre::{sdre_pi, sdre_sample, sdre_sample_with, LyapunovMode, SdreOracle};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub value: f64,
    /// Present whenever the gradient was requested.
    pub grad: Option<Vec<f64>>,
}

/// Source of `(V(x), ∇V(x))` samples.
pub trait Oracle: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, x: &[f64], need_grad: bool) -> Result<Sample>;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample(&self, x: &[f64], need_grad: bool) -> Result<Sample> {
        (**self).sample(x, need_grad)
    }
}

impl<O: Oracle + ?Sized + Send> Oracle for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample(&self, x: &[f64], need_grad: bool) -> Result<Sample> {
        (**self).sample(x, need_grad)
    }
}

type ValueFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Oracle backed by closed-form value and gradient functions.
pub struct FnOracle {
    dim: usize,
    value: ValueFn,
    grad: GradFn,
}

impl FnOracle {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnOracle { dim, value: Box::new(value), grad: Box::new(grad) }
    }

    /// `exp(-Σ x_i / (2d))`, an exact rank-1 function.
    pub fn exp_sum(dim: usize) -> Self {
        let s = 1.0 / (2.0 * dim as f64);
        FnOracle::new(
            dim,
            move |x| (-s * x.iter().sum::<f64>()).exp(),
            move |x| {
                let f = (-s * x.iter().sum::<f64>()).exp();
                vec![-s * f; x.len()]
            },
        )
    }

    /// `exp(-Π x_i)`.
    pub fn exp_prod(dim: usize) -> Self {
        FnOracle::new(
            dim,
            |x| (-x.iter().product::<f64>()).exp(),
            |x| {
                let n = x.len();
                let f = (-x.iter().product::<f64>()).exp();
                // Products of all entries except i, without division.
                let mut left = vec![1.0; n + 1];
                for i in 0..n {
                    left[i + 1] = left[i] * x[i];
                }
                let mut right = 1.0;
                let mut g = vec![0.0; n];
                for i in (0..n).rev() {
                    g[i] = -f * left[i] * right;
                    right *= x[i];
                }
                g
            },
        )
    }
}

impl Oracle for FnOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, x: &[f64], need_grad: bool) -> Result<Sample> {
        let value = (self.value)(x);
        let grad = need_grad.then(|| (self.grad)(x));
        Ok(Sample { value, grad })
    }
}

/// Adds i.i.d. `N(0, σ²)` noise to the value and every gradient component.
///
/// The noise depends only on `(seed, x)`, so repeated requests for the same
/// point see the same perturbation.
pub struct NoisyOracle<O> {
    inner: O,
    sigma: f64,
    seed: u64,
}

pub fn noisy_wrap<O: Oracle>(inner: O, sigma: f64, seed: u64) -> NoisyOracle<O> {
    NoisyOracle { inner, sigma: sigma.max(0.0), seed }
}

impl<O> NoisyOracle<O> {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn point_seed(seed: u64, x: &[f64]) -> u64 {
    x.iter().fold(splitmix(seed), |h, v| splitmix(h ^ v.to_bits()))
}

impl<O: Oracle> Oracle for NoisyOracle<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sample(&self, x: &[f64], need_grad: bool) -> Result<Sample> {
        let mut s = self.inner.sample(x, need_grad)?;
        if self.sigma == 0.0 {
            return Ok(s);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(point_seed(self.seed, x));
        let draws: Vec<f64> = (0..=x.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        s.value += self.sigma * draws[0];
        if let Some(g) = s.grad.as_mut() {
            for (gi, e) in g.iter_mut().zip(&draws[1..]) {
                *gi += self.sigma * e;
            }
        }
        Ok(s)
    }
}

/// Samples for one fiber, in request order.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// `d` entries per point, empty unless gradients were requested.
    pub gradients: Vec<f64>,
}

/// Deduplicating, parallel evaluator of grid points.
pub struct SampleCache<'a> {
    oracle: &'a dyn Oracle,
    bases: Vec<Basis>,
    map: HashMap<Vec<u16>, Sample>,
    calls: usize,
    hits: usize,
}

impl<'a> SampleCache<'a> {
    pub fn new(oracle: &'a dyn Oracle, bases: Vec<Basis>) -> Result<Self> {
        if oracle.dim() != bases.len() {
            return Err(Error::DimensionMismatch { expected: bases.len(), got: oracle.dim() });
        }
        Ok(SampleCache { oracle, bases, map: HashMap::new(), calls: 0, hits: 0 })
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    /// Underlying oracle invocations so far.
    pub fn calls(&self) -> usize {
        self.calls
    }

    /// Requests served from the cache.
    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn point(&self, idx: &[u16]) -> Vec<f64> {
        idx.iter().zip(&self.bases).map(|(&i, b)| b.nodes()[i as usize]).collect()
    }

    /// Evaluates the grid points `indices` (node multi-indices).
    pub fn batch(&mut self, indices: &[Vec<u16>], need_grad: bool) -> Result<SampleBatch> {
        let missing: Vec<Vec<u16>> = {
            let mut seen = std::collections::HashSet::new();
            indices
                .iter()
                .filter(|idx| match self.map.get(*idx) {
                    Some(s) => need_grad && s.grad.is_none(),
                    None => true,
                })
                .filter(|idx| seen.insert((*idx).clone()))
                .cloned()
                .collect()
        };
        self.hits += indices.len() - missing.len();
        let oracle = self.oracle;
        let results: Vec<(Vec<u16>, Result<Sample>)> = missing
            .into_par_iter()
            .map(|idx| {
                let x = self.point(&idx);
                let s = match oracle.sample(&x, need_grad) {
                    Ok(s) if s.value.is_finite() => Ok(s),
                    Ok(_) => Err(Error::Oracle { point: x, message: "non-finite value".into() }),
                    Err(e @ Error::Oracle { .. }) => Err(e),
                    Err(e) => Err(Error::Oracle { point: x, message: e.to_string() }),
                };
                (idx, s)
            })
            .collect();
        self.calls += results.len();
        let mut failures = Vec::new();
        for (idx, r) in results {
            match r {
                Ok(s) => {
                    self.map.insert(idx, s);
                }
                Err(e) => failures.push(e),
            }
        }
        let failed = failures.len();
        if let Some(e) = failures.into_iter().next() {
            return Err(match e {
                Error::Oracle { point, message } if failed > 1 => {
                    Error::Oracle { point, message: format!("{message} (and {} more failing points)", failed - 1) }
                }
                other => other,
            });
        }
        let d = self.bases.len();
        let mut batch = SampleBatch {
            points: Vec::with_capacity(indices.len()),
            values: Vec::with_capacity(indices.len()),
            gradients: Vec::with_capacity(if need_grad { indices.len() * d } else { 0 }),
        };
        for idx in indices {
            let s = &self.map[idx];
            batch.points.push(self.point(idx));
            batch.values.push(s.value);
            if need_grad {
                batch.gradients.extend_from_slice(s.grad.as_ref().expect("gradient requested"));
            }
        }
        Ok(batch)
    }
}

/// Stand-alone batch evaluation without a persistent cache.
pub fn batch_sample(
    oracle: &dyn Oracle,
    bases: &[Basis],
    indices: &[Vec<u16>],
    need_grad: bool,
) -> Result<SampleBatch> {
    SampleCache::new(oracle, bases.to_vec())?.batch(indices, need_grad)
}
