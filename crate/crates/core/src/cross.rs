//! Gradient-enhanced tensor-train cross approximation.
//!
//! [`gradient_cross`] runs alternating sweeps over the cores of a functional
//! tensor train. At core `k` it samples values (and gradients when `λ > 0`)
//! on the fiber `X̄_{<k} × X_k × X̄_{>k}`, fits the core by the weighted
//! least-squares problem [`solve_core_ls`], and moves to the neighbour
//! through QR + maxvol on grid rows, which picks the next nested point set.
//! [`gradient_cross_2d`] is the bidimensional variant whose core fits are
//! Sylvester equations.
//!
//! After each maxvol step the factor separating the orthogonal core from its
//! interpolating form is multiplied into the next core, so the stored train
//! always represents the current approximation. The sweep residual compares
//! each freshly solved core with that transferred previous iterate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::ftt::{mode_product, to_row_major, Ftt};
use crate::matops::{
    maxvol, solve_sylvester, sym_gen_eig, thin_q, truncated_svd, Mat, DEFAULT_MAXVOL_DELTA,
};
use crate::sampler::{Oracle, SampleCache};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankPolicy {
    Fixed(usize),
    /// Ranks start at `init`, are truncated to `svd_tol` and enriched by
    /// `enrich` columns from a rank-`enrich` approximation of the error.
    Adaptive { init: usize, max_rank: usize, svd_tol: f64, enrich: usize },
}

#[derive(Debug, Clone)]
pub struct CrossConfig {
    /// Weight of every gradient component; the value term has weight 1.
    pub lambda: f64,
    pub tol: f64,
    pub it_max: usize,
    pub rank: RankPolicy,
    pub seed: u64,
    pub maxvol_delta: f64,
    /// Sweeps of the error approximation run before each half sweep.
    pub enrich_sweeps: usize,
    /// Echo progress lines to stderr.
    pub verbose: bool,
}

impl Default for CrossConfig {
    fn default() -> Self {
        CrossConfig {
            lambda: 0.0,
            tol: 1e-6,
            it_max: 10,
            rank: RankPolicy::Fixed(2),
            seed: 0,
            maxvol_delta: DEFAULT_MAXVOL_DELTA,
            enrich_sweeps: 2,
            verbose: false,
        }
    }
}

impl CrossConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument("cross: lambda must be >= 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("cross: tol must be > 0".into()));
        }
        if self.it_max == 0 {
            return Err(Error::InvalidArgument("cross: it_max must be >= 1".into()));
        }
        match self.rank {
            RankPolicy::Fixed(r) if r == 0 => {
                Err(Error::InvalidArgument("cross: rank must be >= 1".into()))
            }
            RankPolicy::Adaptive { init, max_rank, enrich, svd_tol } => {
                if init == 0 || max_rank == 0 || enrich == 0 || !(svd_tol >= 0.0) {
                    Err(Error::InvalidArgument(
                        "cross: adaptive policy needs init, max_rank, enrich >= 1 and svd_tol >= 0".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrossReport {
    pub ftt: Ftt,
    pub iterations: usize,
    /// Sweep residual after each iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Underlying oracle calls, enrichment included.
    pub oracle_calls: usize,
    pub cache_hits: usize,
    /// Progress lines `sweep=<it> core=<k> rank=<r_k> res=<res> evals=<n>`.
    pub log: Vec<String>,
    /// Final left point sets `X̄_{<k}` as node multi-indices, `k = 0..=d`.
    pub left_sets: Vec<Vec<Vec<u16>>>,
    /// Final right point sets `X̄_{≥k}` as node multi-indices, `k = 0..=d`.
    pub right_sets: Vec<Vec<Vec<u16>>>,
}

impl CrossReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Interfaces around core `k` for the least-squares fit.
pub struct CoreSystem<'a> {
    pub k: usize,
    pub basis: &'a Basis,
    /// `G^{(<k)}(X̄_{<k})`, points × rank.
    pub gl: &'a Mat,
    /// `∂_i G^{(<k)}(X̄_{<k})` for `i < k`.
    pub dgl: &'a [Mat],
    /// `G^{(>k)}(X̄_{>k})`, rank × points.
    pub gr: &'a Mat,
    /// `∂_i G^{(>k)}(X̄_{>k})` for `i > k`, in increasing `i`.
    pub dgr: &'a [Mat],
}

impl CoreSystem<'_> {
    fn dim(&self) -> usize {
        self.k + 1 + self.dgr.len()
    }
}

/// Weighted least-squares fit of core `k`.
///
/// `values` holds `V` on the fiber in `(left point, node, right point)` order
/// and `grads` holds `d` derivatives per point in the same order (ignored when
/// `λ = 0`). The normal operator
/// `A_<⊗M⊗M_> + M_<⊗A⊗M_> + M_<⊗M⊗A_>` is diagonalized by the generalized
/// eigenvectors of the three pairs `(A_<, M_<)`, `(A, M)`, `(A_>, M_>)`
/// normalized against the mass matrices, so it reduces to the diagonal
/// `L_< ⊕ L ⊕ L_>` whose entries are at least 1. All Kronecker products are
/// applied mode by mode. Returns the core in `(left, node, right)` layout.
pub fn solve_core_ls(sys: &CoreSystem, values: &[f64], grads: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (p, r0) = sys.gl.shape();
    let (r1, q) = sys.gr.shape();
    let n = sys.basis.len();
    let d = sys.dim();
    let k = sys.k;
    let npts = p * n * q;
    if values.len() != npts {
        return Err(Error::DimensionMismatch { expected: npts, got: values.len() });
    }
    let use_grad = lambda > 0.0;
    if use_grad && grads.len() != npts * d {
        return Err(Error::DimensionMismatch { expected: npts * d, got: grads.len() });
    }
    let phi = sys.basis.values();
    let dphi = sys.basis.derivs();
    let comp = |i: usize| -> Vec<f64> { (0..npts).map(|t| grads[t * d + i]).collect() };

    // Right-hand side F.
    let mut s = mode_product(values, p * n, q, 1, sys.gr);
    if use_grad {
        for (off, dg) in sys.dgr.iter().enumerate() {
            let t = mode_product(&comp(k + 1 + off), p * n, q, 1, dg);
            axpy(&mut s, lambda, &t);
        }
    }
    let mut f = mode_product(&s, 1, p, n * r1, &sys.gl.transpose());
    if use_grad {
        if k > 0 {
            let mut u = vec![0.0; r0 * n * q];
            for (i, dg) in sys.dgl.iter().enumerate() {
                let t = mode_product(&comp(i), 1, p, n * q, &dg.transpose());
                axpy(&mut u, lambda, &t);
            }
            let u = mode_product(&u, r0 * n, q, 1, sys.gr);
            axpy(&mut f, 1.0, &u);
        }
    }
    let mut f = mode_product(&f, r0, n, r1, &phi.transpose());
    if use_grad {
        let vk = mode_product(&comp(k), 1, p, n * q, &sys.gl.transpose());
        let vk = mode_product(&vk, r0 * n, q, 1, sys.gr);
        let vk = mode_product(&vk, r0, n, r1, &dphi.transpose());
        axpy(&mut f, lambda, &vk);
    }

    // Gram pairs.
    let m_l = sys.gl.transpose() * sys.gl;
    let m_c = phi.transpose() * phi;
    let m_r = sys.gr * sys.gr.transpose();
    let mut a_l = Mat::zeros(r0, r0);
    let mut a_c = m_c.clone();
    let mut a_r = Mat::zeros(r1, r1);
    if use_grad {
        for dg in sys.dgl {
            a_l += lambda * dg.transpose() * dg;
        }
        a_c += lambda * dphi.transpose() * dphi;
        for dg in sys.dgr {
            a_r += lambda * dg * dg.transpose();
        }
    }
    let el = sym_gen_eig(&a_l, &m_l)?;
    let ec = sym_gen_eig(&a_c, &m_c)?;
    let er = sym_gen_eig(&a_r, &m_r)?;

    let mut h = mode_product(&f, 1, r0, n * r1, &el.vectors.transpose());
    h = mode_product(&h, r0, n, r1, &ec.vectors.transpose());
    h = mode_product(&h, r0 * n, r1, 1, &er.vectors.transpose());
    let (mut lmin, mut lmax) = (f64::INFINITY, 0.0f64);
    for a in 0..r0 {
        for i in 0..n {
            for b in 0..r1 {
                let l = el.values[a] + ec.values[i] + er.values[b];
                lmin = lmin.min(l);
                lmax = lmax.max(l);
                h[(a * n + i) * r1 + b] /= l;
            }
        }
    }
    if !(lmin > 1e-14 * lmax) {
        return Err(Error::IllPosedCore { core: k, min: lmin, max: lmax });
    }
    h = mode_product(&h, 1, r0, n * r1, &el.vectors);
    h = mode_product(&h, r0, n, r1, &ec.vectors);
    h = mode_product(&h, r0 * n, r1, 1, &er.vectors);
    Ok(h)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn frob(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_change(new: &[f64], old: &[f64]) -> f64 {
    let dn = frob(new);
    if new.len() != old.len() {
        return f64::INFINITY;
    }
    let diff: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if dn == 0.0 {
        if diff == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        diff / dn
    }
}

fn select_rows(m: &Mat, idx: &[usize]) -> Mat {
    Mat::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

fn invert(m: &Mat) -> Result<Mat> {
    m.clone()
        .try_inverse()
        .ok_or(Error::RankDeficient { column: 0 })
}

/// Fiber data provider over node multi-indices.
trait FiberSource {
    fn fetch(&mut self, idx: &[Vec<u16>], need_grad: bool) -> Result<(Vec<f64>, Vec<f64>)>;
}

impl FiberSource for SampleCache<'_> {
    fn fetch(&mut self, idx: &[Vec<u16>], need_grad: bool) -> Result<(Vec<f64>, Vec<f64>)> {
        let b = self.batch(idx, need_grad)?;
        Ok((b.values, b.gradients))
    }
}

/// Samples of `V − Ṽ` for a frozen approximation `Ṽ`.
struct ErrorSource<'s, 'c> {
    cache: &'s mut SampleCache<'c>,
    approx: &'s Ftt,
}

impl FiberSource for ErrorSource<'_, '_> {
    fn fetch(&mut self, idx: &[Vec<u16>], need_grad: bool) -> Result<(Vec<f64>, Vec<f64>)> {
        let b = self.cache.batch(idx, need_grad)?;
        let d = self.approx.dim();
        let mut values = b.values;
        let mut grads = b.gradients;
        for (t, x) in b.points.iter().enumerate() {
            let (v, g) = self.approx.eval_grad(x)?;
            values[t] -= v;
            if need_grad {
                for i in 0..d {
                    grads[t * d + i] -= g[i];
                }
            }
        }
        Ok((values, grads))
    }
}

/// Alternating sweep state: the train, nested point sets and interfaces.
struct Engine {
    ftt: Ftt,
    lambda: f64,
    policy: RankPolicy,
    delta: f64,
    left_sets: Vec<Vec<Vec<u16>>>,
    right_sets: Vec<Vec<Vec<u16>>>,
    gl: Vec<Mat>,
    dgl: Vec<Vec<Mat>>,
    gr: Vec<Mat>,
    dgr: Vec<Vec<Mat>>,
}

impl Engine {
    fn new(bases: Vec<Basis>, lambda: f64, policy: RankPolicy, delta: f64, seed: u64) -> Result<Self> {
        let d = bases.len();
        let target = match policy {
            RankPolicy::Fixed(r) => r,
            RankPolicy::Adaptive { init, max_rank, .. } => init.min(max_rank),
        };
        let mut ranks = vec![1usize; d + 1];
        for k in 1..d {
            let left: usize = bases[..k].iter().fold(1usize, |a, b| a.saturating_mul(b.len()));
            let right: usize = bases[k..].iter().fold(1usize, |a, b| a.saturating_mul(b.len()));
            ranks[k] = target.min(left).min(right);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cores = (0..d)
            .map(|k| {
                (0..ranks[k] * bases[k].len() * ranks[k + 1])
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect()
            })
            .collect();
        let ftt = Ftt::new(bases, ranks, cores)?;
        let mut e = Engine {
            ftt,
            lambda,
            policy,
            delta,
            left_sets: vec![Vec::new(); d + 1],
            right_sets: vec![Vec::new(); d + 1],
            gl: vec![Mat::zeros(0, 0); d + 1],
            dgl: vec![Vec::new(); d + 1],
            gr: vec![Mat::zeros(0, 0); d + 1],
            dgr: vec![Vec::new(); d + 1],
        };
        e.left_sets[0] = vec![Vec::new()];
        e.gl[0] = Mat::identity(1, 1);
        e.right_sets[d] = vec![Vec::new()];
        e.gr[d] = Mat::identity(1, 1);
        // Initial right point sets from the random cores.
        for k in (1..d).rev() {
            e.right_move(k, None, false)?;
        }
        Ok(e)
    }

    fn dim(&self) -> usize {
        self.ftt.dim()
    }

    fn max_rank(&self) -> usize {
        match self.policy {
            RankPolicy::Fixed(r) => r,
            RankPolicy::Adaptive { max_rank, .. } => max_rank,
        }
    }

    fn fiber(&self, k: usize) -> Vec<Vec<u16>> {
        let n = self.ftt.bases()[k].len();
        let mut out = Vec::with_capacity(self.left_sets[k].len() * n * self.right_sets[k + 1].len());
        for l in &self.left_sets[k] {
            for j in 0..n {
                for r in &self.right_sets[k + 1] {
                    let mut idx = Vec::with_capacity(self.dim());
                    idx.extend_from_slice(l);
                    idx.push(j as u16);
                    idx.extend_from_slice(r);
                    out.push(idx);
                }
            }
        }
        out
    }

    /// Samples and fits core `k`; returns the relative change of the core.
    fn solve(&mut self, k: usize, src: &mut dyn FiberSource) -> Result<f64> {
        let idx = self.fiber(k);
        let need_grad = self.lambda > 0.0;
        let (values, grads) = src.fetch(&idx, need_grad)?;
        let sys = CoreSystem {
            k,
            basis: &self.ftt.bases()[k],
            gl: &self.gl[k],
            dgl: &self.dgl[k],
            gr: &self.gr[k + 1],
            dgr: &self.dgr[k + 1],
        };
        let h = solve_core_ls(&sys, &values, &grads, self.lambda)?;
        let res = rel_change(&h, self.ftt.core(k));
        let (r0, r1) = (self.ftt.ranks()[k], self.ftt.ranks()[k + 1]);
        self.ftt.set_core(k, r0, r1, h);
        Ok(res)
    }

    /// Orthonormal column basis for the unfolding `h`, truncated and enriched per policy.
    fn compress(&self, h: &Mat, enrich: Option<Mat>, cap: usize, adapt: bool) -> Mat {
        let mut cols = match (self.policy, adapt) {
            (RankPolicy::Adaptive { svd_tol, .. }, true) => {
                let t = truncated_svd(h, svd_tol);
                Mat::from_fn(h.nrows(), t.rank, |i, j| t.u[(i, j)] * t.s[j])
            }
            _ => h.clone(),
        };
        if let Some(z) = enrich {
            let c0 = cols.ncols();
            let mut joined = Mat::zeros(h.nrows(), c0 + z.ncols());
            joined.columns_mut(0, c0).copy_from(&cols);
            joined.columns_mut(c0, z.ncols()).copy_from(&z);
            cols = joined;
        }
        if cols.ncols() > cap {
            cols = cols.columns(0, cap).clone_owned();
        }
        thin_q(&cols)
    }

    /// Moves the orthogonality centre from core `k` to `k + 1`.
    fn left_move(&mut self, k: usize, enrich: Option<Mat>, adapt: bool) -> Result<()> {
        let bases = self.ftt.bases().to_vec();
        let n = bases[k].len();
        let (r0, r1) = (self.ftt.ranks()[k], self.ftt.ranks()[k + 1]);
        let (n2, r2) = (bases[k + 1].len(), self.ftt.ranks()[k + 2]);
        let hl = Mat::from_row_slice(r0 * n, r1, self.ftt.core(k));
        let cap = (r0 * n).min(n2 * r2).min(self.max_rank()).max(1);
        let q = self.compress(&hl, enrich, cap, adapt);
        let c = q.ncols();
        let t = q.transpose() * &hl;
        let gt = Mat::from_row_slice(r0 * n, c, &mode_product(&to_row_major(&q), r0, n, c, bases[k].values()));
        let mv = maxvol(&gt, self.delta)?;
        let sub = select_rows(&gt, &mv.indices);
        let core = &q * invert(&sub)?;
        let transfer = &sub * t;
        let next = mode_product(self.ftt.core(k + 1), 1, r1, n2 * r2, &transfer);
        self.ftt.set_core(k, r0, c, to_row_major(&core));
        self.ftt.set_core(k + 1, c, r2, next);

        let split: Vec<(usize, usize)> = mv.indices.iter().map(|&i| (i / n, i % n)).collect();
        self.left_sets[k + 1] = split
            .iter()
            .map(|&(a, j)| {
                let mut p = self.left_sets[k][a].clone();
                p.push(j as u16);
                p
            })
            .collect();
        let g = self.ftt.nodal_core(k);
        let dg = self.ftt.nodal_deriv_core(k);
        let slice = |src: &Mat, nodal: &[f64]| -> Mat {
            Mat::from_fn(c, c, |alpha, b| {
                let (a_row, j) = split[alpha];
                (0..r0).map(|a| src[(a_row, a)] * nodal[(a * n + j) * c + b]).sum()
            })
        };
        let gl_next = slice(&self.gl[k], &g);
        let mut dgl_next: Vec<Mat> = self.dgl[k].iter().map(|m| slice(m, &g)).collect();
        dgl_next.push(slice(&self.gl[k], &dg));
        self.gl[k + 1] = gl_next;
        self.dgl[k + 1] = dgl_next;
        Ok(())
    }

    /// Moves the orthogonality centre from core `k` to `k - 1`.
    fn right_move(&mut self, k: usize, enrich: Option<Mat>, adapt: bool) -> Result<()> {
        let bases = self.ftt.bases().to_vec();
        let n = bases[k].len();
        let (r0, r1) = (self.ftt.ranks()[k], self.ftt.ranks()[k + 1]);
        let (pl, pn) = (self.ftt.ranks()[k - 1], bases[k - 1].len());
        let core = self.ftt.core(k);
        // Transposed right unfolding: rows (node, right rank), columns left rank.
        let ht = Mat::from_fn(n * r1, r0, |row, a| core[a * n * r1 + row]);
        let cap = (n * r1).min(pl * pn).min(self.max_rank()).max(1);
        let q = self.compress(&ht, enrich, cap, adapt);
        let c = q.ncols();
        let t = q.transpose() * &ht;
        let gt = Mat::from_row_slice(n * r1, c, &mode_product(&to_row_major(&q), 1, n, r1 * c, bases[k].values()));
        let mv = maxvol(&gt, self.delta)?;
        let sub = select_rows(&gt, &mv.indices);
        let qc = &q * invert(&sub)?;
        let mut new_core = vec![0.0; c * n * r1];
        for row in 0..n * r1 {
            for a in 0..c {
                new_core[a * n * r1 + row] = qc[(row, a)];
            }
        }
        let transfer = &sub * t;
        let prev = mode_product(self.ftt.core(k - 1), pl * pn, r0, 1, &transfer);
        self.ftt.set_core(k, c, r1, new_core);
        self.ftt.set_core(k - 1, pl, c, prev);

        let split: Vec<(usize, usize)> = mv.indices.iter().map(|&i| (i / r1, i % r1)).collect();
        self.right_sets[k] = split
            .iter()
            .map(|&(j, b)| {
                let mut p = Vec::with_capacity(self.dim() - k);
                p.push(j as u16);
                p.extend_from_slice(&self.right_sets[k + 1][b]);
                p
            })
            .collect();
        let g = self.ftt.nodal_core(k);
        let dg = self.ftt.nodal_deriv_core(k);
        let slice = |src: &Mat, nodal: &[f64]| -> Mat {
            Mat::from_fn(c, c, |a, gamma| {
                let (j, b_col) = split[gamma];
                (0..r1).map(|b| nodal[(a * n + j) * r1 + b] * src[(b, b_col)]).sum()
            })
        };
        let gr_next = slice(&self.gr[k + 1], &g);
        let mut dgr_next = vec![slice(&self.gr[k + 1], &dg)];
        dgr_next.extend(self.dgr[k + 1].iter().map(|m| slice(m, &g)));
        self.gr[k] = gr_next;
        self.dgr[k] = dgr_next;
        Ok(())
    }

    /// Enrichment columns for a left move at core `k` from the error train `z`.
    fn left_enrichment(&self, k: usize, z: &Ftt) -> Result<Mat> {
        let n = self.ftt.bases()[k].len();
        let r0 = self.ftt.ranks()[k];
        let (zl, zr) = (z.ranks()[k], z.ranks()[k + 1]);
        let znodal: Vec<Vec<f64>> = (0..=k).map(|j| z.nodal_core(j)).collect();
        // Values of the error's partial train at (left point, node).
        let mut vals = vec![0.0; r0 * n * zr];
        for (p, pt) in self.left_sets[k].iter().enumerate() {
            let mut row = vec![1.0];
            for (j, &node) in pt.iter().enumerate() {
                row = slice_product(&row, &znodal[j], z.ranks()[j], z.bases()[j].len(), z.ranks()[j + 1], node as usize);
            }
            debug_assert_eq!(row.len(), zl);
            for j in 0..n {
                let out = slice_product(&row, &znodal[k], zl, n, zr, j);
                vals[(p * n + j) * zr..(p * n + j + 1) * zr].copy_from_slice(&out);
            }
        }
        // Back to the coefficient gauge of the main train.
        let glinv = invert(&self.gl[k])?;
        let coef = mode_product(&vals, 1, r0, n * zr, &glinv);
        let coef = mode_product(&coef, r0, n, zr, self.ftt.bases()[k].values_inv());
        Ok(Mat::from_row_slice(r0 * n, zr, &coef))
    }

    /// Enrichment columns for a right move at core `k` from the error train `z`.
    fn right_enrichment(&self, k: usize, z: &Ftt) -> Result<Mat> {
        let d = self.dim();
        let n = self.ftt.bases()[k].len();
        let r1 = self.ftt.ranks()[k + 1];
        let (zl, zr) = (z.ranks()[k], z.ranks()[k + 1]);
        let znodal: Vec<Vec<f64>> = (0..d).map(|j| if j >= k { z.nodal_core(j) } else { Vec::new() }).collect();
        let mut vals = vec![0.0; zl * n * r1];
        for (qi, pt) in self.right_sets[k + 1].iter().enumerate() {
            let mut col = vec![1.0];
            for (off, &node) in pt.iter().enumerate().rev() {
                let j = k + 1 + off;
                col = slice_times_col(&znodal[j], z.ranks()[j], z.bases()[j].len(), z.ranks()[j + 1], node as usize, &col);
            }
            debug_assert_eq!(col.len(), zr);
            for j in 0..n {
                let out = slice_times_col(&znodal[k], zl, n, zr, j, &col);
                for c in 0..zl {
                    vals[(c * n + j) * r1 + qi] = out[c];
                }
            }
        }
        let grinv = invert(&self.gr[k + 1])?;
        let coef = mode_product(&vals, zl * n, r1, 1, &grinv.transpose());
        let coef = mode_product(&coef, zl, n, r1, self.ftt.bases()[k].values_inv());
        // Rows (node, right rank), columns from the error's left rank.
        Ok(Mat::from_fn(n * r1, zl, |row, c| coef[c * n * r1 + row]))
    }
}

/// Row vector times the slice at `node` of a `(rl, n, rr)` tensor.
fn slice_product(row: &[f64], t: &[f64], rl: usize, n: usize, rr: usize, node: usize) -> Vec<f64> {
    let mut out = vec![0.0; rr];
    for a in 0..rl {
        for b in 0..rr {
            out[b] += row[a] * t[(a * n + node) * rr + b];
        }
    }
    out
}

/// Slice at `node` of a `(rl, n, rr)` tensor times a column vector.
fn slice_times_col(t: &[f64], rl: usize, n: usize, rr: usize, node: usize, col: &[f64]) -> Vec<f64> {
    (0..rl)
        .map(|a| (0..rr).map(|b| t[(a * n + node) * rr + b] * col[b]).sum())
        .collect()
}

struct Progress {
    log: Vec<String>,
    verbose: bool,
}

impl Progress {
    fn line(&mut self, it: usize, core: usize, rank: usize, res: f64, evals: usize) {
        let s = format!("sweep={it} core={core} rank={rank} res={res:.3e} evals={evals}");
        if self.verbose {
            eprintln!("{s}");
        }
        self.log.push(s);
    }
}

/// Fits a functional tensor train to `oracle` on the tensor grid of `bases`.
pub fn gradient_cross(oracle: &dyn Oracle, bases: Vec<Basis>, config: &CrossConfig) -> Result<CrossReport> {
    config.validate()?;
    let d = bases.len();
    if d == 0 {
        return Err(Error::InvalidArgument("cross: need at least one dimension".into()));
    }
    if bases.iter().any(|b| b.len() > u16::MAX as usize) {
        return Err(Error::InvalidArgument("cross: at most 65535 nodes per dimension".into()));
    }
    let mut cache = SampleCache::new(oracle, bases.clone())?;
    let mut main = Engine::new(bases.clone(), config.lambda, config.rank, config.maxvol_delta, config.seed)?;
    let (adaptive, rho) = match config.rank {
        RankPolicy::Adaptive { enrich, .. } => (true, enrich),
        RankPolicy::Fixed(_) => (false, 0),
    };
    let mut err_engine = if adaptive && d > 1 {
        Some(Engine::new(
            bases,
            config.lambda,
            RankPolicy::Fixed(rho),
            config.maxvol_delta,
            config.seed ^ 0x5eed_e770_0000_0001,
        )?)
    } else {
        None
    };
    let mut progress = Progress { log: Vec::new(), verbose: config.verbose };
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut it = 0;
    while it < config.it_max {
        it += 1;
        let mut res = 0.0f64;

        let z = refresh_error(&mut err_engine, &main, &mut cache, config.enrich_sweeps)?;
        for k in 0..d {
            res = res.max(main.solve(k, &mut cache)?);
            if k + 1 < d {
                let zcols = match &z {
                    Some(z) => Some(main.left_enrichment(k, z)?),
                    None => None,
                };
                main.left_move(k, zcols, adaptive)?;
            }
            progress.line(it, k + 1, main.ftt.ranks()[k + 1], res, cache.calls());
        }

        let z = refresh_error(&mut err_engine, &main, &mut cache, config.enrich_sweeps)?;
        for k in (1..d).rev() {
            let zcols = match &z {
                Some(z) => Some(main.right_enrichment(k, z)?),
                None => None,
            };
            main.right_move(k, zcols, adaptive)?;
            res = res.max(main.solve(k - 1, &mut cache)?);
            progress.line(it, k, main.ftt.ranks()[k], res, cache.calls());
        }

        residuals.push(res);
        if res <= config.tol {
            converged = true;
            break;
        }
    }
    main.ftt.check_chain()?;
    // Drop the enrichment directions still carried by the last sweep.
    let ftt = match config.rank {
        RankPolicy::Adaptive { svd_tol, .. } => main.ftt.round(svd_tol),
        RankPolicy::Fixed(_) => main.ftt,
    };
    Ok(CrossReport {
        ftt,
        iterations: it,
        residuals,
        converged,
        oracle_calls: cache.calls(),
        cache_hits: cache.hits(),
        log: progress.log,
        left_sets: main.left_sets,
        right_sets: main.right_sets,
    })
}

/// Refits the fixed-rank error train against the current approximation.
fn refresh_error(
    err: &mut Option<Engine>,
    main: &Engine,
    cache: &mut SampleCache<'_>,
    sweeps: usize,
) -> Result<Option<Ftt>> {
    let Some(e) = err.as_mut() else { return Ok(None) };
    let snapshot = main.ftt.clone();
    let mut src = ErrorSource { cache, approx: &snapshot };
    let d = e.dim();
    for _ in 0..sweeps.max(1) {
        for k in 0..d {
            e.solve(k, &mut src)?;
            if k + 1 < d {
                e.left_move(k, None, false)?;
            }
        }
        for k in (1..d).rev() {
            e.right_move(k, None, false)?;
            e.solve(k - 1, &mut src)?;
        }
    }
    Ok(Some(e.ftt.clone()))
}

#[derive(Debug, Clone)]
pub struct Cross2dReport {
    pub ftt: Ftt,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub oracle_calls: usize,
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
}

/// Bidimensional gradient cross with rank `r`.
///
/// Each half step solves a Sylvester equation for one factor of
/// `V(x₁, x₂) ≈ Φ₁(x₁) H¹ H² Φ₂(x₂)ᵀ`, then QR + maxvol on grid rows selects
/// the interpolation indices.
pub fn gradient_cross_2d(oracle: &dyn Oracle, bases: [Basis; 2], r: usize, config: &CrossConfig) -> Result<Cross2dReport> {
    config.validate()?;
    let [b1, b2] = bases;
    let (n1, n2) = (b1.len(), b2.len());
    if r == 0 || r > n1 || r > n2 {
        return Err(Error::InvalidArgument(format!("cross2d: rank {r} must lie in 1..=min(n1, n2)")));
    }
    let lambda = config.lambda;
    let need_grad = lambda > 0.0;
    let mut cache = SampleCache::new(oracle, vec![b1.clone(), b2.clone()])?;
    let (phi1, dphi1) = (b1.values(), b1.derivs());
    let (phi2, dphi2) = (b2.values(), b2.derivs());
    let m1inv = invert(&(phi1.transpose() * phi1))?;
    let m2inv = invert(&(phi2.transpose() * phi2))?;

    // Initial H² and I₂ from a Gaussian matrix.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h2_init = Mat::from_fn(r, n2, |_, _| StandardNormal.sample(&mut rng));
    let (h2t, mut i2) = interpolating_factor(&h2_init.transpose(), phi2, config.maxvol_delta)?;
    let mut h2 = h2t.transpose();
    let mut prev: Option<(Mat, Mat)> = None;
    let mut residuals = Vec::new();
    let mut it = 0;
    loop {
        it += 1;
        // x₁ direction: data on X₁ × X₂(I₂).
        let idx: Vec<Vec<u16>> = (0..n1)
            .flat_map(|i| i2.iter().map(move |&j| vec![i as u16, j as u16]))
            .collect();
        let batch = cache.batch(&idx, need_grad)?;
        let v0 = Mat::from_row_slice(n1, r, &batch.values);
        let g2t = &h2 * select_rows(dphi2, &i2).transpose();
        let mut rhs = phi1.transpose() * &v0;
        let mut a = Mat::identity(n1, n1);
        let mut b = Mat::zeros(r, r);
        if need_grad {
            let v1 = Mat::from_fn(n1, r, |i, j| batch.gradients[(i * r + j) * 2]);
            let v2 = Mat::from_fn(n1, r, |i, j| batch.gradients[(i * r + j) * 2 + 1]);
            rhs += lambda * dphi1.transpose() * v1 + lambda * phi1.transpose() * v2 * g2t.transpose();
            a += lambda * &m1inv * dphi1.transpose() * dphi1;
            b = lambda * &g2t * g2t.transpose();
        }
        let h1_solved = solve_sylvester(&a, &b, &(&m1inv * rhs))?;
        let (h1, i1) = interpolating_factor(&h1_solved, phi1, config.maxvol_delta)?;

        // x₂ direction: data on X₁(I₁) × X₂.
        let idx: Vec<Vec<u16>> = i1
            .iter()
            .flat_map(|&i| (0..n2).map(move |j| vec![i as u16, j as u16]))
            .collect();
        let batch = cache.batch(&idx, need_grad)?;
        let v0 = Mat::from_row_slice(r, n2, &batch.values);
        let g1t = select_rows(dphi1, &i1) * &h1;
        let mut rhs = &v0 * phi2;
        let mut a = Mat::zeros(r, r);
        let mut b = Mat::identity(n2, n2);
        if need_grad {
            let v1 = Mat::from_fn(r, n2, |i, j| batch.gradients[(i * n2 + j) * 2]);
            let v2 = Mat::from_fn(r, n2, |i, j| batch.gradients[(i * n2 + j) * 2 + 1]);
            rhs += lambda * g1t.transpose() * v1 * phi2 + lambda * v2 * dphi2;
            a = lambda * g1t.transpose() * &g1t;
            b += lambda * dphi2.transpose() * dphi2 * &m2inv;
        }
        let h2_solved = solve_sylvester(&a, &b, &(rhs * &m2inv))?;
        let (h2t_new, i2_new) = interpolating_factor(&h2_solved.transpose(), phi2, config.maxvol_delta)?;
        let h2_new = h2t_new.transpose();
        // Keep Φ₁ H¹ H² Φ₂ᵀ equal to the fitted product.
        let transfer = &h2_solved * select_rows(phi2, &i2_new).transpose();
        let h1_full = &h1 * transfer;

        let res = match &prev {
            Some((p1, p2)) => rel_change(h1.as_slice(), p1.as_slice()).max(rel_change(h2_new.as_slice(), p2.as_slice())),
            None => f64::INFINITY,
        };
        prev = Some((h1.clone(), h2_new.clone()));
        h2 = h2_new;
        i2 = i2_new;
        residuals.push(res);
        if config.verbose {
            eprintln!("sweep={it} core=2 rank={r} res={res:.3e} evals={}", cache.calls());
        }
        if res <= config.tol || it == config.it_max {
            let core1 = to_row_major(&h1_full);
            let core2 = to_row_major(&h2);
            let ftt = Ftt::new(vec![b1.clone(), b2.clone()], vec![1, r, 1], vec![core1, core2])?;
            return Ok(Cross2dReport {
                ftt,
                iterations: it,
                residuals,
                converged: res <= config.tol,
                oracle_calls: cache.calls(),
                i1,
                i2,
            });
        }
    }
}

/// QR + maxvol of a column factor `h` (nodes × r) on grid rows `Φ Q`.
/// Returns the interpolating factor `Q (ΦQ)[I]⁻¹` and the indices `I`.
fn interpolating_factor(h: &Mat, phi: &Mat, delta: f64) -> Result<(Mat, Vec<usize>)> {
    let q = thin_q(h);
    let g = phi * &q;
    let mv = maxvol(&g, delta)?;
    let sub = select_rows(&g, &mv.indices);
    Ok((q * invert(&sub)?, mv.indices))
}

/// Convenience: evaluate a train on many points.
pub fn eval_many(ftt: &Ftt, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points.iter().map(|x| ftt.eval(x)).collect()
}
