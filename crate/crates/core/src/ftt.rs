//! Functional tensor trains.
//!
//! `V(x) = G¹(x₁) G²(x₂) ⋯ Gᵈ(x_d)` where each slice
//! `Gᵏ(x) = Σ_i φ_i(x) Hᵏ[:, i, :]` combines the coefficient core `Hᵏ`
//! (shape `r_{k-1} × n_k × r_k`) with the basis of variable `k`.
//! Cores are stored contiguously in `(left rank, node, right rank)` order,
//! so the storage of a core is simultaneously its row-major left unfolding
//! `(r_{k-1} n_k) × r_k` and its right unfolding `r_{k-1} × (n_k r_k)`.

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::matops::{truncated_svd, Mat};

/// Guard on tensor sizes materialized by [`Ftt::to_dense`] and [`Ftt::from_dense`].
pub const DENSE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct Ftt {
    bases: Vec<Basis>,
    ranks: Vec<usize>,
    cores: Vec<Vec<f64>>,
}

impl Ftt {
    pub fn new(bases: Vec<Basis>, ranks: Vec<usize>, cores: Vec<Vec<f64>>) -> Result<Self> {
        let d = bases.len();
        if d == 0 {
            return Err(Error::InvalidArgument("ftt: dimension must be >= 1".into()));
        }
        if ranks.len() != d + 1 || cores.len() != d {
            return Err(Error::InvalidArgument(format!(
                "ftt: {d} bases need {} ranks and {d} cores, got {} and {}",
                d + 1,
                ranks.len(),
                cores.len()
            )));
        }
        if ranks[0] != 1 || ranks[d] != 1 {
            return Err(Error::InvalidArgument("ftt: boundary ranks must be 1".into()));
        }
        for k in 0..d {
            let expected = ranks[k] * bases[k].len() * ranks[k + 1];
            if ranks[k] == 0 || cores[k].len() != expected {
                return Err(Error::DimensionMismatch { expected, got: cores[k].len() });
            }
        }
        Ok(Ftt { bases, ranks, cores })
    }

    /// Rank-1 train of the constant `c`.
    pub fn constant(bases: Vec<Basis>, c: f64) -> Result<Self> {
        let mut cores = Vec::with_capacity(bases.len());
        for (k, b) in bases.iter().enumerate() {
            // Coefficients reproducing the constant 1 in this basis.
            let ones = vec![1.0; b.len()];
            let mut coef = b.solve_values(&ones)?;
            if k == 0 {
                coef.iter_mut().for_each(|v| *v *= c);
            }
            cores.push(coef);
        }
        let ranks = vec![1; bases.len() + 1];
        Ftt::new(bases, ranks, cores)
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(1)
    }

    pub fn cores(&self) -> &[Vec<f64>] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &[f64] {
        &self.cores[k]
    }

    /// Number of stored coefficients, `Σ r_{k-1} n_k r_k`.
    pub fn dofs(&self) -> usize {
        self.cores.iter().map(Vec::len).sum()
    }

    /// Replaces core `k` and the adjacent rank; the caller keeps the chain consistent.
    pub(crate) fn set_core(&mut self, k: usize, left: usize, right: usize, data: Vec<f64>) {
        debug_assert_eq!(data.len(), left * self.bases[k].len() * right);
        self.ranks[k] = left;
        self.ranks[k + 1] = right;
        self.cores[k] = data;
    }

    pub(crate) fn check_chain(&self) -> Result<()> {
        for k in 0..self.dim() {
            let expected = self.ranks[k] * self.bases[k].len() * self.ranks[k + 1];
            if self.cores[k].len() != expected {
                return Err(Error::DimensionMismatch { expected, got: self.cores[k].len() });
            }
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("ftt: non-finite point {x:?}")));
        }
        Ok(())
    }

    /// Slice `Σ_i w_i H[:, i, :]` as a row-major `r_{k-1} × r_k` buffer.
    fn contract_slice(&self, k: usize, w: &[f64], out: &mut Vec<f64>) {
        let (rl, n, rr) = (self.ranks[k], self.bases[k].len(), self.ranks[k + 1]);
        out.clear();
        out.resize(rl * rr, 0.0);
        let core = &self.cores[k];
        for a in 0..rl {
            let o = &mut out[a * rr..(a + 1) * rr];
            for (i, &wi) in w.iter().enumerate().take(n) {
                if wi == 0.0 {
                    continue;
                }
                let h = &core[(a * n + i) * rr..(a * n + i + 1) * rr];
                for (ob, hb) in o.iter_mut().zip(h) {
                    *ob += wi * hb;
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let mut v = vec![1.0];
        let mut phi = vec![0.0; 0];
        let mut g = Vec::new();
        for k in 0..self.dim() {
            let b = &self.bases[k];
            phi.resize(b.len(), 0.0);
            b.eval_into(x[k], &mut phi);
            self.contract_slice(k, &phi, &mut g);
            v = row_times(&v, &g, self.ranks[k + 1]);
        }
        Ok(v[0])
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_grad(x)?.1)
    }

    /// Value and gradient in one prefix/suffix sweep.
    pub fn eval_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_point(x)?;
        let d = self.dim();
        let mut slices = Vec::with_capacity(d);
        let mut dslices = Vec::with_capacity(d);
        let mut phi = Vec::new();
        for k in 0..d {
            let b = &self.bases[k];
            phi.resize(b.len(), 0.0);
            let mut g = Vec::new();
            b.eval_into(x[k], &mut phi);
            self.contract_slice(k, &phi, &mut g);
            slices.push(g);
            let mut dg = Vec::new();
            b.eval_deriv_into(x[k], &mut phi);
            self.contract_slice(k, &phi, &mut dg);
            dslices.push(dg);
        }
        // prefix[k] = G¹⋯Gᵏ (row of length r_k), suffix[k] = Gᵏ⁺¹⋯Gᵈ (column of length r_k).
        let mut prefix = vec![vec![1.0]];
        for k in 0..d {
            let next = row_times(&prefix[k], &slices[k], self.ranks[k + 1]);
            prefix.push(next);
        }
        let mut suffix = vec![Vec::new(); d + 1];
        suffix[d] = vec![1.0];
        for k in (0..d).rev() {
            suffix[k] = times_col(&slices[k], &suffix[k + 1], self.ranks[k]);
        }
        let value = prefix[d][0];
        let grad = (0..d)
            .map(|k| {
                let t = times_col(&dslices[k], &suffix[k + 1], self.ranks[k]);
                prefix[k].iter().zip(&t).map(|(a, b)| a * b).sum()
            })
            .collect();
        Ok((value, grad))
    }

    /// Integral over the box `Π [a_k, b_k]` with each basis' Gauss-Legendre rule.
    pub fn integrate(&self) -> f64 {
        let mut v = vec![1.0];
        let mut g = Vec::new();
        for k in 0..self.dim() {
            let b = &self.bases[k];
            let vals = b.values();
            let w: Vec<f64> = (0..b.len())
                .map(|i| (0..b.len()).map(|q| b.quad_weights()[q] * vals[(q, i)]).sum())
                .collect();
            self.contract_slice(k, &w, &mut g);
            v = row_times(&v, &g, self.ranks[k + 1]);
        }
        v[0]
    }

    /// Slices `Gᵏ(X_k)` at the nodes of basis `k`, stored `(left, node, right)`.
    pub fn nodal_core(&self, k: usize) -> Vec<f64> {
        self.mode_apply(k, self.bases[k].values())
    }

    /// Derivative slices `∂Gᵏ(X_k)` at the nodes, stored `(left, node, right)`.
    pub fn nodal_deriv_core(&self, k: usize) -> Vec<f64> {
        self.mode_apply(k, self.bases[k].derivs())
    }

    fn mode_apply(&self, k: usize, m: &Mat) -> Vec<f64> {
        let (rl, n, rr) = (self.ranks[k], self.bases[k].len(), self.ranks[k + 1]);
        mode_product(&self.cores[k], rl, n, rr, m)
    }

    /// Sum of two trains on the same bases (block-diagonal cores).
    pub fn add(&self, other: &Ftt) -> Result<Ftt> {
        let d = self.dim();
        if other.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: other.dim() });
        }
        for k in 0..d {
            if self.bases[k].len() != other.bases[k].len() {
                return Err(Error::DimensionMismatch {
                    expected: self.bases[k].len(),
                    got: other.bases[k].len(),
                });
            }
        }
        let mut ranks = vec![1; d + 1];
        for k in 1..d {
            ranks[k] = self.ranks[k] + other.ranks[k];
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let n = self.bases[k].len();
            let (rl, rr) = (ranks[k], ranks[k + 1]);
            let mut c = vec![0.0; rl * n * rr];
            let (al, ar) = (self.ranks[k], self.ranks[k + 1]);
            let (bl, br) = (other.ranks[k], other.ranks[k + 1]);
            let off_l = if k == 0 { 0 } else { al };
            let off_r = if k == d - 1 { 0 } else { ar };
            for i in 0..n {
                for a in 0..al {
                    for b in 0..ar {
                        c[(a * n + i) * rr + b] += self.cores[k][(a * n + i) * ar + b];
                    }
                }
                for a in 0..bl {
                    for b in 0..br {
                        c[((a + off_l) * n + i) * rr + b + off_r] +=
                            other.cores[k][(a * n + i) * br + b];
                    }
                }
            }
            cores.push(c);
        }
        Ftt::new(self.bases.clone(), ranks, cores)
    }

    pub fn scale(&mut self, c: f64) {
        self.cores[0].iter_mut().for_each(|v| *v *= c);
    }

    /// Right-to-left orthogonalization of cores `k+1..d`; core `k` absorbs
    /// the factors. Returns without change when `k = d - 1`.
    pub(crate) fn right_orthogonalize_from(&mut self, stop: usize) {
        for k in (stop + 1..self.dim()).rev() {
            let (rl, n, rr) = (self.ranks[k], self.bases[k].len(), self.ranks[k + 1]);
            // Right unfolding M (rl × n rr); QR of Mᵀ gives M = Rᵀ Qᵀ.
            let mt = Mat::from_row_slice(rl, n * rr, &self.cores[k]).transpose();
            let qr = mt.qr();
            let q = qr.q();
            let r = qr.r();
            let new_r = q.ncols();
            let qt = q.transpose();
            let mut core = vec![0.0; new_r * n * rr];
            for a in 0..new_r {
                for j in 0..n * rr {
                    core[a * n * rr + j] = qt[(a, j)];
                }
            }
            // Left neighbour: H_{k-1} ×₃ Rᵀ.
            let (pl, pn) = (self.ranks[k - 1], self.bases[k - 1].len());
            let prev = Mat::from_row_slice(pl * pn, rl, &self.cores[k - 1]);
            let updated = prev * r.transpose();
            self.cores[k - 1] = to_row_major(&updated);
            self.cores[k] = core;
            self.ranks[k] = new_r;
        }
    }

    /// TT rounding with overall relative tolerance `tol`.
    pub fn round(&self, tol: f64) -> Ftt {
        let d = self.dim();
        let mut out = self.clone();
        if d == 1 {
            return out;
        }
        out.right_orthogonalize_from(0);
        let core_tol = tol.max(0.0) / ((d - 1) as f64).sqrt();
        for k in 0..d - 1 {
            let (rl, n, rr) = (out.ranks[k], out.bases[k].len(), out.ranks[k + 1]);
            let m = Mat::from_row_slice(rl * n, rr, &out.cores[k]);
            let svd = truncated_svd(&m, core_tol);
            let r = svd.rank;
            out.cores[k] = to_row_major(&svd.u);
            let sv = Mat::from_fn(r, rr, |i, j| svd.s[i] * svd.vt[(i, j)]);
            let (nn, nr) = (out.bases[k + 1].len(), out.ranks[k + 2]);
            let next = Mat::from_row_slice(rr, nn * nr, &out.cores[k + 1]);
            out.cores[k + 1] = to_row_major(&(sv * next));
            out.ranks[k + 1] = r;
        }
        out
    }

    /// Full coefficient tensor, row-major over `(i_1, …, i_d)`.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let total = dense_size(self.bases.iter().map(Basis::len))?;
        let mut acc = vec![1.0];
        let mut rows = 1usize;
        for k in 0..self.dim() {
            let (rl, n, rr) = (self.ranks[k], self.bases[k].len(), self.ranks[k + 1]);
            let a = Mat::from_row_slice(rows, rl, &acc);
            let c = Mat::from_row_slice(rl, n * rr, &self.cores[k]);
            acc = to_row_major(&(a * c));
            rows *= n;
        }
        debug_assert_eq!(acc.len(), total);
        Ok(acc)
    }

    /// TT-SVD of a row-major coefficient tensor.
    pub fn from_dense(tensor: &[f64], bases: Vec<Basis>, tol: f64) -> Result<Ftt> {
        let d = bases.len();
        if d == 0 {
            return Err(Error::InvalidArgument("ftt: dimension must be >= 1".into()));
        }
        let total = dense_size(bases.iter().map(Basis::len))?;
        if tensor.len() != total {
            return Err(Error::DimensionMismatch { expected: total, got: tensor.len() });
        }
        let core_tol = if d > 1 { tol.max(0.0) / ((d - 1) as f64).sqrt() } else { 0.0 };
        let mut ranks = vec![1usize; d + 1];
        let mut cores = Vec::with_capacity(d);
        let mut rest = tensor.to_vec();
        let mut rest_cols = total;
        for k in 0..d - 1 {
            let n = bases[k].len();
            rest_cols /= n;
            let rows = ranks[k] * n;
            let m = Mat::from_row_slice(rows, rest_cols, &rest);
            let svd = truncated_svd(&m, core_tol);
            ranks[k + 1] = svd.rank;
            cores.push(to_row_major(&svd.u));
            let sv = Mat::from_fn(svd.rank, rest_cols, |i, j| svd.s[i] * svd.vt[(i, j)]);
            rest = to_row_major(&sv);
        }
        cores.push(rest);
        Ftt::new(bases, ranks, cores)
    }

    /// Interpolates `f` on the tensor grid of nodes and compresses with TT-SVD.
    pub fn interpolate_dense(
        bases: Vec<Basis>,
        f: impl Fn(&[f64]) -> f64,
        tol: f64,
    ) -> Result<Ftt> {
        let dims: Vec<usize> = bases.iter().map(Basis::len).collect();
        let total = dense_size(dims.iter().copied())?;
        let d = dims.len();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        for _ in 0..total {
            for k in 0..d {
                x[k] = bases[k].nodes()[idx[k]];
            }
            values.push(f(&x));
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        // Nodal values to coefficients, one mode at a time.
        let mut pre = 1;
        let mut post = total;
        for (k, b) in bases.iter().enumerate() {
            post /= dims[k];
            values = mode_product(&values, pre, dims[k], post, b.values_inv());
            pre *= dims[k];
        }
        Ftt::from_dense(&values, bases, tol)
    }
}

fn dense_size(dims: impl Iterator<Item = usize>) -> Result<usize> {
    let mut total = 1usize;
    for n in dims {
        total = total.saturating_mul(n);
        if total > DENSE_LIMIT {
            return Err(Error::TooLarge(format!(
                "dense tensor exceeds {DENSE_LIMIT} entries"
            )));
        }
    }
    Ok(total)
}

/// Row vector `v` (length `rows`) times row-major `rows × cols` matrix.
fn row_times(v: &[f64], m: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (a, &va) in v.iter().enumerate() {
        if va == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(&m[a * cols..(a + 1) * cols]) {
            *o += va * x;
        }
    }
    out
}

/// Row-major `rows × cols` matrix times column vector `v`.
fn times_col(m: &[f64], v: &[f64], rows: usize) -> Vec<f64> {
    let cols = v.len();
    (0..rows)
        .map(|a| m[a * cols..(a + 1) * cols].iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Row-major copy of a matrix.
pub(crate) fn to_row_major(m: &Mat) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Mode-2 product on a row-major `(pre, n_in, post)` tensor:
/// `out[p, i, q] = Σ_j m[i, j] t[p, j, q]`.
pub(crate) fn mode_product(t: &[f64], pre: usize, n_in: usize, post: usize, m: &Mat) -> Vec<f64> {
    let n_out = m.nrows();
    debug_assert_eq!(m.ncols(), n_in);
    let mut out = vec![0.0; pre * n_out * post];
    for p in 0..pre {
        for i in 0..n_out {
            let o = &mut out[(p * n_out + i) * post..(p * n_out + i + 1) * post];
            for j in 0..n_in {
                let w = m[(i, j)];
                if w == 0.0 {
                    continue;
                }
                let src = &t[(p * n_in + j) * post..(p * n_in + j + 1) * post];
                for (ov, sv) in o.iter_mut().zip(src) {
                    *ov += w * sv;
                }
            }
        }
    }
    out
}
