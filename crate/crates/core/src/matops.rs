//! Dense matrix kernels: maxvol, Sylvester/Lyapunov and algebraic Riccati
//! solvers, the symmetric-definite generalized eigenproblem and truncated SVD.
//!
//! The Sylvester and Riccati solvers work on complex Schur forms: a complex
//! upper-triangular factor makes both the Bartels-Stewart back substitution
//! and the reordering of the Hamiltonian's stable eigenvalues elementwise.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
type CMat = DMatrix<Complex64>;

pub const DEFAULT_MAXVOL_DELTA: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct MaxvolResult {
    /// Selected row indices, one per column of the input.
    pub indices: Vec<usize>,
    /// `M · M[I, :]⁻¹`; rows at `indices` form the identity.
    pub coeff: Mat,
    /// Number of row swaps after the LU start.
    pub swaps: usize,
}

/// Quasi-maximal-volume row selection.
///
/// Starts from partial-pivoted LU rows and swaps rows while some
/// `|C[i, j]| > 1 + delta`.
pub fn maxvol(m: &Mat, delta: f64) -> Result<MaxvolResult> {
    let (rows, r) = m.shape();
    if r == 0 {
        return Ok(MaxvolResult { indices: vec![], coeff: Mat::zeros(rows, 0), swaps: 0 });
    }
    if rows < r {
        return Err(Error::InvalidArgument(format!("maxvol: need m >= r, got {rows}x{r}")));
    }
    let mut indices = lu_pivot_rows(m)?;
    let mut coeff = interpolation_coeff(m, &indices)?;
    let bound = 1.0 + delta.max(0.0);
    let max_swaps = 100 * rows * r + 100;
    let mut swaps = 0;
    loop {
        let (mut bi, mut bj, mut best) = (0, 0, 0.0);
        for j in 0..r {
            for i in 0..rows {
                let v = coeff[(i, j)].abs();
                if v > best {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if best <= bound || swaps >= max_swaps {
            break;
        }
        // Sherman-Morrison update for replacing row indices[bj] by row bi.
        let pivot = coeff[(bi, bj)];
        let mut col = coeff.column(bj).clone_owned();
        col[indices[bj]] -= 1.0;
        let mut row = coeff.row(bi).clone_owned();
        row[bj] -= 1.0;
        coeff -= (col * row) / pivot;
        indices[bj] = bi;
        swaps += 1;
    }
    // Recompute exactly so the selected rows are the identity to rounding.
    let coeff = interpolation_coeff(m, &indices)?;
    Ok(MaxvolResult { indices, coeff, swaps })
}

fn lu_pivot_rows(m: &Mat) -> Result<Vec<usize>> {
    let (rows, r) = m.shape();
    let mut work = m.clone();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut perm: Vec<usize> = (0..rows).collect();
    for j in 0..r {
        let (mut p, mut best) = (j, -1.0);
        for i in j..rows {
            let v = work[(i, j)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= 1e-14 * scale {
            return Err(Error::RankDeficient { column: j });
        }
        work.swap_rows(j, p);
        perm.swap(j, p);
        let piv = work[(j, j)];
        for i in j + 1..rows {
            let f = work[(i, j)] / piv;
            if f != 0.0 {
                for k in j..r {
                    let v = work[(j, k)];
                    work[(i, k)] -= f * v;
                }
            }
        }
    }
    perm.truncate(r);
    Ok(perm)
}

fn select_rows(m: &Mat, idx: &[usize]) -> Mat {
    Mat::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

fn interpolation_coeff(m: &Mat, idx: &[usize]) -> Result<Mat> {
    let sub = select_rows(m, idx);
    let lu = sub.transpose().lu();
    let ct = lu
        .solve(&m.transpose())
        .ok_or(Error::RankDeficient { column: 0 })?;
    let mut c = ct.transpose();
    for (j, &i) in idx.iter().enumerate() {
        for k in 0..c.ncols() {
            c[(i, k)] = if k == j { 1.0 } else { 0.0 };
        }
    }
    Ok(c)
}

/// Thin QR factor with orthonormal columns.
pub fn thin_q(m: &Mat) -> Mat {
    let k = m.nrows().min(m.ncols());
    let q = m.clone().qr().q();
    q.columns(0, k).clone_owned()
}

fn to_complex(m: &Mat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Francis double-shift QR on an upper Hessenberg `h` (row-major, `n×n`),
/// accumulating the orthogonal transformations into `v` (row-major).
///
/// On return `h` is quasi-triangular; `pair[k]` marks the leading row of each
/// 2×2 block holding a complex conjugate pair. Real 2×2 blocks are split.
fn francis_qr(h: &mut [f64], v: &mut [f64], n: usize) -> Result<Vec<bool>> {
    let at = |i: usize, j: usize| i * n + j;
    let eps = f64::EPSILON;
    let mut pair = vec![false; n];
    let mut norm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            norm += h[at(i, j)].abs();
        }
    }
    let mut hi = n as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut total = 0usize;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);
    while hi >= 0 {
        let nn = hi as usize;
        let mut l = nn;
        while l > 0 {
            s = h[at(l - 1, l - 1)].abs() + h[at(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[at(l, l - 1)].abs() <= eps * s {
                h[at(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }
        if l == nn {
            h[at(nn, nn)] += exshift;
            hi -= 1;
            iter = 0;
        } else if l + 1 == nn {
            let m = nn - 1;
            w = h[at(nn, m)] * h[at(m, nn)];
            p = (h[at(m, m)] - h[at(nn, nn)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[at(nn, nn)] += exshift;
            h[at(m, m)] += exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                x = h[at(nn, m)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in m..n {
                    z = h[at(m, j)];
                    h[at(m, j)] = q * z + p * h[at(nn, j)];
                    h[at(nn, j)] = q * h[at(nn, j)] - p * z;
                }
                for i in 0..=nn {
                    z = h[at(i, m)];
                    h[at(i, m)] = q * z + p * h[at(i, nn)];
                    h[at(i, nn)] = q * h[at(i, nn)] - p * z;
                }
                for i in 0..n {
                    z = v[at(i, m)];
                    v[at(i, m)] = q * z + p * v[at(i, nn)];
                    v[at(i, nn)] = q * v[at(i, nn)] - p * z;
                }
                h[at(nn, m)] = 0.0;
            } else {
                pair[m] = true;
            }
            hi -= 2;
            iter = 0;
        } else {
            total += 1;
            if total > 100 * n {
                return Err(Error::InvalidArgument("schur: QR iteration did not converge".into()));
            }
            x = h[at(nn, nn)];
            y = h[at(nn - 1, nn - 1)];
            w = h[at(nn, nn - 1)] * h[at(nn - 1, nn)];
            if iter % 20 == 10 {
                // Exceptional shifts to break cycles.
                exshift += x;
                for i in 0..=nn {
                    h[at(i, i)] -= x;
                }
                s = h[at(nn, nn - 1)].abs() + h[at(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter > 0 && iter % 20 == 0 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nn {
                        h[at(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            let mut m = nn - 2;
            loop {
                z = h[at(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[at(m + 1, m)] + h[at(m, m + 1)];
                q = h[at(m + 1, m + 1)] - z - r - s;
                r = h[at(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h[at(m, m - 1)].abs() * (q.abs() + r.abs());
                let rhs = eps * (p.abs() * (h[at(m - 1, m - 1)].abs() + z.abs() + h[at(m + 1, m + 1)].abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                h[at(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[at(i, i - 3)] = 0.0;
                }
            }
            for k in m..nn {
                let notlast = k + 1 != nn;
                if k != m {
                    p = h[at(k, k - 1)];
                    q = h[at(k + 1, k - 1)];
                    r = if notlast { h[at(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[at(k, k - 1)] = -s * x;
                } else if l != m {
                    h[at(k, k - 1)] = -h[at(k, k - 1)];
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;
                let (r0, rest) = h[k * n..].split_at_mut(n);
                let (r1, r2) = rest.split_at_mut(n);
                if notlast {
                    for ((a, b), c) in r0[k..].iter_mut().zip(&mut r1[k..]).zip(&mut r2[k..n]) {
                        let t = *a + q * *b + r * *c;
                        *a -= t * x;
                        *b -= t * y;
                        *c -= t * z;
                    }
                } else {
                    for (a, b) in r0[k..].iter_mut().zip(&mut r1[k..]) {
                        let t = *a + q * *b;
                        *a -= t * x;
                        *b -= t * y;
                    }
                }
                let rows = nn.min(k + 3) + 1;
                for (mat, rows) in [(&mut *h, rows), (&mut *v, n)] {
                    for row in mat.chunks_exact_mut(n).take(rows) {
                        if notlast {
                            let c = &mut row[k..k + 3];
                            let t = x * c[0] + y * c[1] + z * c[2];
                            c[0] -= t;
                            c[1] -= t * q;
                            c[2] -= t * r;
                        } else {
                            let c = &mut row[k..k + 2];
                            let t = x * c[0] + y * c[1];
                            c[0] -= t;
                            c[1] -= t * q;
                        }
                    }
                }
            }
        }
    }
    for i in 1..n {
        if !pair[i - 1] {
            h[at(i, i - 1)] = 0.0;
        }
        for j in 0..i.saturating_sub(1) {
            h[at(i, j)] = 0.0;
        }
    }
    Ok(pair)
}

/// Complex Schur factorization `M = Z T Zᴴ` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    pub z: CMat,
    pub t: CMat,
}

impl ComplexSchur {
    pub fn new(m: &Mat) -> Result<Self> {
        let n = m.nrows();
        if n == 0 {
            return Ok(ComplexSchur { z: CMat::zeros(0, 0), t: CMat::zeros(0, 0) });
        }
        let (q, hm) = m.clone().hessenberg().unpack();
        let mut h = vec![0.0; n * n];
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i <= j + 1 {
                    h[i * n + j] = hm[(i, j)];
                }
                v[i * n + j] = q[(i, j)];
            }
        }
        let pair = francis_qr(&mut h, &mut v, n)?;
        let mut s = ComplexSchur {
            t: CMat::from_fn(n, n, |i, j| Complex64::new(h[i * n + j], 0.0)),
            z: CMat::from_fn(n, n, |i, j| Complex64::new(v[i * n + j], 0.0)),
        };
        for k in (0..n).filter(|&k| pair[k]) {
            s.split_pair(k);
        }
        Ok(s)
    }

    /// Triangularizes the 2×2 block at `k` holding a complex conjugate pair.
    fn split_pair(&mut self, k: usize) {
        let a = self.t[(k, k)];
        let b = self.t[(k, k + 1)];
        let c = self.t[(k + 1, k)];
        let d = self.t[(k + 1, k + 1)];
        let half = (a - d) * 0.5;
        let mu = (a + d) * 0.5 + (half * half + b * c).sqrt();
        // Eigenvector (μ - d, c) becomes the first Schur vector.
        let v0 = mu - d;
        let v1 = c;
        let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
        if norm == 0.0 {
            return;
        }
        self.rotate(k, v0 / norm, v1 / norm);
    }

    /// Similarity by `Q = [[q1, -conj(q2)], [q2, conj(q1)]]` on indices `k, k+1`.
    fn rotate(&mut self, k: usize, q1: Complex64, q2: Complex64) {
        let n = self.t.nrows();
        for j in k..n {
            let x = self.t[(k, j)];
            let y = self.t[(k + 1, j)];
            self.t[(k, j)] = q1.conj() * x + q2.conj() * y;
            self.t[(k + 1, j)] = -q2 * x + q1 * y;
        }
        for i in 0..(k + 2).min(n) {
            let x = self.t[(i, k)];
            let y = self.t[(i, k + 1)];
            self.t[(i, k)] = x * q1 + y * q2;
            self.t[(i, k + 1)] = -x * q2.conj() + y * q1.conj();
        }
        for i in 0..self.z.nrows() {
            let x = self.z[(i, k)];
            let y = self.z[(i, k + 1)];
            self.z[(i, k)] = x * q1 + y * q2;
            self.z[(i, k + 1)] = -x * q2.conj() + y * q1.conj();
        }
        self.t[(k + 1, k)] = Complex64::new(0.0, 0.0);
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Swaps the adjacent diagonal entries `k` and `k+1` by a Givens rotation.
    fn swap(&mut self, k: usize) {
        let a = self.t[(k, k)];
        let b = self.t[(k + 1, k + 1)];
        let v0 = self.t[(k, k + 1)];
        let v1 = b - a;
        let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
        if norm == 0.0 {
            return;
        }
        self.rotate(k, v0 / norm, v1 / norm);
    }

    /// Moves every eigenvalue with `select(λ)` to the leading block; returns the block size.
    pub fn reorder(&mut self, select: impl Fn(Complex64) -> bool) -> usize {
        let n = self.t.nrows();
        let mut next = 0;
        for k in 0..n {
            if select(self.t[(k, k)]) {
                let mut pos = k;
                while pos > next {
                    self.swap(pos - 1);
                    pos -= 1;
                }
                next += 1;
            }
        }
        next
    }
}

/// Reusable Bartels-Stewart solver for `A X + X B = C` with fixed `A`, `B`.
#[derive(Debug, Clone)]
pub struct SylvesterSolver {
    a: Mat,
    b: Mat,
    sa: ComplexSchur,
    sb: ComplexSchur,
    za_h: CMat,
    zb_h: CMat,
}

impl SylvesterSolver {
    pub fn new(a: &Mat, b: &Mat) -> Result<Self> {
        if !a.is_square() || !b.is_square() {
            return Err(Error::InvalidArgument("sylvester: A and B must be square".into()));
        }
        let sa = ComplexSchur::new(a)?;
        let sb = ComplexSchur::new(b)?;
        let scale = a.norm() + b.norm();
        let mut gap = f64::INFINITY;
        for i in 0..a.nrows() {
            for j in 0..b.nrows() {
                gap = gap.min((sa.t[(i, i)] + sb.t[(j, j)]).norm());
            }
        }
        if gap < 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::SpectralOverlap { gap });
        }
        let za_h = sa.z.adjoint();
        let zb_h = sb.z.adjoint();
        Ok(SylvesterSolver { a: a.clone(), b: b.clone(), sa, sb, za_h, zb_h })
    }

    fn solve_once(&self, c: &Mat) -> Mat {
        let p = self.a.nrows();
        let q = self.b.nrows();
        let f = &self.za_h * to_complex(c) * &self.sb.z;
        let ta = &self.sa.t;
        let tb = &self.sb.t;
        let mut y = CMat::zeros(p, q);
        let mut rhs = vec![Complex64::new(0.0, 0.0); p];
        for j in 0..q {
            for i in 0..p {
                let mut s = f[(i, j)];
                for k in 0..j {
                    s -= y[(i, k)] * tb[(k, j)];
                }
                rhs[i] = s;
            }
            let shift = tb[(j, j)];
            for i in (0..p).rev() {
                let mut s = rhs[i];
                for k in i + 1..p {
                    s -= ta[(i, k)] * y[(k, j)];
                }
                y[(i, j)] = s / (ta[(i, i)] + shift);
            }
        }
        let x = &self.sa.z * y * &self.zb_h;
        x.map(|v| v.re)
    }

    pub fn residual(&self, x: &Mat, c: &Mat) -> f64 {
        (&self.a * x + x * &self.b - c).norm()
    }

    /// Solves with up to two steps of iterative refinement to reach the
    /// `1e-10 · ‖C‖_F` residual bound.
    pub fn solve(&self, c: &Mat) -> Result<Mat> {
        if c.nrows() != self.a.nrows() || c.ncols() != self.b.nrows() {
            return Err(Error::DimensionMismatch { expected: self.a.nrows(), got: c.nrows() });
        }
        let bound = 1e-10 * c.norm();
        let mut x = self.solve_once(c);
        for _ in 0..2 {
            let r = &self.a * &x + &x * &self.b - c;
            if r.norm() <= bound {
                break;
            }
            x -= self.solve_once(&r);
        }
        Ok(x)
    }
}

/// Solves `A X + X B = C`.
pub fn solve_sylvester(a: &Mat, b: &Mat, c: &Mat) -> Result<Mat> {
    SylvesterSolver::new(a, b)?.solve(c)
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub pi: Mat,
    pub residual: f64,
}

/// Riccati residual `AᵀΠ + ΠA − ΠWΠ + Q` with `W = B R⁻¹ Bᵀ`.
pub fn riccati_residual(a: &Mat, w: &Mat, q: &Mat, pi: &Mat) -> Mat {
    a.transpose() * pi + pi * a - pi * w * pi + q
}

/// Solves the continuous-time algebraic Riccati equation
/// `AᵀΠ + ΠA − ΠBR⁻¹BᵀΠ + Q = 0` for the stabilizing solution.
///
/// Ordered complex Schur form of the Hamiltonian, followed by one
/// Newton-Kleinman correction when the residual is not yet at rounding level.
/// The residual bound is `1e-8 · max(‖Q‖_F, ‖AᵀΠ + ΠA‖_F)`.
pub fn solve_are(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<RiccatiSolution> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::InvalidArgument("solve_are: inconsistent shapes".into()));
    }
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?
        .inverse();
    let w = b * r_inv * b.transpose();
    solve_are_w(a, &w, q)
}

/// Riccati solve with a precomputed `W = B R⁻¹ Bᵀ`.
pub fn solve_are_w(a: &Mat, w: &Mat, q: &Mat) -> Result<RiccatiSolution> {
    let n = a.nrows();
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-w));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let hnorm = h.norm().max(f64::MIN_POSITIVE);
    let mut schur = ComplexSchur::new(&h)?;
    let axis_tol = 1e-10 * hnorm;
    let on_axis = schur.eigenvalues().iter().filter(|l| l.re.abs() <= axis_tol).count();
    let stable = schur.reorder(|l| l.re < -axis_tol);
    if stable != n || on_axis > 0 {
        return Err(Error::NotStabilizable { stable, needed: n });
    }
    let u11 = schur.z.view((0, 0), (n, n)).clone_owned();
    let u21 = schur.z.view((n, 0), (n, n)).clone_owned();
    // Π = U21 U11⁻¹  ⇔  U11ᵀ Πᵀ = U21ᵀ
    let pit = u11
        .transpose()
        .lu()
        .solve(&u21.transpose())
        .ok_or(Error::NotStabilizable { stable, needed: n })?;
    let pi_c = pit.transpose();
    let mut pi = pi_c.map(|v| v.re);
    pi = (&pi + pi.transpose()) * 0.5;

    let mut res = riccati_residual(a, w, q, &pi);
    let lin_scale = (a.transpose() * &pi + &pi * a).norm();
    let scale = q.norm().max(lin_scale);
    if res.norm() > 1e-12 * scale {
        let acl = a - w * &pi;
        let delta = solve_sylvester(&acl.transpose(), &acl, &(-&res))?;
        pi += delta;
        pi = (&pi + pi.transpose()) * 0.5;
        res = riccati_residual(a, w, q, &pi);
    }
    let residual = res.norm();
    let bound = 1e-8 * scale;
    if residual > bound {
        return Err(Error::RiccatiResidual { residual, bound });
    }
    Ok(RiccatiSolution { pi, residual })
}

#[derive(Debug, Clone)]
pub struct GenEig {
    /// Columns are `A`-orthonormal eigenvectors.
    pub vectors: Mat,
    pub values: DVector<f64>,
}

/// Symmetric-definite generalized eigenproblem `M V = A V L`, `Vᵀ A V = I`.
///
/// If `A` fails the Cholesky test it is retried with the ridge
/// `1e-12 · trace(A) / n`.
pub fn sym_gen_eig(m: &Mat, a: &Mat) -> Result<GenEig> {
    let n = a.nrows();
    if !a.is_square() || m.shape() != a.shape() {
        return Err(Error::InvalidArgument("sym_gen_eig: shapes".into()));
    }
    if n == 0 {
        return Ok(GenEig { vectors: Mat::zeros(0, 0), values: DVector::zeros(0) });
    }
    let chol = match Cholesky::new(a.clone()) {
        Some(c) => c,
        None => {
            let ridge = 1e-12 * a.trace().abs() / n as f64;
            let mut ar = a.clone();
            for i in 0..n {
                ar[(i, i)] += ridge;
            }
            Cholesky::new(ar).ok_or(Error::NotPositiveDefinite)?
        }
    };
    let l = chol.l();
    // C = L⁻¹ M L⁻ᵀ
    let linv_m = l
        .solve_lower_triangular(m)
        .ok_or(Error::NotPositiveDefinite)?;
    let c = l
        .solve_lower_triangular(&linv_m.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let vectors = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(GenEig { vectors, values: eig.eigenvalues })
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub vt: Mat,
    pub rank: usize,
}

/// SVD truncated to the smallest rank whose discarded tail satisfies
/// `√(Σ_{i>r} σᵢ²) ≤ tol · ‖M‖_F`.
pub fn truncated_svd(m: &Mat, tol: f64) -> TruncatedSvd {
    let (u, sigma, vt) = jacobi_svd(m);
    let k = sigma.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let s: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    let total: f64 = s.iter().map(|v| v * v).sum();
    let budget = (tol.max(0.0) * total.sqrt()).powi(2);
    let mut rank = k;
    let mut tail = 0.0;
    while rank > 0 {
        let next = tail + s[rank - 1] * s[rank - 1];
        if next <= budget && (tol > 0.0 || s[rank - 1] == 0.0) {
            tail = next;
            rank -= 1;
        } else {
            break;
        }
    }
    let rank = rank.max(usize::from(k > 0));
    let u = Mat::from_fn(m.nrows(), rank, |i, j| u[(i, order[j])]);
    let vt = Mat::from_fn(rank, m.ncols(), |i, j| vt[(order[i], j)]);
    TruncatedSvd { u, s: s[..rank].to_vec(), vt, rank }
}

/// Thin SVD by one-sided Jacobi rotations, unordered. Returns `(U, σ, Vᵀ)`
/// with `min(m, n)` components.
fn jacobi_svd(m: &Mat) -> (Mat, Vec<f64>, Mat) {
    if m.nrows() < m.ncols() {
        let (u, s, vt) = jacobi_svd(&m.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let (rows, cols) = m.shape();
    let mut u = m.clone();
    let mut v = Mat::identity(cols, cols);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (a, b) = (u[(i, p)], u[(i, q)]);
                    alpha += a * a;
                    beta += b * b;
                    gamma += a * b;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (a, b) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * a - s * b;
                    u[(i, q)] = s * a + c * b;
                }
                for i in 0..cols {
                    let (a, b) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * a - s * b;
                    v[(i, q)] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = vec![0.0; cols];
    for j in 0..cols {
        let norm = u.column(j).norm();
        sigma[j] = norm;
        if norm > 0.0 {
            u.column_mut(j).unscale_mut(norm);
        }
    }
    // Columns with zero norm are replaced by an orthonormal completion.
    let zero: Vec<usize> = (0..cols).filter(|&j| sigma[j] == 0.0).collect();
    if !zero.is_empty() {
        for &j in &zero {
            let mut best = DVector::zeros(rows);
            for e in 0..rows {
                let mut cand = DVector::zeros(rows);
                cand[e] = 1.0;
                for l in 0..cols {
                    if l != j && (sigma[l] > 0.0 || l < j) {
                        let proj = u.column(l).dot(&cand);
                        cand.axpy(-proj, &u.column(l), 1.0);
                    }
                }
                if cand.norm() > best.norm() {
                    best = cand;
                }
                if best.norm() > 0.5 {
                    break;
                }
            }
            let n = best.norm();
            u.set_column(j, &(best / n));
        }
    }
    (u, sigma, v.transpose())
}
