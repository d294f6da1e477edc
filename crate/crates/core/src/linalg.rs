//! Iterative and direct solvers shared by the spectral, flow and learning
//! modules: conjugate gradients, CGLS, restarted GMRES, a thick-restart
//! Lanczos eigensolver, and thin wrappers over faer's dense and sparse
//! factorizations.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

/// A square linear map `x -> A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }

    /// Diagonal entries when cheaply available.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }

    /// The operator as an explicit matrix when one is at hand.
    fn to_matrix(&self) -> Option<CscMatrix> {
        None
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        (**self).diagonal()
    }

    fn to_matrix(&self) -> Option<CscMatrix> {
        (**self).to_matrix()
    }
}

impl LinearOperator for CscMatrix {
    fn dim(&self) -> usize {
        assert_eq!(self.nrows(), self.ncols(), "operator must be square");
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.diag())
    }

    fn to_matrix(&self) -> Option<CscMatrix> {
        Some(self.clone())
    }
}

/// Operator given by a closure.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// `factor * A`.
pub struct Scaled<O> {
    pub factor: f64,
    pub inner: O,
}

impl<O: LinearOperator> LinearOperator for Scaled<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply(x, y);
        y.iter_mut().for_each(|v| *v *= self.factor);
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        self.inner
            .diagonal()
            .map(|d| d.into_iter().map(|v| v * self.factor).collect())
    }

    fn to_matrix(&self) -> Option<CscMatrix> {
        self.inner.to_matrix().map(|mut m| {
            m.scale(self.factor);
            m
        })
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Relative residual at exit.
    pub residual: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Conjugate gradients for a symmetric positive (semi)definite operator.
/// Starting from zero on a consistent singular system the iterates stay in
/// the range of the operator, so the limit is the minimum-norm solution.
pub fn conjugate_gradient(
    op: &dyn LinearOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveInfo)> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveInfo {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok((
                x,
                SolveInfo {
                    iterations: it,
                    residual: rr.sqrt() / bnorm,
                },
            ));
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Singular(format!(
                "conjugate gradients met non-positive curvature {pap:.3e}"
            )));
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut()
            .zip(&r)
            .for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    if rr.sqrt() <= tol * bnorm {
        return Ok((
            x,
            SolveInfo {
                iterations: max_iter,
                residual: rr.sqrt() / bnorm,
            },
        ));
    }
    Err(Error::NoConvergence {
        method: "conjugate gradients",
        iterations: max_iter,
        residual: rr.sqrt() / bnorm,
    })
}

/// CGLS for `min ‖A x - b‖² + damp ‖x‖²`. `apply` computes `A x` (length
/// `nrows`), `apply_t` computes `Aᵀ y` (length `ncols`). Stops when
/// `‖Aᵀ r − damp x‖ ≤ tol · ‖A‖ · ‖r‖` (with `‖A‖` estimated from the
/// iterates), or when the residual itself vanishes. With `damp = 0` the
/// iterates stay in `range(Aᵀ)`, giving the minimum-norm least-squares
/// solution.
#[allow(clippy::too_many_arguments)]
pub fn cgls(
    nrows: usize,
    ncols: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    apply_t: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    damp: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveInfo)> {
    assert_eq!(b.len(), nrows);
    let mut x = vec![0.0; ncols];
    let mut r = b.to_vec();
    let mut s = vec![0.0; ncols];
    apply_t(&r, &mut s);
    let bnorm = norm(b);
    let mut gamma = dot(&s, &s);
    if gamma == 0.0 || bnorm == 0.0 {
        return Ok((
            x,
            SolveInfo {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let mut p = s.clone();
    let mut q = vec![0.0; nrows];
    let mut anorm = (damp.max(0.0)).sqrt();
    let mut measure = f64::INFINITY;
    for it in 0..max_iter {
        apply(&p, &mut q);
        let pp = dot(&p, &p);
        let qq = dot(&q, &q);
        anorm = anorm.max((qq / pp).sqrt());
        let delta = qq + damp * pp;
        if delta <= 0.0 {
            break;
        }
        let alpha = gamma / delta;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        apply_t(&r, &mut s);
        if damp != 0.0 {
            axpy(-damp, &x, &mut s);
        }
        let gamma_new = dot(&s, &s);
        let rnorm = norm(&r);
        measure = gamma_new.sqrt() / (anorm * rnorm.max(1e-300));
        if gamma_new.sqrt() <= tol * anorm * rnorm || rnorm <= tol * bnorm {
            return Ok((
                x,
                SolveInfo {
                    iterations: it + 1,
                    residual: measure.min(rnorm / bnorm),
                },
            ));
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p.iter_mut()
            .zip(&s)
            .for_each(|(pi, si)| *pi = si + beta * *pi);
    }
    Err(Error::NoConvergence {
        method: "CGLS",
        iterations: max_iter,
        residual: measure,
    })
}

/// Restarted GMRES with an optional right preconditioner, an operator that
/// approximates `A⁻¹`.
pub fn gmres(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: Option<&dyn LinearOperator>,
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveInfo)> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveInfo {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let m = restart.max(1).min(n.max(1));
    let precond = |v: &[f64]| -> Vec<f64> {
        match precond {
            Some(p) => p.apply_vec(v),
            None => v.to_vec(),
        }
    };
    let mut total = 0usize;
    let mut tmp = vec![0.0; n];
    let mut resid = bnorm;
    while total < max_iter {
        op.apply(&x, &mut tmp);
        let r: Vec<f64> = b.iter().zip(&tmp).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        resid = beta;
        if beta <= tol * bnorm {
            return Ok((
                x,
                SolveInfo {
                    iterations: total,
                    residual: beta / bnorm,
                },
            ));
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let z = precond(&basis[k]);
            let mut w = vec![0.0; n];
            op.apply(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                h[i][k] = hik;
                axpy(-hik, v, &mut w);
            }
            // second Gram-Schmidt pass
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                h[i][k] += c;
                axpy(-c, v, &mut w);
            }
            let hk1 = norm(&w);
            h[k + 1][k] = hk1;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            resid = g[k + 1].abs();
            if resid <= tol * bnorm || hk1 == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut update);
        }
        let update = precond(&update);
        axpy(1.0, &update, &mut x);
    }
    op.apply(&x, &mut tmp);
    let true_res = norm(
        &b.iter()
            .zip(&tmp)
            .map(|(bi, ai)| bi - ai)
            .collect::<Vec<_>>(),
    );
    if true_res <= tol * bnorm {
        return Ok((
            x,
            SolveInfo {
                iterations: total,
                residual: true_res / bnorm,
            },
        ));
    }
    Err(Error::NoConvergence {
        method: "GMRES",
        iterations: total,
        residual: true_res.max(resid) / bnorm,
    })
}

/// Symmetric eigendecomposition of a dense matrix, eigenvalues ascending.
/// Returns `(values, vectors)` with `vectors[i]` the i-th unit eigenvector.
pub fn dense_symmetric_eigen(m: &Mat<f64>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Internal(format!("dense eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).map(|i| s[i]).collect();
    let vectors = (0..n)
        .map(|j| (0..n).map(|i| u[(i, j)]).collect())
        .collect();
    Ok((values, vectors))
}

/// Solve a dense general system with partial-pivoting LU.
pub fn dense_solve(m: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.nrows();
    let lu = m.partial_piv_lu();
    let mut rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    lu.solve_in_place(rhs.as_mut());
    let x: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(
            "dense LU produced non-finite values".into(),
        ));
    }
    Ok(x)
}

/// Inverse of `A + shift I` for a sparse symmetric positive definite `A`,
/// applied through a sparse Cholesky factorization.
pub struct ShiftInvert {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl ShiftInvert {
    pub fn new(a: &CscMatrix, shift: f64) -> Result<Self> {
        let n = a.nrows();
        let shifted = a.lincomb(1.0, &CscMatrix::identity(n), shift);
        let fa = shifted.to_faer()?;
        let llt = fa
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Singular(format!("sparse Cholesky failed: {e:?}")))?;
        Ok(Self { llt, n })
    }
}

impl LinearOperator for ShiftInvert {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| x[i]);
        self.llt.solve_in_place(rhs.as_mut());
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = rhs[(i, 0)];
        }
    }
}

/// Inverse of a diagonal, with zero entries treated as one.
pub struct Jacobi {
    inv: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv: diag
                .iter()
                .map(|&v| if v.abs() > 1e-300 { 1.0 / v } else { 1.0 })
                .collect(),
        }
    }
}

impl LinearOperator for Jacobi {
    fn dim(&self) -> usize {
        self.inv.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.inv) {
            *yi = xi * d;
        }
    }
}

/// Inverse of a sparse square matrix through a fill-reducing sparse LU.
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn new(a: &CscMatrix) -> Result<Self> {
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Singular(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { lu, n: a.nrows() })
    }
}

impl LinearOperator for SparseLu {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| x[i]);
        self.lu.solve_in_place(rhs.as_mut());
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = rhs[(i, 0)];
        }
    }
}

/// Which end of the spectrum Lanczos should converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Smallest,
    Largest,
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Krylov basis size between restarts.
    pub basis: usize,
    /// Convergence threshold on `‖A x − θ x‖`, relative to `max |θ|`, or to
    /// each pair's own `|θ|` when `relative` is set.
    pub tol: f64,
    pub relative: bool,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            basis: 64,
            tol: 1e-12,
            relative: false,
            max_restarts: 400,
            seed: 0,
        }
    }
}

/// Ritz pairs from [`lanczos`], ordered by `which`.
#[derive(Debug, Clone)]
pub struct RitzPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Residual bound `|β s_m|` for each pair in operator units.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

/// Thick-restart Lanczos with full reorthogonalization for `k` extreme
/// eigenpairs of a symmetric operator. The start vector is drawn from a
/// ChaCha8 stream seeded with `opts.seed`.
pub fn lanczos(
    op: &dyn LinearOperator,
    k: usize,
    which: Which,
    opts: &LanczosOptions,
) -> Result<RitzPairs> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let m = opts.basis.max(2 * k + 8).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v0: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= nv);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut h = vec![vec![0.0; m]; m];
    let mut kept = 0usize; // locked-in Ritz vectors at the start of the basis
    let mut matvecs = 0usize;
    let mut w = vec![0.0; n];
    let mut best_res = vec![f64::INFINITY; k];

    for _restart in 0..=opts.max_restarts {
        // Extend the basis from `kept` (the first unexpanded vector) to m.
        let mut last_beta = 0.0;
        let mut size = m;
        for j in kept..m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            for pass in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    if pass == 0 {
                        if i <= j {
                            h[i][j] = c;
                            h[j][i] = c;
                        }
                    } else if i <= j {
                        h[i][j] += c;
                        h[j][i] = h[i][j];
                    }
                    axpy(-c, v, &mut w);
                }
            }
            let beta = norm(&w);
            last_beta = beta;
            if j + 1 < m {
                if beta <= 1e-14 * (1.0 + h[j][j].abs()) {
                    // invariant subspace found
                    size = j + 1;
                    last_beta = 0.0;
                    break;
                }
                h[j + 1][j] = beta;
                h[j][j + 1] = beta;
                basis.push(w.iter().map(|x| x / beta).collect());
            }
        }

        let small = Mat::from_fn(size, size, |i, j| h[i][j]);
        let (theta, s) = dense_symmetric_eigen(&small)?;
        let order: Vec<usize> = match which {
            Which::Smallest => (0..size).collect(),
            Which::Largest => (0..size).rev().collect(),
        };
        let scale = theta.iter().fold(0.0f64, |a, t| a.max(t.abs())).max(1e-300);
        let residual_of = |idx: usize| (last_beta * s[idx][size - 1]).abs();
        let wanted = &order[..k.min(size)];
        for (slot, &idx) in wanted.iter().enumerate() {
            best_res[slot] = best_res[slot].min(residual_of(idx));
        }
        let converged = wanted.iter().all(|&idx| {
            let reference = if opts.relative {
                theta[idx].abs()
            } else {
                scale
            };
            residual_of(idx) <= opts.tol * reference
        });
        let exhausted = size < m || size == n;
        if converged || exhausted {
            let vectors: Vec<Vec<f64>> = wanted
                .iter()
                .map(|&idx| ritz_vector(&basis[..size], &s[idx]))
                .collect();
            return Ok(RitzPairs {
                values: wanted.iter().map(|&idx| theta[idx]).collect(),
                residuals: wanted.iter().map(|&idx| residual_of(idx)).collect(),
                vectors,
                matvecs,
            });
        }

        // Thick restart: keep the best `keep` Ritz vectors plus the residual
        // direction.
        let keep = (k + (m - k) / 2).min(m - 1).max(k);
        let keep_idx = &order[..keep];
        let mut new_basis: Vec<Vec<f64>> = keep_idx
            .iter()
            .map(|&idx| ritz_vector(&basis[..size], &s[idx]))
            .collect();
        let next: Vec<f64> = w.iter().map(|x| x / last_beta).collect();
        let mut new_h = vec![vec![0.0; m]; m];
        for (a, &idx) in keep_idx.iter().enumerate() {
            new_h[a][a] = theta[idx];
            let b = last_beta * s[idx][size - 1];
            new_h[keep][a] = b;
            new_h[a][keep] = b;
        }
        new_basis.push(next);
        basis = new_basis;
        h = new_h;
        kept = keep;
    }
    Err(Error::EigenNoConvergence {
        iterations: matvecs,
        residuals: best_res,
    })
}

fn ritz_vector(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let n = basis[0].len();
    let mut out = vec![0.0; n];
    for (c, v) in coeffs.iter().zip(basis) {
        axpy(*c, v, &mut out);
    }
    let nv = norm(&out);
    if nv > 0.0 {
        out.iter_mut().for_each(|x| *x /= nv);
    }
    out
}

/// Deterministic standard-normal vector.
pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}
