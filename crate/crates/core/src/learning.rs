//! Edge-flow smoothing and kernel regression of partially observed flows.
//!
//! The regressors represent a flow as `g = K α` for the binary edge
//! kernel `K` and solve for `α` in closed form. The system matrix
//!
//! ```text
//! A = diag(1_S) K + λ1 |S| I + (|S| / n1²) (Σ_t λ_t P_t) K
//! ```
//!
//! is nonsymmetric, so small problems use dense LU and large ones GMRES.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use faer::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::complex::Complex2;
use crate::error::{invalid, Error, Result};
use crate::flows::fold_assignment;
use crate::linalg::{
    conjugate_gradient, dense_solve, gmres, norm, FnOperator, Jacobi, LinearOperator, SparseLu,
};
use crate::sparse::CscMatrix;

/// Relative residual for the smoothing solve.
pub const SMOOTH_TOL: f64 = 1e-10;
/// Relative residual for the regression solve.
pub const SSL_TOL: f64 = 1e-8;
/// Largest edge count solved densely.
pub const DENSE_SSL_MAX: usize = 2000;

const GMRES_RESTART: usize = 80;
const GMRES_MAX_ITER: usize = 20_000;

/// Low-pass filter `(I + α L1s)⁻¹ ω`.
pub fn smooth_flow(omega: &[f64], l1_sym: &dyn LinearOperator, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid(format!(
            "smoothing strength must be finite and >= 0, got {alpha}"
        )));
    }
    let n = l1_sym.dim();
    if omega.len() != n {
        return Err(invalid(format!(
            "cochain has {} entries, operator has {n}",
            omega.len()
        )));
    }
    if alpha == 0.0 {
        return Ok(omega.to_vec());
    }
    let op = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
        l1_sym.apply(x, y);
        y.iter_mut()
            .zip(x)
            .for_each(|(yi, xi)| *yi = xi + alpha * *yi);
    });
    let (x, _) = conjugate_gradient(&op, omega, SMOOTH_TOL, 20 * n + 1000)?;
    Ok(x)
}

/// Symmetric 0/1 kernel on edges: 1 when two edges share a vertex or a
/// triangle, including each edge with itself.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeKernel {
    matrix: CscMatrix,
}

impl EdgeKernel {
    pub fn new(complex: &Complex2) -> Self {
        let n1 = complex.n_edges();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); complex.n_vertices()];
        for (e, &[i, j]) in complex.edges().iter().enumerate() {
            incident[i].push(e);
            incident[j].push(e);
        }
        let mut pairs: Vec<(usize, usize)> = (0..n1).map(|e| (e, e)).collect();
        for star in &incident {
            for &p in star {
                for &q in star {
                    pairs.push((p, q));
                }
            }
        }
        for t in complex.triangles() {
            let es = complex.triangle_edges(*t).expect("closed complex");
            for &p in &es {
                for &q in &es {
                    pairs.push((p, q));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let triplets = pairs.into_iter().map(|(r, c)| (r, c, 1.0)).collect();
        Self {
            matrix: CscMatrix::from_triplets(n1, n1, triplets).expect("deduplicated triplets"),
        }
    }

    /// Wrap a matrix after checking symmetry, unit diagonal and 0/1 entries.
    pub fn from_matrix(matrix: CscMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(invalid("edge kernel must be square"));
        }
        if matrix.max_asymmetry() != 0.0 {
            return Err(invalid("edge kernel must be symmetric"));
        }
        if matrix.triplets().any(|(_, _, v)| v != 0.0 && v != 1.0) {
            return Err(invalid("edge kernel entries must be 0 or 1"));
        }
        if matrix.diag().iter().any(|&d| d != 1.0) {
            return Err(invalid("edge kernel diagonal must be 1"));
        }
        Ok(Self { matrix })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, e: usize, f: usize) -> f64 {
        self.matrix.get(e, f)
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.matrix
    }
}

/// Smoothness penalty of a regressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `λ2 gᵀ L1s g`
    Laplacian { lambda2: f64 },
    /// `λ2_up gᵀ Up g + λ2_down gᵀ Down g`
    UpDown { up: f64, down: f64 },
}

/// Fitted kernel regressor; predictions are `K α`.
#[derive(Debug, Clone)]
pub struct SslModel {
    pub coefficients: Vec<f64>,
    pub lambda1: f64,
    pub penalty: Penalty,
    pub kernel: Arc<EdgeKernel>,
    pub train: Vec<bool>,
}

impl SslModel {
    pub fn predict(&self) -> Vec<f64> {
        self.kernel.matrix().mul_vec(&self.coefficients)
    }

    pub fn n_train(&self) -> usize {
        self.train.iter().filter(|&&b| b).count()
    }
}

/// Laplacian-regularized least squares on edges.
pub fn fit_laplacian_rls(
    omega: &[f64],
    train: &[bool],
    kernel: &Arc<EdgeKernel>,
    l1_sym: &dyn LinearOperator,
    lambda1: f64,
    lambda2: f64,
) -> Result<SslModel> {
    check_penalty_weight("lambda2", lambda2)?;
    let alpha = solve_rls(
        omega,
        train,
        kernel,
        &[(l1_sym, lambda2)],
        lambda1,
        DENSE_SSL_MAX,
    )?;
    Ok(SslModel {
        coefficients: alpha,
        lambda1,
        penalty: Penalty::Laplacian { lambda2 },
        kernel: Arc::clone(kernel),
        train: train.to_vec(),
    })
}

/// Least squares with separate weights on the curl-sensitive (`up`) and
/// gradient-sensitive (`down`) halves. With `up + down = L1s` and equal
/// weights it coincides with [`fit_laplacian_rls`].
#[allow(clippy::too_many_arguments)]
pub fn fit_updown_rls(
    omega: &[f64],
    train: &[bool],
    kernel: &Arc<EdgeKernel>,
    up: &dyn LinearOperator,
    down: &dyn LinearOperator,
    lambda1: f64,
    lambda2_up: f64,
    lambda2_down: f64,
) -> Result<SslModel> {
    check_penalty_weight("lambda2_up", lambda2_up)?;
    check_penalty_weight("lambda2_down", lambda2_down)?;
    let terms = [(up, lambda2_up), (down, lambda2_down)];
    let alpha = solve_rls(omega, train, kernel, &terms, lambda1, DENSE_SSL_MAX)?;
    Ok(SslModel {
        coefficients: alpha,
        lambda1,
        penalty: Penalty::UpDown {
            up: lambda2_up,
            down: lambda2_down,
        },
        kernel: Arc::clone(kernel),
        train: train.to_vec(),
    })
}

fn check_penalty_weight(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and >= 0, got {v}")))
    }
}

pub(crate) fn solve_rls(
    omega: &[f64],
    train: &[bool],
    kernel: &EdgeKernel,
    terms: &[(&dyn LinearOperator, f64)],
    lambda1: f64,
    dense_max: usize,
) -> Result<Vec<f64>> {
    let n = kernel.len();
    if omega.len() != n || train.len() != n {
        return Err(invalid(format!(
            "cochain ({}) and training mask ({}) must match the kernel ({n})",
            omega.len(),
            train.len()
        )));
    }
    if let Some((op, _)) = terms.iter().find(|(op, _)| op.dim() != n) {
        return Err(invalid(format!(
            "penalty operator has dimension {}, expected {n}",
            op.dim()
        )));
    }
    if !(lambda1 >= 0.0 && lambda1.is_finite()) {
        return Err(invalid(format!(
            "lambda1 must be finite and >= 0, got {lambda1}"
        )));
    }
    let s = train.iter().filter(|&&b| b).count();
    if s == 0 {
        return Err(invalid("training set is empty"));
    }
    let sf = s as f64;
    let ridge = lambda1 * sf;
    let smooth = sf / (n as f64 * n as f64);
    let k = kernel.matrix();
    let apply = |x: &[f64], y: &mut [f64]| {
        let kx = k.mul_vec(x);
        let mut acc = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for (op, w) in terms {
            if *w != 0.0 {
                op.apply(&kx, &mut tmp);
                acc.iter_mut().zip(&tmp).for_each(|(a, t)| *a += w * t);
            }
        }
        for i in 0..n {
            let data = if train[i] { kx[i] } else { 0.0 };
            y[i] = data + ridge * x[i] + smooth * acc[i];
        }
    };
    let rhs: Vec<f64> = omega
        .iter()
        .zip(train)
        .map(|(&v, &t)| if t { v } else { 0.0 })
        .collect();
    let op = FnOperator::new(n, apply);
    if n <= dense_max {
        let mut a = Mat::<f64>::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            op.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                a[(i, j)] = col[i];
            }
        }
        let x = dense_solve(&a, &rhs)?;
        let mut check = vec![0.0; n];
        op.apply(&x, &mut check);
        let res = check
            .iter()
            .zip(&rhs)
            .map(|(c, r)| (c - r) * (c - r))
            .sum::<f64>()
            .sqrt();
        let scale = norm(&rhs).max(f64::MIN_POSITIVE);
        if res.is_nan() || res > 1e-6 * scale {
            return Err(Error::Singular(format!(
                "regression system is singular (relative residual {:.3e})",
                res / scale
            )));
        }
        return Ok(x);
    }
    let precond: Box<dyn LinearOperator> = match assemble_system(train, k, terms, ridge, smooth) {
        Some(a) => match SparseLu::new(&a) {
            Ok(lu) => Box::new(lu),
            Err(_) => Box::new(Jacobi::new(&a.diag())),
        },
        None => {
            let mut diag: Vec<f64> = train
                .iter()
                .map(|&t| if t { 1.0 } else { 0.0 } + ridge)
                .collect();
            for (op, w) in terms {
                if let Some(d) = op.diagonal() {
                    diag.iter_mut()
                        .zip(&d)
                        .for_each(|(a, di)| *a += smooth * w * di);
                }
            }
            Box::new(Jacobi::new(&diag))
        }
    };
    let (x, _) = gmres(
        &op,
        &rhs,
        Some(precond.as_ref()),
        GMRES_RESTART,
        SSL_TOL,
        GMRES_MAX_ITER,
    )?;
    Ok(x)
}

/// Sparse system matrix, when every active penalty has a matrix.
fn assemble_system(
    train: &[bool],
    k: &CscMatrix,
    terms: &[(&dyn LinearOperator, f64)],
    ridge: f64,
    smooth: f64,
) -> Option<CscMatrix> {
    let n = k.nrows();
    let mut penalty = CscMatrix::zeros(n, n);
    for (op, w) in terms {
        if *w != 0.0 {
            penalty = penalty.lincomb(1.0, &op.to_matrix()?, smooth * w);
        }
    }
    let mut data = k.clone();
    data.scale_rows(
        &train
            .iter()
            .map(|&t| if t { 1.0 } else { 0.0 })
            .collect::<Vec<_>>(),
    );
    let a = data.lincomb(1.0, &penalty.matmul(k), 1.0);
    Some(a.lincomb(1.0, &CscMatrix::identity(n), ridge))
}

/// Coefficient of determination over the masked entries. A zero total sum
/// of squares gives 1 for an exact fit and 0 otherwise.
pub fn r2_score(predicted: &[f64], actual: &[f64], mask: &[bool]) -> Result<f64> {
    if predicted.len() != actual.len() || mask.len() != actual.len() {
        return Err(invalid("prediction, target and mask lengths differ"));
    }
    let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if idx.is_empty() {
        return Err(invalid("r2 mask selects no entries"));
    }
    let mean = idx.iter().map(|&i| actual[i]).sum::<f64>() / idx.len() as f64;
    let ss_tot: f64 = idx.iter().map(|&i| (actual[i] - mean).powi(2)).sum();
    let ss_res: f64 = idx
        .iter()
        .map(|&i| (actual[i] - predicted[i]).powi(2))
        .sum();
    Ok(if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    })
}

/// Eleven log-spaced values over `[1e-5, 1e5]`.
pub fn default_hyper_grid() -> Vec<f64> {
    (-5..=5).map(|p| 10f64.powi(p)).collect()
}

/// Random training mask with `round(ratio * n)` entries, at least one.
pub fn train_mask(n: usize, ratio: f64, seed: u64) -> Result<Vec<bool>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(invalid(format!(
            "train ratio must be in (0, 1], got {ratio}"
        )));
    }
    let m = ((ratio * n as f64).round() as usize).clamp(1, n.max(1));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut mask = vec![false; n];
    idx.iter().take(m).for_each(|&i| mask[i] = true);
    Ok(mask)
}

/// Outcome of [`cross_validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome<H> {
    pub best: H,
    pub best_score: f64,
    /// Mean validation R² per grid entry, in grid order.
    pub scores: Vec<f64>,
}

/// K-fold selection over `grid` of the hyperparameters maximizing mean
/// validation R². `fit(train_mask, h)` returns predictions on every edge.
/// Ties go to the smallest hyperparameters, and among equal entries to the
/// first. Grid points are evaluated on worker threads.
pub fn cross_validate<H, F>(
    fit: F,
    omega: &[f64],
    labeled: &[bool],
    folds: usize,
    grid: &[H],
    seed: u64,
) -> Result<CvOutcome<H>>
where
    H: Clone + PartialOrd + Sync,
    F: Fn(&[bool], &H) -> Result<Vec<f64>> + Sync,
{
    if grid.is_empty() {
        return Err(invalid("hyperparameter grid is empty"));
    }
    if labeled.len() != omega.len() {
        return Err(invalid("labeled mask and cochain lengths differ"));
    }
    let idx: Vec<usize> = (0..labeled.len()).filter(|&i| labeled[i]).collect();
    if folds < 2 || idx.len() < folds {
        return Err(invalid(format!(
            "need at least 2 folds and one labeled edge per fold ({} labeled, {folds} folds)",
            idx.len()
        )));
    }
    let assignment = fold_assignment(idx.len(), folds, seed);
    let split = |f: usize| -> (Vec<bool>, Vec<bool>) {
        let mut tr = vec![false; omega.len()];
        let mut va = vec![false; omega.len()];
        for (pos, &i) in idx.iter().enumerate() {
            if assignment[pos] == f {
                va[i] = true;
            } else {
                tr[i] = true;
            }
        }
        (tr, va)
    };
    let evaluate = |h: &H| -> Result<f64> {
        let mut total = 0.0;
        for f in 0..folds {
            let (tr, va) = split(f);
            let pred = fit(&tr, h)?;
            total += r2_score(&pred, omega, &va)?;
        }
        Ok(total / folds as f64)
    };

    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(grid.len());
    let results: Mutex<Vec<Option<Result<f64>>>> =
        Mutex::new((0..grid.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let g = next.fetch_add(1, Ordering::Relaxed);
                if g >= grid.len() {
                    break;
                }
                let r = evaluate(&grid[g]);
                results.lock().expect("no poisoned lock")[g] = Some(r);
            });
        }
    });
    let scores = results
        .into_inner()
        .expect("no poisoned lock")
        .into_iter()
        .map(|r| r.expect("every grid point evaluated"))
        .collect::<Result<Vec<f64>>>()?;

    let mut best = 0;
    for g in 1..grid.len() {
        let (s, b) = (scores[g], scores[best]);
        let better = s > b || b.is_nan() && !s.is_nan();
        let tie_smaller = s == b && grid[g] < grid[best];
        if better || tie_smaller {
            best = g;
        }
    }
    Ok(CvOutcome {
        best: grid[best].clone(),
        best_score: scores[best],
        scores,
    })
}

/// Linear-interpolated quantile of unsorted data, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Summary of test R² across repeated random splits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitReport {
    pub train_ratio: f64,
    pub r2_median: f64,
    pub r2_p5: f64,
    pub r2_p95: f64,
    pub seed: u64,
}

impl SplitReport {
    pub fn from_scores(train_ratio: f64, seed: u64, scores: &[f64]) -> Self {
        Self {
            train_ratio,
            r2_median: quantile(scores, 0.5),
            r2_p5: quantile(scores, 0.05),
            r2_p95: quantile(scores, 0.95),
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{boundary_map_1, boundary_map_2, build_vr_complex};
    use crate::datasets::{generate, strip_field, DatasetKind, Sampling, SyntheticSpec};
    use crate::flows::{cochain_from_field, VectorField};
    use crate::linalg::dense_symmetric_eigen;
    use crate::operators::tests::random_cloud;
    use crate::operators::{HelmholtzOperators, Part, DEFAULT_EXPLICIT_MAX_EDGES};
    use crate::spectral::hodge_decompose;
    use crate::weights::{Kernel, WeightSet};
    use proptest::prelude::*;
    use rand::Rng;

    fn setup(n: usize, seed: u64) -> (Complex2, HelmholtzOperators) {
        let pts = random_cloud(n, 2, seed);
        let c = build_vr_complex(&pts, 0.35, usize::MAX).unwrap();
        let b1 = boundary_map_1(&c);
        let b2 = boundary_map_2(&c).unwrap();
        let w = WeightSet::compute(&pts, &c, &b1, &b2, 0.3, Kernel::Exponential).unwrap();
        let ops =
            HelmholtzOperators::new(&b1, &b2, &w, 0.25, 1.0, DEFAULT_EXPLICIT_MAX_EDGES).unwrap();
        (c, ops)
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_strength_is_identity() {
        let (_, ops) = setup(40, 1);
        let w = random_vec(ops.n_edges(), 2);
        assert_eq!(smooth_flow(&w, &ops.view(Part::L1Sym), 0.0).unwrap(), w);
    }

    #[test]
    fn harmonic_flow_is_fixed() {
        let (_, ops) = setup(40, 3);
        let l = ops.assemble(Part::L1Sym).unwrap();
        let (vals, vecs) = dense_symmetric_eigen(&l.to_dense()).unwrap();
        for (v, phi) in vals.iter().zip(&vecs) {
            if v.abs() > 1e-10 {
                continue;
            }
            for alpha in [0.5, 50.0] {
                let out = smooth_flow(phi, &l, alpha).unwrap();
                assert!(max_diff(&out, phi) < 1e-8);
            }
        }
    }

    #[test]
    fn smoothing_is_the_spectral_filter() {
        let (_, ops) = setup(40, 5);
        let l = ops.assemble(Part::L1Sym).unwrap();
        let (vals, vecs) = dense_symmetric_eigen(&l.to_dense()).unwrap();
        for (v, phi) in vals.iter().zip(&vecs).take(10) {
            for alpha in [5.0, 50.0, 500.0] {
                let out = smooth_flow(phi, &l, alpha).unwrap();
                let expect: Vec<f64> = phi.iter().map(|p| p / (1.0 + alpha * v)).collect();
                assert!(max_diff(&out, &expect) < 1e-8);
            }
        }
    }

    #[test]
    fn smoothing_lowers_rayleigh_quotient() {
        let (_, ops) = setup(50, 7);
        let l = ops.view(Part::L1Sym);
        let rq = |x: &[f64]| crate::linalg::dot(x, &l.apply_vec(x)) / crate::linalg::dot(x, x);
        for seed in 0..10 {
            let w = random_vec(ops.n_edges(), seed);
            let s = smooth_flow(&w, &l, 1.0 + seed as f64).unwrap();
            assert!(rq(&s) <= rq(&w) + 1e-12);
        }
    }

    #[test]
    fn negative_strength_rejected() {
        let (_, ops) = setup(20, 1);
        let w = vec![0.0; ops.n_edges()];
        assert!(smooth_flow(&w, &ops.view(Part::L1Sym), -1.0).is_err());
    }

    #[test]
    fn kernel_adjacency_cases() {
        let c = Complex2::new(
            5,
            vec![[0, 1], [0, 2], [1, 2], [3, 4]],
            vec![[0, 1, 2]],
            1.0,
        )
        .unwrap();
        let k = EdgeKernel::new(&c);
        let e01 = c.edge_index(0, 1).unwrap();
        let e02 = c.edge_index(0, 2).unwrap();
        let e12 = c.edge_index(1, 2).unwrap();
        let e34 = c.edge_index(3, 4).unwrap();
        assert_eq!(k.get(e01, e34), 0.0);
        assert_eq!(k.get(e01, e12), 1.0);
        assert_eq!(k.get(e02, e12), 1.0);
        let path = Complex2::new(3, vec![[0, 1], [1, 2]], vec![], 1.0).unwrap();
        assert_eq!(EdgeKernel::new(&path).get(0, 1), 1.0);
    }

    #[test]
    fn kernel_is_valid_binary_symmetric() {
        let (c, _) = setup(60, 9);
        let k = EdgeKernel::new(&c);
        assert!(EdgeKernel::from_matrix(k.matrix().clone()).is_ok());
        for (i, &[a, b]) in c.edges().iter().enumerate() {
            for (j, &[p, q]) in c.edges().iter().enumerate() {
                let share = a == p || a == q || b == p || b == q;
                assert_eq!(k.get(i, j), if share { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn ridge_only_shrinks() {
        let n = 30;
        let k = Arc::new(EdgeKernel::from_matrix(CscMatrix::identity(n)).unwrap());
        let w = random_vec(n, 4);
        let l = CscMatrix::identity(n);
        let m = fit_laplacian_rls(&w, &vec![true; n], &k, &l, 0.1, 0.0).unwrap();
        for (a, wi) in m.coefficients.iter().zip(&w) {
            assert!((a - wi / (1.0 + 0.1 * n as f64)).abs() < 1e-14);
        }
    }

    /// Independent dense assembly of the closed-form system.
    fn dense_oracle(
        w: &[f64],
        train: &[bool],
        k: &CscMatrix,
        l: &CscMatrix,
        l1: f64,
        l2: f64,
    ) -> Vec<f64> {
        let n = w.len();
        let s = train.iter().filter(|&&t| t).count() as f64;
        let kd = k.to_dense();
        let lk = &l.to_dense() * &kd;
        let a = Mat::<f64>::from_fn(n, n, |i, j| {
            let d = if train[i] { kd[(i, j)] } else { 0.0 };
            let r = if i == j { l1 * s } else { 0.0 };
            d + r + l2 * s / (n * n) as f64 * lk[(i, j)]
        });
        let b: Vec<f64> = w
            .iter()
            .zip(train)
            .map(|(&v, &t)| if t { v } else { 0.0 })
            .collect();
        dense_solve(&a, &b).unwrap()
    }

    #[test]
    fn closed_form_matches_dense_oracle() {
        let (c, ops) = setup(60, 11);
        let k = Arc::new(EdgeKernel::new(&c));
        let l = ops.assemble(Part::L1Sym).unwrap();
        let w = random_vec(ops.n_edges(), 12);
        let train = train_mask(ops.n_edges(), 0.5, 3).unwrap();
        let m = fit_laplacian_rls(&w, &train, &k, &l, 1e-2, 10.0).unwrap();
        let expect = dense_oracle(&w, &train, k.matrix(), &l, 1e-2, 10.0);
        assert!(max_diff(&m.coefficients, &expect) < 1e-8 * (1.0 + norm(&expect)));
    }

    #[test]
    fn gmres_path_matches_dense_path() {
        let (c, ops) = setup(60, 13);
        let k = EdgeKernel::new(&c);
        let l = ops.view(Part::L1Sym);
        let w = random_vec(ops.n_edges(), 14);
        let train = train_mask(ops.n_edges(), 0.3, 5).unwrap();
        let terms: [(&dyn LinearOperator, f64); 1] = [(&l, 100.0)];
        let dense = solve_rls(&w, &train, &k, &terms, 1e-3, usize::MAX).unwrap();
        let iter = solve_rls(&w, &train, &k, &terms, 1e-3, 0).unwrap();
        assert!(max_diff(&dense, &iter) < 1e-6 * (1.0 + norm(&dense)));
    }

    #[test]
    fn vanishing_regularization_interpolates() {
        let (c, ops) = setup(50, 15);
        let k = EdgeKernel::new(&c);
        let kd = k.matrix().to_dense();
        let (vals, _) = dense_symmetric_eigen(&kd).unwrap();
        let min_abs = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        let k = if min_abs > 1e-6 {
            Arc::new(k)
        } else {
            Arc::new(EdgeKernel::from_matrix(CscMatrix::identity(ops.n_edges())).unwrap())
        };
        let l = ops.assemble(Part::L1Sym).unwrap();
        let w = random_vec(ops.n_edges(), 16);
        let all = vec![true; ops.n_edges()];
        let m = fit_laplacian_rls(&w, &all, &k, &l, 1e-12, 1e-12).unwrap();
        let oracle = dense_oracle(&w, &all, k.matrix(), &l, 1e-12, 1e-12);
        let pred_oracle = k.matrix().mul_vec(&oracle);
        assert!(max_diff(&m.predict(), &pred_oracle) < 1e-6);
        assert!(max_diff(&m.predict(), &w) < 1e-6);
    }

    #[test]
    fn equal_halves_reduce_to_laplacian_rls() {
        let (c, ops) = setup(70, 17);
        let k = Arc::new(EdgeKernel::new(&c));
        let w = random_vec(ops.n_edges(), 18);
        let train = train_mask(ops.n_edges(), 0.4, 6).unwrap();
        let l = ops.view(Part::L1Sym);
        let (up, down) = ops.scaled_halves();
        for l2 in [1e-3, 1.0, 1e3] {
            let a = fit_laplacian_rls(&w, &train, &k, &l, 1e-2, l2).unwrap();
            let b = fit_updown_rls(&w, &train, &k, &up, &down, 1e-2, l2, l2).unwrap();
            assert!(max_diff(&a.predict(), &b.predict()) < 1e-10);
        }
    }

    #[test]
    fn large_down_weight_suppresses_gradient() {
        let (c, ops) = setup(70, 19);
        let k = Arc::new(EdgeKernel::new(&c));
        let w = random_vec(ops.n_edges(), 20);
        let train = train_mask(ops.n_edges(), 0.6, 7).unwrap();
        let (up, down) = ops.scaled_halves();
        let gradient_share = |down_w: f64| {
            let m = fit_updown_rls(&w, &train, &k, &up, &down, 1e-3, 1.0, down_w).unwrap();
            let p = m.predict();
            let parts = hodge_decompose(&p, ops.b1(), ops.b2(), &ops.w1().values).unwrap();
            norm(&parts.gradient) / norm(&p)
        };
        let shares: Vec<f64> = [1.0, 1e6, 1e9].iter().map(|&d| gradient_share(d)).collect();
        assert!(shares[0] > 1e-2, "{shares:?}");
        assert!(shares[1] < 1e-1 * shares[0], "{shares:?}");
        assert!(shares[2] < 1e-2 * shares[1], "{shares:?}");
    }

    #[test]
    fn curl_target_prefers_down_penalty() {
        let spec = SyntheticSpec::new(DatasetKind::Strip, 400)
            .noiseless()
            .with_sampling(Sampling::Grid);
        let pts = generate(&spec).unwrap().points;
        let c = build_vr_complex(&pts, 0.31, usize::MAX).unwrap();
        let b1 = boundary_map_1(&c);
        let b2 = boundary_map_2(&c).unwrap();
        let w = WeightSet::compute(&pts, &c, &b1, &b2, 0.3, Kernel::Exponential).unwrap();
        let ops =
            HelmholtzOperators::new(&b1, &b2, &w, 0.25, 1.0, DEFAULT_EXPLICIT_MAX_EDGES).unwrap();
        let field = VectorField::from_fn(&pts, |p| strip_field(p[0], p[1]).to_vec()).unwrap();
        let omega = cochain_from_field(&pts, &field, &c).unwrap();
        let target = hodge_decompose(&omega, ops.b1(), ops.b2(), &ops.w1().values)
            .unwrap()
            .curl;
        let k = Arc::new(EdgeKernel::new(&c));
        let (up, down) = ops.scaled_halves();
        let (mut sym, mut skew) = (0.0, 0.0);
        for seed in 0..5 {
            let train = train_mask(ops.n_edges(), 0.5, seed).unwrap();
            let test: Vec<bool> = train.iter().map(|t| !t).collect();
            let a = fit_updown_rls(&target, &train, &k, &up, &down, 1e-5, 1e3, 1e3).unwrap();
            let b = fit_updown_rls(&target, &train, &k, &up, &down, 1e-5, 1e3, 1e6).unwrap();
            sym += r2_score(&a.predict(), &target, &test).unwrap();
            skew += r2_score(&b.predict(), &target, &test).unwrap();
        }
        assert!(skew > sym, "down-weighted {skew} vs symmetric {sym}");
    }

    #[test]
    fn r2_definitions() {
        let y = [1.0, 2.0, 3.0, 6.0];
        let m = [true; 4];
        assert_eq!(r2_score(&y, &y, &m).unwrap(), 1.0);
        assert_eq!(r2_score(&[3.0; 4], &y, &m).unwrap(), 0.0);
        assert!(r2_score(&[6.0, 1.0, 6.0, 1.0], &y, &m).unwrap() < 0.0);
        let masked = [true, true, false, false];
        assert_eq!(r2_score(&[1.0, 2.0, 9.0, 9.0], &y, &masked).unwrap(), 1.0);
        assert!(r2_score(&y, &y, &[false; 4]).is_err());
    }

    fn ridge_fit<'a>(
        x: &'a [f64],
        y: &'a [f64],
    ) -> impl Fn(&[bool], &f64) -> Result<Vec<f64>> + Sync + 'a {
        move |tr: &[bool], lam: &f64| {
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for i in 0..x.len() {
                if tr[i] {
                    sxy += x[i] * y[i];
                    sxx += x[i] * x[i];
                }
            }
            let beta = sxy / (sxx + lam);
            Ok(x.iter().map(|v| beta * v).collect())
        }
    }

    #[test]
    fn cv_single_point_returned() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let out = cross_validate(ridge_fit(&x, &y), &y, &[true; 20], 5, &[7.5], 0).unwrap();
        assert_eq!(out.best, 7.5);
    }

    #[test]
    fn cv_duplicates_first_wins() {
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let f = |_: &[bool], h: &(f64, usize)| Ok(vec![h.0; 10]);
        let grid = [(4.5, 0), (4.5, 1), (4.5, 2)];
        let out = cross_validate(f, &y, &[true; 10], 2, &grid, 3).unwrap();
        assert!(out.scores.iter().all(|&s| s == out.scores[0]));
        assert_eq!(out.best, (4.5, 0));
    }

    #[test]
    fn cv_ties_prefer_smaller() {
        let y = vec![1.0; 10];
        let f = |_: &[bool], _: &f64| Ok(vec![0.0; 10]);
        let out = cross_validate(f, &y, &[true; 10], 2, &[5.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(out.best, 3.0);
    }

    #[test]
    fn cv_noiseless_linear_picks_smallest() {
        let x: Vec<f64> = (1..=40).map(|i| (i as f64 * 0.37).sin() * 5.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let grid = default_hyper_grid();
        let out = cross_validate(ridge_fit(&x, &y), &y, &[true; 40], 5, &grid, 11).unwrap();
        assert_eq!(out.best, 1e-5);
        for w in out.scores.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn train_mask_size_and_determinism() {
        let m = train_mask(100, 0.3, 9).unwrap();
        assert_eq!(m.iter().filter(|&&b| b).count(), 30);
        assert_eq!(m, train_mask(100, 0.3, 9).unwrap());
        assert!(train_mask(10, 0.0, 1).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn predictions_linear_in_target(seed in 0u64..1000, s in -3.0f64..3.0) {
            let (c, ops) = setup(30, seed);
            prop_assume!(ops.n_edges() > 3);
            let k = Arc::new(EdgeKernel::new(&c));
            let l = ops.view(Part::L1Sym);
            let n = ops.n_edges();
            let train = train_mask(n, 0.5, seed).unwrap();
            let a = random_vec(n, seed + 1);
            let b = random_vec(n, seed + 2);
            let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
            let fit = |w: &[f64]| fit_laplacian_rls(w, &train, &k, &l, 1e-2, 1.0).unwrap().predict();
            let (pa, pb, pc) = (fit(&a), fit(&b), fit(&comb));
            for i in 0..n {
                prop_assert!((pc[i] - pa[i] - s * pb[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn relabeling_edges_permutes_predictions(seed in 0u64..1000) {
            let (c, ops) = setup(30, seed);
            let n = ops.n_edges();
            prop_assume!(n > 3);
            let k = EdgeKernel::new(&c);
            let l = ops.assemble(Part::L1Sym).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let permute = |m: &CscMatrix| {
                CscMatrix::from_triplets(n, n, m.triplets().map(|(i, j, v)| (perm[i], perm[j], v)).collect()).unwrap()
            };
            let w = random_vec(n, seed + 3);
            let train = train_mask(n, 0.5, seed).unwrap();
            let mut wp = vec![0.0; n];
            let mut tp = vec![false; n];
            for i in 0..n {
                wp[perm[i]] = w[i];
                tp[perm[i]] = train[i];
            }
            let base = fit_laplacian_rls(&w, &train, &Arc::new(k.clone()), &l, 1e-2, 1.0).unwrap().predict();
            let kp = Arc::new(EdgeKernel::from_matrix(permute(k.matrix())).unwrap());
            let moved = fit_laplacian_rls(&wp, &tp, &kp, &permute(&l), 1e-2, 1.0).unwrap().predict();
            for i in 0..n {
                prop_assert!((moved[perm[i]] - base[i]).abs() < 1e-9);
            }
        }
    }
}
