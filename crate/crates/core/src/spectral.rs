//! Low spectrum of the symmetrized Helmholtzian, Betti number estimation,
//! Hodge decomposition and eigenflow classification.

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    cgls, dense_symmetric_eigen, dot, lanczos, norm, FnOperator, LanczosOptions, LinearOperator,
    ShiftInvert, Which,
};
use crate::operators::{HelmholtzOperators, Part};
use crate::sparse::CscMatrix;

/// Problems up to this size are solved densely.
pub const DENSE_MAX: usize = 2000;

/// How [`low_spectrum`] reaches the eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense up to [`DENSE_MAX`], then shift-invert when a matrix is
    /// available, else plain Lanczos.
    #[default]
    Auto,
    Dense,
    Lanczos,
    ShiftInvert,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Bound on `‖M φ − λ φ‖` for every returned pair.
    pub tol: f64,
    pub seed: u64,
    pub method: EigenMethod,
    pub dense_max: usize,
    /// Krylov basis size for the iterative paths.
    pub basis: usize,
    pub max_restarts: usize,
    /// Shift for shift-invert, relative to the operator's largest diagonal.
    pub relative_shift: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            seed: 0,
            method: EigenMethod::Auto,
            dense_max: DENSE_MAX,
            basis: 80,
            max_restarts: 500,
            relative_shift: 1e-8,
        }
    }
}

/// Eigenflow class of an eigenvector of `L1s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowClass {
    Gradient,
    Curl,
    Harmonic,
    Mixed,
}

impl FlowClass {
    pub fn name(self) -> &'static str {
        match self {
            FlowClass::Gradient => "gradient",
            FlowClass::Curl => "curl",
            FlowClass::Harmonic => "harmonic",
            FlowClass::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for FlowClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(FlowClass::Gradient),
            "curl" => Ok(FlowClass::Curl),
            "harmonic" => Ok(FlowClass::Harmonic),
            "mixed" => Ok(FlowClass::Mixed),
            other => Err(invalid(format!("unknown flow class '{other}'"))),
        }
    }
}

/// Ascending eigenpairs with residuals and, once classified, labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors; the largest-magnitude entry of each is positive.
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub labels: Vec<FlowClass>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

fn normalize_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    for &x in v.iter() {
        if x.abs() > best.abs() + 1e-12 {
            best = x;
        }
    }
    if best < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `k` smallest eigenpairs of a symmetric operator. `matrix`, when given,
/// must be the assembled form of `op`; it enables the dense and shift-invert
/// paths.
pub fn low_spectrum(
    op: &dyn LinearOperator,
    matrix: Option<&CscMatrix>,
    k: usize,
    opts: &EigenOptions,
) -> Result<Spectrum> {
    let n = op.dim();
    if k == 0 {
        return Err(invalid("number of eigenpairs must be at least 1"));
    }
    if k > n {
        return Err(invalid(format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let method = match opts.method {
        EigenMethod::Auto => {
            if n <= opts.dense_max {
                EigenMethod::Dense
            } else if matrix.is_some() {
                EigenMethod::ShiftInvert
            } else {
                EigenMethod::Lanczos
            }
        }
        m => m,
    };
    let (mut values, mut vectors) = match method {
        EigenMethod::Dense => {
            let dense = match matrix {
                Some(m) => m.to_dense(),
                None => {
                    let mut d = faer::Mat::<f64>::zeros(n, n);
                    let mut e = vec![0.0; n];
                    let mut col = vec![0.0; n];
                    for j in 0..n {
                        e[j] = 1.0;
                        op.apply(&e, &mut col);
                        e[j] = 0.0;
                        for i in 0..n {
                            d[(i, j)] = col[i];
                        }
                    }
                    d
                }
            };
            let (vals, vecs) = dense_symmetric_eigen(&dense)?;
            (vals[..k].to_vec(), vecs[..k].to_vec())
        }
        EigenMethod::ShiftInvert => {
            let m = matrix.ok_or_else(|| invalid("shift-invert needs an assembled matrix"))?;
            let scale = m
                .diag()
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()))
                .max(1e-300);
            let shift = opts.relative_shift * scale;
            let inv = ShiftInvert::new(m, shift)?;
            let lopts = LanczosOptions {
                basis: opts.basis,
                // 1/θ − shift recovers λ; a relative θ residual of ε bounds the
                // λ residual by roughly ‖M‖ ε.
                tol: opts.tol * 1e-2 / scale,
                relative: true,
                max_restarts: opts.max_restarts,
                seed: opts.seed,
            };
            deflated_lanczos(&inv, k, Which::Largest, &lopts)?
        }
        EigenMethod::Lanczos => {
            let lopts = LanczosOptions {
                basis: opts.basis,
                tol: opts.tol * 1e-2,
                relative: false,
                max_restarts: opts.max_restarts,
                seed: opts.seed,
            };
            deflated_lanczos(op, k, Which::Smallest, &lopts)?
        }
        EigenMethod::Auto => unreachable!("resolved above"),
    };
    // Rayleigh quotients and residuals against the original operator.
    let mut residuals = Vec::with_capacity(k);
    let mut mv = vec![0.0; n];
    for (val, vec) in values.iter_mut().zip(vectors.iter_mut()) {
        let nv = norm(vec);
        vec.iter_mut().for_each(|x| *x /= nv);
        normalize_sign(vec);
        op.apply(vec, &mut mv);
        *val = dot(vec, &mv);
        let r = mv
            .iter()
            .zip(vec.iter())
            .map(|(a, b)| (a - *val * b).powi(2))
            .sum::<f64>()
            .sqrt();
        residuals.push(r);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let spectrum = Spectrum {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenvectors: order.iter().map(|&i| vectors[i].clone()).collect(),
        residuals: order.iter().map(|&i| residuals[i]).collect(),
        labels: Vec::new(),
    };
    if spectrum.residuals.iter().any(|&r| r > opts.tol) {
        return Err(Error::EigenNoConvergence {
            iterations: 0,
            residuals: spectrum.residuals,
        });
    }
    Ok(spectrum)
}

/// Lanczos repeated on the complement of the pairs already found, so that
/// eigenvalues of multiplicity above one are not missed by a single Krylov
/// sequence. Stops when a pass finds nothing beyond the current `k` best.
fn deflated_lanczos(
    op: &dyn LinearOperator,
    k: usize,
    which: Which,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.dim();
    let better = |a: f64, b: f64| match which {
        Which::Smallest => a < b,
        Which::Largest => a > b,
    };
    let first = lanczos(op, k, which, opts)?;
    let mut values = first.values;
    let mut vectors = first.vectors;
    for pass in 1..=6u64 {
        if vectors.len() >= n {
            break;
        }
        let locked = vectors.clone();
        let threshold = *values.last().expect("k >= 1");
        // locked directions are moved to a value no pass can prefer
        let parked = match which {
            Which::Smallest => threshold + threshold.abs() + 1.0,
            Which::Largest => threshold - threshold.abs() - 1.0,
        };
        let project = |v: &mut [f64]| {
            for _ in 0..2 {
                for u in &locked {
                    let c = dot(v, u);
                    v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
                }
            }
        };
        let deflated = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
            let mut xp = x.to_vec();
            project(&mut xp);
            op.apply(&xp, y);
            project(y);
            y.iter_mut()
                .zip(x.iter().zip(&xp))
                .for_each(|(o, (a, b))| *o += parked * (a - b));
        });
        let want = k.min(n - locked.len());
        let mut o = opts.clone();
        o.seed = opts.seed.wrapping_add(pass * 0x9E37_79B9);
        let extra = lanczos(&deflated, want, which, &o)?;
        let mut gained = false;
        for (val, vec) in extra.values.into_iter().zip(extra.vectors) {
            if better(val, threshold) {
                values.push(val);
                vectors.push(vec);
                gained = true;
            }
        }
        if !gained {
            break;
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| match which {
            Which::Smallest => values[i].total_cmp(&values[j]),
            Which::Largest => values[j].total_cmp(&values[i]),
        });
        order.truncate(k);
        values = order.iter().map(|&i| values[i]).collect();
        vectors = order.iter().map(|&i| vectors[i].clone()).collect();
    }
    Ok((values, vectors))
}

/// Betti number estimate with its supporting gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BettiEstimate {
    pub beta: usize,
    /// Ratio across the selected gap.
    pub gap_ratio: f64,
    /// Set when the gap ratio falls below the policy's confidence ratio.
    pub low_confidence: bool,
}

/// Largest-ratio-gap rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPolicy {
    /// Only the first this-many eigenvalues are examined.
    pub max_considered: usize,
    /// Eigenvalues below this are treated as equal to it.
    pub floor: f64,
    pub confident_ratio: f64,
}

impl Default for GapPolicy {
    fn default() -> Self {
        Self {
            max_considered: 20,
            floor: 1e-8,
            confident_ratio: 10.0,
        }
    }
}

/// Count of eigenvalues below the largest ratio gap. A virtual eigenvalue at
/// the floor precedes the list so that a gap before the first eigenvalue
/// yields zero.
pub fn estimate_betti1(eigenvalues: &[f64], policy: &GapPolicy) -> Result<BettiEstimate> {
    if eigenvalues.len() < 2 {
        return Err(invalid("Betti estimate needs at least two eigenvalues"));
    }
    let m = eigenvalues.len().min(policy.max_considered.max(2));
    let mut prev = policy.floor;
    let mut best = (0usize, 0.0f64);
    for (i, &lam) in eigenvalues[..m].iter().enumerate() {
        let v = lam.max(policy.floor);
        let ratio = v / prev;
        if ratio > best.1 {
            best = (i, ratio);
        }
        prev = v;
    }
    Ok(BettiEstimate {
        beta: best.0,
        gap_ratio: best.1,
        low_confidence: best.1 < policy.confident_ratio,
    })
}

/// Label each eigenvector by which of the unscaled symmetric halves
/// annihilates it. `lambda_max` sets the threshold `τ = 1e-6 · lambda_max`.
pub fn classify_eigenflows(
    eigenvectors: &[Vec<f64>],
    down_sym: &dyn LinearOperator,
    up_sym: &dyn LinearOperator,
    lambda_max: f64,
) -> Vec<FlowClass> {
    let tau = 1e-6 * lambda_max;
    eigenvectors
        .iter()
        .map(|phi| {
            let scale = norm(phi).max(1e-300);
            let d = norm(&down_sym.apply_vec(phi)) / scale;
            let u = norm(&up_sym.apply_vec(phi)) / scale;
            match (d <= tau, u <= tau) {
                (true, true) => FlowClass::Harmonic,
                (false, true) => FlowClass::Gradient,
                (true, false) => FlowClass::Curl,
                (false, false) => FlowClass::Mixed,
            }
        })
        .collect()
}

/// Largest eigenvalue of `down_sym + up_sym`, the unscaled Helmholtzian.
pub fn unscaled_lambda_max(ops: &HelmholtzOperators) -> Result<f64> {
    let down = ops.view(Part::DownSym);
    let up = ops.view(Part::UpSym);
    let n = ops.n_edges();
    if n == 0 {
        return Ok(0.0);
    }
    let sum = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
        down.apply(x, y);
        let u = up.apply_vec(x);
        y.iter_mut().zip(&u).for_each(|(a, b)| *a += b);
    });
    let opts = LanczosOptions {
        basis: 40,
        tol: 1e-6,
        ..LanczosOptions::default()
    };
    Ok(lanczos(&sum, 1, Which::Largest, &opts)?.values[0])
}

/// Low spectrum of `L1s` with eigenflow labels.
pub fn analyze(ops: &HelmholtzOperators, k: usize, opts: &EigenOptions) -> Result<Spectrum> {
    let view = ops.view(Part::L1Sym);
    let mut spectrum = low_spectrum(&view, ops.matrix(Part::L1Sym), k, opts)?;
    let lambda_max = unscaled_lambda_max(ops)?;
    spectrum.labels = classify_eigenflows(
        &spectrum.eigenvectors,
        &ops.view(Part::DownSym),
        &ops.view(Part::UpSym),
        lambda_max,
    );
    Ok(spectrum)
}

/// Orthogonal gradient, curl and harmonic parts of an edge flow.
#[derive(Debug, Clone, PartialEq)]
pub struct HodgeParts {
    pub gradient: Vec<f64>,
    pub curl: Vec<f64>,
    pub harmonic: Vec<f64>,
    /// Vertex potential, mean zero on each connected component.
    pub vertex_potential: Vec<f64>,
    pub triangle_potential: Vec<f64>,
}

/// Tolerance on the normal-equation residual of both least-squares solves.
pub const HODGE_TOL: f64 = 1e-10;

/// Split `omega` into `W1^{1/2} B1ᵀ p + W1^{-1/2} B2 v + h` with both
/// potentials the minimum-norm least-squares solutions.
pub fn hodge_decompose(
    omega: &[f64],
    b1: &CscMatrix,
    b2: &CscMatrix,
    w1: &[f64],
) -> Result<HodgeParts> {
    let (n0, n1, n2) = (b1.nrows(), b1.ncols(), b2.ncols());
    if omega.len() != n1 || w1.len() != n1 || b2.nrows() != n1 {
        return Err(invalid(format!(
            "cochain of length {} does not match {n1} edges",
            omega.len()
        )));
    }
    if let Some(i) = w1.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(invalid(format!(
            "edge weight {i} must be positive after flooring"
        )));
    }
    let sqrt: Vec<f64> = w1.iter().map(|w| w.sqrt()).collect();
    let max_iter = 20 * (n0 + n1 + n2) + 1000;

    let grad_of = |p: &[f64], out: &mut [f64]| {
        b1.tr_mul_vec_into(p, out);
        out.iter_mut().zip(&sqrt).for_each(|(o, s)| *o *= s);
    };
    let (mut p, _) = cgls(
        n1,
        n0,
        grad_of,
        |y: &[f64], out: &mut [f64]| {
            let s: Vec<f64> = y.iter().zip(&sqrt).map(|(a, b)| a * b).collect();
            b1.mul_vec_into(&s, out);
        },
        omega,
        0.0,
        HODGE_TOL,
        max_iter,
    )?;
    // constants per component lie in the kernel of B1ᵀ
    let labels = component_labels(b1);
    let mut sums = vec![0.0; n0];
    let mut counts = vec![0usize; n0];
    for (v, &c) in labels.iter().enumerate() {
        sums[c] += p[v];
        counts[c] += 1;
    }
    for (v, &c) in labels.iter().enumerate() {
        p[v] -= sums[c] / counts[c] as f64;
    }
    let mut gradient = vec![0.0; n1];
    grad_of(&p, &mut gradient);

    let (v, _) = cgls(
        n1,
        n2,
        |t: &[f64], out: &mut [f64]| {
            b2.mul_vec_into(t, out);
            out.iter_mut().zip(&sqrt).for_each(|(o, s)| *o /= s);
        },
        |y: &[f64], out: &mut [f64]| {
            let s: Vec<f64> = y.iter().zip(&sqrt).map(|(a, b)| a / b).collect();
            b2.tr_mul_vec_into(&s, out);
        },
        omega,
        0.0,
        HODGE_TOL,
        max_iter,
    )?;
    let mut curl = b2.mul_vec(&v);
    curl.iter_mut().zip(&sqrt).for_each(|(o, s)| *o /= s);
    let harmonic = omega
        .iter()
        .zip(&gradient)
        .zip(&curl)
        .map(|((w, g), r)| w - g - r)
        .collect();
    Ok(HodgeParts {
        gradient,
        curl,
        harmonic,
        vertex_potential: p,
        triangle_potential: v,
    })
}

/// Component label (smallest member) per vertex from the incidence matrix.
pub(crate) fn component_labels(b1: &CscMatrix) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..b1.nrows()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in 0..b1.ncols() {
        let (rows, _) = b1.col(e);
        if let [i, j] = rows {
            let (ri, rj) = (find(&mut parent, *i), find(&mut parent, *j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    (0..b1.nrows()).map(|v| find(&mut parent, v)).collect()
}
