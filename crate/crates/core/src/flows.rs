//! Conversions between point-wise vector fields, edge cochains and
//! trajectories.

use crate::complex::{sq_dist, Complex2, PointCloud};
use crate::error::{invalid, Result};
use crate::linalg::cgls;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A real value per edge in the complex's edge order, oriented `i → j` for
/// edge `(i, j)` with `i < j`.
pub type Cochain1 = Vec<f64>;

/// One ambient vector per point, row-major `n × D`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    n: usize,
    dim: usize,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(n: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * dim {
            return Err(invalid(format!(
                "expected {} field entries for {n}x{dim}, got {}",
                n * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("vector field has non-finite entries"));
        }
        Ok(Self { n, dim, values })
    }

    /// Field sampled at every point of `points`.
    pub fn from_fn(points: &PointCloud, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(points.len() * points.dim());
        for i in 0..points.len() {
            let v = f(points.row(i));
            if v.len() != points.dim() {
                return Err(invalid("field function returned the wrong dimension"));
            }
            values.extend(v);
        }
        Self::new(points.len(), points.dim(), values)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

fn check_shapes(points: &PointCloud, complex: &Complex2) -> Result<()> {
    if points.len() != complex.n_vertices() {
        return Err(invalid(format!(
            "{} points for a complex on {} vertices",
            points.len(),
            complex.n_vertices()
        )));
    }
    Ok(())
}

/// Trapezoid-rule line integral along each edge:
/// `ω_e = ½ (f(x_i) + f(x_j))ᵀ (x_j − x_i)`.
pub fn cochain_from_field(
    points: &PointCloud,
    field: &VectorField,
    complex: &Complex2,
) -> Result<Cochain1> {
    check_shapes(points, complex)?;
    if field.len() != points.len() || field.dim() != points.dim() {
        return Err(invalid("field shape does not match the point cloud"));
    }
    Ok(complex
        .edges()
        .iter()
        .map(|&[i, j]| {
            let (xi, xj) = (points.row(i), points.row(j));
            let (fi, fj) = (field.row(i), field.row(j));
            (0..points.dim())
                .map(|d| 0.5 * (fi[d] + fj[d]) * (xj[d] - xi[d]))
                .sum()
        })
        .collect())
}

/// Field recovered from a cochain with the positions of vertices that no
/// equation constrains.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEstimate {
    pub field: VectorField,
    /// Vertices with no incident edge; their vectors are zero when `λ = 0`.
    pub unconstrained: Vec<usize>,
}

/// Damped least squares for the per-vertex field whose edge averages best
/// match each edge's implied vector `(x_j − x_i) ω_e / ‖x_j − x_i‖²`:
/// `argmin_F ‖½ |B1ᵀ| F − Y‖² + λ ‖F‖²`.
pub fn field_from_cochain(
    points: &PointCloud,
    complex: &Complex2,
    omega: &[f64],
    lambda: f64,
) -> Result<FieldEstimate> {
    let all: Vec<usize> = (0..complex.n_edges()).collect();
    field_from_edges(points, complex, omega, lambda, &all)
}

/// As [`field_from_cochain`] using only the equations of edges in `subset`.
fn field_from_edges(
    points: &PointCloud,
    complex: &Complex2,
    omega: &[f64],
    lambda: f64,
    subset: &[usize],
) -> Result<FieldEstimate> {
    check_shapes(points, complex)?;
    if omega.len() != complex.n_edges() {
        return Err(invalid(format!(
            "cochain has {} values for {} edges",
            omega.len(),
            complex.n_edges()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!(
            "damping must be nonnegative, got {lambda}"
        )));
    }
    let (n, dim) = (points.len(), points.dim());
    let edges: Vec<[usize; 2]> = subset.iter().map(|&e| complex.edges()[e]).collect();
    let mut degree = vec![0usize; n];
    for &[i, j] in &edges {
        degree[i] += 1;
        degree[j] += 1;
    }
    let unconstrained: Vec<usize> = (0..n).filter(|&v| degree[v] == 0).collect();
    let apply = |f: &[f64], out: &mut [f64]| {
        for (o, &[i, j]) in out.iter_mut().zip(&edges) {
            *o = 0.5 * (f[i] + f[j]);
        }
    };
    let apply_t = |y: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (yv, &[i, j]) in y.iter().zip(&edges) {
            out[i] += 0.5 * yv;
            out[j] += 0.5 * yv;
        }
    };
    let mut values = vec![0.0; n * dim];
    for d in 0..dim {
        let rhs: Vec<f64> = subset
            .iter()
            .zip(&edges)
            .map(|(&e, &[i, j])| {
                let len2 = points.dist2(i, j);
                if len2 > 0.0 {
                    (points.row(j)[d] - points.row(i)[d]) / len2 * omega[e]
                } else {
                    0.0
                }
            })
            .collect();
        let (col, _) = cgls(
            edges.len(),
            n,
            apply,
            apply_t,
            &rhs,
            lambda,
            1e-8,
            20 * n + 1000,
        )?;
        for v in 0..n {
            values[v * dim + d] = col[v];
        }
    }
    Ok(FieldEstimate {
        field: VectorField::new(n, dim, values)?,
        unconstrained,
    })
}

/// Default damping grid: 10⁻⁵ … 10⁵, 11 log-spaced values.
pub fn default_damping_grid() -> Vec<f64> {
    (-5..=5).map(|e| 10f64.powi(e)).collect()
}

/// Pearson correlation; zero when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Fisher z-transform of a correlation, clamped away from ±1.
pub fn fisher_z(r: f64) -> f64 {
    r.clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh()
}

/// Damping chosen by k-fold cross-validation on held-out edges, scoring the
/// Fisher-z transformed Pearson correlation between held-out values and the
/// cochain of the recovered field. Ties go to the smaller damping.
pub fn select_field_damping(
    points: &PointCloud,
    complex: &Complex2,
    omega: &[f64],
    folds: usize,
    grid: &[f64],
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(invalid("damping grid is empty"));
    }
    let n1 = complex.n_edges();
    if folds < 2 || folds > n1 {
        return Err(invalid(format!(
            "cannot split {n1} edges into {folds} folds"
        )));
    }
    let assignment = fold_assignment(n1, folds, seed);
    let mut best = (grid[0], f64::NEG_INFINITY);
    for &lambda in grid {
        let mut total = 0.0;
        for f in 0..folds {
            let train: Vec<usize> = (0..n1).filter(|&e| assignment[e] != f).collect();
            let test: Vec<usize> = (0..n1).filter(|&e| assignment[e] == f).collect();
            let est = field_from_edges(points, complex, omega, lambda, &train)?;
            let pred = cochain_from_field(points, &est.field, complex)?;
            let p: Vec<f64> = test.iter().map(|&e| pred[e]).collect();
            let t: Vec<f64> = test.iter().map(|&e| omega[e]).collect();
            total += fisher_z(pearson(&p, &t));
        }
        let score = total / folds as f64;
        if score > best.1 || (score == best.1 && lambda < best.0) {
            best = (lambda, score);
        }
    }
    Ok(best.0)
}

/// Balanced fold index per item from a seeded shuffle.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        out[i] = pos % folds;
    }
    out
}

/// Ordered ambient positions, optionally timestamped.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Vec<f64>>,
    pub times: Option<Vec<f64>>,
}

/// Trajectories of at least two points each.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(invalid("trajectory set is empty"));
        }
        for (t, traj) in trajectories.iter().enumerate() {
            if traj.points.len() < 2 {
                return Err(invalid(format!("trajectory {t} has fewer than two points")));
            }
            if let Some(times) = &traj.times {
                if times.len() != traj.points.len() {
                    return Err(invalid(format!("trajectory {t} has mismatched timestamps")));
                }
            }
        }
        Ok(Self { trajectories })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Net edge counts from snapped trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCochain {
    pub values: Cochain1,
    pub observed: Vec<bool>,
    /// Steps between snapped vertices that are not joined by an edge.
    pub skipped_steps: usize,
}

/// Nearest point of `points` to `x`; ties go to the smaller index.
pub fn nearest_vertex(points: &PointCloud, x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for v in 0..points.len() {
        let d = sq_dist(points.row(v), x);
        if d < best.1 {
            best = (v, d);
        }
    }
    best.0
}

/// Snap every trajectory point to its nearest vertex and count signed edge
/// traversals between consecutive distinct vertices.
pub fn trajectory_to_cochain(
    trajectories: &TrajectorySet,
    points: &PointCloud,
    complex: &Complex2,
) -> Result<TrajectoryCochain> {
    check_shapes(points, complex)?;
    let mut values = vec![0.0; complex.n_edges()];
    let mut observed = vec![false; complex.n_edges()];
    let mut skipped_steps = 0;
    for traj in trajectories.trajectories() {
        let mut prev: Option<usize> = None;
        for x in &traj.points {
            if x.len() != points.dim() {
                return Err(invalid(format!(
                    "trajectory point has {} coordinates, expected {}",
                    x.len(),
                    points.dim()
                )));
            }
            let v = nearest_vertex(points, x);
            if let Some(u) = prev {
                if u == v {
                    continue;
                }
                match complex.edge_index(u, v) {
                    Some(e) => {
                        values[e] += if u < v { 1.0 } else { -1.0 };
                        observed[e] = true;
                    }
                    None => skipped_steps += 1,
                }
            }
            prev = Some(v);
        }
    }
    Ok(TrajectoryCochain {
        values,
        observed,
        skipped_steps,
    })
}
