//! Seeded synthetic point clouds with known topology and ground-truth
//! spectra.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::complex::{Complex2, PointCloud};
use crate::error::{invalid, Error, Result};
use crate::flows::{Cochain1, Trajectory, TrajectorySet, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// Unit circle in the plane.
    Circle,
    /// Ring torus in R³ with radii `a` (to the tube centre) and `b` (tube).
    Torus,
    /// `(cos u, sin u, cos v, sin v)` in R⁴.
    FlatTorus,
    /// The square `[−2, 2]²` with a mixed gradient/curl field.
    Strip,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Circle => "circle",
            DatasetKind::Torus => "torus",
            DatasetKind::FlatTorus => "flat_torus",
            DatasetKind::Strip => "strip",
        }
    }

    /// Length used to scale the default noise.
    pub fn scale(self, torus_radii: (f64, f64)) -> f64 {
        match self {
            DatasetKind::Circle | DatasetKind::FlatTorus => 1.0,
            DatasetKind::Torus => torus_radii.0 + torus_radii.1,
            DatasetKind::Strip => 2.0,
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(DatasetKind::Circle),
            "torus" => Ok(DatasetKind::Torus),
            "flat_torus" | "flat-torus" => Ok(DatasetKind::FlatTorus),
            "strip" => Ok(DatasetKind::Strip),
            other => Err(invalid(format!("unknown dataset kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Regular grid in the parameter domain.
    Grid,
    /// One uniform draw inside each grid cell.
    #[default]
    JitteredGrid,
    /// Independent uniform draws over the parameter domain.
    Iid,
}

impl std::str::FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Sampling::Grid),
            "jittered" | "jittered_grid" => Ok(Sampling::JitteredGrid),
            "iid" => Ok(Sampling::Iid),
            other => Err(invalid(format!("unknown sampling scheme '{other}'"))),
        }
    }
}

/// Default noise as a fraction of the object scale.
pub const DEFAULT_NOISE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: DatasetKind,
    pub n: usize,
    /// Isotropic Gaussian noise; `None` means 1% of the object scale.
    pub noise_sigma: Option<f64>,
    pub seed: u64,
    pub torus_radii: (f64, f64),
    pub sampling: Sampling,
}

impl SyntheticSpec {
    pub fn new(kind: DatasetKind, n: usize) -> Self {
        Self {
            kind,
            n,
            noise_sigma: None,
            seed: 0,
            torus_radii: (1.0, 0.5),
            sampling: Sampling::default(),
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_sigma = Some(0.0);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn noise(&self) -> f64 {
        self.noise_sigma
            .unwrap_or(DEFAULT_NOISE_FRACTION * self.kind.scale(self.torus_radii))
    }

    fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(invalid(format!(
                "dataset needs at least 8 points, got {}",
                self.n
            )));
        }
        let sigma = self.noise();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("noise must be nonnegative, got {sigma}")));
        }
        let (a, b) = self.torus_radii;
        if self.kind == DatasetKind::Torus && !(a > b && b > 0.0) {
            return Err(invalid(format!(
                "torus radii need a > b > 0, got a={a}, b={b}"
            )));
        }
        Ok(())
    }
}

/// Generated points and, for the strip, its vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: PointCloud,
    pub field: Option<VectorField>,
}

/// Factorization `n = rows · cols` with `rows ≤ cols` as close as possible.
pub fn grid_shape(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    (rows.max(1), n / rows.max(1))
}

/// Unit-square parameters in `[0,1)²` for `n` samples, row-major over the
/// grid shape.
fn unit_params(n: usize, sampling: Sampling, rng: &mut ChaCha8Rng, closed: bool) -> Vec<[f64; 2]> {
    let (rows, cols) = grid_shape(n);
    match sampling {
        Sampling::Iid => (0..n).map(|_| [rng.random(), rng.random()]).collect(),
        Sampling::Grid => {
            // periodic domains leave out the endpoint, closed ones include it
            let step = |i: usize, m: usize| {
                if closed {
                    if m > 1 {
                        i as f64 / (m - 1) as f64
                    } else {
                        0.5
                    }
                } else {
                    i as f64 / m as f64
                }
            };
            (0..rows)
                .flat_map(|r| (0..cols).map(move |c| [step(r, rows), step(c, cols)]))
                .collect()
        }
        Sampling::JitteredGrid => {
            let mut out = Vec::with_capacity(n);
            for r in 0..rows {
                for c in 0..cols {
                    let (ur, uc): (f64, f64) = (rng.random(), rng.random());
                    out.push([(r as f64 + ur) / rows as f64, (c as f64 + uc) / cols as f64]);
                }
            }
            out
        }
    }
}

fn circle_params(n: usize, sampling: Sampling, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match sampling {
        Sampling::Grid => (0..n).map(|i| i as f64 / n as f64).collect(),
        Sampling::JitteredGrid => (0..n)
            .map(|i| (i as f64 + rng.random::<f64>()) / n as f64)
            .collect(),
        Sampling::Iid => (0..n).map(|_| rng.random()).collect(),
    }
}

/// Strip field `0.3 (−x, −y) + 0.7 (x² y, −x y²)`.
pub fn strip_field(x: f64, y: f64) -> [f64; 2] {
    [0.3 * -x + 0.7 * x * x * y, 0.3 * -y - 0.7 * x * y * y]
}

/// Deterministic sample for `spec`.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sigma = spec.noise();
    let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Internal(format!("noise distribution: {e}")))?;
    let noise = |rng: &mut ChaCha8Rng| if sigma > 0.0 { normal.sample(rng) } else { 0.0 };
    let n = spec.n;
    let (rows, dim): (Vec<Vec<f64>>, usize) = match spec.kind {
        DatasetKind::Circle => {
            let t = circle_params(n, spec.sampling, &mut rng);
            let rows = t
                .iter()
                .map(|&s| {
                    let a = TAU * s;
                    vec![a.cos(), a.sin()]
                })
                .collect();
            (rows, 2)
        }
        DatasetKind::Torus => {
            let (a, b) = spec.torus_radii;
            let params = unit_params(n, spec.sampling, &mut rng, false);
            let rows = params
                .iter()
                .map(|&[s, t]| {
                    let (alpha, beta) = (TAU * s, TAU * t);
                    let r = a + b * alpha.cos();
                    vec![r * beta.cos(), r * beta.sin(), a + b * alpha.sin()]
                })
                .collect();
            (rows, 3)
        }
        DatasetKind::FlatTorus => {
            let params = unit_params(n, spec.sampling, &mut rng, false);
            let rows = params
                .iter()
                .map(|&[s, t]| {
                    let (u, v) = (TAU * s, TAU * t);
                    vec![u.cos(), u.sin(), v.cos(), v.sin()]
                })
                .collect();
            (rows, 4)
        }
        DatasetKind::Strip => {
            let params = unit_params(n, spec.sampling, &mut rng, true);
            let rows = params
                .iter()
                .map(|&[s, t]| vec![-2.0 + 4.0 * s, -2.0 + 4.0 * t])
                .collect();
            (rows, 2)
        }
    };
    let mut coords = Vec::with_capacity(n * dim);
    for row in rows {
        for x in row {
            coords.push(x + noise(&mut rng));
        }
    }
    let points = PointCloud::new(n, dim, coords)?;
    let field = match spec.kind {
        DatasetKind::Strip => Some(VectorField::from_fn(&points, |x| {
            strip_field(x[0], x[1]).to_vec()
        })?),
        _ => None,
    };
    Ok(Dataset { points, field })
}

/// First `k` eigenvalues `⌈i/2⌉²` of the 1-Laplacian on the unit circle.
pub fn true_circle_eigenvalues(k: usize) -> Vec<f64> {
    (0..k).map(|i| (i.div_ceil(2) as f64).powi(2)).collect()
}

/// First `k` eigenvalues of the 1-Laplacian on the flat torus with unit
/// circles: two zeros, then each `j² + m²` (lattice vector `(j, m) ≠ 0`)
/// once for its gradient and once for its curl eigenform.
pub fn true_flat_torus_eigenvalues(k: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2.min(k)];
    let mut radius = 1i64;
    loop {
        let mut values: Vec<i64> = Vec::new();
        for j in -radius..=radius {
            for m in -radius..=radius {
                let s = j * j + m * m;
                if s > 0 && s <= radius * radius {
                    values.push(s);
                    values.push(s);
                }
            }
        }
        values.sort_unstable();
        if out.len() + values.len() >= k {
            out.extend(values.iter().map(|&v| v as f64));
            out.truncate(k);
            return out;
        }
        radius *= 2;
    }
}

/// Random walks on the edge graph that step along the flow: from vertex `u`
/// the walk moves to neighbour `v` with probability proportional to the
/// positive part of the flow `u → v`, or uniformly when no flow leaves `u`.
pub fn flow_random_walks(
    points: &PointCloud,
    complex: &Complex2,
    flow: &Cochain1,
    count: usize,
    steps: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    if flow.len() != complex.n_edges() {
        return Err(invalid("flow length does not match the edge count"));
    }
    let n = complex.n_vertices();
    let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (e, &[i, j]) in complex.edges().iter().enumerate() {
        nbrs[i].push((j, flow[e]));
        nbrs[j].push((i, -flow[e]));
    }
    let starts: Vec<usize> = (0..n).filter(|&v| !nbrs[v].is_empty()).collect();
    if starts.is_empty() {
        return Err(invalid("complex has no edges to walk on"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = starts[rng.random_range(0..starts.len())];
        let mut path = vec![points.row(v).to_vec()];
        for _ in 0..steps.max(1) {
            let total: f64 = nbrs[v].iter().map(|&(_, f)| f.max(0.0)).sum();
            let next = if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                let mut pick = nbrs[v][0].0;
                for &(u, f) in &nbrs[v] {
                    let w = f.max(0.0);
                    if target < w {
                        pick = u;
                        break;
                    }
                    target -= w;
                    pick = u;
                }
                pick
            } else {
                nbrs[v][rng.random_range(0..nbrs[v].len())].0
            };
            v = next;
            path.push(points.row(v).to_vec());
        }
        out.push(Trajectory {
            points: path,
            times: None,
        });
    }
    TrajectorySet::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_circle_on_unit_radius() {
        for sampling in [Sampling::Grid, Sampling::JitteredGrid, Sampling::Iid] {
            let d = generate(
                &SyntheticSpec::new(DatasetKind::Circle, 100)
                    .noiseless()
                    .with_sampling(sampling),
            )
            .unwrap();
            for i in 0..100 {
                let r = d.points.row(i);
                assert!((r[0].hypot(r[1]) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn strip_field_value() {
        let f = strip_field(1.0, 1.0);
        assert!((f[0] - 0.4).abs() < 1e-15 && (f[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_torus_satisfies_implicit_equation() {
        let d = generate(&SyntheticSpec::new(DatasetKind::Torus, 400).noiseless()).unwrap();
        for i in 0..400 {
            let p = d.points.row(i);
            let lhs = (p[0].hypot(p[1]) - 1.0).powi(2) + (p[2] - 1.0).powi(2);
            assert!((lhs - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn reproducible_under_seed() {
        let spec = SyntheticSpec::new(DatasetKind::FlatTorus, 64).with_seed(9);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = generate(&spec.clone().with_seed(10)).unwrap();
        assert_ne!(generate(&spec).unwrap(), other);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&SyntheticSpec::new(DatasetKind::Circle, 4)).is_err());
        let mut s = SyntheticSpec::new(DatasetKind::Circle, 10);
        s.noise_sigma = Some(-1.0);
        assert!(generate(&s).is_err());
        assert!("sphere".parse::<DatasetKind>().is_err());
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(2000), (40, 50));
        assert_eq!(grid_shape(49), (7, 7));
        assert_eq!(grid_shape(13), (1, 13));
    }

    #[test]
    fn circle_eigenvalues() {
        assert_eq!(true_circle_eigenvalues(5), vec![0.0, 1.0, 1.0, 4.0, 4.0]);
        assert_eq!(true_circle_eigenvalues(6)[5], 9.0);
        let v = true_circle_eigenvalues(40);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    /// Independent enumeration: count real Fourier eigenforms
    /// `cos/sin(j u + m v) du`, `… dv` per eigenvalue directly.
    fn fourier_oracle(limit: i64) -> Vec<(i64, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for j in -limit..=limit {
            for m in -limit..=limit {
                // each lattice vector and its negative share one cos/sin
                // pair, and each function comes with du and dv: two real
                // forms per lattice vector
                *counts.entry(j * j + m * m).or_insert(0usize) += 2;
            }
        }
        counts
            .into_iter()
            .filter(|(s, _)| *s <= limit * limit)
            .collect()
    }

    #[test]
    fn flat_torus_eigenvalues() {
        let v = true_flat_torus_eigenvalues(60);
        assert_eq!(&v[..2], &[0.0, 0.0]);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        let oracle = fourier_oracle(6);
        // the zero frequency contributes the two harmonic forms du, dv
        assert_eq!(oracle[0], (0, 2));
        let mult = |s: f64| v.iter().filter(|&&x| x == s).count();
        assert_eq!(mult(1.0), 8);
        assert_eq!(mult(2.0), 8);
        for &(s, c) in oracle.iter().skip(1).take(4) {
            assert_eq!(mult(s as f64), c, "eigenvalue {s}");
        }
    }

    #[test]
    fn walks_follow_the_flow() {
        let d = generate(
            &SyntheticSpec::new(DatasetKind::Circle, 30)
                .noiseless()
                .with_sampling(Sampling::Grid),
        )
        .unwrap();
        let c = crate::complex::build_vr_complex(&d.points, 0.25, usize::MAX).unwrap();
        // counter-clockwise flow on nearest-neighbour edges only
        let flow: Vec<f64> = c
            .edges()
            .iter()
            .map(|&[i, j]| {
                if j == i + 1 {
                    1.0
                } else if i == 0 && j == 29 {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        let walks = flow_random_walks(&d.points, &c, &flow, 3, 10, 4).unwrap();
        let tc = crate::flows::trajectory_to_cochain(&walks, &d.points, &c).unwrap();
        assert!(tc.values.iter().zip(&flow).all(|(v, f)| v * f >= 0.0));
        assert_eq!(tc.values.iter().map(|v| v.abs()).sum::<f64>(), 30.0);
    }
}
