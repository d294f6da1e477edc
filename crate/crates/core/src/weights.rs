//! Triangle kernel weights and their propagation to edges and vertices.

use crate::complex::{sq_dist, BoundaryMatrix, Complex2, PointCloud};
use crate::error::{invalid, Result};

/// Relative floor applied to diagonal weights before they are inverted.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Pairwise kernel `κ(u)` evaluated at `u = ‖x − y‖² / ε²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `κ(u) = exp(−u)`
    #[default]
    Exponential,
    /// `κ(u) = 1` if `u < 1`, else 0
    Indicator,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Exponential => (-u).exp(),
            Kernel::Indicator => {
                if u < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Exponential => "exp",
            Kernel::Indicator => "indicator",
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "exponential" => Ok(Kernel::Exponential),
            "indicator" => Ok(Kernel::Indicator),
            other => Err(invalid(format!("unknown kernel '{other}'"))),
        }
    }
}

/// `w2[t] = κ(|xy|²/ε²) κ(|xz|²/ε²) κ(|yz|²/ε²)` for each triangle.
pub fn triangle_weights(
    points: &PointCloud,
    complex: &Complex2,
    epsilon: f64,
    kernel: Kernel,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let e2 = epsilon * epsilon;
    Ok(complex
        .triangles()
        .iter()
        .map(|&[i, j, k]| {
            let (x, y, z) = (points.row(i), points.row(j), points.row(k));
            kernel.eval(sq_dist(x, y) / e2)
                * kernel.eval(sq_dist(x, z) / e2)
                * kernel.eval(sq_dist(y, z) / e2)
        })
        .collect())
}

/// `w1 = |B2| w2`.
pub fn propagate_edge_weights(b2: &BoundaryMatrix, w2: &[f64]) -> Vec<f64> {
    b2.matrix().abs().mul_vec(w2)
}

/// `w0 = |B1| w1`.
pub fn propagate_vertex_weights(b1: &BoundaryMatrix, w1: &[f64]) -> Vec<f64> {
    b1.matrix().abs().mul_vec(w1)
}

/// Bandwidth used when only the radius is given: `δ^{2/3}` times the cube
/// root of the median edge length, which keeps units of length.
pub fn default_epsilon(points: &PointCloud, complex: &Complex2) -> f64 {
    let delta = complex.delta();
    let mut lengths: Vec<f64> = complex
        .edges()
        .iter()
        .map(|&[i, j]| points.dist2(i, j).sqrt())
        .collect();
    if lengths.is_empty() {
        return delta;
    }
    let mid = lengths.len() / 2;
    let (_, median, _) = lengths.select_nth_unstable_by(mid, f64::total_cmp);
    delta.powf(2.0 / 3.0) * median.cbrt()
}

/// Weights clamped from below for inversion, with the clamped positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Floored {
    pub values: Vec<f64>,
    pub floor: f64,
    pub clamped: Vec<usize>,
}

/// Raise entries below `WEIGHT_FLOOR · max(w)` to that floor.
pub fn apply_floor(w: &[f64]) -> Floored {
    let max = w.iter().copied().fold(0.0, f64::max);
    let floor = WEIGHT_FLOOR * max;
    let mut clamped = Vec::new();
    let values = w
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v < floor {
                clamped.push(i);
                floor
            } else {
                v
            }
        })
        .collect();
    Floored {
        values,
        floor,
        clamped,
    }
}

/// Diagonal weights of a 2-complex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub epsilon: f64,
    pub kernel: Kernel,
}

impl WeightSet {
    pub fn compute(
        points: &PointCloud,
        complex: &Complex2,
        b1: &BoundaryMatrix,
        b2: &BoundaryMatrix,
        epsilon: f64,
        kernel: Kernel,
    ) -> Result<Self> {
        let w2 = triangle_weights(points, complex, epsilon, kernel)?;
        let w1 = propagate_edge_weights(b2, &w2);
        let w0 = propagate_vertex_weights(b1, &w1);
        Ok(Self {
            w0,
            w1,
            w2,
            epsilon,
            kernel,
        })
    }

    /// Weights with every entry set to 1, used by tests and hand-built
    /// complexes.
    pub fn unit(complex: &Complex2) -> Self {
        Self {
            w0: vec![1.0; complex.n_vertices()],
            w1: vec![1.0; complex.n_edges()],
            w2: vec![1.0; complex.n_triangles()],
            epsilon: 1.0,
            kernel: Kernel::Indicator,
        }
    }

    pub fn floored(&self) -> (Floored, Floored) {
        (apply_floor(&self.w0), apply_floor(&self.w1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{boundary_map_1, boundary_map_2, build_vr_complex, DEFAULT_MAX_EDGES};
    use proptest::prelude::*;

    fn equilateral(s: f64) -> (PointCloud, Complex2) {
        let h = 3f64.sqrt() / 2.0 * s;
        let p = PointCloud::from_rows(&[vec![0.0, 0.0], vec![s, 0.0], vec![s / 2.0, h]]).unwrap();
        let c = build_vr_complex(&p, 1.01 * s, DEFAULT_MAX_EDGES).unwrap();
        (p, c)
    }

    #[test]
    fn equilateral_exponential() {
        let (p, c) = equilateral(0.7);
        let w = triangle_weights(&p, &c, 1.3, Kernel::Exponential).unwrap();
        let expect = (-3.0 * 0.49 / 1.69f64).exp();
        assert!((w[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn indicator_reproduces_membership() {
        let (p, c) = equilateral(1.0);
        assert_eq!(
            triangle_weights(&p, &c, 1.2, Kernel::Indicator).unwrap(),
            vec![1.0]
        );
        assert_eq!(
            triangle_weights(&p, &c, 1.0, Kernel::Indicator).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn degenerate_triangle() {
        let p = PointCloud::from_rows(&[vec![0.0], vec![0.0], vec![0.5]]).unwrap();
        let c = build_vr_complex(&p, 1.0, DEFAULT_MAX_EDGES).unwrap();
        let w = triangle_weights(&p, &c, 1.0, Kernel::Exponential).unwrap();
        let expect = 1.0 * (-0.25f64).exp().powi(2);
        assert!((w[0] - expect).abs() < 1e-15 && w[0] > 0.0);
    }

    #[test]
    fn nonpositive_epsilon_rejected() {
        let (p, c) = equilateral(1.0);
        assert!(triangle_weights(&p, &c, 0.0, Kernel::Exponential).is_err());
        assert!(triangle_weights(&p, &c, -1.0, Kernel::Exponential).is_err());
    }

    #[test]
    fn edge_propagation() {
        let c = Complex2::new(
            4,
            vec![[0, 1], [0, 2], [1, 2], [2, 3]],
            vec![[0, 1, 2]],
            1.0,
        )
        .unwrap();
        let b2 = boundary_map_2(&c).unwrap();
        assert_eq!(
            propagate_edge_weights(&b2, &[0.5]),
            vec![0.5, 0.5, 0.5, 0.0]
        );
    }

    #[test]
    fn ten_vertex_edge_weights() {
        let vr = build_vr_complex(
            &crate::complex::tests::ten_vertex_embedding(),
            1.1,
            DEFAULT_MAX_EDGES,
        )
        .unwrap();
        let c = Complex2::new(10, vr.edges().to_vec(), vec![[0, 1, 2]], 1.1).unwrap();
        let w1 = propagate_edge_weights(&boundary_map_2(&c).unwrap(), &[1.0]);
        assert_eq!(w1[c.edge_index(0, 1).unwrap()], 1.0);
        assert_eq!(w1[c.edge_index(0, 3).unwrap()], 0.0);
    }

    #[test]
    fn vertex_propagation() {
        let path = Complex2::new(3, vec![[0, 1], [1, 2]], vec![], 1.0).unwrap();
        assert_eq!(
            propagate_vertex_weights(&boundary_map_1(&path), &[1.0, 1.0]),
            vec![1.0, 2.0, 1.0]
        );
        let isolated = Complex2::new(3, vec![[0, 1]], vec![], 1.0).unwrap();
        assert_eq!(
            propagate_vertex_weights(&boundary_map_1(&isolated), &[1.0])[2],
            0.0
        );
        let star = Complex2::new(5, vec![[0, 1], [0, 2], [0, 3], [0, 4]], vec![], 1.0).unwrap();
        assert_eq!(
            propagate_vertex_weights(&boundary_map_1(&star), &[1.0; 4])[0],
            4.0
        );
    }

    #[test]
    fn floor_reports_clamped() {
        let f = apply_floor(&[2.0, 0.0, 1e-20, 1.0]);
        assert_eq!(f.floor, 2e-12);
        assert_eq!(f.clamped, vec![1, 2]);
        assert_eq!(f.values, vec![2.0, 2e-12, 2e-12, 1.0]);
    }

    fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
        (6usize..30).prop_flat_map(|n| {
            proptest::collection::vec(-1.0f64..1.0, n * 2)
                .prop_map(move |c| PointCloud::new(n, 2, c).unwrap())
        })
    }

    proptest! {
        #[test]
        fn sum_identities(p in cloud_strategy(), delta in 0.3f64..1.5, eps in 0.2f64..2.0) {
            let c = build_vr_complex(&p, delta, DEFAULT_MAX_EDGES).unwrap();
            let b1 = boundary_map_1(&c);
            let b2 = boundary_map_2(&c).unwrap();
            let w = WeightSet::compute(&p, &c, &b1, &b2, eps, Kernel::Exponential).unwrap();
            let s0: f64 = w.w0.iter().sum();
            let s1: f64 = w.w1.iter().sum();
            let s2: f64 = w.w2.iter().sum();
            prop_assert!((s0 - 2.0 * s1).abs() <= 1e-12 * (1.0 + s0));
            prop_assert!((s1 - 3.0 * s2).abs() <= 1e-12 * (1.0 + s1));
            prop_assert!(w.w2.iter().all(|&v| v > 0.0 && v.is_finite()));
            let wi = triangle_weights(&p, &c, eps, Kernel::Indicator).unwrap();
            prop_assert!(wi.iter().all(|&v| v == 0.0 || v == 1.0));
        }

        #[test]
        fn vertex_order_invariance(
            coords in proptest::collection::vec(-2.0f64..2.0, 9),
            eps in 0.3f64..3.0,
        ) {
            let rows: Vec<Vec<f64>> = coords.chunks(3).map(<[f64]>::to_vec).collect();
            let perms = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [1, 0, 2], [0, 2, 1], [2, 1, 0]];
            let mut out = Vec::new();
            for perm in perms {
                let pr: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
                let p = PointCloud::from_rows(&pr).unwrap();
                let c = Complex2::new(3, vec![[0, 1], [0, 2], [1, 2]], vec![[0, 1, 2]], 1.0).unwrap();
                out.push(triangle_weights(&p, &c, eps, Kernel::Exponential).unwrap()[0]);
            }
            for v in &out {
                prop_assert!((v - out[0]).abs() <= 1e-14 * out[0].max(1e-300));
            }
        }
    }
}
