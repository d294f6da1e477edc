//! Point cloud to operators in one call: complex, boundary maps, weights
//! and the assembled Helmholtzian.

use crate::complex::{
    boundary_map_1, boundary_map_2, build_vr_complex, BoundaryMatrix, Complex2, PointCloud,
    DEFAULT_MAX_EDGES,
};
use crate::error::{invalid, Result};
use crate::operators::{HelmholtzOperators, DEFAULT_A, DEFAULT_B, DEFAULT_EXPLICIT_MAX_EDGES};
use crate::weights::{default_epsilon, Kernel, WeightSet};

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub delta: f64,
    /// Kernel bandwidth; `None` derives it from the complex.
    pub epsilon: Option<f64>,
    pub kernel: Kernel,
    pub a: f64,
    pub b: f64,
    pub max_edges: usize,
    pub explicit_max_edges: usize,
}

impl BuildConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            epsilon: None,
            kernel: Kernel::default(),
            a: DEFAULT_A,
            b: DEFAULT_B,
            max_edges: DEFAULT_MAX_EDGES,
            explicit_max_edges: DEFAULT_EXPLICIT_MAX_EDGES,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_coefficients(mut self, a: f64, b: f64) -> Self {
        self.a = a;
        self.b = b;
        self
    }
}

/// Everything derived from one point cloud.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub complex: Complex2,
    pub b1: BoundaryMatrix,
    pub b2: BoundaryMatrix,
    pub weights: WeightSet,
    pub ops: HelmholtzOperators,
}

pub fn manifold_helmholtzian(points: &PointCloud, config: &BuildConfig) -> Result<Estimate> {
    if let Some(eps) = config.epsilon {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid(format!(
                "epsilon must be positive and finite, got {eps}"
            )));
        }
    }
    let complex = build_vr_complex(points, config.delta, config.max_edges)?;
    let b1 = boundary_map_1(&complex);
    let b2 = boundary_map_2(&complex)?;
    let epsilon = config
        .epsilon
        .unwrap_or_else(|| default_epsilon(points, &complex));
    let weights = WeightSet::compute(points, &complex, &b1, &b2, epsilon, config.kernel)?;
    let ops = HelmholtzOperators::new(
        &b1,
        &b2,
        &weights,
        config.a,
        config.b,
        config.explicit_max_edges,
    )?;
    Ok(Estimate {
        complex,
        b1,
        b2,
        weights,
        ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::tests::random_cloud;

    #[test]
    fn chained_build_matches_manual_steps() {
        let pts = random_cloud(60, 2, 4);
        let est = manifold_helmholtzian(&pts, &BuildConfig::new(0.3).with_epsilon(0.25)).unwrap();
        let c = build_vr_complex(&pts, 0.3, DEFAULT_MAX_EDGES).unwrap();
        assert_eq!(est.complex, c);
        assert_eq!(est.weights.epsilon, 0.25);
        assert_eq!(est.ops.n_edges(), c.n_edges());
    }

    #[test]
    fn bad_epsilon_rejected() {
        let pts = random_cloud(10, 2, 1);
        assert!(manifold_helmholtzian(&pts, &BuildConfig::new(0.3).with_epsilon(0.0)).is_err());
    }
}
