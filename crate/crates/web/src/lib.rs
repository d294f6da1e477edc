//! Browser demo: sample a small point cloud, then inspect the Helmholtzian
//! spectrum, split the dataset's flow into Hodge parts, or smooth a noisy
//! copy of it. Every method is plain Rust and testable natively.

use helmholtzian::datasets::{generate, DatasetKind, Sampling, SyntheticSpec};
use helmholtzian::flows::cochain_from_field;
use helmholtzian::learning::smooth_flow;
use helmholtzian::operators::Part;
use helmholtzian::pipeline::{manifold_helmholtzian, BuildConfig, Estimate};
use helmholtzian::spectral::{
    analyze, estimate_betti1, hodge_decompose, EigenOptions, GapPolicy, Spectrum,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wasm_bindgen::prelude::*;

/// Largest point count the page accepts; keeps every operation interactive.
pub const MAX_POINTS: usize = 1500;

#[wasm_bindgen]
pub struct Demo {
    kind: DatasetKind,
    points: Vec<f64>,
    dim: usize,
    est: Estimate,
    /// Edge flow of the dataset's field, or of a synthetic rotation.
    flow: Vec<f64>,
    last_spectrum: Option<Spectrum>,
}

fn rotation_flow(points: &[f64], dim: usize, edges: &[[usize; 2]]) -> Vec<f64> {
    // Circulation of (-y, x) along each edge in the first two coordinates.
    edges
        .iter()
        .map(|&[i, j]| {
            let (xi, yi) = (points[i * dim], points[i * dim + 1]);
            let (xj, yj) = (points[j * dim], points[j * dim + 1]);
            0.5 * ((xj - xi) * -(yi + yj) + (yj - yi) * (xi + xj))
        })
        .collect()
}

#[wasm_bindgen]
impl Demo {
    /// `kind` is circle, torus, flat_torus or strip.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, n: usize, delta: f64, seed: u64) -> Result<Demo, String> {
        if !(3..=MAX_POINTS).contains(&n) {
            return Err(format!("n must lie in 3..={MAX_POINTS}"));
        }
        let kind: DatasetKind = kind
            .parse()
            .map_err(|e: helmholtzian::Error| e.to_string())?;
        let mut spec = SyntheticSpec::new(kind, n).with_seed(seed);
        if kind == DatasetKind::Strip {
            spec = spec.noiseless().with_sampling(Sampling::Grid);
        }
        let data = generate(&spec).map_err(|e| e.to_string())?;
        let est = manifold_helmholtzian(&data.points, &BuildConfig::new(delta))
            .map_err(|e| e.to_string())?;
        let dim = data.points.dim();
        let points = data.points.as_slice().to_vec();
        let flow = match &data.field {
            Some(f) => {
                cochain_from_field(&data.points, f, &est.complex).map_err(|e| e.to_string())?
            }
            None => rotation_flow(&points, dim, est.complex.edges()),
        };
        Ok(Demo {
            kind,
            points,
            dim,
            est,
            flow,
            last_spectrum: None,
        })
    }

    pub fn kind(&self) -> String {
        self.kind.name().to_string()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major coordinates.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    /// Flattened endpoint pairs.
    pub fn edges(&self) -> Vec<u32> {
        self.est
            .complex
            .edges()
            .iter()
            .flat_map(|e| e.map(|v| v as u32))
            .collect()
    }

    pub fn n_edges(&self) -> usize {
        self.est.complex.n_edges()
    }

    pub fn n_triangles(&self) -> usize {
        self.est.complex.n_triangles()
    }

    pub fn flow(&self) -> Vec<f64> {
        self.flow.clone()
    }

    /// JSON `{eigenvalues, labels, beta1, gap_ratio}` for the lowest `k`
    /// eigenpairs, which are kept for [`Demo::eigenvector`].
    pub fn spectrum(&mut self, k: usize) -> Result<String, String> {
        let k = k.clamp(1, self.n_edges());
        let s = analyze(&self.est.ops, k, &EigenOptions::default()).map_err(|e| e.to_string())?;
        let b =
            estimate_betti1(&s.eigenvalues, &GapPolicy::default()).map_err(|e| e.to_string())?;
        let labels: Vec<&str> = s.labels.iter().map(|l| l.name()).collect();
        let json = serde_json::json!({
            "eigenvalues": s.eigenvalues,
            "labels": labels,
            "beta1": b.beta,
            "gap_ratio": b.gap_ratio,
        })
        .to_string();
        self.last_spectrum = Some(s);
        Ok(json)
    }

    /// Eigenvector `index` of the last computed spectrum.
    pub fn eigenvector(&self, index: usize) -> Result<Vec<f64>, String> {
        let s = self
            .last_spectrum
            .as_ref()
            .ok_or("no spectrum computed yet")?;
        s.eigenvectors
            .get(index)
            .cloned()
            .ok_or_else(|| format!("index {index} out of range"))
    }

    /// Gradient, curl and harmonic parts of the flow, concatenated.
    pub fn decompose(&self) -> Result<Vec<f64>, String> {
        let ops = &self.est.ops;
        let p = hodge_decompose(&self.flow, ops.b1(), ops.b2(), &ops.w1().values)
            .map_err(|e| e.to_string())?;
        Ok([p.gradient, p.curl, p.harmonic].concat())
    }

    /// Flow plus Gaussian noise of relative size `noise`, then low-pass
    /// filtered with strength `alpha`. Returns noisy and smoothed copies,
    /// concatenated.
    pub fn smooth(&self, noise: f64, alpha: f64, seed: u64) -> Result<Vec<f64>, String> {
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err("noise must be nonnegative".into());
        }
        let scale = (self.flow.iter().map(|v| v * v).sum::<f64>() / self.flow.len() as f64).sqrt();
        let normal =
            Normal::new(0.0, noise * scale.max(f64::MIN_POSITIVE)).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<f64> = self
            .flow
            .iter()
            .map(|v| v + normal.sample(&mut rng))
            .collect();
        let smoothed = smooth_flow(&noisy, &self.est.ops.view(Part::L1Sym), alpha)
            .map_err(|e| e.to_string())?;
        Ok([noisy, smoothed].concat())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn circle_has_one_loop() {
        let mut d = Demo::new("circle", 300, 0.1, 0).unwrap();
        assert!(d.eigenvector(0).is_err());
        let v: serde_json::Value = serde_json::from_str(&d.spectrum(6).unwrap()).unwrap();
        assert_eq!(v["beta1"], 1);
        assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 6);
        assert_eq!(d.eigenvector(5).unwrap().len(), d.n_edges());
        assert!(d.eigenvector(6).is_err());
        assert_eq!(d.edges().len(), 2 * d.n_edges());
        assert_eq!(d.points().len(), 300 * d.dim());
    }

    #[test]
    fn decomposition_adds_up() {
        let d = Demo::new("strip", 400, 0.31, 0).unwrap();
        let parts = d.decompose().unwrap();
        let m = d.n_edges();
        let sum: Vec<f64> = (0..m)
            .map(|e| parts[e] + parts[m + e] + parts[2 * m + e])
            .collect();
        assert!(dist(&sum, &d.flow()) <= 1e-8 * dist(&d.flow(), &vec![0.0; m]));
    }

    #[test]
    fn smoothing_moves_toward_clean_flow() {
        let d = Demo::new("circle", 300, 0.1, 0).unwrap();
        let out = d.smooth(0.5, 50.0, 1).unwrap();
        let m = d.n_edges();
        let (noisy, smoothed) = out.split_at(m);
        assert!(dist(smoothed, &d.flow()) < dist(noisy, &d.flow()));
        let same = d.smooth(0.5, 0.0, 1).unwrap();
        assert_eq!(&same[..m], &same[m..]);
    }

    #[test]
    fn bad_requests_rejected() {
        assert!(Demo::new("sphere", 100, 0.1, 0).is_err());
        assert!(Demo::new("circle", MAX_POINTS + 1, 0.1, 0).is_err());
        let d = Demo::new("circle", 100, 0.2, 0).unwrap();
        assert!(d.smooth(-1.0, 1.0, 0).is_err());
    }
}
