//! Point clouds, Vietoris–Rips 2-complexes and their boundary matrices.
//!
//! Orientation is always ascending vertex index: edge `(i, j)` has `i < j`,
//! triangle `(i, j, k)` has `i < j < k`.

use crate::error::{invalid, Error, Result};
use crate::sparse::CscMatrix;

/// Default ceiling on the number of edges a complex may have.
pub const DEFAULT_MAX_EDGES: usize = 5_000_000;

/// `n` points in `R^D`, stored row-major. Row index is vertex identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(n: usize, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("point cloud has no points"));
        }
        if dim == 0 {
            return Err(invalid("point cloud has zero ambient dimension"));
        }
        if coords.len() != n * dim {
            return Err(invalid(format!(
                "expected {} coordinates for {n}x{dim} points, got {}",
                n * dim,
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite coordinate at point {}, axis {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { n, dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(invalid(format!(
                "row {i} has {} coordinates, expected {dim}",
                rows[i].len()
            )));
        }
        Self::new(n, dim, rows.concat())
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
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }

    /// Rows selected by `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            if i >= self.n {
                return Err(invalid(format!(
                    "index {i} out of range for {} points",
                    self.n
                )));
            }
            coords.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.dim, coords)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A simplicial 2-complex with sorted, duplicate-free simplex lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Complex2 {
    n_vertices: usize,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    delta: f64,
}

impl Complex2 {
    /// Validates ordering, ranges and closure under faces. Triangles whose
    /// edges are all present may be omitted, so hand-built complexes need not
    /// be clique complexes.
    pub fn new(
        n_vertices: usize,
        edges: Vec<[usize; 2]>,
        triangles: Vec<[usize; 3]>,
        delta: f64,
    ) -> Result<Self> {
        for (idx, &[i, j]) in edges.iter().enumerate() {
            if !(i < j && j < n_vertices) {
                return Err(invalid(format!("edge {idx} = ({i}, {j}) is not canonical")));
            }
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("edge list must be strictly increasing"));
        }
        for (idx, &[i, j, k]) in triangles.iter().enumerate() {
            if !(i < j && j < k && k < n_vertices) {
                return Err(invalid(format!(
                    "triangle {idx} = ({i}, {j}, {k}) is not canonical"
                )));
            }
        }
        if triangles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("triangle list must be strictly increasing"));
        }
        let complex = Self {
            n_vertices,
            edges,
            triangles,
            delta,
        };
        for t in &complex.triangles {
            if complex.triangle_edges(*t).is_none() {
                return Err(invalid(format!("triangle {t:?} is missing a face")));
            }
        }
        Ok(complex)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Position of edge `{i, j}` in the edge list, in either argument order.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = if i < j { [i, j] } else { [j, i] };
        self.edges.binary_search(&key).ok()
    }

    /// Indices of edges `(i,j)`, `(j,k)`, `(i,k)` of a triangle.
    pub fn triangle_edges(&self, [i, j, k]: [usize; 3]) -> Option<[usize; 3]> {
        Some([
            self.edge_index(i, j)?,
            self.edge_index(j, k)?,
            self.edge_index(i, k)?,
        ])
    }

    /// Connected component label per vertex; labels are the smallest vertex
    /// of each component.
    pub fn components(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.n_vertices).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &[i, j] in &self.edges {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                parent[hi] = lo;
            }
        }
        (0..self.n_vertices).map(|v| find(&mut parent, v)).collect()
    }

    pub fn n_components(&self) -> usize {
        self.components()
            .iter()
            .enumerate()
            .filter(|(v, c)| *v == **c)
            .count()
    }
}

/// Vietoris–Rips 2-complex: edges join points at distance strictly below
/// `delta`, triangles are the 3-cliques of that graph.
pub fn build_vr_complex(points: &PointCloud, delta: f64, max_edges: usize) -> Result<Complex2> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!(
            "delta must be positive and finite, got {delta}"
        )));
    }
    let n = points.len();
    let d2 = delta * delta;
    // forward neighbours, ascending
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut n_edges = 0usize;
    for (i, fwd) in nbrs.iter_mut().enumerate() {
        let xi = points.row(i);
        for j in i + 1..n {
            if sq_dist(xi, points.row(j)) < d2 {
                fwd.push(j);
                n_edges += 1;
                if n_edges > max_edges {
                    return Err(Error::CapExceeded { cap: max_edges });
                }
            }
        }
    }
    let edges: Vec<[usize; 2]> = nbrs
        .iter()
        .enumerate()
        .flat_map(|(i, ns)| ns.iter().map(move |&j| [i, j]))
        .collect();
    let mut triangles = Vec::new();
    for (i, ni) in nbrs.iter().enumerate() {
        for (pos, &j) in ni.iter().enumerate() {
            // k ranges over common forward neighbours of i and j beyond j
            let rest = &ni[pos + 1..];
            let nj = &nbrs[j];
            let (mut a, mut b) = (0, 0);
            while a < rest.len() && b < nj.len() {
                match rest[a].cmp(&nj[b]) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        triangles.push([i, j, rest[a]]);
                        a += 1;
                        b += 1;
                    }
                }
            }
        }
    }
    Ok(Complex2 {
        n_vertices: n,
        edges,
        triangles,
        delta,
    })
}

/// Signed incidence matrix from `k`-chains to `(k-1)`-chains.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMatrix {
    k: usize,
    matrix: CscMatrix,
}

impl BoundaryMatrix {
    pub(crate) fn from_matrix(k: usize, matrix: CscMatrix) -> Self {
        Self { k, matrix }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.matrix.nrows(), self.matrix.ncols())
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.matrix
    }

    /// Nonzero entries as `(row, col, sign)`.
    pub fn signed_entries(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        self.matrix.triplets().map(|(r, c, v)| (r, c, v as i8))
    }
}

/// Vertex-edge incidence: `+1` at the first vertex, `-1` at the second.
pub fn boundary_map_1(complex: &Complex2) -> BoundaryMatrix {
    let triplets = complex
        .edges
        .iter()
        .enumerate()
        .flat_map(|(e, &[i, j])| [(i, e, 1.0), (j, e, -1.0)])
        .collect();
    let matrix = CscMatrix::from_triplets(complex.n_vertices, complex.n_edges(), triplets)
        .expect("canonical edges give distinct in-range entries");
    BoundaryMatrix { k: 1, matrix }
}

/// Edge-triangle incidence: `+1` on `(i,j)` and `(j,k)`, `-1` on `(i,k)`.
pub fn boundary_map_2(complex: &Complex2) -> Result<BoundaryMatrix> {
    let mut triplets = Vec::with_capacity(3 * complex.n_triangles());
    for (t, &tri) in complex.triangles.iter().enumerate() {
        let [ij, jk, ik] = complex.triangle_edges(tri).ok_or_else(|| {
            Error::Internal(format!("triangle {tri:?} references a missing edge"))
        })?;
        triplets.push((ij, t, 1.0));
        triplets.push((jk, t, 1.0));
        triplets.push((ik, t, -1.0));
    }
    let matrix = CscMatrix::from_triplets(complex.n_edges(), complex.n_triangles(), triplets)?;
    Ok(BoundaryMatrix { k: 2, matrix })
}

/// Checks `B1 · B2 = 0` in integer arithmetic.
pub fn boundaries_compose_to_zero(b1: &BoundaryMatrix, b2: &BoundaryMatrix) -> bool {
    let (n0, n1) = b1.shape();
    if b2.shape().0 != n1 {
        return false;
    }
    let m1 = b1.matrix();
    let m2 = b2.matrix();
    let mut acc = vec![0i64; n0];
    let mut touched = Vec::new();
    for t in 0..m2.ncols() {
        let (edges, signs) = m2.col(t);
        for (&e, &s) in edges.iter().zip(signs) {
            let (verts, vs) = m1.col(e);
            for (&v, &vv) in verts.iter().zip(vs) {
                acc[v] += (s as i64) * (vv as i64);
                touched.push(v);
            }
        }
        for &v in &touched {
            if acc[v] != 0 {
                return false;
            }
        }
        touched.clear();
    }
    true
}

/// Greedy max-min landmark selection starting from `start`; ties go to the
/// smallest index.
pub fn farthest_point_subsample(points: &PointCloud, m: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(invalid(format!("cannot select {m} of {n} points")));
    }
    if start >= n {
        return Err(invalid(format!(
            "start index {start} out of range for {n} points"
        )));
    }
    let mut chosen = Vec::with_capacity(m);
    let mut min_d = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut next = start;
    for _ in 0..m {
        chosen.push(next);
        taken[next] = true;
        let xn = points.row(next);
        for (i, d) in min_d.iter_mut().enumerate() {
            *d = d.min(sq_dist(xn, points.row(i)));
        }
        let mut best = None;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            if !taken[i] && min_d[i] > best_d {
                best_d = min_d[i];
                best = Some(i);
            }
        }
        match best {
            Some(b) => next = b,
            None => break,
        }
    }
    Ok(chosen)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.len(), 1, xs.to_vec()).unwrap()
    }

    /// Ten vertices (1-based labels in the figure become 0-based here) with
    /// the 4-cycle 1-2-3-4, chord 1-3, the 4-cycle 5-6-7-8 hanging off 3,
    /// and the isolated edge 9-10.
    pub(crate) fn ten_vertex_embedding() -> PointCloud {
        PointCloud::from_rows(&[
            vec![0.0, 0.0],
            vec![0.5, 0.8],
            vec![1.0, 0.0],
            vec![0.5, -0.8],
            vec![2.0, 0.0],
            vec![2.7, 0.75],
            vec![3.4, 0.0],
            vec![2.7, -0.75],
            vec![0.0, 5.0],
            vec![0.5, 5.5],
        ])
        .unwrap()
    }

    #[test]
    fn collinear_points() {
        let c = build_vr_complex(&line(&[0.0, 1.0, 2.0]), 1.5, DEFAULT_MAX_EDGES).unwrap();
        assert_eq!(c.edges(), &[[0, 1], [1, 2]]);
        assert!(c.triangles().is_empty());
        assert_eq!(c.delta(), 1.5);
    }

    #[test]
    fn equilateral_triangle() {
        let h = 3f64.sqrt() / 2.0;
        let p = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]]).unwrap();
        let c = build_vr_complex(&p, 1.1, DEFAULT_MAX_EDGES).unwrap();
        assert_eq!(c.edges(), &[[0, 1], [0, 2], [1, 2]]);
        assert_eq!(c.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn distance_equal_to_delta_is_excluded() {
        let c = build_vr_complex(&line(&[0.0, 1.0]), 1.0, DEFAULT_MAX_EDGES).unwrap();
        assert_eq!(c.n_edges(), 0);
    }

    #[test]
    fn ten_vertex_edge_list() {
        let c = build_vr_complex(&ten_vertex_embedding(), 1.1, DEFAULT_MAX_EDGES).unwrap();
        let expected: Vec<[usize; 2]> = [
            (1, 2),
            (1, 3),
            (1, 4),
            (2, 3),
            (3, 4),
            (3, 5),
            (5, 6),
            (5, 8),
            (6, 7),
            (7, 8),
            (9, 10),
        ]
        .iter()
        .map(|&(i, j)| [i - 1, j - 1])
        .collect();
        assert_eq!(c.edges(), expected.as_slice());
        // the clique rule also fills 1-3-4, which the hand-drawn figure leaves open
        assert_eq!(c.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn ten_vertex_boundary_columns() {
        let vr = build_vr_complex(&ten_vertex_embedding(), 1.1, DEFAULT_MAX_EDGES).unwrap();
        let c = Complex2::new(10, vr.edges().to_vec(), vec![[0, 1, 2]], 1.1).unwrap();
        let b1 = boundary_map_1(&c);
        let e12 = c.edge_index(0, 1).unwrap();
        assert_eq!(b1.matrix().get(0, e12), 1.0);
        assert_eq!(b1.matrix().get(1, e12), -1.0);
        let b2 = boundary_map_2(&c).unwrap();
        let col: Vec<f64> = (0..c.n_edges()).map(|e| b2.matrix().get(e, 0)).collect();
        let expected = [1.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(col, expected);
        assert!(boundaries_compose_to_zero(&b1, &b2));
    }

    #[test]
    fn single_edge_and_empty_maps() {
        let c = Complex2::new(2, vec![[0, 1]], vec![], 1.0).unwrap();
        let b1 = boundary_map_1(&c);
        assert_eq!(b1.shape(), (2, 1));
        assert_eq!(b1.matrix().to_dense()[(0, 0)], 1.0);
        assert_eq!(b1.matrix().to_dense()[(1, 0)], -1.0);
        assert_eq!(boundary_map_2(&c).unwrap().shape(), (1, 0));
        let empty = Complex2::new(4, vec![], vec![], 1.0).unwrap();
        assert_eq!(boundary_map_1(&empty).shape(), (4, 0));
    }

    #[test]
    fn shared_edge_signs() {
        let edges = vec![[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]];
        let c = Complex2::new(4, edges, vec![[0, 1, 2], [1, 2, 3]], 1.0).unwrap();
        let b2 = boundary_map_2(&c).unwrap();
        let shared = c.edge_index(1, 2).unwrap();
        // (1,2) is the (i,j) face of the first triangle and the (i,j) face of
        // the second: +1 in both columns
        assert_eq!(b2.matrix().get(shared, 0), 1.0);
        assert_eq!(b2.matrix().get(shared, 1), 1.0);
        // (1,2) is (j,k) in (0,1,2) and (i,j) in (1,2,3)
        assert_eq!(b2.matrix().get(c.edge_index(0, 2).unwrap(), 0), -1.0);
        assert_eq!(b2.matrix().get(c.edge_index(1, 3).unwrap(), 1), -1.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(PointCloud::new(0, 2, vec![]).is_err());
        assert!(PointCloud::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(build_vr_complex(&line(&[0.0, 1.0]), 0.0, 10).is_err());
        assert!(Complex2::new(3, vec![[0, 1]], vec![[0, 1, 2]], 1.0).is_err());
        assert!(Complex2::new(3, vec![[1, 0]], vec![], 1.0).is_err());
    }

    #[test]
    fn edge_cap() {
        let p = line(&[0.0, 0.1, 0.2, 0.3]);
        assert!(matches!(
            build_vr_complex(&p, 1.0, 5),
            Err(Error::CapExceeded { cap: 5 })
        ));
        assert!(build_vr_complex(&p, 1.0, 6).is_ok());
    }

    #[test]
    fn farthest_point_examples() {
        let p = line(&[0.0, 1.0, 10.0]);
        assert_eq!(farthest_point_subsample(&p, 2, 0).unwrap(), vec![0, 2]);
        let mut all = farthest_point_subsample(&p, 3, 1).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        assert!(farthest_point_subsample(&p, 4, 0).is_err());
    }

    #[test]
    fn farthest_point_on_circle() {
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 100.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let p = PointCloud::from_rows(&rows).unwrap();
        let sel = farthest_point_subsample(&p, 4, 0).unwrap();
        let greedy_min = min_pairwise(&p, &sel);
        // brute force over every 4-subset gives the optimal max-min spacing
        let mut best = 0.0f64;
        for a in 0..100 {
            for b in a + 1..100 {
                for c in b + 1..100 {
                    for d in c + 1..100 {
                        best = best.max(min_pairwise(&p, &[a, b, c, d]));
                    }
                }
            }
        }
        assert!((best - 2f64.sqrt()).abs() < 1e-9);
        assert!(greedy_min >= 2f64.sqrt() - 1e-9);
    }

    fn min_pairwise(p: &PointCloud, idx: &[usize]) -> f64 {
        let mut m = f64::INFINITY;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                m = m.min(p.dist2(i, j).sqrt());
            }
        }
        m
    }

    #[test]
    fn components_by_union_find() {
        let c = build_vr_complex(&ten_vertex_embedding(), 1.1, DEFAULT_MAX_EDGES).unwrap();
        assert_eq!(c.n_components(), 2);
        assert_eq!(c.components()[9], 8);
    }
}
