//! CSV readers and writers for every artifact the pipeline exchanges.
//!
//! Point clouds, fields and eigenvector matrices are headerless numeric
//! tables. Every other table starts with a header naming its columns;
//! readers skip a first row whose leading field is not numeric.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::complex::{Complex2, PointCloud};
use crate::error::{Error, Result};
use crate::flows::{Trajectory, TrajectorySet, VectorField};
use crate::sparse::CscMatrix;
use crate::spectral::{FlowClass, Spectrum};

type Rows = Vec<(usize, Vec<String>)>;

fn malformed(line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        line,
        message: message.into(),
    }
}

fn read_rows(path: &Path) -> Result<Rows> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows: Rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    if let Some((_, first)) = rows.first() {
        if first.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            rows.remove(0);
        }
    }
    Ok(rows)
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| malformed(line, format!("'{s}' is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(malformed(line, format!("'{s}' is not finite")))
    }
}

fn parse_usize(line: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| malformed(line, format!("'{s}' is not a non-negative integer")))
}

fn expect_width(line: usize, row: &[String], width: usize) -> Result<()> {
    if row.len() == width {
        Ok(())
    } else {
        Err(malformed(
            line,
            format!("expected {width} columns, found {}", row.len()),
        ))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Shortest decimal that round-trips.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn read_matrix(path: &Path) -> Result<(usize, Vec<f64>)> {
    let rows = read_rows(path)?;
    let Some((_, first)) = rows.first() else {
        return Err(malformed(1, "no rows"));
    };
    let width = first.len();
    let mut values = Vec::with_capacity(rows.len() * width);
    for (line, row) in &rows {
        expect_width(*line, row, width)?;
        for s in row {
            values.push(parse_f64(*line, s)?);
        }
    }
    Ok((width, values))
}

fn write_matrix(path: &Path, width: usize, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for row in values.chunks(width.max(1)) {
        let cells: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points(path: &Path) -> Result<PointCloud> {
    let (dim, values) = read_matrix(path)?;
    PointCloud::new(values.len() / dim, dim, values)
}

pub fn write_points(path: &Path, points: &PointCloud) -> Result<()> {
    write_matrix(path, points.dim(), points.as_slice())
}

pub fn read_field(path: &Path) -> Result<VectorField> {
    let (dim, values) = read_matrix(path)?;
    VectorField::new(values.len() / dim, dim, values)
}

pub fn write_field(path: &Path, field: &VectorField) -> Result<()> {
    write_matrix(path, field.dim(), field.as_slice())
}

pub fn write_edges(path: &Path, complex: &Complex2) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "i,j")?;
    for [i, j] in complex.edges() {
        writeln!(w, "{i},{j}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_triangles(path: &Path, complex: &Complex2) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "i,j,k")?;
    for [i, j, k] in complex.triangles() {
        writeln!(w, "{i},{j},{k}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edges(path: &Path) -> Result<Vec<[usize; 2]>> {
    read_rows(path)?
        .iter()
        .map(|(line, row)| {
            expect_width(*line, row, 2)?;
            Ok([parse_usize(*line, &row[0])?, parse_usize(*line, &row[1])?])
        })
        .collect()
}

pub fn read_triangles(path: &Path) -> Result<Vec<[usize; 3]>> {
    read_rows(path)?
        .iter()
        .map(|(line, row)| {
            expect_width(*line, row, 3)?;
            Ok([
                parse_usize(*line, &row[0])?,
                parse_usize(*line, &row[1])?,
                parse_usize(*line, &row[2])?,
            ])
        })
        .collect()
}

/// Rebuild a complex from exported edge and triangle tables.
pub fn read_complex(
    n_vertices: usize,
    edges: &Path,
    triangles: &Path,
    delta: f64,
) -> Result<Complex2> {
    Complex2::new(
        n_vertices,
        read_edges(edges)?,
        read_triangles(triangles)?,
        delta,
    )
}

pub fn write_weights(path: &Path, values: &[f64]) -> Result<()> {
    write_indexed(path, "simplex_index,weight", values)
}

pub fn read_weights(path: &Path) -> Result<Vec<f64>> {
    read_indexed(path)
}

/// Coefficient vector of a fitted regressor.
pub fn write_model(path: &Path, coefficients: &[f64]) -> Result<()> {
    write_indexed(path, "edge_index,alpha", coefficients)
}

pub fn read_model(path: &Path) -> Result<Vec<f64>> {
    read_indexed(path)
}

fn write_indexed(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    for (i, &v) in values.iter().enumerate() {
        writeln!(w, "{i},{}", fmt(v))?;
    }
    w.flush()?;
    Ok(())
}

fn read_indexed(path: &Path) -> Result<Vec<f64>> {
    let rows = read_rows(path)?;
    let mut out = vec![f64::NAN; rows.len()];
    for (line, row) in &rows {
        expect_width(*line, row, 2)?;
        let i = parse_usize(*line, &row[0])?;
        if i >= out.len() || !out[i].is_nan() {
            return Err(malformed(
                *line,
                format!("index {i} is out of range or repeated"),
            ));
        }
        out[i] = parse_f64(*line, &row[1])?;
    }
    Ok(out)
}

/// Sparse triplets "row,col,value".
pub fn write_triplets(path: &Path, m: &CscMatrix) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "row,col,value")?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{i},{j},{}", fmt(v))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_triplets(path: &Path, nrows: usize, ncols: usize) -> Result<CscMatrix> {
    let mut t = Vec::new();
    for (line, row) in read_rows(path)? {
        expect_width(line, &row, 3)?;
        let (i, j) = (parse_usize(line, &row[0])?, parse_usize(line, &row[1])?);
        if i >= nrows || j >= ncols {
            return Err(malformed(
                line,
                format!("entry ({i}, {j}) outside {nrows}x{ncols}"),
            ));
        }
        t.push((i, j, parse_f64(line, &row[2])?));
    }
    CscMatrix::from_triplets(nrows, ncols, t)
}

/// "index,eigenvalue,class,residual"; the class column is empty when the
/// spectrum was not classified.
pub fn write_spectrum(path: &Path, spectrum: &Spectrum) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "index,eigenvalue,class,residual")?;
    for (i, &v) in spectrum.eigenvalues.iter().enumerate() {
        let class = spectrum.labels.get(i).map_or("", |c| c.name());
        writeln!(w, "{i},{},{class},{}", fmt(v), fmt(spectrum.residuals[i]))?;
    }
    w.flush()?;
    Ok(())
}

/// Eigenvalues, labels and residuals of an exported spectrum.
/// Eigenvalues, optional class labels and residuals, in file order.
pub type SpectrumTable = (Vec<f64>, Vec<Option<FlowClass>>, Vec<f64>);

pub fn read_spectrum(path: &Path) -> Result<SpectrumTable> {
    let rows = read_rows(path)?;
    let (mut vals, mut labels, mut res) = (Vec::new(), Vec::new(), Vec::new());
    for (pos, (line, row)) in rows.iter().enumerate() {
        expect_width(*line, row, 4)?;
        if parse_usize(*line, &row[0])? != pos {
            return Err(malformed(*line, "spectrum indices must be 0, 1, 2, ..."));
        }
        vals.push(parse_f64(*line, &row[1])?);
        labels.push(if row[2].is_empty() {
            None
        } else {
            Some(
                row[2]
                    .parse()
                    .map_err(|_| malformed(*line, format!("unknown class '{}'", row[2])))?,
            )
        });
        res.push(parse_f64(*line, &row[3])?);
    }
    Ok((vals, labels, res))
}

/// One row per edge, one column per eigenvector.
pub fn write_eigenvectors(path: &Path, vectors: &[Vec<f64>]) -> Result<()> {
    let n = vectors.first().map_or(0, Vec::len);
    let k = vectors.len();
    let mut values = Vec::with_capacity(n * k);
    for e in 0..n {
        values.extend(vectors.iter().map(|v| v[e]));
    }
    write_matrix(path, k, &values)
}

/// "i,j,value" per edge, `i < j`.
pub fn write_cochain(path: &Path, complex: &Complex2, values: &[f64]) -> Result<()> {
    write_cochain_subset(path, complex, values, None)
}

/// As [`write_cochain`], restricted to edges with `mask[e]` set.
pub fn write_cochain_subset(
    path: &Path,
    complex: &Complex2,
    values: &[f64],
    mask: Option<&[bool]>,
) -> Result<()> {
    if values.len() != complex.n_edges() {
        return Err(Error::InvalidInput(format!(
            "cochain has {} values for {} edges",
            values.len(),
            complex.n_edges()
        )));
    }
    let mut w = create(path)?;
    writeln!(w, "i,j,value")?;
    for (e, [i, j]) in complex.edges().iter().enumerate() {
        if mask.is_none_or(|m| m[e]) {
            writeln!(w, "{i},{j},{}", fmt(values[e]))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Values on the edges listed in the file, with a mask of which edges were
/// present. Unlisted edges read as 0.
pub fn read_cochain(path: &Path, complex: &Complex2) -> Result<(Vec<f64>, Vec<bool>)> {
    let n1 = complex.n_edges();
    let mut values = vec![0.0; n1];
    let mut present = vec![false; n1];
    for (line, row) in read_rows(path)? {
        expect_width(line, &row, 3)?;
        let (i, j) = (parse_usize(line, &row[0])?, parse_usize(line, &row[1])?);
        if i >= j {
            return Err(malformed(line, format!("edge ({i}, {j}) must have i < j")));
        }
        let e = complex
            .edge_index(i, j)
            .ok_or_else(|| malformed(line, format!("({i}, {j}) is not an edge of the complex")))?;
        if present[e] {
            return Err(malformed(line, format!("edge ({i}, {j}) listed twice")));
        }
        values[e] = parse_f64(line, &row[2])?;
        present[e] = true;
    }
    Ok((values, present))
}

type TrajectoryRows = (Vec<Vec<f64>>, Vec<Option<f64>>);

/// "traj_id,t,coord_0..coord_{D-1}", rows of one trajectory in order. An
/// empty `t` column for every row of a trajectory means no timestamps.
pub fn read_trajectories(path: &Path) -> Result<TrajectorySet> {
    let rows = read_rows(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, TrajectoryRows> = HashMap::new();
    let mut dim = None;
    for (line, row) in &rows {
        if row.len() < 3 {
            return Err(malformed(
                *line,
                "expected traj_id, t and at least one coordinate",
            ));
        }
        let d = row.len() - 2;
        if *dim.get_or_insert(d) != d {
            return Err(malformed(
                *line,
                "coordinate count differs from earlier rows",
            ));
        }
        let t = if row[1].is_empty() {
            None
        } else {
            Some(parse_f64(*line, &row[1])?)
        };
        let coords = row[2..]
            .iter()
            .map(|s| parse_f64(*line, s))
            .collect::<Result<Vec<_>>>()?;
        let entry = groups.entry(row[0].clone()).or_insert_with(|| {
            order.push(row[0].clone());
            (Vec::new(), Vec::new())
        });
        entry.0.push(coords);
        entry.1.push(t);
    }
    let mut trajectories = Vec::with_capacity(order.len());
    for id in order {
        let (points, times) = groups.remove(&id).expect("grouped id");
        let times = if times.iter().all(Option::is_none) {
            None
        } else if times.iter().all(Option::is_some) {
            Some(times.into_iter().flatten().collect())
        } else {
            return Err(malformed(
                0,
                format!("trajectory '{id}' mixes timed and untimed rows"),
            ));
        };
        trajectories.push(Trajectory { points, times });
    }
    TrajectorySet::new(trajectories)
}

pub fn write_trajectories(path: &Path, set: &TrajectorySet) -> Result<()> {
    let mut w = create(path)?;
    let dim = set.trajectories()[0].points[0].len();
    let coords: Vec<String> = (0..dim).map(|d| format!("coord_{d}")).collect();
    writeln!(w, "traj_id,t,{}", coords.join(","))?;
    for (id, traj) in set.trajectories().iter().enumerate() {
        for (s, p) in traj.points.iter().enumerate() {
            let t = traj.times.as_ref().map_or(String::new(), |t| fmt(t[s]));
            let cells: Vec<String> = p.iter().map(|&v| fmt(v)).collect();
            writeln!(w, "{id},{t},{}", cells.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::build_vr_complex;
    use crate::operators::tests::random_cloud;
    use std::fs;

    fn dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn points_round_trip_exactly() {
        let d = dir();
        let p = d.path().join("pts.csv");
        let pts = random_cloud(30, 3, 1);
        write_points(&p, &pts).unwrap();
        assert_eq!(read_points(&p).unwrap(), pts);
    }

    #[test]
    fn ragged_rows_report_line() {
        let d = dir();
        let p = d.path().join("pts.csv");
        fs::write(&p, "0,1\n2,3\n4\n").unwrap();
        match read_points(&p) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed, got {other:?}"),
        }
        fs::write(&p, "0,1\nx,3\n").unwrap();
        assert!(matches!(
            read_points(&p),
            Err(Error::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn complex_round_trip() {
        let d = dir();
        let pts = random_cloud(40, 2, 2);
        let c = build_vr_complex(&pts, 0.3, usize::MAX).unwrap();
        let (e, t) = (d.path().join("e.csv"), d.path().join("t.csv"));
        write_edges(&e, &c).unwrap();
        write_triangles(&t, &c).unwrap();
        assert_eq!(read_complex(40, &e, &t, 0.3).unwrap(), c);
    }

    #[test]
    fn cochain_round_trip_and_subset() {
        let d = dir();
        let pts = random_cloud(30, 2, 3);
        let c = build_vr_complex(&pts, 0.35, usize::MAX).unwrap();
        let v: Vec<f64> = (0..c.n_edges())
            .map(|e| e as f64 * 0.1 - 1.0 / 3.0)
            .collect();
        let p = d.path().join("w.csv");
        write_cochain(&p, &c, &v).unwrap();
        let (back, present) = read_cochain(&p, &c).unwrap();
        assert_eq!(back, v);
        assert!(present.iter().all(|&b| b));
        let mask: Vec<bool> = (0..c.n_edges()).map(|e| e % 2 == 0).collect();
        write_cochain_subset(&p, &c, &v, Some(&mask)).unwrap();
        let (back, present) = read_cochain(&p, &c).unwrap();
        assert_eq!(present, mask);
        for e in 0..c.n_edges() {
            assert_eq!(back[e], if mask[e] { v[e] } else { 0.0 });
        }
    }

    #[test]
    fn cochain_rejects_reversed_and_unknown_edges() {
        let d = dir();
        let c = Complex2::new(3, vec![[0, 1], [1, 2]], vec![], 1.0).unwrap();
        let p = d.path().join("w.csv");
        fs::write(&p, "i,j,value\n1,0,2.0\n").unwrap();
        assert!(matches!(
            read_cochain(&p, &c),
            Err(Error::Malformed { line: 2, .. })
        ));
        fs::write(&p, "i,j,value\n0,2,2.0\n").unwrap();
        assert!(matches!(read_cochain(&p, &c), Err(Error::Malformed { .. })));
    }

    #[test]
    fn indexed_and_triplet_round_trip() {
        let d = dir();
        let p = d.path().join("w.csv");
        let w = vec![0.5, 1e-12, 3.25];
        write_weights(&p, &w).unwrap();
        assert_eq!(read_weights(&p).unwrap(), w);
        write_model(&p, &w).unwrap();
        assert_eq!(read_model(&p).unwrap(), w);
        let m = CscMatrix::from_triplets(3, 2, vec![(0, 0, 1.5), (2, 1, -0.25)]).unwrap();
        write_triplets(&p, &m).unwrap();
        assert_eq!(read_triplets(&p, 3, 2).unwrap(), m);
    }

    #[test]
    fn spectrum_round_trip() {
        let d = dir();
        let p = d.path().join("s.csv");
        let s = Spectrum {
            eigenvalues: vec![0.0, 0.5],
            eigenvectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            residuals: vec![1e-12, 2e-12],
            labels: vec![FlowClass::Harmonic, FlowClass::Curl],
        };
        write_spectrum(&p, &s).unwrap();
        let (v, l, r) = read_spectrum(&p).unwrap();
        assert_eq!(v, s.eigenvalues);
        assert_eq!(r, s.residuals);
        assert_eq!(l, vec![Some(FlowClass::Harmonic), Some(FlowClass::Curl)]);
    }

    #[test]
    fn trajectories_round_trip() {
        let d = dir();
        let p = d.path().join("t.csv");
        let set = TrajectorySet::new(vec![
            Trajectory {
                points: vec![vec![0.0, 1.0], vec![0.5, 1.5]],
                times: Some(vec![0.0, 0.1]),
            },
            Trajectory {
                points: vec![vec![2.0, 1.0], vec![2.5, 0.5], vec![3.0, 0.0]],
                times: None,
            },
        ])
        .unwrap();
        write_trajectories(&p, &set).unwrap();
        let back = read_trajectories(&p).unwrap();
        assert_eq!(back.trajectories(), set.trajectories());
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let d = dir();
        let p = d.path().join("pts.csv");
        fs::write(&p, "# header comment\n0,1\n\n2,3\n").unwrap();
        assert_eq!(read_points(&p).unwrap().len(), 2);
    }
}
