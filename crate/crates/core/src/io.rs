//! Text formats for view graphs and orientation sets.
//!
//! **plain** (`.txt`): `#` comments, `EDGE i j qw qx qy qz` for `R̃_ij`,
//! `VERTEX_GT i qw qx qy qz` for absolute orientations and an optional
//! `VERTICES n` record. The vertex count is the larger of `VERTICES` and the
//! largest id + 1.
//!
//! **g2o** subset: `EDGE_SE3:QUAT i j tx ty tz qx qy qz qw [information]` and
//! `VERTEX_SE3:QUAT i tx ty tz qx qy qz qw`. Translations and information
//! matrices are parsed and dropped; other records are skipped and counted. Edge
//! quaternions are taken as `R̃_ij` directly. Vertex quaternions are poses
//! (body to world), so the stored orientation is their transpose, which keeps
//! `R̃_ij = R_i R_jᵀ` consistent with `T_ij = T_i⁻¹ T_j`.
//!
//! **1dsfm** (read only): `EGs.txt` lines `i j r11 .. r33 tx ty tz`. The matrix
//! maps camera i to camera j (`R_j R_iᵀ` for world-to-camera `R`), so it is
//! transposed on load. Ground truth comes from a Bundler v0.3 file, see
//! [`load_bundler_orientations`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::graph::{GroundTruth, ViewGraph};
use crate::so3::Rotation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphFormat {
    Plain,
    G2o,
    OneDsfm,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" | "txt" => Ok(GraphFormat::Plain),
            "g2o" | "g2o-subset" => Ok(GraphFormat::G2o),
            "1dsfm" | "onedsfm" => Ok(GraphFormat::OneDsfm),
            other => Err(Error::InvalidParam(format!("unknown graph format '{other}'"))),
        }
    }
}

impl std::fmt::Display for GraphFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraphFormat::Plain => "plain",
            GraphFormat::G2o => "g2o",
            GraphFormat::OneDsfm => "1dsfm",
        })
    }
}

impl GraphFormat {
    /// Guesses the format from a file extension, defaulting to plain.
    pub fn from_path(path: &Path) -> GraphFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("g2o") => GraphFormat::G2o,
            _ => GraphFormat::Plain,
        }
    }
}

/// A parsed file: the graph plus whatever orientations it carried.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: ViewGraph,
    pub ground_truth: Option<GroundTruth>,
    /// Records that were skipped (unknown g2o types).
    pub skipped_records: usize,
    /// Edges whose rotation was not orthonormal and had to be re-projected.
    pub reprojected: usize,
}

struct LineCtx<'a> {
    path: &'a Path,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            reason: reason.into(),
        }
    }

    fn numbers(&self, fields: &[&str], expected: usize, record: &str) -> Result<Vec<f64>> {
        if fields.len() < expected {
            return Err(self.err(format!(
                "{record} needs {expected} numeric fields, found {}",
                fields.len()
            )));
        }
        fields[..expected]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("'{f}' is not a finite number")))
            })
            .collect()
    }

    fn id(&self, field: &str) -> Result<usize> {
        field
            .parse::<usize>()
            .map_err(|_| self.err(format!("'{field}' is not a vertex id")))
    }

    fn quaternion(&self, w: f64, x: f64, y: f64, z: f64) -> Result<Rotation> {
        Rotation::from_quaternion(w, x, y, z).map_err(|e| self.err(e.to_string()))
    }
}

struct Parsed {
    declared_n: usize,
    edges: Vec<(usize, usize, Rotation, usize)>,
    vertices: Vec<(usize, Rotation, usize)>,
    skipped: usize,
    reprojected: usize,
}

fn parse_records(text: &str, format: GraphFormat, path: &Path) -> Result<Parsed> {
    let mut out = Parsed {
        declared_n: 0,
        edges: Vec::new(),
        vertices: Vec::new(),
        skipped: 0,
        reprojected: 0,
    };
    for (k, raw) in text.lines().enumerate() {
        let ctx = LineCtx { path, line: k + 1 };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (format, fields[0]) {
            (GraphFormat::Plain, "EDGE") => {
                if fields.len() < 7 {
                    return Err(ctx.err("EDGE needs: i j qw qx qy qz"));
                }
                let (i, j) = (ctx.id(fields[1])?, ctx.id(fields[2])?);
                let q = ctx.numbers(&fields[3..], 4, "EDGE")?;
                out.edges.push((i, j, ctx.quaternion(q[0], q[1], q[2], q[3])?, ctx.line));
            }
            (GraphFormat::Plain, "VERTEX_GT") => {
                if fields.len() < 6 {
                    return Err(ctx.err("VERTEX_GT needs: i qw qx qy qz"));
                }
                let i = ctx.id(fields[1])?;
                let q = ctx.numbers(&fields[2..], 4, "VERTEX_GT")?;
                out.vertices.push((i, ctx.quaternion(q[0], q[1], q[2], q[3])?, ctx.line));
            }
            (GraphFormat::Plain, "VERTICES") => {
                let n = fields.get(1).ok_or_else(|| ctx.err("VERTICES needs a count"))?;
                out.declared_n = out.declared_n.max(ctx.id(n)?);
            }
            (GraphFormat::Plain, other) => {
                return Err(ctx.err(format!("unknown record '{other}'")));
            }
            (GraphFormat::G2o, "EDGE_SE3:QUAT") => {
                if fields.len() < 10 {
                    return Err(ctx.err("EDGE_SE3:QUAT needs: i j tx ty tz qx qy qz qw"));
                }
                let (i, j) = (ctx.id(fields[1])?, ctx.id(fields[2])?);
                let v = ctx.numbers(&fields[3..], 7, "EDGE_SE3:QUAT")?;
                out.edges.push((i, j, ctx.quaternion(v[6], v[3], v[4], v[5])?, ctx.line));
            }
            (GraphFormat::G2o, "VERTEX_SE3:QUAT") => {
                if fields.len() < 9 {
                    return Err(ctx.err("VERTEX_SE3:QUAT needs: i tx ty tz qx qy qz qw"));
                }
                let i = ctx.id(fields[1])?;
                let v = ctx.numbers(&fields[2..], 7, "VERTEX_SE3:QUAT")?;
                let pose = ctx.quaternion(v[6], v[3], v[4], v[5])?;
                out.vertices.push((i, pose.transpose(), ctx.line));
            }
            (GraphFormat::G2o, _) => out.skipped += 1,
            (GraphFormat::OneDsfm, _) => {
                if fields.len() < 11 {
                    return Err(ctx.err("1dsfm edge needs: i j r11 .. r33 [tx ty tz]"));
                }
                let (i, j) = (ctx.id(fields[0])?, ctx.id(fields[1])?);
                let r = ctx.numbers(&fields[2..], 9, "1dsfm edge")?;
                let m = Matrix3::from_row_slice(&r).transpose();
                let (rot, fixed) = Rotation::from_matrix(m).map_err(|e| ctx.err(e.to_string()))?;
                out.reprojected += usize::from(fixed);
                out.edges.push((i, j, rot, ctx.line));
            }
        }
    }
    if out.skipped > 0 {
        log::warn!("{}: skipped {} unsupported g2o records", path.display(), out.skipped);
    }
    Ok(out)
}

/// Parses graph text. `path` is only used in error messages.
pub fn parse_dataset(text: &str, format: GraphFormat, path: &Path) -> Result<Dataset> {
    let parsed = parse_records(text, format, path)?;
    let max_id = parsed
        .edges
        .iter()
        .flat_map(|e| [e.0 + 1, e.1 + 1])
        .chain(parsed.vertices.iter().map(|v| v.0 + 1))
        .max()
        .unwrap_or(0);
    let n = parsed.declared_n.max(max_id);
    let mut graph = ViewGraph::new(n);
    for (i, j, rot, line) in parsed.edges {
        graph.add_edge(i, j, rot).map_err(|e| match e {
            Error::DuplicateEdge(..) | Error::BadVertexId { .. } => e,
            other => Error::Parse {
                path: path.to_path_buf(),
                line,
                reason: other.to_string(),
            },
        })?;
    }
    let ground_truth = if parsed.vertices.is_empty() {
        None
    } else {
        let mut slots: Vec<Option<Rotation>> = vec![None; n];
        for (i, rot, line) in parsed.vertices {
            if slots[i].replace(rot).is_some() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("orientation for vertex {i} given twice"),
                });
            }
        }
        match slots.iter().position(Option::is_none) {
            // g2o vertices are often partial initial guesses rather than ground truth
            Some(missing) if format == GraphFormat::G2o => {
                log::warn!("{}: vertex {missing} has no estimate; ignoring vertex records", path.display());
                None
            }
            Some(missing) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    reason: format!("no orientation for vertex {missing}"),
                })
            }
            None => Some(GroundTruth::new(slots.into_iter().flatten().collect())),
        }
    };
    Ok(Dataset {
        graph,
        ground_truth,
        skipped_records: parsed.skipped,
        reprojected: parsed.reprojected,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>, format: GraphFormat) -> Result<Dataset> {
    let path = path.as_ref();
    parse_dataset(&read(path)?, format, path)
}

pub fn load_graph(path: impl AsRef<Path>, format: GraphFormat) -> Result<ViewGraph> {
    load_dataset(path, format).map(|d| d.graph)
}

/// Loads an orientation set (`VERTEX_GT` or `VERTEX_SE3:QUAT` records).
pub fn load_orientations(path: impl AsRef<Path>, format: GraphFormat) -> Result<GroundTruth> {
    let path = path.as_ref();
    load_dataset(path, format)?.ground_truth.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: "file holds no orientations".into(),
    })
}

fn fmt_quat(out: &mut String, r: &Rotation, scalar_last: bool) {
    let [w, x, y, z] = r.to_quaternion();
    if scalar_last {
        let _ = write!(out, "{x} {y} {z} {w}");
    } else {
        let _ = write!(out, "{w} {x} {y} {z}");
    }
}

/// Serializes a graph and optional orientations. Floats use the shortest
/// representation that parses back to the same bits.
pub fn format_dataset(graph: &ViewGraph, orientations: Option<&GroundTruth>, format: GraphFormat) -> Result<String> {
    let mut out = String::new();
    match format {
        GraphFormat::Plain => {
            out.push_str("# rotsync view graph: EDGE i j qw qx qy qz\n");
            let _ = writeln!(out, "VERTICES {}", graph.n());
            if let Some(gt) = orientations {
                for (i, r) in gt.orientations.iter().enumerate() {
                    let _ = write!(out, "VERTEX_GT {i} ");
                    fmt_quat(&mut out, r, false);
                    out.push('\n');
                }
            }
            for e in graph.edges() {
                let _ = write!(out, "EDGE {} {} ", e.i, e.j);
                fmt_quat(&mut out, &e.rot, false);
                out.push('\n');
            }
        }
        GraphFormat::G2o => {
            if let Some(gt) = orientations {
                for (i, r) in gt.orientations.iter().enumerate() {
                    let _ = write!(out, "VERTEX_SE3:QUAT {i} 0 0 0 ");
                    fmt_quat(&mut out, &r.transpose(), true);
                    out.push('\n');
                }
            }
            for e in graph.edges() {
                let _ = write!(out, "EDGE_SE3:QUAT {} {} 0 0 0 ", e.i, e.j);
                fmt_quat(&mut out, &e.rot, true);
                out.push_str(" 1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1\n");
            }
        }
        GraphFormat::OneDsfm => {
            return Err(Error::InvalidParam("the 1dsfm format is read-only".into()));
        }
    }
    Ok(out)
}

pub fn save_dataset(
    graph: &ViewGraph,
    orientations: Option<&GroundTruth>,
    path: impl AsRef<Path>,
    format: GraphFormat,
) -> Result<()> {
    write(path.as_ref(), &format_dataset(graph, orientations, format)?)
}

pub fn save_graph(graph: &ViewGraph, path: impl AsRef<Path>, format: GraphFormat) -> Result<()> {
    save_dataset(graph, None, path, format)
}

/// Writes an orientation set as `VERTEX_GT` records (plain) or vertices (g2o).
pub fn save_orientations(orientations: &GroundTruth, path: impl AsRef<Path>, format: GraphFormat) -> Result<()> {
    save_dataset(&ViewGraph::new(orientations.len()), Some(orientations), path, format)
}

/// Reads world-to-camera rotations from a Bundler v0.3 file. Cameras with zero
/// focal length have no solution and come back as `None`.
pub fn load_bundler_orientations(path: impl AsRef<Path>) -> Result<Vec<Option<Rotation>>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let mut next = |what: &str| -> Result<(usize, Vec<f64>)> {
        let (k, l) = lines.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: format!("unexpected end of file reading {what}"),
        })?;
        let ctx = LineCtx { path, line: k + 1 };
        let fields: Vec<&str> = l.split_whitespace().collect();
        let vals = ctx.numbers(&fields, fields.len(), what)?;
        Ok((k + 1, vals))
    };
    let (line, header) = next("header")?;
    if header.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            reason: "header needs camera and point counts".into(),
        });
    }
    let cameras = header[0] as usize;
    let mut out = Vec::with_capacity(cameras);
    for _ in 0..cameras {
        let (_, intr) = next("camera intrinsics")?;
        let mut rows = [0.0; 9];
        for r in 0..3 {
            let (line, row) = next("rotation row")?;
            if row.len() != 3 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    reason: "rotation rows have 3 entries".into(),
                });
            }
            rows[3 * r..3 * r + 3].copy_from_slice(&row);
        }
        next("translation")?;
        if intr.first().copied().unwrap_or(0.0) == 0.0 {
            out.push(None);
        } else {
            let (rot, _) = Rotation::from_matrix(Matrix3::from_row_slice(&rows))?;
            out.push(Some(rot));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{chordal_distance, random_rotation, rot_z};
    use nalgebra::{Quaternion, UnitQuaternion};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p() -> &'static Path {
        Path::new("test.txt")
    }

    #[test]
    fn plain_triangle() {
        let text = "# triangle\nEDGE 0 1 1 0 0 0\nEDGE 1 2 1 0 0 0\nEDGE 0 2 0.7071067811865476 0 0 0.7071067811865476\n";
        let d = parse_dataset(text, GraphFormat::Plain, p()).unwrap();
        assert_eq!(d.graph.n(), 3);
        assert_eq!(d.graph.num_edges(), 3);
        assert!(d.ground_truth.is_none());
        let r = d.graph.relative(0, 2).unwrap();
        assert!(chordal_distance(&r, &rot_z(std::f64::consts::FRAC_PI_2)) < 1e-12);
    }

    #[test]
    fn g2o_edge_uses_quaternion_only() {
        let (qx, qy, qz, qw) = (0.1, -0.3, 0.2, 0.9);
        let text = format!("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nEDGE_SE3:QUAT 0 1 5.0 -2.0 1.0 {qx} {qy} {qz} {qw} 1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1\nFIX 0\n");
        let d = parse_dataset(&text, GraphFormat::G2o, p()).unwrap();
        assert_eq!(d.skipped_records, 1);
        let oracle = UnitQuaternion::from_quaternion(Quaternion::new(qw, qx, qy, qz));
        let r = d.graph.relative(0, 1).unwrap();
        assert!((r.matrix() - oracle.to_rotation_matrix().matrix()).norm() < 1e-12);
    }

    #[test]
    fn unnormalized_quaternion_accepted() {
        let text = "EDGE 0 1 1.01 0 0 0\n";
        let d = parse_dataset(text, GraphFormat::Plain, p()).unwrap();
        assert!(chordal_distance(&d.graph.edges()[0].rot, &Rotation::identity()) < 1e-15);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_dataset("# ok\nEDGE 0 1 1 0 zero 0\n", GraphFormat::Plain, p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("EDGE 0 1 1 0 0 0\nEDGE 1 0 1 0 0 0\n", GraphFormat::Plain, p()).unwrap_err();
        assert!(matches!(err, Error::DuplicateEdge(0, 1)));
        let err = parse_dataset("EDGE 0 0 1 0 0 0\n", GraphFormat::Plain, p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_dataset("BOGUS 1\n", GraphFormat::Plain, p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_dataset("EDGE 0 -1 1 0 0 0\n", GraphFormat::Plain, p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_graph_round_trip_keeps_vertex_count() {
        let g = ViewGraph::new(5);
        let text = format_dataset(&g, None, GraphFormat::Plain).unwrap();
        assert!(!text.lines().any(|l| l.starts_with("EDGE")));
        let back = parse_dataset(&text, GraphFormat::Plain, p()).unwrap();
        assert_eq!(back.graph, g);
    }

    #[test]
    fn g2o_round_trip_with_orientations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gt = GroundTruth::new((0..6).map(|_| random_rotation(&mut rng)).collect());
        let mut g = ViewGraph::new(6);
        for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)] {
            g.add_edge(i, j, gt.relative(i, j)).unwrap();
        }
        let text = format_dataset(&g, Some(&gt), GraphFormat::G2o).unwrap();
        let back = parse_dataset(&text, GraphFormat::G2o, p()).unwrap();
        let back_gt = back.ground_truth.unwrap();
        for (a, b) in back.graph.edges().iter().zip(g.edges()) {
            assert_eq!((a.i, a.j), (b.i, b.j));
            assert!((a.rot.matrix() - b.rot.matrix()).norm() < 1e-12);
            // vertices and edges agree on the R̃_ij = R_i R_jᵀ convention
            assert!(chordal_distance(&a.rot, &back_gt.relative(a.i, a.j)) < 1e-12);
        }
    }

    #[test]
    fn onedsfm_edges_are_transposed() {
        let r = rot_z(0.4);
        let m = r.matrix();
        let text = format!(
            "0 1 {} {} {} {} {} {} {} {} {} 0 0 0\n",
            m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]
        );
        let d = parse_dataset(&text, GraphFormat::OneDsfm, p()).unwrap();
        assert!(chordal_distance(&d.graph.relative(0, 1).unwrap(), &r.transpose()) < 1e-15);
    }

    #[test]
    fn format_names() {
        assert_eq!("g2o-subset".parse::<GraphFormat>().unwrap(), GraphFormat::G2o);
        assert_eq!("plain".parse::<GraphFormat>().unwrap(), GraphFormat::Plain);
        assert!("xml".parse::<GraphFormat>().is_err());
    }
}
