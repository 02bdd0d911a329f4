//! Legacy ASCII VTK reader for simulator snapshots.
//!
//! Only `UNSTRUCTURED_GRID` datasets are accepted. Points and `POINT_DATA`
//! `VECTORS` arrays are kept; cells, cell data, scalars, fields and the like
//! are skipped by their declared sizes.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::series::{SeriesError, TimeSeries};

/// Relative tolerance for matching a coordinate against the min/max.
pub const COORD_RTOL: f64 = 1e-9;

const MAGIC: &str = "# vtk DataFile Version";

#[derive(Debug, Error)]
pub enum VtkError {
    #[error("missing `{MAGIC}` header line")]
    BadMagic,
    #[error("binary legacy VTK is not supported")]
    BinaryUnsupported,
    #[error("unsupported dataset type `{0}` (only UNSTRUCTURED_GRID)")]
    UnknownDataset(String),
    #[error("section {section}: expected {expected} numbers, found {found}")]
    TruncatedSection { section: String, expected: usize, found: usize },
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("no point-data vector array named `{0}`")]
    NoSuchArray(String),
    #[error("no point sits at (min x, max y)")]
    NoMatchingPoint,
    #[error("snapshot set is empty")]
    EmptySnapshots,
    #[error("snapshot time stamps must be strictly increasing ({prev} then {next})")]
    UnsortedSnapshots { prev: f64, next: f64 },
    #[error("snapshot time stamps are not uniformly spaced at index {0}")]
    NonUniformTimes(usize),
    #[error("snapshot {index} selects surface point {found:?}, earlier snapshots selected {expected:?}")]
    InconsistentSurfacePoint { index: usize, expected: [f64; 3], found: [f64; 3] },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    InFile { path: PathBuf, source: Box<VtkError> },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorArray {
    pub name: String,
    pub data: Vec<[f64; 3]>,
}

/// Point cloud with named per-point vector arrays.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub points: Vec<[f64; 3]>,
    pub vectors: Vec<VectorArray>,
}

impl Grid {
    pub fn vector(&self, name: &str) -> Option<&VectorArray> {
        self.vectors.iter().find(|a| a.name == name)
    }

    /// Serializes as legacy ASCII VTK with an empty cell list.
    pub fn to_legacy_vtk(&self) -> String {
        let mut out = String::new();
        out.push_str("# vtk DataFile Version 3.0\n");
        out.push_str("rominv grid\nASCII\nDATASET UNSTRUCTURED_GRID\n");
        out.push_str(&format!("POINTS {} double\n", self.points.len()));
        for p in &self.points {
            out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
        }
        out.push_str("CELLS 0 0\nCELL_TYPES 0\n");
        if !self.vectors.is_empty() {
            out.push_str(&format!("POINT_DATA {}\n", self.points.len()));
            for a in &self.vectors {
                out.push_str(&format!("VECTORS {} double\n", a.name));
                for v in &a.data {
                    out.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
                }
            }
        }
        out
    }
}

struct Tokens<'a> {
    inner: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<&'a str> {
        self.inner.next()
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().copied()
    }

    fn word(&mut self, what: &str) -> Result<&'a str, VtkError> {
        self.next().ok_or_else(|| VtkError::Malformed(format!("unexpected end of input, expected {what}")))
    }

    fn count(&mut self, what: &str) -> Result<usize, VtkError> {
        let tok = self.word(what)?;
        tok.parse::<usize>().map_err(|_| VtkError::Malformed(format!("expected {what}, found `{tok}`")))
    }

    fn numbers(&mut self, section: &str, expected: usize) -> Result<Vec<f64>, VtkError> {
        let mut out = Vec::with_capacity(expected);
        while out.len() < expected {
            match self.peek().and_then(|t| t.parse::<f64>().ok()) {
                Some(v) => {
                    self.next();
                    out.push(v);
                }
                None => {
                    return Err(VtkError::TruncatedSection { section: section.to_string(), expected, found: out.len() })
                }
            }
        }
        Ok(out)
    }

    fn skip_numbers(&mut self, section: &str, expected: usize) -> Result<(), VtkError> {
        self.numbers(section, expected).map(|_| ())
    }
}

fn triples(flat: Vec<f64>) -> Vec<[f64; 3]> {
    flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

#[derive(Clone, Copy)]
enum Attach {
    None,
    Point(usize),
    Cell(usize),
}

const SECTION_KEYWORDS: &[&str] = &[
    "POINTS",
    "CELLS",
    "CELL_TYPES",
    "POINT_DATA",
    "CELL_DATA",
    "VECTORS",
    "NORMALS",
    "SCALARS",
    "LOOKUP_TABLE",
    "FIELD",
    "TENSORS",
    "TEXTURE_COORDINATES",
    "COLOR_SCALARS",
    "METADATA",
];

/// Parses a legacy ASCII VTK unstructured grid.
pub fn parse_legacy_vtk(text: &[u8]) -> Result<Grid, VtkError> {
    let text = std::str::from_utf8(text).map_err(|_| {
        if text.starts_with(MAGIC.as_bytes()) {
            VtkError::BinaryUnsupported
        } else {
            VtkError::BadMagic
        }
    })?;
    let mut lines = text.splitn(4, '\n');
    let magic = lines.next().unwrap_or("");
    if !magic.trim_start().starts_with(MAGIC) {
        return Err(VtkError::BadMagic);
    }
    let _title = lines.next().ok_or_else(|| VtkError::Malformed("missing title line".into()))?;
    let format = lines.next().ok_or_else(|| VtkError::Malformed("missing format line".into()))?;
    match format.trim().to_ascii_uppercase().as_str() {
        "ASCII" => {}
        "BINARY" => return Err(VtkError::BinaryUnsupported),
        other => return Err(VtkError::Malformed(format!("unknown format `{other}`"))),
    }
    let mut tok = Tokens { inner: lines.next().unwrap_or("").split_whitespace().peekable() };

    if !tok.word("DATASET")?.eq_ignore_ascii_case("DATASET") {
        return Err(VtkError::Malformed("expected DATASET".into()));
    }
    let dataset = tok.word("dataset type")?;
    if !dataset.eq_ignore_ascii_case("UNSTRUCTURED_GRID") {
        return Err(VtkError::UnknownDataset(dataset.to_string()));
    }

    let mut points: Option<Vec<[f64; 3]>> = None;
    let mut vectors = Vec::new();
    let mut attach = Attach::None;

    while let Some(kw) = tok.next() {
        let kw_upper = kw.to_ascii_uppercase();
        let attached = |attach: Attach| match attach {
            Attach::Point(n) | Attach::Cell(n) => Ok(n),
            Attach::None => Err(VtkError::Malformed(format!("{kw} before POINT_DATA/CELL_DATA"))),
        };
        match kw_upper.as_str() {
            "POINTS" => {
                let n = tok.count("point count")?;
                tok.word("point data type")?;
                points = Some(triples(tok.numbers("POINTS", 3 * n)?));
            }
            "CELLS" => {
                let a = tok.count("cell count")?;
                let b = tok.count("cell list size")?;
                if tok.peek().is_some_and(|t| t.eq_ignore_ascii_case("OFFSETS")) {
                    tok.next();
                    tok.word("offset type")?;
                    tok.skip_numbers("OFFSETS", a)?;
                    if !tok.word("CONNECTIVITY")?.eq_ignore_ascii_case("CONNECTIVITY") {
                        return Err(VtkError::Malformed("expected CONNECTIVITY".into()));
                    }
                    tok.word("connectivity type")?;
                }
                tok.skip_numbers("CELLS", b)?;
            }
            "CELL_TYPES" => {
                let n = tok.count("cell type count")?;
                tok.skip_numbers("CELL_TYPES", n)?;
            }
            "POINT_DATA" => {
                let n = tok.count("point data count")?;
                let declared = points.as_ref().map(Vec::len);
                if declared != Some(n) {
                    return Err(VtkError::Malformed(format!(
                        "POINT_DATA {n} does not match POINTS {}",
                        declared.map_or("(missing)".to_string(), |d| d.to_string())
                    )));
                }
                attach = Attach::Point(n);
            }
            "CELL_DATA" => attach = Attach::Cell(tok.count("cell data count")?),
            "VECTORS" | "NORMALS" => {
                let n = attached(attach)?;
                let name = tok.word("array name")?.to_string();
                tok.word("array data type")?;
                let section = format!("{kw_upper} {name}");
                let data = tok.numbers(&section, 3 * n)?;
                if kw_upper == "VECTORS" && matches!(attach, Attach::Point(_)) {
                    vectors.push(VectorArray { name, data: triples(data) });
                }
            }
            "SCALARS" => {
                let n = attached(attach)?;
                tok.word("array name")?;
                tok.word("array data type")?;
                let ncomp = match tok.peek().and_then(|t| t.parse::<usize>().ok()) {
                    Some(c) => {
                        tok.next();
                        c
                    }
                    None => 1,
                };
                if tok.peek().is_some_and(|t| t.eq_ignore_ascii_case("LOOKUP_TABLE")) {
                    tok.next();
                    tok.word("lookup table name")?;
                }
                tok.skip_numbers("SCALARS", n * ncomp)?;
            }
            "LOOKUP_TABLE" => {
                tok.word("lookup table name")?;
                let size = tok.count("lookup table size")?;
                tok.skip_numbers("LOOKUP_TABLE", 4 * size)?;
            }
            "COLOR_SCALARS" => {
                let n = attached(attach)?;
                tok.word("array name")?;
                let nv = tok.count("component count")?;
                tok.skip_numbers("COLOR_SCALARS", n * nv)?;
            }
            "TENSORS" => {
                let n = attached(attach)?;
                tok.word("array name")?;
                tok.word("array data type")?;
                tok.skip_numbers("TENSORS", 9 * n)?;
            }
            "TEXTURE_COORDINATES" => {
                let n = attached(attach)?;
                tok.word("array name")?;
                let dim = tok.count("texture dimension")?;
                tok.word("array data type")?;
                tok.skip_numbers("TEXTURE_COORDINATES", dim * n)?;
            }
            "FIELD" => {
                tok.word("field name")?;
                let arrays = tok.count("field array count")?;
                for _ in 0..arrays {
                    let name = tok.word("field array name")?;
                    let ncomp = tok.count("field component count")?;
                    let ntuples = tok.count("field tuple count")?;
                    tok.word("field data type")?;
                    tok.skip_numbers(&format!("FIELD {name}"), ncomp * ntuples)?;
                }
            }
            "METADATA" => {
                while let Some(t) = tok.peek() {
                    if SECTION_KEYWORDS.contains(&t.to_ascii_uppercase().as_str()) && t != "METADATA" {
                        break;
                    }
                    tok.next();
                }
            }
            _ => return Err(VtkError::Malformed(format!("unexpected token `{kw}`"))),
        }
    }

    let points = points.ok_or_else(|| VtkError::Malformed("no POINTS section".into()))?;
    Ok(Grid { points, vectors })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COORD_RTOL * a.abs().max(b.abs())
}

/// The point chosen at the surface corner and its in-plane displacement magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub index: usize,
    pub position: [f64; 3],
    pub magnitude: f64,
    /// Number of additional points that also matched; the first in file order wins.
    pub ties: usize,
}

/// `sqrt(u^2 + v^2)` at the point with minimum x and maximum y.
pub fn surface_displacement(grid: &Grid, vector_name: &str) -> Result<SurfacePoint, VtkError> {
    let array = grid.vector(vector_name).ok_or_else(|| VtkError::NoSuchArray(vector_name.to_string()))?;
    let min_x = grid.points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let max_y = grid.points.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let mut matches =
        grid.points.iter().enumerate().filter(|(_, p)| close(p[0], min_x) && close(p[1], max_y)).map(|(i, _)| i);
    let index = matches.next().ok_or(VtkError::NoMatchingPoint)?;
    let ties = matches.count();
    if ties > 0 {
        log::warn!("{ties} extra point(s) tie at (min x, max y); using point {index}");
    }
    let [u, v, _] = array.data[index];
    Ok(SurfacePoint { index, position: grid.points[index], magnitude: (u * u + v * v).sqrt(), ties })
}

/// Snapshot files paired with their time stamps (days).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub snapshots: Vec<(f64, PathBuf)>,
    pub vector_name: String,
}

impl SnapshotSet {
    /// Collects every `*.vtk` file in `dir`. When every file stem ends in an
    /// integer `k`, files are ordered by `k` and stamped `k * dt`; otherwise
    /// they are ordered by name and stamped `i * dt`.
    pub fn from_dir(dir: &Path, vector_name: &str, dt: f64) -> Result<Self, VtkError> {
        let io = |source| VtkError::Io { path: dir.to_path_buf(), source };
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(io)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("vtk")))
            .collect();
        files.sort();
        let indices: Option<Vec<u64>> = files.iter().map(|p| trailing_integer(p)).collect();
        let snapshots = match indices {
            Some(idx) => {
                let mut pairs: Vec<(u64, PathBuf)> = idx.into_iter().zip(files).collect();
                pairs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                pairs.into_iter().map(|(k, p)| (k as f64 * dt, p)).collect()
            }
            None => files.into_iter().enumerate().map(|(i, p)| (i as f64 * dt, p)).collect(),
        };
        Ok(Self { snapshots, vector_name: vector_name.to_string() })
    }
}

fn trailing_integer(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().rev().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    digits.chars().rev().collect::<String>().parse().ok()
}

pub fn parse_file(path: &Path) -> Result<Grid, VtkError> {
    let bytes = fs::read(path).map_err(|source| VtkError::Io { path: path.to_path_buf(), source })?;
    parse_legacy_vtk(&bytes).map_err(|e| VtkError::InFile { path: path.to_path_buf(), source: Box::new(e) })
}

/// Reads every snapshot and builds the surface displacement series.
pub fn build_series(set: &SnapshotSet) -> Result<TimeSeries, VtkError> {
    let grids =
        set.snapshots.iter().map(|(t, path)| parse_file(path).map(|g| (*t, g))).collect::<Result<Vec<_>, _>>()?;
    series_from_grids(&grids, &set.vector_name)
}

/// Same as [`build_series`] on already parsed grids. A single snapshot gets a unit time step.
pub fn series_from_grids(grids: &[(f64, Grid)], vector_name: &str) -> Result<TimeSeries, VtkError> {
    if grids.is_empty() {
        return Err(VtkError::EmptySnapshots);
    }
    for w in grids.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(VtkError::UnsortedSnapshots { prev: w[0].0, next: w[1].0 });
        }
    }
    let t0 = grids[0].0;
    let dt = if grids.len() > 1 { grids[1].0 - t0 } else { 1.0 };
    let mut values = Vec::with_capacity(grids.len());
    let mut selected: Option<[f64; 3]> = None;
    for (i, (t, grid)) in grids.iter().enumerate() {
        let expected = t0 + i as f64 * dt;
        if (t - expected).abs() > COORD_RTOL * expected.abs().max(dt) {
            return Err(VtkError::NonUniformTimes(i));
        }
        let sp = surface_displacement(grid, vector_name)?;
        match selected {
            Some(pos) if pos != sp.position => {
                return Err(VtkError::InconsistentSurfacePoint { index: i, expected: pos, found: sp.position })
            }
            _ => selected = Some(sp.position),
        }
        values.push(sp.magnitude);
    }
    Ok(TimeSeries::new(t0, dt, values, format!("vtk:{vector_name}"))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_POINT: &str = "# vtk DataFile Version 3.0
single point
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 1 double
0 500 0
CELLS 1 2
1 0
CELL_TYPES 1
1
POINT_DATA 1
VECTORS displacement double
3 4 0
";

    #[test]
    fn parses_one_point_fixture() {
        let g = parse_legacy_vtk(ONE_POINT.as_bytes()).unwrap();
        assert_eq!(g.points, vec![[0.0, 500.0, 0.0]]);
        assert_eq!(g.vectors.len(), 1);
        assert_eq!(g.vector("displacement").unwrap().data, vec![[3.0, 4.0, 0.0]]);
        assert_eq!(surface_displacement(&g, "displacement").unwrap().magnitude, 5.0);
    }

    #[test]
    fn typed_errors() {
        assert!(matches!(parse_legacy_vtk(b"hello\n"), Err(VtkError::BadMagic)));
        let binary = ONE_POINT.replace("ASCII", "BINARY");
        assert!(matches!(parse_legacy_vtk(binary.as_bytes()), Err(VtkError::BinaryUnsupported)));
        let truncated = "# vtk DataFile Version 2.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 2 float\n0 1 2\n";
        assert!(matches!(
            parse_legacy_vtk(truncated.as_bytes()),
            Err(VtkError::TruncatedSection { expected: 6, found: 3, .. })
        ));
        let poly = ONE_POINT.replace("UNSTRUCTURED_GRID", "POLYDATA");
        assert!(matches!(parse_legacy_vtk(poly.as_bytes()), Err(VtkError::UnknownDataset(d)) if d == "POLYDATA"));
    }

    #[test]
    fn skips_scalars_fields_and_cell_data() {
        let text = "# vtk DataFile Version 4.2
mixed
ascii
DATASET UNSTRUCTURED_GRID
POINTS 2 float
0 0 0 1 0 0
CELLS 1 3 2 0 1
CELL_TYPES 1 3
CELL_DATA 1
VECTORS cellvec float
9 9 9
POINT_DATA 2
SCALARS pressure double 1
LOOKUP_TABLE default
1.5 2.5
FIELD extra 1
tag 2 2 int
1 2 3 4
VECTORS u double
1 0 0
0 2 0
";
        let g = parse_legacy_vtk(text.as_bytes()).unwrap();
        assert_eq!(g.vectors.len(), 1);
        assert_eq!(g.vector("u").unwrap().data[1], [0.0, 2.0, 0.0]);
    }

    #[test]
    fn new_style_cells_are_skipped() {
        let text = "# vtk DataFile Version 5.1
v5
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 2 float
0 0 0 1 1 0
CELLS 2 2
OFFSETS vtktypeint64
0 2
CONNECTIVITY vtktypeint64
0 1
CELL_TYPES 1
3
POINT_DATA 2
VECTORS d float
1 1 0 2 2 0
";
        assert_eq!(parse_legacy_vtk(text.as_bytes()).unwrap().points.len(), 2);
    }

    #[test]
    fn point_data_count_must_match() {
        let bad = ONE_POINT.replace("POINT_DATA 1", "POINT_DATA 2");
        assert!(matches!(parse_legacy_vtk(bad.as_bytes()), Err(VtkError::Malformed(_))));
    }

    #[test]
    fn selector_picks_min_x_max_y() {
        let g = Grid {
            points: vec![[2000.0, 500.0, 0.0], [0.0, 500.0, 0.0], [0.0, 0.0, 0.0]],
            vectors: vec![VectorArray {
                name: "d".into(),
                data: vec![[1.0, 1.0, 0.0], [0.6, 0.8, 7.0], [10.0, 10.0, 0.0]],
            }],
        };
        let sp = surface_displacement(&g, "d").unwrap();
        assert_eq!(sp.index, 1);
        assert_eq!(sp.magnitude, 1.0);
        assert_eq!(sp.ties, 0);
        assert!(matches!(surface_displacement(&g, "nope"), Err(VtkError::NoSuchArray(_))));
    }

    #[test]
    fn no_corner_point() {
        let g = Grid {
            points: vec![[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]],
            vectors: vec![VectorArray { name: "d".into(), data: vec![[0.0; 3]; 2] }],
        };
        assert!(matches!(surface_displacement(&g, "d"), Err(VtkError::NoMatchingPoint)));
    }

    #[test]
    fn ties_resolve_to_first_point() {
        let g = Grid {
            points: vec![[0.0, 1.0, 0.0], [0.0, 1.0 + 1e-12, 5.0]],
            vectors: vec![VectorArray { name: "d".into(), data: vec![[3.0, 4.0, 0.0], [1.0, 0.0, 0.0]] }],
        };
        let sp = surface_displacement(&g, "d").unwrap();
        assert_eq!((sp.index, sp.ties, sp.magnitude), (0, 1, 5.0));
    }

    #[test]
    fn round_trip_through_text() {
        let g = Grid {
            points: vec![[0.1, 1.0 / 3.0, -2.0], [1e-17, 5e8, 0.0]],
            vectors: vec![
                VectorArray { name: "a".into(), data: vec![[1.0, 2.0, 3.0], [0.2, 0.3, 0.4]] },
                VectorArray { name: "b".into(), data: vec![[-1.5, 0.0, 1e-300], [7.0, 8.0, 9.0]] },
            ],
        };
        assert_eq!(parse_legacy_vtk(g.to_legacy_vtk().as_bytes()).unwrap(), g);
    }

    fn corner_grid(mag: f64) -> Grid {
        Grid {
            points: vec![[0.0, 500.0, 0.0], [10.0, 0.0, 0.0]],
            vectors: vec![VectorArray { name: "displacement".into(), data: vec![[0.0, mag, 0.0], [9.0, 9.0, 9.0]] }],
        }
    }

    #[test]
    fn series_from_sorted_grids() {
        let grids: Vec<_> = (1..=3).map(|k| (k as f64, corner_grid(k as f64))).collect();
        let s = series_from_grids(&grids, "displacement").unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!((s.t0(), s.dt()), (1.0, 1.0));
    }

    #[test]
    fn series_errors() {
        assert!(matches!(series_from_grids(&[], "d"), Err(VtkError::EmptySnapshots)));
        let unsorted = vec![(2.0, corner_grid(1.0)), (1.0, corner_grid(2.0))];
        assert!(matches!(series_from_grids(&unsorted, "displacement"), Err(VtkError::UnsortedSnapshots { .. })));
        let mut moved = corner_grid(2.0);
        moved.points[0] = [-1.0, 600.0, 0.0];
        let inconsistent = vec![(0.0, corner_grid(1.0)), (1.0, moved)];
        assert!(matches!(
            series_from_grids(&inconsistent, "displacement"),
            Err(VtkError::InconsistentSurfacePoint { index: 1, .. })
        ));
        let gaps = vec![(0.0, corner_grid(1.0)), (1.0, corner_grid(1.0)), (3.0, corner_grid(1.0))];
        assert!(matches!(series_from_grids(&gaps, "displacement"), Err(VtkError::NonUniformTimes(2))));
    }

    #[test]
    fn trailing_integers() {
        assert_eq!(trailing_integer(Path::new("out/sol_0042.vtk")), Some(42));
        assert_eq!(trailing_integer(Path::new("final.vtk")), None);
    }
}
