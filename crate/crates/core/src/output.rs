//! CSV and legacy-VTK writers. All files are written to a temporary sibling
//! and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::Point3;

use crate::contact::FaceContactState;
use crate::error::Result;
use crate::fem::CellKind;
use crate::mesh::Mesh;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// 17 significant digits, scientific.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Minimal CSV table: fixed header, rows of preformatted fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "csv row width");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// One row of a per-face fault profile.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultProfileRecord {
    pub face: usize,
    pub centroid: Point3<f64>,
    /// Along-fault coordinate used by the benchmark profile.
    pub xi: f64,
    pub state: FaceContactState,
}

pub const PROFILE_HEADER: [&str; 13] =
    ["face", "x", "y", "z", "xi", "t_n", "t_1", "t_2", "g_n", "dg_1", "dg_2", "dg_t_norm", "state"];

pub fn profile_table(records: &[FaultProfileRecord]) -> CsvTable {
    let mut t = CsvTable::new(&PROFILE_HEADER);
    for r in records {
        let s = &r.state;
        t.push(vec![
            r.face.to_string(),
            fmt_num(r.centroid.x),
            fmt_num(r.centroid.y),
            fmt_num(r.centroid.z),
            fmt_num(r.xi),
            fmt_num(s.t[0]),
            fmt_num(s.t[1]),
            fmt_num(s.t[2]),
            fmt_num(s.g_n),
            fmt_num(s.dg_t[0]),
            fmt_num(s.dg_t[1]),
            fmt_num(s.dg_t.norm()),
            s.state.as_str().to_string(),
        ]);
    }
    t
}

fn vtk_cell_type(kind: CellKind) -> u8 {
    match kind {
        CellKind::Hex8 => 12,
        CellKind::Tet4 => 10,
        CellKind::Wedge6 => 13,
    }
}

/// Volume mesh with nodal displacement and cell region.
pub fn vtk_displacement(mesh: &Mesh, u: &[f64]) -> String {
    let mut s = String::from("# vtk DataFile Version 3.0\ndisplacement\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} {}", fmt_num(p.x), fmt_num(p.y), fmt_num(p.z));
    }
    let size: usize = mesh.cells.iter().map(|c| c.nodes.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {size}", mesh.cells.len());
    for c in &mesh.cells {
        let ids: Vec<String> = c.nodes.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "{} {}", c.nodes.len(), ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.cells.len());
    for c in &mesh.cells {
        let _ = writeln!(s, "{}", vtk_cell_type(c.kind));
    }
    let _ = writeln!(s, "CELL_DATA {}\nSCALARS region int 1\nLOOKUP_TABLE default", mesh.cells.len());
    for c in &mesh.cells {
        let _ = writeln!(s, "{}", c.region);
    }
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS displacement double", mesh.nodes.len());
    for n in 0..mesh.nodes.len() {
        let _ = writeln!(s, "{} {} {}", fmt_num(u[3 * n]), fmt_num(u[3 * n + 1]), fmt_num(u[3 * n + 2]));
    }
    s
}

/// Fault faces (minus side geometry) with traction, jump and state as cell data.
pub fn vtk_fault(mesh: &Mesh, faces: &[FaceContactState]) -> String {
    let mut s = String::from("# vtk DataFile Version 3.0\nfault\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let mut pts = Vec::new();
    let mut conn = Vec::new();
    for ff in &mesh.fault_faces {
        let start = pts.len();
        pts.extend(ff.minus_nodes.iter().map(|&n| mesh.nodes[n]));
        conn.push((start..pts.len()).collect::<Vec<_>>());
    }
    let _ = writeln!(s, "POINTS {} double", pts.len());
    for p in &pts {
        let _ = writeln!(s, "{} {} {}", fmt_num(p.x), fmt_num(p.y), fmt_num(p.z));
    }
    let size: usize = conn.iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {size}", conn.len());
    for c in &conn {
        let ids: Vec<String> = c.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "{} {}", c.len(), ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {}", conn.len());
    for c in &conn {
        let _ = writeln!(s, "{}", if c.len() == 4 { 9 } else { 5 });
    }
    let _ = writeln!(s, "CELL_DATA {}", conn.len());
    let _ = writeln!(s, "VECTORS traction_local double");
    for f in faces {
        let _ = writeln!(s, "{} {} {}", fmt_num(f.t[0]), fmt_num(f.t[1]), fmt_num(f.t[2]));
    }
    let _ = writeln!(s, "SCALARS g_n double 1\nLOOKUP_TABLE default");
    for f in faces {
        let _ = writeln!(s, "{}", fmt_num(f.g_n));
    }
    let _ = writeln!(s, "VECTORS dg_t double");
    for f in faces {
        let _ = writeln!(s, "{} {} 0", fmt_num(f.dg_t[0]), fmt_num(f.dg_t[1]));
    }
    let _ = writeln!(s, "SCALARS state int 1\nLOOKUP_TABLE default");
    for f in faces {
        let _ = writeln!(s, "{}", f.state as i32);
    }
    s
}
