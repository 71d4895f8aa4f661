//! Line-oriented ASCII mesh format.
//!
//! ```text
//! NODES
//! <id> <x> <y> <z>
//! CELLS
//! <id> <hex8|tet4|wedge6> <n0> .. <nk> <region>
//! FAULT_FACES
//! <id> <quad4|tri3> <minus nodes..> <plus nodes..> <minus cell> <plus cell> [fault]
//! NODESET <name>
//! <id> <id> ...
//! FACESET <name>
//! <cell> <local face>
//! ```
//! `#` starts a comment. Ids must be dense and in order.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::fem::{CellKind, FaceKind};
use crate::mesh::{compute_face_frame, BoundaryFace, Cell, FaultFace, Mesh};

enum Section {
    None,
    Nodes,
    Cells,
    Faults,
    NodeSet(String),
    FaceSet(String),
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| perr(line, format!("bad number `{tok}`")))
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut mesh = Mesh::default();
    let mut raw_faults: Vec<(usize, FaceKind, Vec<usize>, Vec<usize>, usize, usize, usize)> = Vec::new();
    let mut section = Section::None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        match toks[0] {
            "NODES" => {
                section = Section::Nodes;
                continue;
            }
            "CELLS" => {
                section = Section::Cells;
                continue;
            }
            "FAULT_FACES" => {
                section = Section::Faults;
                continue;
            }
            "NODESET" | "FACESET" => {
                let name = toks.get(1).ok_or_else(|| perr(line, "set name missing"))?.to_string();
                if toks[0] == "NODESET" {
                    mesh.node_sets.entry(name.clone()).or_default();
                    section = Section::NodeSet(name);
                } else {
                    mesh.face_sets.entry(name.clone()).or_default();
                    section = Section::FaceSet(name);
                }
                continue;
            }
            _ => {}
        }
        match &section {
            Section::None => return Err(perr(line, "data before any section header")),
            Section::Nodes => {
                if toks.len() != 4 {
                    return Err(perr(line, "node line needs `id x y z`"));
                }
                let id: usize = num(toks[0], line)?;
                if id != mesh.nodes.len() {
                    return Err(perr(line, format!("node id {id} out of sequence")));
                }
                mesh.nodes.push(Point3::new(num(toks[1], line)?, num(toks[2], line)?, num(toks[3], line)?));
            }
            Section::Cells => {
                if toks.len() < 3 {
                    return Err(perr(line, "cell line too short"));
                }
                let id: usize = num(toks[0], line)?;
                if id != mesh.cells.len() {
                    return Err(perr(line, format!("cell id {id} out of sequence")));
                }
                let kind = CellKind::parse(toks[1]).map_err(|e| perr(line, e.to_string()))?;
                let n = kind.n_nodes();
                if toks.len() != n + 3 {
                    return Err(perr(line, format!("{} needs {n} nodes and a region", kind.name())));
                }
                let nodes = toks[2..2 + n].iter().map(|t| num(t, line)).collect::<Result<Vec<usize>>>()?;
                let region = num(toks[2 + n], line)?;
                mesh.cells.push(Cell { kind, nodes, region });
            }
            Section::Faults => {
                let id: usize = num(toks[0], line)?;
                if id != raw_faults.len() {
                    return Err(perr(line, format!("fault face id {id} out of sequence")));
                }
                let kind = FaceKind::parse(toks.get(1).copied().unwrap_or("")).map_err(|e| perr(line, e.to_string()))?;
                let n = kind.n_nodes();
                if toks.len() != 2 * n + 4 && toks.len() != 2 * n + 5 {
                    return Err(perr(line, "fault face line has wrong length"));
                }
                let ids = toks[2..].iter().map(|t| num(t, line)).collect::<Result<Vec<usize>>>()?;
                let fault = ids.get(2 * n + 2).copied().unwrap_or(0);
                raw_faults.push((line, kind, ids[..n].to_vec(), ids[n..2 * n].to_vec(), ids[2 * n], ids[2 * n + 1], fault));
            }
            Section::NodeSet(name) => {
                let ids = toks.iter().map(|t| num(t, line)).collect::<Result<Vec<usize>>>()?;
                mesh.node_sets.get_mut(name).expect("created").extend(ids);
            }
            Section::FaceSet(name) => {
                if toks.len() != 2 {
                    return Err(perr(line, "face set entry needs `cell face`"));
                }
                let bf = BoundaryFace { cell: num(toks[0], line)?, face: num(toks[1], line)? };
                mesh.face_sets.get_mut(name).expect("created").push(bf);
            }
        }
    }
    for (line, kind, minus_nodes, plus_nodes, mc, pc, fault) in raw_faults {
        if mc >= mesh.cells.len() || pc >= mesh.cells.len() {
            return Err(perr(line, "fault face references unknown cell"));
        }
        if minus_nodes.iter().chain(&plus_nodes).any(|&i| i >= mesh.nodes.len()) {
            return Err(perr(line, "fault face references unknown node"));
        }
        let find_face = |c: usize, nodes: &[usize]| {
            let mut want = nodes.to_vec();
            want.sort_unstable();
            (0..mesh.cells[c].kind.n_faces()).find(|&f| {
                let mut k = mesh.face_node_ids(c, f);
                k.sort_unstable();
                k == want
            })
        };
        let mf = find_face(mc, &minus_nodes).ok_or_else(|| perr(line, "minus nodes are not a face of the minus cell"))?;
        let pf = find_face(pc, &plus_nodes).ok_or_else(|| perr(line, "plus nodes are not a face of the plus cell"))?;
        let coords: Vec<_> = minus_nodes.iter().map(|&i| mesh.nodes[i]).collect();
        let id = mesh.fault_faces.len();
        let (frame, area) = compute_face_frame(&coords, id)?;
        let s: Vector3<f64> = coords.iter().map(|p| p.coords).sum();
        mesh.fault_faces.push(FaultFace {
            kind,
            minus_nodes,
            plus_nodes,
            minus_cell: mc,
            plus_cell: pc,
            minus_face: mf,
            plus_face: pf,
            frame,
            area,
            centroid: Point3::from(s / coords.len() as f64),
            fault,
        });
    }
    mesh.validate()?;
    Ok(mesh)
}

pub fn format_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("NODES\n");
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{i} {:e} {:e} {:e}", p.x, p.y, p.z);
    }
    s.push_str("CELLS\n");
    for (i, c) in mesh.cells.iter().enumerate() {
        let nodes: Vec<String> = c.nodes.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "{i} {} {} {}", c.kind.name(), nodes.join(" "), c.region);
    }
    if !mesh.fault_faces.is_empty() {
        s.push_str("FAULT_FACES\n");
        for (i, f) in mesh.fault_faces.iter().enumerate() {
            let ids: Vec<String> = f.minus_nodes.iter().chain(&f.plus_nodes).map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{i} {} {} {} {} {}", f.kind.name(), ids.join(" "), f.minus_cell, f.plus_cell, f.fault);
        }
    }
    for (name, set) in &mesh.node_sets {
        let _ = writeln!(s, "NODESET {name}");
        for chunk in set.chunks(16) {
            let ids: Vec<String> = chunk.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{}", ids.join(" "));
        }
    }
    for (name, set) in &mesh.face_sets {
        let _ = writeln!(s, "FACESET {name}");
        for bf in set {
            let _ = writeln!(s, "{} {}", bf.cell, bf.face);
        }
    }
    s
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    crate::output::write_atomic(path.as_ref(), format_mesh(mesh).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_hex_grid, FaultPlane};

    #[test]
    fn round_trip() {
        let m = build_structured_hex_grid([2.0, 1.0, 1.0], [2, 2, 1], &[FaultPlane::new(0, 1.0)], &[]).unwrap();
        let back = parse_mesh(&format_mesh(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn negative_jacobian_rejected() {
        let text = "NODES\n0 0 0 0\n1 1 0 0\n2 1 1 0\n3 0 1 0\n4 0 0 1\n5 1 0 1\n6 1 1 1\n7 0 1 1\nCELLS\n0 hex8 4 5 6 7 0 1 2 3 0\n";
        assert!(matches!(parse_mesh(text), Err(Error::NonPositiveJacobian { cell: 0, .. })));
    }

    #[test]
    fn parse_errors_carry_line() {
        let text = "# header\nNODES\n0 0 0 0\n1 x 0 0\n";
        assert!(matches!(parse_mesh(text), Err(Error::Parse { line: 4, .. })));
        assert!(matches!(parse_mesh("CELLS\n0 pyramid 0 1 2 3 4 0\n"), Err(Error::Parse { line: 2, .. })));
    }
}
