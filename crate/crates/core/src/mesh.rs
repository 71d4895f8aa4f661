//! Conforming meshes with split-node fault surfaces.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::fem::{CellKind, Element, FaceKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub kind: CellKind,
    pub nodes: Vec<usize>,
    pub region: i32,
}

/// Orthonormal frame of a fault face; `n` points from the minus to the plus side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFrame {
    pub n: Vector3<f64>,
    pub m1: Vector3<f64>,
    pub m2: Vector3<f64>,
}

impl FaceFrame {
    /// Columns (n, m1, m2): maps local components to global.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.n, self.m1, self.m2])
    }

    pub fn to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.n.dot(v), self.m1.dot(v), self.m2.dot(v))
    }

    pub fn to_global(&self, t: &Vector3<f64>) -> Vector3<f64> {
        self.n * t[0] + self.m1 * t[1] + self.m2 * t[2]
    }

    /// |n·m1| + |n·m2| + |m1·m2|
    pub fn orthogonality_defect(&self) -> f64 {
        self.n.dot(&self.m1).abs() + self.n.dot(&self.m2).abs() + self.m1.dot(&self.m2).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultFace {
    pub kind: FaceKind,
    pub minus_nodes: Vec<usize>,
    pub plus_nodes: Vec<usize>,
    pub minus_cell: usize,
    pub plus_cell: usize,
    pub minus_face: usize,
    pub plus_face: usize,
    pub frame: FaceFrame,
    pub area: f64,
    pub centroid: Point3<f64>,
    /// Index of the fault surface this face belongs to.
    pub fault: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoundaryFace {
    pub cell: usize,
    pub face: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point3<f64>>,
    pub cells: Vec<Cell>,
    pub fault_faces: Vec<FaultFace>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    pub face_sets: BTreeMap<String, Vec<BoundaryFace>>,
}

/// Frame and area of a face whose nodes are ordered counter-clockwise seen
/// from the side `n` points to.
pub fn compute_face_frame(coords: &[Point3<f64>], face_id: usize) -> Result<(FaceFrame, f64)> {
    let kind = match coords.len() {
        3 => FaceKind::Tri3,
        4 => FaceKind::Quad4,
        _ => return Err(Error::Mesh(format!("face {face_id}: {} nodes", coords.len()))),
    };
    let (_, area) = crate::fem::face_weights(kind, coords);
    let raw = match kind {
        FaceKind::Tri3 => (coords[1] - coords[0]).cross(&(coords[2] - coords[0])),
        FaceKind::Quad4 => (coords[2] - coords[0]).cross(&(coords[3] - coords[1])),
    };
    let scale = coords.iter().map(|c| (c - coords[0]).norm()).fold(0.0, f64::max);
    if !(area > 1e-14 * scale * scale) || raw.norm() == 0.0 {
        return Err(Error::DegenerateFace { face: face_id, area });
    }
    let n = raw.normalize();
    let mut axis = 0;
    for k in 1..3 {
        if n[k].abs() < n[axis].abs() {
            axis = k;
        }
    }
    let e = Vector3::ith(axis, 1.0);
    let m1 = (e - n * n.dot(&e)).normalize();
    let m2 = n.cross(&m1);
    Ok((FaceFrame { n, m1, m2 }, area))
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn cell_coords(&self, c: usize) -> Vec<Point3<f64>> {
        self.cells[c].nodes.iter().map(|&i| self.nodes[i]).collect()
    }

    pub fn face_coords(&self, c: usize, face: usize) -> Vec<Point3<f64>> {
        let cell = &self.cells[c];
        cell.kind.faces()[face].iter().map(|&l| self.nodes[cell.nodes[l]]).collect()
    }

    pub fn face_node_ids(&self, c: usize, face: usize) -> Vec<usize> {
        let cell = &self.cells[c];
        cell.kind.faces()[face].iter().map(|&l| cell.nodes[l]).collect()
    }

    pub fn cell_volume(&self, c: usize) -> Result<f64> {
        let coords = self.cell_coords(c);
        Element { id: c, kind: self.cells[c].kind, coords: &coords }.volume()
    }

    /// Characteristic size volume^(1/3).
    pub fn cell_size(&self, c: usize) -> Result<f64> {
        Ok(self.cell_volume(c)?.cbrt())
    }

    pub fn cell_centroid(&self, c: usize) -> Point3<f64> {
        let nodes = &self.cells[c].nodes;
        let s: Vector3<f64> = nodes.iter().map(|&i| self.nodes[i].coords).sum();
        Point3::from(s / nodes.len() as f64)
    }

    pub fn bounding_box(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.nodes {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// Checks every structural and geometric invariant.
    pub fn validate(&self) -> Result<()> {
        let nn = self.nodes.len();
        if self.nodes.iter().any(|p| !p.coords.iter().all(|x| x.is_finite())) {
            return Err(Error::Mesh("non-finite node coordinate".into()));
        }
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.nodes.len() != cell.kind.n_nodes() {
                return Err(Error::Mesh(format!("cell {c}: {} nodes for {}", cell.nodes.len(), cell.kind.name())));
            }
            if cell.nodes.iter().any(|&i| i >= nn) {
                return Err(Error::Mesh(format!("cell {c}: node index out of range")));
            }
            let coords = self.cell_coords(c);
            Element { id: c, kind: cell.kind, coords: &coords }.check_jacobian()?;
        }
        let diam = self.diameter().max(f64::MIN_POSITIVE);
        for (i, f) in self.fault_faces.iter().enumerate() {
            if f.minus_cell == f.plus_cell {
                return Err(Error::Mesh(format!("fault face {i}: minus_cell == plus_cell")));
            }
            if f.minus_nodes != self.face_node_ids(f.minus_cell, f.minus_face) {
                return Err(Error::Mesh(format!("fault face {i}: minus nodes do not match minus cell face")));
            }
            let plus_face: BTreeSet<_> = self.face_node_ids(f.plus_cell, f.plus_face).into_iter().collect();
            if plus_face != f.plus_nodes.iter().copied().collect() {
                return Err(Error::Mesh(format!("fault face {i}: plus nodes do not match plus cell face")));
            }
            for (&a, &b) in f.minus_nodes.iter().zip(&f.plus_nodes) {
                if (self.nodes[a] - self.nodes[b]).norm() > 1e-12 * diam {
                    return Err(Error::Mesh(format!("fault face {i}: copies {a}/{b} not coincident")));
                }
                if a != b && (self.cells[f.minus_cell].nodes.contains(&b) || self.cells[f.plus_cell].nodes.contains(&a)) {
                    return Err(Error::Mesh(format!("fault face {i}: cell references both copies of {a}/{b}")));
                }
            }
            if !(f.area > 0.0) {
                return Err(Error::DegenerateFace { face: i, area: f.area });
            }
            let fr = &f.frame;
            let unit = (fr.n.norm() - 1.0).abs() + (fr.m1.norm() - 1.0).abs() + (fr.m2.norm() - 1.0).abs();
            if fr.orthogonality_defect() > 3e-12 || unit > 3e-12 || (fr.m1.cross(&fr.m2) - fr.n).norm() > 1e-12 {
                return Err(Error::Mesh(format!("fault face {i}: frame not orthonormal/right-handed")));
            }
            let out = self.face_centroid(f.minus_cell, f.minus_face) - self.cell_centroid(f.minus_cell);
            if fr.n.dot(&out) <= 0.0 {
                return Err(Error::Mesh(format!("fault face {i}: normal not outward from minus cell")));
            }
        }
        for (name, set) in &self.node_sets {
            if set.iter().any(|&i| i >= nn) {
                return Err(Error::Mesh(format!("node set {name}: index out of range")));
            }
        }
        for (name, set) in &self.face_sets {
            for bf in set {
                if bf.cell >= self.cells.len() || bf.face >= self.cells[bf.cell].kind.n_faces() {
                    return Err(Error::Mesh(format!("face set {name}: invalid entry")));
                }
            }
        }
        Ok(())
    }

    pub fn face_centroid(&self, c: usize, face: usize) -> Point3<f64> {
        let coords = self.face_coords(c, face);
        let s: Vector3<f64> = coords.iter().map(|p| p.coords).sum();
        Point3::from(s / coords.len() as f64)
    }

    /// Sum of fault-face areas evaluated separately on the minus and plus copies.
    pub fn fault_area_per_side(&self) -> (f64, f64) {
        let mut am = 0.0;
        let mut ap = 0.0;
        for f in &self.fault_faces {
            let cm: Vec<_> = f.minus_nodes.iter().map(|&i| self.nodes[i]).collect();
            let cp: Vec<_> = f.plus_nodes.iter().map(|&i| self.nodes[i]).collect();
            am += crate::fem::face_weights(f.kind, &cm).1;
            ap += crate::fem::face_weights(f.kind, &cp).1;
        }
        (am, ap)
    }

    /// Maps every cell face (as a sorted node key) to its (cell, local face) occurrences.
    fn face_map(&self) -> HashMap<Vec<usize>, Vec<(usize, usize)>> {
        let mut map: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for f in 0..cell.kind.n_faces() {
                map.entry(face_key(cell, f)).or_default().push((c, f));
            }
        }
        map
    }

    /// Cell faces shared by exactly two cells, in (cell, face) order.
    pub fn interior_faces(&self) -> Vec<InteriorFace> {
        let map = self.face_map();
        let mut out = Vec::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for f in 0..cell.kind.n_faces() {
                let occ = &map[&face_key(cell, f)];
                if occ.len() == 2 && occ[0] == (c, f) {
                    let coords = self.face_coords(c, f);
                    let fk = cell.kind.face_kind(f);
                    let st = if fk == FaceKind::Quad4 { [0.0, 0.0] } else { [1.0 / 3.0; 2] };
                    let (_, n) = fk.surface_element(&coords, st);
                    out.push(InteriorFace { cells: [occ[0], occ[1]], centroid: self.face_centroid(c, f), normal: n.normalize() });
                }
            }
        }
        out
    }

    /// Cell faces that belong to exactly one cell and are not fault faces.
    pub fn boundary_faces(&self) -> Vec<BoundaryFace> {
        let map = self.face_map();
        let fault: HashSet<(usize, usize)> = self
            .fault_faces
            .iter()
            .flat_map(|f| [(f.minus_cell, f.minus_face), (f.plus_cell, f.plus_face)])
            .collect();
        let mut out = Vec::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for f in 0..cell.kind.n_faces() {
                if map[&face_key(cell, f)].len() == 1 && !fault.contains(&(c, f)) {
                    out.push(BoundaryFace { cell: c, face: f });
                }
            }
        }
        out
    }
}

fn face_key(cell: &Cell, f: usize) -> Vec<usize> {
    let mut k: Vec<usize> = cell.kind.faces()[f].iter().map(|&l| cell.nodes[l]).collect();
    k.sort_unstable();
    k
}

/// A face shared by two cells; `normal` is the unit outward normal of `cells[0]`.
#[derive(Debug, Clone)]
pub struct InteriorFace {
    pub cells: [(usize, usize); 2],
    pub centroid: Point3<f64>,
    pub normal: Vector3<f64>,
}

/// Marks an interior face as part of fault surface `fault`; the minus cell is
/// the one whose outward normal has a positive component along `orientation`.
#[derive(Debug, Clone, Copy)]
pub struct FaultSelection {
    pub fault: usize,
    pub orientation: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SplitOptions {
    /// Permit edges shared by more than two selected faces (intersecting faults).
    pub allow_junctions: bool,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Duplicates nodes along the selected interior faces.
///
/// Around each node of the selection the incident cells are grouped into
/// components connected through non-selected faces; every component beyond the
/// first receives its own copy. Nodes on the rim of an interior fault keep a
/// single component and stay shared.
pub fn split_fault_nodes<F>(mesh: &Mesh, selector: F, opts: SplitOptions) -> Result<Mesh>
where
    F: Fn(&InteriorFace) -> Option<FaultSelection>,
{
    let mut selected = Vec::new();
    for face in mesh.interior_faces() {
        if let Some(sel) = selector(&face) {
            let (minus, plus) =
                if face.normal.dot(&sel.orientation) >= 0.0 { (face.cells[0], face.cells[1]) } else { (face.cells[1], face.cells[0]) };
            selected.push((minus, plus, sel.fault));
        }
    }
    if selected.is_empty() {
        return Ok(mesh.clone());
    }
    selected.sort_by_key(|s| (s.0, s.2));

    let sel_keys: HashSet<Vec<usize>> = selected.iter().map(|&((c, f), _, _)| face_key(&mesh.cells[c], f)).collect();

    let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &((c, f), _, _) in &selected {
        let ids = mesh.face_node_ids(c, f);
        for k in 0..ids.len() {
            let (a, b) = (ids[k], ids[(k + 1) % ids.len()]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    if !opts.allow_junctions {
        if let Some((&(a, b), _)) = edges.iter().find(|(_, &n)| n > 2) {
            return Err(Error::NonManifoldEdge(a, b));
        }
    }

    let fault_nodes: BTreeSet<usize> =
        selected.iter().flat_map(|&((c, f), _, _)| mesh.face_node_ids(c, f)).collect();
    let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        for &v in &cell.nodes {
            if fault_nodes.contains(&v) {
                incident.entry(v).or_default().push(c);
            }
        }
    }
    let map = mesh.face_map();

    let mut out = mesh.clone();
    let mut orig: Vec<usize> = (0..mesh.nodes.len()).collect();
    let mut copies: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &v in &fault_nodes {
        let cells = &incident[&v];
        let mut uf = UnionFind::new(cells.len());
        for (i, &c) in cells.iter().enumerate() {
            let cell = &mesh.cells[c];
            for f in 0..cell.kind.n_faces() {
                let key = face_key(cell, f);
                if !key.contains(&v) || sel_keys.contains(&key) {
                    continue;
                }
                for &(c2, _) in &map[&key] {
                    if c2 != c {
                        let j = cells.iter().position(|&x| x == c2).expect("neighbour shares v");
                        uf.union(i, j);
                    }
                }
            }
        }
        let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &c) in cells.iter().enumerate() {
            let r = uf.find(i);
            comps.entry(r).or_default().push(c);
        }
        let mut comps: Vec<Vec<usize>> = comps.into_values().collect();
        comps.sort_by_key(|cs| cs.iter().copied().min());
        for comp in comps.iter().skip(1) {
            let id = out.nodes.len();
            out.nodes.push(mesh.nodes[v]);
            orig.push(v);
            copies.entry(v).or_default().push(id);
            for &c in comp {
                for n in out.cells[c].nodes.iter_mut() {
                    if *n == v {
                        *n = id;
                    }
                }
            }
        }
    }

    for set in out.node_sets.values_mut() {
        let extra: Vec<usize> = set.iter().filter_map(|v| copies.get(v)).flatten().copied().collect();
        set.extend(extra);
        set.sort_unstable();
    }

    for &((mc, mf), (pc, pf), fault) in &selected {
        let minus_nodes = out.face_node_ids(mc, mf);
        let plus_ids = out.face_node_ids(pc, pf);
        let plus_nodes: Vec<usize> = minus_nodes
            .iter()
            .map(|&m| *plus_ids.iter().find(|&&p| orig[p] == orig[m]).expect("coincident copy"))
            .collect();
        let coords: Vec<_> = minus_nodes.iter().map(|&i| out.nodes[i]).collect();
        let id = out.fault_faces.len();
        let (frame, area) = compute_face_frame(&coords, id)?;
        let s: Vector3<f64> = coords.iter().map(|p| p.coords).sum();
        out.fault_faces.push(FaultFace {
            kind: out.cells[mc].kind.face_kind(mf),
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
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBox {
    pub tag: i32,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl RegionBox {
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }
}

/// Axis-aligned fault plane `x_axis = coord`, optionally bounded in the two
/// remaining axes (in increasing axis order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultPlane {
    pub axis: usize,
    pub coord: f64,
    pub bounds: Option<[[f64; 2]; 2]>,
    pub fault: usize,
}

impl FaultPlane {
    pub fn new(axis: usize, coord: f64) -> Self {
        Self { axis, coord, bounds: None, fault: 0 }
    }

    fn selects(&self, face: &InteriorFace, tol: f64) -> bool {
        if (face.centroid[self.axis] - self.coord).abs() > tol || face.normal[self.axis].abs() < 1.0 - 1e-9 {
            return false;
        }
        match self.bounds {
            None => true,
            Some(b) => {
                let others: Vec<usize> = (0..3).filter(|&d| d != self.axis).collect();
                others.iter().zip(&b).all(|(&d, r)| face.centroid[d] > r[0] && face.centroid[d] < r[1])
            }
        }
    }
}

const AXES: [char; 3] = ['x', 'y', 'z'];
const SIDE_NAMES: [[&str; 2]; 3] = [["xmin", "xmax"], ["ymin", "ymax"], ["zmin", "zmax"]];

/// Hexes of a tensor-product grid, optionally subdivided into tets (six per
/// hex, all sharing the main diagonal) or wedges (two per hex, triangles in
/// the x-y plane). Emits node and face sets for the six box sides.
pub fn tensor_grid(coords: [&[f64]; 3], kind: CellKind, regions: &[RegionBox]) -> Result<Mesh> {
    let n = [coords[0].len(), coords[1].len(), coords[2].len()];
    if n.iter().any(|&k| k < 2) {
        return Err(Error::Domain("each axis needs at least two grid coordinates".into()));
    }
    for c in coords {
        if c.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("grid coordinates must increase strictly".into()));
        }
    }
    let nid = |i: usize, j: usize, k: usize| i + n[0] * (j + n[1] * k);
    let mut mesh = Mesh::default();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                mesh.nodes.push(Point3::new(coords[0][i], coords[1][j], coords[2][k]));
            }
        }
    }
    for k in 0..n[2] - 1 {
        for j in 0..n[1] - 1 {
            for i in 0..n[0] - 1 {
                let h = [
                    nid(i, j, k),
                    nid(i + 1, j, k),
                    nid(i + 1, j + 1, k),
                    nid(i, j + 1, k),
                    nid(i, j, k + 1),
                    nid(i + 1, j, k + 1),
                    nid(i + 1, j + 1, k + 1),
                    nid(i, j + 1, k + 1),
                ];
                let sub: Vec<(CellKind, Vec<usize>)> = match kind {
                    CellKind::Hex8 => vec![(kind, h.to_vec())],
                    CellKind::Tet4 => [[0, 1, 2, 6], [0, 5, 1, 6], [0, 2, 3, 6], [0, 3, 7, 6], [0, 4, 5, 6], [0, 7, 4, 6]]
                        .iter()
                        .map(|t| (kind, t.iter().map(|&l| h[l]).collect()))
                        .collect(),
                    CellKind::Wedge6 => [[0, 1, 2, 4, 5, 6], [0, 2, 3, 4, 6, 7]]
                        .iter()
                        .map(|t| (kind, t.iter().map(|&l| h[l]).collect()))
                        .collect(),
                };
                for (kind, nodes) in sub {
                    mesh.cells.push(Cell { kind, nodes, region: 0 });
                }
            }
        }
    }
    for c in 0..mesh.cells.len() {
        if kind == CellKind::Tet4 {
            let x = mesh.cell_coords(c);
            if (x[1] - x[0]).cross(&(x[2] - x[0])).dot(&(x[3] - x[0])) < 0.0 {
                mesh.cells[c].nodes.swap(1, 2);
            }
        }
        let cen = mesh.cell_centroid(c);
        if let Some(r) = regions.iter().rev().find(|r| r.contains(&cen)) {
            mesh.cells[c].region = r.tag;
        }
    }
    let tol: Vec<f64> = (0..3).map(|d| 1e-9 * (coords[d][n[d] - 1] - coords[d][0])).collect();
    for d in 0..3 {
        for (s, name) in SIDE_NAMES[d].iter().enumerate() {
            let x = if s == 0 { coords[d][0] } else { coords[d][n[d] - 1] };
            let nodes = (0..mesh.nodes.len()).filter(|&i| (mesh.nodes[i][d] - x).abs() <= tol[d]).collect();
            mesh.node_sets.insert(name.to_string(), nodes);
        }
    }
    for bf in mesh.boundary_faces() {
        let fc = mesh.face_coords(bf.cell, bf.face);
        for d in 0..3 {
            for (s, name) in SIDE_NAMES[d].iter().enumerate() {
                let x = if s == 0 { coords[d][0] } else { coords[d][n[d] - 1] };
                if fc.iter().all(|p| (p[d] - x).abs() <= tol[d]) {
                    mesh.face_sets.entry(name.to_string()).or_default().push(bf);
                }
            }
        }
    }
    Ok(mesh)
}

/// Tensor grid with the given fault planes split.
pub fn build_tensor_grid(
    coords: [&[f64]; 3],
    kind: CellKind,
    fault_planes: &[FaultPlane],
    regions: &[RegionBox],
    opts: SplitOptions,
) -> Result<Mesh> {
    for p in fault_planes {
        if p.axis > 2 {
            return Err(Error::Domain(format!("fault plane axis {}", p.axis)));
        }
        let c = coords[p.axis];
        let nearest = c.iter().copied().min_by(|a, b| (a - p.coord).abs().total_cmp(&(b - p.coord).abs())).unwrap();
        let span = c[c.len() - 1] - c[0];
        if (nearest - p.coord).abs() > 1e-9 * span || p.coord <= c[0] || p.coord >= c[c.len() - 1] {
            return Err(Error::FaultPlaneNotAligned { axis: AXES[p.axis], coord: p.coord, nearest });
        }
    }
    let grid = tensor_grid(coords, kind, regions)?;
    let tols: Vec<f64> = (0..3).map(|d| 1e-9 * (coords[d][coords[d].len() - 1] - coords[d][0])).collect();
    split_fault_nodes(
        &grid,
        |face| {
            fault_planes
                .iter()
                .find(|p| p.selects(face, tols[p.axis]))
                .map(|p| FaultSelection { fault: p.fault, orientation: Vector3::ith(p.axis, 1.0) })
        },
        opts,
    )
}

/// Uniform hex grid on [0, extents] with split fault planes.
pub fn build_structured_hex_grid(
    extents: [f64; 3],
    divisions: [usize; 3],
    fault_planes: &[FaultPlane],
    regions: &[RegionBox],
) -> Result<Mesh> {
    if divisions.iter().any(|&d| d == 0) || extents.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Domain("divisions and extents must be positive".into()));
    }
    let axes: Vec<Vec<f64>> =
        (0..3).map(|d| (0..=divisions[d]).map(|i| extents[d] * i as f64 / divisions[d] as f64).collect()).collect();
    build_tensor_grid([&axes[0], &axes[1], &axes[2]], CellKind::Hex8, fault_planes, regions, SplitOptions::default())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh2d {
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<i32>,
}

/// Extrudes a planar triangulation along z into wedges. Node sets `zmin`/`zmax`
/// hold the two caps.
pub fn extrude_triangulation(tri: &TriMesh2d, thickness: f64, layers: usize) -> Result<Mesh> {
    if layers == 0 || !(thickness > 0.0) {
        return Err(Error::Domain("extrusion needs positive thickness and layers".into()));
    }
    let np = tri.points.len();
    let mut mesh = Mesh::default();
    for l in 0..=layers {
        let z = thickness * l as f64 / layers as f64;
        for p in &tri.points {
            mesh.nodes.push(Point3::new(p[0], p[1], z));
        }
    }
    for (t, tr) in tri.triangles.iter().enumerate() {
        if tr.iter().any(|&i| i >= np) {
            return Err(Error::Mesh(format!("triangle {t}: node index out of range")));
        }
        let [a, b, c] = tr.map(|i| tri.points[i]);
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let mut tr = *tr;
        if area2 < 0.0 {
            tr.swap(1, 2);
        } else if area2 == 0.0 {
            return Err(Error::NonPositiveJacobian { cell: t, det: 0.0 });
        }
        let region = tri.regions.get(t).copied().unwrap_or(0);
        for l in 0..layers {
            let lo = l * np;
            let hi = (l + 1) * np;
            mesh.cells.push(Cell {
                kind: CellKind::Wedge6,
                nodes: vec![lo + tr[0], lo + tr[1], lo + tr[2], hi + tr[0], hi + tr[1], hi + tr[2]],
                region,
            });
        }
    }
    mesh.node_sets.insert("zmin".into(), (0..np).collect());
    mesh.node_sets.insert("zmax".into(), (layers * np..(layers + 1) * np).collect());
    for (c, cell) in mesh.cells.iter().enumerate() {
        let layer = c % layers;
        if layer == 0 {
            mesh.face_sets.entry("zmin".into()).or_default().push(BoundaryFace { cell: c, face: 0 });
        }
        if layer == layers - 1 {
            mesh.face_sets.entry("zmax".into()).or_default().push(BoundaryFace { cell: c, face: 1 });
        }
        debug_assert_eq!(cell.kind, CellKind::Wedge6);
    }
    mesh.validate()?;
    Ok(mesh)
}
