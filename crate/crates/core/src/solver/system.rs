//! Discrete operators: bulk stiffness, interface jump operators, bubble
//! groups, and the per-iteration assembly of residual and Jacobian.

use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector3};

use crate::bubble::{bubble_element_blocks, build_bubble_groups, cell_bubbles, face_bubble_integral, BubbleGroup, GroupBlocks, SystemBlocks};
use crate::contact::{augmented_traction, AugmentedTraction, FrictionParams, JumpOperator, PenaltyParams};
use crate::error::Result;
use crate::fem::{element_eigenstress_load, element_stiffness, face_weights, Element, ElasticMaterial};
use crate::mesh::Mesh;
use crate::solver::sparse::CsrMatrix;

/// Mesh-dependent operators that do not change between iterations.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub n_dofs: usize,
    /// Bulk stiffness over all displacement dofs. The pattern also couples all
    /// dofs of the two cells adjacent to each fault face.
    pub k: CsrMatrix,
    pub jumps: Vec<JumpOperator>,
    pub enriched: bool,
    pub groups: Vec<BubbleGroup>,
    /// bubble index → (group, local bubble)
    pub bubble_loc: Vec<(usize, usize)>,
    /// Mean size of the two cells adjacent to each face.
    pub face_h: Vec<f64>,
}

impl Discretization {
    pub fn new(mesh: &Mesh, materials: &[ElasticMaterial], enriched: bool) -> Result<Self> {
        let n_dofs = mesh.n_dofs();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_dofs];
        let clique = |rows: &mut Vec<Vec<usize>>, nodes: &[usize]| {
            for &a in nodes {
                for i in 0..3 {
                    let r = &mut rows[3 * a + i];
                    for &b in nodes {
                        r.extend([3 * b, 3 * b + 1, 3 * b + 2]);
                    }
                }
            }
        };
        for c in &mesh.cells {
            clique(&mut rows, &c.nodes);
        }
        for ff in &mesh.fault_faces {
            let mut nodes = mesh.cells[ff.minus_cell].nodes.clone();
            nodes.extend(&mesh.cells[ff.plus_cell].nodes);
            nodes.sort_unstable();
            nodes.dedup();
            clique(&mut rows, &nodes);
        }
        let groups = if enriched { build_bubble_groups(mesh, materials)? } else { Vec::new() };
        for g in &groups {
            let mut nodes: Vec<usize> = g.udofs.iter().map(|d| d / 3).collect();
            nodes.dedup();
            clique(&mut rows, &nodes);
        }
        let mut k = CsrMatrix::from_rows(n_dofs, rows);
        for (ci, c) in mesh.cells.iter().enumerate() {
            let coords = mesh.cell_coords(ci);
            let el = Element { id: ci, kind: c.kind, coords: &coords };
            let ke = element_stiffness(&el, &materials[ci])?;
            let dofs: Vec<usize> = c.nodes.iter().flat_map(|&n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
            for (i, &di) in dofs.iter().enumerate() {
                let lo = k.row_ptr[di];
                let hi = k.row_ptr[di + 1];
                for (j, &dj) in dofs.iter().enumerate() {
                    let p = lo + k.col_idx[lo..hi].binary_search(&dj).expect("cell dof in pattern");
                    k.vals[p] += ke[(i, j)];
                }
            }
        }

        let mut jumps = Vec::with_capacity(mesh.fault_faces.len());
        let mut face_h = Vec::with_capacity(mesh.fault_faces.len());
        for ff in &mesh.fault_faces {
            let coords: Vec<_> = ff.minus_nodes.iter().map(|&n| mesh.nodes[n]).collect();
            let (w, area) = face_weights(ff.kind, &coords);
            let mut entries: Vec<(usize, f64)> = Vec::new();
            for (k, (&m, &p)) in ff.minus_nodes.iter().zip(&ff.plus_nodes).enumerate() {
                if m != p {
                    entries.push((m, -w[k]));
                    entries.push((p, w[k]));
                }
            }
            entries.sort_by_key(|e| e.0);
            let mut bubble = [0.0; 2];
            if enriched {
                for (s, (cell, lf)) in [(ff.minus_cell, ff.minus_face), (ff.plus_cell, ff.plus_face)].into_iter().enumerate() {
                    let cc = mesh.cell_coords(cell);
                    let el = Element { id: cell, kind: mesh.cells[cell].kind, coords: &cc };
                    let b = face_bubble_integral(&el, lf)?;
                    bubble[s] = if s == 0 { -b } else { b };
                }
            }
            jumps.push(JumpOperator {
                nodes: entries.iter().map(|e| e.0).collect(),
                weights: entries.iter().map(|e| e.1).collect(),
                bubble,
                area,
                frame: ff.frame,
            });
            face_h.push(0.5 * (mesh.cell_size(ff.minus_cell)? + mesh.cell_size(ff.plus_cell)?));
        }
        let mut bubble_loc = vec![(usize::MAX, 0); if enriched { 2 * mesh.fault_faces.len() } else { 0 }];
        for (gi, g) in groups.iter().enumerate() {
            for (li, &b) in g.bubbles.iter().enumerate() {
                bubble_loc[b] = (gi, li);
            }
        }
        Ok(Self { n_dofs, k, jumps, enriched, groups, bubble_loc, face_h })
    }

    pub fn n_bubble_dofs(&self) -> usize {
        3 * self.bubble_loc.len()
    }

    /// Bubble values of face `f` in jump-operator layout (minus xyz, plus xyz).
    pub fn face_bubbles(&self, ub: &[f64], f: usize) -> Option<[f64; 6]> {
        if !self.enriched {
            return None;
        }
        let mut v = [0.0; 6];
        v.copy_from_slice(&ub[6 * f..6 * f + 6]);
        Some(v)
    }

    /// Global face-averaged jump.
    pub fn face_jump(&self, u: &[f64], ub: &[f64], f: usize) -> Vector3<f64> {
        let b = self.face_bubbles(ub, f);
        self.jumps[f].average_jump(u, b.as_ref().map(|b| &b[..]))
    }

    /// ∫∇ˢη:σ over every cell plus the bubble counterpart per group.
    pub fn eigenstress_loads(
        &self,
        mesh: &Mesh,
        materials: &[ElasticMaterial],
        stress: &[Matrix3<f64>],
    ) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
        let mut f = vec![0.0; self.n_dofs];
        for (ci, c) in mesh.cells.iter().enumerate() {
            if stress[ci] == Matrix3::zeros() {
                continue;
            }
            let coords = mesh.cell_coords(ci);
            let el = Element { id: ci, kind: c.kind, coords: &coords };
            let fe = element_eigenstress_load(&el, &stress[ci])?;
            for (a, &n) in c.nodes.iter().enumerate() {
                for i in 0..3 {
                    f[3 * n + i] += fe[3 * a + i];
                }
            }
        }
        let per_cell = cell_bubbles(mesh);
        let mut fb = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let mut v = DVector::zeros(3 * g.bubbles.len());
            for &c in &g.cells {
                let list = &per_cell[&c];
                let faces: Vec<usize> = list.iter().map(|x| x.0).collect();
                let coords = mesh.cell_coords(c);
                let el = Element { id: c, kind: mesh.cells[c].kind, coords: &coords };
                let (_, _, fe) = bubble_element_blocks(&el, &materials[c], &faces, &stress[c])?;
                for (i, &(_, b)) in list.iter().enumerate() {
                    let li = g.local_bubble(b);
                    for a in 0..3 {
                        v[3 * li + a] += fe[3 * i + a];
                    }
                }
            }
            fb.push(v);
        }
        Ok((f, fb))
    }
}

/// Free-dof numbering for one set of constrained dofs, with the reduced
/// pattern and the map from bulk-stiffness entries into it.
#[derive(Debug, Clone)]
pub struct FreeSpace {
    pub constrained: Vec<usize>,
    pub free_index: Vec<usize>,
    pub free_dofs: Vec<usize>,
    pub pattern: CsrMatrix,
    /// For each stored entry of K: its slot in `pattern`, or `usize::MAX`.
    pub k_map: Vec<usize>,
    /// Per group: (free indices, position in `udofs` for each).
    pub group_free: Vec<(Vec<usize>, Vec<usize>)>,
}

impl FreeSpace {
    pub fn new(disc: &Discretization, constrained: &[usize]) -> Self {
        let mut constrained = constrained.to_vec();
        constrained.sort_unstable();
        constrained.dedup();
        let mut free_index = vec![0usize; disc.n_dofs];
        for &d in &constrained {
            free_index[d] = usize::MAX;
        }
        let mut free_dofs = Vec::with_capacity(disc.n_dofs - constrained.len());
        for (d, fi) in free_index.iter_mut().enumerate() {
            if *fi != usize::MAX {
                *fi = free_dofs.len();
                free_dofs.push(d);
            }
        }
        let k = &disc.k;
        let rows: Vec<Vec<usize>> = free_dofs
            .iter()
            .map(|&d| {
                (k.row_ptr[d]..k.row_ptr[d + 1])
                    .map(|p| free_index[k.col_idx[p]])
                    .filter(|&j| j != usize::MAX)
                    .collect()
            })
            .collect();
        let pattern = CsrMatrix::from_rows(free_dofs.len(), rows);
        let mut k_map = vec![usize::MAX; k.nnz()];
        for (fi, &d) in free_dofs.iter().enumerate() {
            let mut q = pattern.row_ptr[fi];
            for (p, slot) in k_map.iter_mut().enumerate().take(k.row_ptr[d + 1]).skip(k.row_ptr[d]) {
                if free_index[k.col_idx[p]] != usize::MAX {
                    *slot = q;
                    q += 1;
                }
            }
        }
        let group_free = disc
            .groups
            .iter()
            .map(|g| {
                let mut fr = Vec::new();
                let mut pos = Vec::new();
                for (l, &d) in g.udofs.iter().enumerate() {
                    if free_index[d] != usize::MAX {
                        fr.push(free_index[d]);
                        pos.push(l);
                    }
                }
                (fr, pos)
            })
            .collect();
        Self { constrained, free_index, free_dofs, pattern, k_map, group_free }
    }
}

/// Per-face inputs that stay fixed during an assembly.
#[derive(Debug, Clone, Copy)]
pub struct FaceParams<'a> {
    pub friction: &'a [FrictionParams],
    pub penalty: &'a [PenaltyParams],
    pub open_tol: &'a [f64],
    /// Fluid pressure acting on the fault walls, per face.
    pub pressure: &'a [f64],
    pub symmetric: bool,
}

/// Augmented traction evaluated at the current iterate.
#[derive(Debug, Clone, Copy)]
pub struct FaceEval {
    pub aug: AugmentedTraction,
    pub g_glob: Vector3<f64>,
    pub g_n: f64,
    pub dg_t: Vector2<f64>,
}

pub fn evaluate_faces(
    disc: &Discretization,
    u: &[f64],
    ub: &[f64],
    tk: &[Vector3<f64>],
    g_prev: &[Vector3<f64>],
    fp: &FaceParams,
) -> Result<Vec<FaceEval>> {
    (0..disc.jumps.len())
        .map(|f| {
            let frame = &disc.jumps[f].frame;
            let g_glob = disc.face_jump(u, ub, f);
            let gl = frame.to_local(&g_glob);
            let gp = frame.to_local(&g_prev[f]);
            let dg_t = Vector2::new(gl[1] - gp[1], gl[2] - gp[2]);
            let aug = augmented_traction(&tk[f], gl[0], &dg_t, &fp.penalty[f], &fp.friction[f], fp.symmetric, fp.open_tol[f])?;
            Ok(FaceEval { aug, g_glob, g_n: gl[0], dg_t })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Assembly {
    pub blocks: SystemBlocks,
    /// Residual over all displacement dofs (reactions at constrained dofs).
    pub r_all: Vec<f64>,
    pub faces: Vec<FaceEval>,
}

impl Assembly {
    /// ‖(r_u, r_b)‖ over free and bubble dofs.
    pub fn residual_norm(&self) -> f64 {
        let ru: f64 = self.blocks.r_u.iter().map(|v| v * v).sum();
        let rb: f64 = self.blocks.groups.iter().map(|g| g.r_b.norm_squared()).sum();
        (ru + rb).sqrt()
    }
}

/// Residual and consistent Jacobian at (u, u_b) with frozen multipliers `tk`.
///
/// r_u = K u + f + Σ_φ Wᵀ(R t̂ − P n), with W the face-averaged jump operator.
#[allow(clippy::too_many_arguments)]
pub fn assemble(
    disc: &Discretization,
    space: &FreeSpace,
    u: &[f64],
    ub: &[f64],
    load: &[f64],
    bubble_load: &[DVector<f64>],
    tk: &[Vector3<f64>],
    g_prev: &[Vector3<f64>],
    fp: &FaceParams,
) -> Result<Assembly> {
    let k = &disc.k;
    let mut r_all = k.mul(u);
    for (r, f) in r_all.iter_mut().zip(load) {
        *r += f;
    }
    let mut a = space.pattern.clone();
    for (p, &q) in space.k_map.iter().enumerate() {
        if q != usize::MAX {
            a.vals[q] = k.vals[p];
        }
    }

    let mut groups: Vec<GroupBlocks> = Vec::with_capacity(disc.groups.len());
    for (gi, g) in disc.groups.iter().enumerate() {
        let ubg = DVector::from_iterator(3 * g.bubbles.len(), g.bubbles.iter().flat_map(|&b| (0..3).map(move |c| ub[3 * b + c])));
        let ug = DVector::from_iterator(g.udofs.len(), g.udofs.iter().map(|&d| u[d]));
        let ru = &g.k_ub * &ubg;
        for (l, &d) in g.udofs.iter().enumerate() {
            r_all[d] += ru[l];
        }
        let r_b = g.k_ub.tr_mul(&ug) + &g.k_bb * &ubg + &bubble_load[gi];
        let (free, pos) = &space.group_free[gi];
        let a_ub = DMatrix::from_fn(free.len(), g.k_bb.ncols(), |i, j| g.k_ub[(pos[i], j)]);
        groups.push(GroupBlocks {
            free: free.clone(),
            a_bu: a_ub.transpose(),
            a_ub,
            a_bb: g.k_bb.clone(),
            r_b,
            face: g.bubbles[0] / 2,
        });
    }

    let faces = evaluate_faces(disc, u, ub, tk, g_prev, fp)?;
        for (f, (op, ev)) in disc.jumps.iter().zip(&faces).enumerate() {
        let r = op.frame.rotation();
        let t_glob = r * ev.aug.t - op.frame.n * fp.pressure[f];
        let m = r * ev.aug.tangents.local_matrix() * r.transpose() / op.area;
        for (&n, &w) in op.nodes.iter().zip(&op.weights) {
            for c in 0..3 {
                r_all[3 * n + c] += w * t_glob[c];
            }
            for (&n2, &w2) in op.nodes.iter().zip(&op.weights) {
                for i in 0..3 {
                    let fi = space.free_index[3 * n + i];
                    if fi == usize::MAX {
                        continue;
                    }
                    for j in 0..3 {
                        let fj = space.free_index[3 * n2 + j];
                        if fj != usize::MAX {
                            a.add(fi, fj, w * w2 * m[(i, j)]);
                        }
                    }
                }
            }
        }
        if !disc.enriched {
            continue;
        }
        let (gi, _) = disc.bubble_loc[2 * f];
        let blk = &mut groups[gi];
        for s in 0..2 {
            let (_, lb) = disc.bubble_loc[2 * f + s];
            let beta = op.bubble[s];
            for c in 0..3 {
                blk.r_b[3 * lb + c] += beta * t_glob[c];
            }
            for s2 in 0..2 {
                let (_, lb2) = disc.bubble_loc[2 * f + s2];
                let b2 = op.bubble[s2];
                for i in 0..3 {
                    for j in 0..3 {
                        blk.a_bb[(3 * lb + i, 3 * lb2 + j)] += beta * b2 * m[(i, j)];
                    }
                }
            }
            for (&n, &w) in op.nodes.iter().zip(&op.weights) {
                for i in 0..3 {
                    let d = 3 * n + i;
                    if space.free_index[d] == usize::MAX {
                        continue;
                    }
                    let row = blk.free.binary_search(&space.free_index[d]).expect("free face dof in group");
                    for j in 0..3 {
                        blk.a_ub[(row, 3 * lb + j)] += w * beta * m[(i, j)];
                        blk.a_bu[(3 * lb + j, row)] += beta * w * m[(j, i)];
                    }
                }
            }
        }
    }

    let r_u = space.free_dofs.iter().map(|&d| r_all[d]).collect();
    Ok(Assembly { blocks: SystemBlocks { a_uu: a, r_u, groups }, r_all, faces })
}
