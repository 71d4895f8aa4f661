//! Face-bubble enrichment, static condensation and the inf-sup estimator.
//!
//! Every fault face carries one vector bubble on each side (minus, plus),
//! supported in the parent cell. Bubble index `2*face + side` owns the three
//! dofs `3*index + c`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fem::{b_block, bubble_quadrature, elasticity_tensor, face_quadrature, stress_to_voigt, CellKind, Element, ElasticMaterial};
use crate::mesh::Mesh;
use crate::solver::linear::DirectSolver;
use crate::solver::sparse::CsrMatrix;

fn product(factors: &[(f64, Vector3<f64>)]) -> (f64, Vector3<f64>) {
    let v: f64 = factors.iter().map(|f| f.0).product();
    let mut g = Vector3::zeros();
    for (i, (_, gi)) in factors.iter().enumerate() {
        let others: f64 = factors.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f.0).product();
        g += gi * others;
    }
    (v, g)
}

fn bubble_eval(kind: CellKind, face: usize, p: &[f64; 3]) -> Result<(f64, Vector3<f64>)> {
    if face >= kind.n_faces() {
        return Err(Error::InvalidFace { kind: kind.name(), face });
    }
    let [x, y, z] = *p;
    let f = match kind {
        CellKind::Hex8 => {
            let axis = face / 2;
            let s = if face % 2 == 0 { -1.0 } else { 1.0 };
            let mut fs = vec![(0.5 * (1.0 + s * p[axis]), Vector3::ith(axis, 0.5 * s))];
            for i in (0..3).filter(|&i| i != axis) {
                fs.push((1.0 - p[i] * p[i], Vector3::ith(i, -2.0 * p[i])));
            }
            product(&fs)
        }
        CellKind::Tet4 => {
            let l = [
                (1.0 - x - y - z, Vector3::new(-1.0, -1.0, -1.0)),
                (x, Vector3::x()),
                (y, Vector3::y()),
                (z, Vector3::z()),
            ];
            let fs: Vec<_> = (0..4).filter(|&i| i != face).map(|i| l[i]).collect();
            product(&fs)
        }
        CellKind::Wedge6 => {
            let l = [(1.0 - x - y, Vector3::new(-1.0, -1.0, 0.0)), (x, Vector3::x()), (y, Vector3::y())];
            match face {
                0 => product(&[(0.5 * (1.0 - z), Vector3::new(0.0, 0.0, -0.5)), l[0], l[1], l[2]]),
                1 => product(&[(0.5 * (1.0 + z), Vector3::new(0.0, 0.0, 0.5)), l[0], l[1], l[2]]),
                _ => {
                    let (a, b) = [(0, 1), (1, 2), (2, 0)][face - 2];
                    product(&[(1.0 - z * z, Vector3::new(0.0, 0.0, -2.0 * z)), l[a], l[b]])
                }
            }
        }
    };
    Ok(f)
}

/// Face bubble of local face `face` at a reference point.
pub fn bubble_value(kind: CellKind, face: usize, p: &[f64; 3]) -> Result<f64> {
    Ok(bubble_eval(kind, face, p)?.0)
}

/// Reference gradient of the face bubble.
pub fn bubble_gradient(kind: CellKind, face: usize, p: &[f64; 3]) -> Result<Vector3<f64>> {
    Ok(bubble_eval(kind, face, p)?.1)
}

/// ∫_φ b dΓ over the physical face.
pub fn face_bubble_integral(el: &Element, face: usize) -> Result<f64> {
    let fk = el.kind.face_kind(face);
    let fc: Vec<_> = el.kind.face_nodes(face)?.iter().map(|&l| el.coords[l]).collect();
    let rule = face_quadrature(fk, true);
    let mut s = 0.0;
    for (st, w) in rule.points.iter().zip(&rule.weights) {
        let (da, _) = fk.surface_element(&fc, *st);
        s += w * da * bubble_value(el.kind, face, &el.kind.face_to_cell(face, *st))?;
    }
    Ok(s)
}

/// Bulk blocks of a cell carrying bubbles on `faces`:
/// K_ub (3n × 3nb), K_bb (3nb × 3nb) and the bubble part of ∫∇ˢη:σ for a uniform σ.
pub fn bubble_element_blocks(
    el: &Element,
    mat: &ElasticMaterial,
    faces: &[usize],
    stress: &Matrix3<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let n = el.kind.n_nodes();
    let nb = faces.len();
    let c = elasticity_tensor(mat);
    let s = stress_to_voigt(stress);
    let rule = bubble_quadrature(el.kind);
    let mut kub = DMatrix::zeros(3 * n, 3 * nb);
    let mut kbb = DMatrix::zeros(3 * nb, 3 * nb);
    let mut fb = DVector::zeros(3 * nb);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let (g, jinv_t, det) = el.gradients(p)?;
        let wd = w * det;
        let mut bb = Vec::with_capacity(nb);
        for &f in faces {
            bb.push(b_block(&(jinv_t * bubble_gradient(el.kind, f, p)?)));
        }
        let cbb: Vec<_> = bb.iter().map(|b| c * b).collect();
        for a in 0..n {
            let ba = b_block(&g[a]).transpose();
            for (k, cb) in cbb.iter().enumerate() {
                let blk = ba * cb * wd;
                kub.view_mut((3 * a, 3 * k), (3, 3)).add_assign(&blk);
            }
        }
        for (i, bi) in bb.iter().enumerate() {
            for (k, cb) in cbb.iter().enumerate() {
                let blk = bi.transpose() * cb * wd;
                kbb.view_mut((3 * i, 3 * k), (3, 3)).add_assign(&blk);
            }
            let fi = bi.transpose() * s * wd;
            fb.rows_mut(3 * i, 3).add_assign(&fi);
        }
    }
    Ok((kub, kbb, fb))
}

trait AddAssign<T> {
    fn add_assign(&mut self, other: &T);
}

impl<R: nalgebra::Dim, C: nalgebra::Dim, RS: nalgebra::Dim, CS: nalgebra::Dim, R2, C2, S2>
    AddAssign<nalgebra::Matrix<f64, R2, C2, S2>> for nalgebra::MatrixViewMut<'_, f64, R, C, RS, CS>
where
    R2: nalgebra::Dim,
    C2: nalgebra::Dim,
    S2: nalgebra::RawStorage<f64, R2, C2>,
{
    fn add_assign(&mut self, other: &nalgebra::Matrix<f64, R2, C2, S2>) {
        for j in 0..self.ncols() {
            for i in 0..self.nrows() {
                self[(i, j)] += other[(i, j)];
            }
        }
    }
}

/// Bubbles coupled through shared cells or shared faces, condensed together.
#[derive(Debug, Clone)]
pub struct BubbleGroup {
    pub bubbles: Vec<usize>,
    pub cells: Vec<usize>,
    /// Sorted global displacement dofs touched by the group's cells.
    pub udofs: Vec<usize>,
    pub k_ub: DMatrix<f64>,
    pub k_bb: DMatrix<f64>,
}

impl BubbleGroup {
    pub fn local_bubble(&self, b: usize) -> usize {
        self.bubbles.binary_search(&b).expect("bubble in group")
    }

    pub fn local_udof(&self, d: usize) -> Option<usize> {
        self.udofs.binary_search(&d).ok()
    }
}

/// For each cell, the (local face, bubble index) pairs it carries.
pub fn cell_bubbles(mesh: &Mesh) -> BTreeMap<usize, Vec<(usize, usize)>> {
    let mut m: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (f, ff) in mesh.fault_faces.iter().enumerate() {
        m.entry(ff.minus_cell).or_default().push((ff.minus_face, 2 * f));
        m.entry(ff.plus_cell).or_default().push((ff.plus_face, 2 * f + 1));
    }
    m
}

/// Groups bubbles and precomputes their bulk stiffness blocks.
pub fn build_bubble_groups(mesh: &Mesh, materials: &[ElasticMaterial]) -> Result<Vec<BubbleGroup>> {
    let nb = 2 * mesh.fault_faces.len();
    let mut parent: Vec<usize> = (0..nb).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let union = |a: usize, b: usize, p: &mut Vec<usize>| {
        let (ra, rb) = (find(p, a), find(p, b));
        if ra != rb {
            p[ra.max(rb)] = ra.min(rb);
        }
    };
    for f in 0..mesh.fault_faces.len() {
        union(2 * f, 2 * f + 1, &mut parent);
    }
    let per_cell = cell_bubbles(mesh);
    for list in per_cell.values() {
        for w in list.windows(2) {
            union(w[0].1, w[1].1, &mut parent);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for b in 0..nb {
        let r = find(&mut parent, b);
        groups.entry(r).or_default().push(b);
    }
    let mut out = Vec::with_capacity(groups.len());
    for bubbles in groups.into_values() {
        let mut cells: Vec<usize> = bubbles
            .iter()
            .map(|&b| {
                let ff = &mesh.fault_faces[b / 2];
                if b % 2 == 0 { ff.minus_cell } else { ff.plus_cell }
            })
            .collect();
        cells.sort_unstable();
        cells.dedup();
        let mut udofs: Vec<usize> =
            cells.iter().flat_map(|&c| mesh.cells[c].nodes.iter().flat_map(|&n| [3 * n, 3 * n + 1, 3 * n + 2])).collect();
        udofs.sort_unstable();
        udofs.dedup();
        let nbd = 3 * bubbles.len();
        let mut g = BubbleGroup { k_ub: DMatrix::zeros(udofs.len(), nbd), k_bb: DMatrix::zeros(nbd, nbd), bubbles, cells, udofs };
        for &c in &g.cells.clone() {
            let list = &per_cell[&c];
            let faces: Vec<usize> = list.iter().map(|x| x.0).collect();
            let coords = mesh.cell_coords(c);
            let el = Element { id: c, kind: mesh.cells[c].kind, coords: &coords };
            let (kub, kbb, _) = bubble_element_blocks(&el, &materials[c], &faces, &Matrix3::zeros())?;
            let nodes = &mesh.cells[c].nodes;
            for (i, &(_, bi)) in list.iter().enumerate() {
                let li = g.local_bubble(bi);
                for (k, &(_, bk)) in list.iter().enumerate() {
                    let lk = g.local_bubble(bk);
                    for a in 0..3 {
                        for b in 0..3 {
                            g.k_bb[(3 * li + a, 3 * lk + b)] += kbb[(3 * i + a, 3 * k + b)];
                        }
                    }
                }
                for (an, &node) in nodes.iter().enumerate() {
                    for a in 0..3 {
                        let row = g.local_udof(3 * node + a).expect("cell dof in group");
                        for b in 0..3 {
                            g.k_ub[(row, 3 * li + b)] += kub[(3 * an + a, 3 * i + b)];
                        }
                    }
                }
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// Per-group dense blocks restricted to free displacement dofs.
#[derive(Debug, Clone)]
pub struct GroupBlocks {
    /// Free-dof indices of the group's free displacement rows.
    pub free: Vec<usize>,
    pub a_ub: DMatrix<f64>,
    pub a_bu: DMatrix<f64>,
    pub a_bb: DMatrix<f64>,
    pub r_b: DVector<f64>,
    /// Representative face id, for error reporting.
    pub face: usize,
}

/// Linearized system over free displacement dofs and bubble dofs.
#[derive(Debug, Clone)]
pub struct SystemBlocks {
    pub a_uu: CsrMatrix,
    pub r_u: Vec<f64>,
    pub groups: Vec<GroupBlocks>,
}

#[derive(Debug, Clone)]
pub struct GroupFactor {
    pub free: Vec<usize>,
    /// A_bb⁻¹ A_bu
    pub x: DMatrix<f64>,
    /// A_bb⁻¹ r_b
    pub y: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub a_hat: CsrMatrix,
    pub r_hat: Vec<f64>,
    pub factors: Vec<GroupFactor>,
}

/// Â = A_uu − A_ub A_bb⁻¹ A_bu, r̂ = r_u − A_ub A_bb⁻¹ r_b.
pub fn static_condense(blocks: &SystemBlocks) -> Result<CondensedSystem> {
    let mut a_hat = blocks.a_uu.clone();
    let mut r_hat = blocks.r_u.clone();
    let mut factors = Vec::with_capacity(blocks.groups.len());
    for g in &blocks.groups {
        let lu = g.a_bb.clone().full_piv_lu();
        let scale = g.a_bb.amax();
        let diag_min = (0..g.a_bb.nrows()).map(|i| lu.u()[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if !(diag_min > 1e-13 * scale) {
            return Err(Error::SingularBubbleBlock { face: g.face });
        }
        let x = lu.solve(&g.a_bu).ok_or(Error::SingularBubbleBlock { face: g.face })?;
        let y = lu.solve(&g.r_b).ok_or(Error::SingularBubbleBlock { face: g.face })?;
        let s = &g.a_ub * &x;
        let t = &g.a_ub * &y;
        for (i, &fi) in g.free.iter().enumerate() {
            r_hat[fi] -= t[i];
            for (j, &fj) in g.free.iter().enumerate() {
                a_hat.add(fi, fj, -s[(i, j)]);
            }
        }
        factors.push(GroupFactor { free: g.free.clone(), x, y });
    }
    Ok(CondensedSystem { a_hat, r_hat, factors })
}

/// δu_b = −A_bb⁻¹(r_b + A_bu δu), one vector per group.
pub fn recover_bubble_increments(cond: &CondensedSystem, delta_u: &[f64]) -> Vec<DVector<f64>> {
    cond.factors
        .iter()
        .map(|f| {
            let du = DVector::from_iterator(f.free.len(), f.free.iter().map(|&i| delta_u[i]));
            -(&f.y + &f.x * du)
        })
        .collect()
}

/// Dense assembly of the uncondensed block system (for verification).
pub fn full_block_matrix(blocks: &SystemBlocks) -> (DMatrix<f64>, DVector<f64>) {
    let nu = blocks.a_uu.n;
    let nb: usize = blocks.groups.iter().map(|g| g.a_bb.nrows()).sum();
    let mut a = DMatrix::zeros(nu + nb, nu + nb);
    let mut r = DVector::zeros(nu + nb);
    a.view_mut((0, 0), (nu, nu)).copy_from(&blocks.a_uu.to_dense());
    r.rows_mut(0, nu).copy_from(&DVector::from_column_slice(&blocks.r_u));
    let mut off = nu;
    for g in &blocks.groups {
        let m = g.a_bb.nrows();
        a.view_mut((off, off), (m, m)).copy_from(&g.a_bb);
        for (i, &fi) in g.free.iter().enumerate() {
            for k in 0..m {
                a[(fi, off + k)] += g.a_ub[(i, k)];
                a[(off + k, fi)] += g.a_bu[(k, i)];
            }
        }
        r.rows_mut(off, m).copy_from(&g.r_b);
        off += m;
    }
    (a, r)
}

/// Discrete inf-sup constant for piecewise-constant vector multipliers on the
/// fault faces against the (optionally enriched) displacement space.
///
/// β² is the smallest eigenvalue of B X⁻¹ Bᵀ μ = λ M μ with X the scaled H¹
/// norm (|v|²₁ + diam⁻²‖v‖²₀) and M = diag(h_φ|φ|) a mesh-dependent
/// surrogate for the H^{-1/2} norm. `fixed_nodes` are clamped.
pub fn estimate_infsup(mesh: &Mesh, fixed_nodes: &[usize], enriched: bool) -> Result<f64> {
    let nf = mesh.fault_faces.len();
    if nf == 0 {
        return Err(Error::Domain("inf-sup estimate needs fault faces".into()));
    }
    let mut fixed = vec![false; mesh.nodes.len()];
    for &n in fixed_nodes {
        fixed[n] = true;
    }
    let mut node_index = vec![usize::MAX; mesh.nodes.len()];
    let mut nfree = 0;
    for (n, f) in fixed.iter().enumerate() {
        if !f {
            node_index[n] = nfree;
            nfree += 1;
        }
    }
    let nu = 3 * nfree;
    let nbub = if enriched { 6 * nf } else { 0 };
    let ntot = nu + nbub;
    let per_cell = cell_bubbles(mesh);
    let diam2 = mesh.diameter().powi(2);

    // Scalar bases of each cell: nodal functions then its bubbles; each gets three dofs.
    let cell_dofs = |c: usize| -> Vec<Option<usize>> {
        let mut d: Vec<Option<usize>> =
            mesh.cells[c].nodes.iter().map(|&n| if fixed[n] { None } else { Some(3 * node_index[n]) }).collect();
        if enriched {
            if let Some(list) = per_cell.get(&c) {
                d.extend(list.iter().map(|&(_, b)| Some(nu + 3 * b)));
            }
        }
        d
    };
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); ntot];
    for c in 0..mesh.cells.len() {
        let d: Vec<usize> = cell_dofs(c).into_iter().flatten().collect();
        for &a in &d {
            for &b in &d {
                for k in 0..3 {
                    rows[a + k].push(b + k);
                }
            }
        }
    }
    let mut x = CsrMatrix::from_rows(ntot, rows);
    for c in 0..mesh.cells.len() {
        let kind = mesh.cells[c].kind;
        let coords = mesh.cell_coords(c);
        let el = Element { id: c, kind, coords: &coords };
        let faces: Vec<usize> = if enriched { per_cell.get(&c).map(|l| l.iter().map(|x| x.0).collect()).unwrap_or_default() } else { vec![] };
        let dofs = cell_dofs(c);
        let rule = bubble_quadrature(kind);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let (g, jinv_t, det) = el.gradients(p)?;
            let mut vals = crate::fem::shape_values(kind, p);
            let mut grads = g;
            for &f in &faces {
                vals.push(bubble_value(kind, f, p)?);
                grads.push(jinv_t * bubble_gradient(kind, f, p)?);
            }
            for (i, di) in dofs.iter().enumerate() {
                let Some(di) = di else { continue };
                for (j, dj) in dofs.iter().enumerate() {
                    let Some(dj) = dj else { continue };
                    let v = w * det * (grads[i].dot(&grads[j]) + vals[i] * vals[j] / diam2);
                    for k in 0..3 {
                        x.add(di + k, dj + k, v);
                    }
                }
            }
        }
    }

    // Columns of Bᵀ: ∫_φ ⟦η⟧·e_c for each face/component.
    let mut bt: DMatrix<f64> = DMatrix::zeros(ntot, 3 * nf);
    let mut mdiag = Vec::with_capacity(3 * nf);
    for (f, ff) in mesh.fault_faces.iter().enumerate() {
        let cm: Vec<_> = ff.minus_nodes.iter().map(|&i| mesh.nodes[i]).collect();
        let (w, area) = crate::fem::face_weights(ff.kind, &cm);
        let h = 0.5 * (mesh.cell_size(ff.minus_cell)? + mesh.cell_size(ff.plus_cell)?);
        for (k, (&m, &p)) in ff.minus_nodes.iter().zip(&ff.plus_nodes).enumerate() {
            for (node, sign) in [(m, -1.0), (p, 1.0)] {
                if !fixed[node] {
                    for c in 0..3 {
                        bt[(3 * node_index[node] + c, 3 * f + c)] += sign * w[k];
                    }
                }
            }
        }
        if enriched {
            for (side, (cell, lf)) in [(ff.minus_cell, ff.minus_face), (ff.plus_cell, ff.plus_face)].into_iter().enumerate() {
                let coords = mesh.cell_coords(cell);
                let el = Element { id: cell, kind: mesh.cells[cell].kind, coords: &coords };
                let beta = face_bubble_integral(&el, lf)?;
                let sign = if side == 0 { -1.0 } else { 1.0 };
                for c in 0..3 {
                    bt[(nu + 3 * (2 * f + side) + c, 3 * f + c)] += sign * beta;
                }
            }
        }
        mdiag.extend([h * area; 3]);
    }

    let mut solver = DirectSolver::default();
    let mut s: DMatrix<f64> = DMatrix::zeros(3 * nf, 3 * nf);
    for j in 0..3 * nf {
        let col: Vec<f64> = bt.column(j).iter().copied().collect();
        let z = solver.solve(&x, &col)?;
        for i in 0..3 * nf {
            s[(i, j)] = (0..ntot).map(|k| bt[(k, i)] * z[k]).sum();
        }
    }
    let ms = DVector::from_iterator(3 * nf, mdiag.iter().map(|m| 1.0 / m.sqrt()));
    let sym = DMatrix::from_fn(3 * nf, 3 * nf, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]) * ms[i] * ms[j]);
    let eig = sym.symmetric_eigenvalues();
    let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(lmin.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    const KINDS: [CellKind; 3] = [CellKind::Hex8, CellKind::Tet4, CellKind::Wedge6];

    #[test]
    fn reference_values() {
        assert!((bubble_value(CellKind::Hex8, 5, &[0.0, 0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let v = bubble_value(CellKind::Tet4, 0, &[1.0 / 3.0; 3]).unwrap();
        assert!((v - 1.0 / 27.0).abs() < 1e-15);
        let v = bubble_value(CellKind::Wedge6, 0, &[1.0 / 3.0, 1.0 / 3.0, -1.0]).unwrap();
        assert!((v - 1.0 / 27.0).abs() < 1e-15);
        assert!(bubble_value(CellKind::Tet4, 4, &[0.0; 3]).is_err());
    }

    #[test]
    fn vanishes_at_vertices_and_other_faces() {
        for kind in KINDS {
            for f in 0..kind.n_faces() {
                for v in kind.ref_nodes() {
                    assert!(bubble_value(kind, f, v).unwrap().abs() < 1e-15);
                }
                for g in (0..kind.n_faces()).filter(|&g| g != f) {
                    let st = if kind.face_kind(g) == crate::fem::FaceKind::Quad4 { [0.3, -0.2] } else { [0.2, 0.3] };
                    let p = kind.face_to_cell(g, st);
                    assert!(bubble_value(kind, f, &p).unwrap().abs() < 1e-15, "{kind:?} {f} {g}");
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = [0.2, 0.15, 0.1];
        for kind in KINDS {
            for f in 0..kind.n_faces() {
                let g = bubble_gradient(kind, f, &p).unwrap();
                for d in 0..3 {
                    let mut a = p;
                    let mut b = p;
                    a[d] += 1e-6;
                    b[d] -= 1e-6;
                    let fd = (bubble_value(kind, f, &a).unwrap() - bubble_value(kind, f, &b).unwrap()) / 2e-6;
                    assert!((fd - g[d]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn face_integrals_positive() {
        for kind in KINDS {
            let c: Vec<Point3<f64>> = kind.ref_nodes().iter().map(|p| Point3::new(p[0], p[1], p[2])).collect();
            let el = Element { id: 0, kind, coords: &c };
            for f in 0..kind.n_faces() {
                assert!(face_bubble_integral(&el, f).unwrap() > 0.0);
            }
        }
        // Unit tet face opposite vertex 0 has area √3/2; ∫λ1λ2λ3 = 2·area/5! · 1 = area/60.
        let c: Vec<Point3<f64>> = CellKind::Tet4.ref_nodes().iter().map(|p| Point3::new(p[0], p[1], p[2])).collect();
        let el = Element { id: 0, kind: CellKind::Tet4, coords: &c };
        let area = 3f64.sqrt() / 2.0;
        assert!((face_bubble_integral(&el, 0).unwrap() - area / 60.0).abs() < 1e-15);
    }

    #[test]
    fn condensation_identity_without_coupling() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]));
        let blocks = SystemBlocks { a_uu: a.clone(), r_u: vec![1.0, 2.0], groups: vec![] };
        let c = static_condense(&blocks).unwrap();
        assert_eq!(c.a_hat, a);
        assert_eq!(c.r_hat, vec![1.0, 2.0]);
    }

    #[test]
    fn condensation_matches_block_solve() {
        let a_uu = DMatrix::from_fn(4, 4, |i, j| if i == j { 4.0 } else { 1.0 / (1.0 + (i + j) as f64) });
        let a_ub = DMatrix::from_fn(4, 3, |i, j| 0.1 * (i as f64 - j as f64));
        let a_bb = DMatrix::from_fn(3, 3, |i, j| if i == j { 3.0 } else { 0.2 });
        let blocks = SystemBlocks {
            a_uu: CsrMatrix::from_dense(&DMatrix::from_element(4, 4, 1.0).component_mul(&a_uu)),
            r_u: vec![1.0, -1.0, 0.5, 0.0],
            groups: vec![GroupBlocks {
                free: vec![0, 1, 2, 3],
                a_ub: a_ub.clone(),
                a_bu: a_ub.transpose() * 1.5,
                a_bb,
                r_b: DVector::from_vec(vec![0.3, 0.0, -0.2]),
                face: 0,
            }],
        };
        let cond = static_condense(&blocks).unwrap();
        let rhs: Vec<f64> = cond.r_hat.iter().map(|v| -v).collect();
        let du = cond.a_hat.to_dense().lu().solve(&DVector::from_vec(rhs)).unwrap();
        let db = recover_bubble_increments(&cond, du.as_slice());
        let (a, r) = full_block_matrix(&blocks);
        let full = a.clone().lu().solve(&(-&r)).unwrap();
        for i in 0..4 {
            assert!((full[i] - du[i]).abs() < 1e-13);
        }
        for k in 0..3 {
            assert!((full[4 + k] - db[0][k]).abs() < 1e-13);
        }
        let mut sol = DVector::zeros(7);
        sol.rows_mut(0, 4).copy_from(&du);
        sol.rows_mut(4, 3).copy_from(&db[0]);
        assert!((a * sol + r).norm() < 1e-12);
    }

    #[test]
    fn recovery_zero_case() {
        let cond = CondensedSystem {
            a_hat: CsrMatrix::identity(2),
            r_hat: vec![0.0; 2],
            factors: vec![GroupFactor { free: vec![0, 1], x: DMatrix::zeros(3, 2), y: DVector::zeros(3) }],
        };
        assert_eq!(recover_bubble_increments(&cond, &[0.0, 0.0])[0], DVector::zeros(3));
    }

    #[test]
    fn singular_block_reported() {
        let blocks = SystemBlocks {
            a_uu: CsrMatrix::identity(1),
            r_u: vec![0.0],
            groups: vec![GroupBlocks {
                free: vec![0],
                a_ub: DMatrix::zeros(1, 3),
                a_bu: DMatrix::zeros(3, 1),
                a_bb: DMatrix::zeros(3, 3),
                r_b: DVector::zeros(3),
                face: 9,
            }],
        };
        assert!(matches!(static_condense(&blocks), Err(Error::SingularBubbleBlock { face: 9 })));
    }
}
