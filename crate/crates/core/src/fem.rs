//! Reference elements, quadrature and small-strain isotropic elasticity.
//!
//! Strains and stresses use Voigt order `[xx, yy, zz, yz, xz, xy]` with
//! engineering shear strains.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Point3, Vector3, Vector6};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    Hex8,
    Tet4,
    Wedge6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceKind {
    Quad4,
    Tri3,
}

const HEX_NODES: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];
const TET_NODES: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];
const WEDGE_NODES: [[f64; 3]; 6] = [
    [0.0, 0.0, -1.0],
    [1.0, 0.0, -1.0],
    [0.0, 1.0, -1.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
];

// Face node lists are ordered so that the right-hand rule gives the outward normal.
const HEX_FACES: [&[usize]; 6] = [
    &[0, 4, 7, 3],
    &[1, 2, 6, 5],
    &[0, 1, 5, 4],
    &[3, 7, 6, 2],
    &[0, 3, 2, 1],
    &[4, 5, 6, 7],
];
const TET_FACES: [&[usize]; 4] = [&[1, 2, 3], &[0, 3, 2], &[0, 1, 3], &[0, 2, 1]];
const WEDGE_FACES: [&[usize]; 5] = [&[0, 2, 1], &[3, 4, 5], &[0, 1, 4, 3], &[1, 2, 5, 4], &[2, 0, 3, 5]];

impl CellKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hex8" | "hex" => Ok(CellKind::Hex8),
            "tet4" | "tet" => Ok(CellKind::Tet4),
            "wedge6" | "wedge" => Ok(CellKind::Wedge6),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Hex8 => "hex8",
            CellKind::Tet4 => "tet4",
            CellKind::Wedge6 => "wedge6",
        }
    }

    pub fn n_nodes(self) -> usize {
        self.ref_nodes().len()
    }

    pub fn ref_nodes(self) -> &'static [[f64; 3]] {
        match self {
            CellKind::Hex8 => &HEX_NODES,
            CellKind::Tet4 => &TET_NODES,
            CellKind::Wedge6 => &WEDGE_NODES,
        }
    }

    pub fn faces(self) -> &'static [&'static [usize]] {
        match self {
            CellKind::Hex8 => &HEX_FACES,
            CellKind::Tet4 => &TET_FACES,
            CellKind::Wedge6 => &WEDGE_FACES,
        }
    }

    pub fn n_faces(self) -> usize {
        self.faces().len()
    }

    pub fn face_nodes(self, face: usize) -> Result<&'static [usize]> {
        self.faces().get(face).copied().ok_or(Error::InvalidFace { kind: self.name(), face })
    }

    pub fn face_kind(self, face: usize) -> FaceKind {
        if self.faces()[face].len() == 4 {
            FaceKind::Quad4
        } else {
            FaceKind::Tri3
        }
    }

    pub fn ref_volume(self) -> f64 {
        match self {
            CellKind::Hex8 => 8.0,
            CellKind::Tet4 => 1.0 / 6.0,
            CellKind::Wedge6 => 1.0,
        }
    }

    pub fn ref_centroid(self) -> [f64; 3] {
        match self {
            CellKind::Hex8 => [0.0; 3],
            CellKind::Tet4 => [0.25; 3],
            CellKind::Wedge6 => [1.0 / 3.0, 1.0 / 3.0, 0.0],
        }
    }

    /// Whether a reference point lies in the closed reference element.
    pub fn contains(self, p: &[f64; 3], tol: f64) -> bool {
        match self {
            CellKind::Hex8 => p.iter().all(|x| x.abs() <= 1.0 + tol),
            CellKind::Tet4 => p.iter().all(|&x| x >= -tol) && p[0] + p[1] + p[2] <= 1.0 + tol,
            CellKind::Wedge6 => {
                p[0] >= -tol && p[1] >= -tol && p[0] + p[1] <= 1.0 + tol && p[2].abs() <= 1.0 + tol
            }
        }
    }

    /// Maps face-reference coordinates of local face `face` to cell-reference coordinates.
    pub fn face_to_cell(self, face: usize, st: [f64; 2]) -> [f64; 3] {
        let nodes = self.faces()[face];
        let fk = self.face_kind(face);
        let n = fk.shape_values(st);
        let refs = self.ref_nodes();
        let mut p = [0.0; 3];
        for (k, &ln) in nodes.iter().enumerate() {
            for d in 0..3 {
                p[d] += n[k] * refs[ln][d];
            }
        }
        p
    }
}

impl FaceKind {
    pub fn n_nodes(self) -> usize {
        match self {
            FaceKind::Quad4 => 4,
            FaceKind::Tri3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FaceKind::Quad4 => "quad4",
            FaceKind::Tri3 => "tri3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quad4" | "quad" => Ok(FaceKind::Quad4),
            "tri3" | "tri" => Ok(FaceKind::Tri3),
            _ => Err(Error::UnknownKind(s.to_string())),
        }
    }

    /// Quad: (s,t) in [-1,1]², nodes counter-clockwise from (-1,-1).
    /// Tri: (s,t) in the unit triangle, nodes (0,0), (1,0), (0,1).
    pub fn shape_values(self, st: [f64; 2]) -> Vec<f64> {
        let [s, t] = st;
        match self {
            FaceKind::Quad4 => vec![
                0.25 * (1.0 - s) * (1.0 - t),
                0.25 * (1.0 + s) * (1.0 - t),
                0.25 * (1.0 + s) * (1.0 + t),
                0.25 * (1.0 - s) * (1.0 + t),
            ],
            FaceKind::Tri3 => vec![1.0 - s - t, s, t],
        }
    }

    pub fn shape_derivatives(self, st: [f64; 2]) -> Vec<[f64; 2]> {
        let [s, t] = st;
        match self {
            FaceKind::Quad4 => vec![
                [-0.25 * (1.0 - t), -0.25 * (1.0 - s)],
                [0.25 * (1.0 - t), -0.25 * (1.0 + s)],
                [0.25 * (1.0 + t), 0.25 * (1.0 + s)],
                [-0.25 * (1.0 + t), 0.25 * (1.0 - s)],
            ],
            FaceKind::Tri3 => vec![[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Surface element |∂x/∂s × ∂x/∂t| and the (unnormalised) normal at `st`.
    pub fn surface_element(self, coords: &[Point3<f64>], st: [f64; 2]) -> (f64, Vector3<f64>) {
        let d = self.shape_derivatives(st);
        let mut xs = Vector3::zeros();
        let mut xt = Vector3::zeros();
        for (k, c) in coords.iter().enumerate() {
            xs += c.coords * d[k][0];
            xt += c.coords * d[k][1];
        }
        let n = xs.cross(&xt);
        (n.norm(), n)
    }
}

/// Reference-element basis values.
pub fn shape_values(kind: CellKind, p: &[f64; 3]) -> Vec<f64> {
    let [x, y, z] = *p;
    match kind {
        CellKind::Hex8 => HEX_NODES
            .iter()
            .map(|n| 0.125 * (1.0 + x * n[0]) * (1.0 + y * n[1]) * (1.0 + z * n[2]))
            .collect(),
        CellKind::Tet4 => vec![1.0 - x - y - z, x, y, z],
        CellKind::Wedge6 => {
            let l = [1.0 - x - y, x, y];
            let lo = 0.5 * (1.0 - z);
            let hi = 0.5 * (1.0 + z);
            vec![l[0] * lo, l[1] * lo, l[2] * lo, l[0] * hi, l[1] * hi, l[2] * hi]
        }
    }
}

/// Reference-element basis gradients.
pub fn shape_gradients(kind: CellKind, p: &[f64; 3]) -> Vec<Vector3<f64>> {
    let [x, y, z] = *p;
    match kind {
        CellKind::Hex8 => HEX_NODES
            .iter()
            .map(|n| {
                let (a, b, c) = (1.0 + x * n[0], 1.0 + y * n[1], 1.0 + z * n[2]);
                Vector3::new(n[0] * b * c, a * n[1] * c, a * b * n[2]) * 0.125
            })
            .collect(),
        CellKind::Tet4 => vec![
            Vector3::new(-1.0, -1.0, -1.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ],
        CellKind::Wedge6 => {
            let l = [1.0 - x - y, x, y];
            let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            let mut g = Vec::with_capacity(6);
            for (sign, h) in [(-0.5, 0.5 * (1.0 - z)), (0.5, 0.5 * (1.0 + z))] {
                for i in 0..3 {
                    g.push(Vector3::new(dl[i][0] * h, dl[i][1] * h, l[i] * sign));
                }
            }
            g
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

#[derive(Debug, Clone)]
pub struct FaceRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

/// Gauss–Legendre points and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        w[0] = 2.0;
    }
    (x, w)
}

fn tensor_hex(n: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                points.push([x[i], x[j], x[k]]);
                weights.push(w[i] * w[j] * w[k]);
            }
        }
    }
    QuadratureRule { points, weights, degree: (2 * n - 1) as u32 }
}

fn orbit_s31(a: f64) -> Vec<[f64; 4]> {
    let b = 1.0 - 3.0 * a;
    vec![[b, a, a, a], [a, b, a, a], [a, a, b, a], [a, a, a, b]]
}

fn orbit_s22(a: f64) -> Vec<[f64; 4]> {
    let b = 0.5 - a;
    vec![
        [a, a, b, b],
        [a, b, a, b],
        [a, b, b, a],
        [b, a, a, b],
        [b, a, b, a],
        [b, b, a, a],
    ]
}

fn tet_rule(groups: &[(Vec<[f64; 4]>, f64)], degree: u32) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (orbit, w) in groups {
        for l in orbit {
            points.push([l[1], l[2], l[3]]);
            weights.push(*w);
        }
    }
    QuadratureRule { points, weights, degree }
}

/// Symmetric triangle rules on the unit reference triangle.
fn triangle_points(bubble: bool) -> FaceRule {
    if bubble {
        // Strang–Fix 4-point rule, degree 3.
        let w = 25.0 / 96.0;
        FaceRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0], [0.6, 0.2], [0.2, 0.6], [0.2, 0.2]],
            weights: vec![-27.0 / 96.0, w, w, w],
            degree: 3,
        }
    } else {
        FaceRule {
            points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        }
    }
}

/// Dunavant 7-point degree-5 rule on the unit triangle.
fn triangle_degree5() -> FaceRule {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 2400.0;
    let w2 = (155.0 + s15) / 2400.0;
    let mut points = vec![[1.0 / 3.0, 1.0 / 3.0]];
    let mut weights = vec![9.0 / 80.0];
    for (a, w) in [(a1, w1), (a2, w2)] {
        let b = 1.0 - 2.0 * a;
        points.extend([[a, a], [b, a], [a, b]]);
        weights.extend([w; 3]);
    }
    FaceRule { points, weights, degree: 5 }
}

fn wedge_rule(tri: &FaceRule, n_line: usize, degree: u32) -> QuadratureRule {
    let (x, w) = gauss_legendre(n_line);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (zk, wk) in x.iter().zip(&w) {
        for (p, wp) in tri.points.iter().zip(&tri.weights) {
            points.push([p[0], p[1], *zk]);
            weights.push(wp * wk);
        }
    }
    QuadratureRule { points, weights, degree }
}

/// Rules that integrate the bilinear stiffness integrand exactly on affine cells.
pub fn standard_quadrature(kind: CellKind) -> QuadratureRule {
    match kind {
        CellKind::Hex8 => tensor_hex(2),
        CellKind::Tet4 => {
            let a = (5.0 - 5f64.sqrt()) / 20.0;
            tet_rule(&[(orbit_s31(a), 1.0 / 24.0)], 2)
        }
        CellKind::Wedge6 => wedge_rule(&triangle_points(false), 2, 2),
    }
}

/// Rules used for every integral carrying a bubble function.
pub fn bubble_quadrature(kind: CellKind) -> QuadratureRule {
    match kind {
        CellKind::Hex8 => tensor_hex(3),
        CellKind::Tet4 => tet_rule(
            &[
                (orbit_s31(0.092_735_250_310_891_226), 0.012_248_840_519_393_658),
                (orbit_s31(0.310_885_919_263_300_610), 0.018_781_320_953_002_642),
                (orbit_s22(0.454_496_295_874_350_351), 0.007_091_003_462_846_911),
            ],
            5,
        ),
        CellKind::Wedge6 => wedge_rule(&triangle_degree5(), 3, 5),
    }
}

pub fn face_quadrature(kind: FaceKind, bubble: bool) -> FaceRule {
    match kind {
        FaceKind::Quad4 => {
            let n = if bubble { 3 } else { 2 };
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for j in 0..n {
                for i in 0..n {
                    points.push([x[i], x[j]]);
                    weights.push(w[i] * w[j]);
                }
            }
            FaceRule { points, weights, degree: (2 * n - 1) as u32 }
        }
        FaceKind::Tri3 => triangle_points(bubble),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ElasticMaterial {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
}

impl ElasticMaterial {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0) || !(nu > -1.0 && nu < 0.5) {
            return Err(Error::Domain(format!("invalid elastic constants E={e}, nu={nu}")));
        }
        Ok(Self { e, nu })
    }

    pub fn from_shear(g: f64, nu: f64) -> Result<Self> {
        Self::new(2.0 * g * (1.0 + nu), nu)
    }

    pub fn lame(&self) -> (f64, f64) {
        let lambda = self.e * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu));
        let mu = self.e / (2.0 * (1.0 + self.nu));
        (lambda, mu)
    }
}

pub fn elasticity_tensor(mat: &ElasticMaterial) -> Matrix6<f64> {
    let (l, m) = mat.lame();
    let mut c = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = l;
        }
        c[(i, i)] = l + 2.0 * m;
        c[(i + 3, i + 3)] = m;
    }
    c
}

pub fn stress_to_voigt(s: &Matrix3<f64>) -> Vector6<f64> {
    Vector6::new(s[(0, 0)], s[(1, 1)], s[(2, 2)], s[(1, 2)], s[(0, 2)], s[(0, 1)])
}

/// Fills the 6×3 strain-displacement block of one vector basis function.
#[inline]
pub fn b_block(g: &Vector3<f64>) -> nalgebra::Matrix6x3<f64> {
    nalgebra::Matrix6x3::new(
        g.x, 0.0, 0.0, //
        0.0, g.y, 0.0, //
        0.0, 0.0, g.z, //
        0.0, g.z, g.y, //
        g.z, 0.0, g.x, //
        g.y, g.x, 0.0,
    )
}

/// A cell with its physical node coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Element<'a> {
    pub id: usize,
    pub kind: CellKind,
    pub coords: &'a [Point3<f64>],
}

impl Element<'_> {
    /// J[i][j] = ∂x_i/∂ξ_j.
    pub fn jacobian(&self, p: &[f64; 3]) -> Matrix3<f64> {
        let g = shape_gradients(self.kind, p);
        let mut j = Matrix3::zeros();
        for (x, gi) in self.coords.iter().zip(&g) {
            j += x.coords * gi.transpose();
        }
        j
    }

    /// Physical gradients of the nodal basis and det J at a reference point.
    pub fn gradients(&self, p: &[f64; 3]) -> Result<(Vec<Vector3<f64>>, Matrix3<f64>, f64)> {
        let j = self.jacobian(p);
        let det = j.determinant();
        if !(det > 0.0) {
            return Err(Error::NonPositiveJacobian { cell: self.id, det });
        }
        let jinv_t = j.try_inverse().expect("det > 0").transpose();
        let g = shape_gradients(self.kind, p).iter().map(|gr| jinv_t * gr).collect();
        Ok((g, jinv_t, det))
    }

    pub fn map(&self, p: &[f64; 3]) -> Point3<f64> {
        let n = shape_values(self.kind, p);
        let mut x = Vector3::zeros();
        for (c, v) in self.coords.iter().zip(&n) {
            x += c.coords * *v;
        }
        Point3::from(x)
    }

    pub fn volume(&self) -> Result<f64> {
        let rule = standard_quadrature(self.kind);
        let mut v = 0.0;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let (_, _, det) = self.gradients(p)?;
            v += w * det;
        }
        Ok(v)
    }

    pub fn check_jacobian(&self) -> Result<()> {
        let rule = bubble_quadrature(self.kind);
        for p in rule.points.iter().chain(self.kind.ref_nodes()) {
            self.gradients(p)?;
        }
        Ok(())
    }
}

pub fn element_stiffness(el: &Element, mat: &ElasticMaterial) -> Result<DMatrix<f64>> {
    element_stiffness_with(el, mat, &standard_quadrature(el.kind))
}

pub fn element_stiffness_with(el: &Element, mat: &ElasticMaterial, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    let n = el.kind.n_nodes();
    let c = elasticity_tensor(mat);
    let mut k = DMatrix::zeros(3 * n, 3 * n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let (g, _, det) = el.gradients(p)?;
        let cb: Vec<_> = g.iter().map(|gi| c * b_block(gi)).collect();
        for a in 0..n {
            let ba = b_block(&g[a]);
            for b in 0..n {
                let kab = ba.transpose() * cb[b] * (w * det);
                for i in 0..3 {
                    for j in 0..3 {
                        k[(3 * a + i, 3 * b + j)] += kab[(i, j)];
                    }
                }
            }
        }
    }
    Ok(k)
}

/// ∫ ∇ˢη : σ for a uniform stress σ over the cell.
pub fn element_eigenstress_load(el: &Element, stress: &Matrix3<f64>) -> Result<DVector<f64>> {
    let n = el.kind.n_nodes();
    let s = stress_to_voigt(stress);
    let rule = standard_quadrature(el.kind);
    let mut f = DVector::zeros(3 * n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let (g, _, det) = el.gradients(p)?;
        for a in 0..n {
            let fa = b_block(&g[a]).transpose() * s * (w * det);
            for i in 0..3 {
                f[3 * a + i] += fa[i];
            }
        }
    }
    Ok(f)
}

/// Face-integrated nodal weights ∫_φ N_k dΓ and the face area.
pub fn face_weights(kind: FaceKind, coords: &[Point3<f64>]) -> (Vec<f64>, f64) {
    let rule = face_quadrature(kind, false);
    let mut w = vec![0.0; kind.n_nodes()];
    let mut area = 0.0;
    for (st, wq) in rule.points.iter().zip(&rule.weights) {
        let (da, _) = kind.surface_element(coords, *st);
        let n = kind.shape_values(*st);
        for k in 0..w.len() {
            w[k] += wq * da * n[k];
        }
        area += wq * da;
    }
    (w, area)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [CellKind; 3] = [CellKind::Hex8, CellKind::Tet4, CellKind::Wedge6];

    fn ref_coords(kind: CellKind) -> Vec<Point3<f64>> {
        kind.ref_nodes().iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()
    }

    #[test]
    fn hex_center_values() {
        for v in shape_values(CellKind::Hex8, &[0.0; 3]) {
            assert!((v - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn nodal_property() {
        for kind in KINDS {
            for (i, p) in kind.ref_nodes().iter().enumerate() {
                let n = shape_values(kind, p);
                for (j, v) in n.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((v - e).abs() < 1e-14, "{kind:?} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn wedge_centroid_values() {
        for v in shape_values(CellKind::Wedge6, &[1.0 / 3.0, 1.0 / 3.0, 0.0]) {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = [0.21, 0.17, 0.33];
        for kind in KINDS {
            let g = shape_gradients(kind, &p);
            let h = 1e-6;
            for d in 0..3 {
                let mut a = p;
                let mut b = p;
                a[d] += h;
                b[d] -= h;
                let (na, nb) = (shape_values(kind, &a), shape_values(kind, &b));
                for i in 0..kind.n_nodes() {
                    let fd = (na[i] - nb[i]) / (2.0 * h);
                    assert!((fd - g[i][d]).abs() < 1e-9);
                }
            }
            let s: Vector3<f64> = g.iter().sum();
            assert!(s.norm() < 1e-14);
        }
    }

    #[test]
    fn rule_weights_sum_to_reference_measure() {
        for kind in KINDS {
            for rule in [standard_quadrature(kind), bubble_quadrature(kind)] {
                let s: f64 = rule.weights.iter().sum();
                assert!((s - kind.ref_volume()).abs() < 1e-12, "{kind:?}");
                assert!(rule.points.iter().all(|p| kind.contains(p, 1e-12)));
            }
        }
        let hex = standard_quadrature(CellKind::Hex8);
        assert!(hex.weights.iter().all(|w| (w - 1.0).abs() < 1e-15));
        assert_eq!(bubble_quadrature(CellKind::Tet4).points.len(), 14);
        assert_eq!(face_quadrature(FaceKind::Tri3, true).points.len(), 4);
    }

    #[test]
    fn gauss_legendre_moments() {
        for n in 1..=6 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn face_orientation_outward() {
        for kind in KINDS {
            let c = ref_coords(kind);
            let cen = kind.ref_centroid();
            for f in 0..kind.n_faces() {
                let nodes = kind.face_nodes(f).unwrap();
                let fc: Vec<_> = nodes.iter().map(|&i| c[i]).collect();
                let fk = kind.face_kind(f);
                let st = if fk == FaceKind::Quad4 { [0.0, 0.0] } else { [1.0 / 3.0; 2] };
                let (_, n) = fk.surface_element(&fc, st);
                let x = kind.face_to_cell(f, st);
                let d = Vector3::new(x[0] - cen[0], x[1] - cen[1], x[2] - cen[2]);
                assert!(n.dot(&d) > 0.0, "{kind:?} face {f}");
            }
        }
    }

    #[test]
    fn face_rules_integrate_moments() {
        let tri = face_quadrature(FaceKind::Tri3, true);
        // ∫ s t (1-s-t) over the unit triangle = 1/120
        let q: f64 = tri.points.iter().zip(&tri.weights).map(|(p, w)| w * p[0] * p[1] * (1.0 - p[0] - p[1])).sum();
        assert!((q - 1.0 / 120.0).abs() < 1e-15);
        let d5 = triangle_degree5();
        let q: f64 = d5.points.iter().zip(&d5.weights).map(|(p, w)| w * p[0].powi(2) * p[1].powi(3)).sum();
        // 2!3!/(7!) = 12/5040
        assert!((q - 12.0 / 5040.0).abs() < 1e-15);
    }

    #[test]
    fn elasticity_tensor_cases() {
        let c = elasticity_tensor(&ElasticMaterial::new(1.0, 0.0).unwrap());
        let d = Matrix6::from_diagonal(&Vector6::new(1.0, 1.0, 1.0, 0.5, 0.5, 0.5));
        assert!((c - d).norm() < 1e-15);
        let m = ElasticMaterial::new(450e6, 0.3).unwrap();
        let (l, mu) = m.lame();
        assert!((l / 2.5962e8 - 1.0).abs() < 1e-4);
        assert!((mu / 1.7308e8 - 1.0).abs() < 1e-4);
        let c = elasticity_tensor(&m);
        assert_eq!(c, c.transpose());
        assert!(c.cholesky().is_some());
    }

    #[test]
    fn invalid_material_rejected() {
        assert!(ElasticMaterial::new(-1.0, 0.2).is_err());
        assert!(ElasticMaterial::new(1.0, 0.5).is_err());
        assert!(CellKind::parse("pyramid").is_err());
    }

    #[test]
    fn stiffness_symmetry_and_rigid_modes() {
        let mat = ElasticMaterial::new(3.0, 0.25).unwrap();
        for kind in KINDS {
            let mut c = ref_coords(kind);
            for (i, p) in c.iter_mut().enumerate() {
                p.x = 2.0 * p.x + 0.05 * (i as f64).sin();
                p.y += 0.03 * (i as f64).cos();
            }
            let el = Element { id: 0, kind, coords: &c };
            let k = element_stiffness(&el, &mat).unwrap();
            let kmax = k.amax();
            assert!((&k - k.transpose()).amax() <= 1e-12 * kmax);
            let n = kind.n_nodes();
            let modes: Vec<DVector<f64>> = (0..6)
                .map(|m| {
                    DVector::from_fn(3 * n, |r, _| {
                        let x = c[r / 3];
                        let comp = r % 3;
                        if m < 3 {
                            (comp == m) as i32 as f64
                        } else {
                            let w = Vector3::ith(m - 3, 1.0).cross(&x.coords);
                            w[comp]
                        }
                    })
                })
                .collect();
            for v in modes {
                assert!((&k * &v).amax() <= 1e-9 * kmax * v.amax(), "{kind:?}");
            }
        }
    }

    #[test]
    fn inverted_cell_rejected() {
        let mut c = ref_coords(CellKind::Hex8);
        c.swap(0, 6);
        let el = Element { id: 7, kind: CellKind::Hex8, coords: &c };
        assert!(matches!(el.check_jacobian(), Err(Error::NonPositiveJacobian { cell: 7, .. })));
    }

    #[test]
    fn face_weights_partition_area() {
        let c = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(2.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let (w, a) = face_weights(FaceKind::Quad4, &c);
        assert!((a - 2.0).abs() < 1e-14);
        assert!(w.iter().all(|x| (x - 0.5).abs() < 1e-14));
    }
}
