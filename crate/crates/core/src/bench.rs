//! Benchmark problems, closed-form oracles, profile error norms and
//! convergence studies.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};

use crate::bubble::{estimate_infsup, full_block_matrix, recover_bubble_increments, static_condense};
use crate::contact::{kkt_check, ContactState, FaceContactState, FrictionParams};
use crate::error::{Error, Result};
use crate::fem::{CellKind, ElasticMaterial};
use crate::mesh::{build_tensor_grid, BoundaryFace, FaultPlane, Mesh, RegionBox, SplitOptions};
use crate::output::{fmt_num, CsvTable, FaultProfileRecord};
use crate::solver::{
    default_penalty, solve, DirichletBc, LoadStep, NeumannBc, ProblemDefinition, Solution, Solver, SolverConfig,
};

pub const MPA: f64 = 1e6;

/// Graded axis: uniform spacing `h` on [-inner, inner], growing geometrically
/// by `ratio` out to ±outer. Symmetric about 0.
pub fn graded_axis(h: f64, inner: f64, outer: f64, ratio: f64) -> Vec<f64> {
    let n_in = (inner / h).round().max(1.0) as usize;
    let mut pos: Vec<f64> = (0..=n_in).map(|i| i as f64 * h).collect();
    let mut x = n_in as f64 * h;
    let mut step = h;
    while x < outer - 1e-9 * outer {
        step *= ratio;
        let remaining = outer - x;
        if remaining < 1.5 * step {
            x = outer;
        } else {
            x += step;
        }
        pos.push(x);
    }
    let mut axis: Vec<f64> = pos.iter().skip(1).rev().map(|v| -v).collect();
    axis.extend(pos);
    axis
}

fn uniform_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn face_subset(mesh: &Mesh, set: &str, keep: impl Fn(&nalgebra::Point3<f64>) -> bool) -> Vec<BoundaryFace> {
    mesh.face_sets[set].iter().copied().filter(|bf| keep(&mesh.face_centroid(bf.cell, bf.face))).collect()
}

// ---------------------------------------------------------------- inclined fault

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclinedFaultParams {
    pub e: f64,
    pub nu: f64,
    /// Angle between the compression axis and the fault (degrees).
    pub alpha_deg: f64,
    pub b: f64,
    pub theta_deg: f64,
    pub sigma: f64,
}

impl Default for InclinedFaultParams {
    fn default() -> Self {
        Self { e: 1e5, nu: 0.4, alpha_deg: 20.0, b: 1.0, theta_deg: 30.0, sigma: 1.0 }
    }
}

/// (t_N, slip) at distance ξ ∈ [0, 2b] from one tip.
pub fn inclined_fault_analytic(p: &InclinedFaultParams, xi: f64) -> Result<(f64, f64)> {
    if !(0.0..=2.0 * p.b).contains(&xi) {
        return Err(Error::Domain(format!("ξ={xi} outside [0, {}]", 2.0 * p.b)));
    }
    let a = p.alpha_deg.to_radians();
    let t_n = -p.sigma * a.sin().powi(2);
    let drive = p.sigma * a.sin() * (a.cos() - a.sin() * p.theta_deg.to_radians().tan());
    let slip = 4.0 * (1.0 - p.nu * p.nu) / p.e * drive * (p.b * p.b - (p.b - xi).powi(2)).max(0.0).sqrt();
    Ok((t_n, slip))
}

/// Grid spacing on the fault for refinement level `level` (0-based).
pub fn inclined_fault_h(p: &InclinedFaultParams, level: usize) -> f64 {
    2.0 * p.b / (20usize << level) as f64
}

/// Plane-strain slab of side 40b in fault-aligned coordinates (fault on
/// y = 0, |x| ≤ b), one element thick, clamped far boundary with the
/// uniaxial far-field stress applied as prestress.
pub fn inclined_fault_case(p: &InclinedFaultParams, h: f64, kind: CellKind) -> Result<ProblemDefinition> {
    if !(p.alpha_deg > 0.0 && p.alpha_deg < 90.0) || !(p.b > 0.0) {
        return Err(Error::Domain("inclined fault needs 0 < α < 90° and b > 0".into()));
    }
    let x = graded_axis(h, 1.5 * p.b, 20.0 * p.b, 1.2);
    let y = graded_axis(h, 0.5 * p.b, 20.0 * p.b, 1.2);
    let z = [0.0, h];
    let plane = FaultPlane { axis: 1, coord: 0.0, bounds: Some([[-p.b * (1.0 + 1e-9), p.b * (1.0 + 1e-9)], [-1.0, 2.0 * h]]), fault: 0 };
    let mesh = build_tensor_grid([&x, &y, &z], kind, &[plane], &[], SplitOptions::default())?;
    let mat = ElasticMaterial::new(p.e, p.nu)?;
    let fr = FrictionParams::from_degrees(0.0, p.theta_deg)?;
    let mut prob = ProblemDefinition::new(mesh, mat, fr, true)?;
    let a = p.alpha_deg.to_radians();
    let d = Vector3::new(a.cos(), a.sin(), 0.0);
    let mut s0 = -(d * d.transpose()) * p.sigma;
    s0[(2, 2)] = p.nu * (s0[(0, 0)] + s0[(1, 1)]);
    prob.initial_stress = vec![s0; prob.mesh.cells.len()];
    let mut dir = Vec::new();
    for set in ["xmin", "xmax", "ymin", "ymax"] {
        for c in 0..3 {
            dir.push(DirichletBc { set: set.into(), component: c, value: 0.0 });
        }
    }
    for set in ["zmin", "zmax"] {
        dir.push(DirichletBc { set: set.into(), component: 2, value: 0.0 });
    }
    prob.steps = vec![LoadStep { dirichlet: dir, ..Default::default() }];
    Ok(prob)
}

// ---------------------------------------------------------------- vertical fault

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalFaultParams {
    pub a: f64,
    pub b: f64,
    pub height: f64,
    pub width: f64,
    pub shear_modulus: f64,
    pub nu: f64,
    pub theta_deg: f64,
    pub pressure: f64,
    pub biot: f64,
}

impl Default for VerticalFaultParams {
    fn default() -> Self {
        Self {
            a: 75.0,
            b: 150.0,
            height: 4500.0,
            width: 4500.0,
            shear_modulus: 6500.0 * MPA,
            nu: 0.15,
            theta_deg: 30.0,
            pressure: -25.0 * MPA,
            biot: 0.9,
        }
    }
}

impl VerticalFaultParams {
    /// C = (1−2ν)αp / (2π(1−ν))
    pub fn c(&self) -> f64 {
        (1.0 - 2.0 * self.nu) * self.biot * self.pressure / (2.0 * std::f64::consts::PI * (1.0 - self.nu))
    }

    /// A = G·2π(1−ν)
    pub fn a_coef(&self) -> f64 {
        self.shear_modulus * 2.0 * std::f64::consts::PI * (1.0 - self.nu)
    }
}

/// ‖t_T‖ of the bonded fault at depth y.
pub fn vertical_fault_traction(p: &VerticalFaultParams, y: f64) -> Result<f64> {
    let (a, b) = (p.a, p.b);
    if [a, -a, b, -b].iter().any(|s| (y - s).abs() <= 1e-12 * b) {
        return Err(Error::Domain(format!("traction is singular at y={y}")));
    }
    let arg = (y - a).powi(2) * (y + a).powi(2) / ((y - b).powi(2) * (y + b).powi(2));
    Ok((p.c() / 2.0 * arg.ln()).abs())
}

/// Slip of the frictionless fault at depth y: |C|(b−a)/A on the overlap,
/// linear to zero across the bands a < |y| < b.
pub fn vertical_fault_slip(p: &VerticalFaultParams, y: f64) -> f64 {
    let s = p.c().abs() / p.a_coef();
    let ay = y.abs();
    if ay <= p.a {
        s * (p.b - p.a)
    } else if ay < p.b {
        s * (p.b - ay)
    } else {
        0.0
    }
}

pub fn vertical_fault_h(level: usize) -> f64 {
    18.75 / (1usize << level) as f64
}

/// Which physical response the vertical-fault run targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerticalFaultMode {
    /// Fault held by cohesion: traction oracle.
    Bonded,
    /// Frictionless fault: slip oracle.
    Frictionless,
}

/// Plane-strain section: fault on x = 0 spanning the full height, depth along
/// y, reservoir compartments (−a, b) left and (−b, a) right carrying the
/// eigenstress −αp𝟙. Rollers on the outer boundary, initial stress
/// σ₀ = −σ_h(e_x⊗e_x + e_z⊗e_z) keeps the fault closed.
pub fn vertical_fault_case(p: &VerticalFaultParams, h: f64, kind: CellKind, mode: VerticalFaultMode) -> Result<ProblemDefinition> {
    if !(0.0 < p.a && p.a < p.b && p.b < p.height / 2.0) {
        return Err(Error::Domain("vertical fault needs 0 < a < b < H/2".into()));
    }
    let x = graded_axis(h, 1.5 * p.b, p.width / 2.0, 1.2);
    let y = graded_axis(h, 1.5 * p.b, p.height / 2.0, 1.2);
    let z = [0.0, h];
    let big = 1e9;
    let regions = [
        RegionBox { tag: 1, min: [-big, -p.a, -big], max: [0.0, p.b, big] },
        RegionBox { tag: 2, min: [0.0, -p.b, -big], max: [big, p.a, big] },
    ];
    let mesh = build_tensor_grid([&x, &y, &z], kind, &[FaultPlane::new(0, 0.0)], &regions, SplitOptions::default())?;
    let mat = ElasticMaterial::from_shear(p.shear_modulus, p.nu)?;
    let fr = match mode {
        VerticalFaultMode::Bonded => FrictionParams::from_degrees(1e3 * MPA, p.theta_deg)?,
        VerticalFaultMode::Frictionless => FrictionParams::new(0.0, 0.0)?,
    };
    let mut prob = ProblemDefinition::new(mesh, mat, fr, true)?;
    let sh = 100.0 * MPA;
    let s0 = Matrix3::from_diagonal(&Vector3::new(-sh, 0.0, -sh));
    prob.initial_stress = vec![s0; prob.mesh.cells.len()];
    prob.biot = prob.mesh.cells.iter().map(|c| if c.region > 0 { p.biot } else { 0.0 }).collect();
    let mut step = LoadStep::default();
    for (set, c) in [("xmin", 0), ("xmax", 0), ("ymin", 1), ("ymax", 1), ("zmin", 2), ("zmax", 2)] {
        step.dirichlet.push(DirichletBc { set: set.into(), component: c, value: 0.0 });
    }
    step.pressure = BTreeMap::from([(1, p.pressure), (2, p.pressure)]);
    prob.steps = vec![step];
    Ok(prob)
}

// ---------------------------------------------------------------- small cases

/// 8×20×20 m prism, vertical crack at x = 4, 10 load steps.
pub fn stick_slip_open_case(kind: CellKind) -> Result<ProblemDefinition> {
    let x = uniform_axis(0.0, 8.0, 4);
    let y = uniform_axis(0.0, 20.0, 10);
    let z = uniform_axis(0.0, 20.0, 10);
    let mut mesh = build_tensor_grid([&x, &y, &z], kind, &[FaultPlane::new(0, 4.0)], &[], SplitOptions::default())?;
    let top_right = face_subset(&mesh, "zmax", |c| c.x > 4.0);
    mesh.face_sets.insert("zmax_right".into(), top_right);
    let mat = ElasticMaterial::new(450.0 * MPA, 0.3)?;
    let fr = FrictionParams::from_degrees(0.0, 30.0)?;
    let mut prob = ProblemDefinition::new(mesh, mat, fr, true)?;
    let s0x = -5.0 * MPA;
    prob.initial_stress = vec![Matrix3::from_diagonal(&Vector3::new(s0x, 0.0, 0.0)); prob.mesh.cells.len()];
    // The base is clamped; both x faces carry the confining stress so the
    // initial state is in equilibrium.
    let dir: Vec<DirichletBc> =
        (0..3).map(|c| DirichletBc { set: "zmin".into(), component: c, value: 0.0 }).collect();
    prob.steps = (0..=10)
        .map(|k| {
            let (sx, sz) = sso_loads(k);
            LoadStep {
                dirichlet: dir.clone(),
                neumann: vec![
                    NeumannBc { set: "xmin".into(), traction: Vector3::new(-s0x, 0.0, 0.0) },
                    NeumannBc { set: "xmax".into(), traction: Vector3::new(s0x + sx, 0.0, 0.0) },
                    NeumannBc { set: "zmax_right".into(), traction: Vector3::new(0.0, 0.0, sz) },
                ],
                ..Default::default()
            }
        })
        .collect();
    Ok(prob)
}

/// (σ_x, σ_z) applied at step k: 0 → (−15, −5) MPa at k = 5 → (15, 5) MPa at k = 10.
pub fn sso_loads(k: usize) -> (f64, f64) {
    let k = k as f64;
    if k <= 5.0 {
        (-3.0 * k * MPA, -k * MPA)
    } else {
        ((-15.0 + 6.0 * (k - 5.0)) * MPA, (-5.0 + 2.0 * (k - 5.0)) * MPA)
    }
}

pub const CONSTANT_SLIP: f64 = 0.1;

/// Two stacked blocks with a horizontal fault; the bottom is clamped and the
/// top is moved rigidly by (0.1, 0.1, 0) m.
pub fn constant_slip_case(kind: CellKind, n: usize) -> Result<ProblemDefinition> {
    let x = uniform_axis(0.0, 1.0, n);
    let z = uniform_axis(0.0, 2.0, 2 * n);
    let mesh = build_tensor_grid([&x, &x, &z], kind, &[FaultPlane::new(2, 1.0)], &[], SplitOptions::default())?;
    let mat = ElasticMaterial::new(250.0 * MPA, 0.3)?;
    let fr = FrictionParams::from_degrees(0.0, 5.71)?;
    let mut prob = ProblemDefinition::new(mesh, mat, fr, true)?;
    let mut step = LoadStep::default();
    for c in 0..3 {
        step.dirichlet.push(DirichletBc { set: "zmin".into(), component: c, value: 0.0 });
        let v = if c < 2 { CONSTANT_SLIP } else { 0.0 };
        step.dirichlet.push(DirichletBc { set: "zmax".into(), component: c, value: v });
    }
    prob.steps = vec![step];
    Ok(prob)
}

/// T-shaped fracture pair on an `n`×`n`×2 grid of 10 m cells: a frictional
/// horizontal fracture (fault 0) and a pressurized vertical one (fault 1)
/// ending at its midpoint. Remote compression σ_x = −10 MPa; the vertical
/// fracture pressure ramps to 20 MPa over 10 steps.
pub fn t_crack_case(n: usize) -> Result<ProblemDefinition> {
    if n < 4 || n % 4 != 0 {
        return Err(Error::Domain("t-crack grid size must be a positive multiple of 4".into()));
    }
    let l = 10.0 * n as f64;
    let x = uniform_axis(0.0, l, n);
    let z = uniform_axis(0.0, 20.0, 2);
    let e = 1e-6 * l;
    let planes = [
        FaultPlane { axis: 1, coord: l / 2.0, bounds: Some([[l / 4.0 - e, 3.0 * l / 4.0 + e], [-1.0, 21.0]]), fault: 0 },
        FaultPlane { axis: 0, coord: l / 2.0, bounds: Some([[l / 4.0 - e, l / 2.0 + e], [-1.0, 21.0]]), fault: 1 },
    ];
    let mesh = build_tensor_grid([&x, &x, &z], CellKind::Hex8, &planes, &[], SplitOptions { allow_junctions: true })?;
    let mat = ElasticMaterial::new(10e3 * MPA, 0.25)?;
    let fr = FrictionParams::from_degrees(0.0, 30.0)?;
    let mut prob = ProblemDefinition::new(mesh, mat, fr, true)?;
    let sx = -10.0 * MPA;
    prob.initial_stress = vec![Matrix3::from_diagonal(&Vector3::new(sx, 0.0, 0.0)); prob.mesh.cells.len()];
    let dir = vec![
        DirichletBc { set: "xmin".into(), component: 0, value: 0.0 },
        DirichletBc { set: "ymin".into(), component: 1, value: 0.0 },
        DirichletBc { set: "zmin".into(), component: 2, value: 0.0 },
        DirichletBc { set: "zmax".into(), component: 2, value: 0.0 },
    ];
    prob.steps = (1..=10)
        .map(|k| LoadStep {
            dirichlet: dir.clone(),
            neumann: vec![NeumannBc { set: "xmax".into(), traction: Vector3::new(sx, 0.0, 0.0) }],
            fault_pressure: BTreeMap::from([(1, 2.0 * MPA * k as f64)]),
            ..Default::default()
        })
        .collect();
    Ok(prob)
}

// ---------------------------------------------------------------- error norms

/// One face of a numerical fault profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub xi: f64,
    pub area: f64,
    pub value: f64,
}

/// Face-area-weighted relative L2 error over faces with `keep(ξ)`.
pub fn fault_l2_error(profile: &[ProfileSample], analytic: impl Fn(f64) -> Result<f64>, keep: impl Fn(f64) -> bool) -> Result<f64> {
    if profile.is_empty() {
        return Err(Error::Domain("empty profile".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for s in profile.iter().filter(|s| keep(s.xi)) {
        let v = analytic(s.xi)?;
        num += s.area * (s.value - v).powi(2);
        den += s.area * v * v;
    }
    if den == 0.0 {
        return Err(Error::Domain("analytic profile has zero norm on the selected faces".into()));
    }
    Ok((num / den).sqrt())
}

/// Keeps the central `fraction` of [0, length].
pub fn central_window(length: f64, fraction: f64) -> impl Fn(f64) -> bool {
    move |xi| (xi - 0.5 * length).abs() <= 0.5 * fraction * length
}

/// Least-squares slope of log(err) against log(h); `None` when every error is zero.
pub fn fit_rate(h: &[f64], err: &[f64]) -> Option<f64> {
    if err.iter().all(|&e| e == 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = h.iter().zip(err).filter(|(_, &e)| e > 0.0).map(|(h, e)| (h.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

// ---------------------------------------------------------------- studies

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BenchCase {
    InclinedFault,
    VerticalFault,
    StickSlipOpen,
    ConstantSlip,
    TCrack,
}

impl BenchCase {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "inclined-fault" => Self::InclinedFault,
            "vertical-fault" => Self::VerticalFault,
            "stick-slip-open" | "sso" => Self::StickSlipOpen,
            "constant-slip" => Self::ConstantSlip,
            "t-crack" => Self::TCrack,
            _ => return Err(Error::Domain(format!("unknown benchmark `{s}`"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::InclinedFault => "inclined-fault",
            Self::VerticalFault => "vertical-fault",
            Self::StickSlipOpen => "stick-slip-open",
            Self::ConstantSlip => "constant-slip",
            Self::TCrack => "t-crack",
        }
    }
}

/// Errors of one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub kind: CellKind,
    pub level: usize,
    pub h: f64,
    pub err_traction: f64,
    pub err_slip: f64,
    pub profile: Vec<FaultProfileRecord>,
    pub newton: usize,
    /// Faces failing the contact conditions (see [`kkt_failures`]) over all runs of the level.
    pub kkt_failures: usize,
    pub n_faces: usize,
    pub seconds: f64,
}

/// Relative traction tolerance of the KKT checks on benchmark runs.
pub const KKT_REL_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub case: BenchCase,
    pub kind: CellKind,
    pub levels: Vec<LevelResult>,
    pub rate_traction: Option<f64>,
    pub rate_slip: Option<f64>,
}

impl ErrorReport {
    pub fn new(case: BenchCase, kind: CellKind, levels: Vec<LevelResult>) -> Self {
        let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let et: Vec<f64> = levels.iter().map(|l| l.err_traction).collect();
        let es: Vec<f64> = levels.iter().map(|l| l.err_slip).collect();
        Self { case, kind, rate_traction: fit_rate(&h, &et), rate_slip: fit_rate(&h, &es), levels }
    }
}

/// CSV of (case, kind, h, err_traction, err_slip, rate); the rate column holds
/// the pairwise traction rate against the previous level.
pub fn error_table(reports: &[ErrorReport]) -> CsvTable {
    let mut t = CsvTable::new(&["case", "kind", "h", "err_traction", "err_slip", "rate"]);
    for r in reports {
        for (i, l) in r.levels.iter().enumerate() {
            let rate = if i == 0 {
                String::new()
            } else {
                let p = &r.levels[i - 1];
                fmt_num((l.err_traction / p.err_traction).ln() / (l.h / p.h).ln())
            };
            t.push(vec![r.case.name().into(), r.kind.name().into(), fmt_num(l.h), fmt_num(l.err_traction), fmt_num(l.err_slip), rate]);
        }
    }
    t
}

fn profile(mesh: &Mesh, faces: &[FaceContactState], xi: impl Fn(&nalgebra::Point3<f64>) -> f64) -> Vec<FaultProfileRecord> {
    mesh.fault_faces
        .iter()
        .zip(faces)
        .enumerate()
        .map(|(i, (ff, st))| FaultProfileRecord { face: i, centroid: ff.centroid, xi: xi(&ff.centroid), state: *st })
        .collect()
}

fn samples(mesh: &Mesh, prof: &[FaultProfileRecord], value: impl Fn(&FaceContactState) -> f64) -> Vec<ProfileSample> {
    prof.iter().map(|r| ProfileSample { xi: r.xi, area: mesh.fault_faces[r.face].area, value: value(&r.state) }).collect()
}

pub fn inclined_fault_level(p: &InclinedFaultParams, kind: CellKind, level: usize, cfg: &SolverConfig) -> Result<LevelResult> {
    let t0 = Instant::now();
    let h = inclined_fault_h(p, level);
    let prob = inclined_fault_case(p, h, kind)?;
    // Strains here are ~σ/E = 1e-5; the E-scaled residual floor would be far too coarse.
    let cfg = SolverConfig { newton_atol: cfg.newton_atol.or(Some(1e-10 * p.sigma * h * h)), ..cfg.clone() };
    let sol = solve(&prob, &cfg)?;
    let prof = profile(&prob.mesh, &sol.faces, |c| c.x + p.b);
    let l = 2.0 * p.b;
    let tn = samples(&prob.mesh, &prof, |s| s.t[0]);
    let sl = samples(&prob.mesh, &prof, |s| s.dg_t.norm());
    let err_traction = fault_l2_error(&tn, |xi| Ok(inclined_fault_analytic(p, xi)?.0), central_window(l, 0.9))?;
    let err_slip = fault_l2_error(&sl, |xi| Ok(inclined_fault_analytic(p, xi)?.1), |_| true)?;
    Ok(LevelResult {
        kind,
        level,
        h,
        err_traction,
        err_slip,
        kkt_failures: kkt_failures(&prob, &sol.faces, KKT_REL_TOL),
        n_faces: sol.faces.len(),
        profile: prof,
        newton: sol.report.total_newton(),
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Traction error from the bonded run, slip error from the frictionless run.
pub fn vertical_fault_level(p: &VerticalFaultParams, kind: CellKind, level: usize, cfg: &SolverConfig) -> Result<LevelResult> {
    let t0 = Instant::now();
    let h = vertical_fault_h(level);
    let bonded = vertical_fault_case(p, h, kind, VerticalFaultMode::Bonded)?;
    let sb = solve(&bonded, cfg)?;
    let free = vertical_fault_case(p, h, kind, VerticalFaultMode::Frictionless)?;
    let sf = solve(&free, cfg)?;
    let prof_b = profile(&bonded.mesh, &sb.faces, |c| c.y);
    let prof_f = profile(&free.mesh, &sf.faces, |c| c.y);
    // Faces whose depth extent comes within one face width of ±a or ±b are
    // dropped from the traction norm.
    let far: Vec<FaultProfileRecord> = prof_b
        .iter()
        .filter(|r| {
            let ff = &bonded.mesh.fault_faces[r.face];
            let ys = ff.minus_nodes.iter().map(|&n| bonded.mesh.nodes[n].y);
            let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), y| (l.min(y), u.max(y)));
            let w = hi - lo;
            [p.a, -p.a, p.b, -p.b].iter().all(|&s| (lo - s).max(s - hi) > w * (1.0 + 1e-9))
        })
        .cloned()
        .collect();
    let tt = samples(&bonded.mesh, &far, |s| s.t.fixed_rows::<2>(1).norm());
    let sl = samples(&free.mesh, &prof_f, |s| s.dg_t.norm());
    let err_traction = fault_l2_error(&tt, |y| vertical_fault_traction(p, y), |_| true)?;
    let err_slip = fault_l2_error(&sl, |y| Ok(vertical_fault_slip(p, y)), |_| true)?;
    let mut prof = prof_b;
    for (r, f) in prof.iter_mut().zip(&prof_f) {
        r.state.dg_t = f.state.dg_t;
    }
    Ok(LevelResult {
        kind,
        level,
        h,
        err_traction,
        err_slip,
        kkt_failures: kkt_failures(&bonded, &sb.faces, KKT_REL_TOL) + kkt_failures(&free, &sf.faces, KKT_REL_TOL),
        n_faces: sb.faces.len() + sf.faces.len(),
        profile: prof,
        newton: sb.report.total_newton() + sf.report.total_newton(),
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Runs `levels` refinements for each kind. Any failing level aborts the study.
pub fn convergence_study(case: BenchCase, levels: usize, kinds: &[CellKind], cfg: &SolverConfig) -> Result<Vec<ErrorReport>> {
    if levels < 3 {
        return Err(Error::Domain("a convergence study needs at least 3 levels".into()));
    }
    let mut out = Vec::new();
    for &kind in kinds {
        let mut lv = Vec::new();
        for level in 0..levels {
            lv.push(match case {
                BenchCase::InclinedFault => inclined_fault_level(&InclinedFaultParams::default(), kind, level, cfg)?,
                BenchCase::VerticalFault => vertical_fault_level(&VerticalFaultParams::default(), kind, level, cfg)?,
                _ => return Err(Error::Domain(format!("{} has no analytic reference", case.name()))),
            });
        }
        out.push(ErrorReport::new(case, kind, lv));
    }
    Ok(out)
}

/// Runs a case at its default size, or with `cells` cells per edge where the
/// case has a size parameter (constant slip, T-crack).
pub fn run_case(case: BenchCase, kind: CellKind, cells: Option<usize>, cfg: &SolverConfig) -> Result<(ProblemDefinition, Solution)> {
    let prob = match case {
        BenchCase::StickSlipOpen => stick_slip_open_case(kind)?,
        BenchCase::ConstantSlip => constant_slip_case(kind, cells.unwrap_or(6))?,
        BenchCase::TCrack => t_crack_case(cells.unwrap_or(T_CRACK_CELLS))?,
        BenchCase::InclinedFault => inclined_fault_case(&InclinedFaultParams::default(), inclined_fault_h(&InclinedFaultParams::default(), 1), kind)?,
        BenchCase::VerticalFault => vertical_fault_case(&VerticalFaultParams::default(), vertical_fault_h(0), kind, VerticalFaultMode::Bonded)?,
    };
    let sol = solve(&prob, cfg)?;
    Ok((prob, sol))
}

/// Default T-crack grid; the full-size run uses 300.
pub const T_CRACK_CELLS: usize = 40;

/// Count of faces per state.
pub fn state_counts(faces: &[FaceContactState]) -> [usize; 3] {
    let mut c = [0; 3];
    for f in faces {
        c[match f.state {
            ContactState::Stick => 0,
            ContactState::Slip => 1,
            ContactState::Open => 2,
        }] += 1;
    }
    c
}

/// Unit cube cut by a horizontal fault at mid-height, `n` cells per edge.
pub fn two_block_mesh(kind: CellKind, n: usize) -> Result<Mesh> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::Domain("two-block mesh needs an even cell count ≥ 2".into()));
    }
    let x = uniform_axis(0.0, 1.0, n);
    build_tensor_grid([&x, &x, &x], kind, &[FaultPlane::new(2, 0.5)], &[], SplitOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSupRow {
    pub h: f64,
    pub enriched: f64,
    pub plain: f64,
}

/// β_h with and without bubbles on the two-block mesh, top and bottom clamped,
/// for `levels` successive refinements starting from 2 cells per edge.
pub fn infsup_study(kind: CellKind, levels: usize) -> Result<Vec<InfSupRow>> {
    (0..levels)
        .map(|l| {
            let n = 2 << l;
            let mesh = two_block_mesh(kind, n)?;
            let mut fixed: Vec<usize> = mesh.node_sets["zmin"].iter().chain(&mesh.node_sets["zmax"]).copied().collect();
            fixed.sort_unstable();
            fixed.dedup();
            Ok(InfSupRow {
                h: 1.0 / n as f64,
                enriched: estimate_infsup(&mesh, &fixed, true)?,
                plain: estimate_infsup(&mesh, &fixed, false)?,
            })
        })
        .collect()
}

pub fn infsup_table(kind: CellKind, rows: &[InfSupRow]) -> CsvTable {
    let mut t = CsvTable::new(&["kind", "h", "beta_enriched", "beta_unenriched"]);
    for r in rows {
        t.push(vec![kind.name().into(), fmt_num(r.h), fmt_num(r.enriched), fmt_num(r.plain)]);
    }
    t
}

// ---------------------------------------------------------------- verification

/// Faces failing any contact condition; the traction tolerance is `rel_tol`
/// times the largest face traction (or 1e-12·E on an unloaded fault).
pub fn kkt_failures(prob: &ProblemDefinition, faces: &[FaceContactState], rel_tol: f64) -> usize {
    let e = prob.materials.iter().map(|m| m.e).fold(0.0, f64::max);
    let tmax = faces.iter().map(|f| f.t.norm()).fold(0.0, f64::max);
    let tol = rel_tol * tmax.max(1e-12 * e / rel_tol);
    faces
        .iter()
        .zip(prob.friction.iter().zip(&prob.penalty))
        .filter(|(f, (fr, pen))| !kkt_check(f, fr, pen, tol).is_empty())
        .count()
}

/// Two unit blocks stacked along z on an `n`×`n`×`2n` grid; the bottom is
/// clamped and the top pushed down and sideways: the first step sticks, the
/// second turns and enlarges the shear until the fault slides.
pub fn sheared_blocks_case(kind: CellKind, n: usize) -> Result<ProblemDefinition> {
    let x = uniform_axis(0.0, 1.0, n);
    let z = uniform_axis(0.0, 2.0, 2 * n);
    let mesh = build_tensor_grid([&x, &x, &z], kind, &[FaultPlane::new(2, 1.0)], &[], SplitOptions::default())?;
    let mut prob = ProblemDefinition::new(mesh, ElasticMaterial::new(1e9, 0.25)?, FrictionParams::from_degrees(0.0, 20.0)?, true)?;
    let step = |sx: f64, sy: f64| {
        let mut st = LoadStep::default();
        for (c, v) in [sx, sy, -2e-3].into_iter().enumerate() {
            st.dirichlet.push(DirichletBc { set: "zmin".into(), component: c, value: 0.0 });
            st.dirichlet.push(DirichletBc { set: "zmax".into(), component: c, value: v });
        }
        st
    };
    prob.steps = vec![step(2e-3, 0.0), step(-6e-3, 3e-3)];
    Ok(prob)
}

/// Linearization of the last step of `prob` at its converged state.
fn last_linearization(prob: &ProblemDefinition, cfg: &SolverConfig) -> Result<crate::solver::system::Assembly> {
    let mut s = Solver::new(prob, cfg.clone())?;
    for (i, st) in prob.steps.iter().enumerate() {
        s.step(i, st)?;
    }
    s.linearize(prob.steps.last().ok_or_else(|| Error::Domain("no load steps".into()))?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensationCheck {
    /// max |x_condensed − x_full| / max |x_full| over displacement and bubble dofs.
    pub rel_diff: f64,
    /// Entries of the dense Schur complement outside the pattern of A_uu.
    pub fill_outside: usize,
    pub n_free: usize,
    pub n_bubble: usize,
}

/// Solves one Newton system of `prob` condensed and as the full block system.
pub fn condensation_check(prob: &ProblemDefinition) -> Result<CondensationCheck> {
    let asm = last_linearization(prob, &SolverConfig::default())?;
    let blocks = &asm.blocks;
    let cond = static_condense(blocks)?;
    let a_hat = cond.a_hat.to_dense();
    let rhs = nalgebra::DVector::from_iterator(cond.r_hat.len(), cond.r_hat.iter().map(|v| -v));
    let du = a_hat.clone().lu().solve(&rhs).ok_or_else(|| Error::LinearSolver("singular condensed matrix".into()))?;
    let db = recover_bubble_increments(&cond, du.as_slice());
    let (a, r) = full_block_matrix(blocks);
    let full = a.lu().solve(&(-r)).ok_or_else(|| Error::LinearSolver("singular block matrix".into()))?;
    let mut x = du.as_slice().to_vec();
    for v in &db {
        x.extend(v.iter());
    }
    let scale = full.amax();
    let rel_diff = x.iter().zip(full.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;

    // Dense Schur complement from the blocks, independent of the sparse update.
    let nu = blocks.a_uu.n;
    let mut schur = blocks.a_uu.to_dense();
    for g in &blocks.groups {
        let s = &g.a_ub * g.a_bb.clone().lu().solve(&g.a_bu).ok_or(Error::SingularBubbleBlock { face: g.face })?;
        for (i, &fi) in g.free.iter().enumerate() {
            for (j, &fj) in g.free.iter().enumerate() {
                schur[(fi, fj)] -= s[(i, j)];
            }
        }
    }
    let pattern = &blocks.a_uu;
    let mut fill_outside = 0;
    for i in 0..nu {
        let cols = &pattern.col_idx[pattern.row_ptr[i]..pattern.row_ptr[i + 1]];
        fill_outside += (0..nu).filter(|&j| schur[(i, j)] != 0.0 && cols.binary_search(&j).is_err()).count();
    }
    Ok(CondensationCheck { rel_diff, fill_outside, n_free: nu, n_bubble: x.len() - nu })
}

/// ‖A − Aᵀ‖_max / ‖A‖_max of the full block matrix of the symmetric variant,
/// and the face states it was assembled at.
pub fn symmetric_assembly_check(prob: &ProblemDefinition) -> Result<(f64, [usize; 3])> {
    let cfg = SolverConfig { symmetric: true, ..SolverConfig::default() };
    let asm = last_linearization(prob, &cfg)?;
    let (a, _) = full_block_matrix(&asm.blocks);
    let asym = (&a - a.transpose()).amax();
    let states: Vec<FaceContactState> =
        asm.faces.iter().map(|f| FaceContactState { state: f.aug.state, ..Default::default() }).collect();
    Ok((asym / a.amax(), state_counts(&states)))
}

/// Uzawa / Newton counts of the stick-slip-open case over penalty scales.
pub fn penalty_sweep(scales: &[f64], cfg: &SolverConfig) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["penalty_scale", "uzawa", "newton", "krylov"]);
    for &s in scales {
        let mut prob = stick_slip_open_case(CellKind::Hex8)?;
        prob.penalty = default_penalty(&prob.mesh, &prob.materials, s)?;
        let sol = solve(&prob, cfg)?;
        let uz: usize = sol.report.steps.iter().map(|r| r.uzawa).sum();
        let kr: usize = sol.report.steps.iter().map(|r| r.krylov).sum();
        t.push(vec![fmt_num(s), uz.to_string(), sol.report.total_newton().to_string(), kr.to_string()]);
    }
    Ok(t)
}
