//! Global assembly and the nonlinear solution drivers.

pub mod linear;
pub mod sparse;
pub mod system;

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::bubble::{recover_bubble_increments, static_condense};
use crate::contact::{FaceContactState, FrictionParams, PenaltyParams};
use crate::error::{Error, Result};
use crate::fem::{face_weights, ElasticMaterial};
use crate::mesh::Mesh;
use crate::output::{fmt_num, CsvTable};
use linear::{KrylovConfig, LinearMethod, LinearSolver};
use system::{assemble, Assembly, Discretization, FaceParams, FreeSpace};

/// Prescribed total displacement of one component on a node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletBc {
    pub set: String,
    pub component: usize,
    pub value: f64,
}

/// Uniform total traction on a boundary face set.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannBc {
    pub set: String,
    pub traction: Vector3<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadStep {
    pub dirichlet: Vec<DirichletBc>,
    pub neumann: Vec<NeumannBc>,
    /// Pore pressure per cell region (enters as −α p 𝟙).
    pub pressure: BTreeMap<i32, f64>,
    /// Fluid pressure on the walls of each fault (by fault index).
    pub fault_pressure: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone)]
pub struct ProblemDefinition {
    pub mesh: Mesh,
    pub materials: Vec<ElasticMaterial>,
    pub initial_stress: Vec<Matrix3<f64>>,
    pub biot: Vec<f64>,
    pub friction: Vec<FrictionParams>,
    pub penalty: Vec<PenaltyParams>,
    pub enriched: bool,
    pub steps: Vec<LoadStep>,
}

impl ProblemDefinition {
    /// Uniform material, no prestress, default penalties.
    pub fn new(mesh: Mesh, material: ElasticMaterial, friction: FrictionParams, enriched: bool) -> Result<Self> {
        let nc = mesh.cells.len();
        let nf = mesh.fault_faces.len();
        let materials = vec![material; nc];
        let penalty = default_penalty(&mesh, &materials, DEFAULT_PENALTY_SCALE)?;
        Ok(Self {
            mesh,
            materials,
            initial_stress: vec![Matrix3::zeros(); nc],
            biot: vec![0.0; nc],
            friction: vec![friction; nf],
            penalty,
            enriched,
            steps: Vec::new(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let nc = self.mesh.cells.len();
        let nf = self.mesh.fault_faces.len();
        if self.materials.len() != nc || self.initial_stress.len() != nc || self.biot.len() != nc {
            return Err(Error::Domain("per-cell data length does not match the mesh".into()));
        }
        if self.friction.len() != nf || self.penalty.len() != nf {
            return Err(Error::Domain("per-face data length does not match the fault".into()));
        }
        if self.penalty.iter().any(|p| !(p.eps_n > 0.0 && p.eps_t > 0.0)) {
            return Err(Error::Domain("penalty parameters must be positive".into()));
        }
        if self.steps.is_empty() {
            return Err(Error::Domain("no load steps".into()));
        }
        for st in &self.steps {
            for bc in &st.dirichlet {
                if !self.mesh.node_sets.contains_key(&bc.set) {
                    return Err(Error::Config(format!("undefined node set `{}`", bc.set)));
                }
                if bc.component > 2 {
                    return Err(Error::Domain(format!("displacement component {}", bc.component)));
                }
            }
            for bc in &st.neumann {
                if !self.mesh.face_sets.contains_key(&bc.set) {
                    return Err(Error::Config(format!("undefined face set `{}`", bc.set)));
                }
            }
        }
        Ok(())
    }
}

pub const DEFAULT_PENALTY_SCALE: f64 = 10.0;

/// ε_N = ε_T = scale · Ē / h per face, Ē and h averaged over the two adjacent cells.
pub fn default_penalty(mesh: &Mesh, materials: &[ElasticMaterial], scale: f64) -> Result<Vec<PenaltyParams>> {
    mesh.fault_faces
        .iter()
        .map(|ff| {
            let e = 0.5 * (materials[ff.minus_cell].e + materials[ff.plus_cell].e);
            let h = 0.5 * (mesh.cell_size(ff.minus_cell)? + mesh.cell_size(ff.plus_cell)?);
            let eps = penalty_from(scale, e, h)?;
            Ok(PenaltyParams { eps_n: eps, eps_t: eps })
        })
        .collect()
}

/// scale · E / h
pub fn penalty_from(scale: f64, e: f64, h: f64) -> Result<f64> {
    if !(scale > 0.0 && e > 0.0 && h > 0.0) {
        return Err(Error::Domain(format!("penalty from scale={scale}, E={e}, h={h}")));
    }
    Ok(scale * e / h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Nested: Newton to convergence for frozen multipliers, then update.
    Uzawa,
    /// One Newton step per multiplier update.
    Interleaved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub symmetric: bool,
    pub newton_rtol: f64,
    /// Absolute residual floor; defaults to 1e-10·E·h².
    pub newton_atol: Option<f64>,
    pub max_newton: usize,
    pub max_uzawa: usize,
    pub uzawa_tol: f64,
    pub linear: LinearMethod,
    pub krylov: KrylovConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Uzawa,
            symmetric: false,
            newton_rtol: 1e-9,
            newton_atol: None,
            max_newton: 60,
            max_uzawa: 300,
            uzawa_tol: 1e-6,
            linear: LinearMethod::Auto,
            krylov: KrylovConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub uzawa: usize,
    pub newton: usize,
    pub krylov: usize,
    pub residual: f64,
    pub traction_change: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub steps: Vec<StepReport>,
}

impl SolveReport {
    pub fn total_newton(&self) -> usize {
        self.steps.iter().map(|s| s.newton).sum()
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["step", "uzawa_k", "newton_l", "krylov_total", "residual"]);
        for s in &self.steps {
            t.push(vec![s.step.to_string(), s.uzawa.to_string(), s.newton.to_string(), s.krylov.to_string(), fmt_num(s.residual)]);
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    /// Bubble dofs, `3*(2*face + side) + c`.
    pub ub: Vec<f64>,
    pub faces: Vec<FaceContactState>,
    /// Converged face states after every step.
    pub history: Vec<Vec<FaceContactState>>,
    /// Residual at constrained dofs (support reactions), all dofs layout.
    pub reactions: Vec<f64>,
    /// Total applied Neumann force of the last step.
    pub applied_force: Vector3<f64>,
    pub report: SolveReport,
}

/// Maximum number of step halvings in the Newton line search.
const LINE_SEARCH_STEPS: usize = 8;

/// Largest per-face relative change of the multipliers.
pub fn traction_change(old: &[Vector3<f64>], new: &[Vector3<f64>], floor: f64) -> f64 {
    let tmax = old.iter().map(|t| t.norm()).fold(0.0, f64::max);
    old.iter()
        .zip(new)
        .map(|(o, n)| (n - o).norm() / o.norm().max(1e-3 * tmax).max(floor))
        .fold(0.0, f64::max)
}

struct StepData {
    space: FreeSpace,
    load: Vec<f64>,
    bubble_load: Vec<DVector<f64>>,
    pressure: Vec<f64>,
    applied: Vector3<f64>,
}

/// Quasi-static solver state across load steps.
pub struct Solver<'a> {
    pub problem: &'a ProblemDefinition,
    pub config: SolverConfig,
    pub disc: Discretization,
    linear: LinearSolver,
    space: Option<FreeSpace>,
    open_tol: Vec<f64>,
    atol: f64,
    floor: f64,
    min_area: f64,
    pub u: Vec<f64>,
    pub ub: Vec<f64>,
    pub faces: Vec<FaceContactState>,
    /// Full residual of the last converged step.
    pub last_r: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a ProblemDefinition, config: SolverConfig) -> Result<Self> {
        problem.validate()?;
        let mesh = &problem.mesh;
        let disc = Discretization::new(mesh, &problem.materials, problem.enriched)?;
        let e_max = problem.materials.iter().map(|m| m.e).fold(0.0, f64::max);
        let h_min = (0..mesh.cells.len()).map(|c| mesh.cell_size(c)).collect::<Result<Vec<_>>>()?.into_iter().fold(f64::INFINITY, f64::min);
        let atol = config.newton_atol.unwrap_or(1e-10 * e_max * h_min * h_min);
        let open_tol = disc.face_h.iter().zip(&problem.penalty).map(|(h, p)| 1e-12 * p.eps_n * h).collect();
        let linear = LinearSolver::new(config.linear, config.krylov.clone());
        let nf = mesh.fault_faces.len();
        Ok(Self {
            problem,
            linear,
            space: None,
            open_tol,
            atol,
            floor: 1e-12 * e_max,
            min_area: mesh.fault_faces.iter().map(|f| f.area).fold(f64::INFINITY, f64::min).min(1e300),
            u: vec![0.0; disc.n_dofs],
            ub: vec![0.0; disc.n_bubble_dofs()],
            faces: vec![FaceContactState::default(); nf],
            last_r: Vec::new(),
            disc,
            config,
        })
    }

    fn neumann_load(&self, step: &LoadStep) -> Result<(Vec<f64>, Vector3<f64>)> {
        let mesh = &self.problem.mesh;
        let mut f = vec![0.0; self.disc.n_dofs];
        let mut total = Vector3::zeros();
        for bc in &step.neumann {
            for bf in &mesh.face_sets[&bc.set] {
                let kind = mesh.cells[bf.cell].kind.face_kind(bf.face);
                let (w, _) = face_weights(kind, &mesh.face_coords(bf.cell, bf.face));
                for (n, wk) in mesh.face_node_ids(bf.cell, bf.face).into_iter().zip(w) {
                    for c in 0..3 {
                        f[3 * n + c] += wk * bc.traction[c];
                    }
                    total += bc.traction * wk;
                }
            }
        }
        Ok((f, total))
    }

    /// Applies the step's Dirichlet values and builds its loads.
    fn prepare(&mut self, step: &LoadStep) -> Result<StepData> {
        let p = self.problem;
        let mesh = &p.mesh;
        let mut constrained = Vec::new();
        for bc in &step.dirichlet {
            for &n in &mesh.node_sets[&bc.set] {
                let d = 3 * n + bc.component;
                constrained.push(d);
                self.u[d] = bc.value;
            }
        }
        constrained.sort_unstable();
        constrained.dedup();
        if self.space.as_ref().map_or(true, |s| s.constrained != constrained) {
            self.space = Some(FreeSpace::new(&self.disc, &constrained));
        }
        let stress: Vec<Matrix3<f64>> = (0..mesh.cells.len())
            .map(|c| {
                let pp = step.pressure.get(&mesh.cells[c].region).copied().unwrap_or(0.0);
                p.initial_stress[c] - Matrix3::identity() * (p.biot[c] * pp)
            })
            .collect();
        let (mut load, bubble_load) = self.disc.eigenstress_loads(mesh, &p.materials, &stress)?;
        let (fn_, applied) = self.neumann_load(step)?;
        for (l, f) in load.iter_mut().zip(&fn_) {
            *l -= f;
        }
        let pressure: Vec<f64> =
            mesh.fault_faces.iter().map(|ff| step.fault_pressure.get(&ff.fault).copied().unwrap_or(0.0)).collect();
        let space = self.space.take().expect("free space");
        Ok(StepData { space, load, bubble_load, pressure, applied })
    }

    /// Linearized system of `step` at the current state, with the multipliers
    /// and reference jumps of the last converged step. Leaves the state unchanged
    /// apart from the step's Dirichlet values.
    pub fn linearize(&mut self, step: &LoadStep) -> Result<Assembly> {
        let data = self.prepare(step)?;
        let fp = FaceParams {
            friction: &self.problem.friction,
            penalty: &self.problem.penalty,
            open_tol: &self.open_tol,
            pressure: &data.pressure,
            symmetric: self.config.symmetric,
        };
        let g_prev: Vec<Vector3<f64>> = self.faces.iter().map(|f| f.g_prev).collect();
        let tk: Vec<Vector3<f64>> = self.faces.iter().map(|f| f.t).collect();
        let asm = assemble(&self.disc, &data.space, &self.u, &self.ub, &data.load, &data.bubble_load, &tk, &g_prev, &fp);
        self.space = Some(data.space);
        asm
    }

    /// Free dofs of the last prepared step.
    pub fn free_dofs(&self) -> &[usize] {
        self.space.as_ref().map_or(&[], |s| &s.free_dofs)
    }

    /// Advances one load step; returns its iteration report and the applied Neumann force.
    pub fn step(&mut self, index: usize, step: &LoadStep) -> Result<(StepReport, Vector3<f64>)> {
        let p = self.problem;
        let StepData { space, load, bubble_load, pressure, applied } = self.prepare(step)?;
        let open_tol = self.open_tol.clone();
        let fp = FaceParams {
            friction: &p.friction,
            penalty: &p.penalty,
            open_tol: &open_tol,
            pressure: &pressure,
            symmetric: self.config.symmetric,
        };
        let g_prev: Vec<Vector3<f64>> = self.faces.iter().map(|f| f.g_prev).collect();
        let mut tk: Vec<Vector3<f64>> = self.faces.iter().map(|f| f.t).collect();
        let mut rep = StepReport { step: index, uzawa: 0, newton: 0, krylov: 0, residual: 0.0, traction_change: 0.0 };
        let mut r_ref: Option<f64> = None;
        let cfg = self.config.clone();

        // Traction changes whose force is below the residual actually reached are not resolvable.
        let (min_area, tfloor) = (self.min_area, self.floor);
        let floor = |r: f64| (r / (cfg.uzawa_tol * min_area)).max(tfloor);
        let result = (|| -> Result<Assembly> {
            match cfg.algorithm {
                Algorithm::Uzawa => loop {
                    rep.uzawa += 1;
                    let mut inner = 0;
                    let mut asm = assemble(&self.disc, &space, &self.u, &self.ub, &load, &bubble_load, &tk, &g_prev, &fp)?;
                    let asm = loop {
                        let r = asm.residual_norm();
                        let rr = *r_ref.get_or_insert(r);
                        rep.residual = r;
                        if r <= (cfg.newton_rtol * rr).max(self.atol) {
                            break asm;
                        }
                        if inner >= cfg.max_newton {
                            return Err(Error::NewtonDiverged { step: index, iters: inner, residual: r });
                        }
                        asm = self.newton_update(&space, &asm, &mut rep, &load, &bubble_load, &tk, &g_prev, &fp)?.0;
                        inner += 1;
                    };
                    let t_new: Vec<Vector3<f64>> = asm.faces.iter().map(|f| f.aug.t).collect();
                    let change = traction_change(&tk, &t_new, floor(asm.residual_norm()));
                    rep.traction_change = change;
                    tk = t_new;
                    if change <= cfg.uzawa_tol {
                        break Ok(asm);
                    }
                    if rep.uzawa >= cfg.max_uzawa {
                        return Err(Error::UzawaDiverged { step: index, iters: rep.uzawa, change });
                    }
                },
                Algorithm::Interleaved => {
                    let mut asm = assemble(&self.disc, &space, &self.u, &self.ub, &load, &bubble_load, &tk, &g_prev, &fp)?;
                    let rr = *r_ref.get_or_insert(asm.residual_norm());
                    let tol = (cfg.newton_rtol * rr).max(self.atol);
                    if asm.residual_norm() <= tol {
                        let t_new: Vec<Vector3<f64>> = asm.faces.iter().map(|f| f.aug.t).collect();
                        if traction_change(&tk, &t_new, floor(asm.residual_norm())) <= cfg.uzawa_tol {
                            rep.residual = asm.residual_norm();
                            return Ok(asm);
                        }
                    }
                    loop {
                        if rep.newton >= cfg.max_uzawa.max(cfg.max_newton) {
                            return Err(Error::UzawaDiverged { step: index, iters: rep.uzawa, change: rep.traction_change });
                        }
                        let (next, decreased) =
                            self.newton_update(&space, &asm, &mut rep, &load, &bubble_load, &tk, &g_prev, &fp)?;
                        let r = next.residual_norm();
                        rep.residual = r;
                        // Multipliers move only after an accepted step with a settled
                        // active set; otherwise Newton continues on the current ones.
                        let settled = asm.faces.iter().zip(&next.faces).all(|(a, b)| a.aug.state == b.aug.state);
                        if (!decreased || !settled) && r > tol {
                            asm = next;
                            continue;
                        }
                        rep.uzawa += 1;
                        let t_new: Vec<Vector3<f64>> = next.faces.iter().map(|f| f.aug.t).collect();
                        let change = traction_change(&tk, &t_new, floor(r));
                        rep.traction_change = change;
                        if r <= tol && change <= cfg.uzawa_tol {
                            break Ok(next);
                        }
                        tk = t_new;
                        asm = assemble(&self.disc, &space, &self.u, &self.ub, &load, &bubble_load, &tk, &g_prev, &fp)?;
                    }
                }
            }
        })();
        self.space = Some(space);
        let asm = result?;
        for (st, ev) in self.faces.iter_mut().zip(&asm.faces) {
            *st = FaceContactState { t: ev.aug.t, g_n: ev.g_n, dg_t: ev.dg_t, state: ev.aug.state, g_prev: ev.g_glob };
        }
        self.last_r = asm.r_all;
        Ok((rep, applied))
    }

    /// Newton direction for the current assembly, as (δu on free dofs, δb per group).
    fn newton_direction(&mut self, asm: &Assembly, rep: &mut StepReport) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
        let cond = static_condense(&asm.blocks)?;
        let rhs: Vec<f64> = cond.r_hat.iter().map(|v| -v).collect();
        let (du, iters) = self.linear.solve(&cond.a_hat, &rhs)?;
        let dub = recover_bubble_increments(&cond, &du);
        rep.newton += 1;
        rep.krylov += iters;
        Ok((du, dub))
    }

    fn apply_step(&mut self, space: &FreeSpace, dir: &(Vec<f64>, Vec<DVector<f64>>), alpha: f64) {
        for (i, &d) in space.free_dofs.iter().enumerate() {
            self.u[d] += alpha * dir.0[i];
        }
        for (g, db) in self.disc.groups.iter().zip(&dir.1) {
            for (li, &b) in g.bubbles.iter().enumerate() {
                for c in 0..3 {
                    self.ub[3 * b + c] += alpha * db[3 * li + c];
                }
            }
        }
    }

    /// Newton update with residual backtracking; the full step is taken whenever it
    /// reduces the residual. Returns the assembly at the accepted point.
    #[allow(clippy::too_many_arguments)]
    fn newton_update(
        &mut self,
        space: &FreeSpace,
        asm: &Assembly,
        rep: &mut StepReport,
        load: &[f64],
        bubble_load: &[DVector<f64>],
        tk: &[Vector3<f64>],
        g_prev: &[Vector3<f64>],
        fp: &FaceParams,
    ) -> Result<(Assembly, bool)> {
        let r0 = asm.residual_norm();
        let dir = self.newton_direction(asm, rep)?;
        let mut alpha = 1.0;
        self.apply_step(space, &dir, alpha);
        let mut best: Option<(f64, f64)> = None;
        for _ in 0..LINE_SEARCH_STEPS {
            let trial = assemble(&self.disc, space, &self.u, &self.ub, load, bubble_load, tk, g_prev, fp)?;
            let r = trial.residual_norm();
            if r <= (1.0 - 1e-4 * alpha) * r0 {
                return Ok((trial, true));
            }
            if best.map_or(true, |(_, rb)| r < rb) {
                best = Some((alpha, r));
            }
            self.apply_step(space, &dir, -0.5 * alpha);
            alpha *= 0.5;
        }
        // No sufficient decrease: take the best trial (or the full step) and let the
        // outer loop count it.
        let a = best.map_or(1.0, |(a, _)| a);
        self.apply_step(space, &dir, a - alpha);
        Ok((assemble(&self.disc, space, &self.u, &self.ub, load, bubble_load, tk, g_prev, fp)?, false))
    }
}

/// Runs every load step of `problem`.
pub fn solve(problem: &ProblemDefinition, config: &SolverConfig) -> Result<Solution> {
    let mut s = Solver::new(problem, config.clone())?;
    let mut report = SolveReport::default();
    let mut history = Vec::with_capacity(problem.steps.len());
    let mut applied = Vector3::zeros();
    for (i, st) in problem.steps.iter().enumerate() {
        let (rep, f) = s.step(i, st)?;
        applied = f;
        report.steps.push(rep);
        history.push(s.faces.clone());
    }
    let constrained = s.space.as_ref().map(|sp| sp.constrained.clone()).unwrap_or_default();
    let mut reactions = vec![0.0; s.disc.n_dofs];
    for d in constrained {
        reactions[d] = s.last_r[d];
    }
    Ok(Solution { u: s.u, ub: s.ub, faces: s.faces, history, reactions, applied_force: applied, report })
}
