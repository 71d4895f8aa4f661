//! Config-driven run: solve every step and write profiles, fields and the report.

use std::path::{Path, PathBuf};

use crate::config::{echo, RunConfig};
use crate::contact::FaceContactState;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::output::{profile_table, vtk_displacement, vtk_fault, write_atomic, FaultProfileRecord};
use crate::solver::{SolveReport, Solver};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: SolveReport,
    /// Face states after the last converged step.
    pub faces: Vec<FaceContactState>,
    pub files: Vec<PathBuf>,
}

fn suffixed(prefix: &Path, tail: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(tail);
    PathBuf::from(s)
}

pub fn profile_records(mesh: &Mesh, faces: &[FaceContactState], xi_axis: usize) -> Vec<FaultProfileRecord> {
    mesh.fault_faces
        .iter()
        .zip(faces)
        .enumerate()
        .map(|(i, (ff, st))| FaultProfileRecord { face: i, centroid: ff.centroid, xi: ff.centroid[xi_axis], state: *st })
        .collect()
}

/// Runs all steps. The report is written even when a step fails; the error
/// names the failing step.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let out = &cfg.output;
    let mut files = Vec::new();
    write_atomic(&out.echo, echo(cfg).as_bytes())?;
    files.push(out.echo.clone());
    let problem = cfg.build_problem()?;
    let mut solver = Solver::new(&problem, cfg.solver.clone())?;
    let mut report = SolveReport::default();
    for (i, st) in problem.steps.iter().enumerate() {
        let rep = match solver.step(i, st) {
            Ok((rep, _)) => rep,
            Err(e) => {
                report.table().write(&out.report)?;
                return Err(match e {
                    Error::NewtonDiverged { .. } | Error::UzawaDiverged { .. } => e,
                    other => Error::Step { step: i, source: Box::new(other) },
                });
            }
        };
        report.steps.push(rep);
        let tag = format!("_{i:03}");
        let prof = suffixed(&out.profile, &format!("{tag}.csv"));
        profile_table(&profile_records(&problem.mesh, &solver.faces, out.xi_axis.index())).write(&prof)?;
        let field = suffixed(&out.fields, &format!("{tag}.vtk"));
        write_atomic(&field, vtk_displacement(&problem.mesh, &solver.u).as_bytes())?;
        let fault = suffixed(&out.fields, &format!("_fault{tag}.vtk"));
        write_atomic(&fault, vtk_fault(&problem.mesh, &solver.faces).as_bytes())?;
        files.extend([prof, field, fault]);
    }
    report.table().write(&out.report)?;
    files.push(out.report.clone());
    Ok(RunOutcome { report, faces: solver.faces, files })
}
