use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {cell}: non-positive Jacobian determinant {det:e}")]
    NonPositiveJacobian { cell: usize, det: f64 },
    #[error("unknown element kind `{0}`")]
    UnknownKind(String),
    #[error("local face {face} out of range for {kind}")]
    InvalidFace { kind: &'static str, face: usize },
    #[error("fault plane {axis}={coord} is not on a grid plane (nearest grid coordinate {nearest})")]
    FaultPlaneNotAligned { axis: char, coord: f64, nearest: f64 },
    #[error("non-manifold fault selection at edge ({0}, {1})")]
    NonManifoldEdge(usize, usize),
    #[error("face {face}: degenerate geometry (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("mesh invariant violated: {0}")]
    Mesh(String),
    #[error("bubble group containing face {face}: singular A_bb block")]
    SingularBubbleBlock { face: usize },
    #[error("inconsistent slip state: zero trial traction with positive limit")]
    SlipWithoutTrial,
    #[error("linear solver failed: {0}")]
    LinearSolver(String),
    #[error("Krylov solver stalled after {iters} iterations (relative residual {residual:e})")]
    KrylovStall { iters: usize, residual: f64 },
    #[error("step {step}: Newton did not converge in {iters} iterations (residual {residual:e})")]
    NewtonDiverged { step: usize, iters: usize, residual: f64 },
    #[error("step {step}: Uzawa did not converge in {iters} iterations (traction change {change:e})")]
    UzawaDiverged { step: usize, iters: usize, change: f64 },
    #[error("argument out of range: {0}")]
    Domain(String),
    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
