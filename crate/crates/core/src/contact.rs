//! Per-face augmented-Lagrangian traction algebra.
//!
//! Tractions live in the face frame as (t_N, t_1, t_2). The jump is
//! ⟦u⟧ = u⁺ − u⁻, so a positive normal gap means opening.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::FaceFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionParams {
    pub cohesion: f64,
    /// Friction angle in radians.
    pub angle: f64,
}

impl FrictionParams {
    pub fn new(cohesion: f64, angle: f64) -> Result<Self> {
        if !(cohesion >= 0.0) || !(angle >= 0.0 && angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Domain(format!("friction c={cohesion}, theta={angle}")));
        }
        Ok(Self { cohesion, angle })
    }

    pub fn from_degrees(cohesion: f64, degrees: f64) -> Result<Self> {
        Self::new(cohesion, degrees.to_radians())
    }

    pub fn tan(&self) -> f64 {
        self.angle.tan()
    }

    /// τ_max = c − tanθ·t_N.
    pub fn tau_max(&self, t_n: f64) -> f64 {
        self.cohesion - self.tan() * t_n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub eps_n: f64,
    pub eps_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactState {
    Stick,
    Slip,
    Open,
}

impl ContactState {
    pub fn as_str(self) -> &'static str {
        match self {
            ContactState::Stick => "stick",
            ContactState::Slip => "slip",
            ContactState::Open => "open",
        }
    }
}

/// x₋ = min(x, 0).
pub fn negative_part(x: f64) -> f64 {
    if x <= 0.0 {
        x
    } else {
        0.0
    }
}

/// Orthogonal projection onto the closed disc of radius ρ.
pub fn ball_projection(t: &Vector2<f64>, rho: f64) -> Vector2<f64> {
    let n = t.norm();
    if n <= rho {
        *t
    } else if n == 0.0 {
        Vector2::zeros()
    } else {
        t * (rho / n)
    }
}

pub fn update_normal(t_n_old: f64, g_n: f64, eps_n: f64) -> f64 {
    negative_part(t_n_old + eps_n * g_n)
}

/// Projects the tangential trial traction onto the Coulomb disc; `t_n_limit`
/// is the fresh normal traction (non-symmetric variant) or the lagged one.
pub fn update_tangential(
    t_t_old: &Vector2<f64>,
    dg_t: &Vector2<f64>,
    eps_t: f64,
    t_n_limit: f64,
    friction: &FrictionParams,
) -> Vector2<f64> {
    ball_projection(&(t_t_old + dg_t * eps_t), friction.tau_max(t_n_limit).max(0.0))
}

/// Trial-based classification. `open_tol` absorbs round-off in the normal trial.
pub fn classify_state(trial_n: f64, trial_t: &Vector2<f64>, tau_max: f64, eps_t: f64, open_tol: f64) -> ContactState {
    if trial_n > open_tol {
        ContactState::Open
    } else if trial_t.norm() <= tau_max || trial_t.norm() <= 1e-14 * eps_t {
        ContactState::Stick
    } else {
        ContactState::Slip
    }
}

/// ∂t̂_N/∂g_N, ∂t̂_T/∂g_N and ∂t̂_T/∂Δg_T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangents {
    pub dtn_dgn: f64,
    pub dtt_dgn: Vector2<f64>,
    pub dtt_ddgt: Matrix2<f64>,
}

impl Tangents {
    /// Assembled 3×3 local operator d(t_N, t_1, t_2)/d(g_N, Δg_1, Δg_2).
    pub fn local_matrix(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        m[(0, 0)] = self.dtn_dgn;
        m[(1, 0)] = self.dtt_dgn[0];
        m[(2, 0)] = self.dtt_dgn[1];
        m.fixed_view_mut::<2, 2>(1, 1).copy_from(&self.dtt_ddgt);
        m
    }
}

pub fn tangent_derivatives(
    state: ContactState,
    trial_t: &Vector2<f64>,
    tau_max: f64,
    pen: &PenaltyParams,
    friction: &FrictionParams,
    symmetric: bool,
) -> Result<Tangents> {
    let zero = Tangents { dtn_dgn: 0.0, dtt_dgn: Vector2::zeros(), dtt_ddgt: Matrix2::zeros() };
    match state {
        ContactState::Open => Ok(zero),
        ContactState::Stick => Ok(Tangents { dtn_dgn: pen.eps_n, dtt_ddgt: Matrix2::identity() * pen.eps_t, ..zero }),
        ContactState::Slip => {
            let nt = trial_t.norm();
            if nt == 0.0 {
                return Err(Error::SlipWithoutTrial);
            }
            let dtt_ddgt = (Matrix2::identity() * (nt * nt) - trial_t * trial_t.transpose()) * (pen.eps_t * tau_max / nt.powi(3));
            let dtt_dgn = if symmetric { Vector2::zeros() } else { trial_t * (-pen.eps_n * friction.tan() / nt) };
            Ok(Tangents { dtn_dgn: pen.eps_n, dtt_dgn, dtt_ddgt })
        }
    }
}

/// Result of the augmented traction map for one face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedTraction {
    pub t: Vector3<f64>,
    pub state: ContactState,
    pub tangents: Tangents,
}

/// t̂ = ((t_N + ε_N g_N)₋, P(t_T + ε_T Δg_T)) with the Coulomb limit evaluated
/// from t̂_N, or from the lagged t_N when `symmetric`.
pub fn augmented_traction(
    t_old: &Vector3<f64>,
    g_n: f64,
    dg_t: &Vector2<f64>,
    pen: &PenaltyParams,
    friction: &FrictionParams,
    symmetric: bool,
    open_tol: f64,
) -> Result<AugmentedTraction> {
    let trial_n = t_old[0] + pen.eps_n * g_n;
    let t_t_old = Vector2::new(t_old[1], t_old[2]);
    let trial_t = t_t_old + dg_t * pen.eps_t;
    let t_n = if trial_n > open_tol { 0.0 } else { negative_part(trial_n) };
    let limit = if symmetric { negative_part(t_old[0]) } else { t_n };
    let tau_max = friction.tau_max(limit).max(0.0);
    let state = classify_state(trial_n, &trial_t, tau_max, pen.eps_t, open_tol);
    let t_t = match state {
        ContactState::Open => Vector2::zeros(),
        ContactState::Stick => trial_t,
        ContactState::Slip => ball_projection(&trial_t, tau_max),
    };
    let tangents = tangent_derivatives(state, &trial_t, tau_max, pen, friction, symmetric)?;
    Ok(AugmentedTraction { t: Vector3::new(t_n, t_t[0], t_t[1]), state, tangents })
}

/// Face-averaged jump operator: ḡ = (1/|φ|)(Σ w_k u_k + Σ β_s u_b,s).
///
/// Node weights are ∫_φ N_k, negative for the minus side; nodes shared by both
/// sides (fault rim) cancel and are dropped. Bubble weights follow the same sign
/// convention: `[minus, plus]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    pub bubble: [f64; 2],
    pub area: f64,
    pub frame: FaceFrame,
}

impl JumpOperator {
    pub fn average_jump(&self, u: &[f64], ub: Option<&[f64]>) -> Vector3<f64> {
        let mut g = Vector3::zeros();
        for (&n, &w) in self.nodes.iter().zip(&self.weights) {
            g += Vector3::new(u[3 * n], u[3 * n + 1], u[3 * n + 2]) * w;
        }
        if let Some(b) = ub {
            for s in 0..2 {
                g += Vector3::new(b[3 * s], b[3 * s + 1], b[3 * s + 2]) * self.bubble[s];
            }
        }
        g / self.area
    }
}

/// (g_N, Δg_T) from a current and a previous-step displacement (no bubbles).
pub fn face_average_jumps(op: &JumpOperator, u: &[f64], u_prev: &[f64]) -> (f64, Vector2<f64>) {
    let g = op.frame.to_local(&op.average_jump(u, None));
    let gp = op.frame.to_local(&op.average_jump(u_prev, None));
    (g[0], Vector2::new(g[1] - gp[1], g[2] - gp[2]))
}

/// Converged per-face contact quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceContactState {
    pub t: Vector3<f64>,
    pub g_n: f64,
    pub dg_t: Vector2<f64>,
    pub state: ContactState,
    /// Global face-averaged jump at the end of the previous step.
    pub g_prev: Vector3<f64>,
}

impl Default for FaceContactState {
    fn default() -> Self {
        Self { t: Vector3::zeros(), g_n: 0.0, dg_t: Vector2::zeros(), state: ContactState::Stick, g_prev: Vector3::zeros() }
    }
}

/// Which complementarity / Coulomb condition a face violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktViolation {
    TensileTraction,
    Penetration,
    Complementarity,
    CoulombLimit,
    SlipDirection,
}

/// Checks the contact conditions with a traction tolerance `tol` (Pa); gap
/// tolerances are `tol/ε_N`.
pub fn kkt_check(face: &FaceContactState, friction: &FrictionParams, pen: &PenaltyParams, tol: f64) -> Vec<KktViolation> {
    let mut v = Vec::new();
    let t_n = face.t[0];
    let t_t = Vector2::new(face.t[1], face.t[2]);
    if t_n > tol {
        v.push(KktViolation::TensileTraction);
    }
    if face.g_n < -tol / pen.eps_n {
        v.push(KktViolation::Penetration);
    }
    if (t_n * face.g_n).abs() > tol * (t_n.abs() + tol) / pen.eps_n {
        v.push(KktViolation::Complementarity);
    }
    if t_t.norm() > friction.tau_max(t_n).max(0.0) + tol {
        v.push(KktViolation::CoulombLimit);
    }
    if face.state == ContactState::Slip && t_t.dot(&face.dg_t) < -tol * face.dg_t.norm() {
        v.push(KktViolation::SlipDirection);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fr30() -> FrictionParams {
        FrictionParams::from_degrees(0.0, 30.0).unwrap()
    }

    #[test]
    fn negative_part_cases() {
        assert_eq!(negative_part(-3.0), -3.0);
        assert_eq!(negative_part(0.0), 0.0);
        assert_eq!(negative_part(2.5), 0.0);
    }

    #[test]
    fn ball_projection_cases() {
        let p = ball_projection(&Vector2::new(3.0, 4.0), 2.5);
        assert!((p - Vector2::new(1.5, 2.0)).norm() < 1e-15);
        let q = Vector2::new(0.1, -0.2);
        assert_eq!(ball_projection(&q, 1.0), q);
        assert_eq!(ball_projection(&q, 0.0), Vector2::zeros());
        assert_eq!(ball_projection(&Vector2::zeros(), 0.0), Vector2::zeros());
    }

    #[test]
    fn normal_update_cases() {
        assert_eq!(update_normal(-1.0, -0.5, 2.0), -2.0);
        assert_eq!(update_normal(-1.0, 0.6, 2.0), 0.0);
        assert_eq!(update_normal(0.0, 0.0, 7.0), 0.0);
    }

    #[test]
    fn tangential_update_cases() {
        let f = FrictionParams::new(1.0, 0.0).unwrap();
        let t = update_tangential(&Vector2::new(0.1, 0.0), &Vector2::zeros(), 1.0, 0.0, &f);
        assert_eq!(t, Vector2::new(0.1, 0.0));
        let t = update_tangential(&Vector2::new(1.0, 0.0), &Vector2::zeros(), 1.0, -1.0, &fr30());
        assert!((t[0] - 0.57735026918962573).abs() < 1e-12 && t[1] == 0.0);
        let t = update_tangential(&Vector2::new(1.0, 2.0), &Vector2::zeros(), 1.0, 0.0, &fr30());
        assert_eq!(t, Vector2::zeros());
    }

    #[test]
    fn classification_cases() {
        let pen = PenaltyParams { eps_n: 2.0, eps_t: 2.0 };
        let f = fr30();
        let open = augmented_traction(&Vector3::new(-1.0, 0.0, 0.0), 0.6, &Vector2::zeros(), &pen, &f, false, 0.0).unwrap();
        assert_eq!(open.state, ContactState::Open);
        assert_eq!(open.t, Vector3::zeros());
        let stick =
            augmented_traction(&Vector3::new(-1.0, 0.1, 0.0), 0.0, &Vector2::zeros(), &pen, &f, false, 0.0).unwrap();
        assert_eq!(stick.state, ContactState::Stick);
        let slip =
            augmented_traction(&Vector3::new(-1.0, 0.0, 0.0), 0.0, &Vector2::new(1.0, 0.0), &pen, &f, false, 0.0).unwrap();
        assert_eq!(slip.state, ContactState::Slip);
    }

    #[test]
    fn slip_tangent_example() {
        let pen = PenaltyParams { eps_n: 2.0, eps_t: 2.0 };
        let t = tangent_derivatives(ContactState::Slip, &Vector2::new(5.0, 0.0), 1.0, &pen, &fr30(), false).unwrap();
        assert!((t.dtt_ddgt - Matrix2::new(0.0, 0.0, 0.0, 0.4)).norm() < 1e-15);
        let s = tangent_derivatives(ContactState::Slip, &Vector2::new(5.0, 0.0), 1.0, &pen, &fr30(), true).unwrap();
        assert_eq!(s.dtt_dgn, Vector2::zeros());
        assert!(tangent_derivatives(ContactState::Slip, &Vector2::zeros(), 1.0, &pen, &fr30(), false).is_err());
    }

    #[test]
    fn open_tangent_zero() {
        let pen = PenaltyParams { eps_n: 2.0, eps_t: 3.0 };
        let t = tangent_derivatives(ContactState::Open, &Vector2::new(1.0, 1.0), 1.0, &pen, &fr30(), false).unwrap();
        assert_eq!(t.local_matrix(), Matrix3::zeros());
        let s = tangent_derivatives(ContactState::Stick, &Vector2::zeros(), 1.0, &pen, &fr30(), false).unwrap();
        assert_eq!(s.local_matrix(), Matrix3::new(2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 3.0));
    }

    #[test]
    fn jump_examples() {
        let frame = FaceFrame { n: Vector3::x(), m1: Vector3::y(), m2: Vector3::z() };
        let op = JumpOperator { nodes: vec![0, 1], weights: vec![-1.0, 1.0], bubble: [0.0; 2], area: 1.0, frame };
        let prev = vec![0.0; 6];
        let u = vec![0.3, 0.0, 0.0, 0.4, 0.0, 0.0];
        let (g, dg) = face_average_jumps(&op, &u, &prev);
        assert!((g - 0.1).abs() < 1e-15 && dg == Vector2::zeros());
        let u = vec![0.0, 0.5, 0.0, 0.0, 0.7, 0.0];
        let (g, dg) = face_average_jumps(&op, &u, &prev);
        assert!(g == 0.0 && (dg - Vector2::new(0.2, 0.0)).norm() < 1e-15);
        let same = vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let (g, dg) = face_average_jumps(&op, &same, &prev);
        assert!(g == 0.0 && dg == Vector2::zeros());
    }

    #[test]
    fn kkt_detects_violations() {
        let pen = PenaltyParams { eps_n: 10.0, eps_t: 10.0 };
        let ok = FaceContactState { t: Vector3::new(-1.0, 0.5, 0.0), ..Default::default() };
        assert!(kkt_check(&ok, &fr30(), &pen, 1e-9).is_empty());
        let bad = FaceContactState { t: Vector3::new(-1.0, 0.7, 0.0), g_n: -1.0, ..Default::default() };
        let v = kkt_check(&bad, &fr30(), &pen, 1e-9);
        assert!(v.contains(&KktViolation::CoulombLimit) && v.contains(&KktViolation::Penetration));
    }
}
