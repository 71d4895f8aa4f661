//! Oracles shared by the integration tests and the acceptance binary.
#![allow(dead_code)]

use faultalm::contact::{augmented_traction, ContactState, FrictionParams, PenaltyParams};
use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TangentCase {
    Stick,
    Slip,
    SlipSymmetric,
    Open,
}

pub const TANGENT_CASES: [TangentCase; 4] =
    [TangentCase::Stick, TangentCase::Slip, TangentCase::SlipSymmetric, TangentCase::Open];

#[derive(Debug, Clone, Copy)]
pub struct ContactSample {
    pub t_old: Vector3<f64>,
    pub g_n: f64,
    pub dg: Vector2<f64>,
    pub pen: PenaltyParams,
    pub friction: FrictionParams,
    pub symmetric: bool,
    pub expected: ContactState,
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random state well inside the region of `case` (trial values at least 10%
/// away from every switching surface).
pub fn sample_state<R: Rng>(rng: &mut R, case: TangentCase) -> ContactSample {
    let eps_n = log_uniform(rng, 1e8, 1e10);
    let eps_t = log_uniform(rng, 1e8, 1e10);
    let friction = FrictionParams::from_degrees(rng.gen_range(0.0..1e6), rng.gen_range(5.0..45.0)).unwrap();
    let t_old_n = -log_uniform(rng, 1e5, 2e7);
    let t_old_t = Vector2::new(rng.gen_range(-1e6..1e6), rng.gen_range(-1e6..1e6));
    let trial_n = match case {
        TangentCase::Open => log_uniform(rng, 1e5, 1e7),
        _ => -log_uniform(rng, 1e5, 1e7),
    };
    let symmetric = case == TangentCase::SlipSymmetric;
    let tau = friction.tau_max(if symmetric { t_old_n } else { trial_n.min(0.0) }).max(0.0);
    let ratio = match case {
        TangentCase::Stick => rng.gen_range(0.05..0.9),
        TangentCase::Slip | TangentCase::SlipSymmetric => rng.gen_range(1.1..5.0),
        TangentCase::Open => rng.gen_range(0.0..5.0),
    };
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let trial_t = Vector2::new(angle.cos(), angle.sin()) * (ratio * tau.max(1e5));
    let expected = match case {
        TangentCase::Stick => ContactState::Stick,
        TangentCase::Slip | TangentCase::SlipSymmetric => ContactState::Slip,
        TangentCase::Open => ContactState::Open,
    };
    ContactSample {
        t_old: Vector3::new(t_old_n, t_old_t.x, t_old_t.y),
        g_n: (trial_n - t_old_n) / eps_n,
        dg: (trial_t - t_old_t) / eps_t,
        pen: PenaltyParams { eps_n, eps_t },
        friction,
        symmetric,
        expected,
    }
}

fn eval(s: &ContactSample, g: &Vector3<f64>) -> (Vector3<f64>, ContactState) {
    let a = augmented_traction(&s.t_old, g[0], &Vector2::new(g[1], g[2]), &s.pen, &s.friction, s.symmetric, 0.0).unwrap();
    (a.t, a.state)
}

/// Central-difference Jacobian of t̂ with respect to (g_N, Δg_1, Δg_2).
/// `None` if a perturbation changes the state.
pub fn fd_jacobian(s: &ContactSample) -> Option<Matrix3<f64>> {
    let g0 = Vector3::new(s.g_n, s.dg.x, s.dg.y);
    let scale = s.t_old.norm().max(1e5);
    let h = [1e-6 * scale / s.pen.eps_n, 1e-6 * scale / s.pen.eps_t, 1e-6 * scale / s.pen.eps_t];
    let mut j = Matrix3::zeros();
    for k in 0..3 {
        let mut gp = g0;
        let mut gm = g0;
        gp[k] += h[k];
        gm[k] -= h[k];
        let (tp, sp) = eval(s, &gp);
        let (tm, sm) = eval(s, &gm);
        if sp != s.expected || sm != s.expected {
            return None;
        }
        j.set_column(k, &((tp - tm) / (2.0 * h[k])));
    }
    Some(j)
}

/// max |J_fd − J| / max(|J|, ε_min) for one sample.
pub fn tangent_error(s: &ContactSample) -> Option<f64> {
    let a = augmented_traction(&s.t_old, s.g_n, &s.dg, &s.pen, &s.friction, s.symmetric, 0.0).ok()?;
    if a.state != s.expected {
        return None;
    }
    let fd = fd_jacobian(s)?;
    let j = a.tangents.local_matrix();
    let denom = j.amax().max(s.pen.eps_n.min(s.pen.eps_t));
    Some((fd - j).amax() / denom)
}
