use faultalm::bench::{constant_slip_case, kkt_failures, state_counts, stick_slip_open_case, CONSTANT_SLIP};
use faultalm::contact::ContactState;
use faultalm::fem::CellKind;
use faultalm::solver::{solve, Algorithm, SolverConfig};

#[test]
fn constant_slip_all_kinds() {
    for kind in [CellKind::Hex8, CellKind::Tet4, CellKind::Wedge6] {
        let prob = constant_slip_case(kind, 3).unwrap();
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        let target = CONSTANT_SLIP * 2f64.sqrt();
        for f in &sol.faces {
            assert_eq!(f.state, ContactState::Slip, "{kind:?}");
            assert!((f.dg_t.norm() - target).abs() <= 1e-3 * target, "{kind:?} {}", f.dg_t.norm());
        }
        assert_eq!(kkt_failures(&prob, &sol.faces, 1e-6), 0, "{kind:?}");
    }
}

#[test]
fn stick_slip_open_sequence_and_kkt() {
    let prob = stick_slip_open_case(CellKind::Hex8).unwrap();
    let mut newton = Vec::new();
    for alg in [Algorithm::Uzawa, Algorithm::Interleaved] {
        let sol = solve(&prob, &SolverConfig { algorithm: alg, ..SolverConfig::default() }).unwrap();
        let counts: Vec<[usize; 3]> = sol.history.iter().map(|h| state_counts(h)).collect();
        let nf = prob.mesh.fault_faces.len();
        assert_eq!(counts[0], [nf, 0, 0], "{alg:?}");
        assert!(counts[..=6].iter().any(|c| c[1] > 0), "{alg:?} {counts:?}");
        assert!(counts[10][2] > 0, "{alg:?} {counts:?}");
        for h in &sol.history {
            assert_eq!(kkt_failures(&prob, h, 1e-5), 0, "{alg:?}");
        }
        newton.push(sol.report.total_newton());
    }
    assert!(newton[1] < newton[0], "{newton:?}");
}

#[test]
fn repeated_solves_identical() {
    let prob = constant_slip_case(CellKind::Tet4, 2).unwrap();
    let cfg = SolverConfig { algorithm: Algorithm::Interleaved, ..SolverConfig::default() };
    let a = solve(&prob, &cfg).unwrap();
    let b = solve(&prob, &cfg).unwrap();
    assert_eq!(a.report.table().render(), b.report.table().render());
    assert_eq!(a.u.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.u.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.faces, b.faces);
}
