use faultalm::bench::{condensation_check, sheared_blocks_case, symmetric_assembly_check};
use faultalm::fem::CellKind;

#[test]
fn two_cell_condensation_exact() {
    let prob = sheared_blocks_case(CellKind::Hex8, 1).unwrap();
    assert_eq!(prob.mesh.cells.len(), 2);
    let c = condensation_check(&prob).unwrap();
    assert!(c.n_bubble == 6, "{c:?}");
    assert!(c.rel_diff <= 1e-10, "{c:?}");
    assert_eq!(c.fill_outside, 0);
}

#[test]
fn four_cubed_condensation_exact_all_kinds() {
    for kind in [CellKind::Hex8, CellKind::Tet4, CellKind::Wedge6] {
        let prob = sheared_blocks_case(kind, 4).unwrap();
        let c = condensation_check(&prob).unwrap();
        assert!(c.rel_diff <= 1e-10, "{kind:?} {c:?}");
        assert_eq!(c.fill_outside, 0, "{kind:?}");
    }
}

#[test]
fn symmetric_variant_assembles_symmetric() {
    for kind in [CellKind::Hex8, CellKind::Tet4, CellKind::Wedge6] {
        let prob = sheared_blocks_case(kind, 2).unwrap();
        let (asym, states) = symmetric_assembly_check(&prob).unwrap();
        assert!(asym <= 1e-12, "{kind:?} {asym:e}");
        assert!(states[1] > 0, "{kind:?} no slip faces in {states:?}");
    }
}
