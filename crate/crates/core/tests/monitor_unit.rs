use groupoid_ricci::flow::*;
use groupoid_ricci::flow::{evolve, FlowControls};
use groupoid_ricci::geometry::GroupoidMetric;
use groupoid_ricci::twisted_grid::Grid;

#[test]
fn flat_torus_blowdown_is_zero() {
    let grid = Grid::spectral(16).unwrap();
    let traj = evolve(&FlowState::initial(GroupoidMetric::flat_torus(&grid)), &FlowControls::new(&grid, 0.1, 0.05)).unwrap();
    for s in blowdown_diagnostics(&traj) {
        assert_eq!(s.t_grad_max, 0.0);
        assert_eq!(s.t2_h_max, 0.0);
    }
}

#[test]
fn monitor_rejects_vanishing_gradient() {
    let grid = Grid::spectral(16).unwrap();
    let traj = evolve(&FlowState::initial(GroupoidMetric::flat_torus(&grid)), &FlowControls::new(&grid, 0.1, 0.05)).unwrap();
    let (a, b) = initial_envelope(traj.first(), 8).unwrap();
    assert_eq!((a, b), (0.0, 0.0));
    assert!(matches!(
        max_principle_monitor(&traj, a, b, &MonitorOptions::default()),
        Err(FlowError::Domain(_))
    ));
}

#[test]
fn cusp_saturates_both_envelopes() {
    let grid = Grid::spectral(16).unwrap();
    let traj = evolve(&FlowState::initial(GroupoidMetric::cusp(&grid, 1.0)), &FlowControls::new(&grid, 1.0, 0.1)).unwrap();
    let (a, b) = initial_envelope(traj.first(), 8).unwrap();
    assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    let rep = max_principle_monitor(&traj, a, b, &MonitorOptions::default()).unwrap();
    assert!(rep.passed(), "{:?}", rep.violations.first());
    let last = rep.samples.last().unwrap();
    assert!((last.max_grad_sq - 1.0 / 3.0).abs() < 1e-9);
}
