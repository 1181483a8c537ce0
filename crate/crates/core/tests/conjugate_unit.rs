use groupoid_ricci::*;
use groupoid_ricci::flow::*;
use groupoid_ricci::flow::{evolve, FlowControls, FlowState};
use groupoid_ricci::geometry::GroupoidMetric;
use std::f64::consts::PI;

fn flat_traj(n: usize) -> FlowTrajectory {
    let grid = Grid::spectral(n).unwrap();
    let s = FlowState::initial(GroupoidMetric::flat_torus(&grid));
    evolve(&s, &FlowControls::new(&grid, 0.05, 0.01)).unwrap()
}

#[test]
fn flat_constant_density_is_fixed() {
    let traj = flat_traj(32);
    let out = backward_conjugate_solve(&traj, &PeriodicField::constant(32, 1.0), &ConjugateOptions::default()).unwrap();
    assert_eq!(out.len(), traj.len());
    for (_, v) in out {
        assert!(v.shift(-1.0).sup_norm() < 1e-15);
    }
}

#[test]
fn flat_mode_decays_like_heat_kernel() {
    let traj = flat_traj(32);
    let grid = traj.grid().clone();
    let v_end = PeriodicField::from_fn(grid.spec(), |y| 1.0 + 0.1 * (2.0 * PI * y).sin());
    let out = backward_conjugate_solve(&traj, &v_end, &ConjugateOptions::default()).unwrap();
    let (t0, v0) = &out[0];
    let decay = (-(2.0 * PI).powi(2) * (0.05 - t0)).exp();
    let exact = PeriodicField::from_fn(grid.spec(), |y| 1.0 + 0.1 * decay * (2.0 * PI * y).sin());
    assert!(v0.sub(&exact).sup_norm() < 1e-10);
}

#[test]
fn rejects_nonpositive_end_data() {
    let traj = flat_traj(32);
    let mut v = vec![1.0; 32];
    v[3] = 0.0;
    assert!(matches!(
        backward_conjugate_solve(&traj, &PeriodicField::new(v), &ConjugateOptions::default()),
        Err(FlowError::Domain(_))
    ));
}

#[test]
fn coupling_stores_log_density() {
    let traj = flat_traj(32);
    let c = couple_with_conjugate(&traj, &PeriodicField::constant(32, 0.5), &ConjugateOptions::default()).unwrap();
    assert_eq!(c.haar_source(), HaarSource::Conjugate);
    assert!(c.first().haar.f.shift(-(2f64.ln())).sup_norm() < 1e-14);
}
