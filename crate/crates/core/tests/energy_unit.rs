use groupoid_ricci::*;
use groupoid_ricci::functionals::*;
use groupoid_ricci::flow::{evolve, FlowControls, FlowState};
use groupoid_ricci::twisted_grid::{Grid, TwistedField};
use std::f64::consts::PI;

#[test]
fn identical_trajectories_have_zero_energy() {
    let grid = Grid::spectral(16).unwrap();
    let k = TwistedField::from_fn(grid.spec(), 0.5, |y| 0.1 * (2.0 * PI * y).sin());
    let g = GroupoidMetric::new(grid.clone(), k, PeriodicField::zeros(16)).unwrap();
    let traj = evolve(&FlowState::initial(g), &FlowControls::new(&grid, 0.05, 0.01)).unwrap();
    for b in uniqueness_energy(&traj, &traj, DEFAULT_ALPHA_EXP).unwrap() {
        assert_eq!(b.e, 0.0);
    }
}

#[test]
fn growth_rate_of_exponential() {
    let series: Vec<EnergyBreakdown> = (1..10)
        .map(|i| {
            let t = i as f64 * 0.1;
            let e = 2.0 * (3.0 * t).exp();
            EnergyBreakdown { t, s: e, h: 0.0, i: 0.0, e }
        })
        .collect();
    assert!((energy_growth_rate(&series, 0.0, 1.0).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn rejects_bad_exponent() {
    let grid = Grid::spectral(16).unwrap();
    let traj = evolve(
        &FlowState::initial(GroupoidMetric::flat_torus(&grid)),
        &FlowControls::new(&grid, 0.01, 0.01),
    )
    .unwrap();
    assert!(uniqueness_energy(&traj, &traj, 1.0).is_err());
}
