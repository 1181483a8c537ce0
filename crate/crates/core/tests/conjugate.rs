mod common;

use std::f64::consts::PI;

use groupoid_ricci::flow::{
    backward_conjugate_solve, couple_with_conjugate, CoefficientInterpolation, evolve, ConjugateOptions, FlowControls, FlowState,
    FlowTrajectory, HaarSource,
};
use groupoid_ricci::geometry::total_mass;
use groupoid_ricci::{Grid, GroupoidMetric, HaarWeight, PeriodicField, TwistedField};
use groupoid_ricci_oracles::{conjugate_generator, propagate, TrigSeries, TwistedSeries};

fn frozen(g: &GroupoidMetric, times: &[f64]) -> FlowTrajectory {
    let states = times
        .iter()
        .map(|&t| FlowState::new(t, g.clone(), HaarWeight::reference(g.grid().n())).unwrap())
        .collect();
    FlowTrajectory::from_checkpoints(states, HaarSource::Reference).unwrap()
}

#[test]
fn frozen_segments_match_matrix_exponential() {
    let n = 32;
    let grid = Grid::spectral(n).unwrap();
    for seed in 0..4 {
        let mut rng = common::rng(seed);
        let k = TwistedSeries {
            holonomy: [0.0, 1.0, -0.6, 0.3][seed as usize],
            periodic: common::random_series(&mut rng, 3, 0.2),
        };
        let u = common::random_series(&mut rng, 3, 0.2);
        let g = common::metric(&grid, &k, &u);
        let v_end = TrigSeries::new(1.0, vec![(1, 0.3, -0.2), (2, 0.1, 0.05)]);
        let v_end = common::periodic(&grid, &v_end);
        let tau = 0.05;
        let traj = frozen(&g, &[0.0, 0.02, tau]);
        // Hermite would read the flow velocity at the nodes; a frozen segment has none
        let opts = ConjugateOptions { interpolation: CoefficientInterpolation::Linear, c_cfl: None };
        let series = backward_conjugate_solve(&traj, &v_end, &opts).unwrap();
        let l = conjugate_generator(n, &k, &u);
        for (t, v) in &series {
            let want = propagate(&l, tau - t, v_end.values());
            let err = v
                .values()
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-8, "seed {seed}, t = {t}: error {err:e}");
        }
    }
}

/// Relative drift of `∫ v e^{u} dy` over a coupled run.
fn mass_drift(interval: f64, interpolation: CoefficientInterpolation) -> f64 {
    let n = 64;
    let grid = Grid::spectral(n).unwrap();
    let k = TwistedField::from_fn(grid.spec(), 1.0, |y| 0.3 * (2.0 * PI * y).sin());
    let u = PeriodicField::from_fn(grid.spec(), |y| 0.1 * (2.0 * PI * y).cos());
    let g = GroupoidMetric::new(grid.clone(), k, u).unwrap();
    let traj = evolve(&FlowState::initial(g), &FlowControls::new(&grid, 0.2, interval)).unwrap();
    let v_end = PeriodicField::from_fn(grid.spec(), |y| 1.0 + 0.5 * (2.0 * PI * y).sin());
    let opts = ConjugateOptions { interpolation, c_cfl: None };
    let coupled = couple_with_conjugate(&traj, &v_end, &opts).unwrap();
    for s in coupled.checkpoints() {
        assert!(s.haar.density().min() > 0.0);
    }
    let masses: Vec<f64> = coupled
        .checkpoints()
        .iter()
        .map(|s| total_mass(&s.metric, &s.haar).unwrap())
        .collect();
    let end = masses[masses.len() - 1];
    masses.iter().map(|m| (m - end).abs() / end).fold(0.0, f64::max)
}

#[test]
fn mass_is_conserved_along_a_coupled_run() {
    let d = mass_drift(0.005, CoefficientInterpolation::Hermite);
    assert!(d < 1e-6, "drift {d:e}");
}

#[test]
fn linear_coefficients_converge_at_second_order() {
    let coarse = mass_drift(0.01, CoefficientInterpolation::Linear);
    let fine = mass_drift(0.005, CoefficientInterpolation::Linear);
    assert!(coarse / fine > 3.0, "{coarse:e} -> {fine:e}");
}
