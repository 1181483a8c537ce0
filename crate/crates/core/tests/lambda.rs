mod common;

use std::f64::consts::PI;

use groupoid_ricci::flow::{evolve, FlowControls, FlowState};
use groupoid_ricci::functionals::{f_functional, lambda_functional, lambda_monotonicity};
use groupoid_ricci::{Grid, GroupoidMetric, HaarWeight, PeriodicField, TwistedField};
use groupoid_ricci_oracles::{lambda_collocation, TrigSeries, TwistedSeries};
use proptest::prelude::*;

#[test]
fn galerkin_matches_collocation_oracle() {
    let grid = Grid::spectral(64).unwrap();
    let cases = [
        (TwistedSeries { holonomy: 1.0, periodic: TrigSeries::zero() }, TrigSeries::zero()),
        (
            TwistedSeries { holonomy: 0.0, periodic: TrigSeries::new(0.0, vec![(1, 0.0, 0.2)]) },
            TrigSeries::zero(),
        ),
        (
            TwistedSeries { holonomy: 1.0, periodic: TrigSeries::new(0.1, vec![(1, 0.0, 0.3)]) },
            TrigSeries::new(0.0, vec![(1, 0.1, 0.0), (2, 0.0, -0.05)]),
        ),
    ];
    for (k, u) in cases {
        let got = lambda_functional(&common::metric(&grid, &k, &u)).unwrap();
        let want = lambda_collocation(257, &k, &u);
        assert!((got.lambda - want).abs() <= 1e-8, "{} vs {want}", got.lambda);
        assert!(got.ground_state.min() > 0.0);
    }
}

#[test]
fn cusp_lambda_is_exact() {
    let grid = Grid::spectral(64).unwrap();
    let r = lambda_functional(&GroupoidMetric::cusp(&grid, 1.0)).unwrap();
    assert!((r.lambda + 1.0).abs() <= 1e-9);
}

#[test]
fn minimizer_attains_lambda() {
    let mut rng = common::rng(3);
    let inst = common::random_instance(&mut rng, 3);
    let grid = Grid::spectral(64).unwrap();
    let g = common::metric(&grid, &inst.k, &inst.u);
    let r = lambda_functional(&g).unwrap();
    let h = HaarWeight::new(r.minimizer_f.clone());
    let f = f_functional(&g, &h).unwrap();
    assert!((f - r.lambda).abs() < 1e-9, "F(g, f̃) = {f}, λ = {}", r.lambda);
}

#[test]
fn lambda_rises_to_zero_along_untwisted_flow() {
    let grid = Grid::spectral(64).unwrap();
    let k = TwistedField::from_fn(grid.spec(), 0.0, |y| 0.2 * (2.0 * PI * y).sin());
    let g = GroupoidMetric::new(grid.clone(), k, PeriodicField::zeros(64)).unwrap();
    let traj = evolve(&FlowState::initial(g), &FlowControls::new(&grid, 1.0, 0.05)).unwrap();
    let series = lambda_monotonicity(&traj).unwrap();
    assert!(series.is_monotone(), "{:?}", series.violations);
    assert!(series.samples[0].1 < -0.1);
    assert!(series.samples.last().unwrap().1.abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    /// Any unit-mass weight does at least as badly as the minimizer.
    #[test]
    fn lambda_bounds_every_normalized_weight(seed in any::<u64>(), amp in 0.05f64..2.0) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, 3);
        let grid = Grid::spectral(64).unwrap();
        let g = common::metric(&grid, &inst.k, &inst.u);
        let lam = lambda_functional(&g).unwrap().lambda;
        let f = common::random_series(&mut rng, 4, amp);
        let h = common::haar(&grid, &f).normalized(&g).unwrap();
        prop_assert!(f_functional(&g, &h).unwrap() >= lam - 1e-10);
    }
}
