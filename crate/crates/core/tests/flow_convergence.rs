use std::f64::consts::PI;

use groupoid_ricci::flow::{evolve, FlowControls, FlowState};
use groupoid_ricci::{Grid, GridSpec, GroupoidMetric, PeriodicField, Scheme, TwistedField};

fn evolve_on(grid: &Grid, t_end: f64) -> GroupoidMetric {
    let k = TwistedField::from_fn(grid.spec(), 1.0, |y| 0.3 * (2.0 * PI * y).sin());
    let u = PeriodicField::from_fn(grid.spec(), |y| 0.1 * (4.0 * PI * y).cos());
    let g = GroupoidMetric::new(grid.clone(), k, u).unwrap();
    evolve(&FlowState::initial(g), &FlowControls::new(grid, t_end, t_end))
        .unwrap()
        .last()
        .metric
        .clone()
}

/// Sup distance between `(k_per, u)` on a grid and every `stride`-th node of
/// a finer one.
fn distance(coarse: &GroupoidMetric, fine: &GroupoidMetric, stride: usize) -> f64 {
    let mut err = 0.0_f64;
    for j in 0..coarse.grid().n() {
        err = err
            .max((coarse.k().periodic().values()[j] - fine.k().periodic().values()[stride * j]).abs())
            .max((coarse.u().values()[j] - fine.u().values()[stride * j]).abs());
    }
    err
}

#[test]
fn resolutions_agree_at_unit_time() {
    let coarse = evolve_on(&Grid::spectral(64).unwrap(), 1.0);
    let fine = evolve_on(&Grid::spectral(128).unwrap(), 1.0);
    let err = distance(&coarse, &fine, 2);
    assert!(err <= 1e-6, "n = 64 and n = 128 differ by {err:e}");
}

#[test]
fn fourth_order_scheme_converges_to_spectral() {
    let reference = evolve_on(&Grid::spectral(64).unwrap(), 0.2);
    let errs: Vec<f64> = [16, 32]
        .iter()
        .map(|&n| {
            let grid = Grid::new(GridSpec::new(n, Scheme::Fd4).unwrap()).unwrap();
            distance(&evolve_on(&grid, 0.2), &reference, 64 / n)
        })
        .collect();
    // fourth order predicts a factor of 16
    assert!(errs[0] / errs[1] > 10.0, "{errs:?}");
}
