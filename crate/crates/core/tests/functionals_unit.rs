use groupoid_ricci::*;
use groupoid_ricci::functionals::*;
use groupoid_ricci::twisted_grid::Grid;

#[test]
fn f_examples() {
    let grid = Grid::spectral(32).unwrap();
    let flat = GroupoidMetric::flat_torus(&grid);
    assert_eq!(f_functional(&flat, &HaarWeight::reference(32)).unwrap(), 0.0);
    for lam in [0.5, 1.0, 2.0] {
        let cusp = GroupoidMetric::cusp(&grid, lam);
        let f = f_functional(&cusp, &HaarWeight::reference(32)).unwrap();
        assert!((f + lam * lam).abs() < 1e-12);
    }
}

#[test]
fn centered_weights_are_exact_for_quadratics() {
    let (t0, t1, t2) = (0.0, 0.3, 0.7);
    let w = centered_weights(t0, t1, t2);
    let q = |t: f64| 2.0 + 3.0 * t - t * t;
    let d = w[0] * q(t0) + w[1] * q(t1) + w[2] * q(t2);
    assert!((d - (3.0 - 2.0 * t1)).abs() < 1e-13);
}

#[test]
fn monotonicity_violations_are_reported() {
    let s = vec![(0.0, 1.0), (1.0, 2.0), (2.0, 1.5)];
    assert_eq!(f_monotonicity_violations(&s, 1e-9), vec![(2.0, 0.5)]);
}
