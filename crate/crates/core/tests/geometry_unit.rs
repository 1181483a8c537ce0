use groupoid_ricci::*;
use groupoid_ricci::geometry::*;
use std::f64::consts::PI;

const TAU: f64 = 2.0 * PI;

fn metric(n: usize, lam: f64, k: impl Fn(f64) -> f64, u: impl Fn(f64) -> f64) -> GroupoidMetric {
    let grid = Grid::spectral(n).unwrap();
    let kf = TwistedField::from_fn(grid.spec(), lam, k);
    let uf = PeriodicField::from_fn(grid.spec(), u);
    GroupoidMetric::new(grid, kf, uf).unwrap()
}

#[test]
fn flat_torus_is_flat() {
    let g = metric(32, 0.0, |_| 0.7, |_| -0.3);
    assert!(scalar_curvature(&g).sup_norm() < 1e-13);
}

#[test]
fn cusp_has_constant_negative_curvature() {
    for lam in [0.5, 1.0, 2.0] {
        let g = GroupoidMetric::cusp(&Grid::spectral(32).unwrap(), lam);
        let r = scalar_curvature(&g);
        assert!(r.shift(2.0 * lam * lam).sup_norm() < 1e-12);
    }
}

#[test]
fn grad_norm_examples() {
    let g = metric(64, 0.0, |_| 0.0, |_| 0.3);
    let w = PeriodicField::from_fn(g.grid().spec(), |y| (TAU * y).sin());
    let got = grad_norm_sq(&g, &w).unwrap();
    let exact = PeriodicField::from_fn(g.grid().spec(), |y| {
        (-0.6f64).exp() * TAU * TAU * (TAU * y).cos().powi(2)
    });
    assert!(got.sub(&exact).sup_norm() <= 1e-10);
    let c = PeriodicField::constant(64, 4.0);
    assert!(grad_norm_sq(&g, &c).unwrap().sup_norm() < 1e-20);
    let cusp = GroupoidMetric::cusp(g.grid(), 1.5);
    let q = grad_norm_sq(&cusp, cusp.k()).unwrap();
    assert!(q.shift(-2.25).sup_norm() < 1e-13);
}

#[test]
fn laplacian_examples() {
    let g = metric(64, 0.0, |_| 0.0, |_| 0.0);
    let w = PeriodicField::from_fn(g.grid().spec(), |y| (TAU * y).sin());
    let lap = laplace_beltrami(&g, &w, Ambient::OrbitSpace).unwrap();
    let exact = w.scale(-TAU * TAU);
    assert!(lap.sub(&exact).sup_norm() <= 1e-10);
    let cusp = GroupoidMetric::cusp(g.grid(), 0.8);
    let lk = laplace_beltrami(&cusp, cusp.k(), Ambient::TotalSpace).unwrap();
    let r = scalar_curvature(&cusp);
    assert!(lk.add(&r.scale(0.5)).sup_norm() < 1e-12);
    assert!(lk.shift(-0.64).sup_norm() < 1e-12);
}

#[test]
fn mean_curvature_examples() {
    let grid = Grid::spectral(64).unwrap();
    let g = GroupoidMetric::cusp(&grid, 1.3);
    let h = HaarWeight::new(PeriodicField::from_fn(grid.spec(), |y| (TAU * y).sin()));
    let theta = mean_curvature_form(&g, &h).unwrap();
    let exact = PeriodicField::from_fn(grid.spec(), |y| 1.3 + TAU * (TAU * y).cos());
    assert!(theta.sub(&exact).sup_norm() < 1e-11);
    assert!((theta.mean() - 1.3).abs() < 1e-12);
    let flat = GroupoidMetric::flat_torus(&grid);
    assert!(mean_curvature_form(&flat, &HaarWeight::reference(64)).unwrap().sup_norm() < 1e-15);
}

#[test]
fn orbit_measure_examples() {
    let grid = Grid::spectral(64).unwrap();
    let flat = GroupoidMetric::flat_torus(&grid);
    let h = HaarWeight::new(PeriodicField::constant(64, 2f64.ln()));
    let rho = orbit_measure(&flat, &h).unwrap();
    assert!(rho.shift(-0.5).sup_norm() < 1e-15);
    assert!((total_mass(&flat, &HaarWeight::reference(64)).unwrap() - 1.0).abs() < 1e-15);
    let h_norm = h.normalized(&flat).unwrap();
    assert!((total_mass(&flat, &h_norm).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn soliton_residual_trace_identity() {
    let g = metric(128, 1.0, |y| 0.1 * (TAU * y).sin(), |y| 0.2 * (TAU * y).cos());
    let h = HaarWeight::new(PeriodicField::from_fn(g.grid().spec(), |y| 0.3 * (2.0 * TAU * y).sin()));
    let t = soliton_residual(&g, &h).unwrap();
    let w = TwistedField::new(g.k().periodic().add(&h.f), g.holonomy());
    let lap = laplace_beltrami(&g, &w, Ambient::TotalSpace).unwrap();
    let expected = scalar_curvature(&g).add(&lap);
    assert!(t.trace().sub(&expected).sup_norm() < 1e-9);
}

#[test]
fn flat_torus_soliton_residual_vanishes() {
    let grid = Grid::spectral(32).unwrap();
    let g = GroupoidMetric::flat_torus(&grid);
    let t = soliton_residual(&g, &HaarWeight::reference(32)).unwrap();
    assert_eq!(t.sup_norm(), 0.0);
}

#[test]
fn ibp_vanishes_for_zero_form() {
    let g = metric(32, 1.0, |y| 0.1 * (TAU * y).sin(), |y| 0.2 * (TAU * y).cos());
    let h = HaarWeight::reference(32);
    let zero = PeriodicField::zeros(32);
    let omega = PeriodicField::from_fn(g.grid().spec(), |y| (TAU * y).cos());
    assert_eq!(ibp_residual(&g, &h, &zero, &omega).unwrap(), 0.0);
}

#[test]
fn mismatched_haar_is_rejected() {
    let grid = Grid::spectral(32).unwrap();
    let g = GroupoidMetric::flat_torus(&grid);
    assert!(matches!(
        orbit_measure(&g, &HaarWeight::reference(16)),
        Err(GeometryError::Grid(GridError::DimensionMismatch { .. }))
    ));
}
