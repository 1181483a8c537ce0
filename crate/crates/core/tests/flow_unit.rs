use groupoid_ricci::*;
use groupoid_ricci::flow::*;
use groupoid_ricci::twisted_grid::TwistedField;
use std::f64::consts::PI;

fn sine_metric(n: usize, lam: f64, amp: f64) -> GroupoidMetric {
    let grid = Grid::spectral(n).unwrap();
    let k = TwistedField::from_fn(grid.spec(), lam, |y| amp * (2.0 * PI * y).sin());
    GroupoidMetric::new(grid.clone(), k, PeriodicField::zeros(n)).unwrap()
}

#[test]
fn rhs_examples() {
    let grid = Grid::spectral(32).unwrap();
    let (a, b) = ricci_rhs(&GroupoidMetric::flat_torus(&grid));
    assert_eq!(a.sup_norm(), 0.0);
    assert_eq!(b.sup_norm(), 0.0);
    let (a, _) = ricci_rhs(&GroupoidMetric::cusp(&grid, 1.5));
    assert!(a.shift(-2.25).sup_norm() < 1e-13);
}

#[test]
fn rhs_matches_closed_form() {
    let g = sine_metric(64, 0.0, 0.1);
    let (a, _) = ricci_rhs(&g);
    let tau = 2.0 * PI;
    let exact = PeriodicField::from_fn(g.grid().spec(), |y| {
        -0.1 * tau * tau * (tau * y).sin() + (0.1 * tau * (tau * y).cos()).powi(2)
    });
    assert!(a.sub(&exact).sup_norm() < 1e-9);
}

#[test]
fn stability_limit_is_enforced() {
    let grid = Grid::spectral(32).unwrap();
    let s = FlowState::initial(GroupoidMetric::flat_torus(&grid));
    let opts = StepOptions::for_grid(&grid);
    let lim = stability_limit(&s.metric, opts.c_cfl);
    assert!(matches!(step(&s, 2.0 * lim, false, &opts), Err(FlowError::Stability { .. })));
    let next = step(&s, lim, false, &opts).unwrap();
    assert_eq!(next.metric, s.metric);
    assert_eq!(next.t, lim);
}

#[test]
fn coupled_flat_step_keeps_zero_weight() {
    let grid = Grid::spectral(32).unwrap();
    let s = FlowState::initial(GroupoidMetric::flat_torus(&grid));
    let opts = StepOptions::for_grid(&grid);
    let next = step(&s, stability_limit(&s.metric, opts.c_cfl), true, &opts).unwrap();
    assert_eq!(next.haar.f.sup_norm(), 0.0);
}

#[test]
fn rk4_local_error_is_fifth_order() {
    let g = sine_metric(32, 0.0, 0.1);
    let s = FlowState::initial(g);
    let opts = StepOptions::for_grid(s.grid());
    let dt = stability_limit(&s.metric, opts.c_cfl);
    let local_err = |dt: f64| {
        let one = step(&s, dt, false, &opts).unwrap();
        let half = step(&step(&s, dt / 2.0, false, &opts).unwrap(), dt / 2.0, false, &opts).unwrap();
        one.metric.u().sub(half.metric.u()).sup_norm()
    };
    let e1 = local_err(dt);
    let e2 = local_err(dt / 2.0);
    // one-step differences scale like dt⁵; accept anything clearly above 16x
    assert!(e1 / e2 > 16.0, "ratio {}", e1 / e2);
}

#[test]
fn schedule_times() {
    let t = CheckpointSchedule::Uniform { interval: 0.25 }.times(0.0, 1.0).unwrap();
    assert_eq!(t, vec![0.25, 0.5, 0.75, 1.0]);
    let t = CheckpointSchedule::Geometric { first: 1.0, ratio: 2.0 }.times(0.0, 5.0).unwrap();
    assert_eq!(t, vec![1.0, 2.0, 4.0, 5.0]);
    assert!(CheckpointSchedule::Uniform { interval: 0.0 }.times(0.0, 1.0).is_err());
}

#[test]
fn evolve_lands_on_checkpoints_and_keeps_holonomy() {
    let g = sine_metric(32, 1.0, 0.2);
    let lam_bits = g.holonomy().to_bits();
    let traj = evolve(&FlowState::initial(g.clone()), &FlowControls::new(g.grid(), 0.05, 0.01)).unwrap();
    assert_eq!(traj.times().len(), 6);
    for (i, s) in traj.checkpoints().iter().enumerate() {
        assert!((s.t - 0.01 * i as f64).abs() < 1e-14);
        assert_eq!(s.metric.holonomy().to_bits(), lam_bits);
    }
    assert!(traj.step_log().max_cfl_fraction().unwrap() <= 1.0 + 1e-12);
}

#[test]
fn evolve_rejects_bad_controls() {
    let g = sine_metric(32, 0.0, 0.1);
    let s = FlowState::initial(g.clone());
    let mut c = FlowControls::new(g.grid(), 0.0, 0.1);
    assert!(matches!(evolve(&s, &c), Err(FlowError::InvalidControls(_))));
    c.t_end = 1.0;
    c.dt = DtPolicy::Fixed { dt: 1.0 };
    assert!(matches!(evolve(&s, &c), Err(FlowError::Stability { .. })));
}

#[test]
fn blowup_threshold_truncates_run() {
    let g = sine_metric(32, 0.0, 0.5);
    let mut c = FlowControls::new(g.grid(), 0.1, 0.01);
    c.step.blowup_threshold = 1.0;
    match evolve(&FlowState::initial(g), &c) {
        Err(FlowError::TrajectoryBlowUp { partial, .. }) => assert_eq!(partial.len(), 1),
        other => panic!("expected blow-up, got {other:?}"),
    }
}
