mod common;

use groupoid_ricci::geometry::{scalar_curvature, soliton_residual};
use groupoid_ricci::Grid;
use groupoid_ricci_oracles::TensorOracle;
use proptest::prelude::*;

fn compare(seed: u64, n: usize) -> (f64, f64) {
    let mut rng = common::rng(seed);
    let inst = common::random_instance(&mut rng, 6);
    let grid = Grid::spectral(n).unwrap();
    let g = common::metric(&grid, &inst.k, &inst.u);
    let h = common::haar(&grid, &inst.f);
    let r = scalar_curvature(&g);
    let t = soliton_residual(&g, &h).unwrap();
    let oracle = TensorOracle { k: inst.k, u: inst.u, f: inst.f };
    let mut r_err = 0.0_f64;
    let mut t_err = 0.0_f64;
    for (j, y) in grid.nodes().into_iter().enumerate() {
        r_err = r_err.max((r.values()[j] - oracle.scalar_curvature(y)).abs());
        let (xx, yy, xy) = oracle.soliton_tensor(y);
        t_err = t_err
            .max((t.a_x.values()[j] - xx).abs())
            .max((t.a_s.values()[j] - yy).abs())
            .max(xy.abs());
    }
    (r_err, t_err)
}

#[test]
fn twenty_random_metrics_match_tensor_calculus() {
    for seed in 0..20 {
        let (r_err, t_err) = compare(seed, 128);
        assert!(r_err <= 1e-8, "seed {seed}: scalar curvature off by {r_err:e}");
        assert!(t_err <= 1e-6, "seed {seed}: soliton tensor off by {t_err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn curvature_matches_oracle_on_any_seed(seed in any::<u64>()) {
        let (r_err, t_err) = compare(seed, 64);
        prop_assert!(r_err <= 1e-8);
        prop_assert!(t_err <= 1e-6);
    }
}
