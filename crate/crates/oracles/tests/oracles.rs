use nalgebra::DVector;
use std::f64::consts::TAU;

use groupoid_ricci_oracles::*;

#[test]
fn trig_derivatives() {
    let s = TrigSeries::new(0.5, vec![(2, 0.3, -0.2)]);
    let y = 0.17;
    let h = 1e-5;
    let fd = (s.eval(y + h, 0) - s.eval(y - h, 0)) / (2.0 * h);
    assert!((fd - s.eval(y, 1)).abs() < 1e-7);
    let fd2 = (s.eval(y + h, 1) - s.eval(y - h, 1)) / (2.0 * h);
    assert!((fd2 - s.eval(y, 2)).abs() < 1e-5);
}

#[test]
fn differentiation_matrices() {
    for n in [16usize, 17] {
        let v: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).sin()).collect();
        let dv = spectral_d1(n) * DVector::from_column_slice(&v);
        let d2v = spectral_d2(n) * DVector::from_column_slice(&v);
        for j in 0..n {
            let y = j as f64 / n as f64;
            assert!((dv[j] - TAU * (TAU * y).cos()).abs() < 1e-10);
            assert!((d2v[j] + TAU * TAU * (TAU * y).sin()).abs() < 1e-9);
        }
    }
}

#[test]
fn cusp_curvature() {
    let o = TensorOracle {
        k: TwistedSeries {
            holonomy: 1.5,
            periodic: TrigSeries::zero(),
        },
        u: TrigSeries::zero(),
        f: TrigSeries::zero(),
    };
    assert!((o.scalar_curvature(0.3) + 2.0 * 2.25).abs() < 1e-9);
}

#[test]
fn collocation_lambda_of_cusp() {
    let k = TwistedSeries {
        holonomy: 1.0,
        periodic: TrigSeries::zero(),
    };
    assert!((lambda_collocation(33, &k, &TrigSeries::zero()) + 1.0).abs() < 1e-10);
}
