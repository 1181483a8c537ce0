//! The `F`- and `λ`-functionals, their monotonicity along the flow, the
//! uniqueness energy and the differential Harnack identity.

mod energy;
mod harnack;
mod lambda;

pub use energy::{energy_growth_rate, uniqueness_energy, EnergyBreakdown, DEFAULT_ALPHA_EXP};
pub use harnack::{harnack_quantity, harnack_residual, HarnackSample};
pub use lambda::{lambda_functional, lambda_monotonicity, LambdaResult, LambdaSeries};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{FlowError, FlowTrajectory, HaarSource};
use crate::geometry::{self, GeometryError, GroupoidMetric, HaarWeight};
use crate::twisted_grid::GridError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionalError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("ground state changes sign (value {value} at y = {y})")]
    GroundStateSignChange { y: f64, value: f64 },
}

/// `F(g, f) = ∮ (R + |θ|²) e^{-f} e^{u} dy` with `θ = d(k + f)`.
pub fn f_functional(g: &GroupoidMetric, h: &HaarWeight) -> Result<f64, FunctionalError> {
    let jet = g.jet();
    let theta = geometry::mean_curvature_form(g, h)?;
    let rho = geometry::orbit_measure(g, h)?;
    let r = jet.scalar_curvature();
    let n = r.len();
    let mut acc = 0.0;
    for j in 0..n {
        let th = theta.values()[j];
        acc += (r.values()[j] + jet.exp_m2u.values()[j] * th * th) * rho.values()[j];
    }
    Ok(acc / n as f64)
}

/// `2∫|Ric + ½𝓛_{θ♯}g|² dη`.
pub fn f_variation_rhs(g: &GroupoidMetric, h: &HaarWeight) -> Result<f64, FunctionalError> {
    let t = geometry::soliton_residual(g, h)?;
    let rho = geometry::orbit_measure(g, h)?;
    Ok(2.0 * t.norm_sq().mul(&rho).mean())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FVariationSample {
    pub t: f64,
    pub f_value: f64,
    /// Centred difference of `F` across neighbouring checkpoints.
    pub df_dt: f64,
    pub rhs_integral: f64,
    pub residual: f64,
}

/// Three-point derivative weights at the middle of a possibly uneven stencil.
pub fn centered_weights(t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    let h1 = t1 - t0;
    let h2 = t2 - t1;
    [
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    ]
}

fn require_weighted(traj: &FlowTrajectory) -> Result<(), FunctionalError> {
    if traj.haar_source() == HaarSource::Reference {
        return Err(FunctionalError::Domain(
            "trajectory carries the reference Haar system only; couple it first".into(),
        ));
    }
    Ok(())
}

/// `F` at every checkpoint.
pub fn f_series(traj: &FlowTrajectory) -> Result<Vec<(f64, f64)>, FunctionalError> {
    traj.checkpoints()
        .iter()
        .map(|s| Ok((s.t, f_functional(&s.metric, &s.haar)?)))
        .collect()
}

/// `|dF/dt − 2∫|Ric + ½𝓛_{θ♯}g|² dη|` at every interior checkpoint.
pub fn f_variation_residual(traj: &FlowTrajectory) -> Result<Vec<FVariationSample>, FunctionalError> {
    require_weighted(traj)?;
    let f = f_series(traj)?;
    let cps = traj.checkpoints();
    let mut out = Vec::with_capacity(cps.len().saturating_sub(2));
    for i in 1..cps.len().saturating_sub(1) {
        let w = centered_weights(f[i - 1].0, f[i].0, f[i + 1].0);
        let df = w[0] * f[i - 1].1 + w[1] * f[i].1 + w[2] * f[i + 1].1;
        let rhs = f_variation_rhs(&cps[i].metric, &cps[i].haar)?;
        out.push(FVariationSample {
            t: f[i].0,
            f_value: f[i].1,
            df_dt: df,
            rhs_integral: rhs,
            residual: (df - rhs).abs(),
        });
    }
    Ok(out)
}

/// Checkpoint pairs where `F` decreases by more than `slack`.
pub fn f_monotonicity_violations(series: &[(f64, f64)], slack: f64) -> Vec<(f64, f64)> {
    series
        .windows(2)
        .filter(|w| w[1].1 < w[0].1 - slack)
        .map(|w| (w[1].0, w[0].1 - w[1].1))
        .collect()
}
