//! Energy comparing two solutions with the same initial data:
//! `E(t) = ∫(t⁻¹|h|² + t^{-α}|A|² + |S|²) dη` with `h = g − g̃`,
//! `A = Γ − Γ̃` and `S = Rm − R̃m`, all normed by `g(t)`.

use serde::{Deserialize, Serialize};

use super::FunctionalError;
use crate::flow::FlowTrajectory;
use crate::geometry::{self, GroupoidMetric, HaarWeight};
use crate::twisted_grid::PeriodicField;

pub const DEFAULT_ALPHA_EXP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub t: f64,
    /// `∫|S|² dη`
    pub s: f64,
    /// `t⁻¹∫|h|² dη`
    pub h: f64,
    /// `t^{-α}∫|A|² dη`
    pub i: f64,
    pub e: f64,
}

struct Pointwise {
    h2: PeriodicField,
    a2: PeriodicField,
    s2: PeriodicField,
}

/// For diagonal metrics `diag(e^{2k}, e^{2u})` the only Christoffel symbols
/// are `Γ^x_{xy} = k_y`, `Γ^y_{xx} = −k_y e^{2k−2u}` and `Γ^y_{yy} = u_y`; in
/// two dimensions `Rm` is determined by the Gauss curvature `R/2`.
fn pointwise(a: &GroupoidMetric, b: &GroupoidMetric) -> Pointwise {
    let ja = a.jet();
    let jb = b.jet();
    let ra = ja.scalar_curvature();
    let rb = jb.scalar_curvature();
    let n = ra.len();
    let mut h2 = Vec::with_capacity(n);
    let mut a2 = Vec::with_capacity(n);
    let mut s2 = Vec::with_capacity(n);
    for j in 0..n {
        let dk = b.k().periodic().values()[j] - a.k().periodic().values()[j];
        let du = b.u().values()[j] - a.u().values()[j];
        let ek = (2.0 * dk).exp();
        let eu = (2.0 * du).exp();
        h2.push((1.0 - ek).powi(2) + (1.0 - eu).powi(2));
        let ky = ja.k_y.values()[j];
        let kt = jb.k_y.values()[j];
        let uy = ja.u_y.values()[j];
        let ut = jb.u_y.values()[j];
        let cross = ky - kt * ek / eu;
        a2.push(ja.exp_m2u.values()[j] * (2.0 * (ky - kt).powi(2) + (uy - ut).powi(2) + cross * cross));
        s2.push((ra.values()[j] - rb.values()[j] * ek * eu).powi(2));
    }
    Pointwise {
        h2: PeriodicField::new(h2),
        a2: PeriodicField::new(a2),
        s2: PeriodicField::new(s2),
    }
}

fn breakdown(t: f64, a: &GroupoidMetric, ha: &HaarWeight, b: &GroupoidMetric, alpha: f64) -> Result<EnergyBreakdown, FunctionalError> {
    let rho = geometry::orbit_measure(a, ha)?;
    let p = pointwise(a, b);
    let s = p.s2.mul(&rho).mean();
    let h_int = p.h2.mul(&rho).mean();
    let a_int = p.a2.mul(&rho).mean();
    // at t = 0 the weighted terms are finite only when their integrands vanish
    let weigh = |x: f64, w: f64| if x == 0.0 { 0.0 } else { x * w };
    let h = weigh(h_int, 1.0 / t);
    let i = weigh(a_int, t.powf(-alpha));
    Ok(EnergyBreakdown { t, s, h, i, e: s + h + i })
}

pub fn uniqueness_energy(
    traj_a: &FlowTrajectory,
    traj_b: &FlowTrajectory,
    alpha_exp: f64,
) -> Result<Vec<EnergyBreakdown>, FunctionalError> {
    if !(alpha_exp > 0.0 && alpha_exp < 1.0) {
        return Err(FunctionalError::Domain(format!("α must lie in (0, 1), got {alpha_exp}")));
    }
    if traj_a.grid() != traj_b.grid() {
        return Err(FunctionalError::Domain("trajectories use different grids".into()));
    }
    if traj_a.len() != traj_b.len() {
        return Err(FunctionalError::Domain(format!(
            "checkpoint counts differ: {} vs {}",
            traj_a.len(),
            traj_b.len()
        )));
    }
    if traj_a.first().metric.holonomy() != traj_b.first().metric.holonomy() {
        return Err(FunctionalError::Domain("trajectories carry different holonomies".into()));
    }
    let mut out = Vec::with_capacity(traj_a.len());
    for (sa, sb) in traj_a.checkpoints().iter().zip(traj_b.checkpoints()) {
        if (sa.t - sb.t).abs() > 1e-12 * sa.t.abs().max(1.0) {
            return Err(FunctionalError::Domain(format!(
                "checkpoint times differ: {} vs {}",
                sa.t, sb.t
            )));
        }
        out.push(breakdown(sa.t, &sa.metric, &sa.haar, &sb.metric, alpha_exp)?);
    }
    Ok(out)
}

/// Least-squares slope of `ln E` against `t` over `t_min ≤ t ≤ t_max`,
/// ignoring zero energies. `None` if fewer than two usable points remain.
pub fn energy_growth_rate(series: &[EnergyBreakdown], t_min: f64, t_max: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|b| b.t >= t_min && b.t <= t_max && b.e > 0.0)
        .map(|b| (b.t, b.e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let tx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ty = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tx) * (p.1 - ty)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
