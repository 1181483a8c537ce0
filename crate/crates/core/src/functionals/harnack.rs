//! Differential Harnack identity along a coupled trajectory.
//!
//! With `θ = d(k + f)`, `v = e^{-f}` solving the conjugate equation and
//! `H = R + 2 div θ − |θ|²`, the operator
//! `P = ∂_t + Δ_g − 2⟨θ₀, ∇·⟩ − Λ`, `Λ = −|∇k|²`, satisfies `P(v) = 0` and
//! `P(Hv) = 2|Ric + ∇θ|² v ≥ 0`.

use serde::{Deserialize, Serialize};

use super::{centered_weights, FunctionalError};
use crate::flow::FlowTrajectory;
use crate::geometry::{self, GroupoidMetric, HaarWeight};
use crate::twisted_grid::PeriodicField;

/// `H = R + 2 div θ − |θ|²`; note `div θ = Δ_g(k + f)`.
pub fn harnack_quantity(g: &GroupoidMetric, h: &HaarWeight) -> Result<PeriodicField, FunctionalError> {
    let grid = g.grid();
    let jet = g.jet();
    let (f_y, f_yy) = grid.derivatives(&h.f)?;
    let r = jet.scalar_curvature();
    let n = r.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let e = jet.exp_m2u.values()[j];
        let ky = jet.k_y.values()[j];
        let wy = ky + f_y.values()[j];
        let wyy = jet.k_yy.values()[j] + f_yy.values()[j];
        let lap_w = e * (wyy - jet.u_y.values()[j] * wy + ky * wy);
        out.push(r.values()[j] + 2.0 * lap_w - e * wy * wy);
    }
    Ok(PeriodicField::new(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackSample {
    pub t: f64,
    /// `sup|P(Hv) − 2|Ric + ∇θ|² v|`
    pub residual: f64,
    /// `sup|2|Ric + ∇θ|² v|`, for scale.
    pub rhs_sup: f64,
    /// `min 2|Ric + ∇θ|² v`
    pub rhs_min: f64,
}

/// `P(φ)` without the time derivative: `Δ_ḡφ − ⟨∇k, ∇φ⟩ + |∇k|²φ`.
fn spatial_part(g: &GroupoidMetric, phi: &PeriodicField) -> Result<PeriodicField, FunctionalError> {
    let jet = g.jet();
    let (p_y, p_yy) = g.grid().derivatives(phi)?;
    let n = phi.len();
    Ok(PeriodicField::new(
        (0..n)
            .map(|j| {
                let e = jet.exp_m2u.values()[j];
                let ky = jet.k_y.values()[j];
                e * (p_yy.values()[j] - (jet.u_y.values()[j] + ky) * p_y.values()[j] + ky * ky * phi.values()[j])
            })
            .collect(),
    ))
}

/// Residual of the identity at every interior checkpoint. `v_series` holds
/// `(t, v)` at the trajectory's checkpoint times, as returned by the
/// backward conjugate solve.
pub fn harnack_residual(
    traj: &FlowTrajectory,
    v_series: &[(f64, PeriodicField)],
) -> Result<Vec<HarnackSample>, FunctionalError> {
    let cps = traj.checkpoints();
    if v_series.len() != cps.len() {
        return Err(FunctionalError::Domain(format!(
            "{} densities for {} checkpoints",
            v_series.len(),
            cps.len()
        )));
    }
    let mut phi = Vec::with_capacity(cps.len());
    let mut weights = Vec::with_capacity(cps.len());
    for (s, (t, v)) in cps.iter().zip(v_series) {
        if (s.t - t).abs() > 1e-12 * t.abs().max(1.0) {
            return Err(FunctionalError::Domain(format!("density time {t} does not match checkpoint {}", s.t)));
        }
        s.metric.grid().check(v)?;
        if let Some(x) = v.values().iter().find(|x| !(**x > 0.0)) {
            return Err(FunctionalError::Domain(format!("density must be positive, found {x} at t = {t}")));
        }
        let h = HaarWeight::from_density(v);
        phi.push(harnack_quantity(&s.metric, &h)?.mul(v));
        weights.push(h);
    }
    let mut out = Vec::with_capacity(cps.len().saturating_sub(2));
    for i in 1..cps.len().saturating_sub(1) {
        let w = centered_weights(cps[i - 1].t, cps[i].t, cps[i + 1].t);
        let dphi = phi[i - 1]
            .scale(w[0])
            .add(&phi[i].scale(w[1]))
            .add(&phi[i + 1].scale(w[2]));
        let lhs = dphi.add(&spatial_part(&cps[i].metric, &phi[i])?);
        let tensor = geometry::soliton_residual(&cps[i].metric, &weights[i])?;
        let rhs = tensor.norm_sq().mul(&v_series[i].1).scale(2.0);
        out.push(HarnackSample {
            t: cps[i].t,
            residual: lhs.sub(&rhs).sup_norm(),
            rhs_sup: rhs.sup_norm(),
            rhs_min: rhs.min(),
        });
    }
    Ok(out)
}
