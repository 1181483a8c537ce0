//! Long-time diagnostics: blowdown invariants of `g(t)/t` and the
//! maximum-principle envelopes for `|∇k|²` and `H = (Δ_ḡk)²`.

use serde::{Deserialize, Serialize};

use super::{FlowError, FlowState, FlowTrajectory};
use crate::twisted_grid::PeriodicField;

/// Rescaled invariants of `ĝ(t) = g(t)/t` at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowdownSample {
    pub t: f64,
    /// `t·min|∇k|²`
    pub t_grad_min: f64,
    /// `t·max|∇k|²`
    pub t_grad_max: f64,
    /// `t²·max H`
    pub t2_h_max: f64,
    /// `t·max|R|`
    pub t_abs_r_max: f64,
    /// `t·min R` and `t·max R`
    pub t_r_min: f64,
    pub t_r_max: f64,
}

struct PointData {
    grad_sq: PeriodicField,
    h: PeriodicField,
    r: PeriodicField,
}

fn point_data(s: &FlowState) -> PointData {
    let jet = s.metric.jet();
    let lap = jet.laplacian_k();
    PointData {
        grad_sq: jet.grad_k_sq(),
        h: lap.map(|x| x * x),
        r: jet.scalar_curvature(),
    }
}

/// Blowdown series for all checkpoints with `t > 0`.
pub fn blowdown_diagnostics(traj: &FlowTrajectory) -> Vec<BlowdownSample> {
    traj.checkpoints()
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| {
            let d = point_data(s);
            let t = s.t;
            BlowdownSample {
                t,
                t_grad_min: t * d.grad_sq.min(),
                t_grad_max: t * d.grad_sq.max(),
                t2_h_max: t * t * d.h.max(),
                t_abs_r_max: t * d.r.sup_norm(),
                t_r_min: t * d.r.min(),
                t_r_max: t * d.r.max(),
            }
        })
        .collect()
}

/// `(α, β)` with `α ≤ |∇k|² ≤ β` on the whole circle, evaluated on the
/// trigonometric interpolant at `oversample·n` points. If `k_y` changes sign
/// the only certified lower bound is `α = 0`.
pub fn initial_envelope(state: &FlowState, oversample: usize) -> Result<(f64, f64), FlowError> {
    let grid = state.grid();
    let g = &state.metric;
    let ky = grid.derivative(g.k(), 1)?;
    let m = grid.n() * oversample.max(1);
    let pts: Vec<f64> = (0..m).map(|j| j as f64 / m as f64).collect();
    let ky_f = grid.interpolate(&ky, &pts)?;
    let u_f = grid.interpolate(g.u(), &pts)?;
    let q: Vec<f64> = ky_f.iter().zip(&u_f).map(|(a, u)| (-2.0 * u).exp() * a * a).collect();
    let changes_sign = ky_f.iter().any(|&a| a <= 0.0) && ky_f.iter().any(|&a| a >= 0.0);
    let alpha = if changes_sign {
        0.0
    } else {
        q.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let beta = q.iter().copied().fold(0.0, f64::max);
    Ok((alpha, beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    GradLower,
    GradUpper,
    HDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub t: f64,
    pub y: f64,
    pub bound: BoundKind,
    /// Amount by which the bound (including slack) is exceeded.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub t: f64,
    pub min_grad_sq: f64,
    pub max_grad_sq: f64,
    pub max_h: f64,
    pub max_t_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub alpha: f64,
    pub beta: f64,
    /// Fitted constant in `H ≤ C/(2α(t−t₀)+1)⁴`.
    pub h_constant: f64,
    /// Slack used for the pointwise gradient bounds.
    pub slack: f64,
    pub samples: Vec<MonitorSample>,
    pub violations: Vec<BoundViolation>,
}

impl MonitorReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// The violation with the largest margin.
    pub fn worst_violation(&self) -> Option<&BoundViolation> {
        self.violations
            .iter()
            .max_by(|a, b| a.margin.total_cmp(&b.margin))
    }
}

/// Absolute floor for the `H` comparison; roughly the square of the
/// round-off in a spectral second derivative.
const H_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorOptions {
    pub slack: f64,
    /// `C` is fitted on checkpoints with `t − t₀ ≤ fit_until` and checked on
    /// the rest.
    pub fit_until: f64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        MonitorOptions {
            slack: 1e-6,
            fit_until: 1.0,
        }
    }
}

/// Checks `α/(2α(t−t₀)+1) ≤ |∇k|² ≤ β/(2β(t−t₀)+1)` at every checkpoint and
/// node, where `t₀` is the first checkpoint time, and the `H` decay bound
/// with a constant fitted on early checkpoints.
///
/// `α = 0` is accepted (the lower envelope is then trivial and the `H`
/// bound degenerates to `H ≤ C`); `β` must be positive.
pub fn max_principle_monitor(
    traj: &FlowTrajectory,
    alpha: f64,
    beta: f64,
    opts: &MonitorOptions,
) -> Result<MonitorReport, FlowError> {
    let first = point_data(traj.first());
    let (qmin, qmax) = (first.grad_sq.min(), first.grad_sq.max());
    if !(alpha >= 0.0) || !(beta > 0.0) || alpha > beta {
        return Err(FlowError::Domain(format!(
            "need 0 ≤ α ≤ β and β > 0, got α = {alpha}, β = {beta}"
        )));
    }
    if alpha > qmin * (1.0 + 1e-12) || beta < qmax * (1.0 - 1e-12) {
        return Err(FlowError::Domain(format!(
            "(α, β) = ({alpha}, {beta}) does not enclose the initial range [{qmin}, {qmax}] of |∇k|²"
        )));
    }
    let grid = traj.grid().clone();
    let nodes = grid.nodes();
    let t0 = traj.first().t;
    let data: Vec<(f64, PointData)> = traj.checkpoints().iter().map(|s| (s.t, point_data(s))).collect();

    let disc = data
        .iter()
        .map(|(_, d)| grid.spectral_tail(&d.grad_sq).unwrap_or(0.0))
        .fold(0.0, f64::max);
    let slack = opts.slack + disc;

    let decay = |t: f64| (2.0 * alpha * (t - t0) + 1.0).powi(4);
    let h_constant = data
        .iter()
        .filter(|(t, _)| t - t0 <= opts.fit_until)
        .map(|(t, d)| d.h.max() * decay(*t))
        .fold(0.0, f64::max);

    let mut samples = Vec::with_capacity(data.len());
    let mut violations = Vec::new();
    for (t, d) in &data {
        let tau = t - t0;
        let lower = alpha / (2.0 * alpha * tau + 1.0);
        let upper = beta / (2.0 * beta * tau + 1.0);
        for (j, &q) in d.grad_sq.values().iter().enumerate() {
            if q < lower - slack {
                violations.push(BoundViolation {
                    t: *t,
                    y: nodes[j],
                    bound: BoundKind::GradLower,
                    margin: lower - slack - q,
                });
            }
            if q > upper + slack {
                violations.push(BoundViolation {
                    t: *t,
                    y: nodes[j],
                    bound: BoundKind::GradUpper,
                    margin: q - upper - slack,
                });
            }
        }
        if tau > opts.fit_until {
            let cap = h_constant / decay(*t) * (1.0 + opts.slack) + H_FLOOR;
            let (j, hmax) = d
                .h
                .values()
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
            if hmax > cap {
                violations.push(BoundViolation {
                    t: *t,
                    y: nodes[j],
                    bound: BoundKind::HDecay,
                    margin: hmax - cap,
                });
            }
        }
        samples.push(MonitorSample {
            t: *t,
            min_grad_sq: d.grad_sq.min(),
            max_grad_sq: d.grad_sq.max(),
            max_h: d.h.max(),
            max_t_r: t * d.r.sup_norm(),
        });
    }
    Ok(MonitorReport {
        alpha,
        beta,
        h_constant,
        slack,
        samples,
        violations,
    })
}
