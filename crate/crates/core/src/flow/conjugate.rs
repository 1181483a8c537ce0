//! Backward solve of the conjugate heat equation
//! `v_t = −Δ_ḡv + ⟨∇k, ∇v⟩ − |∇k|² v` along a stored metric trajectory.
//!
//! In reversed time `τ = t_end − t` this is the parabolic problem
//! `v_τ = e^{-2u}(v_yy − (u_y + k_y) v_y + k_y² v)`, which conserves
//! `∫ v e^{u} dy`. The metric between checkpoints is reconstructed by
//! interpolation in `t`.

use serde::{Deserialize, Serialize};

use super::{default_cfl, ricci_rhs, FlowError, FlowTrajectory, HaarSource};
use crate::geometry::HaarWeight;
use crate::twisted_grid::{Grid, PeriodicField, Workspace};

/// How `(k, u)` are reconstructed between checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientInterpolation {
    /// Piecewise linear in `t`; second order in the checkpoint spacing.
    Linear,
    /// Cubic Hermite using the flow right-hand side as the time derivative
    /// at each checkpoint; fourth order.
    Hermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugateOptions {
    pub interpolation: CoefficientInterpolation,
    /// Defaults to the grid's flow CFL constant.
    pub c_cfl: Option<f64>,
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        ConjugateOptions {
            interpolation: CoefficientInterpolation::Hermite,
            c_cfl: None,
        }
    }
}

/// A checkpoint reduced to what the coefficients need. Spatial derivatives
/// are taken once here; interpolation in `t` is linear in the node data, so
/// interpolating `k_y` and `u_y` equals differentiating the interpolant.
struct Node {
    t: f64,
    k_y: Vec<f64>,
    u: Vec<f64>,
    u_y: Vec<f64>,
    /// `k_t = u_t` and its `y`-derivative, for Hermite reconstruction.
    rate: Option<(Vec<f64>, Vec<f64>)>,
}

struct Coefficients {
    e2: Vec<f64>,
    adv: Vec<f64>,
    react: Vec<f64>,
}

impl Coefficients {
    fn new(n: usize) -> Self {
        Coefficients {
            e2: vec![0.0; n],
            adv: vec![0.0; n],
            react: vec![0.0; n],
        }
    }

    fn fill(&mut self, lam: f64, k_y: &[f64], u: &[f64], u_y: &[f64]) {
        for j in 0..u.len() {
            let kyj = k_y[j] + lam;
            self.e2[j] = (-2.0 * u[j]).exp();
            self.adv[j] = u_y[j] + kyj;
            self.react[j] = kyj * kyj;
        }
    }
}

/// Time weights of the reconstruction at `t` within `[a.t, b.t]`:
/// `(value_a, rate_a, value_b, rate_b)`.
fn weights(a: &Node, b: &Node, t: f64, mode: CoefficientInterpolation) -> [f64; 4] {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    match mode {
        CoefficientInterpolation::Linear => [1.0 - s, 0.0, s, 0.0],
        CoefficientInterpolation::Hermite => {
            let (s2, s3) = (s * s, s * s * s);
            [2.0 * s3 - 3.0 * s2 + 1.0, h * (s3 - 2.0 * s2 + s), -2.0 * s3 + 3.0 * s2, h * (s3 - s2)]
        }
    }
}

fn blend(w: [f64; 4], pa: &[f64], ra: Option<&[f64]>, pb: &[f64], rb: Option<&[f64]>, out: &mut [f64]) {
    match (ra, rb) {
        (Some(ra), Some(rb)) => {
            for j in 0..out.len() {
                out[j] = w[0] * pa[j] + w[1] * ra[j] + w[2] * pb[j] + w[3] * rb[j];
            }
        }
        _ => {
            for j in 0..out.len() {
                out[j] = w[0] * pa[j] + w[2] * pb[j];
            }
        }
    }
}

fn rates(n: &Node) -> Option<(&[f64], &[f64])> {
    n.rate.as_ref().map(|r| (r.0.as_slice(), r.1.as_slice()))
}

/// Scratch for reconstructing fields between two nodes.
struct Fields {
    k_y: Vec<f64>,
    u: Vec<f64>,
    u_y: Vec<f64>,
}

impl Fields {
    fn new(n: usize) -> Self {
        Fields {
            k_y: vec![0.0; n],
            u: vec![0.0; n],
            u_y: vec![0.0; n],
        }
    }

    fn interpolate(&mut self, a: &Node, b: &Node, t: f64, mode: CoefficientInterpolation) {
        let w = weights(a, b, t, mode);
        let (ra, rb) = (rates(a), rates(b));
        blend(w, &a.k_y, ra.map(|r| r.1), &b.k_y, rb.map(|r| r.1), &mut self.k_y);
        blend(w, &a.u, ra.map(|r| r.0), &b.u, rb.map(|r| r.0), &mut self.u);
        blend(w, &a.u_y, ra.map(|r| r.1), &b.u_y, rb.map(|r| r.1), &mut self.u_y);
    }
}

/// `e^{-2u}(v_yy − (u_y + k_y)v_y + k_y² v)` into `out`.
struct Apply {
    ws: Workspace,
    vy: Vec<f64>,
    vyy: Vec<f64>,
}

impl Apply {
    fn new(grid: &Grid) -> Self {
        Apply {
            ws: grid.workspace(),
            vy: vec![0.0; grid.n()],
            vyy: vec![0.0; grid.n()],
        }
    }

    fn run(&mut self, grid: &Grid, c: &Coefficients, v: &[f64], out: &mut [f64]) {
        grid.d12_into(v, &mut self.ws, &mut self.vy, &mut self.vyy);
        for j in 0..v.len() {
            out[j] = c.e2[j] * (self.vyy[j] - c.adv[j] * self.vy[j] + c.react[j] * v[j]);
        }
    }
}

fn nodes(traj: &FlowTrajectory, mode: CoefficientInterpolation) -> Vec<Node> {
    let grid = traj.grid();
    traj.checkpoints()
        .iter()
        .map(|s| {
            let u = s.metric.u().values().to_vec();
            Node {
                t: s.t,
                k_y: grid.d1(s.metric.k().periodic().values()),
                u_y: grid.d1(&u),
                u,
                rate: match mode {
                    CoefficientInterpolation::Linear => None,
                    CoefficientInterpolation::Hermite => {
                        let r = ricci_rhs(&s.metric).0.into_values();
                        let r_y = grid.d1(&r);
                        Some((r, r_y))
                    }
                },
            }
        })
        .collect()
}

/// Solves the conjugate equation from `v_end` at the last checkpoint back to
/// the first. Returns `(t, v(t))` at every checkpoint in increasing time.
pub fn backward_conjugate_solve(
    traj: &FlowTrajectory,
    v_end: &PeriodicField,
    opts: &ConjugateOptions,
) -> Result<Vec<(f64, PeriodicField)>, FlowError> {
    let grid = traj.grid().clone();
    grid.check(v_end)?;
    if let Some((j, v)) = v_end.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(FlowError::Domain(format!("v_end must be strictly positive; v[{j}] = {v}")));
    }
    let c_cfl = opts.c_cfl.unwrap_or_else(|| default_cfl(grid.scheme()));
    let lam = traj.first().metric.holonomy();
    let mode = opts.interpolation;
    let nodes = nodes(traj, mode);
    let h = grid.spec().spacing();
    let n = grid.n();

    let mut fields = Fields::new(n);
    let mut apply = Apply::new(&grid);
    let (mut c_start, mut c_mid, mut c_end) = (Coefficients::new(n), Coefficients::new(n), Coefficients::new(n));
    let mut d = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut stage = vec![0.0; n];

    let mut v = v_end.values().to_vec();
    let mut out = vec![(traj.last().t, v_end.clone())];
    for i in (0..nodes.len().saturating_sub(1)).rev() {
        let (a, b) = (&nodes[i], &nodes[i + 1]);
        let span = b.t - a.t;
        let umin = a.u.iter().chain(&b.u).copied().fold(f64::INFINITY, f64::min);
        // interpolants may dip slightly below both endpoints
        let dt_max = 0.95 * c_cfl * h * h * (2.0 * umin).exp();
        let m = (span / dt_max).ceil().max(1.0) as usize;
        let dt = span / m as f64;
        let mut coeff_at = |t: f64, c: &mut Coefficients| {
            if t >= b.t {
                c.fill(lam, &b.k_y, &b.u, &b.u_y);
            } else if t <= a.t {
                c.fill(lam, &a.k_y, &a.u, &a.u_y);
            } else {
                fields.interpolate(a, b, t, mode);
                c.fill(lam, &fields.k_y, &fields.u, &fields.u_y);
            }
        };
        coeff_at(b.t, &mut c_start);
        for s in 0..m {
            let t0 = b.t - s as f64 * dt;
            let t1 = if s + 1 == m { a.t } else { b.t - (s + 1) as f64 * dt };
            coeff_at(0.5 * (t0 + t1), &mut c_mid);
            coeff_at(t1, &mut c_end);
            apply.run(&grid, &c_start, &v, &mut d[0]);
            for j in 0..n {
                stage[j] = v[j] + 0.5 * dt * d[0][j];
            }
            apply.run(&grid, &c_mid, &stage, &mut d[1]);
            for j in 0..n {
                stage[j] = v[j] + 0.5 * dt * d[1][j];
            }
            apply.run(&grid, &c_mid, &stage, &mut d[2]);
            for j in 0..n {
                stage[j] = v[j] + dt * d[2][j];
            }
            apply.run(&grid, &c_end, &stage, &mut d[3]);
            for j in 0..n {
                v[j] += dt / 6.0 * (d[0][j] + 2.0 * d[1][j] + 2.0 * d[2][j] + d[3][j]);
            }
            if let Some((j, x)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
                return Err(FlowError::NumericalFailure(format!(
                    "conjugate solution lost positivity at t = {t1}, node {j} (v = {x}); reduce the step"
                )));
            }
            std::mem::swap(&mut c_start, &mut c_end);
        }
        out.push((a.t, PeriodicField::new(v.clone())));
    }
    out.reverse();
    Ok(out)
}

/// Runs the backward solve and stores `f = −ln v` as the Haar weight of
/// each checkpoint.
pub fn couple_with_conjugate(
    traj: &FlowTrajectory,
    v_end: &PeriodicField,
    opts: &ConjugateOptions,
) -> Result<FlowTrajectory, FlowError> {
    let series = backward_conjugate_solve(traj, v_end, opts)?;
    let weights = series.iter().map(|(_, v)| HaarWeight::from_density(v)).collect();
    traj.with_haar(weights, HaarSource::Conjugate)
}

/// Largest midpoint gap between linear and Hermite reconstructions of
/// `(k_y, u, u_y)`; an estimate of the linear interpolation error.
pub fn interpolation_defect(traj: &FlowTrajectory) -> f64 {
    let nodes = nodes(traj, CoefficientInterpolation::Hermite);
    let n = traj.grid().n();
    let (mut lin, mut her) = (Fields::new(n), Fields::new(n));
    let mut worst = 0.0_f64;
    for pair in nodes.windows(2) {
        let t = 0.5 * (pair[0].t + pair[1].t);
        lin.interpolate(&pair[0], &pair[1], t, CoefficientInterpolation::Linear);
        her.interpolate(&pair[0], &pair[1], t, CoefficientInterpolation::Hermite);
        for (x, y) in lin.k_y.iter().chain(&lin.u).chain(&lin.u_y).zip(her.k_y.iter().chain(&her.u).chain(&her.u_y)) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}
