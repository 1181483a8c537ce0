//! Reduced Ricci flow `k_t = u_t = Δ_ḡk + |∇k|²`, optionally coupled to the
//! forward Haar-weight equation, plus the backward conjugate solve and the
//! long-time diagnostics.
//!
//! Only the periodic part of `k` is integrated; the holonomy is copied from
//! state to state and therefore never changes.

mod conjugate;
mod monitor;

pub use conjugate::{
    backward_conjugate_solve, couple_with_conjugate, interpolation_defect, CoefficientInterpolation,
    ConjugateOptions,
};
pub use monitor::{
    blowdown_diagnostics, initial_envelope, max_principle_monitor, BlowdownSample, BoundKind,
    BoundViolation, MonitorOptions, MonitorReport, MonitorSample,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, GroupoidMetric, HaarWeight};
use crate::twisted_grid::{Grid, GridError, PeriodicField, Scheme, Workspace};

/// RK4 stays stable on the negative real axis up to `|z| ≈ 2.785`; the
/// spectral second derivative reaches `π²/h²`, so the admissible constant is
/// about `0.28`.
pub const DEFAULT_CFL_SPECTRAL: f64 = 0.25;
pub const DEFAULT_CFL_FD4: f64 = 0.4;
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid flow controls: {0}")]
    InvalidControls(String),
    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    Stability { dt: f64, limit: f64 },
    #[error("blow-up at t = {t}: max|R| = {max_curvature:e}")]
    BlowUp {
        t: f64,
        max_curvature: f64,
        last_valid: Box<FlowState>,
    },
    #[error("blow-up at t = {t}: max|R| = {max_curvature:e}; trajectory truncated")]
    TrajectoryBlowUp {
        t: f64,
        max_curvature: f64,
        partial: Box<FlowTrajectory>,
    },
    #[error("time step underflow at t = {t} (dt = {dt:e})")]
    Stagnation { t: f64, dt: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// `(g(t), Haar weight)` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub metric: GroupoidMetric,
    pub haar: HaarWeight,
}

impl FlowState {
    pub fn new(t: f64, metric: GroupoidMetric, haar: HaarWeight) -> Result<Self, FlowError> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(FlowError::Domain(format!("time must be finite and nonnegative, got {t}")));
        }
        metric.grid().check(&haar.f)?;
        Ok(FlowState { t, metric, haar })
    }

    /// State at `t = 0` with the reference Haar system.
    pub fn initial(metric: GroupoidMetric) -> Self {
        let n = metric.grid().n();
        FlowState {
            t: 0.0,
            metric,
            haar: HaarWeight::reference(n),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.metric.grid()
    }
}

/// Where the Haar weights stored in a trajectory came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaarSource {
    /// The metric-generated system; `f ≡ 0` throughout.
    Reference,
    /// Integrated forward together with the metric.
    ForwardCoupled,
    /// Obtained from the backward conjugate solve.
    Conjugate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    /// `dt` divided by the stability limit at the start of the step.
    pub cfl_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepLog {
    pub records: Vec<StepRecord>,
}

impl StepLog {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn dt_min(&self) -> Option<f64> {
        self.records.iter().map(|r| r.dt).reduce(f64::min)
    }

    pub fn dt_max(&self) -> Option<f64> {
        self.records.iter().map(|r| r.dt).reduce(f64::max)
    }

    pub fn max_cfl_fraction(&self) -> Option<f64> {
        self.records.iter().map(|r| r.cfl_fraction).reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    checkpoints: Vec<FlowState>,
    step_log: StepLog,
    haar_source: HaarSource,
}

impl FlowTrajectory {
    /// Builds a trajectory from externally produced states.
    pub fn from_checkpoints(checkpoints: Vec<FlowState>, haar_source: HaarSource) -> Result<Self, FlowError> {
        let first = checkpoints
            .first()
            .ok_or_else(|| FlowError::Domain("a trajectory needs at least one checkpoint".into()))?;
        let grid = first.grid().clone();
        let lam = first.metric.holonomy();
        for pair in checkpoints.windows(2) {
            if !(pair[1].t > pair[0].t) {
                return Err(FlowError::Domain(format!(
                    "checkpoint times must increase strictly ({} then {})",
                    pair[0].t, pair[1].t
                )));
            }
        }
        for s in &checkpoints {
            if s.grid() != &grid {
                return Err(FlowError::Domain("checkpoints live on different grids".into()));
            }
            if s.metric.holonomy().to_bits() != lam.to_bits() {
                return Err(FlowError::Domain("checkpoints carry different holonomies".into()));
            }
        }
        Ok(FlowTrajectory {
            checkpoints,
            step_log: StepLog::default(),
            haar_source,
        })
    }

    pub fn checkpoints(&self) -> &[FlowState] {
        &self.checkpoints
    }

    pub fn times(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|s| s.t).collect()
    }

    pub fn step_log(&self) -> &StepLog {
        &self.step_log
    }

    pub fn haar_source(&self) -> HaarSource {
        self.haar_source
    }

    pub fn grid(&self) -> &Grid {
        self.checkpoints[0].grid()
    }

    pub fn first(&self) -> &FlowState {
        &self.checkpoints[0]
    }

    pub fn last(&self) -> &FlowState {
        self.checkpoints.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    /// Checkpoints with `t_from ≤ t ≤ t_to`; the step log is not carried over.
    pub fn window(&self, t_from: f64, t_to: f64) -> Result<FlowTrajectory, FlowError> {
        let kept: Vec<FlowState> = self
            .checkpoints
            .iter()
            .filter(|s| s.t >= t_from && s.t <= t_to)
            .cloned()
            .collect();
        FlowTrajectory::from_checkpoints(kept, self.haar_source)
    }

    /// Replaces the stored Haar weights, one per checkpoint.
    pub fn with_haar(&self, weights: Vec<HaarWeight>, source: HaarSource) -> Result<FlowTrajectory, FlowError> {
        if weights.len() != self.checkpoints.len() {
            return Err(FlowError::Domain(format!(
                "{} weights for {} checkpoints",
                weights.len(),
                self.checkpoints.len()
            )));
        }
        let mut checkpoints = Vec::with_capacity(weights.len());
        for (s, h) in self.checkpoints.iter().zip(weights) {
            checkpoints.push(FlowState::new(s.t, s.metric.clone(), h)?);
        }
        Ok(FlowTrajectory {
            checkpoints,
            step_log: self.step_log.clone(),
            haar_source: source,
        })
    }
}

/// How the time step is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtPolicy {
    /// A constant step, shortened only to land on checkpoints.
    Fixed { dt: f64 },
    /// `dt = c_cfl·h²·min e^{2u}`, capped at `dt_max`.
    Cfl { c_cfl: f64, dt_max: f64 },
}

/// Checkpoint times relative to the initial time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckpointSchedule {
    Uniform { interval: f64 },
    /// `first, first·ratio, first·ratio², …` after the initial time.
    Geometric { first: f64, ratio: f64 },
    Explicit { times: Vec<f64> },
}

impl CheckpointSchedule {
    /// Absolute checkpoint times in `(t0, t_end]`, always ending at `t_end`.
    pub fn times(&self, t0: f64, t_end: f64) -> Result<Vec<f64>, FlowError> {
        let span = t_end - t0;
        let mut out = Vec::new();
        match self {
            CheckpointSchedule::Uniform { interval } => {
                if !(*interval > 0.0) {
                    return Err(FlowError::InvalidControls("checkpoint interval must be positive".into()));
                }
                let count = (span / interval - 1e-9).ceil().max(1.0) as usize;
                for i in 1..count {
                    out.push(t0 + i as f64 * interval);
                }
            }
            CheckpointSchedule::Geometric { first, ratio } => {
                if !(*first > 0.0) || !(*ratio > 1.0) {
                    return Err(FlowError::InvalidControls(
                        "geometric checkpoints need first > 0 and ratio > 1".into(),
                    ));
                }
                let mut d = *first;
                while d < span * (1.0 - 1e-12) {
                    out.push(t0 + d);
                    d *= ratio;
                }
            }
            CheckpointSchedule::Explicit { times } => {
                for &t in times {
                    if t > t0 && t < t_end {
                        out.push(t);
                    }
                }
                out.sort_by(f64::total_cmp);
                out.dedup();
            }
        }
        out.push(t_end);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub c_cfl: f64,
    /// Highest Fourier mode of `f` kept after each coupled step.
    pub coupled_filter: usize,
    pub blowup_threshold: f64,
}

impl StepOptions {
    pub fn for_grid(grid: &Grid) -> Self {
        StepOptions {
            c_cfl: default_cfl(grid.scheme()),
            coupled_filter: (grid.n() / 16).max(2),
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        }
    }
}

pub fn default_cfl(scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Spectral => DEFAULT_CFL_SPECTRAL,
        Scheme::Fd4 => DEFAULT_CFL_FD4,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowControls {
    pub t_end: f64,
    pub dt: DtPolicy,
    pub checkpoints: CheckpointSchedule,
    /// Evolve the Haar weight forward as well. Ill-posed; see [`step`].
    pub coupled: bool,
    pub step: StepOptions,
    /// Steps below this size abort the run.
    pub dt_min: f64,
}

impl FlowControls {
    /// CFL-limited stepping with uniform checkpoints.
    pub fn new(grid: &Grid, t_end: f64, checkpoint_interval: f64) -> Self {
        let step = StepOptions::for_grid(grid);
        FlowControls {
            t_end,
            dt: DtPolicy::Cfl {
                c_cfl: step.c_cfl,
                dt_max: f64::INFINITY,
            },
            checkpoints: CheckpointSchedule::Uniform {
                interval: checkpoint_interval,
            },
            coupled: false,
            step,
            dt_min: 1e-14,
        }
    }
}

/// `c_cfl·h²·min e^{2u}`.
pub fn stability_limit(metric: &GroupoidMetric, c_cfl: f64) -> f64 {
    let h = metric.grid().spec().spacing();
    let umin = metric.u().min();
    c_cfl * h * h * (2.0 * umin).exp()
}

/// Right-hand side of the reduced flow: both components equal
/// `Δ_ḡk + |∇k|² = −R/2`.
pub fn ricci_rhs(g: &GroupoidMetric) -> (PeriodicField, PeriodicField) {
    let mut ctx = RhsContext::new(g.grid(), g.holonomy());
    ctx.prepare(g.k().periodic().values(), g.u().values());
    ctx.load_stage(g.k().periodic().values(), &[], 0.0, None, false);
    ctx.eval_stage(0, false);
    let rhs = PeriodicField::new(std::mem::take(&mut ctx.slopes[0]));
    (rhs.clone(), rhs)
}

struct RhsContext<'a> {
    grid: &'a Grid,
    lam: f64,
    ws: Workspace,
    k_y: Vec<f64>,
    k_yy: Vec<f64>,
    /// `(k − u)_y` of the step's initial state. Both fields move with the
    /// same velocity, so every stage shares it.
    w_y: Vec<f64>,
    f_y: Vec<f64>,
    f_yy: Vec<f64>,
    /// `e^{-2u}` at the step start and at the current stage.
    e0: Vec<f64>,
    stage_e: Vec<f64>,
    stage_k: Vec<f64>,
    stage_f: Vec<f64>,
    slopes: [Vec<f64>; 4],
    f_slopes: [Vec<f64>; 4],
}

impl<'a> RhsContext<'a> {
    fn new(grid: &'a Grid, lam: f64) -> Self {
        let n = grid.n();
        let z = || vec![0.0; n];
        RhsContext {
            grid,
            lam,
            ws: grid.workspace(),
            k_y: z(),
            k_yy: z(),
            w_y: z(),
            f_y: z(),
            f_yy: z(),
            e0: z(),
            stage_e: z(),
            stage_k: z(),
            stage_f: z(),
            slopes: [z(), z(), z(), z()],
            f_slopes: [z(), z(), z(), z()],
        }
    }

    /// Writes the metric right-hand side of the current stage into
    /// `slopes[i]` and, when coupled, the forward Haar equation
    /// `f_t = −Δ_ḡf + |∇f|² + ⟨∇k, ∇f⟩ + |∇k|²` into `f_slopes[i]`.
    fn prepare(&mut self, k0: &[f64], u0: &[f64]) {
        let w: Vec<f64> = k0.iter().zip(u0).map(|(k, u)| k - u).collect();
        self.w_y = self.grid.d1(&w);
        for (e, u) in self.e0.iter_mut().zip(u0) {
            *e = (-2.0 * u).exp();
        }
    }

    fn eval_stage(&mut self, i: usize, coupled: bool) {
        self.grid
            .d12_into(&self.stage_k, &mut self.ws, &mut self.k_y, &mut self.k_yy);
        let lam = self.lam;
        let terms = self.k_y.iter().zip(&self.k_yy).zip(self.w_y.iter().zip(&self.stage_e));
        for (out, ((ky, kyy), (wy, e))) in self.slopes[i].iter_mut().zip(terms) {
            let kyj = ky + lam;
            let uy = ky - wy;
            *out = e * (kyy - uy * kyj + kyj * kyj);
        }
        if coupled {
            self.grid
                .d12_into(&self.stage_f, &mut self.ws, &mut self.f_y, &mut self.f_yy);
            let (fy, fyy) = (&self.f_y, &self.f_yy);
            for j in 0..fy.len() {
                let e = self.stage_e[j];
                let kyj = self.k_y[j] + lam;
                let uy = self.k_y[j] - self.w_y[j];
                self.f_slopes[i][j] = e * (-fyy[j] + uy * fy[j] + fy[j] * fy[j] + kyj * fy[j] + kyj * kyj);
            }
        }
    }

    fn load_stage(&mut self, k0: &[f64], f0: &[f64], c: f64, from: Option<usize>, coupled: bool) {
        match from {
            None => {
                self.stage_k.copy_from_slice(k0);
                self.stage_e.copy_from_slice(&self.e0);
                if coupled {
                    self.stage_f.copy_from_slice(f0);
                }
            }
            Some(i) => {
                let src = k0.iter().zip(&self.e0).zip(&self.slopes[i]);
                for ((sk, se), ((k, e), d)) in self.stage_k.iter_mut().zip(self.stage_e.iter_mut()).zip(src) {
                    *sk = k + c * d;
                    *se = e * exp_small(-2.0 * c * d);
                }
                if coupled {
                    let df = &self.f_slopes[i];
                    for j in 0..f0.len() {
                        self.stage_f[j] = f0[j] + c * df[j];
                    }
                }
            }
        }
    }
}

/// `e^x`, by its Taylor polynomial when the remainder `x⁵/120` is below
/// rounding. Stage increments are almost always in that range.
fn exp_small(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        const THIRD: f64 = 1.0 / 3.0;
        1.0 + x * (1.0 + 0.5 * x * (1.0 + THIRD * x * (1.0 + 0.25 * x)))
    } else {
        x.exp()
    }
}

struct StepOutcome {
    state: FlowState,
    /// `max|R|` at the start of the step.
    max_curvature: f64,
}

fn rk4_step(
    ctx: &mut RhsContext<'_>,
    state: &FlowState,
    dt: f64,
    coupled: bool,
    opts: &StepOptions,
) -> Result<StepOutcome, FlowError> {
    let limit = stability_limit(&state.metric, opts.c_cfl);
    if !(dt > 0.0) {
        return Err(FlowError::InvalidControls(format!("dt must be positive, got {dt}")));
    }
    if dt > limit * (1.0 + 1e-12) {
        return Err(FlowError::Stability { dt, limit });
    }
    let grid = state.grid();
    let k0 = state.metric.k().periodic().values();
    let u0 = state.metric.u().values();
    let f0 = state.haar.f.values();
    ctx.lam = state.metric.holonomy();

    ctx.prepare(k0, u0);
    ctx.load_stage(k0, f0, 0.0, None, coupled);
    ctx.eval_stage(0, coupled);
    let max_curvature = 2.0 * ctx.slopes[0].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    ctx.load_stage(k0, f0, 0.5 * dt, Some(0), coupled);
    ctx.eval_stage(1, coupled);
    ctx.load_stage(k0, f0, 0.5 * dt, Some(1), coupled);
    ctx.eval_stage(2, coupled);
    ctx.load_stage(k0, f0, dt, Some(2), coupled);
    ctx.eval_stage(3, coupled);

    let w = dt / 6.0;
    let n = k0.len();
    let [s1, s2, s3, s4] = &ctx.slopes;
    let mut k_new = k0.to_vec();
    let mut u_new = u0.to_vec();
    let slopes = s1.iter().zip(s2).zip(s3.iter().zip(s4));
    for ((k, u), ((a, b), (c, d))) in k_new.iter_mut().zip(u_new.iter_mut()).zip(slopes) {
        let incr = w * (a + 2.0 * b + 2.0 * c + d);
        *k += incr;
        *u += incr;
    }
    let f_new = if coupled {
        let [d1, d2, d3, d4] = &ctx.f_slopes;
        let raw = PeriodicField::new((0..n).map(|j| f0[j] + w * (d1[j] + 2.0 * d2[j] + 2.0 * d3[j] + d4[j])).collect());
        grid.lowpass(&raw, opts.coupled_filter)?
    } else {
        state.haar.f.clone()
    };

    let finite = k_new.iter().chain(&u_new).chain(f_new.values()).all(|v| v.is_finite());
    if !finite {
        return Err(FlowError::BlowUp {
            t: state.t + dt,
            max_curvature,
            last_valid: Box::new(state.clone()),
        });
    }
    let metric = state
        .metric
        .with_fields(PeriodicField::new(k_new), PeriodicField::new(u_new))?;
    Ok(StepOutcome {
        state: FlowState {
            t: state.t + dt,
            metric,
            haar: HaarWeight::new(f_new),
        },
        max_curvature,
    })
}

/// One explicit RK4 step of size `dt`.
///
/// With `coupled` the Haar weight is advanced by the forward equation for
/// `f`, which is a backward heat equation; a spectral low-pass filter keeps
/// only modes up to `opts.coupled_filter`, and the result is meaningful only
/// over short horizons with band-limited data.
pub fn step(state: &FlowState, dt: f64, coupled: bool, opts: &StepOptions) -> Result<FlowState, FlowError> {
    let mut ctx = RhsContext::new(state.grid(), state.metric.holonomy());
    rk4_step(&mut ctx, state, dt, coupled, opts).map(|o| o.state)
}

/// Integrates from `initial` to `controls.t_end`, storing checkpoints.
pub fn evolve(initial: &FlowState, controls: &FlowControls) -> Result<FlowTrajectory, FlowError> {
    if !(controls.t_end > initial.t) {
        return Err(FlowError::InvalidControls(format!(
            "t_end = {} must exceed the initial time {}",
            controls.t_end, initial.t
        )));
    }
    match controls.dt {
        DtPolicy::Fixed { dt } if !(dt > 0.0) => {
            return Err(FlowError::InvalidControls("fixed dt must be positive".into()))
        }
        DtPolicy::Cfl { c_cfl, dt_max } if !(c_cfl > 0.0) || !(dt_max > 0.0) => {
            return Err(FlowError::InvalidControls("CFL policy needs c_cfl > 0 and dt_max > 0".into()))
        }
        _ => {}
    }
    let targets = controls.checkpoints.times(initial.t, controls.t_end)?;
    let mut traj = FlowTrajectory {
        checkpoints: vec![initial.clone()],
        step_log: StepLog::default(),
        haar_source: if controls.coupled {
            HaarSource::ForwardCoupled
        } else {
            HaarSource::Reference
        },
    };
    let mut state = initial.clone();
    let grid = initial.grid().clone();
    let mut ctx = RhsContext::new(&grid, initial.metric.holonomy());
    for target in targets {
        loop {
            let remaining = target - state.t;
            if remaining <= 1e-13 * target.abs().max(1.0) {
                break;
            }
            let limit = stability_limit(&state.metric, controls.step.c_cfl);
            let nominal = match controls.dt {
                DtPolicy::Fixed { dt } => dt,
                DtPolicy::Cfl { c_cfl, dt_max } => (c_cfl / controls.step.c_cfl * limit).min(dt_max),
            };
            let last = nominal >= remaining * (1.0 - 1e-9);
            let dt = if last { remaining } else { nominal };
            if dt < controls.dt_min {
                return Err(FlowError::Stagnation { t: state.t, dt });
            }
            let outcome = match rk4_step(&mut ctx, &state, dt, controls.coupled, &controls.step) {
                Ok(o) => o,
                Err(FlowError::BlowUp { t, max_curvature, .. }) => {
                    return Err(FlowError::TrajectoryBlowUp {
                        t,
                        max_curvature,
                        partial: Box::new(traj),
                    })
                }
                Err(e) => return Err(e),
            };
            if !(outcome.max_curvature <= controls.step.blowup_threshold) {
                return Err(FlowError::TrajectoryBlowUp {
                    t: state.t,
                    max_curvature: outcome.max_curvature,
                    partial: Box::new(traj),
                });
            }
            traj.step_log.records.push(StepRecord {
                t: state.t,
                dt,
                cfl_fraction: dt / limit,
            });
            state = outcome.state;
            if last {
                state.t = target;
            }
        }
        traj.checkpoints.push(state.clone());
    }
    Ok(traj)
}
