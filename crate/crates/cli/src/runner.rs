use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use groupoid_ricci::analysis::classify_steady;
use groupoid_ricci::flow::{
    backward_conjugate_solve, evolve, initial_envelope, max_principle_monitor, ConjugateOptions, DtPolicy, FlowControls,
    FlowState, FlowTrajectory, HaarSource, MonitorOptions,
};
use groupoid_ricci::functionals::{
    energy_growth_rate, f_monotonicity_violations, f_series, f_variation_residual, harnack_residual,
    lambda_functional, uniqueness_energy, DEFAULT_ALPHA_EXP,
};
use groupoid_ricci::{Grid, GridSpec, GroupoidMetric, HaarWeight, PeriodicField, TwistedField};
use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Fourier, ScenarioConfig, Suite, Tolerances, WeightSource};
use crate::report::{emit_report, FlowSummary, Format, Location, RunReport, SuiteReport, Timing};
use crate::CliError;

/// λ is evaluated on at most this many checkpoints.
const LAMBDA_SAMPLES: usize = 200;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// CSV and JSON artifacts go here; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub tolerance_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: None,
            seed: 0,
            tolerance_scale: 1.0,
        }
    }
}

fn sample(grid: &Grid, f: &Fourier) -> PeriodicField {
    PeriodicField::from_fn(grid.spec(), |y| f.eval(y))
}

pub fn initial_state(config: &ScenarioConfig) -> Result<FlowState, CliError> {
    let spec = GridSpec::new(config.grid.n_nodes, config.grid.scheme).map_err(|e| CliError::Config {
        field: "grid".into(),
        message: e.to_string(),
    })?;
    let grid = Grid::new(spec).map_err(|e| CliError::Config {
        field: "grid".into(),
        message: e.to_string(),
    })?;
    let k = TwistedField::new(sample(&grid, &config.initial.k_per), config.initial.holonomy);
    let u = sample(&grid, &config.initial.u);
    let metric = GroupoidMetric::new(grid.clone(), k, u)?;
    let haar = match config.flow.weight {
        WeightSource::Forward => HaarWeight::new(sample(&grid, &config.initial.f)),
        _ => HaarWeight::reference(grid.n()),
    };
    Ok(FlowState::new(0.0, metric, haar)?)
}

fn controls(config: &ScenarioConfig, grid: &Grid, dt: DtPolicy) -> FlowControls {
    let mut c = FlowControls::new(grid, config.flow.t_end, config.flow.t_end);
    c.dt = dt;
    c.checkpoints = config.flow.checkpoints.clone();
    c.coupled = config.flow.weight == WeightSource::Forward;
    c
}

fn halved(dt: DtPolicy) -> DtPolicy {
    match dt {
        DtPolicy::Fixed { dt } => DtPolicy::Fixed { dt: 0.5 * dt },
        DtPolicy::Cfl { c_cfl, dt_max } => DtPolicy::Cfl {
            c_cfl: 0.5 * c_cfl,
            dt_max: 0.5 * dt_max,
        },
    }
}

/// Everything the suites share.
struct Context<'a> {
    config: &'a ScenarioConfig,
    tol: Tolerances,
    seed: u64,
    /// Trajectory as evolved.
    traj: FlowTrajectory,
    /// Same checkpoints carrying the configured Haar weight.
    weighted: FlowTrajectory,
    /// Conjugate densities `v = e^{-f}`, when the weight comes from them.
    densities: Option<Vec<(f64, PeriodicField)>>,
}

pub fn run_scenario(config: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    config.validate()?;
    if !(opts.tolerance_scale > 0.0) {
        return Err(CliError::Usage("--tolerance-scale must be positive".into()));
    }
    let started = Instant::now();
    let init = initial_state(config)?;
    let grid = init.grid().clone();
    info!("{}: evolving n = {} to t = {}", config.name, grid.n(), config.flow.t_end);
    let flow_started = Instant::now();
    let traj = evolve(&init, &controls(config, &grid, config.flow.dt))?;
    let flow_seconds = flow_started.elapsed().as_secs_f64();
    debug!("{} steps in {flow_seconds:.3} s", traj.step_log().steps());

    let (weighted, densities) = match config.flow.weight {
        WeightSource::Conjugate => {
            let v_end = sample(&grid, &config.initial.f).map(|f| (-f).exp());
            let v = backward_conjugate_solve(&traj, &v_end, &ConjugateOptions::default())?;
            let weights = v.iter().map(|(_, d)| HaarWeight::from_density(d)).collect();
            (traj.with_haar(weights, HaarSource::Conjugate)?, Some(v))
        }
        _ => (traj.clone(), None),
    };

    let ctx = Context {
        config,
        tol: config.tolerances.scaled(opts.tolerance_scale),
        seed: opts.seed,
        traj,
        weighted,
        densities,
    };
    let mut suites = Vec::with_capacity(config.suites.len());
    for &suite in &config.suites {
        info!("suite {suite}");
        let report = match suite {
            Suite::Monotonicity => monotonicity(&ctx),
            Suite::Blowdown => blowdown(&ctx),
            Suite::MaxPrinciple => max_principle(&ctx),
            Suite::Lambda => lambda(&ctx),
            Suite::Harnack => harnack(&ctx),
            Suite::Uniqueness => uniqueness(&ctx)?,
            Suite::SteadyClassify => steady(&ctx),
        };
        suites.push(report);
    }

    let lam = ctx.traj.first().metric.holonomy();
    let log = ctx.traj.step_log();
    let flow = FlowSummary {
        checkpoints: ctx.traj.len(),
        steps: log.steps(),
        dt_min: log.dt_min(),
        dt_max: log.dt_max(),
        holonomy: lam,
        holonomy_bitwise_constant: ctx
            .traj
            .checkpoints()
            .iter()
            .all(|s| s.metric.holonomy().to_bits() == lam.to_bits()),
    };
    let mut report = RunReport {
        schema_version: crate::SCHEMA_VERSION,
        config: config.clone(),
        seed: opts.seed,
        tolerance_scale: opts.tolerance_scale,
        passed: suites.iter().all(|s| s.passed) && flow.holonomy_bitwise_constant,
        flow: Some(flow),
        suites,
        files: Vec::new(),
        timing: Timing::default(),
    };
    if let Some(dir) = &opts.out_dir {
        write_artifacts(dir, &ctx, &mut report)?;
    }
    report.timing = Timing {
        flow_seconds,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(report)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_artifacts(dir: &Path, ctx: &Context, report: &mut RunReport) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let out = &ctx.config.output;
    if let Some(name) = &out.trajectory_csv {
        write_file(&dir.join(name), trajectory_csv(&ctx.weighted).as_bytes())?;
        report.files.push(name.clone());
    }
    if let Some(name) = &out.monotonicity_csv {
        if let Some(s) = report.suites.iter().find(|s| s.suite == Suite::Monotonicity) {
            write_file(&dir.join(name), monotonicity_csv(s).as_bytes())?;
            report.files.push(name.clone());
        }
    }
    if let Some(name) = &out.report_json {
        report.files.push(name.clone());
        write_file(&dir.join(name), &emit_report(report, Format::Json))?;
    }
    Ok(())
}

/// `t, k_per[0..n], u[0..n], f[0..n]`, one row per checkpoint.
pub fn trajectory_csv(traj: &FlowTrajectory) -> String {
    let n = traj.grid().n();
    let mut out = String::from("t");
    for block in ["k_per", "u", "f"] {
        for j in 0..n {
            out.push_str(&format!(",{block}[{j}]"));
        }
    }
    out.push('\n');
    for s in traj.checkpoints() {
        out.push_str(&format!("{:e}", s.t));
        for field in [s.metric.k().periodic(), s.metric.u(), &s.haar.f] {
            for v in field.values() {
                out.push_str(&format!(",{v:e}"));
            }
        }
        out.push('\n');
    }
    out
}

/// `t, F, rhs_integral, residual` from a monotonicity suite.
pub fn monotonicity_csv(suite: &SuiteReport) -> String {
    let mut out = String::from("t,F,rhs_integral,residual\n");
    let col = |name: &'static str| suite.series.iter().filter(move |p| p.diagnostic == name);
    for ((f, rhs), res) in col("F").zip(col("rhs_integral")).zip(col("residual")) {
        out.push_str(&format!("{:e},{:e},{:e},{:e}\n", f.t, f.value, rhs.value, res.value));
    }
    out
}

fn monotonicity(ctx: &Context) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Monotonicity);
    if ctx.weighted.haar_source() == HaarSource::Reference {
        return SuiteReport::failed(Suite::Monotonicity, "needs a conjugate or forward Haar weight");
    }
    let (series, samples) = match (f_series(&ctx.weighted), f_variation_residual(&ctx.weighted)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return SuiteReport::failed(Suite::Monotonicity, e.to_string()),
    };
    let drops = f_monotonicity_violations(&series, ctx.tol.f_slack);
    let from = ctx.tol.identity_from;
    let mut all = 0.0_f64;
    let mut window = 0.0_f64;
    let mut dfdt = 0.0_f64;
    for s in &samples {
        r.push(s.t, "F", s.f_value);
        r.push(s.t, "rhs_integral", s.rhs_integral);
        r.push(s.t, "residual", s.residual);
        all = all.max(s.residual);
        dfdt = dfdt.max(s.df_dt.abs());
        if s.t >= from {
            window = window.max(s.residual);
            r.consider(Location {
                quantity: "F identity residual".into(),
                t: s.t,
                y: None,
                margin: s.residual - ctx.tol.f_identity,
            });
        }
    }
    for &(t, drop) in &drops {
        r.consider(Location {
            quantity: "F decrease".into(),
            t,
            y: None,
            margin: drop - ctx.tol.f_slack,
        });
    }
    r.metric("f_initial", series.first().map_or(f64::NAN, |s| s.1));
    r.metric("f_final", series.last().map_or(f64::NAN, |s| s.1));
    r.metric("decreases", drops.len() as f64);
    r.metric("max_abs_df_dt", dfdt);
    r.metric("residual_max", window);
    r.metric("residual_max_all_times", all);
    r.metric("identity_from", from);
    r.passed = drops.is_empty() && window <= ctx.tol.f_identity && !samples.is_empty();
    if samples.is_empty() {
        r.notes.push("fewer than three checkpoints".into());
    }
    r
}

fn blowdown(ctx: &Context) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Blowdown);
    let last = ctx.traj.last();
    let t = last.t;
    let lam = last.metric.holonomy();
    // untwisted flows converge to the flat torus instead of the cusp
    let (grad_limit, r_limit) = if lam != 0.0 { (0.5, -1.0) } else { (0.0, 0.0) };
    let jet = last.metric.jet();
    let grad = jet.grad_k_sq();
    let h = jet.laplacian_k().map(|x| x * x);
    let curv = jet.scalar_curvature();
    let nodes = last.grid().nodes();
    for j in 0..nodes.len() {
        let checks = [
            ("t|∇k|²", (t * grad.values()[j] - grad_limit).abs() - ctx.tol.blowdown_grad),
            ("t²H", t * t * h.values()[j] - ctx.tol.blowdown_h),
            ("tR", (t * curv.values()[j] - r_limit).abs() - ctx.tol.blowdown_r),
        ];
        for (q, margin) in checks {
            r.consider(Location {
                quantity: q.into(),
                t,
                y: Some(nodes[j]),
                margin,
            });
        }
    }
    for s in ctx.traj.checkpoints().iter().filter(|s| s.t > 0.0) {
        let jet = s.metric.jet();
        r.push(s.t, "t_grad_sq_max", s.t * jet.grad_k_sq().max());
        r.push(s.t, "t_r_min", s.t * jet.scalar_curvature().min());
    }
    r.metric("t", t);
    r.metric("t_grad_sq_min", t * grad.min());
    r.metric("t_grad_sq_max", t * grad.max());
    r.metric("t2_h_max", t * t * h.max());
    r.metric("t_r_min", t * curv.min());
    r.metric("t_r_max", t * curv.max());
    r.passed = t > 0.0 && r.worst.as_ref().is_some_and(|w| w.margin <= 0.0);
    r
}

fn max_principle(ctx: &Context) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::MaxPrinciple);
    let traj = match ctx.traj.window(ctx.config.monitor.from, ctx.config.flow.t_end) {
        Ok(t) => t,
        Err(e) => return SuiteReport::failed(Suite::MaxPrinciple, e.to_string()),
    };
    let (alpha, beta) = match initial_envelope(traj.first(), 8) {
        Ok(v) => v,
        Err(e) => return SuiteReport::failed(Suite::MaxPrinciple, e.to_string()),
    };
    r.metric("alpha", alpha);
    r.metric("beta", beta);
    r.metric("from", traj.first().t);
    if beta == 0.0 {
        // k constant: both envelopes collapse to zero
        let mut worst = 0.0_f64;
        for s in traj.checkpoints() {
            worst = worst.max(s.metric.jet().grad_k_sq().max());
        }
        r.metric("max_grad_sq", worst);
        r.passed = worst <= ctx.tol.steady;
        r.notes.push("k is constant; envelopes are identically zero".into());
        return r;
    }
    let opts = MonitorOptions {
        slack: ctx.tol.monitor_slack,
        fit_until: ctx.config.monitor.fit_until,
    };
    match max_principle_monitor(&traj, alpha, beta, &opts) {
        Ok(rep) => {
            for s in &rep.samples {
                r.push(s.t, "min_grad_sq", s.min_grad_sq);
                r.push(s.t, "max_grad_sq", s.max_grad_sq);
                r.push(s.t, "max_h", s.max_h);
            }
            r.metric("h_constant", rep.h_constant);
            r.metric("slack", rep.slack);
            r.metric("violations", rep.violations.len() as f64);
            if let Some(v) = rep.worst_violation() {
                r.consider(Location {
                    quantity: format!("{:?}", v.bound),
                    t: v.t,
                    y: Some(v.y),
                    margin: v.margin,
                });
            }
            r.passed = rep.passed();
        }
        Err(e) => return SuiteReport::failed(Suite::MaxPrinciple, e.to_string()),
    }
    r
}

fn lambda(ctx: &Context) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Lambda);
    let cps = ctx.traj.checkpoints();
    let stride = cps.len().div_ceil(LAMBDA_SAMPLES).max(1);
    let mut idx: Vec<usize> = (0..cps.len()).step_by(stride).collect();
    if idx.last() != Some(&(cps.len() - 1)) {
        idx.push(cps.len() - 1);
    }
    let mut values = Vec::with_capacity(idx.len());
    for i in idx {
        match lambda_functional(&cps[i].metric) {
            Ok(res) => {
                r.push(cps[i].t, "lambda", res.lambda);
                values.push((cps[i].t, res.lambda));
            }
            Err(e) => {
                r.passed = false;
                r.notes.push(format!("t = {}: {e}", cps[i].t));
                return r;
            }
        }
    }
    let mut drops = 0;
    for w in values.windows(2) {
        let drop = w[0].1 - w[1].1;
        let slack = ctx.tol.lambda_slack * (1.0 + w[0].1.abs());
        if drop > slack {
            drops += 1;
        }
        r.consider(Location {
            quantity: "lambda decrease".into(),
            t: w[1].0,
            y: None,
            margin: drop - slack,
        });
    }
    r.metric("lambda_initial", values[0].1);
    r.metric("lambda_final", values[values.len() - 1].1);
    r.metric("max_abs_lambda", values.iter().map(|v| v.1.abs()).fold(0.0, f64::max));
    r.metric("decreases", drops as f64);
    r.metric("samples", values.len() as f64);
    r.passed = drops == 0;
    r
}

fn harnack(ctx: &Context) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Harnack);
    let Some(v) = &ctx.densities else {
        return SuiteReport::failed(Suite::Harnack, "needs the conjugate Haar weight");
    };
    let samples = match harnack_residual(&ctx.traj, v) {
        Ok(s) => s,
        Err(e) => return SuiteReport::failed(Suite::Harnack, e.to_string()),
    };
    let from = ctx.tol.identity_from;
    let mut all = 0.0_f64;
    let mut window = 0.0_f64;
    let mut rhs_min = f64::INFINITY;
    for s in &samples {
        r.push(s.t, "residual", s.residual);
        r.push(s.t, "rhs_min", s.rhs_min);
        all = all.max(s.residual);
        rhs_min = rhs_min.min(s.rhs_min);
        if s.t >= from {
            window = window.max(s.residual);
            r.consider(Location {
                quantity: "Harnack residual".into(),
                t: s.t,
                y: None,
                margin: s.residual - ctx.tol.harnack,
            });
        }
        if s.rhs_min < 0.0 {
            r.consider(Location {
                quantity: "negative right-hand side".into(),
                t: s.t,
                y: None,
                margin: -s.rhs_min,
            });
        }
    }
    r.metric("residual_max", window);
    r.metric("residual_max_all_times", all);
    r.metric("rhs_min", rhs_min);
    r.metric("identity_from", from);
    r.passed = !samples.is_empty() && window <= ctx.tol.harnack && rhs_min >= 0.0;
    r
}

/// Seeded band-limited perturbation of `(k_per, u)`.
fn perturbed(init: &FlowState, eps: f64, seed: u64) -> Result<FlowState, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = init.grid().clone();
    let mut coeffs = || Fourier {
        c0: 0.0,
        cos: (0..3).map(|_| rng.random_range(-eps..eps)).collect(),
        sin: (0..3).map(|_| rng.random_range(-eps..eps)).collect(),
    };
    let (dk, du) = (coeffs(), coeffs());
    let g = &init.metric;
    let k = g.k().periodic().add(&sample(&grid, &dk));
    let u = g.u().add(&sample(&grid, &du));
    Ok(FlowState::new(0.0, g.with_fields(k, u)?, init.haar.clone())?)
}

fn uniqueness(ctx: &Context) -> Result<SuiteReport, CliError> {
    let mut r = SuiteReport::new(Suite::Uniqueness);
    let init = ctx.traj.first().clone();
    let grid = init.grid().clone();
    let dt = ctx.config.flow.dt;
    let fine = evolve(&init, &controls(ctx.config, &grid, halved(dt)))?;
    let same = match uniqueness_energy(&ctx.traj, &fine, DEFAULT_ALPHA_EXP) {
        Ok(e) => e,
        Err(e) => return Ok(SuiteReport::failed(Suite::Uniqueness, e.to_string())),
    };
    let mut e_max = 0.0_f64;
    for b in &same {
        r.push(b.t, "E_same_data", b.e);
        e_max = e_max.max(b.e);
        r.consider(Location {
            quantity: "E for identical data".into(),
            t: b.t,
            y: None,
            margin: b.e - ctx.tol.uniqueness,
        });
    }

    let other = perturbed(&init, ctx.config.uniqueness.perturbation, ctx.seed)?;
    let from = ctx.config.uniqueness.fit_from;
    let t_end = ctx.config.flow.t_end;
    let mut rates = Vec::new();
    for (policy, base) in [(dt, &ctx.traj), (halved(dt), &fine)] {
        let b = evolve(&other, &controls(ctx.config, &grid, policy))?;
        match uniqueness_energy(base, &b, DEFAULT_ALPHA_EXP) {
            Ok(e) => {
                if rates.is_empty() {
                    for x in &e {
                        r.push(x.t, "E_perturbed", x.e);
                    }
                }
                rates.push(energy_growth_rate(&e, from, t_end));
            }
            Err(e) => return Ok(SuiteReport::failed(Suite::Uniqueness, e.to_string())),
        }
    }
    r.metric("e_same_data_max", e_max);
    let (a, b) = (rates[0], rates[1]);
    r.metric("growth_rate", a.unwrap_or(f64::NAN));
    r.metric("growth_rate_half_step", b.unwrap_or(f64::NAN));
    let stable = match (a, b) {
        (Some(a), Some(b)) => a.is_finite() && b.is_finite() && (a - b).abs() <= 1e-3 * (1.0 + a.abs()),
        _ => false,
    };
    if !stable {
        r.notes.push("growth rate is missing, infinite or moves under step refinement".into());
    }
    r.passed = e_max <= ctx.tol.uniqueness && stable;
    Ok(r)
}

fn steady(ctx: &Context) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::SteadyClassify);
    let expect = &ctx.config.steady;
    let first = ctx.weighted.first();
    let last = ctx.weighted.last();
    for (label, state, want) in [("initial", first, expect.expect_initial), ("final", last, expect.expect_final)] {
        match classify_steady(&state.metric, &state.haar, ctx.tol.steady) {
            Ok(c) => {
                r.metric(&format!("{label}_sup_r"), c.residuals.curvature);
                r.metric(&format!("{label}_sup_cusp"), c.residuals.cusp);
                r.metric(&format!("{label}_soliton"), c.residuals.soliton);
                r.notes.push(format!("{label}: {:?}", c.kind));
                if let Some(w) = want {
                    if w != c.kind {
                        r.passed = false;
                        r.consider(Location {
                            quantity: format!("{label} classification {:?}, expected {w:?}", c.kind),
                            t: state.t,
                            y: None,
                            margin: c.residuals.curvature.min(c.residuals.cusp) - ctx.tol.steady,
                        });
                    }
                }
            }
            Err(e) => {
                r.passed = false;
                r.notes.push(e.to_string());
            }
        }
    }
    r
}
