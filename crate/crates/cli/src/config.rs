//! Scenario configuration: a TOML file with an explicit schema version, plus
//! the built-in presets.

use std::f64::consts::PI;
use std::fmt;

use groupoid_ricci::analysis::SteadyKind;
use groupoid_ricci::flow::{CheckpointSchedule, DtPolicy, DEFAULT_CFL_SPECTRAL};
use groupoid_ricci::Scheme;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Monotonicity,
    Blowdown,
    MaxPrinciple,
    Lambda,
    Harnack,
    Uniqueness,
    SteadyClassify,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Monotonicity,
        Suite::Blowdown,
        Suite::MaxPrinciple,
        Suite::Lambda,
        Suite::Harnack,
        Suite::Uniqueness,
        Suite::SteadyClassify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Monotonicity => "monotonicity",
            Suite::Blowdown => "blowdown",
            Suite::MaxPrinciple => "max_principle",
            Suite::Lambda => "lambda",
            Suite::Harnack => "harnack",
            Suite::Uniqueness => "uniqueness",
            Suite::SteadyClassify => "steady_classify",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_nodes: usize,
    pub scheme: Scheme,
}

/// `c0 + Σ_m cos[m-1]·cos(2πmy) + sin[m-1]·sin(2πmy)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fourier {
    pub c0: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Fourier {
    pub fn sine(amp: f64) -> Self {
        Fourier {
            sin: vec![amp],
            ..Fourier::default()
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let mut acc = self.c0;
        for (m, a) in self.cos.iter().enumerate() {
            acc += a * (2.0 * PI * (m + 1) as f64 * y).cos();
        }
        for (m, b) in self.sin.iter().enumerate() {
            acc += b * (2.0 * PI * (m + 1) as f64 * y).sin();
        }
        acc
    }

    fn is_finite(&self) -> bool {
        self.c0.is_finite() && self.cos.iter().chain(&self.sin).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub holonomy: f64,
    #[serde(default)]
    pub k_per: Fourier,
    #[serde(default)]
    pub u: Fourier,
    /// Haar weight: initial data for the forward equation, terminal data
    /// for the conjugate solve.
    #[serde(default)]
    pub f: Fourier,
}

/// Where the Haar weight along the trajectory comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    /// `f ≡ 0` at every checkpoint.
    Reference,
    /// Backward conjugate solve from `f` at `t_end`.
    Conjugate,
    /// Forward evolution from `f` at `t = 0`, low-pass filtered.
    Forward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub t_end: f64,
    pub dt: DtPolicy,
    pub checkpoints: CheckpointSchedule,
    pub weight: WeightSource,
}

/// All thresholds a suite compares against. Scaled as a whole by
/// `--tolerance-scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed decrease of `F` between checkpoints.
    pub f_slack: f64,
    /// `|dF/dt − 2∫|Ric + ∇θ|² dη|`
    pub f_identity: f64,
    /// Identity residuals are judged on checkpoints with `t ≥ identity_from`.
    pub identity_from: f64,
    pub harnack: f64,
    /// Allowed decrease of `λ` between checkpoints, relative to `1 + |λ|`.
    pub lambda_slack: f64,
    pub monitor_slack: f64,
    /// Half-width of the band around the limit of `t|∇k|²`.
    pub blowdown_grad: f64,
    /// Bound on `t²·max H`.
    pub blowdown_h: f64,
    /// Half-width of the band around the limit of `t·R`.
    pub blowdown_r: f64,
    /// Bound on `E(t)` for identical data at two step sizes.
    pub uniqueness: f64,
    pub steady: f64,
}

impl Tolerances {
    pub fn scaled(&self, s: f64) -> Tolerances {
        Tolerances {
            f_slack: self.f_slack * s,
            f_identity: self.f_identity * s,
            identity_from: self.identity_from,
            harnack: self.harnack * s,
            lambda_slack: self.lambda_slack * s,
            monitor_slack: self.monitor_slack * s,
            blowdown_grad: self.blowdown_grad * s,
            blowdown_h: self.blowdown_h * s,
            blowdown_r: self.blowdown_r * s,
            uniqueness: self.uniqueness * s,
            steady: self.steady * s,
        }
    }

    fn fields(&self) -> [(&'static str, f64); 10] {
        [
            ("f_slack", self.f_slack),
            ("f_identity", self.f_identity),
            ("harnack", self.harnack),
            ("lambda_slack", self.lambda_slack),
            ("monitor_slack", self.monitor_slack),
            ("blowdown_grad", self.blowdown_grad),
            ("blowdown_h", self.blowdown_h),
            ("blowdown_r", self.blowdown_r),
            ("uniqueness", self.uniqueness),
            ("steady", self.steady),
        ]
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            f_slack: 1e-12,
            f_identity: 1e-5,
            identity_from: 0.0,
            harnack: 1e-4,
            lambda_slack: 1e-8,
            monitor_slack: 1e-6,
            blowdown_grad: 0.025,
            blowdown_h: 0.05,
            blowdown_r: 0.1,
            uniqueness: 1e-12,
            steady: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    /// Checkpoints before this time are ignored; the envelope constants are
    /// read from the first retained state.
    pub from: f64,
    /// The `H` constant is fitted on `[from, from + fit_until]`.
    pub fit_until: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { from: 0.0, fit_until: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessConfig {
    /// Amplitude of the seeded random perturbation of `(k, u)`.
    pub perturbation: f64,
    /// Window of the log-slope fit.
    pub fit_from: f64,
}

impl Default for UniquenessConfig {
    fn default() -> Self {
        UniquenessConfig {
            perturbation: 1e-3,
            fit_from: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    pub expect_initial: Option<SteadyKind>,
    pub expect_final: Option<SteadyKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub trajectory_csv: Option<String>,
    pub monotonicity_csv: Option<String>,
    pub report_json: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trajectory_csv: Some("trajectory.csv".into()),
            monotonicity_csv: Some("monotonicity.csv".into()),
            report_json: Some("report.json".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub grid: GridConfig,
    pub initial: InitialData,
    pub flow: FlowConfig,
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default)]
    pub uniqueness: UniquenessConfig,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        groupoid_ricci::GridSpec::new(self.grid.n_nodes, self.grid.scheme)
            .map_err(|e| invalid("grid.n_nodes", e.to_string()))?;
        if !self.initial.holonomy.is_finite() {
            return Err(invalid("initial.holonomy", "must be finite"));
        }
        for (name, f) in [("initial.k_per", &self.initial.k_per), ("initial.u", &self.initial.u), ("initial.f", &self.initial.f)] {
            if !f.is_finite() {
                return Err(invalid(name, "coefficients must be finite"));
            }
            let modes = f.cos.len().max(f.sin.len());
            if 2 * modes >= self.grid.n_nodes {
                return Err(invalid(name, format!("{modes} modes do not fit on {} nodes", self.grid.n_nodes)));
            }
        }
        if !(self.flow.t_end > 0.0 && self.flow.t_end.is_finite()) {
            return Err(invalid("flow.t_end", "must be positive and finite"));
        }
        match self.flow.dt {
            DtPolicy::Fixed { dt } if !(dt > 0.0) => return Err(invalid("flow.dt.dt", "must be positive")),
            DtPolicy::Cfl { c_cfl, dt_max } if !(c_cfl > 0.0) || !(dt_max > 0.0) => {
                return Err(invalid("flow.dt", "c_cfl and dt_max must be positive"))
            }
            _ => {}
        }
        self.flow
            .checkpoints
            .times(0.0, self.flow.t_end)
            .map_err(|e| invalid("flow.checkpoints", e.to_string()))?;
        for (name, v) in self.tolerances.fields() {
            if !(v > 0.0) {
                return Err(invalid(&format!("tolerances.{name}"), "must be positive"));
            }
        }
        if !(self.tolerances.identity_from >= 0.0) {
            return Err(invalid("tolerances.identity_from", "must be nonnegative"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.suites {
            if !seen.insert(*s) {
                return Err(invalid("suites", format!("{s} is listed twice")));
            }
        }
        if !(self.monitor.from >= 0.0 && self.monitor.from < self.flow.t_end) {
            return Err(invalid("monitor.from", "must lie in [0, t_end)"));
        }
        if !(self.monitor.fit_until > 0.0) {
            return Err(invalid("monitor.fit_until", "must be positive"));
        }
        if !(self.uniqueness.perturbation > 0.0) {
            return Err(invalid("uniqueness.perturbation", "must be positive"));
        }
        Ok(())
    }
}

fn base(name: &str, n: usize, holonomy: f64, k_per: Fourier, t_end: f64, checkpoints: CheckpointSchedule) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        grid: GridConfig {
            n_nodes: n,
            scheme: Scheme::Spectral,
        },
        initial: InitialData {
            holonomy,
            k_per,
            u: Fourier::default(),
            f: Fourier::default(),
        },
        flow: FlowConfig {
            t_end,
            dt: DtPolicy::Cfl {
                c_cfl: DEFAULT_CFL_SPECTRAL,
                dt_max: 1.0,
            },
            checkpoints,
            weight: WeightSource::Reference,
        },
        suites: Vec::new(),
        tolerances: Tolerances::default(),
        monitor: MonitorConfig::default(),
        uniqueness: UniquenessConfig::default(),
        steady: SteadyConfig::default(),
        output: OutputConfig::default(),
    }
}

pub const PRESET_NAMES: [&str; 7] = [
    "flat_torus",
    "twisted",
    "twisted_blowdown",
    "monotonicity",
    "monotonicity_twisted",
    "uniqueness",
    "cusp",
];

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let geometric = CheckpointSchedule::Geometric { first: 0.01, ratio: 1.05 };
    Some(match name {
        "flat_torus" => {
            let mut c = base(name, 64, 0.0, Fourier::default(), 10.0, CheckpointSchedule::Uniform { interval: 0.1 });
            c.flow.weight = WeightSource::Conjugate;
            c.suites = Suite::ALL.to_vec();
            c.tolerances.f_identity = 1e-10;
            c.tolerances.harnack = 1e-10;
            c.steady = SteadyConfig {
                expect_initial: Some(SteadyKind::FlatTorus),
                expect_final: Some(SteadyKind::FlatTorus),
            };
            c
        }
        "twisted" => {
            let mut c = base(name, 128, 1.0, Fourier::sine(0.3), 100.0, geometric);
            c.suites = vec![Suite::MaxPrinciple, Suite::Lambda];
            c
        }
        "twisted_blowdown" => {
            let mut c = base(name, 128, 1.0, Fourier::sine(0.3), 200.0, geometric);
            c.suites = vec![Suite::Blowdown, Suite::MaxPrinciple];
            c
        }
        "monotonicity" | "monotonicity_twisted" => {
            let (lam, amp) = if name == "monotonicity" { (0.0, 0.2) } else { (1.0, 0.3) };
            let mut c = base(name, 128, lam, Fourier::sine(amp), 1.0, CheckpointSchedule::Uniform { interval: 1e-3 });
            c.flow.weight = WeightSource::Conjugate;
            c.suites = vec![Suite::Monotonicity, Suite::Lambda, Suite::Harnack];
            // time differences cannot resolve the initial transient at this
            // checkpoint spacing; see the README
            c.tolerances.identity_from = 0.25;
            c.output.trajectory_csv = None;
            c
        }
        "uniqueness" => {
            let mut c = base(name, 128, 1.0, Fourier::sine(0.3), 1.0, CheckpointSchedule::Uniform { interval: 0.05 });
            c.suites = vec![Suite::Uniqueness];
            c.output.trajectory_csv = None;
            c
        }
        "cusp" => {
            let k_per = Fourier::default();
            let mut c = base(name, 64, 1.0, k_per, 1.0, CheckpointSchedule::Uniform { interval: 0.05 });
            c.suites = vec![Suite::SteadyClassify, Suite::Lambda, Suite::MaxPrinciple];
            c.steady.expect_initial = Some(SteadyKind::HyperbolicCuspNormalized);
            c
        }
        _ => return None,
    })
}
