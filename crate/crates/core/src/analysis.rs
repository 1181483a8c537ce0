//! Steady states: constant-curvature profiles of the reduced equation and
//! classification of fixed points.
//!
//! A metric `e^{2k}dx² + ds²` has scalar curvature `c` exactly when
//! `k'' + (k')² = −c/2`. Writing `ψ = k'` gives the Riccati equation
//! `ψ' = −c/2 − ψ²`; a groupoid metric needs `ψ(L) = ψ(0)` and
//! `k(L) − k(0) = λ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, GeometryError, GroupoidMetric, HaarWeight};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("ODE integration failed at s = {s}: {reason}")]
    Ode { s: f64, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Number of intervals in the returned profile.
const PROFILE_INTERVALS: usize = 64;
/// Number of slopes sampled across the bracket before root refinement.
const SCAN_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub c: f64,
    pub holonomy: f64,
    pub length: f64,
    /// Shooting parameter `k'(0)`.
    pub slope: f64,
    pub s: Vec<f64>,
    pub k: Vec<f64>,
    pub k_prime: Vec<f64>,
    /// `|k'(L) − k'(0)|`
    pub periodicity_residual: f64,
    /// `|k(L) − k(0) − λ|`
    pub holonomy_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfeasibilityCertificate {
    /// `ψ' ≤ −c/2` forces `ψ(0) − ψ(L) ≥ cL/2 > 0` for every slope, shown
    /// here for `k'(0) = λ/L`. A blow-up before `L` reports an infinite
    /// decrease.
    PositiveCurvature { slope: f64, decrease: f64, lower_bound: f64 },
    /// Periodic slopes exist but none closes up with the required holonomy.
    HolonomyMismatch { slopes: Vec<f64>, achieved: Vec<f64>, required: f64 },
    /// No slope in the a-priori bracket returns to itself after one period.
    NoPeriodicSlope { bracket: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShootingOutcome {
    Solution(CurvatureProfile),
    Infeasible(InfeasibilityCertificate),
}

/// State `(k, ψ, z)` with `z = ∂ψ/∂ψ(0)`.
type State = [f64; 3];

fn riccati(c: f64, y: &State) -> State {
    [y[1], -0.5 * c - y[1] * y[1], -2.0 * y[1] * y[2]]
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (w, k) in terms {
        for i in 0..3 {
            out[i] += h * w * k[i];
        }
    }
    out
}

enum Leg {
    Reached(State),
    /// `ψ` left every bounded region before the target.
    BlewUp,
}

struct Integrator {
    c: f64,
    rtol: f64,
    atol: f64,
    /// `ψ` below `-escape` counts as blow-up.
    escape: f64,
}

impl Integrator {
    /// Adaptive DOPRI5 from `s0` to `s1`.
    fn advance(&self, mut y: State, s0: f64, s1: f64, h0: &mut f64) -> Result<Leg, AnalysisError> {
        let mut s = s0;
        let mut h = h0.min(s1 - s0);
        let mut k1 = riccati(self.c, &y);
        let mut rejects = 0usize;
        while s < s1 {
            let last = s + h >= s1;
            if last {
                h = s1 - s;
            }
            let k2 = riccati(self.c, &combine(&y, h, &[(A21, &k1)]));
            let k3 = riccati(self.c, &combine(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = riccati(self.c, &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = riccati(
                self.c,
                &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = riccati(
                self.c,
                &combine(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let next = combine(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = riccati(self.c, &next);
            let mut err = 0.0_f64;
            for i in 0..3 {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.atol + self.rtol * y[i].abs().max(next[i].abs());
                err = err.max((e / scale).abs());
            }
            if err <= 1.0 && next[1] < -self.escape {
                return Ok(Leg::BlewUp);
            }
            if !err.is_finite() {
                h *= 0.2;
            } else if err <= 1.0 {
                // land on s1 exactly so rounding cannot leave a sliver
                s = if last { s1 } else { s + h };
                y = next;
                k1 = k7;
                if !last {
                    *h0 = h;
                }
                h *= (0.9 * err.max(1e-10).powf(-0.2)).min(5.0);
                rejects = 0;
            } else {
                h *= (0.9 * err.powf(-0.2)).max(0.2);
                rejects += 1;
            }
            if s < s1 && (h < 1e-14 * (1.0 + s.abs()) || rejects > 100) {
                if y[1] < 0.0 && y[1].abs() > 1e3 {
                    return Ok(Leg::BlewUp);
                }
                return Err(AnalysisError::Ode {
                    s,
                    reason: format!("step size collapsed to {h:e}"),
                });
            }
        }
        Ok(Leg::Reached(y))
    }

    /// Integrates over `[0, L]`, sampling at `intervals + 1` equispaced points.
    fn shoot(&self, slope: f64, length: f64, intervals: usize) -> Result<Option<Vec<State>>, AnalysisError> {
        let mut y = [0.0, slope, 1.0];
        let mut out = Vec::with_capacity(intervals + 1);
        out.push(y);
        let mut h = length / intervals as f64;
        for i in 0..intervals {
            let s0 = length * i as f64 / intervals as f64;
            let s1 = length * (i + 1) as f64 / intervals as f64;
            match self.advance(y, s0, s1, &mut h)? {
                Leg::Reached(next) => y = next,
                Leg::BlewUp => return Ok(None),
            }
            out.push(y);
        }
        Ok(Some(out))
    }

    /// `(G, G')` with `G(p) = ψ(L; p) − p`; `G = −∞` on blow-up.
    fn mismatch(&self, slope: f64, length: f64) -> Result<(f64, f64), AnalysisError> {
        Ok(match self.shoot(slope, length, 1)? {
            Some(path) => {
                let end = path[1];
                (end[1] - slope, end[2] - 1.0)
            }
            None => (f64::NEG_INFINITY, f64::NEG_INFINITY),
        })
    }
}

/// Bisection on a sign change of `which(mismatch)` between `a` and `b`.
fn bisect(
    ig: &Integrator,
    length: f64,
    mut a: f64,
    mut b: f64,
    which: impl Fn((f64, f64)) -> f64,
) -> Result<f64, AnalysisError> {
    let mut fa = which(ig.mismatch(a, length)?);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = which(ig.mismatch(m, length)?);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Golden-section minimisation of `|G|`, used to polish a tangential root
/// where `G'` has no clean sign change.
fn golden_min(ig: &Integrator, length: f64, mut a: f64, mut b: f64) -> Result<f64, AnalysisError> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let g = |p: f64| -> Result<f64, AnalysisError> { Ok(ig.mismatch(p, length)?.0.abs()) };
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (g(x1)?, g(x2)?);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = g(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = g(x2)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Solves `k'' + (k')² = −c/2`, `k(0) = 0`, by shooting on `k'(0)` for
/// `k'(L) = k'(0)` and `k(L) = λ`.
///
/// Slopes are searched in `|k'(0)| ≤ |λ|/L + √(|c|/2)·L + 1/L`; the last
/// term keeps the bracket open when `c = λ = 0`. `tol` bounds both the
/// periodicity and the holonomy residual of an accepted profile.
pub fn constant_curvature_shoot(c: f64, holonomy: f64, length: f64, tol: f64) -> Result<ShootingOutcome, AnalysisError> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(AnalysisError::InvalidInput(format!("period must be positive, got {length}")));
    }
    if !(tol > 0.0) || !c.is_finite() || !holonomy.is_finite() {
        return Err(AnalysisError::InvalidInput("c, λ and tol must be finite with tol > 0".into()));
    }
    let bound = holonomy.abs() / length + (0.5 * c.abs()).sqrt() * length + 1.0 / length;
    let ig = Integrator {
        c,
        rtol: 1e-13,
        atol: 1e-15,
        escape: 1e6 * (1.0 + bound),
    };

    if c > 0.0 {
        let slope = holonomy / length;
        let decrease = match ig.shoot(slope, length, 1)? {
            Some(path) => slope - path[1][1],
            None => f64::INFINITY,
        };
        return Ok(ShootingOutcome::Infeasible(InfeasibilityCertificate::PositiveCurvature {
            slope,
            decrease,
            lower_bound: 0.5 * c * length,
        }));
    }

    let grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| -bound + 2.0 * bound * i as f64 / SCAN_POINTS as f64)
        .collect();
    let values = grid
        .iter()
        .map(|&p| ig.mismatch(p, length))
        .collect::<Result<Vec<_>, _>>()?;

    let mut roots = Vec::new();
    for i in 0..SCAN_POINTS {
        let (g0, d0) = values[i];
        let (g1, d1) = values[i + 1];
        if g0 == 0.0 {
            roots.push(grid[i]);
        } else if g0.signum() != g1.signum() && g1 != 0.0 {
            roots.push(bisect(&ig, length, grid[i], grid[i + 1], |m| m.0)?);
        } else if d0.is_finite() && d1.is_finite() && d0.signum() != d1.signum() {
            // extremum of G without a sign change: a candidate tangential root
            let p = bisect(&ig, length, grid[i], grid[i + 1], |m| m.1)?;
            let p = if ig.mismatch(p, length)?.0.abs() > tol {
                golden_min(&ig, length, grid[i], grid[i + 1])?
            } else {
                p
            };
            if ig.mismatch(p, length)?.0.abs() <= tol {
                roots.push(p);
            }
        }
    }
    if values[SCAN_POINTS].0 == 0.0 {
        roots.push(grid[SCAN_POINTS]);
    }
    if roots.is_empty() {
        return Ok(ShootingOutcome::Infeasible(InfeasibilityCertificate::NoPeriodicSlope {
            bracket: (-bound, bound),
        }));
    }

    let mut achieved = Vec::with_capacity(roots.len());
    let mut best: Option<CurvatureProfile> = None;
    for &p in &roots {
        let Some(path) = ig.shoot(p, length, PROFILE_INTERVALS)? else {
            achieved.push(f64::NEG_INFINITY);
            continue;
        };
        let end = path[PROFILE_INTERVALS];
        achieved.push(end[0]);
        let profile = CurvatureProfile {
            c,
            holonomy,
            length,
            slope: p,
            s: (0..=PROFILE_INTERVALS)
                .map(|i| length * i as f64 / PROFILE_INTERVALS as f64)
                .collect(),
            k: path.iter().map(|y| y[0]).collect(),
            k_prime: path.iter().map(|y| y[1]).collect(),
            periodicity_residual: (end[1] - p).abs(),
            holonomy_residual: (end[0] - holonomy).abs(),
        };
        if profile.periodicity_residual <= tol
            && profile.holonomy_residual <= tol
            && best
                .as_ref()
                .is_none_or(|b| profile.holonomy_residual < b.holonomy_residual)
        {
            best = Some(profile);
        }
    }
    Ok(match best {
        Some(profile) => ShootingOutcome::Solution(profile),
        None => ShootingOutcome::Infeasible(InfeasibilityCertificate::HolonomyMismatch {
            slopes: roots,
            achieved,
            required: holonomy,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyKind {
    FlatTorus,
    HyperbolicCuspNormalized,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyResiduals {
    /// `sup|R|`
    pub curvature: f64,
    /// `sup|R + 2λ²|`
    pub cusp: f64,
    /// Sup norm of `Ric + ½𝓛_{θ♯}g`.
    pub soliton: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyClassification {
    pub kind: SteadyKind,
    pub residuals: SteadyResiduals,
}

/// Flat torus when `R`, `λ` and the soliton tensor vanish; normalized cusp
/// when `R ≡ −2λ²` with `λ ≠ 0`.
pub fn classify_steady(g: &GroupoidMetric, h: &HaarWeight, tol: f64) -> Result<SteadyClassification, AnalysisError> {
    if !(tol > 0.0) {
        return Err(AnalysisError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let r = geometry::scalar_curvature(g);
    let lam = g.holonomy();
    let residuals = SteadyResiduals {
        curvature: r.sup_norm(),
        cusp: r.shift(2.0 * lam * lam).sup_norm(),
        soliton: geometry::soliton_residual(g, h)?.sup_norm(),
    };
    let kind = if residuals.curvature <= tol && lam == 0.0 && residuals.soliton <= tol {
        SteadyKind::FlatTorus
    } else if lam != 0.0 && residuals.cusp <= tol {
        SteadyKind::HyperbolicCuspNormalized
    } else {
        SteadyKind::None
    };
    Ok(SteadyClassification { kind, residuals })
}
