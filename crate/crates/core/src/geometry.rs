//! Reduced geometry of `g = e^{2k} dx² + e^{2u} dy²`.
//!
//! Everything is expressed in the coordinate `y`; arc-length derivatives
//! use `d/ds = e^{-u} d/dy`. The reference Haar system is the one generated
//! by `g`, with reduced orbit density `e^{u} dy` and mean curvature form
//! `θ₀ = dk`. A general Haar system carries a log-weight `f`, with orbit
//! measure `e^{-f} e^{u} dy` and `θ = dk + df`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::twisted_grid::{Grid, GridError, GridFunction, PeriodicField, TwistedField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
}

/// The pair `(k, u)` on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupoidMetric {
    k: TwistedField,
    u: PeriodicField,
    grid: Grid,
}

impl GroupoidMetric {
    pub fn new(grid: Grid, k: TwistedField, u: PeriodicField) -> Result<Self, GeometryError> {
        grid.check(k.periodic())?;
        grid.check(&u)?;
        if !k.periodic().is_finite() || !u.is_finite() || !k.holonomy().is_finite() {
            return Err(GeometryError::InvalidMetric("non-finite samples".into()));
        }
        Ok(GroupoidMetric { k, u, grid })
    }

    /// `k ≡ 0`, `u ≡ 0`.
    pub fn flat_torus(grid: &Grid) -> Self {
        let n = grid.n();
        GroupoidMetric {
            k: TwistedField::linear(n, 0.0),
            u: PeriodicField::zeros(n),
            grid: grid.clone(),
        }
    }

    /// `k = λ·y`, `u ≡ 0`: the hyperbolic cusp `ds² + e^{2λs} dx²`.
    pub fn cusp(grid: &Grid, holonomy: f64) -> Self {
        let n = grid.n();
        GroupoidMetric {
            k: TwistedField::linear(n, holonomy),
            u: PeriodicField::zeros(n),
            grid: grid.clone(),
        }
    }

    pub fn k(&self) -> &TwistedField {
        &self.k
    }

    pub fn u(&self) -> &PeriodicField {
        &self.u
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn holonomy(&self) -> f64 {
        self.k.holonomy()
    }

    /// Length of the orbit circle, `∮ e^{u} dy`.
    pub fn circle_length(&self) -> f64 {
        self.u.values().iter().map(|u| u.exp()).sum::<f64>() * self.grid.spec().spacing()
    }

    pub fn jet(&self) -> MetricJet {
        MetricJet::new(self)
    }

    /// Replaces `(k_per, u)` keeping the holonomy and grid.
    pub fn with_fields(&self, k_periodic: PeriodicField, u: PeriodicField) -> Result<Self, GeometryError> {
        GroupoidMetric::new(self.grid.clone(), self.k.with_periodic(k_periodic), u)
    }
}

/// Log-density `f` of a Haar system relative to the metric-generated one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HaarWeight {
    pub f: PeriodicField,
}

impl HaarWeight {
    pub fn new(f: PeriodicField) -> Self {
        HaarWeight { f }
    }

    /// The reference system `f ≡ 0`.
    pub fn reference(n: usize) -> Self {
        HaarWeight {
            f: PeriodicField::zeros(n),
        }
    }

    /// Weight whose density is `v = e^{-f}`.
    pub fn from_density(v: &PeriodicField) -> Self {
        HaarWeight { f: v.map(|x| -x.ln()) }
    }

    pub fn density(&self) -> PeriodicField {
        self.f.map(|f| (-f).exp())
    }

    /// Shifts `f` by a constant so the orbit measure has unit mass.
    pub fn normalized(&self, g: &GroupoidMetric) -> Result<Self, GeometryError> {
        let mass = total_mass(g, self)?;
        Ok(HaarWeight { f: self.f.shift(mass.ln()) })
    }
}

/// A `G`-invariant symmetric 2-tensor in the orthonormal frame
/// `(e^{-k}∂_x, ∂_s)`; it is diagonal for reduced data.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTensor {
    pub a_x: PeriodicField,
    pub a_s: PeriodicField,
}

impl ReducedTensor {
    pub fn norm_sq(&self) -> PeriodicField {
        self.a_x.zip_map(&self.a_s, |x, s| x * x + s * s)
    }

    pub fn trace(&self) -> PeriodicField {
        self.a_x.add(&self.a_s)
    }

    pub fn sup_norm(&self) -> f64 {
        self.norm_sq().values().iter().fold(0.0_f64, |m, v| m.max(v.sqrt()))
    }
}

/// Derivative data of a metric shared by most reduced formulas.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub k_y: PeriodicField,
    pub k_yy: PeriodicField,
    pub u_y: PeriodicField,
    pub exp_u: PeriodicField,
    pub exp_m2u: PeriodicField,
}

impl MetricJet {
    fn new(g: &GroupoidMetric) -> Self {
        let grid = g.grid();
        let (d1, d2) = grid.d12(g.k.periodic().values());
        let lam = g.k.holonomy();
        let k_y = PeriodicField::new(d1.into_iter().map(|v| v + lam).collect());
        let k_yy = PeriodicField::new(d2);
        let u_y = PeriodicField::new(grid.d1(g.u.values()));
        MetricJet {
            k_y,
            k_yy,
            u_y,
            exp_u: g.u.map(f64::exp),
            exp_m2u: g.u.map(|u| (-2.0 * u).exp()),
        }
    }

    /// `Δ_ḡ k + |∇k|² = e^{-2u}(k_yy − u_y k_y + k_y²)`, which is `−R/2`.
    pub fn ricci_potential(&self) -> PeriodicField {
        let n = self.k_y.len();
        PeriodicField::new(
            (0..n)
                .map(|j| {
                    let ky = self.k_y.values()[j];
                    self.exp_m2u.values()[j]
                        * (self.k_yy.values()[j] - self.u_y.values()[j] * ky + ky * ky)
                })
                .collect(),
        )
    }

    pub fn scalar_curvature(&self) -> PeriodicField {
        self.ricci_potential().scale(-2.0)
    }

    pub fn grad_k_sq(&self) -> PeriodicField {
        self.k_y.zip_map(&self.exp_m2u, |ky, e| e * ky * ky)
    }

    /// `Δ_ḡ k = e^{-2u}(k_yy − u_y k_y)`.
    pub fn laplacian_k(&self) -> PeriodicField {
        let n = self.k_y.len();
        PeriodicField::new(
            (0..n)
                .map(|j| {
                    self.exp_m2u.values()[j]
                        * (self.k_yy.values()[j] - self.u_y.values()[j] * self.k_y.values()[j])
                })
                .collect(),
        )
    }
}

fn check_haar(g: &GroupoidMetric, h: &HaarWeight) -> Result<(), GeometryError> {
    g.grid().check(&h.f)?;
    Ok(())
}

pub fn scalar_curvature(g: &GroupoidMetric) -> PeriodicField {
    g.jet().scalar_curvature()
}

/// `|∇w|² = e^{-2u} w_y²`.
pub fn grad_norm_sq<W: GridFunction + ?Sized>(g: &GroupoidMetric, w: &W) -> Result<PeriodicField, GeometryError> {
    let w_y = g.grid().derivative(w, 1)?;
    let e = g.u.map(|u| (-2.0 * u).exp());
    Ok(w_y.zip_map(&e, |d, e| e * d * d))
}

/// Where the Laplacian acts: on the orbit circle with `ḡ = e^{2u}dy²`, or
/// on the total space, where the fibre contributes `⟨∇k, ∇w⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambient {
    OrbitSpace,
    TotalSpace,
}

pub fn laplace_beltrami<W: GridFunction + ?Sized>(
    g: &GroupoidMetric,
    w: &W,
    ambient: Ambient,
) -> Result<PeriodicField, GeometryError> {
    let (w_y, w_yy) = g.grid().derivatives(w)?;
    let jet = g.jet();
    let n = w_y.len();
    let out = (0..n)
        .map(|j| {
            let e = jet.exp_m2u.values()[j];
            let wy = w_y.values()[j];
            let base = w_yy.values()[j] - jet.u_y.values()[j] * wy;
            match ambient {
                Ambient::OrbitSpace => e * base,
                Ambient::TotalSpace => e * (base + jet.k_y.values()[j] * wy),
            }
        })
        .collect();
    Ok(PeriodicField::new(out))
}

/// `θ_y = k_y + f_y`.
pub fn mean_curvature_form(g: &GroupoidMetric, h: &HaarWeight) -> Result<PeriodicField, GeometryError> {
    check_haar(g, h)?;
    let k_y = g.grid().derivative(g.k(), 1)?;
    let f_y = g.grid().derivative(&h.f, 1)?;
    Ok(k_y.add(&f_y))
}

/// Reduced orbit density `e^{-f} e^{u}`.
pub fn orbit_measure(g: &GroupoidMetric, h: &HaarWeight) -> Result<PeriodicField, GeometryError> {
    check_haar(g, h)?;
    Ok(h.f.zip_map(g.u(), |f, u| (u - f).exp()))
}

/// `∫ dη`.
pub fn total_mass(g: &GroupoidMetric, h: &HaarWeight) -> Result<f64, GeometryError> {
    let rho = orbit_measure(g, h)?;
    Ok(rho.mean())
}

/// `div_g` of the invariant 1-form `a dy`:
/// `e^{-u}[(e^{-u} a)_y + k_y e^{-u} a]`.
pub fn divergence(g: &GroupoidMetric, a: &PeriodicField) -> Result<PeriodicField, GeometryError> {
    let grid = g.grid();
    grid.check(a)?;
    let jet = g.jet();
    Ok(divergence_with(grid, &jet, a))
}

pub(crate) fn divergence_with(grid: &Grid, jet: &MetricJet, a: &PeriodicField) -> PeriodicField {
    let emu = jet.exp_u.map(|e| 1.0 / e);
    let x = a.mul(&emu);
    let x_y = PeriodicField::new(grid.d1(x.values()));
    let n = a.len();
    PeriodicField::new(
        (0..n)
            .map(|j| emu.values()[j] * (x_y.values()[j] + jet.k_y.values()[j] * x.values()[j]))
            .collect(),
    )
}

/// `Ric + ∇θ` for `θ = d(k + f)`, in the frame `(e^{-k}∂_x, ∂_s)`:
/// `a_x = R/2 + k_s w_s`, `a_s = R/2 + w_ss` with `w = k + f`.
pub fn soliton_residual(g: &GroupoidMetric, h: &HaarWeight) -> Result<ReducedTensor, GeometryError> {
    check_haar(g, h)?;
    let jet = g.jet();
    Ok(soliton_residual_with(g.grid(), &jet, &h.f))
}

pub(crate) fn soliton_residual_with(grid: &Grid, jet: &MetricJet, f: &PeriodicField) -> ReducedTensor {
    let (f_y, f_yy) = grid.d12(f.values());
    let r_half = jet.ricci_potential().scale(-1.0);
    let n = f.len();
    let mut a_x = Vec::with_capacity(n);
    let mut a_s = Vec::with_capacity(n);
    for j in 0..n {
        let e = jet.exp_m2u.values()[j];
        let ky = jet.k_y.values()[j];
        let wy = ky + f_y[j];
        let wyy = jet.k_yy.values()[j] + f_yy[j];
        let rh = r_half.values()[j];
        a_x.push(rh + e * ky * wy);
        a_s.push(rh + e * (wyy - jet.u_y.values()[j] * wy));
    }
    ReducedTensor {
        a_x: PeriodicField::new(a_x),
        a_s: PeriodicField::new(a_s),
    }
}

/// Residual of the invariant integration-by-parts identity
/// `∫⟨div α, ω⟩ dη = −∫⟨α, ∇ω⟩ dη + ∫⟨ι_{θ♯} α, ω⟩ dη`
/// for `α = a dy` and a function `ω`.
pub fn ibp_residual(
    g: &GroupoidMetric,
    h: &HaarWeight,
    alpha: &PeriodicField,
    omega: &PeriodicField,
) -> Result<f64, GeometryError> {
    let grid = g.grid();
    check_haar(g, h)?;
    grid.check(alpha)?;
    grid.check(omega)?;
    let jet = g.jet();
    let rho = orbit_measure(g, h)?;
    let div_a = divergence_with(grid, &jet, alpha);
    let omega_y = PeriodicField::new(grid.d1(omega.values()));
    let theta = jet.k_y.add(&PeriodicField::new(grid.d1(h.f.values())));
    let n = alpha.len();
    let mut lhs = 0.0;
    let mut grad_term = 0.0;
    let mut theta_term = 0.0;
    for j in 0..n {
        let e = jet.exp_m2u.values()[j];
        let w = rho.values()[j];
        let a = alpha.values()[j];
        let om = omega.values()[j];
        lhs += div_a.values()[j] * om * w;
        grad_term += e * a * omega_y.values()[j] * w;
        theta_term += e * theta.values()[j] * a * om * w;
    }
    let h_sp = grid.spec().spacing();
    Ok(((lhs + grad_term - theta_term) * h_sp).abs())
}

/// Pulls `(k, u, f)` back through the circle diffeomorphism `y = φ(z)`.
///
/// `phi` returns `(φ(z), φ'(z))` and must satisfy `φ(z + 1) = φ(z) + 1`.
pub fn reparametrize(
    g: &GroupoidMetric,
    h: &HaarWeight,
    phi: impl Fn(f64) -> (f64, f64),
) -> Result<(GroupoidMetric, HaarWeight), GeometryError> {
    check_haar(g, h)?;
    let grid = g.grid();
    let nodes = grid.nodes();
    let mapped: Vec<(f64, f64)> = nodes.iter().map(|&z| phi(z)).collect();
    let points: Vec<f64> = mapped.iter().map(|m| m.0).collect();
    let lam = g.holonomy();
    let k_per = grid.interpolate(g.k().periodic(), &points)?;
    let u = grid.interpolate(g.u(), &points)?;
    let f = grid.interpolate(&h.f, &points)?;
    let n = nodes.len();
    let new_k: Vec<f64> = (0..n).map(|j| lam * (points[j] - nodes[j]) + k_per[j]).collect();
    let new_u: Vec<f64> = (0..n).map(|j| u[j] + mapped[j].1.ln()).collect();
    let metric = g.with_fields(PeriodicField::new(new_k), PeriodicField::new(new_u))?;
    Ok((metric, HaarWeight::new(PeriodicField::new(f))))
}
