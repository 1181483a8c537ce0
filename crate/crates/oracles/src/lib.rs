//! Reference computations for the test suites.
//!
//! Nothing here shares code with the main crate: fields are closed-form
//! trigonometric series with analytic derivatives, curvature comes from
//! general 2-D tensor calculus, and discrete operators are assembled as
//! dense matrices.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

const TAU: f64 = 2.0 * PI;

/// `c0 + Σ a_m cos(2πmy) + b_m sin(2πmy)` with analytic derivatives.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrigSeries {
    pub c0: f64,
    /// `(m, a_m, b_m)`
    pub terms: Vec<(u32, f64, f64)>,
}

impl TrigSeries {
    pub fn new(c0: f64, terms: Vec<(u32, f64, f64)>) -> Self {
        TrigSeries { c0, terms }
    }

    pub fn zero() -> Self {
        TrigSeries::default()
    }

    /// `order`-th derivative at `y`.
    pub fn eval(&self, y: f64, order: u32) -> f64 {
        let mut acc = if order == 0 { self.c0 } else { 0.0 };
        for &(m, a, b) in &self.terms {
            let w = TAU * m as f64;
            let (s, c) = (w * y).sin_cos();
            // d/dy cycles (cos, sin) -> (-sin, cos)
            let (dc, ds) = match order % 4 {
                0 => (c, s),
                1 => (-s, c),
                2 => (-c, -s),
                _ => (s, -c),
            };
            acc += w.powi(order as i32) * (a * dc + b * ds);
        }
        acc
    }

    pub fn sample(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.eval(j as f64 / n as f64, 0)).collect()
    }

    pub fn max_mode(&self) -> u32 {
        self.terms.iter().map(|t| t.0).max().unwrap_or(0)
    }
}

/// `k = λy + p(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistedSeries {
    pub holonomy: f64,
    pub periodic: TrigSeries,
}

impl TwistedSeries {
    pub fn eval(&self, y: f64, order: u32) -> f64 {
        let lin = match order {
            0 => self.holonomy * y,
            1 => self.holonomy,
            _ => 0.0,
        };
        lin + self.periodic.eval(y, order)
    }
}

/// A metric `g = e^{2k}dx² + e^{2u}dy²` given by series, with the curvature
/// obtained by brute-force tensor calculus in coordinates `(x, y)`.
pub struct TensorOracle {
    pub k: TwistedSeries,
    pub u: TrigSeries,
    pub f: TrigSeries,
}

type M2 = [[f64; 2]; 2];
type G3 = [[[f64; 2]; 2]; 2];

impl TensorOracle {
    fn metric(&self, y: f64) -> (M2, M2, [M2; 2]) {
        let k = self.k.eval(y, 0);
        let u = self.u.eval(y, 0);
        let ky = self.k.eval(y, 1);
        let uy = self.u.eval(y, 1);
        let g = [[(2.0 * k).exp(), 0.0], [0.0, (2.0 * u).exp()]];
        let gi = [[(-2.0 * k).exp(), 0.0], [0.0, (-2.0 * u).exp()]];
        // ∂_x g = 0, ∂_y g analytic
        let dg = [
            [[0.0; 2]; 2],
            [[2.0 * ky * g[0][0], 0.0], [0.0, 2.0 * uy * g[1][1]]],
        ];
        (g, gi, dg)
    }

    /// `Γ^a_{bc}`.
    pub fn christoffel(&self, y: f64) -> G3 {
        let (_, gi, dg) = self.metric(y);
        let mut gam = [[[0.0; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let mut s = 0.0;
                    for d in 0..2 {
                        s += 0.5 * gi[a][d] * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]);
                    }
                    gam[a][b][c] = s;
                }
            }
        }
        gam
    }

    /// `∂_y Γ` by an eighth-order central difference.
    fn christoffel_dy(&self, y: f64) -> G3 {
        let h = 1e-3;
        let w = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let mut out = [[[0.0; 2]; 2]; 2];
        for (i, wi) in w.iter().enumerate() {
            let s = (i + 1) as f64 * h;
            let p = self.christoffel(y + s);
            let m = self.christoffel(y - s);
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        out[a][b][c] += wi * (p[a][b][c] - m[a][b][c]) / h;
                    }
                }
            }
        }
        out
    }

    /// `Ric_{bd} = R^a_{bad}` with
    /// `R^a_{bcd} = ∂_cΓ^a_{db} − ∂_dΓ^a_{cb} + Γ^a_{ce}Γ^e_{db} − Γ^a_{de}Γ^e_{cb}`.
    pub fn ricci(&self, y: f64) -> M2 {
        let gam = self.christoffel(y);
        let dgy = self.christoffel_dy(y);
        let d = |c: usize, a: usize, b: usize, e: usize| if c == 1 { dgy[a][b][e] } else { 0.0 };
        let mut ric = [[0.0; 2]; 2];
        for b in 0..2 {
            for dd in 0..2 {
                let mut s = 0.0;
                for a in 0..2 {
                    let c = a;
                    s += d(c, a, dd, b) - d(dd, a, c, b);
                    for e in 0..2 {
                        s += gam[a][c][e] * gam[e][dd][b] - gam[a][dd][e] * gam[e][c][b];
                    }
                }
                ric[b][dd] = s;
            }
        }
        ric
    }

    pub fn scalar_curvature(&self, y: f64) -> f64 {
        let (_, gi, _) = self.metric(y);
        let ric = self.ricci(y);
        let mut r = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                r += gi[a][b] * ric[a][b];
            }
        }
        r
    }

    /// `Hess(w)_{bc} = ∂_b∂_c w − Γ^a_{bc} ∂_a w` for `w = k + f`.
    pub fn hessian_w(&self, y: f64) -> M2 {
        let gam = self.christoffel(y);
        let wy = self.k.eval(y, 1) + self.f.eval(y, 1);
        let wyy = self.k.eval(y, 2) + self.f.eval(y, 2);
        let dw = [0.0, wy];
        let mut h = [[0.0; 2]; 2];
        for b in 0..2 {
            for c in 0..2 {
                let mut s = if b == 1 && c == 1 { wyy } else { 0.0 };
                for a in 0..2 {
                    s -= gam[a][b][c] * dw[a];
                }
                h[b][c] = s;
            }
        }
        h
    }

    /// `Ric + Hess(k + f)` in the orthonormal frame `(e^{-k}∂_x, e^{-u}∂_y)`:
    /// `(xx, yy, xy)` components.
    pub fn soliton_tensor(&self, y: f64) -> (f64, f64, f64) {
        let ric = self.ricci(y);
        let hs = self.hessian_w(y);
        let ek = (-self.k.eval(y, 0)).exp();
        let eu = (-self.u.eval(y, 0)).exp();
        (
            (ric[0][0] + hs[0][0]) * ek * ek,
            (ric[1][1] + hs[1][1]) * eu * eu,
            (ric[0][1] + hs[0][1]) * ek * eu,
        )
    }
}

/// Fourier differentiation matrices on `n` equispaced nodes of `[0, 1)`,
/// from the cotangent formulas. For even `n` the first-derivative matrix
/// drops the Nyquist mode and the second keeps it with symbol `−(πn)²`.
pub fn spectral_d1(n: usize) -> DMatrix<f64> {
    let h = TAU / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let d = i as isize - j as isize;
        let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let x = d as f64 * h / 2.0;
        let v = if n % 2 == 0 { 0.5 * sign / x.tan() } else { 0.5 * sign / x.sin() };
        v * TAU
    })
}

pub fn spectral_d2(n: usize) -> DMatrix<f64> {
    let h = TAU / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        let v = if i == j {
            if n % 2 == 0 {
                -PI * PI / (3.0 * h * h) - 1.0 / 6.0
            } else {
                -PI * PI / (3.0 * h * h) + 1.0 / 12.0
            }
        } else {
            let d = i as isize - j as isize;
            let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let x = d as f64 * h / 2.0;
            if n % 2 == 0 {
                -0.5 * sign / (x.sin() * x.sin())
            } else {
                -0.5 * sign / (x.sin() * x.tan())
            }
        };
        v * TAU * TAU
    })
}

/// Dense generator of the reversed-time conjugate equation
/// `v_τ = e^{-2u}(v_yy − (u_y + k_y) v_y + k_y² v)` for frozen `(k, u)`.
pub fn conjugate_generator(n: usize, k: &TwistedSeries, u: &TrigSeries) -> DMatrix<f64> {
    let d1 = spectral_d1(n);
    let d2 = spectral_d2(n);
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let y = i as f64 / n as f64;
        let e = (-2.0 * u.eval(y, 0)).exp();
        let ky = k.eval(y, 1);
        let adv = u.eval(y, 1) + ky;
        for j in 0..n {
            l[(i, j)] = e * (d2[(i, j)] - adv * d1[(i, j)]);
        }
        l[(i, i)] += e * ky * ky;
    }
    l
}

/// `exp(τL) v`.
pub fn propagate(l: &DMatrix<f64>, tau: f64, v: &[f64]) -> Vec<f64> {
    let m = (l * tau).exp();
    let out = m * DVector::from_column_slice(v);
    out.iter().copied().collect()
}

/// Smallest eigenvalue of `−4Δ_ḡ − |∇k|²` by odd-`n` Fourier collocation.
///
/// With `E = diag(e^{u})` and `D` the (antisymmetric) odd-`n` derivative
/// matrix, `−4Δ_ḡ = −4E⁻¹DE⁻¹D` is similar to the symmetric matrix
/// `4E^{-1/2}DᵀE⁻¹DE^{-1/2}`.
pub fn lambda_collocation(n: usize, k: &TwistedSeries, u: &TrigSeries) -> f64 {
    assert!(n % 2 == 1, "the collocation oracle needs an odd node count");
    let d = spectral_d1(n);
    let ys: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
    let eu: Vec<f64> = ys.iter().map(|&y| u.eval(y, 0).exp()).collect();
    let einv = DMatrix::from_diagonal(&DVector::from_iterator(n, eu.iter().map(|e| 1.0 / e)));
    let ehalf = DMatrix::from_diagonal(&DVector::from_iterator(n, eu.iter().map(|e| 1.0 / e.sqrt())));
    let core = d.transpose() * &einv * &d;
    let mut s = &ehalf * core * &ehalf * 4.0;
    for i in 0..n {
        let y = ys[i];
        let q = (-2.0 * u.eval(y, 0)).exp() * k.eval(y, 1).powi(2);
        s[(i, i)] -= q;
    }
    let s = (&s + s.transpose()) * 0.5;
    let eig = s.symmetric_eigenvalues();
    eig.iter().copied().fold(f64::INFINITY, f64::min)
}
