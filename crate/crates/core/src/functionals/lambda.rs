//! `λ(g) = inf F(g, f)` over unit-mass Haar weights: the bottom of the
//! spectrum of `−4Δ_ḡ + B` with `B = −|∇k|²` on `L²(e^{u}dy)`.
//!
//! With `κ = e^{-f/2}`, `F = ∫(4|∇κ|² + Bκ²) e^{u}dy` and the mass constraint
//! is `∫κ² e^{u}dy = 1`. The quadratic forms are discretised by a Galerkin
//! method in the real trigonometric basis with `|m| < n/2`; the Nyquist
//! mode is left out because the grid cannot represent its derivative.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FunctionalError;
use crate::flow::FlowTrajectory;
use crate::geometry::GroupoidMetric;
use crate::twisted_grid::PeriodicField;

/// Oversampling of the quadrature grid relative to the metric grid.
const QUADRATURE_FACTOR: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    pub lambda: f64,
    /// `κ̃ > 0` at the grid nodes, with `∫κ̃² e^{u}dy = 1`.
    pub ground_state: PeriodicField,
    /// `f̃ = −2 ln κ̃`.
    pub minimizer_f: PeriodicField,
    /// Gap to the next eigenvalue.
    pub spectral_gap: f64,
}

struct Basis {
    /// Values at quadrature points, `q × b`.
    phi: DMatrix<f64>,
    dphi: DMatrix<f64>,
    modes: usize,
}

fn basis(points: &[f64], modes: usize) -> Basis {
    use std::f64::consts::PI;
    let b = 2 * modes + 1;
    let q = points.len();
    let mut phi = DMatrix::zeros(q, b);
    let mut dphi = DMatrix::zeros(q, b);
    for (i, &y) in points.iter().enumerate() {
        phi[(i, 0)] = 1.0;
        for m in 1..=modes {
            let w = 2.0 * PI * m as f64;
            let (s, c) = (w * y).sin_cos();
            phi[(i, 2 * m - 1)] = c;
            phi[(i, 2 * m)] = s;
            dphi[(i, 2 * m - 1)] = -w * s;
            dphi[(i, 2 * m)] = w * c;
        }
    }
    Basis { phi, dphi, modes }
}

/// `Aᵀ diag(w) A`.
fn weighted_gram(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (i, wi) in w.iter().enumerate() {
        scaled.row_mut(i).scale_mut(*wi);
    }
    a.transpose() * scaled
}

pub fn lambda_functional(g: &GroupoidMetric) -> Result<LambdaResult, FunctionalError> {
    let grid = g.grid();
    let n = grid.n();
    let modes = (n - 1) / 2;
    let factor = QUADRATURE_FACTOR;
    let q = n * factor;
    let ky = grid.derivative(g.k(), 1)?;
    let u_f = grid.upsample(g.u(), factor)?;
    let ky_f = grid.upsample(&ky, factor)?;
    let points: Vec<f64> = (0..q).map(|j| j as f64 / q as f64).collect();
    let wq = 1.0 / q as f64;

    let stiff_w: Vec<f64> = u_f.values().iter().map(|u| 4.0 * wq * (-u).exp()).collect();
    let pot_w: Vec<f64> = u_f
        .values()
        .iter()
        .zip(ky_f.values())
        .map(|(u, k)| -wq * (-u).exp() * k * k)
        .collect();
    let mass_w: Vec<f64> = u_f.values().iter().map(|u| wq * u.exp()).collect();

    let bas = basis(&points, modes);
    let k_mat = weighted_gram(&bas.dphi, &stiff_w) + weighted_gram(&bas.phi, &pot_w);
    let m_mat = weighted_gram(&bas.phi, &mass_w);

    let chol = m_mat
        .clone()
        .cholesky()
        .ok_or_else(|| FunctionalError::Eigen("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L⁻¹ K L⁻ᵀ
    let y = l
        .solve_lower_triangular(&k_mat)
        .ok_or_else(|| FunctionalError::Eigen("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| FunctionalError::Eigen("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 10_000)
        .ok_or_else(|| FunctionalError::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda = eig.eigenvalues[order[0]];
    let spectral_gap = order
        .get(1)
        .map(|&i| eig.eigenvalues[i] - lambda)
        .unwrap_or(f64::INFINITY);
    let z: DVector<f64> = eig.eigenvectors.column(order[0]).into_owned();
    let coeffs = l
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| FunctionalError::Eigen("back substitution failed".into()))?;

    // The eigensolver resolves λ only to ε·‖C‖, which grows like n². The
    // Rayleigh quotient of the smooth ground state is accurate to rounding.
    let lambda = coeffs.dot(&(&k_mat * &coeffs)) / coeffs.dot(&(&m_mat * &coeffs));

    let on_fine = &bas.phi * &coeffs;
    let sign = if on_fine.sum() >= 0.0 { 1.0 } else { -1.0 };
    let nodes = grid.nodes();
    let node_basis = basis(&nodes, bas.modes);
    let kappa: Vec<f64> = (&node_basis.phi * &coeffs).iter().map(|v| sign * v).collect();
    for (i, v) in on_fine.iter().enumerate() {
        if !(sign * v > 0.0) {
            return Err(FunctionalError::GroundStateSignChange {
                y: points[i],
                value: sign * v,
            });
        }
    }
    let ground_state = PeriodicField::new(kappa);
    let minimizer_f = ground_state.map(|k| -2.0 * k.ln());
    Ok(LambdaResult {
        lambda,
        ground_state,
        minimizer_f,
        spectral_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSeries {
    pub samples: Vec<(f64, f64)>,
    /// `(t, drop)` wherever `λ` decreases by more than `1e-8·(1+|λ|)`.
    pub violations: Vec<(f64, f64)>,
}

impl LambdaSeries {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn lambda_monotonicity(traj: &FlowTrajectory) -> Result<LambdaSeries, FunctionalError> {
    let mut samples = Vec::with_capacity(traj.len());
    for s in traj.checkpoints() {
        samples.push((s.t, lambda_functional(&s.metric)?.lambda));
    }
    let violations = samples
        .windows(2)
        .filter_map(|w| {
            let drop = w[0].1 - w[1].1;
            (drop > 1e-8 * (1.0 + w[0].1.abs())).then_some((w[1].0, drop))
        })
        .collect();
    Ok(LambdaSeries { samples, violations })
}
