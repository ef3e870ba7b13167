//! Target-sphere geometry and the penalty potential.
//!
//! The penalty is `F(y) = χ((|y|² − 1)²)`, where `χ` is the identity on
//! `[0, 1/4]`, saturates at 1 on `[1/2, ∞)` and blends smoothly in between.
//! `F` vanishes exactly on the unit sphere and its gradient is radial.

use crate::error::{Error, Result};
use crate::field::{Field, ScalarField};
use crate::spectral::SpectralWorkspace;

/// Default tolerance below which a vector cannot be retracted onto the sphere.
pub const RETRACTION_TOL: f64 = 1e-8;

/// Penalty strength and the transition interval of `χ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub epsilon: f64,
    pub chi_lo: f64,
    pub chi_hi: f64,
}

impl PenaltyParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        Self::with_transition(epsilon, 0.25, 0.5)
    }

    pub fn with_transition(epsilon: f64, chi_lo: f64, chi_hi: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0 < chi_lo && chi_lo < chi_hi && chi_hi <= 1.0) {
            return Err(Error::Domain(format!(
                "need 0 < chi_lo < chi_hi <= 1, got ({chi_lo}, {chi_hi})"
            )));
        }
        Ok(Self { epsilon, chi_lo, chi_hi })
    }
}

/// A unit vector in the ambient space `ℝ^{l+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for SpherePoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

#[inline]
fn bump_prime(t: f64) -> f64 {
    if t > 0.0 {
        bump(t) / (t * t)
    } else {
        0.0
    }
}

/// Smooth step: 0 for t <= 0, 1 for t >= 1.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = bump(t);
    a / (a + bump(1.0 - t))
}

/// `1 − smooth_step(t)`, computed without cancellation.
fn smooth_step_complement(t: f64) -> f64 {
    smooth_step(1.0 - t)
}

fn smooth_step_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = bump(t);
    let b = bump(1.0 - t);
    (bump_prime(t) * b + a * bump_prime(1.0 - t)) / ((a + b) * (a + b))
}

/// Transition function `χ`. Errors on negative arguments.
pub fn chi(s: f64, p: &PenaltyParams) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("chi requires s >= 0, got {s}")));
    }
    Ok(chi_unchecked(s, p))
}

#[inline]
fn chi_unchecked(s: f64, p: &PenaltyParams) -> f64 {
    if s <= p.chi_lo {
        s
    } else if s >= p.chi_hi {
        1.0
    } else {
        let t = (s - p.chi_lo) / (p.chi_hi - p.chi_lo);
        1.0 - (1.0 - s) * smooth_step_complement(t)
    }
}

/// Derivative of `χ`; zero on the upper plateau.
pub fn chi_prime(s: f64, p: &PenaltyParams) -> f64 {
    if s <= p.chi_lo {
        1.0
    } else if s >= p.chi_hi {
        0.0
    } else {
        let w = p.chi_hi - p.chi_lo;
        let t = (s - p.chi_lo) / w;
        smooth_step_complement(t) + (1.0 - s) * smooth_step_prime(t) / w
    }
}

/// `F(y) = χ((|y|² − 1)²)`.
pub fn penalty(y: &[f64], p: &PenaltyParams) -> f64 {
    let d = norm_sq(y) - 1.0;
    chi_unchecked(d * d, p)
}

/// Scalar `c` with `∇F(y) = c·y`.
#[inline]
pub(crate) fn grad_penalty_factor(y: &[f64], p: &PenaltyParams) -> f64 {
    let d = norm_sq(y) - 1.0;
    4.0 * chi_prime(d * d, p) * d
}

/// `∇F(y) = 4 χ'((|y|²−1)²) (|y|²−1) y`.
pub fn grad_penalty(y: &[f64], p: &PenaltyParams) -> Vec<f64> {
    let c = grad_penalty_factor(y, p);
    y.iter().map(|x| c * x).collect()
}

/// Retraction `y ↦ y/|y|`.
pub fn project_sphere(y: &[f64], tol: f64) -> Result<SpherePoint> {
    let norm = norm_sq(y).sqrt();
    if !(norm >= tol) {
        return Err(Error::DegenerateVector { norm, tol });
    }
    Ok(SpherePoint(y.iter().map(|x| x / norm).collect()))
}

/// Orthogonal projection onto the tangent space at `base`.
pub fn project_tangent(base: &SpherePoint, w: &[f64]) -> Vec<f64> {
    let mut out = w.to_vec();
    project_tangent_in_place(base.coords(), &mut out);
    out
}

#[inline]
pub(crate) fn project_tangent_in_place(base: &[f64], w: &mut [f64]) {
    let c = dot(w, base);
    for (wi, bi) in w.iter_mut().zip(base) {
        *wi -= c * bi;
    }
}

/// Pointwise `|Δu|² − |v|² − Δ|∇u|² − 2 Div⟨Δu, ∇u⟩`, the normal force
/// density keeping a constrained solution on the sphere.
pub fn lagrange_multiplier(
    u: &Field,
    v: &Field,
    ws: &mut SpectralWorkspace,
) -> Result<ScalarField> {
    u.check_same_shape(v)?;
    let lap = ws.laplacian(u)?;
    let grad = ws.gradient(u)?;
    let grad_sq = Field::pointwise_dot_sum(&grad, &grad)?;
    let lap_grad_sq = ws.laplacian(&grad_sq)?;
    let flux = ws.div_contraction(&lap, &grad, None)?;
    let lap_sq = lap.pointwise_dot(&lap)?;
    let v_sq = v.pointwise_dot(v)?;
    let values = (0..u.num_points())
        .map(|k| {
            lap_sq.values()[k] - v_sq.values()[k] - lap_grad_sq.values()[k]
                - 2.0 * flux.values()[k]
        })
        .collect();
    Ok(ScalarField::from_values(u.grid().clone(), values))
}
