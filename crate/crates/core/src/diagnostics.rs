//! Observables controlled by the analysis of the penalized and constrained
//! problems: energies, rotation charges, constraint violation, the sphere
//! identities, the rotation-frame decomposition and equation residuals.

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::field::{Field, PointMap, ScalarField};
use crate::sphere::{self, lagrange_multiplier, penalty, PenaltyParams};
use crate::spectral::SpectralWorkspace;

/// Infinitesimal rotation `Λ_ij ω = ω^i e_j − ω^j e_i` (0-based, `i < j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkewGenerator {
    pub i: usize,
    pub j: usize,
}

impl SkewGenerator {
    pub fn new(i: usize, j: usize) -> Result<Self> {
        if i >= j {
            return Err(Error::Domain(format!("generator needs i < j, got ({i}, {j})")));
        }
        Ok(Self { i, j })
    }

    /// Column label with 1-based indices, e.g. `Q_12`.
    pub fn label(&self) -> String {
        format!("Q_{}{}", self.i + 1, self.j + 1)
    }
}

impl PointMap for SkewGenerator {
    fn apply(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        out[self.j] = w[self.i];
        out[self.i] = -w[self.j];
    }
}

/// All `l(l+1)/2` generators for an ambient dimension `l+1`.
pub fn all_generators(ambient: usize) -> Vec<SkewGenerator> {
    let mut out = Vec::new();
    for i in 0..ambient {
        for j in i + 1..ambient {
            out.push(SkewGenerator { i, j });
        }
    }
    out
}

/// Per-sample scalar observables.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy_penalized: f64,
    pub energy_geometric: f64,
    pub penalty_mass: f64,
    pub constraint_l2: f64,
    pub constraint_linf: f64,
    pub charges: Vec<f64>,
    pub tangential_residual_l2: f64,
    pub identity_gap_l2: f64,
}

/// `½ ∫ (|v|² + |Δu|²)`.
pub fn energy_geometric(state: &State, ws: &mut SpectralWorkspace) -> Result<f64> {
    let lap = ws.laplacian(&state.u)?;
    let dens = state.v.pointwise_dot(&state.v)?.lin_comb(0.5, &lap.pointwise_dot(&lap)?, 0.5)?;
    dens.integrate()
}

/// `E + (1/ε) ∫ F(u)`.
pub fn energy_penalized(state: &State, p: &PenaltyParams, ws: &mut SpectralWorkspace) -> Result<f64> {
    Ok(energy_geometric(state, ws)? + penalty_mass(&state.u, p)? / p.epsilon)
}

/// `∫ ⟨v, Λ u⟩`.
pub fn noether_charge(state: &State, g: &SkewGenerator) -> Result<f64> {
    check_generator(&state.u, g)?;
    let dens: Vec<f64> = state
        .v
        .points()
        .zip(state.u.points())
        .map(|(v, u)| v[g.j] * u[g.i] - v[g.i] * u[g.j])
        .collect();
    ScalarField::from_values(state.u.grid().clone(), dens).integrate()
}

fn check_generator(u: &Field, g: &SkewGenerator) -> Result<()> {
    if g.j >= u.components() {
        return Err(Error::ShapeMismatch(format!(
            "generator ({}, {}) out of range for {} components",
            g.i,
            g.j,
            u.components()
        )));
    }
    Ok(())
}

/// Scalar field `|u|² − 1`.
pub fn constraint_field(u: &Field) -> ScalarField {
    let vals = u.points().map(|p| sphere::norm_sq(p) - 1.0).collect();
    ScalarField::from_values(u.grid().clone(), vals)
}

/// `(‖|u|² − 1‖_{L²}, ‖|u|² − 1‖_{L∞})`.
pub fn constraint_norms(u: &Field) -> (f64, f64) {
    let c = constraint_field(u);
    (c.l2_norm(), c.max_abs())
}

/// `∫ F(u)`.
pub fn penalty_mass(u: &Field, p: &PenaltyParams) -> Result<f64> {
    let vals = u.points().map(|y| penalty(y, p)).collect();
    ScalarField::from_values(u.grid().clone(), vals).integrate()
}

/// Defects of the pointwise identities that hold for sphere-valued maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereIdentityGaps {
    /// `‖⟨Δu, u⟩ + |∇u|²‖_{L²}`.
    pub identity_gap_l2: f64,
    /// `max(0, max_x (|∇u|² − |Δu|))`.
    pub ineq_violation: f64,
    /// `‖⟨v, u⟩‖_{L²}`.
    pub tangency_gap: f64,
}

pub fn sphere_identities(u: &Field, v: &Field, ws: &mut SpectralWorkspace) -> Result<SphereIdentityGaps> {
    u.check_same_shape(v)?;
    let lap = ws.laplacian(u)?;
    let grad = ws.gradient(u)?;
    let grad_sq = Field::pointwise_dot_sum(&grad, &grad)?;
    let gap = lap.pointwise_dot(u)?.lin_comb(1.0, &grad_sq, 1.0)?;
    let ineq = grad_sq
        .values()
        .iter()
        .zip(lap.points())
        .map(|(g, l)| g - sphere::norm_sq(l).sqrt())
        .fold(0.0f64, f64::max);
    Ok(SphereIdentityGaps {
        identity_gap_l2: gap.l2_norm(),
        ineq_violation: ineq,
        tangency_gap: v.pointwise_dot(u)?.l2_norm(),
    })
}

/// Normal part and rotation coefficients of a field along a sphere-valued map.
#[derive(Debug, Clone)]
pub struct FrameDecomposition {
    /// `⟨φ, u⟩`.
    pub normal: ScalarField,
    /// `φ_ij` for each generator, in [`all_generators`] order.
    pub tangent_coeffs: Vec<(SkewGenerator, ScalarField)>,
}

/// Splits `φ = ⟨φ,u⟩u + Σ φ_ij Λ_ij u` with
/// `φ_ij = u^i(φ^j − ⟨φ,u⟩u^j) − u^j(φ^i − ⟨φ,u⟩u^i)`.
pub fn frame_decompose(u: &Field, phi: &Field) -> Result<FrameDecomposition> {
    u.check_same_shape(phi)?;
    for (k, p) in u.points().enumerate() {
        let deviation = (sphere::norm_sq(p).sqrt() - 1.0).abs();
        if deviation > 1e-8 {
            return Err(Error::OffSphere { deviation, point: k });
        }
    }
    let grid = u.grid().clone();
    let normal_vals: Vec<f64> = u.points().zip(phi.points()).map(|(a, b)| sphere::dot(a, b)).collect();
    let tangent_coeffs = all_generators(u.components())
        .into_iter()
        .map(|g| {
            let vals = u
                .points()
                .zip(phi.points())
                .zip(&normal_vals)
                .map(|((w, f), &n)| {
                    w[g.i] * (f[g.j] - n * w[g.j]) - w[g.j] * (f[g.i] - n * w[g.i])
                })
                .collect();
            (g, ScalarField::from_values(grid.clone(), vals))
        })
        .collect();
    Ok(FrameDecomposition { normal: ScalarField::from_values(grid, normal_vals), tangent_coeffs })
}

/// Inverse of [`frame_decompose`].
pub fn reassemble(u: &Field, parts: &FrameDecomposition) -> Result<Field> {
    let mut out = u.scaled_by(&parts.normal)?;
    for (g, coeff) in &parts.tangent_coeffs {
        let rotated = u.map_points(g).scaled_by(coeff)?;
        out.axpy(1.0, &rotated)?;
    }
    Ok(out)
}

/// L² norms of the three equivalent formulations evaluated on `(u, v, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// Tangential part of `a + Δ²u`.
    pub geometric_l2: f64,
    /// `a + Δ²u − λ_u u`.
    pub pde_l2: f64,
    /// Root-sum-square over generators of the conservation-law residuals.
    pub divergence_form_l2: f64,
}

/// Tangential part of `w` along `u/|u|`, pointwise.
fn tangential_part(u: &Field, w: &Field) -> Result<Field> {
    u.check_same_shape(w)?;
    let mut out = w.clone();
    let c = u.components();
    for (o, b) in out.values_mut().chunks_exact_mut(c).zip(u.points()) {
        let n = sphere::norm_sq(b).sqrt();
        if n > 0.0 {
            let base: Vec<f64> = b.iter().map(|x| x / n).collect();
            sphere::project_tangent_in_place(&base, o);
        }
    }
    Ok(out)
}

/// Pointwise `Δ⟨Δu, Λu⟩ − 2 Div⟨Δu, Λ∇u⟩` for one generator.
fn conservation_flux_terms(
    lap: &Field,
    grad: &[Field],
    rot_u: &Field,
    g: &SkewGenerator,
    ws: &mut SpectralWorkspace,
) -> Result<ScalarField> {
    let lap_term = ws.laplacian(&lap.pointwise_dot(rot_u)?)?;
    let div_term = ws.div_contraction(lap, grad, Some(g))?;
    lap_term.lin_comb(1.0, &div_term, -2.0)
}

/// Pointwise defect of `Δ⟨Δu,Λu⟩ − 2Div⟨Δu,Λ∇u⟩ = ⟨Δ²u,Λu⟩`, valid for any `u`.
pub fn divergence_identity_defect(
    u: &Field,
    g: &SkewGenerator,
    ws: &mut SpectralWorkspace,
) -> Result<ScalarField> {
    check_generator(u, g)?;
    let lap = ws.laplacian(u)?;
    let grad = ws.gradient(u)?;
    let bil = ws.bilaplacian(u)?;
    let rot_u = u.map_points(g);
    let lhs = conservation_flux_terms(&lap, &grad, &rot_u, g, ws)?;
    lhs.lin_comb(1.0, &bil.pointwise_dot(&rot_u)?, -1.0)
}

pub fn residual_equations(u: &Field, v: &Field, a: &Field, ws: &mut SpectralWorkspace) -> Result<Residuals> {
    u.check_same_shape(v)?;
    u.check_same_shape(a)?;
    let bil = ws.bilaplacian(u)?;
    let lap = ws.laplacian(u)?;
    let grad = ws.gradient(u)?;
    let a_plus = a.lin_comb(1.0, &bil, 1.0)?;
    let geometric_l2 = tangential_part(u, &a_plus)?.l2_norm();

    let lambda = lagrange_multiplier(u, v, ws)?;
    let pde = a_plus.lin_comb(1.0, &u.scaled_by(&lambda)?, -1.0)?;

    let mut sum_sq = 0.0;
    for g in all_generators(u.components()) {
        let rot_u = u.map_points(&g);
        let r = a.pointwise_dot(&rot_u)?.lin_comb(
            1.0,
            &conservation_flux_terms(&lap, &grad, &rot_u, &g, ws)?,
            1.0,
        )?;
        sum_sq += r.l2_norm().powi(2);
    }
    Ok(Residuals { geometric_l2, pde_l2: pde.l2_norm(), divergence_form_l2: sum_sq.sqrt() })
}

/// Root-sum-square over generators of the conservation-law residual for the
/// tangential-Laplacian dynamics, which carries the extra flux
/// `2 Div⟨|∇u|²∇u, Λu⟩`.
pub fn variant_divergence_residual(u: &Field, a: &Field, ws: &mut SpectralWorkspace) -> Result<f64> {
    u.check_same_shape(a)?;
    let lap = ws.laplacian(u)?;
    let grad = ws.gradient(u)?;
    let grad_sq = Field::pointwise_dot_sum(&grad, &grad)?;
    let fluxes = grad.iter().map(|g| g.scaled_by(&grad_sq)).collect::<Result<Vec<_>>>()?;
    let mut sum_sq = 0.0;
    for g in all_generators(u.components()) {
        let rot_u = u.map_points(&g);
        let base = conservation_flux_terms(&lap, &grad, &rot_u, &g, ws)?;
        let extra = ws.div_contraction(&rot_u, &fluxes, None)?;
        let r = a.pointwise_dot(&rot_u)?.lin_comb(1.0, &base, 1.0)?.lin_comb(1.0, &extra, 2.0)?;
        sum_sq += r.l2_norm().powi(2);
    }
    Ok(sum_sq.sqrt())
}

/// Lagrangian densities `½(|v|² − |Δu|²)` and `½(|v|² − |Δu|² + |∇u|⁴)`.
pub fn action_densities(u: &Field, v: &Field, ws: &mut SpectralWorkspace) -> Result<(ScalarField, ScalarField)> {
    u.check_same_shape(v)?;
    let lap = ws.laplacian(u)?;
    let grad = ws.gradient(u)?;
    let grad_sq = Field::pointwise_dot_sum(&grad, &grad)?;
    let phi = v.pointwise_dot(v)?.lin_comb(0.5, &lap.pointwise_dot(&lap)?, -0.5)?;
    let quartic: Vec<f64> = grad_sq.values().iter().map(|g| 0.5 * g * g).collect();
    let psi = phi.lin_comb(1.0, &ScalarField::from_values(u.grid().clone(), quartic), 1.0)?;
    Ok((phi, psi))
}

/// Full diagnostics record for a state with acceleration estimate `a`.
pub fn record(state: &State, a: &Field, p: &PenaltyParams, ws: &mut SpectralWorkspace) -> Result<DiagnosticsRecord> {
    let energy_geometric = energy_geometric(state, ws)?;
    let penalty_mass = penalty_mass(&state.u, p)?;
    let (constraint_l2, constraint_linf) = constraint_norms(&state.u);
    let charges = all_generators(state.u.components())
        .iter()
        .map(|g| noether_charge(state, g))
        .collect::<Result<Vec<_>>>()?;
    let bil = ws.bilaplacian(&state.u)?;
    let tangential_residual_l2 = tangential_part(&state.u, &a.lin_comb(1.0, &bil, 1.0)?)?.l2_norm();
    let identity_gap_l2 = sphere_identities(&state.u, &state.v, ws)?.identity_gap_l2;
    Ok(DiagnosticsRecord {
        t: state.t,
        energy_penalized: energy_geometric + penalty_mass / p.epsilon,
        energy_geometric,
        penalty_mass,
        constraint_l2,
        constraint_linf,
        charges,
        tangential_residual_l2,
        identity_gap_l2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::initial::great_circle_wave;
    use std::f64::consts::PI;

    const E1: [f64; 2] = [1.0, 0.0];
    const E2: [f64; 2] = [0.0, 1.0];

    fn grid(n: usize) -> GridSpec {
        GridSpec::line(n, 2.0 * PI).unwrap()
    }

    fn constant(g: &GridSpec, y: &[f64]) -> State {
        let c = y.len();
        let u = Field::from_fn(g.clone(), c, |_, o| o.copy_from_slice(y));
        State::new(u, Field::zeros(g.clone(), c), 0.0).unwrap()
    }

    #[test]
    fn generator_action_and_labels() {
        let g = SkewGenerator::new(0, 2).unwrap();
        let mut out = [0.0; 3];
        g.apply(&[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, [-3.0, 0.0, 1.0]);
        assert_eq!(g.label(), "Q_13");
        assert!(SkewGenerator::new(1, 1).is_err());
        assert_eq!(all_generators(4).len(), 6);
    }

    #[test]
    fn energies_of_simple_states() {
        let g = grid(32);
        let mut ws = SpectralWorkspace::new(&g);
        let p = PenaltyParams::new(0.01).unwrap();
        assert_eq!(energy_geometric(&constant(&g, &E1), &mut ws).unwrap(), 0.0);

        let s = great_circle_wave(&g, &[2], 3.0, (&E1, &E2), 0.0).unwrap();
        let e = energy_geometric(&s, &mut ws).unwrap();
        assert!((e - 0.5 * (9.0 + 16.0) * 2.0 * PI).abs() < 1e-11);
        assert_eq!(energy_penalized(&s, &p, &mut ws).unwrap(), e);

        let off = constant(&g, &[1.1, 0.0]);
        let ep = energy_penalized(&off, &p, &mut ws).unwrap();
        assert!((ep - 100.0 * 0.0441 * 2.0 * PI).abs() < 1e-11, "{ep}");
    }

    #[test]
    fn constraint_and_penalty_mass_examples() {
        let g = grid(16);
        let p = PenaltyParams::new(0.01).unwrap();
        let off = constant(&g, &[1.1, 0.0]);
        let (l2, linf) = constraint_norms(&off.u);
        assert!((linf - 0.21).abs() < 1e-15);
        assert!((l2 - 0.21 * (2.0 * PI).sqrt()).abs() < 1e-14);
        assert!((penalty_mass(&off.u, &p).unwrap() - 0.0441 * 2.0 * PI).abs() < 1e-14);
        let s = great_circle_wave(&g, &[1], 1.0, (&E1, &E2), 0.2).unwrap();
        let (l2, linf) = constraint_norms(&s.u);
        assert!(l2 < 1e-14 && linf < 1e-14);
        assert!(penalty_mass(&s.u, &p).unwrap() < 1e-28);
    }

    #[test]
    fn charge_of_rigid_rotation() {
        let g = grid(32);
        let omega = 1.7;
        let theta: f64 = 0.4;
        let u = Field::from_fn(g.clone(), 2, |_, o| o.copy_from_slice(&[theta.cos(), theta.sin()]));
        let v = Field::from_fn(g.clone(), 2, |_, o| {
            o.copy_from_slice(&[-omega * theta.sin(), omega * theta.cos()])
        });
        let s = State::new(u, v, 0.0).unwrap();
        let q = noether_charge(&s, &SkewGenerator::new(0, 1).unwrap()).unwrap();
        assert!((q - omega * 2.0 * PI).abs() < 1e-12);
        assert_eq!(noether_charge(&constant(&g, &E1), &SkewGenerator::new(0, 1).unwrap()).unwrap(), 0.0);
        assert!(noether_charge(&s, &SkewGenerator::new(0, 2).unwrap()).is_err());
    }

    #[test]
    fn great_circle_satisfies_sphere_identities() {
        let g = grid(64);
        let mut ws = SpectralWorkspace::new(&g);
        let s = great_circle_wave(&g, &[3], 9.0, (&E1, &E2), 0.1).unwrap();
        let gaps = sphere_identities(&s.u, &s.v, &mut ws).unwrap();
        assert!(gaps.identity_gap_l2 < 1e-10);
        assert!(gaps.ineq_violation < 1e-10);
        assert!(gaps.tangency_gap < 1e-10);
        let c = constant(&g, &E1);
        let gaps = sphere_identities(&c.u, &c.v, &mut ws).unwrap();
        assert_eq!((gaps.identity_gap_l2, gaps.ineq_violation, gaps.tangency_gap), (0.0, 0.0, 0.0));
        // a uniform rescaling keeps |u| constant, so the identity still holds
        let mut off = s.u.clone();
        off.scale(1.1);
        let gaps = sphere_identities(&off, &s.v, &mut ws).unwrap();
        assert!(gaps.identity_gap_l2 < 1e-10);
        // ⟨Δu,u⟩ + |∇u|² = ½Δ|u|² detects a varying modulus
        let m = Field::from_fn(g.clone(), 1, |x, o| o[0] = 1.0 + 0.1 * x[0].sin());
        let off = s.u.scaled_by(&m).unwrap();
        let gaps = sphere_identities(&off, &s.v, &mut ws).unwrap();
        assert!(gaps.identity_gap_l2 > 1e-3);
    }

    #[test]
    fn frame_examples() {
        let g = grid(16);
        let s = great_circle_wave(&g, &[1], 0.0, (&E1, &E2), 0.0).unwrap();
        let parts = frame_decompose(&s.u, &s.u).unwrap();
        assert!(parts.normal.values().iter().all(|x| (x - 1.0).abs() < 1e-15));
        assert!(parts.tangent_coeffs.iter().all(|(_, c)| c.max_abs() < 1e-15));

        // φ = (−sinθ, cosθ) is the unit tangent: φ_12 ≡ 1
        let phi = Field::from_fn(g.clone(), 2, |x, o| o.copy_from_slice(&[-x[0].sin(), x[0].cos()]));
        let parts = frame_decompose(&s.u, &phi).unwrap();
        assert!(parts.normal.max_abs() < 1e-15);
        assert!(parts.tangent_coeffs[0].1.values().iter().all(|x| (x - 1.0).abs() < 1e-15));
        let back = reassemble(&s.u, &parts).unwrap();
        assert!(back.max_distance(&phi).unwrap() < 1e-15);

        let mut off = s.u.clone();
        off.scale(1.01);
        assert!(matches!(frame_decompose(&off, &phi), Err(Error::OffSphere { .. })));
    }

    #[test]
    fn residuals_vanish_on_great_circle_family() {
        let g = grid(64);
        let mut ws = SpectralWorkspace::new(&g);
        for (k, omega) in [(2i64, 4.0), (3, 1.5), (1, 0.0)] {
            let s = great_circle_wave(&g, &[k], omega, (&E1, &E2), 0.3).unwrap();
            // exact acceleration of the travelling wave is −ω² u
            let mut a = s.u.clone();
            a.scale(-omega * omega);
            let r = residual_equations(&s.u, &s.v, &a, &mut ws).unwrap();
            assert!(r.geometric_l2 < 1e-9, "{r:?}");
            assert!(r.pde_l2 < 1e-9, "{r:?}");
            assert!(r.divergence_form_l2 < 1e-9, "{r:?}");
        }
        let c = constant(&g, &E1);
        let r = residual_equations(&c.u, &c.v, &Field::zeros(g.clone(), 2), &mut ws).unwrap();
        assert_eq!((r.geometric_l2, r.pde_l2, r.divergence_form_l2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn action_density_examples() {
        let g = grid(64);
        let mut ws = SpectralWorkspace::new(&g);
        let (omega, k) = (2.5, 2.0);
        let s = great_circle_wave(&g, &[2], omega, (&E1, &E2), 0.0).unwrap();
        let (phi, psi) = action_densities(&s.u, &s.v, &mut ws).unwrap();
        let k4: f64 = k * k * k * k;
        for p in 0..g.num_points() {
            assert!((phi.values()[p] - 0.5 * (omega * omega - k4)).abs() < 1e-10);
            assert!((psi.values()[p] - 0.5 * omega * omega).abs() < 1e-10);
        }
        let c = constant(&g, &E1);
        let (phi, psi) = action_densities(&c.u, &c.v, &mut ws).unwrap();
        assert_eq!((phi.max_abs(), psi.max_abs()), (0.0, 0.0));
    }
}
