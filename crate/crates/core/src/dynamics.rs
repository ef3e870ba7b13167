//! Time integration of the penalized system
//! `∂ₜ²u + Δ²u + (1/ε)∇F(u) = 0`.
//!
//! The default stepper is a kick–drift–kick splitting: the biharmonic part is
//! advanced by its exact per-mode flow and the penalty part by its exact flow
//! with `u` frozen. Velocity Verlet on the full force is kept as an
//! independent cross-check.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::sphere::{grad_penalty_factor, PenaltyParams};
use crate::spectral::SpectralWorkspace;

/// Grid size above which pointwise kernels run data-parallel.
const PARALLEL_POINTS: usize = 1 << 12;

/// Position, velocity and time of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl State {
    pub fn new(u: Field, v: Field, t: f64) -> Result<Self> {
        u.check_same_shape(&v)?;
        Ok(Self { u, v, t })
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    StrangSplit,
    VelocityVerlet,
}

/// Which action the dynamics derive from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Standard,
    /// Adds the force `−2 Div(|∇u|² ∇u)` of the tangential-Laplacian action.
    TangentialLaplacian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub variant: Variant,
    pub penalty: PenaltyParams,
    /// Apply the two-thirds low-pass to the variant force.
    pub dealias: bool,
}

impl IntegratorConfig {
    pub fn strang(dt: f64, penalty: PenaltyParams) -> Self {
        Self { dt, scheme: Scheme::StrangSplit, variant: Variant::Standard, penalty, dealias: false }
    }

    pub fn verlet(dt: f64, penalty: PenaltyParams) -> Self {
        Self { scheme: Scheme::VelocityVerlet, ..Self::strang(dt, penalty) }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// `0.1 √ε`, capped at `1e-3`.
    pub fn default_dt(epsilon: f64) -> f64 {
        (0.1 * epsilon.sqrt()).min(1e-3)
    }

    /// Largest stable velocity-Verlet step for this grid and penalty.
    pub fn verlet_limit(&self, ws: &SpectralWorkspace) -> f64 {
        1.9 / (ws.max_xi_fourth() + 8.0 / self.penalty.epsilon).sqrt()
    }

    /// Non-fatal advisories about the step size.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let guide = 0.25 * self.penalty.epsilon.sqrt();
        if self.scheme == Scheme::StrangSplit && self.dt > guide {
            out.push(format!(
                "dt = {} exceeds the splitting guidance 0.25*sqrt(epsilon) = {}",
                self.dt, guide
            ));
        }
        out
    }
}

/// Exact flow of `ü = −Δ²u` over `dt` (any sign), mode by mode.
pub fn linear_propagate(state: &State, dt: f64, ws: &mut SpectralWorkspace) -> Result<State> {
    state.u.check_same_shape(&state.v)?;
    let np = ws.grid().num_points();
    // (cos μdt, sin μdt / μ, μ sin μdt) with μ = |ξ|²; the zero mode drifts freely.
    let coeffs: Vec<(f64, f64, f64)> = (0..np)
        .map(|k| {
            let mu = ws.mode(k).xi_sq();
            if mu == 0.0 {
                (1.0, dt, 0.0)
            } else {
                let (s, c) = (mu * dt).sin_cos();
                (c, s / mu, mu * s)
            }
        })
        .collect();
    let mut u_hat = ws.spectra(&state.u)?;
    let mut v_hat = ws.spectra(&state.v)?;
    for (uc, vc) in u_hat.iter_mut().zip(v_hat.iter_mut()) {
        for ((u, v), &(c, s_over_mu, mu_s)) in uc.iter_mut().zip(vc.iter_mut()).zip(&coeffs) {
            let u0: Complex64 = *u;
            *u = c * u0 + s_over_mu * *v;
            *v = -mu_s * u0 + c * *v;
        }
    }
    Ok(State { u: ws.synthesize(u_hat), v: ws.synthesize(v_hat), t: state.t + dt })
}

fn kick_in_place(v: &mut Field, u: &Field, dt: f64, p: &PenaltyParams) {
    let c = u.components();
    let scale = dt / p.epsilon;
    let kernel = |(vp, up): (&mut [f64], &[f64])| {
        let g = scale * grad_penalty_factor(up, p);
        if g != 0.0 {
            for (vi, ui) in vp.iter_mut().zip(up) {
                *vi -= g * ui;
            }
        }
    };
    if u.num_points() >= PARALLEL_POINTS {
        v.values_mut()
            .par_chunks_exact_mut(c)
            .zip(u.values().par_chunks_exact(c))
            .for_each(kernel);
    } else {
        v.values_mut().chunks_exact_mut(c).zip(u.values().chunks_exact(c)).for_each(kernel);
    }
}

/// Exact flow of `u̇ = 0, v̇ = −(1/ε)∇F(u)` over `dt`.
pub fn penalty_kick(state: &State, dt: f64, p: &PenaltyParams) -> State {
    let mut out = state.clone();
    kick_in_place(&mut out.v, &state.u, dt, p);
    out
}

/// `Div(|∇u|² ∇u) = Σ_i ∂_i(|∇u|² ∂_i u)`.
pub fn variant_force(u: &Field, ws: &mut SpectralWorkspace) -> Result<Field> {
    let grad = ws.gradient(u)?;
    let grad_sq = Field::pointwise_dot_sum(&grad, &grad)?;
    let fluxes = grad.iter().map(|g| g.scaled_by(&grad_sq)).collect::<Result<Vec<_>>>()?;
    ws.divergence(&fluxes)
}

fn variant_force_for(cfg: &IntegratorConfig, u: &Field, ws: &mut SpectralWorkspace) -> Result<Field> {
    let f = variant_force(u, ws)?;
    if cfg.dealias {
        ws.dealias(&f)
    } else {
        Ok(f)
    }
}

/// Full acceleration `−Δ²u − (1/ε)∇F(u)` (and `−2 Div(|∇u|²∇u)` for the variant).
pub fn acceleration(u: &Field, cfg: &IntegratorConfig, ws: &mut SpectralWorkspace) -> Result<Field> {
    let mut a = ws.bilaplacian(u)?;
    a.scale(-1.0);
    kick_in_place(&mut a, u, 1.0, &cfg.penalty);
    if cfg.variant == Variant::TangentialLaplacian {
        let f = variant_force_for(cfg, u, ws)?;
        a.axpy(-2.0, &f)?;
    }
    Ok(a)
}

/// Velocity impulse of every force except the biharmonic one; exact since `u` is frozen.
fn full_kick(state: &mut State, dt: f64, cfg: &IntegratorConfig, ws: &mut SpectralWorkspace) -> Result<()> {
    kick_in_place(&mut state.v, &state.u, dt, &cfg.penalty);
    if cfg.variant == Variant::TangentialLaplacian {
        let f = variant_force_for(cfg, &state.u, ws)?;
        state.v.axpy(-2.0 * dt, &f)?;
    }
    Ok(())
}

fn finite_or_fail(state: State) -> Result<State> {
    if state.is_finite() {
        Ok(state)
    } else {
        Err(Error::NonFinite { t: state.t })
    }
}

/// Kick–drift–kick step with a signed step size.
pub fn strang_step_by(
    state: &State,
    dt: f64,
    cfg: &IntegratorConfig,
    ws: &mut SpectralWorkspace,
) -> Result<State> {
    let mut s = state.clone();
    full_kick(&mut s, 0.5 * dt, cfg, ws)?;
    let mut s = linear_propagate(&s, dt, ws)?;
    full_kick(&mut s, 0.5 * dt, cfg, ws)?;
    finite_or_fail(s)
}

pub fn step_strang(state: &State, cfg: &IntegratorConfig, ws: &mut SpectralWorkspace) -> Result<State> {
    if cfg.scheme != Scheme::StrangSplit {
        return Err(Error::Domain("step_strang called with a non-splitting config".into()));
    }
    strang_step_by(state, cfg.dt, cfg, ws)
}

/// Velocity Verlet with a signed step size; checks the stability budget on `|dt|`.
pub fn verlet_step_by(
    state: &State,
    dt: f64,
    cfg: &IntegratorConfig,
    ws: &mut SpectralWorkspace,
) -> Result<State> {
    let limit = cfg.verlet_limit(ws);
    if dt.abs() > limit {
        return Err(Error::StabilityViolation { dt: dt.abs(), limit });
    }
    let a0 = acceleration(&state.u, cfg, ws)?;
    let mut v_half = state.v.clone();
    v_half.axpy(0.5 * dt, &a0)?;
    let mut u = state.u.clone();
    u.axpy(dt, &v_half)?;
    let a1 = acceleration(&u, cfg, ws)?;
    v_half.axpy(0.5 * dt, &a1)?;
    finite_or_fail(State { u, v: v_half, t: state.t + dt })
}

pub fn step_verlet(state: &State, cfg: &IntegratorConfig, ws: &mut SpectralWorkspace) -> Result<State> {
    if cfg.scheme != Scheme::VelocityVerlet {
        return Err(Error::Domain("step_verlet called with a non-verlet config".into()));
    }
    verlet_step_by(state, cfg.dt, cfg, ws)
}

/// One step of the configured scheme with a signed step size.
pub fn step_by(state: &State, dt: f64, cfg: &IntegratorConfig, ws: &mut SpectralWorkspace) -> Result<State> {
    match cfg.scheme {
        Scheme::StrangSplit => strang_step_by(state, dt, cfg, ws),
        Scheme::VelocityVerlet => verlet_step_by(state, dt, cfg, ws),
    }
}

pub fn step(state: &State, cfg: &IntegratorConfig, ws: &mut SpectralWorkspace) -> Result<State> {
    step_by(state, cfg.dt, cfg, ws)
}

/// Number of steps needed to reach `t_final`, tolerant to rounding in `t_final / dt`.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    let ratio = t_final / dt;
    ((ratio - 1e-9 * ratio.max(1.0)).ceil() as usize).max(1)
}

/// Acceleration estimate from centred differences of the discrete flow
/// around `state`: `(v(t+dt) − v(t−dt)) / 2dt`.
pub fn centred_acceleration(
    state: &State,
    cfg: &IntegratorConfig,
    ws: &mut SpectralWorkspace,
) -> Result<Field> {
    let ahead = step_by(state, cfg.dt, cfg, ws)?;
    let behind = step_by(state, -cfg.dt, cfg, ws)?;
    ahead.v.lin_comb(0.5 / cfg.dt, &behind.v, -0.5 / cfg.dt)
}

/// Sampled states and their diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub records: Vec<DiagnosticsRecord>,
}

/// A run that stopped before reaching its final time.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    /// Time at which the failure was detected.
    pub t: f64,
    pub last_good: State,
    pub partial: Trajectory,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run failed at t = {}: {}", self.t, self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn sample(
    traj: &mut Trajectory,
    state: &State,
    cfg: &IntegratorConfig,
    ws: &mut SpectralWorkspace,
) -> Result<()> {
    let a = centred_acceleration(state, cfg, ws)?;
    let record = diagnostics::record(state, &a, &cfg.penalty, ws)?;
    traj.records.push(record);
    traj.snapshots.push(state.clone());
    Ok(())
}

/// Advances `initial` for `⌈T/dt⌉` steps, sampling diagnostics at step 0,
/// every `sample_every` steps, and at the final step.
pub fn run(
    initial: &State,
    cfg: &IntegratorConfig,
    t_final: f64,
    sample_every: usize,
    ws: &mut SpectralWorkspace,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    let fail = |error: Error, t: f64, last_good: &State, partial: Trajectory| {
        Box::new(RunFailure { error, t, last_good: last_good.clone(), partial })
    };
    if !(t_final > 0.0) || !(cfg.dt > 0.0) || sample_every == 0 {
        let e = Error::Domain(format!(
            "run needs T > 0, dt > 0 and sample_every > 0 (T = {t_final}, dt = {}, sample_every = {sample_every})",
            cfg.dt
        ));
        return Err(fail(e, initial.t, initial, Trajectory::default()));
    }
    let steps = step_count(t_final, cfg.dt);
    let mut traj = Trajectory::default();
    let mut state = initial.clone();
    if let Err(e) = sample(&mut traj, &state, cfg, ws) {
        let t = state.t;
        return Err(fail(e, t, &state, traj));
    }
    for n in 1..=steps {
        match step(&state, cfg, ws) {
            Ok(next) => state = next,
            Err(e) => {
                let t = match e {
                    Error::NonFinite { t } => t,
                    _ => state.t,
                };
                return Err(fail(e, t, &state, traj));
            }
        }
        if n % sample_every == 0 || n == steps {
            if let Err(e) = sample(&mut traj, &state, cfg, ws) {
                let t = match e {
                    Error::NonFinite { t } => t,
                    _ => state.t,
                };
                return Err(fail(e, t, &state, traj));
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::initial::great_circle_wave;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::line(n, 2.0 * PI).unwrap()
    }

    fn constant_state(g: &GridSpec) -> State {
        let u = Field::from_fn(g.clone(), 3, |_, o| o.copy_from_slice(&[0.0, 1.0, 0.0]));
        State::new(u, Field::zeros(g.clone(), 3), 0.0).unwrap()
    }

    #[test]
    fn constant_map_is_a_fixed_point() {
        let g = grid(16);
        let mut ws = SpectralWorkspace::new(&g);
        let s0 = constant_state(&g);
        let p = PenaltyParams::new(0.01).unwrap();
        let lin = linear_propagate(&s0, 0.37, &mut ws).unwrap();
        assert_eq!(lin.u.max_distance(&s0.u).unwrap(), 0.0);
        assert!((lin.t - 0.37).abs() < 1e-15);
        for dt in [1e-3, 0.1, 1.0] {
            let s = step_strang(&s0, &IntegratorConfig::strang(dt, p), &mut ws).unwrap();
            assert!(s.u.max_distance(&s0.u).unwrap() < 1e-15);
            assert!(s.v.max_abs() < 1e-15);
        }
        let s = step_verlet(&s0, &IntegratorConfig::verlet(1e-4, p), &mut ws).unwrap();
        assert!(s.u.max_distance(&s0.u).unwrap() < 1e-15);
    }

    #[test]
    fn single_mode_returns_after_one_period() {
        let g = grid(32);
        let k = 3.0;
        let u = Field::from_fn(g.clone(), 2, |x, o| o[0] = (k * x[0]).cos());
        let s0 = State::new(u, Field::zeros(g.clone(), 2), 0.0).unwrap();
        let mut ws = SpectralWorkspace::new(&g);
        let s1 = linear_propagate(&s0, 2.0 * PI / (k * k), &mut ws).unwrap();
        assert!(s1.u.max_distance(&s0.u).unwrap() < 1e-12);
        assert!(s1.v.max_abs() < 1e-12);
    }

    #[test]
    fn linear_flow_is_a_group() {
        let g = grid(32);
        let u = Field::from_fn(g.clone(), 2, |x, o| {
            o[0] = x[0].sin() + 0.3 * (4.0 * x[0]).cos();
            o[1] = 0.2 + (2.0 * x[0]).sin();
        });
        let v = Field::from_fn(g.clone(), 2, |x, o| {
            o[0] = 0.1 * (3.0 * x[0]).cos();
            o[1] = 0.5;
        });
        let s0 = State::new(u, v, 0.0).unwrap();
        let mut ws = SpectralWorkspace::new(&g);
        let dt = 0.0123;
        let twice = linear_propagate(&linear_propagate(&s0, dt, &mut ws).unwrap(), dt, &mut ws).unwrap();
        let once = linear_propagate(&s0, 2.0 * dt, &mut ws).unwrap();
        assert!(twice.u.max_distance(&once.u).unwrap() < 1e-12);
        assert!(twice.v.max_distance(&once.v).unwrap() < 1e-12);
    }

    #[test]
    fn kick_examples() {
        let g = grid(8);
        let p = PenaltyParams::new(0.01).unwrap();
        let mut u = Field::from_fn(g.clone(), 2, |_, o| o[1] = 1.0);
        u.point_mut(3).copy_from_slice(&[1.1, 0.0]);
        let s0 = State::new(u, Field::zeros(g.clone(), 2), 0.0).unwrap();
        let s1 = penalty_kick(&s0, 1e-3, &p);
        for k in 0..8 {
            if k == 3 {
                assert!((s1.v.point(k)[0] + 0.0924).abs() < 1e-14);
                assert_eq!(s1.v.point(k)[1], 0.0);
            } else {
                assert_eq!(s1.v.point(k), &[0.0, 0.0]);
            }
        }
        assert_eq!(s1.u, s0.u);
    }

    #[test]
    fn variant_force_on_great_circle() {
        let g = grid(64);
        let k = 3;
        let s = great_circle_wave(&g, &[k], 0.0, (&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]), 0.3).unwrap();
        let mut ws = SpectralWorkspace::new(&g);
        let f = variant_force(&s.u, &mut ws).unwrap();
        let k4 = (k * k * k * k) as f64;
        for p in 0..g.num_points() {
            for c in 0..3 {
                assert!((f.point(p)[c] + k4 * s.u.point(p)[c]).abs() < 1e-9);
            }
        }
        let zero = variant_force(&constant_state(&g).u, &mut ws).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn variant_force_is_cubic() {
        let g = grid(64);
        let u = Field::from_fn(g.clone(), 2, |x, o| {
            o[0] = x[0].cos() + 0.2 * (2.0 * x[0]).sin();
            o[1] = 0.4 * x[0].sin();
        });
        let mut ws = SpectralWorkspace::new(&g);
        let f1 = variant_force(&u, &mut ws).unwrap();
        let mut u2 = u.clone();
        u2.scale(2.0);
        let f2 = variant_force(&u2, &mut ws).unwrap();
        let mut f1x8 = f1.clone();
        f1x8.scale(8.0);
        assert!(f2.max_distance(&f1x8).unwrap() <= 1e-10 * f2.max_abs());
    }

    #[test]
    fn step_count_counts() {
        assert_eq!(step_count(10.0 * 0.001, 0.001), 10);
        assert_eq!(step_count(1.0, 5e-4), 2000);
        assert_eq!(step_count(0.5, 0.3), 2);
    }

    #[test]
    fn run_samples_expected_records() {
        let g = grid(16);
        let p = PenaltyParams::new(0.01).unwrap();
        let cfg = IntegratorConfig::strang(1e-3, p);
        let mut ws = SpectralWorkspace::new(&g);
        let traj = run(&constant_state(&g), &cfg, 10.0 * cfg.dt, 1, &mut ws).unwrap();
        assert_eq!(traj.records.len(), 11);
        assert_eq!(traj.snapshots.len(), 11);
        assert_eq!(traj.records[0].t, 0.0);
        let traj = run(&constant_state(&g), &cfg, 10.0 * cfg.dt, 4, &mut ws).unwrap();
        assert_eq!(traj.records.len(), 4);
    }

    #[test]
    fn verlet_rejects_unstable_steps() {
        let g = grid(64);
        let p = PenaltyParams::new(0.01).unwrap();
        let cfg = IntegratorConfig::verlet(1e-2, p);
        let mut ws = SpectralWorkspace::new(&g);
        assert!(matches!(
            step_verlet(&constant_state(&g), &cfg, &mut ws),
            Err(Error::StabilityViolation { .. })
        ));
        assert!(step_strang(&constant_state(&g), &cfg, &mut ws).is_err());
    }

    #[test]
    fn blow_up_is_reported_with_time() {
        let g = grid(16);
        let p = PenaltyParams::new(0.01).unwrap();
        let cfg = IntegratorConfig::strang(1e-3, p);
        let mut s = constant_state(&g);
        s.v.values_mut()[0] = f64::NAN;
        s.t = 0.25;
        let mut ws = SpectralWorkspace::new(&g);
        match step_strang(&s, &cfg, &mut ws) {
            Err(Error::NonFinite { t }) => assert!((t - 0.251).abs() < 1e-12),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }
}
