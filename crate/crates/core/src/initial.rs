//! Admissible initial data: sphere-valued positions with tangent velocities.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::field::{Field, GridSpec};
use crate::sphere::{self, RETRACTION_TOL};
use crate::spectral::SpectralWorkspace;

/// Travelling great circle `u = cos(θ) p₁ + sin(θ) p₂`, `θ = k·x + phase − ωt`,
/// evaluated at `t = 0` together with its time derivative.
pub fn great_circle_wave(
    grid: &GridSpec,
    k: &[i64],
    omega: f64,
    plane: (&[f64], &[f64]),
    phase: f64,
) -> Result<State> {
    let (p1, p2) = plane;
    if k.len() != grid.dim() {
        return Err(Error::ShapeMismatch(format!(
            "wave vector has {} entries for a {}-dimensional grid",
            k.len(),
            grid.dim()
        )));
    }
    if p1.len() != p2.len() || p1.len() < 2 {
        return Err(Error::ShapeMismatch("plane vectors must share a dimension >= 2".into()));
    }
    let defect = (sphere::norm_sq(p1) - 1.0)
        .abs()
        .max((sphere::norm_sq(p2) - 1.0).abs())
        .max(sphere::dot(p1, p2).abs());
    if defect > 1e-12 {
        return Err(Error::NonOrthonormalPlane { defect });
    }
    let lengths = grid.lengths().to_vec();
    let theta = move |x: &[f64]| -> f64 {
        x.iter()
            .zip(k)
            .zip(&lengths)
            .map(|((xi, &ki), li)| 2.0 * PI * ki as f64 * xi / li)
            .sum::<f64>()
            + phase
    };
    let c = p1.len();
    let u = Field::from_fn(grid.clone(), c, |x, o| {
        let (s, co) = theta(x).sin_cos();
        for m in 0..c {
            o[m] = co * p1[m] + s * p2[m];
        }
    });
    let v = Field::from_fn(grid.clone(), c, |x, o| {
        let (s, co) = theta(x).sin_cos();
        for m in 0..c {
            o[m] = omega * (s * p1[m] - co * p2[m]);
        }
    });
    State::new(u, v, 0.0)
}

/// Integer wave vectors in a half space (one of each ±k pair), `0 < |k_i| <= max_mode`.
fn half_space_modes(dim: usize, max_mode: i64) -> Vec<[i64; 2]> {
    let mut out = Vec::new();
    match dim {
        1 => out.extend((1..=max_mode).map(|k| [k, 0])),
        _ => {
            for k0 in 0..=max_mode {
                for k1 in -max_mode..=max_mode {
                    if k0 > 0 || k1 > 0 {
                        out.push([k0, k1]);
                    }
                }
            }
        }
    }
    out
}

/// Band-limited Gaussian random field with `components` entries per point.
/// Coefficients are drawn in a grid-independent order, so the same seed gives
/// samples of the same continuous function on every grid.
fn random_band_limited(
    grid: &GridSpec,
    components: usize,
    max_mode: usize,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) -> Field {
    let modes = half_space_modes(grid.dim(), max_mode as i64);
    let norm = if modes.is_empty() { 0.0 } else { amplitude / (modes.len() as f64).sqrt() };
    let coeffs: Vec<(f64, f64)> = (0..modes.len() * components)
        .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let lengths = grid.lengths().to_vec();
    Field::from_fn(grid.clone(), components, |x, o| {
        for (mi, k) in modes.iter().enumerate() {
            let phase: f64 = x
                .iter()
                .enumerate()
                .map(|(a, xa)| 2.0 * PI * k[a] as f64 * xa / lengths[a])
                .sum();
            let (s, c) = phase.sin_cos();
            for (comp, out) in o.iter_mut().enumerate() {
                let (a, b) = coeffs[mi * components + comp];
                *out += norm * (a * c + b * s);
            }
        }
    })
}

fn check_max_mode(grid: &GridSpec, max_mode: usize) -> Result<()> {
    let min_n = grid.points().iter().copied().min().unwrap_or(0);
    if 3 * max_mode >= min_n {
        return Err(Error::Domain(format!(
            "max_mode {max_mode} must be below min N / 3 = {}",
            min_n as f64 / 3.0
        )));
    }
    Ok(())
}

/// `π(e₁ + g)` for a band-limited Gaussian field `g`; deterministic in `seed`.
pub fn random_sphere_field(
    grid: &GridSpec,
    l: usize,
    max_mode: usize,
    amplitude: f64,
    seed: u64,
) -> Result<Field> {
    check_max_mode(grid, max_mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for _ in 0..100 {
        let mut raw = random_band_limited(grid, l + 1, max_mode, amplitude, &mut rng);
        for p in 0..raw.num_points() {
            raw.point_mut(p)[0] += 1.0;
        }
        match retract_field(&raw) {
            Ok(f) => return Ok(f),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Random admissible data: a random sphere field and an independent random
/// velocity projected onto its tangent spaces.
pub fn random_tangent_data(
    grid: &GridSpec,
    l: usize,
    max_mode: usize,
    amplitude: f64,
    velocity_amplitude: f64,
    seed: u64,
) -> Result<State> {
    let u0 = random_sphere_field(grid, l, max_mode, amplitude, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let u1 = random_band_limited(grid, l + 1, max_mode, velocity_amplitude, &mut rng);
    prepare(&u0, &u1, None, None)
}

const SNAP_TOL: f64 = 4.0 * f64::EPSILON;

/// Pointwise retraction; points already within a few ulps of the sphere are
/// left untouched so the operation is a bitwise fixed point.
fn retract_field(raw: &Field) -> Result<Field> {
    let mut out = raw.clone();
    let c = out.components();
    for y in out.values_mut().chunks_exact_mut(c) {
        for _ in 0..4 {
            if (sphere::norm_sq(y) - 1.0).abs() <= SNAP_TOL {
                break;
            }
            let p = sphere::project_sphere(y, RETRACTION_TOL)?;
            y.copy_from_slice(p.coords());
        }
    }
    Ok(out)
}

fn tangent_field(u: &Field, w: &Field) -> Field {
    let mut out = w.clone();
    let c = out.components();
    for (wp, up) in out.values_mut().chunks_exact_mut(c).zip(u.points()) {
        for _ in 0..4 {
            let scale = sphere::norm_sq(wp).sqrt();
            if sphere::dot(wp, up).abs() <= SNAP_TOL * scale {
                break;
            }
            sphere::project_tangent_in_place(up, wp);
        }
    }
    out
}

/// Optional spectral truncation to `smooth_modes`, then retraction of `u0`
/// onto the sphere and projection of `u1` onto the tangent spaces of `u0`.
///
/// `ws` is required when `smooth_modes` is set.
pub fn prepare(
    u0_raw: &Field,
    u1_raw: &Field,
    smooth_modes: Option<usize>,
    ws: Option<&mut SpectralWorkspace>,
) -> Result<State> {
    u0_raw.check_same_shape(u1_raw)?;
    let (u0, u1) = match smooth_modes {
        Some(m) => {
            let ws = ws.ok_or_else(|| {
                Error::Domain("spectral smoothing requires a workspace".into())
            })?;
            (ws.low_pass(u0_raw, m)?, ws.low_pass(u1_raw, m)?)
        }
        None => (u0_raw.clone(), u1_raw.clone()),
    };
    let u = retract_field(&u0)?;
    let v = tangent_field(&u, &u1);
    State::new(u, v, 0.0)
}
