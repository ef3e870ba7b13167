//! Fourier-multiplier differential operators on the periodic grid.
//!
//! Every operator transforms each ambient component with a complex FFT,
//! multiplies by a symbol and transforms back. The Nyquist mode of an axis
//! is dropped for odd-order derivatives along that axis so real inputs stay
//! real; even-order symbols keep it.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{Field, GridSpec, PointMap, ScalarField};

/// Per-mode data handed to symbol closures.
#[derive(Debug, Clone, Copy)]
pub struct Mode {
    /// Wavenumber `2π k / L` per axis (zero-padded to two axes).
    pub xi: [f64; 2],
    /// Integer wavenumber per axis.
    pub k: [i64; 2],
    pub nyquist: [bool; 2],
}

impl Mode {
    /// `|ξ|²`.
    pub fn xi_sq(&self) -> f64 {
        self.xi[0] * self.xi[0] + self.xi[1] * self.xi[1]
    }
}

/// FFT plans, wavenumber tables and scratch buffers for one grid.
///
/// Not shareable across threads while in use: every operator borrows the
/// workspace mutably.
pub struct SpectralWorkspace {
    grid: GridSpec,
    wavenumbers: Vec<Vec<f64>>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for SpectralWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralWorkspace").field("grid", &self.grid).finish()
    }
}

/// Signed integer frequency of FFT bin `m` on an axis of `n` points.
/// The Nyquist bin maps to `n/2`.
fn signed_frequency(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

impl SpectralWorkspace {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        let mut wavenumbers = Vec::new();
        let mut scratch_len = 0;
        for a in 0..grid.dim() {
            let n = grid.points()[a];
            let f = planner.plan_fft_forward(n);
            let i = planner.plan_fft_inverse(n);
            scratch_len = scratch_len
                .max(f.get_inplace_scratch_len())
                .max(i.get_inplace_scratch_len());
            forward.push(f);
            inverse.push(i);
            let l = grid.lengths()[a];
            wavenumbers.push(
                (0..n).map(|m| 2.0 * PI * signed_frequency(m, n) as f64 / l).collect(),
            );
        }
        let max_n = grid.points().iter().copied().max().unwrap_or(0);
        Self {
            grid: grid.clone(),
            wavenumbers,
            forward,
            inverse,
            line: vec![Complex64::new(0.0, 0.0); max_n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Wavenumbers `ξ_i = 2π k / L_i` of one axis in FFT bin order.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Largest `|ξ|⁴` resolved on the grid.
    pub fn max_xi_fourth(&self) -> f64 {
        let xi_sq: f64 = self
            .wavenumbers
            .iter()
            .map(|w| w.iter().fold(0.0f64, |m, x| m.max(x * x)))
            .sum();
        xi_sq * xi_sq
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::ShapeMismatch(format!(
                "field grid {:?} does not match workspace grid {:?}",
                f.grid().points(),
                self.grid.points()
            )));
        }
        Ok(())
    }

    /// Mode descriptor of flat spectral index `k` (same layout as grid points).
    pub fn mode(&self, flat: usize) -> Mode {
        let pts = self.grid.points();
        let mut mode = Mode { xi: [0.0; 2], k: [0; 2], nyquist: [false; 2] };
        let mut rem = flat;
        for a in (0..pts.len()).rev() {
            let m = rem % pts[a];
            rem /= pts[a];
            mode.xi[a] = self.wavenumbers[a][m];
            mode.k[a] = signed_frequency(m, pts[a]);
            mode.nyquist[a] = 2 * m == pts[a];
        }
        mode
    }

    fn transform(&mut self, data: &mut [Complex64], inverse: bool) {
        let pts = self.grid.points().to_vec();
        let plans = if inverse { &self.inverse } else { &self.forward };
        match pts.len() {
            1 => plans[0].process_with_scratch(data, &mut self.scratch),
            _ => {
                let (n0, n1) = (pts[0], pts[1]);
                // rows are contiguous along the last axis
                plans[1].process_with_scratch(data, &mut self.scratch);
                let line = &mut self.line[..n0];
                for j in 0..n1 {
                    for i in 0..n0 {
                        line[i] = data[i * n1 + j];
                    }
                    plans[0].process_with_scratch(line, &mut self.scratch);
                    for i in 0..n0 {
                        data[i * n1 + j] = line[i];
                    }
                }
            }
        }
        if inverse {
            let scale = 1.0 / data.len() as f64;
            data.iter_mut().for_each(|z| *z *= scale);
        }
    }

    /// Forward transform of one component.
    pub fn forward_component(&mut self, f: &Field, component: usize) -> Result<Vec<Complex64>> {
        self.check_grid(f)?;
        let mut data: Vec<Complex64> =
            f.points().map(|p| Complex64::new(p[component], 0.0)).collect();
        self.transform(&mut data, false);
        Ok(data)
    }

    /// Forward transforms of all components.
    pub fn spectra(&mut self, f: &Field) -> Result<Vec<Vec<Complex64>>> {
        (0..f.components()).map(|c| self.forward_component(f, c)).collect()
    }

    /// Inverse transforms of per-component spectra into a real field.
    pub fn synthesize(&mut self, spectra: Vec<Vec<Complex64>>) -> Field {
        let c = spectra.len();
        let mut out = Field::zeros(self.grid.clone(), c);
        for (comp, mut data) in spectra.into_iter().enumerate() {
            self.transform(&mut data, true);
            for (k, z) in data.iter().enumerate() {
                out.values_mut()[k * c + comp] = z.re;
            }
        }
        out
    }

    /// Applies the Fourier symbol `symbol(mode)` to every component of `f`.
    pub fn apply_symbol(&mut self, f: &Field, symbol: impl Fn(&Mode) -> Complex64) -> Result<Field> {
        self.check_grid(f)?;
        let multipliers: Vec<Complex64> =
            (0..self.grid.num_points()).map(|k| symbol(&self.mode(k))).collect();
        let mut spectra = self.spectra(f)?;
        for s in &mut spectra {
            for (z, m) in s.iter_mut().zip(&multipliers) {
                *z *= m;
            }
        }
        Ok(self.synthesize(spectra))
    }

    fn partial_symbol(axis: usize) -> impl Fn(&Mode) -> Complex64 {
        move |m: &Mode| {
            if m.nyquist[axis] {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, m.xi[axis])
            }
        }
    }

    /// `∂_axis f`.
    pub fn partial(&mut self, f: &Field, axis: usize) -> Result<Field> {
        if axis >= self.grid.dim() {
            return Err(Error::ShapeMismatch(format!("axis {axis} out of range")));
        }
        self.apply_symbol(f, Self::partial_symbol(axis))
    }

    /// `(∂_1 f, …, ∂_n f)` from one forward transform per component.
    pub fn gradient(&mut self, f: &Field) -> Result<Vec<Field>> {
        self.check_grid(f)?;
        let spectra = self.spectra(f)?;
        let n = self.grid.dim();
        let mut out = Vec::with_capacity(n);
        for axis in 0..n {
            let symbol = Self::partial_symbol(axis);
            let mult: Vec<Complex64> =
                (0..self.grid.num_points()).map(|k| symbol(&self.mode(k))).collect();
            let derived: Vec<Vec<Complex64>> = spectra
                .iter()
                .map(|s| s.iter().zip(&mult).map(|(z, m)| z * m).collect())
                .collect();
            out.push(self.synthesize(derived));
        }
        Ok(out)
    }

    /// `Δf`, symbol `−|ξ|²`.
    pub fn laplacian(&mut self, f: &Field) -> Result<Field> {
        self.apply_symbol(f, |m| Complex64::new(-m.xi_sq(), 0.0))
    }

    /// `Δ²f`, symbol `|ξ|⁴`, in a single transform pass.
    pub fn bilaplacian(&mut self, f: &Field) -> Result<Field> {
        self.apply_symbol(f, |m| {
            let s = m.xi_sq();
            Complex64::new(s * s, 0.0)
        })
    }

    /// `Σ_i ∂_i b_i`.
    pub fn divergence(&mut self, b: &[Field]) -> Result<Field> {
        if b.len() != self.grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "divergence needs {} fields, got {}",
                self.grid.dim(),
                b.len()
            )));
        }
        let mut acc = self.partial(&b[0], 0)?;
        for (axis, bi) in b.iter().enumerate().skip(1) {
            let d = self.partial(bi, axis)?;
            acc.axpy(1.0, &d)?;
        }
        Ok(acc)
    }

    /// `Σ_i ∂_i ⟨a, W b_i⟩`, contracting components pointwise before
    /// differentiating. `weight` defaults to the identity.
    pub fn div_contraction(
        &mut self,
        a: &Field,
        b: &[Field],
        weight: Option<&dyn PointMap>,
    ) -> Result<ScalarField> {
        let fluxes = b
            .iter()
            .map(|bi| match weight {
                Some(w) => a.pointwise_dot(&bi.map_points(w)),
                None => a.pointwise_dot(bi),
            })
            .collect::<Result<Vec<_>>>()?;
        self.divergence(&fluxes)
    }

    /// Sharp spectral truncation keeping `|k_i| <= max_mode` on every axis.
    /// Nyquist modes are always removed.
    pub fn low_pass(&mut self, f: &Field, max_mode: usize) -> Result<Field> {
        let max_mode = max_mode as i64;
        self.apply_symbol(f, move |m| {
            let keep = (0..2).all(|a| !m.nyquist[a] && m.k[a].abs() <= max_mode);
            Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// Two-thirds rule: removes modes with `|k_i| > N_i / 3`.
    pub fn dealias(&mut self, f: &Field) -> Result<Field> {
        let limits: Vec<i64> = self.grid.points().iter().map(|&n| (n / 3) as i64).collect();
        self.apply_symbol(f, move |m| {
            let keep = (0..limits.len()).all(|a| m.k[a].abs() <= limits[a]);
            Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> GridSpec {
        GridSpec::line(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn derivatives_of_a_fourier_mode() {
        let g = GridSpec::line(32, 3.0).unwrap();
        let k = 2.0 * PI * 3.0 / 3.0;
        let f = Field::from_fn(g.clone(), 2, |x, o| {
            o[0] = (k * x[0]).sin();
            o[1] = 1.5;
        });
        let mut ws = SpectralWorkspace::new(&g);
        let grad = ws.gradient(&f).unwrap();
        let lap = ws.laplacian(&f).unwrap();
        let bil = ws.bilaplacian(&f).unwrap();
        for p in 0..g.num_points() {
            let x = g.coords(p)[0];
            assert!((grad[0].point(p)[0] - k * (k * x).cos()).abs() < 1e-12);
            assert!(grad[0].point(p)[1].abs() < 1e-12);
            assert!((lap.point(p)[0] + k * k * (k * x).sin()).abs() < 1e-12);
            assert!(lap.point(p)[1].abs() < 1e-12);
            assert!((bil.point(p)[0] - k.powi(4) * (k * x).sin()).abs() < 1e-12 * k.powi(4));
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut ws = SpectralWorkspace::new(&line(16));
        let f = Field::zeros(line(32), 1);
        assert!(matches!(ws.laplacian(&f), Err(Error::ShapeMismatch(_))));
        assert!(ws.divergence(&[]).is_err());
    }

    #[test]
    fn two_dimensional_mixed_mode() {
        let g = GridSpec::new(vec![16, 32], vec![2.0 * PI, 4.0 * PI]).unwrap();
        let f = Field::from_fn(g.clone(), 1, |x, o| o[0] = (2.0 * x[0]).cos() * (1.5 * x[1]).sin());
        let mut ws = SpectralWorkspace::new(&g);
        let grad = ws.gradient(&f).unwrap();
        let lap = ws.laplacian(&f).unwrap();
        for p in 0..g.num_points() {
            let x = g.coords(p);
            let dx = -2.0 * (2.0 * x[0]).sin() * (1.5 * x[1]).sin();
            let dy = 1.5 * (2.0 * x[0]).cos() * (1.5 * x[1]).cos();
            assert!((grad[0].values()[p] - dx).abs() < 1e-12);
            assert!((grad[1].values()[p] - dy).abs() < 1e-12);
            assert!((lap.values()[p] + 6.25 * f.values()[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn low_pass_and_dealias_remove_high_modes() {
        let g = line(32);
        let f = Field::from_fn(g.clone(), 1, |x, o| o[0] = x[0].cos() + (12.0 * x[0]).sin());
        let mut ws = SpectralWorkspace::new(&g);
        let lp = ws.low_pass(&f, 4).unwrap();
        let da = ws.dealias(&f).unwrap();
        for p in 0..32 {
            let x = g.coords(p)[0];
            assert!((lp.values()[p] - x.cos()).abs() < 1e-14);
            assert!((da.values()[p] - x.cos()).abs() < 1e-14);
        }
    }
}
