//! Periodic grids and vector-valued grid fields.

use crate::error::{Error, Result};

/// Periodic rectangular grid on the torus `∏ [0, L_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    points: Vec<usize>,
    lengths: Vec<f64>,
}

impl GridSpec {
    pub fn new(points: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension must be 1 or 2, got {}",
                points.len()
            )));
        }
        if points.len() != lengths.len() {
            return Err(Error::InvalidGrid(format!(
                "{} axis sizes but {} axis lengths",
                points.len(),
                lengths.len()
            )));
        }
        for &n in &points {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis size must be even and >= 8, got {n}"
                )));
            }
        }
        for &l in &lengths {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidGrid(format!("axis length must be positive, got {l}")));
            }
        }
        Ok(Self { points, lengths })
    }

    /// One-dimensional grid of `n` points on `[0, length)`.
    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n], vec![length])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn num_points(&self) -> usize {
        self.points.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    /// Quadrature weight of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Multi-index of a flat point index (last axis fastest).
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = k % self.points[a];
            k /= self.points[a];
        }
        idx
    }

    /// Physical coordinates of a flat point index.
    pub fn coords(&self, k: usize) -> Vec<f64> {
        self.multi_index(k)
            .iter()
            .enumerate()
            .map(|(a, &i)| i as f64 * self.spacing(a))
            .collect()
    }
}

/// A linear map acting on the ambient components of each grid point.
pub trait PointMap {
    fn apply(&self, w: &[f64], out: &mut [f64]);
}

/// Grid samples of an `ℝ^m`-valued map, point-major with components contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    components: usize,
    values: Vec<f64>,
}

/// A single-component field.
pub type ScalarField = Field;

impl Field {
    pub fn zeros(grid: GridSpec, components: usize) -> Self {
        let len = grid.num_points() * components;
        Self { grid, components, values: vec![0.0; len] }
    }

    pub fn new(grid: GridSpec, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::ShapeMismatch("field needs at least one component".into()));
        }
        let expected = grid.num_points() * components;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { grid, components, values })
    }

    /// Scalar field from per-point values. Panics on length mismatch.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.num_points());
        Self { grid, components: 1, values }
    }

    /// Samples `f(x, out)` at every grid point.
    pub fn from_fn(grid: GridSpec, components: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut field = Self::zeros(grid, components);
        for k in 0..field.num_points() {
            let x = field.grid.coords(k);
            f(&x, &mut field.values[k * components..(k + 1) * components]);
        }
        field
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn num_points(&self) -> usize {
        self.grid.num_points()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.components..(k + 1) * self.components]
    }

    pub fn point_mut(&mut self, k: usize) -> &mut [f64] {
        let c = self.components;
        &mut self.values[k * c..(k + 1) * c]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.components)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn check_same_shape(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.components != other.components {
            return Err(Error::ShapeMismatch(format!(
                "fields differ: {:?}x{} vs {:?}x{}",
                self.grid.points(),
                self.components,
                other.grid.points(),
                other.components
            )));
        }
        Ok(())
    }

    /// Pointwise `⟨a, b⟩` as a scalar field.
    pub fn pointwise_dot(&self, other: &Field) -> Result<ScalarField> {
        self.check_same_shape(other)?;
        let values = self
            .points()
            .zip(other.points())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
            .collect();
        Ok(Field::from_values(self.grid.clone(), values))
    }

    /// Pointwise `Σ_i ⟨a_i, b_i⟩` over tuples of fields.
    pub fn pointwise_dot_sum(a: &[Field], b: &[Field]) -> Result<ScalarField> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::ShapeMismatch("tuple lengths differ".into()));
        }
        let mut acc = a[0].pointwise_dot(&b[0])?;
        for (ai, bi) in a.iter().zip(b).skip(1) {
            let d = ai.pointwise_dot(bi)?;
            acc.axpy(1.0, &d)?;
        }
        Ok(acc)
    }

    /// Scalar field times vector field, pointwise.
    pub fn scaled_by(&self, s: &ScalarField) -> Result<Field> {
        if s.components != 1 || s.grid != self.grid {
            return Err(Error::ShapeMismatch("scaling field must be scalar on the same grid".into()));
        }
        let mut out = self.clone();
        let c = self.components;
        for (k, chunk) in out.values.chunks_exact_mut(c).enumerate() {
            for x in chunk {
                *x *= s.values[k];
            }
        }
        Ok(out)
    }

    /// Applies a pointwise linear map to every grid point.
    pub fn map_points(&self, m: &dyn PointMap) -> Field {
        let mut out = Field::zeros(self.grid.clone(), self.components);
        let c = self.components;
        for (src, dst) in self.values.chunks_exact(c).zip(out.values.chunks_exact_mut(c)) {
            m.apply(src, dst);
        }
        out
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Field) -> Result<()> {
        self.check_same_shape(other)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += alpha * y;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|x| *x *= alpha);
    }

    /// `alpha * self + beta * other`.
    pub fn lin_comb(&self, alpha: f64, other: &Field, beta: f64) -> Result<Field> {
        self.check_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        Ok(Field { grid: self.grid.clone(), components: self.components, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Max over points of the Euclidean distance between two fields.
    pub fn max_distance(&self, other: &Field) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .points()
            .zip(other.points())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max))
    }

    /// Rectangle-rule integral of a scalar field.
    pub fn integrate(&self) -> Result<f64> {
        if self.components != 1 {
            return Err(Error::ShapeMismatch(format!(
                "integrate expects a scalar field, got {} components",
                self.components
            )));
        }
        Ok(self.grid.cell_volume() * self.values.iter().sum::<f64>())
    }

    /// Per-component rectangle-rule integrals.
    pub fn integrate_components(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.components];
        for p in self.points() {
            for (s, x) in sums.iter_mut().zip(p) {
                *s += x;
            }
        }
        let w = self.grid.cell_volume();
        sums.into_iter().map(|s| s * w).collect()
    }

    /// Quadrature L² norm `(∫ |f|² dx)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }
}

/// Rectangle-rule integral of a scalar field.
pub fn integrate(s: &ScalarField) -> Result<f64> {
    s.integrate()
}
