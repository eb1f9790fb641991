//! Uniform space-time mesh and the sampled containers living on it.

use crate::error::{Error, Result};
use crate::quadrature::trapezoid_weights;

/// Relative slack allowed when comparing `dt` against `da`.
const CFL_SLACK: f64 = 1e-12;

/// Uniform mesh on `[0, T] x [0, 1]`: nodes `a_i = i * da`, `t_j = j * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_space: usize,
    n_time: usize,
    horizon: f64,
}

impl Grid {
    /// Builds a grid and checks the upwind CFL condition `dt <= da`.
    pub fn new(n_space: usize, n_time: usize, horizon: f64) -> Result<Self> {
        if n_space < 2 || n_time < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs N >= 2 and M >= 2, got N = {n_space}, M = {n_time}"
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let grid = Grid {
            n_space,
            n_time,
            horizon,
        };
        if grid.dt() > grid.da() * (1.0 + CFL_SLACK) {
            return Err(Error::CflViolation {
                dt: grid.dt(),
                da: grid.da(),
            });
        }
        Ok(grid)
    }

    /// Grid with `dt == da`, i.e. `M = N * T` (rounded up so CFL holds).
    pub fn matched(n_space: usize, horizon: f64) -> Result<Self> {
        let n_time = ((n_space as f64) * horizon - 1e-9).ceil().max(2.0) as usize;
        Grid::new(n_space, n_time, horizon)
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn da(&self) -> f64 {
        1.0 / self.n_space as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_time as f64
    }

    pub fn a(&self, i: usize) -> f64 {
        i as f64 * self.da()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    /// Characteristics pass through nodes exactly when the steps coincide.
    pub fn is_lattice(&self) -> bool {
        (self.dt() - self.da()).abs() <= CFL_SLACK * self.da()
    }

    pub fn space_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_space, self.da())
    }

    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_time, self.dt())
    }

    pub fn zero_field(&self) -> Field {
        Field::filled(self, 0.0)
    }

    pub fn zero_series(&self) -> BoundarySeries {
        BoundarySeries::filled(self, 0.0)
    }
}

/// Scalar samples on the grid, stored time-major: entry `(j, i)` is the
/// value at `(t_j, a_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n_space: usize,
    n_time: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn filled(grid: &Grid, value: f64) -> Self {
        Field {
            n_space: grid.n_space,
            n_time: grid.n_time,
            values: vec![value; (grid.n_space + 1) * (grid.n_time + 1)],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity((grid.n_space + 1) * (grid.n_time + 1));
        for j in 0..=grid.n_time {
            for i in 0..=grid.n_space {
                values.push(f(grid.t(j), grid.a(i)));
            }
        }
        Field {
            n_space: grid.n_space,
            n_time: grid.n_time,
            values,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_time = rows
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::GridMismatch("field needs at least one time row".into()))?;
        let width = rows[0].len();
        if width < 2 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::GridMismatch("ragged field rows".into()));
        }
        Ok(Field {
            n_space: width - 1,
            n_time,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.n_space == grid.n_space && self.n_time == grid.n_time
    }

    pub fn ensure_on(&self, grid: &Grid, what: &str) -> Result<()> {
        if self.matches(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what} has shape ({}, {}), grid is ({}, {})",
                self.n_time + 1,
                self.n_space + 1,
                grid.n_time + 1,
                grid.n_space + 1
            )))
        }
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[j * (self.n_space + 1) + i]
    }

    #[inline]
    pub fn set(&mut self, j: usize, i: usize, v: f64) {
        self.values[j * (self.n_space + 1) + i] = v;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.n_space + 1;
        &self.values[j * w..(j + 1) * w]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let w = self.n_space + 1;
        &mut self.values[j * w..(j + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            n_space: self.n_space,
            n_time: self.n_time,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise `f(self, other)`; shapes must agree.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(
            self.values.len(),
            other.values.len(),
            "field shape mismatch"
        );
        Field {
            n_space: self.n_space,
            n_time: self.n_time,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Column `i` as a time series.
    pub fn column(&self, i: usize) -> BoundarySeries {
        BoundarySeries::new((0..=self.n_time).map(|j| self.get(j, i)).collect())
    }

    /// Trapezoid-weighted double integral over `[0, T] x [0, 1]`.
    pub fn integrate(&self, grid: &Grid) -> f64 {
        let wa = grid.space_weights();
        let wt = grid.time_weights();
        (0..=self.n_time)
            .map(|j| wt[j] * dot(self.row(j), &wa))
            .sum()
    }

    /// Bilinear interpolation at `(t, a)`; `horizon` fixes the time scale.
    pub fn interpolate(&self, horizon: f64, t: f64, a: f64) -> f64 {
        let (j, ft) = locate(t / horizon, self.n_time);
        let (i, fa) = locate(a, self.n_space);
        let v00 = self.get(j, i);
        let v01 = self.get(j, i + 1);
        let v10 = self.get(j + 1, i);
        let v11 = self.get(j + 1, i + 1);
        (1.0 - ft) * ((1.0 - fa) * v00 + fa * v01) + ft * ((1.0 - fa) * v10 + fa * v11)
    }

    /// Piecewise-bilinear transfer onto another grid with the same horizon.
    pub fn resample(&self, from: &Grid, to: &Grid) -> Field {
        Field::from_fn(to, |t, a| self.interpolate(from.horizon(), t, a))
    }
}

/// Scalar samples at the time nodes `t_0 .. t_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySeries {
    values: Vec<f64>,
}

impl BoundarySeries {
    pub fn new(values: Vec<f64>) -> Self {
        BoundarySeries { values }
    }

    pub fn filled(grid: &Grid, value: f64) -> Self {
        BoundarySeries {
            values: vec![value; grid.n_time + 1],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        BoundarySeries {
            values: (0..=grid.n_time).map(|j| f(grid.t(j))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn ensure_on(&self, grid: &Grid, what: &str) -> Result<()> {
        if self.values.len() == grid.n_time + 1 {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what} has {} samples, grid has {} time nodes",
                self.values.len(),
                grid.n_time + 1
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BoundarySeries {
        BoundarySeries::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn integrate(&self, grid: &Grid) -> f64 {
        dot(&self.values, &grid.time_weights())
    }

    pub fn interpolate(&self, horizon: f64, t: f64) -> f64 {
        let n = self.values.len() - 1;
        let (j, f) = locate(t / horizon, n);
        (1.0 - f) * self.values[j] + f * self.values[j + 1]
    }

    pub fn resample(&self, from: &Grid, to: &Grid) -> BoundarySeries {
        BoundarySeries::from_fn(to, |t| self.interpolate(from.horizon(), t))
    }
}

/// Cell index and fractional offset of `x in [0, 1]` on `n` uniform cells.
fn locate(x: f64, n: usize) -> (usize, f64) {
    let s = (x.clamp(0.0, 1.0)) * n as f64;
    let k = (s.floor() as usize).min(n - 1);
    (k, s - k as f64)
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cfl_is_enforced() {
        assert!(Grid::new(10, 10, 1.0).is_ok());
        assert!(matches!(
            Grid::new(10, 5, 1.0),
            Err(Error::CflViolation { .. })
        ));
        assert!(Grid::new(1, 10, 1.0).is_err());
    }

    #[test]
    fn matched_grid_is_lattice() {
        let g = Grid::matched(20, 2.0).unwrap();
        assert_eq!(g.n_time(), 40);
        assert!(g.is_lattice());
        assert!(Grid::matched(50, 1.0).unwrap().is_lattice());
    }

    #[test]
    fn resample_reproduces_bilinear_functions() {
        let coarse = Grid::new(10, 10, 1.0).unwrap();
        let fine = Grid::new(25, 25, 1.0).unwrap();
        let f = Field::from_fn(&coarse, |t, a| 1.0 + 2.0 * t + 3.0 * a + t * a);
        let g = f.resample(&coarse, &fine);
        for j in 0..=25 {
            for i in 0..=25 {
                let (t, a) = (fine.t(j), fine.a(i));
                assert!((g.get(j, i) - (1.0 + 2.0 * t + 3.0 * a + t * a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integrate_constant() {
        let g = Grid::new(7, 11, 1.5).unwrap();
        let f = Field::filled(&g, 2.0);
        assert!((f.integrate(&g) - 3.0).abs() < 1e-12);
    }
}
