//! Uniform time grids and the sampled fields that live on them.
//!
//! Everything in this crate is discretized on a uniform partition of
//! `[0, T]`. Node-based quantities (states, controls, costates) are stored as
//! a [`Trajectory`] with `N + 1` samples; quantities that are constant on
//! each step (rates, multipliers) are stored as an [`IntervalField`] with `N`
//! samples. Both are dense, node-major `Vec<f64>` buffers.

use crate::error::{Error, Result};

/// Uniform partition of `[0, t_final]` into `intervals` equal steps.
///
/// Nodes are `t_k = t_final * k / intervals` for `k = 0..=intervals`; the
/// last node is exactly `t_final`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    intervals: usize,
}

impl TimeGrid {
    /// A grid needs a positive, finite final time and at least two intervals.
    pub fn new(t_final: f64, intervals: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() || intervals < 2 {
            return Err(Error::InvalidGrid { t_final, intervals });
        }
        Ok(Self { t_final, intervals })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// Number of steps `N`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes `N + 1`.
    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    /// Step size `T / N`.
    pub fn dt(&self) -> f64 {
        self.t_final / self.intervals as f64
    }

    /// The k-th node, `t_final * k / N`.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.intervals);
        self.t_final * (k as f64 / self.intervals as f64)
    }
}

/// A sampled field `[0, T] -> R^n`: one `dim`-vector per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    dim: usize,
    /// Node-major storage: `values[k * dim + i]`.
    values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: vec![0.0; grid.nodes() * dim],
        }
    }

    /// Constant-in-time field with the given node value.
    pub fn constant(grid: TimeGrid, value: &[f64]) -> Self {
        let mut out = Self::zeros(grid, value.len());
        for k in 0..grid.nodes() {
            out.node_mut(k).copy_from_slice(value);
        }
        out
    }

    /// Sample a vector-valued function of time at the nodes.
    pub fn from_fn(grid: TimeGrid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut out = Self::zeros(grid, dim);
        for k in 0..grid.nodes() {
            let t = grid.node(k);
            f(t, out.node_mut(k));
        }
        out
    }

    /// Sample a scalar function of time at the nodes (`dim == 1`).
    pub fn scalar_from_fn(grid: TimeGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_fn(grid, 1, |t, out| out[0] = f(t))
    }

    /// Wrap raw node-major values; length must be `nodes * dim`.
    pub fn from_values(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes() * dim {
            return Err(Error::DimensionMismatch {
                expected: grid.nodes() * dim,
                got: values.len(),
            });
        }
        Ok(Self { grid, dim, values })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.dim + i]
    }

    pub fn set(&mut self, k: usize, i: usize, value: f64) {
        self.values[k * self.dim + i] = value;
    }

    /// Value at the last node.
    pub fn terminal(&self) -> &[f64] {
        self.node(self.grid.intervals())
    }

    /// True when the first node is exactly zero in every component.
    pub fn is_zero_initial(&self) -> bool {
        self.node(0).iter().all(|&v| v == 0.0)
    }

    /// True when every sample is finite.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += a * other`; fails on grid or dimension mismatch.
    pub fn add_scaled(&mut self, a: f64, other: &Trajectory) -> Result<()> {
        compatible(self, other)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.values {
            *x *= a;
        }
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        compatible(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Trajectory {
            grid: self.grid,
            dim: self.dim,
            values,
        })
    }

    /// Forward-difference rates `(u_{k+1} - u_k) / dt`, one per interval.
    pub fn rate(&self) -> IntervalField {
        let dt = self.grid.dt();
        let mut out = IntervalField::zeros(self.grid, self.dim);
        for k in 0..self.grid.intervals() {
            for i in 0..self.dim {
                out.set(k, i, (self.at(k + 1, i) - self.at(k, i)) / dt);
            }
        }
        out
    }
}

/// A piecewise-constant field: one `dim`-vector per grid interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalField {
    grid: TimeGrid,
    dim: usize,
    /// Interval-major storage: `values[k * dim + i]` for `k < intervals`.
    values: Vec<f64>,
}

impl IntervalField {
    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: vec![0.0; grid.intervals() * dim],
        }
    }

    pub fn from_values(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.intervals() * dim {
            return Err(Error::DimensionMismatch {
                expected: grid.intervals() * dim,
                got: values.len(),
            });
        }
        Ok(Self { grid, dim, values })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interval(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.dim + i]
    }

    pub fn set(&mut self, k: usize, i: usize, value: f64) {
        self.values[k * self.dim + i] = value;
    }
}

/// Both fields must share grid and dimension.
pub(crate) fn compatible(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    Ok(())
}
