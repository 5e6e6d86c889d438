//! Realization of the discrete `H1` metric on zero-initial fields.
//!
//! The inner product of [`crate::model::norms::h1_inner`] is `u' (M + K) v`
//! with a trapezoid mass matrix `M` and the standard forward-difference
//! stiffness `K`; both are tridiagonal and act componentwise. This module
//! assembles loads (one number per node and component, the coefficients of a
//! functional on the nodal hat basis) and solves `(M + K) g = load` with the
//! first node pinned to zero, which is the Riesz map of the control space.
//!
//! These helpers define the metric and the duality pairings; solvers and the
//! independent stationarity checker both use them, while everything specific
//! to an optimality system stays local to its module.

use crate::error::{Error, Result};
use crate::model::{IntervalField, TimeGrid, Trajectory};

/// Solve a tridiagonal system in place via the Thomas algorithm.
///
/// `diag`, `lower`, `upper` describe the matrix rows; `lower[j]` multiplies
/// the unknown `j - 1` in row `j` (entry 0 unused) and `upper[j]` the
/// unknown `j + 1` (last entry unused). Fails when elimination hits a zero
/// pivot; the `H1` operator assembled here is strictly diagonally dominant,
/// so that only signals a caller bug.
pub fn solve_tridiagonal(
    diag: &[f64],
    lower: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut scratch_diag = diag.to_vec();
    for j in 1..n {
        let pivot = scratch_diag[j - 1];
        if pivot == 0.0 {
            return Err(Error::InvalidParameter(
                "tridiagonal elimination hit a zero pivot".into(),
            ));
        }
        let m = lower[j] / pivot;
        scratch_diag[j] -= m * upper[j - 1];
        rhs[j] -= m * rhs[j - 1];
    }
    let last = scratch_diag[n - 1];
    if last == 0.0 {
        return Err(Error::InvalidParameter(
            "tridiagonal elimination hit a zero pivot".into(),
        ));
    }
    rhs[n - 1] /= last;
    for j in (0..n - 1).rev() {
        rhs[j] = (rhs[j] - upper[j] * rhs[j + 1]) / scratch_diag[j];
    }
    Ok(())
}

/// Nodal load of the functional `v -> h1_inner(u, v)`: the matrix-vector
/// product `(M + K) u`, componentwise.
pub fn h1_apply(u: &Trajectory) -> Vec<f64> {
    let grid = u.grid();
    let n = grid.intervals();
    let dt = grid.dt();
    let dim = u.dim();
    let mut out = vec![0.0; grid.nodes() * dim];
    for i in 0..dim {
        for k in 0..grid.nodes() {
            let mass_w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let mut v = mass_w * dt * u.at(k, i);
            if k > 0 {
                v += (u.at(k, i) - u.at(k - 1, i)) / dt;
            }
            if k < n {
                v += (u.at(k, i) - u.at(k + 1, i)) / dt;
            }
            out[k * dim + i] = v;
        }
    }
    out
}

/// Nodal load of the pairing `v -> integral of <field, v>` for a
/// piecewise-constant field against piecewise-linear test functions; the
/// per-interval integration is exact.
pub fn hat_load(field: &IntervalField) -> Vec<f64> {
    let grid = field.grid();
    let n = grid.intervals();
    let dt = grid.dt();
    let dim = field.dim();
    let mut out = vec![0.0; grid.nodes() * dim];
    for i in 0..dim {
        for k in 0..n {
            let half = 0.5 * dt * field.at(k, i);
            out[k * dim + i] += half;
            out[(k + 1) * dim + i] += half;
        }
    }
    out
}

/// Riesz map of the zero-initial `H1` space: solve `(M + K) g = load` with
/// the first node constrained to zero, one tridiagonal solve per component.
pub fn h1_riesz(grid: TimeGrid, dim: usize, load: &[f64]) -> Result<Trajectory> {
    if load.len() != grid.nodes() * dim {
        return Err(Error::DimensionMismatch {
            expected: grid.nodes() * dim,
            got: load.len(),
        });
    }
    let n = grid.intervals();
    let dt = grid.dt();
    let nodes = grid.nodes();

    let mut diag = vec![0.0; nodes];
    let mut lower = vec![0.0; nodes];
    let mut upper = vec![0.0; nodes];
    // Row 0 pins g(0) = 0; the remaining rows are (M + K).
    diag[0] = 1.0;
    for j in 1..nodes {
        let mass_w = if j == n { 0.5 } else { 1.0 };
        let stiff = if j == n { 1.0 } else { 2.0 };
        diag[j] = mass_w * dt + stiff / dt;
        lower[j] = if j == 1 { 0.0 } else { -1.0 / dt };
        if j < n {
            upper[j] = -1.0 / dt;
        }
    }

    let mut out = Trajectory::zeros(grid, dim);
    let mut rhs = vec![0.0; nodes];
    for i in 0..dim {
        for k in 0..nodes {
            rhs[k] = load[k * dim + i];
        }
        rhs[0] = 0.0;
        solve_tridiagonal(&diag, &lower, &upper, &mut rhs)?;
        for k in 0..nodes {
            out.set(k, i, rhs[k]);
        }
    }
    Ok(out)
}
