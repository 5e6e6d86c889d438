//! Model primitives: grids, sampled fields, threshold profiles, parameter
//! bundles, norms, and the three pointwise operators every solver in this
//! crate is built from.
//!
//! * [`history`] — accumulated history `H(q)(t) = y0 + integral of q`,
//!   trapezoid rule, exact on polynomials of degree one;
//! * [`stored_energy`] — elastic energy `a/2 |q|^2 - <l, q>` at a node;
//! * [`driving_force`] — the force `z = -a q + l - kappa(H(q))` whose sign
//!   decides which components move.

pub mod degradation;
pub mod grid;
pub mod norms;
pub mod params;

pub use degradation::Degradation;
pub use grid::{IntervalField, TimeGrid, Trajectory};
pub use params::{ModelParams, Objective, RunningCost};

use crate::error::{Error, Result};

/// Accumulated history `H(q)(t_k) = y0 + integral of q over [0, t_k]`,
/// computed with the composite trapezoid rule. `H(q)(t_0) = y0` exactly.
pub fn history(state: &Trajectory, initial: &[f64]) -> Result<Trajectory> {
    if initial.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: initial.len(),
        });
    }
    let grid = state.grid();
    let dt = grid.dt();
    let mut out = Trajectory::zeros(grid, state.dim());
    out.node_mut(0).copy_from_slice(initial);
    for k in 0..grid.intervals() {
        for i in 0..state.dim() {
            let inc = 0.5 * dt * (state.at(k, i) + state.at(k + 1, i));
            let v = out.at(k, i) + inc;
            out.set(k + 1, i, v);
        }
    }
    Ok(out)
}

/// Elastic stored energy `stiffness/2 * |q|^2 - <l, q>` at a single node.
pub fn stored_energy(state: &[f64], load: &[f64], stiffness: f64) -> f64 {
    let sq: f64 = state.iter().map(|q| q * q).sum();
    let lq: f64 = state.iter().zip(load).map(|(q, l)| q * l).sum();
    0.5 * stiffness * sq - lq
}

/// Driving force `z(t_k) = -a q(t_k) + l(t_k) - kappa(H(q)(t_k))` with the
/// history evaluated at the same node (the "aligned" convention; the forward
/// solvers store the in-step variant, which lags the history by one node).
pub fn driving_force(
    state: &Trajectory,
    control: &Trajectory,
    params: &ModelParams,
) -> Result<Trajectory> {
    grid::compatible(state, control)?;
    if state.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: state.dim(),
        });
    }
    let hist = history(state, &params.initial_history)?;
    let grid = state.grid();
    let mut out = Trajectory::zeros(grid, state.dim());
    for k in 0..grid.nodes() {
        for i in 0..state.dim() {
            let z = -params.stiffness * state.at(k, i) + control.at(k, i)
                - params.threshold.eval(hist.at(k, i));
            out.set(k, i, z);
        }
    }
    Ok(out)
}
