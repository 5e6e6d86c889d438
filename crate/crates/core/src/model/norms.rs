//! Discrete norms and inner products on sampled fields.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * time integrals of node-based fields use the composite trapezoid rule;
//! * derivatives are forward differences, constant on each interval, so the
//!   derivative part of the `H1` product is a plain sum over intervals;
//! * interval-based fields (rates, multipliers) are piecewise constant and
//!   integrate exactly.
//!
//! The control space is `H1` functions vanishing at `t = 0`; its inner
//! product is [`h1_inner`]. The dual-norm proxy [`dual_w1inf_proxy`] bounds a
//! multiplier in the dual of `W^{1,inf}` through the sup of its backward
//! primitive, which is the quantity that stays bounded along vanishing
//! viscosity.

use crate::error::Result;
use crate::model::grid::{compatible, IntervalField, Trajectory};

/// Trapezoid `L2` inner product of two node-based fields.
pub fn l2_inner(u: &Trajectory, v: &Trajectory) -> Result<f64> {
    compatible(u, v)?;
    let grid = u.grid();
    let dt = grid.dt();
    let mut acc = 0.0;
    for k in 0..grid.nodes() {
        let w = if k == 0 || k == grid.intervals() {
            0.5
        } else {
            1.0
        };
        let mut s = 0.0;
        for i in 0..u.dim() {
            s += u.at(k, i) * v.at(k, i);
        }
        acc += w * dt * s;
    }
    Ok(acc)
}

pub fn l2_norm(u: &Trajectory) -> f64 {
    l2_inner(u, u).expect("a field is always compatible with itself").sqrt()
}

/// Discrete `H1` inner product: trapezoid mass term plus the exact integral
/// of the piecewise-constant forward-difference derivatives.
pub fn h1_inner(u: &Trajectory, v: &Trajectory) -> Result<f64> {
    compatible(u, v)?;
    let grid = u.grid();
    let dt = grid.dt();
    let mut acc = l2_inner(u, v)?;
    for k in 0..grid.intervals() {
        let mut s = 0.0;
        for i in 0..u.dim() {
            let du = u.at(k + 1, i) - u.at(k, i);
            let dv = v.at(k + 1, i) - v.at(k, i);
            s += du * dv;
        }
        acc += s / dt;
    }
    Ok(acc)
}

pub fn h1_norm(u: &Trajectory) -> f64 {
    h1_inner(u, u).expect("a field is always compatible with itself").sqrt()
}

/// Sup over nodes and components of the absolute value (the `C^0` norm).
pub fn sup_norm(u: &Trajectory) -> f64 {
    u.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Sup over intervals and components of the absolute value.
pub fn interval_sup_norm(u: &IntervalField) -> f64 {
    u.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Discrete `W^{1,1}` norm: trapezoid integral of the pointwise Euclidean
/// norm plus the total variation of the forward differences.
pub fn w11_norm(u: &Trajectory) -> f64 {
    let grid = u.grid();
    let dt = grid.dt();
    let mut acc = 0.0;
    for k in 0..grid.nodes() {
        let w = if k == 0 || k == grid.intervals() {
            0.5
        } else {
            1.0
        };
        let s: f64 = (0..u.dim()).map(|i| u.at(k, i) * u.at(k, i)).sum();
        acc += w * dt * s.sqrt();
    }
    for k in 0..grid.intervals() {
        let s: f64 = (0..u.dim())
            .map(|i| {
                let d = u.at(k + 1, i) - u.at(k, i);
                d * d
            })
            .sum();
        acc += s.sqrt();
    }
    acc
}

/// `L2` norm of a piecewise-constant interval field (exact integration).
pub fn interval_l2_norm(u: &IntervalField) -> f64 {
    let dt = u.grid().dt();
    let s: f64 = u.values().iter().map(|v| v * v).sum();
    (dt * s).sqrt()
}

/// Dual-norm proxy of a node-based multiplier: sup norm of the backward
/// primitive `t -> integral of u over [t, T]`, accumulated with the
/// backward trapezoid rule.
pub fn dual_w1inf_proxy_nodal(u: &Trajectory) -> f64 {
    let grid = u.grid();
    let dt = grid.dt();
    let dim = u.dim();
    let mut running = vec![0.0; dim];
    let mut best = 0.0_f64;
    for k in (0..grid.intervals()).rev() {
        for i in 0..dim {
            running[i] += 0.5 * dt * (u.at(k, i) + u.at(k + 1, i));
            best = best.max(running[i].abs());
        }
    }
    best
}

/// Dual-norm proxy of a piecewise-constant multiplier: sup norm of the
/// backward primitive, which is exact for interval fields.
pub fn dual_w1inf_proxy(u: &IntervalField) -> f64 {
    let grid = u.grid();
    let dt = grid.dt();
    let dim = u.dim();
    let mut running = vec![0.0; dim];
    let mut best = 0.0_f64;
    for k in (0..grid.intervals()).rev() {
        for i in 0..dim {
            running[i] += dt * u.at(k, i);
            best = best.max(running[i].abs());
        }
    }
    best
}
