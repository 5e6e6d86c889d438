//! Directional state derivatives of the viscous forward map.
//!
//! The viscous solution map is piecewise smooth: wherever the in-step
//! driving force is away from zero the step is either a linear implicit
//! update or frozen, and where it sits exactly at zero the one-sided
//! derivative takes the positive part of the linearized force. The
//! directional derivative `dq` in a control direction `v` therefore
//! integrates, with the same semi-implicit stepping and lagged histories as
//! the forward solver,
//!
//! * `z > 0`:  `eps * d(rate) = -a dq + v - kappa'(H(q)) * H(dq)`,
//! * `z < 0`:  `d(rate) = 0`,
//! * `z = 0`:  the positive part of the first branch.
//!
//! The branch pattern is read off the base run's in-step force with a small
//! classification band; [`default_band`] scales it with the load.

use crate::error::{Error, Result};
use crate::forward::ForwardSolution;
use crate::model::{norms, ModelParams, TimeGrid, Trajectory};

/// Sign class of the in-step driving force on one interval and component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZLabel {
    Negative,
    Zero,
    Positive,
}

/// Per-interval, per-component branch labels of a forward run.
#[derive(Debug, Clone)]
pub struct ActivationPattern {
    grid: TimeGrid,
    dim: usize,
    labels: Vec<ZLabel>,
}

impl ActivationPattern {
    /// Classify a nodal driving force: interval `k` takes the label of the
    /// in-step value stored at node `k + 1`. Values within `band` of zero
    /// are boundary (`Zero`) labels.
    pub fn classify(force: &Trajectory, band: f64) -> Self {
        let grid = force.grid();
        let dim = force.dim();
        let mut labels = Vec::with_capacity(grid.intervals() * dim);
        for k in 0..grid.intervals() {
            for i in 0..dim {
                let z = force.at(k + 1, i);
                labels.push(if z > band {
                    ZLabel::Positive
                } else if z < -band {
                    ZLabel::Negative
                } else {
                    ZLabel::Zero
                });
            }
        }
        Self { grid, dim, labels }
    }

    pub fn label(&self, interval: usize, component: usize) -> ZLabel {
        self.labels[interval * self.dim + component]
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// True when some interval sits on the branch boundary, i.e. the
    /// derivative is only one-sided there.
    pub fn has_boundary(&self) -> bool {
        self.labels.iter().any(|&l| l == ZLabel::Zero)
    }

    pub fn count(&self, which: ZLabel) -> usize {
        self.labels.iter().filter(|&&l| l == which).count()
    }
}

/// Default classification band `1e-8 * (1 + sup |l|)`.
pub fn default_band(control: &Trajectory) -> f64 {
    1e-8 * (1.0 + norms::sup_norm(control))
}

/// A directional derivative together with the branch pattern it used.
#[derive(Debug, Clone)]
pub struct SensitivitySolution {
    /// Nodal directional state derivative; starts at zero.
    pub delta: Trajectory,
    pub pattern: ActivationPattern,
}

/// Integrate the directional derivative of the viscous forward map at the
/// base run `base` in the control direction `direction`.
///
/// The base run must come from [`crate::forward::solve_viscous`] with the
/// same parameters; `band` is the zero-classification band for its in-step
/// force. The first node of `direction` is never read (the state derivative
/// starts at zero regardless).
pub fn directional_derivative(
    params: &ModelParams,
    base: &ForwardSolution,
    direction: &Trajectory,
    band: f64,
) -> Result<SensitivitySolution> {
    params.validate()?;
    if !(params.viscosity > 0.0) {
        return Err(Error::ZeroViscosity(params.viscosity));
    }
    if direction.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: direction.dim(),
        });
    }
    if direction.grid() != base.state.grid() {
        return Err(Error::GridMismatch);
    }
    if !direction.is_finite() {
        return Err(Error::NonFinite("direction"));
    }

    let grid = direction.grid();
    let dim = params.dim();
    let dt = grid.dt();
    let a = params.stiffness;
    let eps = params.viscosity;
    let pattern = ActivationPattern::classify(&base.driving_force, band);

    let mut delta = Trajectory::zeros(grid, dim);
    // History of the derivative itself, trapezoid with zero initial value.
    let mut dh = vec![0.0; dim];
    for k in 0..grid.intervals() {
        for i in 0..dim {
            let slope = params.threshold.deriv(base.history.at(k, i));
            let w = direction.at(k + 1, i) - slope * dh[i];
            let d = delta.at(k, i);
            let implicit = || (d + dt / eps * w) / (1.0 + a * dt / eps);
            let next = match pattern.label(k, i) {
                ZLabel::Positive => implicit(),
                ZLabel::Negative => d,
                ZLabel::Zero => {
                    if w - a * d > 0.0 {
                        implicit()
                    } else {
                        d
                    }
                }
            };
            delta.set(k + 1, i, next);
        }
        for i in 0..dim {
            dh[i] += 0.5 * dt * (delta.at(k, i) + delta.at(k + 1, i));
        }
    }

    Ok(SensitivitySolution { delta, pattern })
}
