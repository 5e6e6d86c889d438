//! Model and objective parameter bundles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::degradation::Degradation;
use crate::model::grid::Trajectory;
use crate::model::norms;

/// Parameters of the evolution law.
///
/// Component `i` of the state moves only forward and only while the driving
/// force `z_i = -stiffness * q_i + l_i - kappa(H_i)` is positive, where
/// `H = initial_history + integral of q`. Positive `viscosity` selects the
/// regularized law `rate = max(z, 0) / viscosity`; zero viscosity selects the
/// rate-independent law (`z <= 0`, `rate >= 0`, `<z, rate> = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Elastic modulus of the restoring force, strictly positive.
    pub stiffness: f64,
    /// Viscous regularization parameter, `>= 0`; zero means rate-independent.
    pub viscosity: f64,
    /// Initial accumulated history, one entry per component.
    pub initial_history: Vec<f64>,
    /// Activation-threshold profile.
    pub threshold: Degradation,
}

impl ModelParams {
    /// Number of state components.
    pub fn dim(&self) -> usize {
        self.initial_history.len()
    }

    pub fn is_viscous(&self) -> bool {
        self.viscosity > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness > 0.0) || !self.stiffness.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stiffness must be positive, got {}",
                self.stiffness
            )));
        }
        if !(self.viscosity >= 0.0) || !self.viscosity.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "viscosity must be nonnegative, got {}",
                self.viscosity
            )));
        }
        if self.initial_history.is_empty() {
            return Err(Error::InvalidParameter(
                "model needs at least one component".into(),
            ));
        }
        if self.initial_history.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial history"));
        }
        self.threshold.validate()
    }

    /// Copy with a different viscosity; used by sweeps.
    pub fn with_viscosity(&self, viscosity: f64) -> Self {
        Self {
            viscosity,
            ..self.clone()
        }
    }
}

/// Running state cost `j(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunningCost {
    /// `j = 0`.
    Zero,
    /// `j(q) = (weight / 2) * integral of |q - target|^2`, constant target.
    #[serde(rename = "quadratic_tracking")]
    Tracking { weight: f64, target: Vec<f64> },
    /// `j(q) = integral of <weights, q>`.
    Linear { weights: Vec<f64> },
}

impl RunningCost {
    /// True when the integrand is affine in the state, which unlocks the
    /// sharper sign conditions in the limit stationarity checks.
    pub fn is_affine(&self) -> bool {
        matches!(self, RunningCost::Zero | RunningCost::Linear { .. })
    }

    /// Trapezoid value of the running cost along a state trajectory.
    pub fn value(&self, state: &Trajectory) -> f64 {
        let integrand: Box<dyn Fn(usize) -> f64> = match self {
            RunningCost::Zero => return 0.0,
            RunningCost::Tracking { weight, target } => Box::new(move |k| {
                let mut s = 0.0;
                for i in 0..state.dim() {
                    let d = state.at(k, i) - target[i];
                    s += d * d;
                }
                0.5 * weight * s
            }),
            RunningCost::Linear { weights } => Box::new(move |k| {
                (0..state.dim()).map(|i| weights[i] * state.at(k, i)).sum()
            }),
        };
        let grid = state.grid();
        let dt = grid.dt();
        let mut acc = 0.0;
        for k in 0..grid.nodes() {
            let w = if k == 0 || k == grid.intervals() {
                0.5
            } else {
                1.0
            };
            acc += w * dt * integrand(k);
        }
        acc
    }

    /// Pointwise gradient density `j'(q)` sampled at the nodes.
    pub fn gradient(&self, state: &Trajectory) -> Trajectory {
        let mut out = Trajectory::zeros(state.grid(), state.dim());
        match self {
            RunningCost::Zero => {}
            RunningCost::Tracking { weight, target } => {
                for k in 0..state.grid().nodes() {
                    for i in 0..state.dim() {
                        out.set(k, i, weight * (state.at(k, i) - target[i]));
                    }
                }
            }
            RunningCost::Linear { weights } => {
                for k in 0..state.grid().nodes() {
                    out.node_mut(k).copy_from_slice(weights);
                }
            }
        }
        out
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            RunningCost::Zero => Ok(()),
            RunningCost::Tracking { weight, target } => {
                if !weight.is_finite() || *weight < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "tracking weight must be nonnegative, got {weight}"
                    )));
                }
                expect_dim(target, dim)
            }
            RunningCost::Linear { weights } => expect_dim(weights, dim),
        }
    }
}

fn expect_dim(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("objective parameters"));
    }
    Ok(())
}

/// Full control objective
///
/// `J(l) = j(q) + 1/2 |q(T) - terminal_target|^2 + 1/2 |l|_{H1}^2`
/// plus, when a proximal anchor is set, `1/2 |l - anchor|_{H1}^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub running: RunningCost,
    /// Desired terminal state `q_d`.
    pub terminal_target: Vec<f64>,
    /// Anchor of the proximal term; `None` disables the term.
    pub proximal_anchor: Option<Trajectory>,
}

impl Objective {
    pub fn new(running: RunningCost, terminal_target: Vec<f64>) -> Self {
        Self {
            running,
            terminal_target,
            proximal_anchor: None,
        }
    }

    pub fn with_anchor(mut self, anchor: Trajectory) -> Self {
        self.proximal_anchor = Some(anchor);
        self
    }

    /// Terminal misfit `q(T) - q_d`.
    pub fn terminal_misfit(&self, state: &Trajectory) -> Vec<f64> {
        state
            .terminal()
            .iter()
            .zip(&self.terminal_target)
            .map(|(q, d)| q - d)
            .collect()
    }

    /// `1/2 |q(T) - q_d|^2`.
    pub fn terminal_value(&self, state: &Trajectory) -> f64 {
        0.5 * self
            .terminal_misfit(state)
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
    }

    /// Control cost `1/2 |l|_{H1}^2` plus the proximal term when anchored.
    pub fn control_cost(&self, control: &Trajectory) -> Result<f64> {
        let mut cost = 0.5 * norms::h1_inner(control, control)?;
        if let Some(anchor) = &self.proximal_anchor {
            let d = control.sub(anchor)?;
            cost += 0.5 * norms::h1_inner(&d, &d)?;
        }
        Ok(cost)
    }

    pub fn is_affine_running(&self) -> bool {
        self.running.is_affine()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.running.validate(dim)?;
        expect_dim(&self.terminal_target, dim)
    }
}
