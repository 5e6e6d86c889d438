//! Activation-threshold profiles.
//!
//! The threshold `kappa` maps accumulated history to the activation level
//! that the driving force has to reach before a component may move. It must
//! be nonnegative on the histories a run produces, differentiable, and
//! globally Lipschitz; [`Degradation::lipschitz_bound`] reports the constant
//! used by tolerance heuristics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold profile `kappa` as a function of accumulated history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Degradation {
    /// `kappa(x) = value`: history has no effect.
    Constant { value: f64 },
    /// `kappa(x) = offset + slope * x`.
    ///
    /// Nonnegative on the nonnegative histories produced by runs with
    /// `y0 >= 0` whenever `offset >= 0` and `slope >= 0`; a negative slope
    /// models softening and is accepted, but the caller is responsible for
    /// keeping the histories inside the region where the profile stays
    /// nonnegative.
    Affine { offset: f64, slope: f64 },
    /// `kappa(x) = base + gain * tanh(x)`: smooth and saturating, with
    /// Lipschitz constant `|gain|`. Requires `base >= |gain|` so the profile
    /// is nonnegative on all of `R`.
    Saturating { base: f64, gain: f64 },
}

impl Degradation {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Degradation::Constant { value } => value,
            Degradation::Affine { offset, slope } => offset + slope * x,
            Degradation::Saturating { base, gain } => base + gain * x.tanh(),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            Degradation::Constant { .. } => 0.0,
            Degradation::Affine { slope, .. } => slope,
            Degradation::Saturating { gain, .. } => {
                let th = x.tanh();
                gain * (1.0 - th * th)
            }
        }
    }

    /// Second derivative where available (all built-in profiles have one).
    pub fn second_deriv(&self, x: f64) -> Option<f64> {
        match *self {
            Degradation::Constant { .. } | Degradation::Affine { .. } => Some(0.0),
            Degradation::Saturating { gain, .. } => {
                let th = x.tanh();
                Some(-2.0 * gain * th * (1.0 - th * th))
            }
        }
    }

    /// Global Lipschitz constant of the profile.
    pub fn lipschitz_bound(&self) -> f64 {
        match *self {
            Degradation::Constant { .. } => 0.0,
            Degradation::Affine { slope, .. } => slope.abs(),
            Degradation::Saturating { gain, .. } => gain.abs(),
        }
    }

    /// True when the derivative is constant, which unlocks the sharper sign
    /// conditions in the limit stationarity checks.
    pub fn is_affine(&self) -> bool {
        matches!(
            self,
            Degradation::Constant { .. } | Degradation::Affine { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Degradation::Constant { value } => value.is_finite() && value >= 0.0,
            Degradation::Affine { offset, slope } => {
                offset.is_finite() && slope.is_finite() && offset >= 0.0
            }
            Degradation::Saturating { base, gain } => {
                base.is_finite() && gain.is_finite() && base >= gain.abs()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "threshold profile must stay nonnegative: {self:?}"
            )))
        }
    }
}
