//! Adjoint system of the viscous control problem and the reduced gradient.
//!
//! Given a forward run `q` with in-step force `z`, the costate `xi` solves,
//! backward from `xi(T) = q(T) - q_d`,
//!
//! `-xi' + a * lam + A* lam = j'(q)`,
//!
//! where `lam` is the multiplier of the rate law and `A*` is the adjoint of
//! the linearized threshold feedback `v -> kappa'(H(q)) * H(v)`. Swapping
//! the order of integration turns that adjoint into a backward integral:
//! `(A* lam)(t) = integral over [t, T] of kappa'(H(q)) * lam`, accumulated
//! here interval by interval.
//!
//! The multiplier is substituted, not solved for: on intervals with positive
//! in-step force `lam = xi / eps` (implicitly, mirroring the forward step),
//! elsewhere `lam = 0`; the zero band keeps the smallest admissible value 0.
//! The scheme mirrors the forward one and is adjoint-consistent to first
//! order rather than an exact transpose, so gradient checks carry an `O(dt)`
//! floor.
//!
//! [`reduced_gradient`] assembles the derivative of the full objective in
//! the zero-initial `H1` metric: the Riesz lift of
//! `v -> integral of <lam, v> + h1_inner(l, v) (+ proximal term)`.

use crate::error::{Error, Result};
use crate::forward::ForwardSolution;
use crate::linalg;
use crate::model::{IntervalField, ModelParams, Objective, Trajectory};
use crate::sensitivity::{ActivationPattern, ZLabel};

/// Costate, multiplier, and the multiplier's backward primitive.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    /// Costate `xi`, nodal, with `xi(T) = q(T) - q_d` exactly.
    pub costate: Trajectory,
    /// Multiplier `lam`, constant per interval.
    pub multiplier: IntervalField,
    /// Backward primitive `t_k -> integral of lam over [t_k, T]`, nodal.
    pub cumulative: Trajectory,
}

/// Integrate the adjoint system backward along a viscous base run.
pub fn solve_adjoint(
    params: &ModelParams,
    base: &ForwardSolution,
    objective: &Objective,
    band: f64,
) -> Result<AdjointSolution> {
    params.validate()?;
    objective.validate(params.dim())?;
    if !(params.viscosity > 0.0) {
        return Err(Error::ZeroViscosity(params.viscosity));
    }
    if base.state.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: base.state.dim(),
        });
    }

    let grid = base.state.grid();
    let dim = params.dim();
    let n = grid.intervals();
    let dt = grid.dt();
    let a = params.stiffness;
    let eps = params.viscosity;

    let pattern = ActivationPattern::classify(&base.driving_force, band);
    let source = objective.running.gradient(&base.state);

    let mut costate = Trajectory::zeros(grid, dim);
    let mut multiplier = IntervalField::zeros(grid, dim);
    let mut cumulative = Trajectory::zeros(grid, dim);
    // Backward integral of kappa'(H(q)) * lam, the realized adjoint of the
    // threshold feedback.
    let mut weighted = vec![0.0; dim];

    let misfit = objective.terminal_misfit(&base.state);
    costate.node_mut(n).copy_from_slice(&misfit);

    for k in (0..n).rev() {
        for i in 0..dim {
            let drift = -dt * weighted[i] + dt * source.at(k, i);
            let xi_next = costate.at(k + 1, i);
            let (xi, lam) = match pattern.label(k, i) {
                ZLabel::Positive => {
                    let xi = (xi_next + drift) / (1.0 + a * dt / eps);
                    (xi, xi / eps)
                }
                ZLabel::Negative | ZLabel::Zero => (xi_next + drift, 0.0),
            };
            costate.set(k, i, xi);
            multiplier.set(k, i, lam);
            let slope = params.threshold.deriv(base.history.at(k, i));
            weighted[i] += dt * slope * lam;
            let cum = cumulative.at(k + 1, i) + dt * lam;
            cumulative.set(k, i, cum);
        }
    }

    Ok(AdjointSolution {
        costate,
        multiplier,
        cumulative,
    })
}

/// Riesz representative of the objective derivative at `control`:
/// solve `(M + K) g = load` for the functional
/// `v -> integral of <lam, v> + h1_inner(control, v)
///        (+ h1_inner(control - anchor, v))`.
///
/// With a zero multiplier and no proximal term the gradient is the control
/// itself. The control must vanish at the first node (zero-initial space).
pub fn reduced_gradient(
    control: &Trajectory,
    adjoint: &AdjointSolution,
    objective: &Objective,
) -> Result<Trajectory> {
    if !control.is_zero_initial() {
        return Err(Error::NonzeroInitialControl(control.at(0, 0)));
    }
    let grid = control.grid();
    let dim = control.dim();
    if adjoint.multiplier.grid() != grid {
        return Err(Error::GridMismatch);
    }

    let mut load = linalg::hat_load(&adjoint.multiplier);
    let reg = linalg::h1_apply(control);
    for (l, r) in load.iter_mut().zip(&reg) {
        *l += r;
    }
    if let Some(anchor) = &objective.proximal_anchor {
        let diff = control.sub(anchor)?;
        let prox = linalg::h1_apply(&diff);
        for (l, p) in load.iter_mut().zip(&prox) {
            *l += p;
        }
    }
    linalg::h1_riesz(grid, dim, &load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::solve_viscous;
    use crate::model::{norms, Degradation, RunningCost, TimeGrid};
    use crate::sensitivity::{default_band, directional_derivative};

    fn tracking_setup(
        n: usize,
        eps: f64,
    ) -> (ModelParams, Trajectory, Objective) {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: eps,
            initial_history: vec![0.2],
            threshold: Degradation::Saturating {
                base: 0.6,
                gain: 0.3,
            },
        };
        let control = Trajectory::scalar_from_fn(grid, |t| 1.8 * t);
        let objective = Objective::new(
            RunningCost::Tracking {
                weight: 1.0,
                target: vec![0.3],
            },
            vec![0.4],
        );
        (params, control, objective)
    }

    #[test]
    fn terminal_condition_is_exact() {
        let (params, control, objective) = tracking_setup(200, 0.05);
        let base = solve_viscous(&params, &control).unwrap();
        let adj =
            solve_adjoint(&params, &base, &objective, default_band(&control)).unwrap();
        let misfit = objective.terminal_misfit(&base.state);
        assert_eq!(adj.costate.terminal()[0], misfit[0]);
    }

    #[test]
    fn multiplier_follows_the_sign_rule() {
        let (params, control, objective) = tracking_setup(300, 0.05);
        let base = solve_viscous(&params, &control).unwrap();
        let band = default_band(&control);
        let adj = solve_adjoint(&params, &base, &objective, band).unwrap();
        let pattern = ActivationPattern::classify(&base.driving_force, band);
        for k in 0..control.grid().intervals() {
            match pattern.label(k, 0) {
                ZLabel::Positive => {
                    let expected = adj.costate.at(k, 0) / params.viscosity;
                    assert_eq!(adj.multiplier.at(k, 0), expected);
                }
                _ => assert_eq!(adj.multiplier.at(k, 0), 0.0),
            }
        }
    }

    #[test]
    fn cumulative_field_is_the_backward_primitive() {
        let (params, control, objective) = tracking_setup(150, 0.1);
        let base = solve_viscous(&params, &control).unwrap();
        let adj =
            solve_adjoint(&params, &base, &objective, default_band(&control)).unwrap();
        let grid = control.grid();
        let dt = grid.dt();
        let mut tail = 0.0;
        for k in (0..grid.intervals()).rev() {
            tail += dt * adj.multiplier.at(k, 0);
            assert!((adj.cumulative.at(k, 0) - tail).abs() < 1e-14);
        }
        assert_eq!(adj.cumulative.terminal()[0], 0.0);
    }

    #[test]
    fn adjoint_pairs_with_the_directional_derivative() {
        // The defining identity: for any direction v,
        //   integral of <j'(q), dq> + <xi(T), dq(T)> = integral of <lam, v>,
        // up to the first-order scheme mismatch.
        let (params, control, objective) = tracking_setup(2000, 0.05);
        let base = solve_viscous(&params, &control).unwrap();
        let band = default_band(&control);
        let adj = solve_adjoint(&params, &base, &objective, band).unwrap();
        let grid = control.grid();
        let v = Trajectory::scalar_from_fn(grid, |t| (2.3 * t).sin() * t);
        let sens = directional_derivative(&params, &base, &v, band).unwrap();

        let source = objective.running.gradient(&base.state);
        let lhs = norms::l2_inner(&source, &sens.delta).unwrap()
            + adj.costate.terminal()[0] * sens.delta.terminal()[0];

        let dt = grid.dt();
        let mut rhs = 0.0;
        for k in 0..grid.intervals() {
            rhs += adj.multiplier.at(k, 0) * 0.5 * dt * (v.at(k, 0) + v.at(k + 1, 0));
        }

        let scale = 1.0 + lhs.abs() + rhs.abs();
        assert!(
            (lhs - rhs).abs() <= 20.0 * dt * scale,
            "duality gap {} exceeds O(dt) at dt = {dt}",
            (lhs - rhs).abs()
        );
    }

    #[test]
    fn gradient_reduces_to_the_control_without_multiplier() {
        // Inactive run: lam = 0, no proximal term, so the Riesz lift of
        // h1_inner(l, .) is l itself.
        let grid = TimeGrid::new(1.0, 80).unwrap();
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: 0.1,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 5.0 },
        };
        let control = Trajectory::scalar_from_fn(grid, |t| t * (1.0 - 0.5 * t));
        let objective = Objective::new(RunningCost::Zero, vec![0.0]);
        let base = solve_viscous(&params, &control).unwrap();
        let adj =
            solve_adjoint(&params, &base, &objective, default_band(&control)).unwrap();
        assert!(adj.multiplier.values().iter().all(|&l| l == 0.0));
        let g = reduced_gradient(&control, &adj, &objective).unwrap();
        let diff = g.sub(&control).unwrap();
        assert!(norms::sup_norm(&diff) < 1e-10);
    }

    #[test]
    fn gradient_rejects_controls_that_do_not_start_at_zero() {
        let (params, _, objective) = tracking_setup(50, 0.1);
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let control = Trajectory::constant(grid, &[1.0]);
        let base = solve_viscous(&params, &control).unwrap();
        let adj =
            solve_adjoint(&params, &base, &objective, default_band(&control)).unwrap();
        assert!(matches!(
            reduced_gradient(&control, &adj, &objective),
            Err(Error::NonzeroInitialControl(_))
        ));
    }

    #[test]
    fn multiplier_l2_norm_is_finite_and_reported() {
        let (params, control, objective) = tracking_setup(400, 0.01);
        let base = solve_viscous(&params, &control).unwrap();
        let adj =
            solve_adjoint(&params, &base, &objective, default_band(&control)).unwrap();
        let l2 = norms::interval_l2_norm(&adj.multiplier);
        assert!(l2.is_finite());
        // The dual proxy is the quantity with a viscosity-uniform bound.
        let proxy = norms::dual_w1inf_proxy(&adj.multiplier);
        assert!(proxy.is_finite() && proxy >= 0.0);
    }
}
