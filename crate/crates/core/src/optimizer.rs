//! Steepest descent for the viscous control problem, and the
//! vanishing-viscosity sweep built on top of it.
//!
//! The descent direction is the negative of the reduced gradient from
//! [`crate::adjoint::reduced_gradient`], measured in the zero-initial `H1`
//! metric. Steps are chosen by Armijo backtracking: a step `s` is accepted
//! when
//!
//! `J(l - s g) <= J(l) - c1 * s * h1_inner(g, g)`.
//!
//! The sweep walks a ladder of decreasing viscosities. Each stage starts
//! from the previous optimum and re-anchors the proximal term there, so the
//! proximal penalty is exactly zero at every stage's first iterate; the last
//! stage's optimum is then pushed through the rate-independent solver to
//! produce the limit reference trajectory.

use crate::adjoint::{reduced_gradient, solve_adjoint, AdjointSolution};
use crate::error::{Error, Result};
use crate::forward::{solve, solve_rate_independent, ForwardSolution};
use crate::model::{norms, ModelParams, Objective, Trajectory};
use crate::sensitivity::default_band;

/// Hard cap on Armijo halvings before the search is declared failed.
const MAX_HALVINGS: usize = 60;

/// Knobs of the descent loop.
#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// Maximum outer iterations.
    pub max_iters: usize,
    /// Stop when the `H1` norm of the reduced gradient drops below this.
    pub grad_tol: f64,
    /// Armijo slope fraction `c1`.
    pub armijo_c1: f64,
    /// Multiplicative backtracking factor in `(0, 1)`.
    pub backtrack: f64,
    /// First trial step of every line search.
    pub initial_step: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-6,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
        }
    }
}

impl OptimizeOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "armijo_c1 must lie in (0, 1), got {}",
                self.armijo_c1
            )));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "backtrack factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial_step must be positive, got {}",
                self.initial_step
            )));
        }
        Ok(())
    }
}

/// One accepted iterate of the descent loop.
#[derive(Debug, Clone, Copy)]
pub struct IterateRecord {
    /// Objective value at the iterate (including any proximal term).
    pub objective: f64,
    /// `H1` norm of the reduced gradient at the iterate.
    pub gradient_norm: f64,
    /// Armijo step accepted when leaving the iterate; zero on the last row.
    pub step: f64,
}

/// Outcome of [`minimize_viscous`].
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    /// Final control iterate.
    pub control: Trajectory,
    /// Objective at the final iterate (including any proximal term).
    pub objective: f64,
    /// Gradient norm at the final iterate.
    pub gradient_norm: f64,
    /// Whether `grad_tol` was reached within `max_iters`.
    pub converged: bool,
    /// One record per visited iterate, in order; objectives are strictly
    /// decreasing because every step passes the Armijo test.
    pub iterates: Vec<IterateRecord>,
    /// Forward solution at the final control.
    pub forward: ForwardSolution,
    /// Adjoint solution at the final control.
    pub adjoint: AdjointSolution,
}

/// Objective value at a control: forward solve plus cost evaluation.
pub fn evaluate_objective(
    params: &ModelParams,
    control: &Trajectory,
    objective: &Objective,
) -> Result<f64> {
    let run = solve(params, control)?;
    objective_of_run(&run, control, objective)
}

fn objective_of_run(
    run: &ForwardSolution,
    control: &Trajectory,
    objective: &Objective,
) -> Result<f64> {
    Ok(objective.running.value(&run.state)
        + objective.terminal_value(&run.state)
        + objective.control_cost(control)?)
}

/// Armijo-backtracked steepest descent on the viscous problem.
///
/// The initial control must vanish at `t = 0`; every iterate stays in that
/// space because the gradient does. Fails with [`Error::LineSearch`] if a
/// line search exhausts [`MAX_HALVINGS`] halvings without an accepted step.
pub fn minimize_viscous(
    params: &ModelParams,
    initial: &Trajectory,
    objective: &Objective,
    options: &OptimizeOptions,
) -> Result<OptimizeResult> {
    params.validate()?;
    options.validate()?;
    objective.validate(params.dim())?;
    if !params.is_viscous() {
        return Err(Error::ZeroViscosity(params.viscosity));
    }
    if !initial.is_zero_initial() {
        return Err(Error::NonzeroInitialControl(initial.at(0, 0)));
    }

    let mut control = initial.clone();
    let mut run = solve(params, &control)?;
    let mut value = objective_of_run(&run, &control, objective)?;
    let mut iterates = Vec::new();

    for iter in 0..options.max_iters {
        let band = default_band(&control);
        let adjoint = solve_adjoint(params, &run, objective, band)?;
        let gradient = reduced_gradient(&control, &adjoint, objective)?;
        let slope = norms::h1_inner(&gradient, &gradient)?;
        let gradient_norm = slope.sqrt();

        if gradient_norm <= options.grad_tol {
            iterates.push(IterateRecord {
                objective: value,
                gradient_norm,
                step: 0.0,
            });
            return Ok(OptimizeResult {
                control,
                objective: value,
                gradient_norm,
                converged: true,
                iterates,
                forward: run,
                adjoint,
            });
        }

        let mut step = options.initial_step;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = control.clone();
            trial.add_scaled(-step, &gradient)?;
            let trial_run = solve(params, &trial)?;
            let trial_value = objective_of_run(&trial_run, &trial, objective)?;
            if trial_value <= value - options.armijo_c1 * step * slope {
                accepted = Some((trial, trial_run, trial_value));
                break;
            }
            step *= options.backtrack;
        }
        let Some((next, next_run, next_value)) = accepted else {
            return Err(Error::LineSearch(iter));
        };

        iterates.push(IterateRecord {
            objective: value,
            gradient_norm,
            step,
        });
        control = next;
        run = next_run;
        value = next_value;
    }

    // Out of iterations: report the last iterate honestly.
    let band = default_band(&control);
    let adjoint = solve_adjoint(params, &run, objective, band)?;
    let gradient = reduced_gradient(&control, &adjoint, objective)?;
    let gradient_norm = norms::h1_norm(&gradient);
    iterates.push(IterateRecord {
        objective: value,
        gradient_norm,
        step: 0.0,
    });
    Ok(OptimizeResult {
        control,
        objective: value,
        gradient_norm,
        converged: gradient_norm <= options.grad_tol,
        iterates,
        forward: run,
        adjoint,
    })
}

/// Per-viscosity summary of a sweep stage.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub viscosity: f64,
    /// Base objective at the stage optimum, without the proximal term.
    pub objective: f64,
    /// Proximal penalty left at the stage optimum.
    pub proximal_gap: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Accepted descent steps spent in the stage (a stage that starts at a
    /// stationary point spends zero).
    pub iterations: usize,
    /// `sup |xi|` at the stage optimum.
    pub costate_sup: f64,
    /// `L2` norm of the multiplier at the stage optimum.
    pub multiplier_l2: f64,
    /// Sup of the backward primitive of the multiplier, the quantity with a
    /// viscosity-uniform bound.
    pub dual_proxy: f64,
    /// The stage optimum.
    pub control: Trajectory,
}

/// Result of [`vanishing_viscosity_sweep`].
#[derive(Debug, Clone)]
pub struct SweepReport {
    /// One row per ladder entry, in the order given.
    pub rows: Vec<SweepRow>,
    /// Rate-independent forward solve at the final stage optimum.
    pub limit_reference: ForwardSolution,
}

impl SweepReport {
    pub fn final_control(&self) -> &Trajectory {
        &self.rows.last().expect("sweep has at least one row").control
    }
}

/// The default viscosity ladder: half-decade steps from `1e-1` to `1e-4`.
pub fn default_viscosity_ladder() -> Vec<f64> {
    (0..7).map(|j| 10f64.powf(-1.0 - 0.5 * j as f64)).collect()
}

/// Solve the control problem along a decreasing viscosity ladder.
///
/// Every stage warm-starts from the previous stage's optimum and anchors the
/// proximal term there (the first stage anchors at `initial`), so the
/// proximal penalty vanishes exactly at each stage's starting iterate. After
/// the last stage the optimum is run through the rate-independent law to
/// give the limit reference.
pub fn vanishing_viscosity_sweep(
    params: &ModelParams,
    initial: &Trajectory,
    objective: &Objective,
    ladder: &[f64],
    options: &OptimizeOptions,
) -> Result<SweepReport> {
    if ladder.is_empty() {
        return Err(Error::InvalidParameter("viscosity ladder is empty".into()));
    }
    for &eps in ladder {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ladder viscosities must be positive, got {eps}"
            )));
        }
    }
    for pair in ladder.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::InvalidParameter(format!(
                "ladder must be strictly decreasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }

    let mut warm = initial.clone();
    let mut rows = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let staged = params.with_viscosity(eps);
        let anchored = objective.clone().with_anchor(warm.clone());
        let result = minimize_viscous(&staged, &warm, &anchored, options)?;

        let base = result.objective
            - proximal_penalty(&result.control, &anchored)?;
        rows.push(SweepRow {
            viscosity: eps,
            objective: base,
            proximal_gap: result.objective - base,
            gradient_norm: result.gradient_norm,
            converged: result.converged,
            iterations: result.iterates.len().saturating_sub(1),
            costate_sup: norms::sup_norm(&result.adjoint.costate),
            multiplier_l2: norms::interval_l2_norm(&result.adjoint.multiplier),
            dual_proxy: norms::dual_w1inf_proxy(&result.adjoint.multiplier),
            control: result.control,
        });
        warm = rows.last().unwrap().control.clone();
    }

    let limit_params = params.with_viscosity(0.0);
    let limit_reference = solve_rate_independent(&limit_params, &warm)?;
    Ok(SweepReport {
        rows,
        limit_reference,
    })
}

fn proximal_penalty(control: &Trajectory, objective: &Objective) -> Result<f64> {
    match &objective.proximal_anchor {
        Some(anchor) => {
            let d = control.sub(anchor)?;
            Ok(0.5 * norms::h1_inner(&d, &d)?)
        }
        None => Ok(0.0),
    }
}
