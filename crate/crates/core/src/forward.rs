//! Forward solvers for the one-sided evolution.
//!
//! State components start at zero and never decrease. On each step the
//! driving force `z = -a q + l - kappa(H)` is evaluated with the load at the
//! new node and the history lagged at the old node, and the elastic term is
//! treated implicitly:
//!
//! * viscous law (`viscosity > 0`): a component with positive in-step force
//!   takes the closed-form implicit step of `eps * rate = z`, otherwise it
//!   stays put;
//! * rate-independent law (`viscosity == 0`): each component jumps to the
//!   smallest value that keeps its in-step force nonpositive, i.e.
//!   `q_next = max(q, (l - kappa(H)) / a)`.
//!
//! Both updates keep, exactly up to rounding and interval by interval,
//!
//! * monotonicity `q_{k+1} >= q_k`,
//! * complementarity `<q_{k+1} - q_k, z_{k+1}> = 0` (rate-independent),
//! * the viscous rate law `viscosity * rate_k = max(z_{k+1}, 0)`,
//!
//! where `z_{k+1}` is the stored in-step force. The rate-independent update
//! never uses the step size except through the history integral, so runs
//! with a constant threshold profile are invariant under node-time
//! reparameterization.

use crate::error::{Error, Result};
use crate::model::{IntervalField, ModelParams, Trajectory};

/// Feasibility slack allowed on the in-step driving force of
/// rate-independent solutions; the update enforces `z <= 0` exactly up to
/// rounding.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Complementarity tolerance `10 * dt * (1 + sup |l|)` for products of the
/// step increment with the aligned driving force.
pub fn complementarity_tol(dt: f64, control_sup: f64) -> f64 {
    10.0 * dt * (1.0 + control_sup)
}

/// One forward run: state, rates, in-step driving force, history, and the
/// cumulative energy-balance residual.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    /// State `q`; starts at zero, componentwise nondecreasing.
    pub state: Trajectory,
    /// Forward-difference rates, one value per interval.
    pub rate: IntervalField,
    /// Driving force along the run. Node `k+1` holds the in-step value that
    /// drove interval `k` (threshold evaluated at the history through node
    /// `k`); node 0 holds `l(0) - kappa(y0)`.
    pub driving_force: Trajectory,
    /// Accumulated history `H(q)` on the same grid.
    pub history: Trajectory,
    /// Scalar energy-balance residual per node; see
    /// [`energy_balance_residual`].
    pub energy_residual: Trajectory,
}

fn validate_inputs(params: &ModelParams, control: &Trajectory) -> Result<()> {
    params.validate()?;
    if control.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: control.dim(),
        });
    }
    if !control.is_finite() {
        return Err(Error::NonFinite("control"));
    }
    Ok(())
}

/// Solve the viscous law `viscosity * rate = max(z, 0)`.
pub fn solve_viscous(params: &ModelParams, control: &Trajectory) -> Result<ForwardSolution> {
    validate_inputs(params, control)?;
    if !(params.viscosity > 0.0) {
        return Err(Error::ZeroViscosity(params.viscosity));
    }
    step_all(params, control, StepRule::Viscous)
}

/// Solve the rate-independent law (`z <= 0`, `rate >= 0`, `<z, rate> = 0`).
pub fn solve_rate_independent(
    params: &ModelParams,
    control: &Trajectory,
) -> Result<ForwardSolution> {
    validate_inputs(params, control)?;
    step_all(params, control, StepRule::RateIndependent)
}

/// Dispatch on the viscosity: positive runs the viscous law, zero the
/// rate-independent one.
pub fn solve(params: &ModelParams, control: &Trajectory) -> Result<ForwardSolution> {
    if params.is_viscous() {
        solve_viscous(params, control)
    } else {
        solve_rate_independent(params, control)
    }
}

enum StepRule {
    Viscous,
    RateIndependent,
}

fn step_all(params: &ModelParams, control: &Trajectory, rule: StepRule) -> Result<ForwardSolution> {
    let grid = control.grid();
    let dim = params.dim();
    let dt = grid.dt();
    let a = params.stiffness;
    let eps = params.viscosity;

    let mut state = Trajectory::zeros(grid, dim);
    let mut force = Trajectory::zeros(grid, dim);
    let mut hist = Trajectory::zeros(grid, dim);
    hist.node_mut(0).copy_from_slice(&params.initial_history);

    for i in 0..dim {
        let z0 = control.at(0, i) - params.threshold.eval(hist.at(0, i));
        force.set(0, i, z0);
    }

    for k in 0..grid.intervals() {
        for i in 0..dim {
            let w = control.at(k + 1, i) - params.threshold.eval(hist.at(k, i));
            let q = state.at(k, i);
            let q_next = if w - a * q <= 0.0 {
                q
            } else {
                match rule {
                    // Implicit step of eps * qdot = w - a * q_next.
                    StepRule::Viscous => (q + dt / eps * w) / (1.0 + a * dt / eps),
                    // Smallest value with w - a * q_next <= 0.
                    StepRule::RateIndependent => w / a,
                }
            };
            state.set(k + 1, i, q_next);
            force.set(k + 1, i, w - a * q_next);
        }
        for i in 0..dim {
            let inc = 0.5 * dt * (state.at(k, i) + state.at(k + 1, i));
            let h = hist.at(k, i) + inc;
            hist.set(k + 1, i, h);
        }
    }

    let rate = state.rate();
    let solution = ForwardSolution {
        energy_residual: Trajectory::zeros(grid, 1),
        state,
        rate,
        driving_force: force,
        history: hist,
    };
    let residual = energy_balance_residual(&solution, control, params)?;
    Ok(ForwardSolution {
        energy_residual: residual,
        ..solution
    })
}

/// Cumulative energy-balance residual, one scalar per node:
///
/// `r_m = | D_m + V_m + E_m + W_m |` with
///
/// * `D_m`: trapezoid integral over `[0, t_m]` of `<kappa(H(q)), rate>`
///   (dissipated work),
/// * `V_m`: `viscosity *` integral of `|rate|^2` (viscous dissipation),
/// * `E_m`: stored energy `a/2 |q(t_m)|^2 - <l(t_m), q(t_m)>`,
/// * `W_m`: trapezoid integral of `<dl/dt, q>` (work fed by the moving
///   load, with its sign so that the exact balance is zero).
///
/// A first-order scheme leaves an `O(dt)` residual; the decay is asserted in
/// the integration tests.
pub fn energy_balance_residual(
    solution: &ForwardSolution,
    control: &Trajectory,
    params: &ModelParams,
) -> Result<Trajectory> {
    let grid = control.grid();
    let dim = params.dim();
    let dt = grid.dt();
    let mut out = Trajectory::zeros(grid, 1);

    let kappa_at = |k: usize, i: usize| params.threshold.eval(solution.history.at(k, i));

    let mut dissipated = 0.0;
    let mut viscous = 0.0;
    let mut load_work = 0.0;
    // q(0) = 0 makes the stored-energy and load terms vanish at m = 0.
    out.set(0, 0, 0.0);
    for k in 0..grid.intervals() {
        for i in 0..dim {
            let dq = solution.state.at(k + 1, i) - solution.state.at(k, i);
            dissipated += 0.5 * (kappa_at(k, i) + kappa_at(k + 1, i)) * dq;
            viscous += params.viscosity * dq * dq / dt;
            let dl = control.at(k + 1, i) - control.at(k, i);
            load_work += 0.5 * dl * (solution.state.at(k, i) + solution.state.at(k + 1, i));
        }
        let stored = crate::model::stored_energy(
            solution.state.node(k + 1),
            control.node(k + 1),
            params.stiffness,
        );
        let r = dissipated + viscous + stored + load_work;
        out.set(k + 1, 0, r.abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{norms, Degradation, TimeGrid};
    use proptest::prelude::*;

    /// Constant load above a constant threshold: the viscous state follows
    /// `q(t) = 1 - exp(-t / eps)` (stiffness 1, threshold 1, load 2).
    fn exponential_scenario(n: usize) -> (ModelParams, Trajectory) {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: 0.1,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 1.0 },
        };
        let control = Trajectory::constant(grid, &[2.0]);
        (params, control)
    }

    /// Ramp load against a constant threshold: the rate-independent state is
    /// the scalar play `q(t) = max(0, t - 0.5) / 2` (stiffness 2,
    /// threshold 0.5, load t, horizon 2).
    fn play_scenario(n: usize) -> (ModelParams, Trajectory) {
        let grid = TimeGrid::new(2.0, n).unwrap();
        let params = ModelParams {
            stiffness: 2.0,
            viscosity: 0.0,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 0.5 },
        };
        let control = Trajectory::scalar_from_fn(grid, |t| t);
        (params, control)
    }

    #[test]
    fn viscous_solution_matches_the_exponential() {
        let (params, control) = exponential_scenario(1000);
        let sol = solve_viscous(&params, &control).unwrap();
        let grid = control.grid();
        let mut worst = 0.0_f64;
        for k in 0..grid.nodes() {
            let exact = 1.0 - (-grid.node(k) / params.viscosity).exp();
            worst = worst.max((sol.state.at(k, 0) - exact).abs());
        }
        // First-order implicit stepping: error about dt / (2 eps e).
        assert!(worst < 2.5e-3, "sup error {worst}");
        assert!(worst > 1e-5, "suspiciously exact: {worst}");
        // Value frozen from the closed form at t = 0.5.
        let mid = sol.state.at(500, 0);
        assert!((mid - 0.993262).abs() < 2e-3, "q(0.5) = {mid}");
    }

    #[test]
    fn viscous_rate_law_holds_exactly_in_step() {
        let (params, control) = exponential_scenario(64);
        let sol = solve_viscous(&params, &control).unwrap();
        for k in 0..control.grid().intervals() {
            let z = sol.driving_force.at(k + 1, 0);
            let lhs = params.viscosity * sol.rate.at(k, 0);
            assert!(
                (lhs - z.max(0.0)).abs() < 1e-12,
                "interval {k}: eps*rate = {lhs}, max(z,0) = {}",
                z.max(0.0)
            );
        }
    }

    #[test]
    fn play_solution_matches_the_closed_form() {
        let (params, control) = play_scenario(2000);
        let sol = solve_rate_independent(&params, &control).unwrap();
        let grid = control.grid();
        for k in 0..grid.nodes() {
            let t = grid.node(k);
            let exact = (t - 0.5).max(0.0) / 2.0;
            assert!(
                (sol.state.at(k, 0) - exact).abs() < 1e-12,
                "node {k}: {} vs {exact}",
                sol.state.at(k, 0)
            );
        }
        assert!((sol.state.terminal()[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rate_independent_run_is_feasible_and_complementary() {
        let (params, control) = play_scenario(500);
        let sol = solve_rate_independent(&params, &control).unwrap();
        let grid = control.grid();
        for k in 0..grid.nodes() {
            assert!(sol.driving_force.at(k, 0) <= FEASIBILITY_TOL);
        }
        for k in 0..grid.intervals() {
            let dq = sol.state.at(k + 1, 0) - sol.state.at(k, 0);
            let prod = dq * sol.driving_force.at(k + 1, 0);
            assert!(prod.abs() < 1e-14, "interval {k}: product {prod}");
        }
    }

    #[test]
    fn state_is_monotone_for_arbitrary_loads() {
        let grid = TimeGrid::new(3.0, 300).unwrap();
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: 0.0,
            initial_history: vec![0.5],
            threshold: Degradation::Saturating {
                base: 0.8,
                gain: 0.4,
            },
        };
        let control = Trajectory::scalar_from_fn(grid, |t| (3.0 * t).sin() * 2.0);
        let sol = solve_rate_independent(&params, &control).unwrap();
        for k in 0..grid.intervals() {
            assert!(sol.state.at(k + 1, 0) >= sol.state.at(k, 0));
        }
    }

    #[test]
    fn constant_threshold_runs_are_reparameterization_invariant() {
        // Same node loads on stretched horizons: the rate-independent update
        // only sees node values when the threshold ignores history, so the
        // states agree bitwise.
        let n = 400;
        let (params, control) = play_scenario(n);
        let reference = solve_rate_independent(&params, &control).unwrap();
        for &stretch in &[2.0, 0.37, 7.3] {
            let grid = TimeGrid::new(2.0 * stretch, n).unwrap();
            let mut warped = Trajectory::zeros(grid, 1);
            for k in 0..grid.nodes() {
                warped.set(k, 0, control.at(k, 0));
            }
            let sol = solve_rate_independent(&params, &warped).unwrap();
            assert_eq!(
                sol.state.values(),
                reference.state.values(),
                "stretch {stretch} changed the state"
            );
        }
    }

    #[test]
    fn viscous_solutions_converge_to_the_rate_independent_one() {
        let (params0, control) = play_scenario(2000);
        let reference = solve_rate_independent(&params0, &control).unwrap();
        let mut previous = f64::INFINITY;
        for &eps in &[1e-1, 1e-2, 1e-3, 1e-4] {
            let params = params0.with_viscosity(eps);
            let sol = solve_viscous(&params, &control).unwrap();
            let diff = sol.state.sub(&reference.state).unwrap();
            let dist = norms::sup_norm(&diff);
            assert!(
                dist <= previous + 1e-15,
                "distance grew from {previous} to {dist} at eps = {eps}"
            );
            previous = dist;
        }
        assert!(previous < 1e-3, "distance at eps = 1e-4 is {previous}");
    }

    #[test]
    fn solution_distance_is_load_lipschitz_uniformly_in_viscosity() {
        let grid = TimeGrid::new(1.0, 800).unwrap();
        let base = ModelParams {
            stiffness: 1.0,
            viscosity: 0.1,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 0.5 },
        };
        let l1 = Trajectory::scalar_from_fn(grid, |t| 1.5 * t);
        let l2 = Trajectory::scalar_from_fn(grid, |t| 1.5 * t + 0.2 * (3.0 * t).sin());
        let d_control = l2.sub(&l1).unwrap();
        let w11 = norms::w11_norm(&d_control);
        let mut ratios = Vec::new();
        for &eps in &[1e-1, 1e-2, 1e-3, 1e-4] {
            let params = base.with_viscosity(eps);
            let s1 = solve_viscous(&params, &l1).unwrap();
            let s2 = solve_viscous(&params, &l2).unwrap();
            let diff = s2.state.sub(&s1.state).unwrap();
            ratios.push(norms::sup_norm(&diff) / w11);
        }
        // The stability constant must not blow up as the viscosity vanishes.
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(max < 2.0, "stability ratios {ratios:?}");
    }

    #[test]
    fn energy_residual_is_small_and_first_order() {
        let mut sups = Vec::new();
        for &n in &[100_usize, 1000, 10000] {
            let (params, control) = exponential_scenario(n);
            let sol = solve_viscous(&params, &control).unwrap();
            let sup = norms::sup_norm(&sol.energy_residual);
            let dt = control.grid().dt();
            let bound = 5.0 * dt * (1.0 + norms::sup_norm(&control).powi(2));
            assert!(sup <= bound, "n = {n}: residual {sup} > bound {bound}");
            sups.push(sup);
        }
        let r1 = sups[0] / sups[1];
        let r2 = sups[1] / sups[2];
        assert!(
            (5.0..20.0).contains(&r1) && (5.0..20.0).contains(&r2),
            "decay ratios {r1} and {r2} are not first order"
        );
    }

    #[test]
    fn zero_viscosity_is_rejected_by_the_viscous_solver() {
        let (params, control) = play_scenario(10);
        assert!(matches!(
            solve_viscous(&params, &control),
            Err(Error::ZeroViscosity(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rate_independent_invariants_hold_for_random_loads(
            nodes in proptest::collection::vec(-2.0..2.0f64, 41),
            stiffness in 0.5..4.0f64,
            threshold in 0.1..1.5f64,
            y0 in 0.0..1.0f64,
        ) {
            let grid = TimeGrid::new(1.0, 40).unwrap();
            let mut vals = nodes;
            vals[0] = 0.0;
            let control = Trajectory::from_values(grid, 1, vals).unwrap();
            let params = ModelParams {
                stiffness,
                viscosity: 0.0,
                initial_history: vec![y0],
                threshold: Degradation::Saturating { base: threshold, gain: threshold * 0.5 },
            };
            let sol = solve_rate_independent(&params, &control).unwrap();
            let sup_l = norms::sup_norm(&control);
            let tol = complementarity_tol(grid.dt(), sup_l);
            for k in 0..grid.intervals() {
                // Monotone, feasible, complementary.
                prop_assert!(sol.state.at(k + 1, 0) >= sol.state.at(k, 0));
                prop_assert!(sol.driving_force.at(k + 1, 0) <= FEASIBILITY_TOL);
                let dq = sol.state.at(k + 1, 0) - sol.state.at(k, 0);
                prop_assert!((dq * sol.driving_force.at(k + 1, 0)).abs() <= tol);
            }
        }

        #[test]
        fn viscous_state_is_monotone_and_obeys_the_rate_law(
            nodes in proptest::collection::vec(-2.0..2.0f64, 33),
            eps in 1e-3..0.5f64,
            stiffness in 0.5..4.0f64,
        ) {
            let grid = TimeGrid::new(1.0, 32).unwrap();
            let mut vals = nodes;
            vals[0] = 0.0;
            let control = Trajectory::from_values(grid, 1, vals).unwrap();
            let params = ModelParams {
                stiffness,
                viscosity: eps,
                initial_history: vec![0.0],
                threshold: Degradation::Constant { value: 0.3 },
            };
            let sol = solve_viscous(&params, &control).unwrap();
            for k in 0..grid.intervals() {
                prop_assert!(sol.state.at(k + 1, 0) >= sol.state.at(k, 0));
                let z = sol.driving_force.at(k + 1, 0);
                let lhs = eps * sol.rate.at(k, 0);
                prop_assert!((lhs - z.max(0.0)).abs() < 1e-9);
            }
        }
    }
}
