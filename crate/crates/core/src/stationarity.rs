//! Independent verification of the first-order optimality systems.
//!
//! Both entry points take raw trajectories — control, state, costate,
//! multiplier — and rebuild every quantity they test from those, sharing
//! nothing with the forward/adjoint integrators beyond the norm and Riesz
//! utilities. The driving force is recomputed from `(l, q)`, the weighted
//! backward integral of the multiplier is re-accumulated with its own
//! quadrature, and the weak adjoint equation is tested against the nodal
//! hat-function basis (all test functions vanish at `t = 0`; the costate is
//! never differentiated — derivatives land on the test functions).
//!
//! [`check_viscous`] verifies the optimality system of the viscous problem:
//! weak adjoint equation, the multiplier sign rules on each force-labeled
//! interval, and the gradient identity in the dual `H1` norm.
//!
//! [`check_limit`] verifies the vanishing-viscosity limit system on a
//! candidate tuple (typically the smallest-viscosity sweep stage): weak
//! adjoint equation, state complementarity `rate * costate = 0`, multiplier
//! complementarity `<multiplier, force * hat> = 0`, the gradient identity,
//! and — when threshold profile and running cost are both affine — the
//! sign/bracketing conditions that upgrade the system to strong
//! stationarity when every component ends at or above its target.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, norms, IntervalField, ModelParams, Objective, Trajectory};

/// Outcome of a stationarity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// Full sign structure verified (viscous system, or affine limit system
    /// with every component ending at or above its target).
    #[serde(rename = "strong")]
    Strong,
    /// Limit system holds with the same-sign coupling of costate and
    /// multiplier, but the stronger sign structure is not available.
    #[serde(rename = "C")]
    CStationary,
    /// Residuals exceed the threshold, or the scenario is outside the
    /// affine class where the sign conditions are proved.
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Strong => "strong",
            Classification::CStationary => "C",
            Classification::Inconclusive => "inconclusive",
        })
    }
}

/// Violations of the affine-case sign conditions (limit check only).
#[derive(Debug, Clone, Serialize)]
pub struct AffineSignChecks {
    /// Max distance of any costate sample from the order interval spanned
    /// by `0` and the component's terminal misfit.
    pub costate_bracket: f64,
    /// Max violation of the one-signedness of the multiplier's hat
    /// pairings, with the sign dictated by the terminal misfit.
    pub pairing_sign: f64,
    /// Max negative part of `costate * pairing` products — the same-sign
    /// coupling that defines C-stationarity.
    pub same_sign: f64,
    /// For components whose terminal misfit vanishes, the costate and
    /// multiplier must vanish too; max observed magnitude over those.
    pub pinned_violation: f64,
    /// Components with vanishing terminal misfit.
    pub pinned_components: Vec<usize>,
    /// True when every component ends at or above its target — the gate for
    /// the `strong` classification. Tested against a tolerance built from
    /// the state and control sups alone: the costate and multiplier can be
    /// legitimately large in the terminal layer, and letting them widen
    /// this gate would wave through genuinely unattained targets.
    pub terminal_dominates: bool,
}

/// Residuals of an optimality system, all nonnegative, plus the
/// classification they support.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    /// Weak adjoint-equation residual over the hat basis (interior rows in
    /// density units; terminal row tests the transversality condition).
    pub adjoint_residual: f64,
    /// Viscous: max violation of the interval sign rules. Limit: force
    /// feasibility violation together with the affine sign checks.
    pub sign_violation: f64,
    /// Max interval-wise |rate * costate| (left-node costate).
    pub complementarity_xi: f64,
    /// Max hat-pairing density |force * multiplier| per component.
    pub complementarity_lambda: f64,
    /// Dual `H1` norm of the gradient identity defect, via the Riesz solve.
    pub gradient_residual: f64,
    /// `L2` norm of the multiplier; reported, never asserted bounded.
    pub multiplier_l2: f64,
    /// Max interval-wise |multiplier * costate|; informational only.
    pub mstat_gap: f64,
    /// `1 + sup|q| + sup|xi| + sup|lam| + sup|l|`.
    pub scale: f64,
    /// Internal pass threshold `10 * max(dt, 1e-6) * scale`.
    pub threshold: f64,
    /// Present when both threshold profile and running cost are affine.
    pub affine: Option<AffineSignChecks>,
    pub classification: Classification,
}

/// Max interval-wise |multiplier * costate| — the gap to M-stationarity.
/// Reported for information; no variational formulation is asserted.
pub fn mstat_gap_probe(costate: &Trajectory, multiplier: &IntervalField) -> Result<f64> {
    if costate.grid() != multiplier.grid() || costate.dim() != multiplier.dim() {
        return Err(Error::GridMismatch);
    }
    let mut gap: f64 = 0.0;
    for k in 0..costate.grid().intervals() {
        for i in 0..costate.dim() {
            gap = gap.max((multiplier.at(k, i) * costate.at(k, i)).abs());
        }
    }
    Ok(gap)
}

/// Verify the viscous optimality system on raw trajectories.
///
/// Violations are reported, never raised; errors signal structural misuse
/// (mismatched grids, nonviscous parameters, non-finite data).
pub fn check_viscous(
    control: &Trajectory,
    state: &Trajectory,
    costate: &Trajectory,
    multiplier: &IntervalField,
    params: &ModelParams,
    objective: &Objective,
    force_band: f64,
) -> Result<StationarityReport> {
    let pieces = Pieces::assemble(control, state, costate, multiplier, params, objective)?;
    if !params.is_viscous() {
        return Err(Error::ZeroViscosity(params.viscosity));
    }
    let eps = params.viscosity;

    // Interval sign rules: multiplier = costate/eps where the force is
    // positive, zero where negative, anywhere between where the force sits
    // in the band (the discrete trace of a measure-zero crossing).
    let mut sign_violation: f64 = 0.0;
    for k in 0..pieces.intervals {
        for i in 0..pieces.dim {
            let force = pieces.force.at(k + 1, i);
            let lam = multiplier.at(k, i);
            let matched = costate.at(k, i) / eps;
            let v = if force > force_band {
                (lam - matched).abs()
            } else if force < -force_band {
                lam.abs()
            } else {
                order_interval_distance(lam, 0.0, matched)
            };
            sign_violation = sign_violation.max(v);
        }
    }

    let passes = pieces.adjoint_residual <= pieces.threshold
        && sign_violation <= pieces.threshold
        && pieces.gradient_residual <= pieces.threshold;
    let classification = if passes {
        Classification::Strong
    } else {
        Classification::Inconclusive
    };

    Ok(pieces.into_report(sign_violation, None, classification))
}

/// Verify the vanishing-viscosity limit system on a candidate tuple
/// (control and state from the rate-independent problem, costate and
/// multiplier inherited from the smallest-viscosity stage).
pub fn check_limit(
    control: &Trajectory,
    state: &Trajectory,
    costate: &Trajectory,
    multiplier: &IntervalField,
    params: &ModelParams,
    objective: &Objective,
    force_band: f64,
) -> Result<StationarityReport> {
    let pieces = Pieces::assemble(control, state, costate, multiplier, params, objective)?;

    // Feasibility of the recomputed force: nonpositive up to the band.
    let mut feasibility: f64 = 0.0;
    for k in 0..pieces.nodes {
        for i in 0..pieces.dim {
            feasibility = feasibility.max(pieces.force.at(k, i) - force_band);
        }
    }
    feasibility = feasibility.max(0.0);

    let is_affine = params.threshold.is_affine() && objective.is_affine_running();
    let affine = is_affine.then(|| pieces.affine_sign_checks());

    let base_pass = pieces.adjoint_residual <= pieces.threshold
        && pieces.gradient_residual <= pieces.threshold
        && pieces.complementarity_xi <= pieces.threshold
        && pieces.complementarity_lambda <= pieces.threshold
        && feasibility <= pieces.threshold;

    let (sign_violation, classification) = match &affine {
        None => (feasibility, Classification::Inconclusive),
        Some(checks) => {
            let sign = feasibility
                .max(checks.costate_bracket)
                .max(checks.pairing_sign)
                .max(checks.pinned_violation);
            let same_sign_ok = checks.same_sign <= pieces.threshold;
            let strong = base_pass
                && same_sign_ok
                && checks.terminal_dominates
                && checks.costate_bracket <= pieces.threshold
                && checks.pairing_sign <= pieces.threshold
                && checks.pinned_violation <= pieces.threshold;
            let class = if strong {
                Classification::Strong
            } else if base_pass && same_sign_ok {
                Classification::CStationary
            } else {
                Classification::Inconclusive
            };
            (sign, class)
        }
    };

    Ok(pieces.into_report(sign_violation, affine, classification))
}

/// Everything both checks share, rebuilt from the raw tuple.
struct Pieces {
    nodes: usize,
    intervals: usize,
    dim: usize,
    force: Trajectory,
    /// Hat-pairing densities of the multiplier: entry `(j - 1, i)` holds the
    /// pairing with the hat at node `j`, divided by `dt`.
    pairing_density: Vec<f64>,
    misfit: Vec<f64>,
    costate_sup: Vec<f64>,
    costate_min: Vec<f64>,
    costate_max: Vec<f64>,
    adjoint_residual: f64,
    complementarity_xi: f64,
    complementarity_lambda: f64,
    gradient_residual: f64,
    multiplier_l2: f64,
    mstat_gap: f64,
    scale: f64,
    threshold: f64,
    primal_threshold: f64,
}

impl Pieces {
    fn assemble(
        control: &Trajectory,
        state: &Trajectory,
        costate: &Trajectory,
        multiplier: &IntervalField,
        params: &ModelParams,
        objective: &Objective,
    ) -> Result<Self> {
        params.validate()?;
        objective.validate(params.dim())?;
        let grid = state.grid();
        let dim = params.dim();
        for t in [control, state, costate] {
            if t.grid() != grid || multiplier.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if t.dim() != dim || multiplier.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.dim().min(multiplier.dim()),
                });
            }
            if !t.is_finite() {
                return Err(Error::NonFinite("stationarity input"));
            }
        }
        if multiplier.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("multiplier"));
        }

        let nodes = grid.nodes();
        let intervals = grid.intervals();
        let dt = grid.dt();
        let alpha = params.stiffness;

        let history = model::history(state, &params.initial_history)?;

        // In-step force: node k+1 pairs the current state and control with
        // the history at the left node, matching the forward convention;
        // node 0 is the initial force itself.
        let mut force = Trajectory::zeros(grid, dim);
        for i in 0..dim {
            let z0 = control.at(0, i) - alpha * state.at(0, i)
                - params.threshold.eval(params.initial_history[i]);
            force.set(0, i, z0);
        }
        for k in 0..intervals {
            for i in 0..dim {
                let z = control.at(k + 1, i) - alpha * state.at(k + 1, i)
                    - params.threshold.eval(history.at(k, i));
                force.set(k + 1, i, z);
            }
        }

        // Hat pairings of the multiplier in density units: interior hats
        // average the two adjacent intervals, the terminal half-hat sees
        // only the last one.
        let mut pairing_density = vec![0.0; intervals * dim];
        for j in 1..=intervals {
            for i in 0..dim {
                let left = multiplier.at(j - 1, i);
                let right = if j < intervals { multiplier.at(j, i) } else { 0.0 };
                pairing_density[(j - 1) * dim + i] = 0.5 * (left + right);
            }
        }

        let misfit = objective.terminal_misfit(state);
        let scale = 1.0
            + norms::sup_norm(state)
            + norms::sup_norm(costate)
            + norms::interval_sup_norm(multiplier)
            + norms::sup_norm(control);
        let threshold = 10.0 * dt.max(1e-6) * scale;
        // Misfit comparisons are primal statements about the state; they get
        // a tolerance free of the dual sups, which concentrate like 1/dt in
        // the terminal layer and would otherwise swallow real misfits.
        let primal_threshold =
            10.0 * dt.max(1e-6) * (1.0 + norms::sup_norm(state) + norms::sup_norm(control));

        // Weak adjoint rows. The weighted backward integral of the
        // multiplier is re-accumulated with trapezoid weights on the nodal
        // slope of the threshold profile.
        let source = objective.running.gradient(state);
        let mut weighted = vec![0.0; nodes * dim];
        for k in (0..intervals).rev() {
            for i in 0..dim {
                let slope_avg = 0.5
                    * (params.threshold.deriv(history.at(k, i))
                        + params.threshold.deriv(history.at(k + 1, i)));
                weighted[k * dim + i] =
                    weighted[(k + 1) * dim + i] + dt * multiplier.at(k, i) * slope_avg;
            }
        }
        let mut adjoint_residual: f64 = 0.0;
        for j in 1..intervals {
            for i in 0..dim {
                let row = 0.5 * (costate.at(j - 1, i) - costate.at(j + 1, i))
                    + 0.5 * alpha * dt * (multiplier.at(j - 1, i) + multiplier.at(j, i))
                    + dt * weighted[j * dim + i]
                    - dt * source.at(j, i);
                adjoint_residual = adjoint_residual.max(row.abs() / dt);
            }
        }
        for i in 0..dim {
            let n = intervals;
            let row = 0.5 * (costate.at(n - 1, i) + costate.at(n, i))
                + 0.5 * alpha * dt * multiplier.at(n - 1, i)
                + 0.5 * dt * weighted[n * dim + i]
                - 0.5 * dt * source.at(n, i)
                - misfit[i];
            adjoint_residual = adjoint_residual.max(row.abs());
        }

        // State complementarity, multiplier complementarity, M-gap.
        let rate = state.rate();
        let mut complementarity_xi: f64 = 0.0;
        for k in 0..intervals {
            for i in 0..dim {
                complementarity_xi =
                    complementarity_xi.max((rate.at(k, i) * costate.at(k, i)).abs());
            }
        }
        let mut complementarity_lambda: f64 = 0.0;
        for j in 1..=intervals {
            for i in 0..dim {
                let v = force.at(j, i) * pairing_density[(j - 1) * dim + i];
                complementarity_lambda = complementarity_lambda.max(v.abs());
            }
        }
        let mstat_gap = mstat_gap_probe(costate, multiplier)?;

        // Gradient identity, assembled here from scratch: hat pairings of
        // the multiplier plus the `H1` pairings of the control (and of the
        // anchored difference, when one is set), lifted through the Riesz
        // solve and measured in the `H1` norm.
        let anchored = match &objective.proximal_anchor {
            Some(anchor) => Some(control.sub(anchor)?),
            None => None,
        };
        let mut load = vec![0.0; nodes * dim];
        for j in 1..=intervals {
            for i in 0..dim {
                let mut entry = dt * pairing_density[(j - 1) * dim + i];
                entry += h1_pairing_row(control, j, i);
                if let Some(diff) = &anchored {
                    entry += h1_pairing_row(diff, j, i);
                }
                load[j * dim + i] = entry;
            }
        }
        let lift = linalg::h1_riesz(grid, dim, &load)?;
        let gradient_residual = norms::h1_norm(&lift);

        let mut costate_sup = vec![0.0f64; dim];
        let mut costate_min = vec![f64::INFINITY; dim];
        let mut costate_max = vec![f64::NEG_INFINITY; dim];
        for k in 0..nodes {
            for i in 0..dim {
                let v = costate.at(k, i);
                costate_sup[i] = costate_sup[i].max(v.abs());
                costate_min[i] = costate_min[i].min(v);
                costate_max[i] = costate_max[i].max(v);
            }
        }

        Ok(Self {
            nodes,
            intervals,
            dim,
            force,
            pairing_density,
            misfit,
            costate_sup,
            costate_min,
            costate_max,
            adjoint_residual,
            complementarity_xi,
            complementarity_lambda,
            gradient_residual,
            multiplier_l2: norms::interval_l2_norm(multiplier),
            mstat_gap,
            scale,
            threshold,
            primal_threshold,
        })
    }

    /// Affine-case sign conditions, per component.
    fn affine_sign_checks(&self) -> AffineSignChecks {
        let mut bracket: f64 = 0.0;
        let mut pairing_sign: f64 = 0.0;
        let mut same_sign: f64 = 0.0;
        let mut pinned_violation: f64 = 0.0;
        let mut pinned_components = Vec::new();
        let mut terminal_dominates = true;

        for i in 0..self.dim {
            let misfit = self.misfit[i];
            if misfit < -self.primal_threshold {
                terminal_dominates = false;
            }
            let mut pairing_min = f64::INFINITY;
            let mut pairing_max = f64::NEG_INFINITY;
            let mut pairing_sup: f64 = 0.0;
            for j in 0..self.intervals {
                let p = self.pairing_density[j * self.dim + i];
                pairing_min = pairing_min.min(p);
                pairing_max = pairing_max.max(p);
                pairing_sup = pairing_sup.max(p.abs());
            }

            if misfit.abs() <= self.primal_threshold {
                // Attained target: costate and multiplier must vanish.
                pinned_components.push(i);
                pinned_violation = pinned_violation.max(self.costate_sup[i]).max(pairing_sup);
                continue;
            }

            // Bracketing of the costate between 0 and the misfit.
            let lo = misfit.min(0.0);
            let hi = misfit.max(0.0);
            let below = (lo - self.costate_min[i]).max(0.0);
            let above = (self.costate_max[i] - hi).max(0.0);
            bracket = bracket.max(below).max(above);

            // One-signedness of the pairings, oriented by the misfit.
            let sign_defect = if misfit > 0.0 {
                (-pairing_min).max(0.0)
            } else {
                pairing_max.max(0.0)
            };
            pairing_sign = pairing_sign.max(sign_defect);

            // Same-sign products costate * pairing; the worst product over
            // the rectangle of ranges is attained at a corner.
            let products = [
                self.costate_min[i] * pairing_min,
                self.costate_min[i] * pairing_max,
                self.costate_max[i] * pairing_min,
                self.costate_max[i] * pairing_max,
            ];
            let worst = products.iter().cloned().fold(f64::INFINITY, f64::min);
            same_sign = same_sign.max((-worst).max(0.0));
        }

        AffineSignChecks {
            costate_bracket: bracket,
            pairing_sign,
            same_sign,
            pinned_violation,
            pinned_components,
            terminal_dominates,
        }
    }

    fn into_report(
        self,
        sign_violation: f64,
        affine: Option<AffineSignChecks>,
        classification: Classification,
    ) -> StationarityReport {
        StationarityReport {
            adjoint_residual: self.adjoint_residual,
            sign_violation,
            complementarity_xi: self.complementarity_xi,
            complementarity_lambda: self.complementarity_lambda,
            gradient_residual: self.gradient_residual,
            multiplier_l2: self.multiplier_l2,
            mstat_gap: self.mstat_gap,
            scale: self.scale,
            threshold: self.threshold,
            affine,
            classification,
        }
    }
}

/// Row `j` of the `H1` pairing `(u, hat_j)`: trapezoid mass plus
/// forward-difference stiffness (rows `1..=N`; row 0 is never tested).
fn h1_pairing_row(u: &Trajectory, j: usize, i: usize) -> f64 {
    let grid = u.grid();
    let dt = grid.dt();
    let n = grid.intervals();
    if j < n {
        dt * u.at(j, i) + (2.0 * u.at(j, i) - u.at(j - 1, i) - u.at(j + 1, i)) / dt
    } else {
        0.5 * dt * u.at(n, i) + (u.at(n, i) - u.at(n - 1, i)) / dt
    }
}

/// Distance of `x` from the closed interval spanned by `a` and `b`,
/// whichever order they come in.
fn order_interval_distance(x: f64, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::solve_adjoint;
    use crate::forward::{solve_rate_independent, solve_viscous};
    use crate::model::{Degradation, RunningCost, TimeGrid};
    use crate::optimizer::{minimize_viscous, OptimizeOptions};
    use crate::sensitivity::default_band;
    use proptest::prelude::*;

    fn zero_tuple(
        grid: TimeGrid,
    ) -> (Trajectory, Trajectory, Trajectory, IntervalField) {
        (
            Trajectory::zeros(grid, 1),
            Trajectory::zeros(grid, 1),
            Trajectory::zeros(grid, 1),
            IntervalField::zeros(grid, 1),
        )
    }

    #[test]
    fn all_zero_tuple_is_strong_for_both_checks() {
        let grid = TimeGrid::new(1.0, 40).unwrap();
        let (control, state, costate, multiplier) = zero_tuple(grid);
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: 0.1,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 0.3 },
        };
        let objective = Objective::new(RunningCost::Zero, vec![0.0]);

        let viscous = check_viscous(
            &control, &state, &costate, &multiplier, &params, &objective, 1e-8,
        )
        .unwrap();
        assert_eq!(viscous.classification, Classification::Strong);
        assert_eq!(viscous.adjoint_residual, 0.0);
        assert_eq!(viscous.sign_violation, 0.0);
        assert_eq!(viscous.gradient_residual, 0.0);
        assert_eq!(viscous.complementarity_xi, 0.0);
        assert_eq!(viscous.complementarity_lambda, 0.0);
        assert_eq!(viscous.mstat_gap, 0.0);

        let limit_params = params.with_viscosity(0.0);
        let limit = check_limit(
            &control, &state, &costate, &multiplier, &limit_params, &objective, 1e-8,
        )
        .unwrap();
        assert_eq!(limit.classification, Classification::Strong);
        let affine = limit.affine.expect("constant profile and zero cost are affine");
        assert_eq!(affine.pinned_components, vec![0]);
        assert_eq!(affine.pinned_violation, 0.0);
        assert!(affine.terminal_dominates);
    }

    #[test]
    fn hand_built_limit_tuples_classify_by_terminal_side() {
        // Inactive exact solution: force = -kappa < 0 everywhere, so the
        // multiplier vanishes and the costate is the constant misfit. The
        // grid is fine enough that a misfit of 0.2 sits far outside the
        // pinning band 10 dt scale.
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: 0.0,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 0.4 },
        };
        let control = Trajectory::zeros(grid, 1);
        let state = Trajectory::zeros(grid, 1);
        let multiplier = IntervalField::zeros(grid, 1);

        // Terminal state above target: bracketing holds, strong.
        let objective = Objective::new(RunningCost::Zero, vec![-0.2]);
        let costate = Trajectory::constant(grid, &[0.2]);
        let report = check_limit(
            &control, &state, &costate, &multiplier, &params, &objective, 1e-8,
        )
        .unwrap();
        assert_eq!(report.classification, Classification::Strong);
        assert_eq!(report.adjoint_residual, 0.0);
        assert_eq!(report.affine.as_ref().unwrap().costate_bracket, 0.0);

        // Terminal state below target: only the same-sign coupling remains.
        let objective = Objective::new(RunningCost::Zero, vec![0.2]);
        let costate = Trajectory::constant(grid, &[-0.2]);
        let report = check_limit(
            &control, &state, &costate, &multiplier, &params, &objective, 1e-8,
        )
        .unwrap();
        assert_eq!(report.classification, Classification::CStationary);
        assert_eq!(report.affine.as_ref().unwrap().same_sign, 0.0);
        assert!(!report.affine.as_ref().unwrap().terminal_dominates);
    }

    #[test]
    fn converged_viscous_optimum_passes() {
        let grid = TimeGrid::new(1.0, 150).unwrap();
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: 0.05,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 0.3 },
        };
        let start = Trajectory::scalar_from_fn(grid, |t| 0.8 * t);
        let objective = Objective::new(
            RunningCost::Tracking {
                weight: 1.0,
                target: vec![0.4],
            },
            vec![0.5],
        );
        let options = OptimizeOptions {
            max_iters: 300,
            grad_tol: 1e-7,
            ..OptimizeOptions::default()
        };
        let result = minimize_viscous(&params, &start, &objective, &options).unwrap();
        assert!(result.converged);

        let report = check_viscous(
            &result.control,
            &result.forward.state,
            &result.adjoint.costate,
            &result.adjoint.multiplier,
            &params,
            &objective,
            default_band(&result.control),
        )
        .unwrap();
        assert_eq!(
            report.classification,
            Classification::Strong,
            "adjoint {} sign {} gradient {} vs threshold {}",
            report.adjoint_residual,
            report.sign_violation,
            report.gradient_residual,
            report.threshold
        );
    }

    #[test]
    fn corrupted_multiplier_is_flagged() {
        let grid = TimeGrid::new(1.0, 120).unwrap();
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: 0.1,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 0.2 },
        };
        let control = Trajectory::scalar_from_fn(grid, |t| 1.2 * t);
        let objective = Objective::new(RunningCost::Zero, vec![0.3]);
        let base = solve_viscous(&params, &control).unwrap();
        let band = default_band(&control);
        let adj = solve_adjoint(&params, &base, &objective, band).unwrap();

        let clean = check_viscous(
            &control,
            &base.state,
            &adj.costate,
            &adj.multiplier,
            &params,
            &objective,
            band,
        )
        .unwrap();

        let mut flipped = adj.multiplier.clone();
        let mut active = 0;
        for k in 0..grid.intervals() {
            if flipped.at(k, 0) != 0.0 {
                flipped.set(k, 0, -flipped.at(k, 0));
                active += 1;
            }
        }
        assert!(active > 0, "scenario never activates");

        let report = check_viscous(
            &control,
            &base.state,
            &adj.costate,
            &flipped,
            &params,
            &objective,
            band,
        )
        .unwrap();
        assert!(report.sign_violation > report.threshold);
        assert!(report.sign_violation > 10.0 * clean.sign_violation.max(1e-12));
        assert_eq!(report.classification, Classification::Inconclusive);
    }

    #[test]
    fn corrupted_costate_breaks_the_adjoint_rows() {
        let grid = TimeGrid::new(1.0, 120).unwrap();
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: 0.1,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 0.2 },
        };
        let control = Trajectory::scalar_from_fn(grid, |t| 1.2 * t);
        let objective = Objective::new(RunningCost::Zero, vec![0.3]);
        let base = solve_viscous(&params, &control).unwrap();
        let band = default_band(&control);
        let adj = solve_adjoint(&params, &base, &objective, band).unwrap();

        let mut scaled = adj.costate.clone();
        scaled.scale(2.0);
        let report = check_viscous(
            &control,
            &base.state,
            &scaled,
            &adj.multiplier,
            &params,
            &objective,
            band,
        )
        .unwrap();
        assert!(report.adjoint_residual > report.threshold);
        assert_eq!(report.classification, Classification::Inconclusive);
    }

    #[test]
    fn nonzero_multiplier_on_inactive_force_is_caught_by_complementarity() {
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let params = ModelParams {
            stiffness: 1.0,
            viscosity: 0.0,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 0.4 },
        };
        let (control, state, _, _) = zero_tuple(grid);
        let costate = Trajectory::constant(grid, &[0.2]);
        let mut multiplier = IntervalField::zeros(grid, 1);
        for k in 0..grid.intervals() {
            multiplier.set(k, 0, 0.5);
        }
        let objective = Objective::new(RunningCost::Zero, vec![-0.2]);
        let report = check_limit(
            &control, &state, &costate, &multiplier, &params, &objective, 1e-8,
        )
        .unwrap();
        // force = -0.4 while the multiplier pairing is 0.5 everywhere.
        assert!(report.complementarity_lambda > report.threshold);
        assert!(report.gradient_residual > report.threshold);
        assert_eq!(report.classification, Classification::Inconclusive);
    }

    #[test]
    fn mstat_probe_vanishes_on_disjoint_supports() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let mut costate = Trajectory::zeros(grid, 1);
        let mut multiplier = IntervalField::zeros(grid, 1);
        for k in 0..5 {
            multiplier.set(k, 0, 3.0);
        }
        for k in 6..=10 {
            costate.set(k, 0, -2.0);
        }
        assert_eq!(mstat_gap_probe(&costate, &multiplier).unwrap(), 0.0);
        assert_eq!(
            mstat_gap_probe(&costate, &IntervalField::zeros(grid, 1)).unwrap(),
            0.0
        );
        // Overlap shows up.
        costate.set(2, 0, 1.5);
        assert_eq!(mstat_gap_probe(&costate, &multiplier).unwrap(), 4.5);
    }

    #[test]
    fn limit_check_accepts_sweep_style_tuple_on_play_scenario() {
        // Drive the play scenario with a fixed (non-optimal) control and
        // feed the rate-independent state with a small-viscosity adjoint:
        // residual fields must be finite and feasibility exact, though the
        // gradient identity fails (the control is not an optimum).
        let grid = TimeGrid::new(2.0, 200).unwrap();
        let params = ModelParams {
            stiffness: 2.0,
            viscosity: 0.0,
            initial_history: vec![0.0],
            threshold: Degradation::Constant { value: 0.5 },
        };
        let control = Trajectory::scalar_from_fn(grid, |t| t);
        let limit_run = solve_rate_independent(&params, &control).unwrap();
        let viscous = params.with_viscosity(1e-3);
        let visc_run = solve_viscous(&viscous, &control).unwrap();
        let objective = Objective::new(RunningCost::Zero, vec![0.75]);
        let adj = solve_adjoint(&viscous, &visc_run, &objective, 1e-8).unwrap();

        let report = check_limit(
            &control,
            &limit_run.state,
            &adj.costate,
            &adj.multiplier,
            &params,
            &objective,
            default_band(&control),
        )
        .unwrap();
        assert!(report.sign_violation >= 0.0 && report.sign_violation.is_finite());
        assert!(report.complementarity_xi.is_finite());
        assert!(report.gradient_residual > report.threshold);
        assert_eq!(report.classification, Classification::Inconclusive);
    }

    proptest! {
        #[test]
        fn strong_classification_implies_the_weaker_conditions(
            state_vals in proptest::collection::vec(0.0f64..1.0, 9),
            costate_vals in proptest::collection::vec(-1.0f64..1.0, 9),
            multiplier_vals in proptest::collection::vec(-1.0f64..1.0, 8),
            control_vals in proptest::collection::vec(-1.0f64..1.0, 9),
            threshold_value in 0.0f64..1.0,
            target in -1.0f64..1.0,
        ) {
            let grid = TimeGrid::new(1.0, 8).unwrap();
            let state = Trajectory::from_values(grid, 1, state_vals).unwrap();
            let costate = Trajectory::from_values(grid, 1, costate_vals).unwrap();
            let multiplier = IntervalField::from_values(grid, 1, multiplier_vals).unwrap();
            let control = Trajectory::from_values(grid, 1, control_vals).unwrap();
            let params = ModelParams {
                stiffness: 1.0,
                viscosity: 0.0,
                initial_history: vec![0.0],
                threshold: Degradation::Constant { value: threshold_value },
            };
            let objective = Objective::new(RunningCost::Zero, vec![target]);
            let report = check_limit(
                &control, &state, &costate, &multiplier, &params, &objective, 1e-8,
            ).unwrap();

            for v in [
                report.adjoint_residual,
                report.sign_violation,
                report.complementarity_xi,
                report.complementarity_lambda,
                report.gradient_residual,
                report.multiplier_l2,
                report.mstat_gap,
            ] {
                prop_assert!(v >= 0.0 && v.is_finite());
            }
            if report.classification == Classification::Strong {
                let affine = report.affine.as_ref().unwrap();
                prop_assert!(affine.same_sign <= report.threshold);
                prop_assert!(report.complementarity_xi <= report.threshold);
                prop_assert!(report.complementarity_lambda <= report.threshold);
            }
        }
    }
}
