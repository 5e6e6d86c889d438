//! `rioc` — scenario-driven front end for the solvers in `rioc-core`.
//!
//! Subcommands: `simulate`, `optimize`, `sweep`, `gradcheck`, `check`.
//! Scenarios are JSON documents (see `scenario.rs`), trajectories travel as
//! CSV, reports as JSON, optional plots as static SVG. Exit codes: 0 on
//! success, 2 for validation problems, 3 for solver failures.

mod io;
mod plot;
mod scenario;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rioc_core::adjoint::{reduced_gradient, solve_adjoint};
use rioc_core::forward::{solve, solve_rate_independent, solve_viscous};
use rioc_core::model::{norms, TimeGrid, Trajectory};
use rioc_core::optimizer::{
    default_viscosity_ladder, evaluate_objective, minimize_viscous, vanishing_viscosity_sweep,
    OptimizeResult,
};
use rioc_core::sensitivity::{default_band, ActivationPattern, ZLabel};
use rioc_core::stationarity::{check_limit, check_viscous};

use scenario::{Runtime, Scenario};

#[derive(Debug)]
pub enum CliError {
    /// Bad input: unreadable files, malformed scenarios, dimension clashes.
    Validation(String),
    /// The numerics failed on valid input.
    Solver(String),
}

impl CliError {
    fn validation(message: String) -> Self {
        CliError::Validation(message)
    }

    fn solver(error: rioc_core::error::Error) -> Self {
        CliError::Solver(error.to_string())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(message) => write!(f, "{message}"),
            CliError::Solver(message) => write!(f, "solver: {message}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "rioc",
    version,
    about = "Rate-independent evolutions: simulate, optimize, sweep, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward model and write the trajectory as CSV.
    Simulate {
        scenario: PathBuf,
        /// Override the scenario viscosity (0 selects the rate-independent solver).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Output CSV path; energy residuals land next to it.
        #[arg(long)]
        out: PathBuf,
        /// Also write an SVG line chart next to the CSV.
        #[arg(long)]
        plot: bool,
    },
    /// Minimize the objective over the control and write solution + report.
    Optimize {
        scenario: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plot: bool,
    },
    /// Re-optimize along a viscosity ladder and tabulate the limit behavior.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated viscosities, strictly decreasing (default ladder otherwise).
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
        /// Restart every rung from the scenario control instead of warm-starting;
        /// rungs run in parallel, capped by RIOC_THREADS.
        #[arg(long)]
        cold: bool,
        #[arg(long)]
        plot: bool,
    },
    /// Compare the adjoint gradient against central differences.
    Gradcheck {
        scenario: PathBuf,
        /// Number of randomized directions.
        #[arg(long, default_value_t = 5)]
        directions: usize,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the stationarity system on a stored solution tuple.
    Check {
        scenario: PathBuf,
        /// Solution CSV with costate and multiplier columns (`optimize` output).
        #[arg(long)]
        solution: PathBuf,
        /// Control CSV (`optimize` writes it as `<stem>_control.csv`).
        #[arg(long)]
        control: PathBuf,
        /// Check the rate-independent limit system instead of the viscous one.
        #[arg(long)]
        limit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            epsilon,
            out,
            plot,
        } => cmd_simulate(&scenario, epsilon, &out, plot),
        Command::Optimize {
            scenario,
            epsilon,
            out,
            plot,
        } => cmd_optimize(&scenario, epsilon, &out, plot),
        Command::Sweep {
            scenario,
            eps_list,
            out,
            cold,
            plot,
        } => cmd_sweep(&scenario, eps_list, &out, cold, plot),
        Command::Gradcheck {
            scenario,
            directions,
            epsilon,
            out,
        } => cmd_gradcheck(&scenario, directions, epsilon, out.as_deref()),
        Command::Check {
            scenario,
            solution,
            control,
            limit,
            out,
        } => cmd_check(&scenario, &solution, &control, limit, out.as_deref()),
    };
    if let Err(error) = result {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}

/// `run.csv` → `run_energy.csv`, `run_control.csv`, `run_report.json`, …
fn sibling(path: &Path, suffix: &str, extension: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    path.with_file_name(format!("{stem}_{suffix}.{extension}"))
}

fn cmd_simulate(
    scenario_path: &Path,
    epsilon: Option<f64>,
    out: &Path,
    plot: bool,
) -> Result<(), CliError> {
    let runtime = Scenario::load(scenario_path)?.build(epsilon)?;
    let solution = solve(&runtime.params, &runtime.control).map_err(CliError::solver)?;
    io::write_solution_csv(out, &solution, None)?;
    io::write_energy_csv(&sibling(out, "energy", "csv"), &solution.energy_residual)?;
    if plot {
        let mut series = Vec::new();
        push_nodal_series(&mut series, &solution.state, runtime.grid, "q");
        push_nodal_series(&mut series, &solution.driving_force, runtime.grid, "z");
        plot::write_chart(
            &out.with_extension("svg"),
            "forward trajectory",
            "t",
            &series,
            false,
        )?;
    }
    let terminal = solution.state.terminal().to_vec();
    println!(
        "simulate: epsilon={} q(T)={terminal:?} -> {}",
        runtime.params.viscosity,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct IterateRow {
    objective: f64,
    gradient_norm: f64,
    step: f64,
}

#[derive(Serialize)]
struct OptimizeReport {
    epsilon: f64,
    converged: bool,
    iterations: usize,
    objective: f64,
    gradient_norm: f64,
    iterates: Vec<IterateRow>,
}

fn cmd_optimize(
    scenario_path: &Path,
    epsilon: Option<f64>,
    out: &Path,
    plot: bool,
) -> Result<(), CliError> {
    let runtime = Scenario::load(scenario_path)?.build(epsilon)?;
    if !runtime.params.is_viscous() {
        return Err(CliError::validation(
            "optimize needs a positive viscosity (set epsilon in the scenario or pass --epsilon)"
                .into(),
        ));
    }
    let result = minimize_viscous(
        &runtime.params,
        &runtime.control,
        &runtime.objective,
        &runtime.options,
    )
    .map_err(CliError::solver)?;

    io::write_solution_csv(
        out,
        &result.forward,
        Some((&result.adjoint.costate, &result.adjoint.multiplier)),
    )?;
    io::write_control_csv(&sibling(out, "control", "csv"), &result.control)?;
    io::write_energy_csv(&sibling(out, "energy", "csv"), &result.forward.energy_residual)?;
    let report = OptimizeReport {
        epsilon: runtime.params.viscosity,
        converged: result.converged,
        iterations: result.iterates.len() - 1,
        objective: result.objective,
        gradient_norm: result.gradient_norm,
        iterates: result
            .iterates
            .iter()
            .map(|record| IterateRow {
                objective: record.objective,
                gradient_norm: record.gradient_norm,
                step: record.step,
            })
            .collect(),
    };
    io::write_json(&sibling(out, "report", "json"), &report)?;
    if plot {
        let mut series = Vec::new();
        push_nodal_series(&mut series, &result.forward.state, runtime.grid, "q");
        push_nodal_series(&mut series, &result.forward.driving_force, runtime.grid, "z");
        push_nodal_series(&mut series, &result.adjoint.costate, runtime.grid, "xi");
        plot::write_chart(
            &out.with_extension("svg"),
            "optimized trajectory",
            "t",
            &series,
            false,
        )?;
    }
    println!(
        "optimize: converged={} iterations={} objective={} -> {}",
        result.converged,
        report.iterations,
        result.objective,
        out.display()
    );
    Ok(())
}

fn push_nodal_series(
    series: &mut Vec<plot::Series>,
    field: &Trajectory,
    grid: TimeGrid,
    name: &str,
) {
    for i in 0..field.dim() {
        series.push(plot::Series {
            label: if field.dim() == 1 {
                name.to_string()
            } else {
                format!("{name}_{}", i + 1)
            },
            points: (0..grid.nodes())
                .map(|k| (grid.node(k), field.at(k, i)))
                .collect(),
        });
    }
}

fn worker_cap() -> usize {
    std::env::var("RIOC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn cmd_sweep(
    scenario_path: &Path,
    eps_list: Option<Vec<f64>>,
    out: &Path,
    cold: bool,
    plot: bool,
) -> Result<(), CliError> {
    let runtime = Scenario::load(scenario_path)?.build(None)?;
    let ladder = match eps_list {
        None => default_viscosity_ladder(),
        Some(list) => {
            if list.is_empty() {
                return Err(CliError::validation("--eps-list is empty".into()));
            }
            if list.iter().any(|eps| *eps <= 0.0) {
                return Err(CliError::validation(
                    "--eps-list entries must be positive".into(),
                ));
            }
            if list.windows(2).any(|w| w[1] >= w[0]) {
                return Err(CliError::validation(
                    "--eps-list must be strictly decreasing".into(),
                ));
            }
            list
        }
    };

    // Per-rung minimizer outcome, in ladder order.
    let rungs: Vec<Rung> = if cold {
        cold_sweep(&runtime, &ladder)?
    } else {
        let report = vanishing_viscosity_sweep(
            &runtime.params,
            &runtime.control,
            &runtime.objective,
            &ladder,
            &runtime.options,
        )
        .map_err(CliError::solver)?;
        ladder
            .iter()
            .zip(report.rows)
            .map(|(eps, row)| Rung {
                viscosity: *eps,
                control: row.control,
                objective: row.objective,
                converged: row.converged,
                iterations: row.iterations,
            })
            .collect()
    };

    // Reference pair for the gap columns: the smallest-viscosity control and
    // the rate-independent state it drives.
    let reference_control = rungs.last().unwrap().control.clone();
    let reference_state = solve_rate_independent(&runtime.params, &reference_control)
        .map_err(CliError::solver)?
        .state;

    let mut rows = Vec::with_capacity(rungs.len());
    for rung in &rungs {
        let params = runtime.params.with_viscosity(rung.viscosity);
        let forward = solve_viscous(&params, &rung.control).map_err(CliError::solver)?;
        let band = default_band(&rung.control);
        let adjoint = solve_adjoint(&params, &forward, &runtime.objective, band)
            .map_err(CliError::solver)?;
        let report = check_viscous(
            &rung.control,
            &forward.state,
            &adjoint.costate,
            &adjoint.multiplier,
            &params,
            &runtime.objective,
            band,
        )
        .map_err(CliError::solver)?;
        let control_gap = rung.control.sub(&reference_control).map_err(CliError::solver)?;
        let state_gap = forward.state.sub(&reference_state).map_err(CliError::solver)?;
        rows.push(io::SweepCsvRow {
            viscosity: rung.viscosity,
            objective: rung.objective,
            control_gap_h1: norms::h1_norm(&control_gap),
            state_gap_sup: norms::sup_norm(&state_gap),
            costate_sup: norms::sup_norm(&adjoint.costate),
            dual_proxy: norms::dual_w1inf_proxy(&adjoint.multiplier),
            multiplier_l2: norms::interval_l2_norm(&adjoint.multiplier),
            adjoint_residual: report.adjoint_residual,
            sign_violation: report.sign_violation,
            complementarity_xi: report.complementarity_xi,
            complementarity_lambda: report.complementarity_lambda,
            gradient_residual: report.gradient_residual,
            classification: report.classification.to_string(),
            converged: rung.converged,
            iterations: rung.iterations,
        });
    }
    io::write_sweep_csv(out, &rows)?;
    if plot {
        let picks: [(&str, fn(&io::SweepCsvRow) -> f64); 5] = [
            ("state gap (sup)", |r| r.state_gap_sup),
            ("control gap (H1)", |r| r.control_gap_h1),
            ("costate sup", |r| r.costate_sup),
            ("dual proxy", |r| r.dual_proxy),
            ("multiplier L2", |r| r.multiplier_l2),
        ];
        let series: Vec<plot::Series> = picks
        .into_iter()
        .map(|(label, pick)| plot::Series {
            label: label.to_string(),
            points: rows.iter().map(|r| (r.viscosity, pick(r))).collect(),
        })
        .collect();
        plot::write_chart(
            &out.with_extension("svg"),
            "vanishing-viscosity sweep",
            "viscosity",
            &series,
            true,
        )?;
    }
    println!(
        "sweep: {} rungs ({}) -> {}",
        rows.len(),
        if cold { "cold starts" } else { "warm starts" },
        out.display()
    );
    Ok(())
}

/// One sweep rung as the table assembly consumes it.
struct Rung {
    viscosity: f64,
    control: Trajectory,
    objective: f64,
    converged: bool,
    iterations: usize,
}

/// Independent minimizations, one per rung, all from the scenario control.
/// Rungs run in parallel because no rung feeds the next; the worker count is
/// capped by RIOC_THREADS.
fn cold_sweep(runtime: &Runtime, ladder: &[f64]) -> Result<Vec<Rung>, CliError> {
    let workers = worker_cap().min(ladder.len()).max(1);
    let mut outcomes: Vec<Option<Result<OptimizeResult, CliError>>> =
        (0..ladder.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut slots: Vec<&mut [Option<Result<OptimizeResult, CliError>>]> =
            Vec::with_capacity(workers);
        let mut rest = outcomes.as_mut_slice();
        let chunk = ladder.len().div_ceil(workers);
        while !rest.is_empty() {
            let take = chunk.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            slots.push(head);
            rest = tail;
        }
        for (worker, slot) in slots.into_iter().enumerate() {
            let runtime = &*runtime;
            scope.spawn(move || {
                for (offset, cell) in slot.iter_mut().enumerate() {
                    let eps = ladder[worker * chunk + offset];
                    let params = runtime.params.with_viscosity(eps);
                    *cell = Some(
                        minimize_viscous(
                            &params,
                            &runtime.control,
                            &runtime.objective,
                            &runtime.options,
                        )
                        .map_err(CliError::solver),
                    );
                }
            });
        }
    });
    ladder
        .iter()
        .zip(outcomes)
        .map(|(eps, outcome)| {
            outcome.expect("worker filled its slot").map(|result| Rung {
                viscosity: *eps,
                objective: result.objective,
                converged: result.converged,
                iterations: result.iterates.len().saturating_sub(1),
                control: result.control,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct DirectionRow {
    index: usize,
    adjoint_slope: f64,
    difference_slope: f64,
    relative_error: f64,
}

#[derive(Serialize)]
struct GradcheckReport {
    epsilon: f64,
    seed: u64,
    tau: f64,
    /// True when the driving force grazes the activation threshold at the
    /// base point, where one-sided kinks make slope agreement unreliable.
    nonsmooth: bool,
    worst_relative_error: f64,
    directions: Vec<DirectionRow>,
}

fn cmd_gradcheck(
    scenario_path: &Path,
    directions: usize,
    epsilon: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let runtime = Scenario::load(scenario_path)?.build(epsilon)?;
    if !runtime.params.is_viscous() {
        return Err(CliError::validation(
            "gradcheck needs a positive viscosity (set epsilon in the scenario or pass --epsilon)"
                .into(),
        ));
    }
    if directions == 0 {
        return Err(CliError::validation("--directions must be at least 1".into()));
    }
    let forward = solve_viscous(&runtime.params, &runtime.control).map_err(CliError::solver)?;
    let band = default_band(&runtime.control);
    let pattern = ActivationPattern::classify(&forward.driving_force, band);
    let adjoint =
        solve_adjoint(&runtime.params, &forward, &runtime.objective, band).map_err(CliError::solver)?;
    let gradient =
        reduced_gradient(&runtime.control, &adjoint, &runtime.objective).map_err(CliError::solver)?;

    let tau = 1e-5;
    let mut rows = Vec::with_capacity(directions);
    let mut worst = 0.0f64;
    for index in 0..directions {
        let direction = sine_direction(runtime.grid, runtime.seed.wrapping_add(index as u64));
        let adjoint_slope = norms::h1_inner(&gradient, &direction).map_err(CliError::solver)?;
        let mut up = runtime.control.clone();
        up.add_scaled(tau, &direction).map_err(CliError::solver)?;
        let mut down = runtime.control.clone();
        down.add_scaled(-tau, &direction).map_err(CliError::solver)?;
        let difference_slope = (evaluate_objective(&runtime.params, &up, &runtime.objective)
            .map_err(CliError::solver)?
            - evaluate_objective(&runtime.params, &down, &runtime.objective)
                .map_err(CliError::solver)?)
            / (2.0 * tau);
        let scale = adjoint_slope.abs().max(difference_slope.abs()).max(1e-14);
        let relative_error = (adjoint_slope - difference_slope).abs() / scale;
        worst = worst.max(relative_error);
        rows.push(DirectionRow {
            index,
            adjoint_slope,
            difference_slope,
            relative_error,
        });
    }
    let report = GradcheckReport {
        epsilon: runtime.params.viscosity,
        seed: runtime.seed,
        tau,
        nonsmooth: pattern.count(ZLabel::Zero) > 0,
        worst_relative_error: worst,
        directions: rows,
    };
    emit_json(&report, out)
}

/// Random low-frequency direction vanishing at t = 0, matching the control
/// space. Each component gets its own six-mode sine series.
fn sine_direction(grid: TimeGrid, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t_final = grid.t_final();
    Trajectory::scalar_from_fn(grid, |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let m = (m + 1) as f64;
                c * (0.5 * m * std::f64::consts::PI * t / t_final).sin() / m
            })
            .sum()
    })
}

fn emit_json<T: Serialize>(report: &T, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => io::write_json(path, report),
        None => {
            let text = serde_json::to_string_pretty(report)
                .map_err(|e| CliError::validation(format!("cannot serialize report: {e}")))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_check(
    scenario_path: &Path,
    solution_path: &Path,
    control_path: &Path,
    limit: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let runtime = Scenario::load(scenario_path)?.build(None)?;
    let dim = runtime.params.dim();
    let control = io::read_control_csv(control_path, runtime.grid, dim)?;
    let (state, costate, multiplier) = io::read_solution_csv(solution_path, runtime.grid, dim)?;
    let band = default_band(&control);
    let report = if limit {
        check_limit(
            &control,
            &state,
            &costate,
            &multiplier,
            &runtime.params,
            &runtime.objective,
            band,
        )
        .map_err(CliError::solver)?
    } else {
        if !runtime.params.is_viscous() {
            return Err(CliError::validation(
                "the viscous check needs a positive epsilon in the scenario; pass --limit to \
                 check the rate-independent system"
                    .into(),
            ));
        }
        check_viscous(
            &control,
            &state,
            &costate,
            &multiplier,
            &runtime.params,
            &runtime.objective,
            band,
        )
        .map_err(CliError::solver)?
    };
    emit_json(&report, out)
}
