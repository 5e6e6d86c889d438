//! Scenario files: one JSON document describes the model, grid, load and
//! objective for a run. Every subcommand starts by loading one of these.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use rioc_core::model::{
    Degradation, ModelParams, Objective, RunningCost, TimeGrid, Trajectory,
};
use rioc_core::optimizer::OptimizeOptions;

use crate::io;
use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Elastic stiffness α.
    pub alpha: f64,
    /// Viscosity ε; zero or omitted selects the rate-independent solver.
    #[serde(default)]
    pub epsilon: f64,
    /// Initial history y₀; its length fixes the state dimension.
    pub initial_history: Vec<f64>,
    /// Threshold profile κ.
    pub kappa: Degradation,
    pub grid: GridSpec,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub objective: ObjectiveSpec,
    /// Seed for randomized gradient-check directions.
    #[serde(default)]
    pub seed: u64,
    /// Descent-loop knobs used by `optimize` and `sweep`.
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_final: f64,
    pub intervals: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    /// ℓ ≡ 0.
    #[default]
    Zero,
    /// ℓ_i(t) = slope_i · t (a scalar slope is broadcast to every component).
    Ramp { slope: Slope },
    /// Explicit node table, one row per node.
    Nodes { values: NodeTable },
    /// Control trajectory read from a CSV file written by this tool.
    File { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Slope {
    Scalar(f64),
    PerComponent(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum NodeTable {
    /// Scalar problems: one value per node.
    Flat(Vec<f64>),
    /// General problems: one row of n values per node.
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    #[serde(default = "zero_running")]
    pub running: RunningCost,
    /// Terminal target q_d; defaults to the origin.
    #[serde(default)]
    pub terminal_target: Option<Vec<f64>>,
}

fn zero_running() -> RunningCost {
    RunningCost::Zero
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        ObjectiveSpec {
            running: RunningCost::Zero,
            terminal_target: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_grad_tol() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    200
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            grad_tol: default_grad_tol(),
            max_iters: default_max_iters(),
        }
    }
}

/// Everything a subcommand needs, built and validated from a scenario file.
pub struct Runtime {
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub control: Trajectory,
    pub objective: Objective,
    pub options: OptimizeOptions,
    pub seed: u64,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::validation(format!("cannot parse scenario {}: {e}", path.display()))
        })
    }

    /// Validate the document and assemble solver-ready inputs. A command-line
    /// `--epsilon` overrides the file's viscosity.
    pub fn build(&self, epsilon_override: Option<f64>) -> Result<Runtime, CliError> {
        let dim = self.initial_history.len();
        let grid = TimeGrid::new(self.grid.t_final, self.grid.intervals)
            .map_err(|e| CliError::validation(e.to_string()))?;
        let params = ModelParams {
            stiffness: self.alpha,
            viscosity: epsilon_override.unwrap_or(self.epsilon),
            initial_history: self.initial_history.clone(),
            threshold: self.kappa.clone(),
        };
        params
            .validate()
            .map_err(|e| CliError::validation(e.to_string()))?;

        let control = self.build_control(grid, dim)?;
        let objective = self.build_objective(dim)?;
        let options = OptimizeOptions {
            max_iters: self.solver.max_iters,
            grad_tol: self.solver.grad_tol,
            ..OptimizeOptions::default()
        };
        Ok(Runtime {
            params,
            grid,
            control,
            objective,
            options,
            seed: self.seed,
        })
    }

    fn build_control(&self, grid: TimeGrid, dim: usize) -> Result<Trajectory, CliError> {
        match &self.control {
            ControlSpec::Zero => Ok(Trajectory::zeros(grid, dim)),
            ControlSpec::Ramp { slope } => {
                let slopes = match slope {
                    Slope::Scalar(s) => vec![*s; dim],
                    Slope::PerComponent(v) => {
                        if v.len() != dim {
                            return Err(CliError::validation(format!(
                                "ramp needs {dim} slopes, got {}",
                                v.len()
                            )));
                        }
                        v.clone()
                    }
                };
                Ok(Trajectory::from_fn(grid, dim, |t, out| {
                    for (value, slope) in out.iter_mut().zip(&slopes) {
                        *value = slope * t;
                    }
                }))
            }
            ControlSpec::Nodes { values } => {
                let rows: Vec<Vec<f64>> = match values {
                    NodeTable::Flat(flat) => {
                        if dim != 1 {
                            return Err(CliError::validation(format!(
                                "flat node table needs a scalar problem, state has {dim} components"
                            )));
                        }
                        flat.iter().map(|v| vec![*v]).collect()
                    }
                    NodeTable::Rows(rows) => rows.clone(),
                };
                if rows.len() != grid.nodes() {
                    return Err(CliError::validation(format!(
                        "node table has {} rows, grid has {} nodes",
                        rows.len(),
                        grid.nodes()
                    )));
                }
                let mut flat = Vec::with_capacity(grid.nodes() * dim);
                for (k, row) in rows.iter().enumerate() {
                    if row.len() != dim {
                        return Err(CliError::validation(format!(
                            "node table row {k} has {} values, expected {dim}",
                            row.len()
                        )));
                    }
                    flat.extend_from_slice(row);
                }
                Trajectory::from_values(grid, dim, flat)
                    .map_err(|e| CliError::validation(e.to_string()))
            }
            ControlSpec::File { path } => {
                let control = io::read_control_csv(path, grid, dim)?;
                Ok(control)
            }
        }
    }

    fn build_objective(&self, dim: usize) -> Result<Objective, CliError> {
        let target = match &self.objective.terminal_target {
            None => vec![0.0; dim],
            Some(t) => {
                if t.len() != dim {
                    return Err(CliError::validation(format!(
                        "terminal target has {} components, state has {dim}",
                        t.len()
                    )));
                }
                t.clone()
            }
        };
        match &self.objective.running {
            RunningCost::Zero => {}
            RunningCost::Tracking { weight, target } => {
                if *weight < 0.0 {
                    return Err(CliError::validation(
                        "tracking weight must be nonnegative".into(),
                    ));
                }
                if target.len() != dim {
                    return Err(CliError::validation(format!(
                        "tracking target has {} components, state has {dim}",
                        target.len()
                    )));
                }
            }
            RunningCost::Linear { weights } => {
                if weights.len() != dim {
                    return Err(CliError::validation(format!(
                        "linear weights have {} components, state has {dim}",
                        weights.len()
                    )));
                }
            }
        }
        Ok(Objective::new(self.objective.running.clone(), target))
    }
}
