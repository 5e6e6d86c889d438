//! Flat-file output: CSV for trajectories and sweep tables, JSON for
//! reports. Floats are written with Rust's shortest round-trip formatting,
//! so reading a file back reproduces the original values exactly.

use std::fmt::Write as _;
use std::path::Path;

use rioc_core::forward::ForwardSolution;
use rioc_core::model::{IntervalField, TimeGrid, Trajectory};

use crate::CliError;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

fn push_row(out: &mut String, time: f64, blocks: &[&[f64]]) {
    write!(out, "{time}").unwrap();
    for block in blocks {
        for value in *block {
            write!(out, ",{value}").unwrap();
        }
    }
    out.push('\n');
}

fn header(out: &mut String, dim: usize, names: &[&str]) {
    out.push('t');
    for name in names {
        for i in 1..=dim {
            write!(out, ",{name}_{i}").unwrap();
        }
    }
    out.push('\n');
}

/// One row per node: `t, q_1.., z_1.., H_1..` plus costate and multiplier
/// columns when duals are provided. The multiplier lives on intervals; row k
/// carries interval k and the final row pads with zeros.
pub fn write_solution_csv(
    path: &Path,
    solution: &ForwardSolution,
    duals: Option<(&Trajectory, &IntervalField)>,
) -> Result<(), CliError> {
    let grid = solution.state.grid();
    let dim = solution.state.dim();
    let mut out = String::new();
    match duals {
        None => header(&mut out, dim, &["q", "z", "H"]),
        Some(_) => header(&mut out, dim, &["q", "z", "H", "xi", "lam"]),
    }
    let pad = vec![0.0; dim];
    for k in 0..grid.nodes() {
        let time = grid.node(k);
        match duals {
            None => push_row(
                &mut out,
                time,
                &[
                    solution.state.node(k),
                    solution.driving_force.node(k),
                    solution.history.node(k),
                ],
            ),
            Some((costate, multiplier)) => {
                let lam = if k < grid.intervals() {
                    multiplier.interval(k)
                } else {
                    &pad
                };
                push_row(
                    &mut out,
                    time,
                    &[
                        solution.state.node(k),
                        solution.driving_force.node(k),
                        solution.history.node(k),
                        costate.node(k),
                        lam,
                    ],
                );
            }
        }
    }
    write_file(path, &out)
}

/// `t, l_1..l_n`, one row per node.
pub fn write_control_csv(path: &Path, control: &Trajectory) -> Result<(), CliError> {
    let grid = control.grid();
    let mut out = String::new();
    header(&mut out, control.dim(), &["l"]);
    for k in 0..grid.nodes() {
        push_row(&mut out, grid.node(k), &[control.node(k)]);
    }
    write_file(path, &out)
}

/// `t, r_1..r_n`: nodal energy-balance residuals.
pub fn write_energy_csv(path: &Path, residual: &Trajectory) -> Result<(), CliError> {
    let grid = residual.grid();
    let mut out = String::new();
    header(&mut out, residual.dim(), &["r"]);
    for k in 0..grid.nodes() {
        push_row(&mut out, grid.node(k), &[residual.node(k)]);
    }
    write_file(path, &out)
}

fn read_rows(path: &Path, grid: TimeGrid, columns: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let Some(head) = lines.next() else {
        return Err(CliError::validation(format!("{} is empty", path.display())));
    };
    let header_count = head.split(',').count();
    if header_count != columns + 1 {
        return Err(CliError::validation(format!(
            "{} has {header_count} columns, expected {}",
            path.display(),
            columns + 1
        )));
    }
    let mut rows = Vec::with_capacity(grid.nodes());
    for (index, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut values = Vec::with_capacity(columns);
        for (field, text) in line.split(',').enumerate().skip(1) {
            let value: f64 = text.parse().map_err(|_| {
                CliError::validation(format!(
                    "{} row {index} column {field}: bad number {text:?}",
                    path.display()
                ))
            })?;
            values.push(value);
        }
        if values.len() != columns {
            return Err(CliError::validation(format!(
                "{} row {index} has {} values, expected {columns}",
                path.display(),
                values.len()
            )));
        }
        rows.push(values);
    }
    if rows.len() != grid.nodes() {
        return Err(CliError::validation(format!(
            "{} has {} data rows, grid has {} nodes",
            path.display(),
            rows.len(),
            grid.nodes()
        )));
    }
    Ok(rows)
}

/// Read a control trajectory written by [`write_control_csv`].
pub fn read_control_csv(path: &Path, grid: TimeGrid, dim: usize) -> Result<Trajectory, CliError> {
    let rows = read_rows(path, grid, dim)?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Trajectory::from_values(grid, dim, flat).map_err(|e| CliError::validation(e.to_string()))
}

/// Read a full dual-bearing solution written by [`write_solution_csv`]:
/// returns the state, costate and multiplier blocks.
pub fn read_solution_csv(
    path: &Path,
    grid: TimeGrid,
    dim: usize,
) -> Result<(Trajectory, Trajectory, IntervalField), CliError> {
    let rows = read_rows(path, grid, 5 * dim)?;
    let mut state = Vec::with_capacity(grid.nodes() * dim);
    let mut costate = Vec::with_capacity(grid.nodes() * dim);
    let mut multiplier = Vec::with_capacity(grid.intervals() * dim);
    for (k, row) in rows.iter().enumerate() {
        state.extend_from_slice(&row[0..dim]);
        costate.extend_from_slice(&row[3 * dim..4 * dim]);
        if k < grid.intervals() {
            multiplier.extend_from_slice(&row[4 * dim..5 * dim]);
        }
    }
    let state =
        Trajectory::from_values(grid, dim, state).map_err(|e| CliError::validation(e.to_string()))?;
    let costate = Trajectory::from_values(grid, dim, costate)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let multiplier = IntervalField::from_values(grid, dim, multiplier)
        .map_err(|e| CliError::validation(e.to_string()))?;
    Ok((state, costate, multiplier))
}

/// One assembled sweep row, ready for the report table.
pub struct SweepCsvRow {
    pub viscosity: f64,
    pub objective: f64,
    pub control_gap_h1: f64,
    pub state_gap_sup: f64,
    pub costate_sup: f64,
    pub dual_proxy: f64,
    pub multiplier_l2: f64,
    pub adjoint_residual: f64,
    pub sign_violation: f64,
    pub complementarity_xi: f64,
    pub complementarity_lambda: f64,
    pub gradient_residual: f64,
    pub classification: String,
    pub converged: bool,
    pub iterations: usize,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepCsvRow]) -> Result<(), CliError> {
    let mut out = String::from(
        "epsilon,objective,control_gap_h1,state_gap_sup,costate_sup,dual_proxy,multiplier_l2,\
         adjoint_residual,sign_violation,complementarity_xi,complementarity_lambda,\
         gradient_residual,classification,converged,iterations\n",
    );
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.viscosity,
            row.objective,
            row.control_gap_h1,
            row.state_gap_sup,
            row.costate_sup,
            row.dual_proxy,
            row.multiplier_l2,
            row.adjoint_residual,
            row.sign_violation,
            row.complementarity_xi,
            row.complementarity_lambda,
            row.gradient_residual,
            row.classification,
            row.converged,
            row.iterations
        )
        .unwrap();
    }
    write_file(path, &out)
}

/// Serialize a report as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, report: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::validation(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    write_file(path, &text)
}
