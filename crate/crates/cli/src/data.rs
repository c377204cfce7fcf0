//! CSV ingestion and emission for boundary data and solution fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use cauchy_core::solver::{BoundaryData, SolutionField};
use cauchy_core::spectral::{read_time_series, write_time_series, TimeGrid, TimeSeries};
use ndarray::Array2;

use crate::CliError;

/// Relative tolerance for coordinate grids read from files.
const GRID_TOLERANCE: f64 = 1e-9;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

pub fn read_series(path: &Path) -> Result<TimeSeries, CliError> {
    read_time_series(path).map_err(|e| CliError::Input(e.to_string()))
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<(), CliError> {
    let mut out = create(path)?;
    write_time_series(&mut out, series).map_err(|e| io_error(path, e))?;
    out.flush().map_err(|e| io_error(path, e))
}

/// Writes `x,t,value` rows for every `x` and every `t` up to `t_max`.
pub fn write_long(
    path: &Path,
    x_grid: &[f64],
    t_grid: &TimeGrid,
    values: &Array2<f64>,
    t_max: Option<f64>,
) -> Result<(), CliError> {
    let columns = t_grid
        .times()
        .iter()
        .take_while(|t| t_max.is_none_or(|m| **t <= m * (1.0 + GRID_TOLERANCE)))
        .count();
    let mut out = create(path)?;
    let fail = |e| io_error(path, e);
    writeln!(out, "x,t,value").map_err(fail)?;
    for (row, x) in values.outer_iter().zip(x_grid) {
        for (j, v) in row.iter().take(columns).enumerate() {
            writeln!(out, "{x},{},{v}", t_grid.time(j)).map_err(fail)?;
        }
    }
    out.flush().map_err(fail)
}

pub fn write_field(
    dir: &Path,
    field: &SolutionField,
    t_max: Option<f64>,
) -> Result<(), CliError> {
    for component in cauchy_core::solver::Component::ALL {
        write_long(
            &dir.join(format!("{}.csv", component.name())),
            &field.x_grid,
            &field.t_grid,
            field.component(component),
            t_max,
        )?;
    }
    Ok(())
}

/// Source profiles `f(s_k, ·)` in long `x,t,value` format.
///
/// Rows are grouped by `x`, which must start at 0 and be uniformly spaced;
/// within each group `t` must match `grid`. Returns the profiles and `ds`.
pub fn read_source(path: &Path, grid: TimeGrid) -> Result<(Vec<TimeSeries>, f64), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let headers = reader.headers().map_err(|e| io_error(path, e))?;
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["x", "t", "value"] {
        return Err(io_error(path, "expected header x,t,value"));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut profiles: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
        let (x, t, value) = record.map_err(|e| io_error(path, e))?;
        if xs.last() != Some(&x) {
            xs.push(x);
            profiles.push(Vec::with_capacity(grid.n()));
        }
        let profile = profiles.last_mut().expect("pushed above");
        let expected = grid.time(profile.len().min(grid.n() - 1));
        if profile.len() >= grid.n() || (t - expected).abs() > GRID_TOLERANCE * grid.horizon() {
            return Err(io_error(
                path,
                format!("row {}: t = {t} does not match the boundary time grid", line + 2),
            ));
        }
        profile.push(value);
    }
    if xs.len() < 2 {
        return Err(io_error(path, "source needs at least two x-profiles"));
    }
    let ds = xs[1] - xs[0];
    let uniform = xs
        .iter()
        .enumerate()
        .all(|(k, x)| (x - k as f64 * ds).abs() <= GRID_TOLERANCE * ds.max(1.0) * (k + 1) as f64);
    if xs[0] != 0.0 || !(ds > 0.0) || !uniform {
        return Err(io_error(path, "x must start at 0 and be uniformly spaced"));
    }
    let profiles = profiles
        .into_iter()
        .map(|values| TimeSeries::new(grid, values).map_err(|e| io_error(path, e)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((profiles, ds))
}

pub fn write_source(path: &Path, data: &BoundaryData) -> Result<(), CliError> {
    let grid = data.grid();
    let xs: Vec<f64> = (0..data.source.len()).map(|k| k as f64 * data.ds).collect();
    let mut rows = Array2::zeros((xs.len(), grid.n()));
    for (mut row, profile) in rows.outer_iter_mut().zip(&data.source) {
        row.iter_mut().zip(profile.values()).for_each(|(d, s)| *d = *s);
    }
    write_long(path, &xs, &grid, &rows, None)
}

pub fn load_boundary(
    g0: &Path,
    g1: &Path,
    source: Option<&Path>,
) -> Result<BoundaryData, CliError> {
    let g0 = read_series(g0)?;
    let g1 = read_series(g1)?;
    let (profiles, ds) = match source {
        Some(path) => read_source(path, g0.grid())?,
        None => (Vec::new(), 1.0),
    };
    BoundaryData::new(g0, g1, profiles, ds).map_err(|e| CliError::Input(e.to_string()))
}
