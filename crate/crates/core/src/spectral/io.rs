//! CSV encodings: `t,value` for time series and `omega,re,im` for lines.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{Result, SpectralError, SpectralLine, TimeGrid, TimeSeries};

/// Relative tolerance on sample spacing when reading grids back.
const SPACING_TOLERANCE: f64 = 1e-9;

fn parse_error(path: &str, message: impl Into<String>) -> SpectralError {
    SpectralError::Parse {
        path: path.to_string(),
        message: message.into(),
    }
}

fn read_rows(reader: impl Read, label: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (line, record) in csv.records().enumerate() {
        let record = record.map_err(|e| parse_error(label, e.to_string()))?;
        if record.len() != width {
            return Err(parse_error(
                label,
                format!("row {}: expected {width} columns, found {}", line + 2, record.len()),
            ));
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| parse_error(label, format!("row {}: cannot parse {field:?}", line + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Recovers the grid from sample abscissae starting at zero.
pub(crate) fn infer_grid(label: &str, first: f64, axis: &[f64]) -> Result<TimeGrid> {
    if axis.len() < 2 {
        return Err(parse_error(label, "need at least two samples"));
    }
    if first.abs() > 0.0 {
        return Err(parse_error(label, format!("first sample must be at t = 0, found {first}")));
    }
    let dt = axis[1] - axis[0];
    for (j, pair) in axis.windows(2).enumerate() {
        if ((pair[1] - pair[0]) - dt).abs() > SPACING_TOLERANCE * dt.abs().max(1.0) {
            return Err(parse_error(label, format!("non-uniform spacing at row {}", j + 3)));
        }
    }
    TimeGrid::new(dt, axis.len()).map_err(|e| parse_error(label, e.to_string()))
}

/// Reads a `t,value` CSV with `t` starting at zero on a uniform power-of-two grid.
pub fn read_time_series(path: &Path) -> Result<TimeSeries> {
    let label = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| parse_error(&label, e.to_string()))?;
    let rows = read_rows(file, &label, 2)?;
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let grid = infer_grid(&label, times.first().copied().unwrap_or(0.0), &times)?;
    TimeSeries::new(grid, rows.into_iter().map(|r| r[1]).collect())
        .map_err(|e| parse_error(&label, e.to_string()))
}

pub fn write_time_series(writer: impl Write, series: &TimeSeries) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| SpectralError::Io(e.into());
    out.write_record(["t", "value"]).map_err(io)?;
    for (j, v) in series.values().iter().enumerate() {
        out.write_record([series.grid().time(j).to_string(), v.to_string()])
            .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an `omega,re,im` CSV on `σ = 0` in increasing-`ω` line order.
pub fn read_spectral_line(path: &Path) -> Result<SpectralLine> {
    let label = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| parse_error(&label, e.to_string()))?;
    let rows = read_rows(file, &label, 3)?;
    let n = rows.len();
    if n < 8 || !n.is_power_of_two() {
        return Err(parse_error(&label, format!("row count {n} is not a power of two >= 8")));
    }
    let step = rows[1][0] - rows[0][0];
    if !(step > 0.0) {
        return Err(parse_error(&label, "omega must be increasing"));
    }
    let dt = 2.0 * std::f64::consts::PI / (n as f64 * step);
    let grid = TimeGrid::new(dt, n).map_err(|e| parse_error(&label, e.to_string()))?;
    for (i, row) in rows.iter().enumerate() {
        let expected = grid.omega(i);
        if (row[0] - expected).abs() > SPACING_TOLERANCE * step * (1.0 + i as f64) {
            return Err(parse_error(
                &label,
                format!("row {}: omega {} does not match grid value {expected}", i + 2, row[0]),
            ));
        }
    }
    let values = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
    SpectralLine::new(0.0, grid, values)
}

pub fn write_spectral_line(writer: impl Write, line: &SpectralLine) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| SpectralError::Io(e.into());
    out.write_record(["omega", "re", "im"]).map_err(io)?;
    for (omega, v) in line.omegas().into_iter().zip(line.values()) {
        out.write_record([omega.to_string(), v.re.to_string(), v.im.to_string()])
            .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}
