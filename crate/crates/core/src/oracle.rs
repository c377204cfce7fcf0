//! Verification machinery independent of the reconstruction path.
//!
//! Manufactured solutions are separable, `u = T(t)·X(x)`, so the source
//! `f = a·T'X - T X'' - b·T X' - c·T X` and the Cauchy traces are closed form.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::kernel::{kernel_exponent, kernel_multiplier, KernelParams};
use crate::solver::{BoundaryData, Coefficients, Component, SolutionField, SolverError};
use crate::spectral::{
    fourier_integral, inverse_values, SpectralError, TimeGrid, TimeSeries, SQRT_2PI,
};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unknown family {0:?}; expected one of zero, prod-exp, sine-packet, pulse, ramp")]
    UnknownFamily(String),
    #[error("family {0} has u(x, 0) != 0; zero initial data is required")]
    NonzeroInitialData(String),
    #[error("family {0} has a source that does not decay in t, so it is not square-integrable")]
    NonDecayingSource(String),
    #[error("{what} = {value} must be a positive integer multiple of {step}")]
    IncommensurateGrid { what: &'static str, value: f64, step: f64 },
    #[error("invalid forward-solver setup: {0}")]
    InvalidForwardSetup(String),
    #[error("tridiagonal solve hit a degenerate pivot at row {row}")]
    DegeneratePivot { row: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

/// Closed-form separable solutions `u = T(t)·X(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `u ≡ 0`.
    Zero,
    /// `u = t·e^{-rate_t·t}·e^{-rate_x·x}`.
    ProdExp { rate_t: f64, rate_x: f64 },
    /// `u = (1 - e^{-t})·e^{-rate_t·t}·sin(wavenumber·x + phase)`.
    SinePacket {
        rate_t: f64,
        wavenumber: f64,
        phase: f64,
    },
    /// `u = e^{-rate_t·t}·e^{-rate_x·x}`; nonzero at `t = 0`.
    Pulse { rate_t: f64, rate_x: f64 },
    /// `u = (1 - e^{-t})·e^{-rate_x·x}`; tends to a nonzero steady state.
    Ramp { rate_x: f64 },
}

impl Family {
    /// Default member for a family id.
    pub fn from_id(id: &str) -> Result<Self> {
        Ok(match id {
            "zero" => Family::Zero,
            "prod-exp" => Family::ProdExp {
                rate_t: 1.0,
                rate_x: 1.0,
            },
            "sine-packet" => Family::SinePacket {
                rate_t: 1.0,
                wavenumber: 1.0,
                phase: 0.0,
            },
            "pulse" => Family::Pulse {
                rate_t: 1.0,
                rate_x: 1.0,
            },
            "ramp" => Family::Ramp { rate_x: 1.0 },
            other => return Err(OracleError::UnknownFamily(other.to_string())),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::ProdExp { .. } => "prod-exp",
            Family::SinePacket { .. } => "sine-packet",
            Family::Pulse { .. } => "pulse",
            Family::Ramp { .. } => "ramp",
        }
    }

    /// `(T, T')` at `t`.
    fn time_factor(&self, t: f64) -> (f64, f64) {
        match *self {
            Family::Zero => (0.0, 0.0),
            Family::ProdExp { rate_t, .. } => {
                let e = (-rate_t * t).exp();
                (t * e, (1.0 - rate_t * t) * e)
            }
            Family::SinePacket { rate_t, .. } => {
                let slow = (-rate_t * t).exp();
                let fast = (-(rate_t + 1.0) * t).exp();
                (slow - fast, -rate_t * slow + (rate_t + 1.0) * fast)
            }
            Family::Pulse { rate_t, .. } => {
                let e = (-rate_t * t).exp();
                (e, -rate_t * e)
            }
            Family::Ramp { .. } => {
                let e = (-t).exp();
                (1.0 - e, e)
            }
        }
    }

    /// `(X, X', X'')` at `x`.
    fn space_factor(&self, x: f64) -> (f64, f64, f64) {
        match *self {
            Family::Zero => (0.0, 0.0, 0.0),
            Family::ProdExp { rate_x, .. } | Family::Pulse { rate_x, .. } | Family::Ramp { rate_x } => {
                let e = (-rate_x * x).exp();
                (e, -rate_x * e, rate_x * rate_x * e)
            }
            Family::SinePacket {
                wavenumber, phase, ..
            } => {
                let (s, c) = (wavenumber * x + phase).sin_cos();
                (s, wavenumber * c, -wavenumber * wavenumber * s)
            }
        }
    }

    /// `[u, u_x, u_xx, u_t]` at `(x, t)`.
    pub fn exact(&self, x: f64, t: f64) -> [f64; 4] {
        let (tt, dt) = self.time_factor(t);
        let (xx, dx, dxx) = self.space_factor(x);
        [tt * xx, tt * dx, tt * dxx, dt * xx]
    }

    /// `f = a·u_t - u_xx - b·u_x - c·u`.
    pub fn source(&self, coeffs: &Coefficients, x: f64, t: f64) -> f64 {
        let [u, u_x, u_xx, u_t] = self.exact(x, t);
        coeffs.a * u_t - u_xx - coeffs.b * u_x - coeffs.c * u
    }

    /// Rejects members outside the admissible data class.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Pulse { .. } => Err(OracleError::NonzeroInitialData(self.id().into())),
            Family::Ramp { .. } => Err(OracleError::NonDecayingSource(self.id().into())),
            Family::ProdExp { rate_t, .. } | Family::SinePacket { rate_t, .. } if !(rate_t > 0.0) => {
                Err(OracleError::NonDecayingSource(self.id().into()))
            }
            _ => Ok(()),
        }
    }
}

/// Time grid, source `s`-grid step, strip depth and output `x`-grid step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemGrids {
    pub time: TimeGrid,
    pub ds: f64,
    pub depth: f64,
    pub dx: f64,
}

fn cell_count(what: &'static str, value: f64, step: f64) -> Result<usize> {
    let cells = value / step;
    let rounded = cells.round();
    if !(step > 0.0) || rounded < 1.0 || (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
        return Err(OracleError::IncommensurateGrid { what, value, step });
    }
    Ok(rounded as usize)
}

impl ProblemGrids {
    pub fn validate(&self) -> Result<()> {
        cell_count("y", self.depth, self.ds)?;
        cell_count("y", self.depth, self.dx)?;
        Ok(())
    }

    pub fn s_grid(&self) -> Result<Vec<f64>> {
        let cells = cell_count("y", self.depth, self.ds)?;
        Ok((0..=cells).map(|k| k as f64 * self.ds).collect())
    }

    pub fn x_grid(&self) -> Result<Vec<f64>> {
        let cells = cell_count("y", self.depth, self.dx)?;
        Ok((0..=cells).map(|k| k as f64 * self.dx).collect())
    }
}

/// Boundary data and exact field for one closed-form solution.
#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    pub family: Family,
    pub coeffs: Coefficients,
    pub grids: ProblemGrids,
    pub data: BoundaryData,
    pub exact: SolutionField,
}

/// Samples the traces, the source on the `s`-grid and the exact field on the `x`-grid.
pub fn manufacture_problem(
    family: Family,
    coeffs: &Coefficients,
    grids: &ProblemGrids,
) -> Result<ManufacturedProblem> {
    family.validate()?;
    coeffs.validate()?;
    grids.validate()?;
    let time = grids.time;
    let trace = |which: usize| TimeSeries::from_fn(time, |t| family.exact(0.0, t)[which]);
    let source = grids
        .s_grid()?
        .into_iter()
        .map(|s| TimeSeries::from_fn(time, |t| family.source(coeffs, s, t)))
        .collect::<Result<Vec<_>, _>>()?;
    let data = BoundaryData::new(trace(0)?, trace(1)?, source, grids.ds)?;

    let x_grid = grids.x_grid()?;
    let mut exact = SolutionField::zeros(x_grid.clone(), time);
    for (r, &x) in x_grid.iter().enumerate() {
        for j in 0..time.n() {
            let values = family.exact(x, time.time(j));
            for (c, component) in Component::ALL.iter().enumerate() {
                exact.component_mut(*component)[[r, j]] = values[c];
            }
        }
    }
    Ok(ManufacturedProblem {
        family,
        coeffs: *coeffs,
        grids: *grids,
        data,
        exact,
    })
}

/// `inverse(K(iω)·fourier_integral(v))`.
pub fn mollify_series(v: &TimeSeries, multiplier: &[Complex64]) -> Vec<f64> {
    let grid = v.grid();
    inverse_values(&grid, fourier_integral(v).multiplied(multiplier).values())
}

fn mollify_rows(rows: &Array2<f64>, grid: TimeGrid, multiplier: &[Complex64]) -> Array2<f64> {
    let out: Vec<Vec<f64>> = (0..rows.nrows())
        .into_par_iter()
        .map(|r| {
            let series = TimeSeries::new(grid, rows.row(r).to_vec()).expect("finite field row");
            mollify_series(&series, multiplier)
        })
        .collect();
    let mut result = Array2::zeros(rows.dim());
    for (mut dst, src) in result.outer_iter_mut().zip(out) {
        dst.iter_mut().zip(src).for_each(|(d, s)| *d = s);
    }
    result
}

/// `k *ₜ u` for every component, where `k = F⁻¹K`.
///
/// Computed as a multiplier on the endpoint-corrected transform of each row,
/// which stays accurate for `u_t` despite its jump at `t = 0`. Because the
/// equation has `t`-independent coefficients and zero initial data, this is
/// the exact solution for mollified data.
pub fn mollified_reference(exact: &SolutionField, params: &KernelParams) -> SolutionField {
    let grid = exact.t_grid;
    let multiplier = kernel_multiplier(&grid, params);
    let mut out = SolutionField::zeros(exact.x_grid.clone(), grid);
    for component in Component::ALL {
        *out.component_mut(component) = mollify_rows(exact.component(component), grid, &multiplier);
    }
    out
}

/// Source rows `f(x_r, ·)` on `x_grid`, linearly interpolated on the `s`-grid
/// and optionally mollified the same way the solver treats data.
pub fn source_field(
    data: &BoundaryData,
    x_grid: &[f64],
    params: Option<&KernelParams>,
) -> Array2<f64> {
    let grid = data.grid();
    let mut rows = Array2::zeros((x_grid.len(), grid.n()));
    if data.source.is_empty() {
        return rows;
    }
    let last = data.source.len() - 1;
    for (mut row, &x) in rows.outer_iter_mut().zip(x_grid) {
        let cells = x / data.ds;
        let mut k = (cells.floor() as usize).min(last);
        let mut frac = cells - k as f64;
        if k == last || frac < 1e-9 {
            frac = 0.0;
        } else if 1.0 - frac < 1e-9 {
            k += 1;
            frac = 0.0;
        }
        let left = data.source[k].values();
        for (j, dst) in row.iter_mut().enumerate() {
            *dst = if frac == 0.0 {
                left[j]
            } else {
                left[j] * (1.0 - frac) + data.source[k + 1].values()[j] * frac
            };
        }
    }
    match params {
        None => rows,
        Some(p) => mollify_rows(&rows, grid, &kernel_multiplier(&grid, p)),
    }
}

/// Causal convolution `(k * v)(t_j) = (1/√(2π)) Σ_{m ≤ j} k_m v_{j-m} dt`.
///
/// The `1/√(2π)` makes the transform of `k * v` equal `K·V` under the
/// symmetric convention, where `K` is the transform of `k`.
pub fn time_convolution(kernel: &TimeSeries, v: &TimeSeries) -> Result<TimeSeries> {
    let grid = v.grid();
    if kernel.grid() != grid {
        return Err(SpectralError::GridMismatch.into());
    }
    let n = grid.n();
    let wide = 2 * n;
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(wide);
    let pad = |s: &[f64]| {
        let mut buf: Vec<Complex64> = s.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        buf.resize(wide, Complex64::new(0.0, 0.0));
        forward.process(&mut buf);
        buf
    };
    let mut product: Vec<Complex64> = pad(kernel.values())
        .into_iter()
        .zip(pad(v.values()))
        .map(|(a, b)| a * b)
        .collect();
    planner.plan_fft_inverse(wide).process(&mut product);
    let scale = grid.dt() / (wide as f64 * SQRT_2PI);
    Ok(TimeSeries::new(
        grid,
        product[..n].iter().map(|z| z.re * scale).collect(),
    )?)
}

/// `‖a·u_t - u_xx - b·u_x - c·u - f‖ / max(‖f‖, ‖u‖)` over all rows, using
/// the field's own derivative components.
pub fn pde_residual(field: &SolutionField, source: &Array2<f64>, coeffs: &Coefficients) -> f64 {
    let residual = coeffs.a * &field.u_t - &field.u_xx - coeffs.b * &field.u_x - coeffs.c * &field.u - source;
    let norm = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = norm(source).max(norm(&field.u));
    if scale == 0.0 {
        norm(&residual)
    } else {
        norm(&residual) / scale
    }
}

/// Natural logarithms of the mode gains at `(iω₀, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Amplification {
    pub omega0: f64,
    /// `x·Re λ₁(iω₀)`.
    pub raw_log_gain: f64,
    /// `raw_log_gain + Re ln K(iω₀)`.
    pub regularized_log_gain: f64,
}

pub fn amplification_probe(
    omega0: f64,
    x: f64,
    coeffs: &Coefficients,
    params: &KernelParams,
) -> Result<Amplification> {
    let p = Complex64::new(0.0, omega0);
    let (lambda1, _) = crate::solver::characteristic_roots(p, coeffs)?;
    let raw_log_gain = x * lambda1.re;
    let log_k = kernel_exponent(p, params).map_err(SolverError::from)?;
    Ok(Amplification {
        omega0,
        raw_log_gain,
        regularized_log_gain: raw_log_gain + log_k.re,
    })
}

/// `v + level·max|v|·ξ` with independent standard normal `ξ`.
pub fn add_white_noise(v: &TimeSeries, level: f64, rng: &mut impl Rng) -> TimeSeries {
    let scale = level * v.max_abs();
    let values = v
        .values()
        .iter()
        .map(|x| {
            let xi: f64 = StandardNormal.sample(rng);
            x + scale * xi
        })
        .collect();
    TimeSeries::new(v.grid(), values).expect("finite noisy samples")
}

/// Uniform Crank–Nicolson discretization of `[0, L] × [0, steps·dt]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardSetup {
    pub coeffs: Coefficients,
    pub length: f64,
    /// Number of spatial intervals.
    pub intervals: usize,
    pub dt: f64,
    pub steps: usize,
}

/// Solution of the forward problem; rows are `x`, columns `t`.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub u: Array2<f64>,
}

/// Thomas algorithm for `lower[i]·z[i-1] + diag[i]·z[i] + upper[i]·z[i+1] = rhs[i]`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut modified = vec![0.0; n];
    let mut pivot = diag[0];
    for i in 0..n {
        if i > 0 {
            pivot = diag[i] - lower[i] * modified[i - 1];
            rhs[i] -= lower[i] * rhs[i - 1];
        }
        if !pivot.is_finite() || pivot.abs() <= f64::EPSILON * (diag[i].abs() + lower[i].abs() + upper[i].abs()) {
            return Err(OracleError::DegeneratePivot { row: i });
        }
        modified[i] = upper[i] / pivot;
        rhs[i] /= pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= modified[i] * rhs[i + 1];
    }
    Ok(())
}

/// Crank–Nicolson for `a·u_t = u_xx + b·u_x + c·u + f` with `u(x, 0) = 0`,
/// `u(0, t) = left(t)` and `u(L, t) = right(t)`.
pub fn forward_solve_cn(
    setup: &ForwardSetup,
    left: impl Fn(f64) -> f64,
    right: impl Fn(f64) -> f64,
    source: impl Fn(f64, f64) -> f64,
) -> Result<ForwardSolution> {
    setup.coeffs.validate()?;
    let ForwardSetup {
        coeffs,
        length,
        intervals,
        dt,
        steps,
    } = *setup;
    if !(length > 0.0 && length.is_finite()) || intervals < 2 || !(dt > 0.0 && dt.is_finite()) || steps == 0 {
        return Err(OracleError::InvalidForwardSetup(format!(
            "length = {length}, intervals = {intervals}, dt = {dt}, steps = {steps}"
        )));
    }
    let h = length / intervals as f64;
    let x: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
    let t: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let interior = intervals - 1;

    // Stencil of the spatial operator L = ∂xx + b∂x + c.
    let west = 1.0 / (h * h) - coeffs.b / (2.0 * h);
    let centre = -2.0 / (h * h) + coeffs.c;
    let east = 1.0 / (h * h) + coeffs.b / (2.0 * h);
    let mass = coeffs.a / dt;

    let lower = vec![-0.5 * west; interior];
    let diag = vec![mass - 0.5 * centre; interior];
    let upper = vec![-0.5 * east; interior];

    let mut u = Array2::zeros((intervals + 1, steps + 1));
    let mut current = vec![0.0; intervals + 1];
    let mut f_now: Vec<f64> = x.iter().map(|&xi| source(xi, 0.0)).collect();
    for step in 1..=steps {
        let t_next = t[step];
        let f_next: Vec<f64> = x.iter().map(|&xi| source(xi, t_next)).collect();
        let (left_next, right_next) = (left(t_next), right(t_next));
        let mut rhs: Vec<f64> = (1..=interior)
            .map(|i| {
                let explicit = west * current[i - 1] + centre * current[i] + east * current[i + 1];
                mass * current[i] + 0.5 * explicit + 0.5 * (f_now[i] + f_next[i])
            })
            .collect();
        rhs[0] += 0.5 * west * left_next;
        rhs[interior - 1] += 0.5 * east * right_next;
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;

        current[0] = left_next;
        current[intervals] = right_next;
        current[1..=interior].copy_from_slice(&rhs);
        for (i, v) in current.iter().enumerate() {
            u[[i, step]] = *v;
        }
        f_now = f_next;
    }
    Ok(ForwardSolution { x, t, u })
}
