//! Discrete Fourier/Laplace transforms on uniform time grids.
//!
//! All transforms use the symmetric convention
//!
//! ```text
//! V(iω) = (1/√(2π)) ∫₀^∞ e^{-iωt} v(t) dt
//! ```
//!
//! so that the forward/inverse pair is unitary on the grid. Series are
//! implicitly zero for `t < 0`. Spectral lines are stored in increasing
//! `ω` order on the DFT-conjugate grid `ω_m = 2πm/(n·dt)`,
//! `m = -n/2+1, ..., n/2`.

mod io;
mod quadrature;

pub use io::{read_spectral_line, read_time_series, write_spectral_line, write_time_series};
pub use quadrature::{fourier_integral, fourier_weights, FourierWeights};

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// `√(2π)`
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

/// Relative asymmetry above which [`inverse_transform`] logs a warning.
pub const DEFAULT_ASYMMETRY_WARNING: f64 = 1e-8;

/// Data should decay below this fraction of its peak at the horizon.
pub const HORIZON_DECAY: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("sample count must be a power of two and at least 8, got {0}")]
    InvalidCount(usize),
    #[error("series has {got} samples but the grid has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite sample at index {index} (t = {t})")]
    NonFinite { index: usize, t: f64 },
    #[error("laplace abscissa must be positive, got {0} (use forward_transform for sigma = 0)")]
    NonPositiveSigma(f64),
    #[error("inverse transform expects a line on sigma = 0, got sigma = {0}")]
    NotOnImaginaryAxis(f64),
    #[error("sigma grid must be non-empty with strictly positive entries")]
    InvalidSigmaGrid,
    #[error("omega grid must have at least two strictly increasing, uniformly spaced entries")]
    InvalidOmegaGrid,
    #[error("not in H2: evaluator is non-finite at p = {sigma} + {omega}i, norm diverges on grid")]
    NotInHardySpace { sigma: f64, omega: f64 },
    #[error("series live on different time grids")]
    GridMismatch,
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SpectralError> = std::result::Result<T, E>;

/// Uniform sampling `t_j = j·dt`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SpectralError::InvalidStep(dt));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(SpectralError::InvalidCount(n));
        }
        Ok(Self { dt, n })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total horizon `T = n·dt`.
    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.time(j)).collect()
    }

    /// Spacing of the conjugate frequency grid, `2π/T`.
    pub fn omega_step(&self) -> f64 {
        2.0 * PI / self.horizon()
    }

    /// Largest frequency on the grid, `π/dt`.
    pub fn nyquist(&self) -> f64 {
        PI / self.dt
    }

    /// Signed frequency index of line position `i`.
    pub fn mode_index(&self, i: usize) -> isize {
        i as isize - (self.n as isize / 2 - 1)
    }

    /// Line position of signed frequency index `m`.
    pub fn position(&self, m: isize) -> usize {
        (m + self.n as isize / 2 - 1) as usize
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.mode_index(i) as f64 * self.omega_step()
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.omega(i)).collect()
    }

    /// FFT bin holding line position `i`.
    fn fft_bin(&self, i: usize) -> usize {
        self.mode_index(i).rem_euclid(self.n as isize) as usize
    }
}

/// Real samples of a function on `t ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite {
                index,
                t: grid.time(index),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    /// Samples `f(t_j)`.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.times().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Magnitude of the last samples relative to the peak; the zero-extension
    /// convention is only accurate when this is below [`HORIZON_DECAY`].
    pub fn tail_ratio(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let tail = self.values[self.values.len() - 4..]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        tail / peak
    }
}

/// Complex samples of a transform along the vertical line `σ + iω`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLine {
    sigma: f64,
    grid: TimeGrid,
    values: Vec<Complex64>,
}

impl SpectralLine {
    pub fn new(sigma: f64, grid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        Ok(Self {
            sigma,
            grid,
            values,
        })
    }

    pub fn zeros(sigma: f64, grid: TimeGrid) -> Self {
        Self {
            sigma,
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.grid.omegas()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Discrete `L₂(dω)` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.omega_step()).sqrt()
    }

    /// Pointwise product with a multiplier sampled on the same grid.
    pub fn multiplied(&self, multiplier: &[Complex64]) -> Self {
        assert_eq!(multiplier.len(), self.values.len());
        Self {
            sigma: self.sigma,
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(multiplier)
                .map(|(v, k)| v * k)
                .collect(),
        }
    }

    /// `max |V(-iω) - conj V(iω)| / max |V|` over mirrored pairs, including
    /// `|Im V(0)|`. The Nyquist bin is its own alias and is not counted.
    pub fn asymmetry(&self) -> f64 {
        hermitian_asymmetry(&self.grid, &self.values)
    }
}

/// Absolute Hermitian defect `max |V(-ω) - conj V(ω)|` and the peak `|V|`.
pub(crate) fn hermitian_defect(grid: &TimeGrid, values: &[Complex64]) -> (f64, f64) {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let half = grid.n() as isize / 2;
    let mut worst = values[grid.position(0)].im.abs();
    for m in 1..half {
        let plus = values[grid.position(m)];
        let minus = values[grid.position(-m)];
        worst = worst.max((minus - plus.conj()).norm());
    }
    (worst, peak)
}

pub(crate) fn hermitian_asymmetry(grid: &TimeGrid, values: &[Complex64]) -> f64 {
    match hermitian_defect(grid, values) {
        (_, 0.0) => 0.0,
        (worst, peak) => worst / peak,
    }
}

/// Result of [`inverse_transform`].
#[derive(Debug, Clone)]
pub struct Inversion {
    pub series: TimeSeries,
    /// Relative Hermitian asymmetry of the input, measured before enforcement.
    pub asymmetry: f64,
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Unnormalized DFT `Σ_k v_k e^{-iω t_k}` in line order.
pub(crate) fn raw_dft(grid: &TimeGrid, values: &[f64]) -> Vec<Complex64> {
    let n = grid.n();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, false).process(&mut buf);
    (0..n).map(|i| buf[grid.fft_bin(i)]).collect()
}

fn check_series(v: &TimeSeries) {
    let tail = v.tail_ratio();
    if tail > HORIZON_DECAY {
        log::warn!(
            "series has not decayed at the horizon T = {} (tail/peak = {:.3e}); zero extension will wrap",
            v.grid.horizon(),
            tail
        );
    }
}

/// `V(iω_m) ≈ (1/√(2π)) Σ_k e^{-iω_m t_k} v_k dt`.
///
/// Unitary on the grid: `‖V‖_{ℓ₂(dω)} = ‖v‖_{ℓ₂(dt)}`.
pub fn forward_transform(v: &TimeSeries) -> SpectralLine {
    check_series(v);
    let scale = v.grid.dt() / SQRT_2PI;
    let values = raw_dft(&v.grid, &v.values)
        .into_iter()
        .map(|z| z * scale)
        .collect();
    SpectralLine {
        sigma: 0.0,
        grid: v.grid,
        values,
    }
}

/// Samples of `(𝓛v)(σ + iω)`, computed as the forward transform of `e^{-σt}v(t)`.
pub fn laplace_on_line(v: &TimeSeries, sigma: f64) -> Result<SpectralLine> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SpectralError::NonPositiveSigma(sigma));
    }
    let grid = v.grid;
    let damped = TimeSeries {
        grid,
        values: v
            .values
            .iter()
            .enumerate()
            .map(|(j, x)| x * (-sigma * grid.time(j)).exp())
            .collect(),
    };
    let mut line = forward_transform(&damped);
    line.sigma = sigma;
    Ok(line)
}

/// Inverse transform of a line on `σ = 0`.
///
/// Hermitian symmetry is enforced by averaging `(V(iω) + conj V(-iω))/2`
/// before inversion, so the output is real. The pre-enforcement asymmetry is
/// reported; above [`DEFAULT_ASYMMETRY_WARNING`] a warning is logged, since it
/// signals spectral data that is not the transform of a real function.
pub fn inverse_transform(line: &SpectralLine) -> Result<Inversion> {
    if line.sigma != 0.0 {
        return Err(SpectralError::NotOnImaginaryAxis(line.sigma));
    }
    let grid = line.grid;
    let asymmetry = line.asymmetry();
    if asymmetry > DEFAULT_ASYMMETRY_WARNING {
        log::warn!(
            "spectral line is not Hermitian (relative asymmetry {:.3e}); inverse is not real",
            asymmetry
        );
    }
    let values = inverse_values(&grid, &line.values);
    Ok(Inversion {
        series: TimeSeries { grid, values },
        asymmetry,
    })
}

/// Hermitian-enforced inverse of line-ordered values; no checks.
pub(crate) fn inverse_values(grid: &TimeGrid, values: &[Complex64]) -> Vec<f64> {
    let n = grid.n();
    let half = n as isize / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[0] = Complex64::new(values[grid.position(0)].re, 0.0);
    buf[n / 2] = Complex64::new(values[grid.position(half)].re, 0.0);
    for m in 1..half {
        let sym = 0.5 * (values[grid.position(m)] + values[grid.position(-m)].conj());
        buf[m as usize] = sym;
        buf[n - m as usize] = sym.conj();
    }
    plan(n, true).process(&mut buf);
    let scale = SQRT_2PI / grid.horizon();
    buf.into_iter().map(|z| z.re * scale).collect()
}

/// Discrete `‖v‖_{L₂(R⁺)} = √(Σ v_k² dt)`.
pub fn l2_norm(v: &TimeSeries) -> f64 {
    (v.values.iter().map(|x| x * x).sum::<f64>() * v.grid.dt()).sqrt()
}

/// Relative `L₂` distance `‖a - b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Estimate of an `H²` norm from samples on a finite `σ × ω` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyEstimate {
    /// `max_σ ‖h(σ + i·)‖_{L₂}` over the grid; a lower estimate of the sup.
    pub norm: f64,
    /// Abscissa attaining the maximum.
    pub sigma_at_max: f64,
    /// Share of `‖h‖²` carried by the top decade of `|ω|` on the maximizing line.
    pub tail_fraction: f64,
    /// False when the tail share exceeds the threshold, i.e. the estimate is
    /// still growing with the `ω` range.
    pub converged: bool,
}

/// Logarithmic `σ` grid on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default `σ` grid: 25 points, logarithmic in `[10⁻³, 10]`.
pub fn default_sigma_grid() -> Vec<f64> {
    log_grid(1e-3, 10.0, 25)
}

/// `max_{σ ∈ sigma_grid} (∫ |h(σ+iω)|² dω)^{1/2}` by the trapezoid rule on `omega_grid`.
///
/// `tail_threshold` bounds the share of energy allowed in the top decade of
/// `|ω|` before the estimate is flagged as not converged.
pub fn hardy_norm_estimate(
    eval: impl Fn(Complex64) -> Complex64,
    sigma_grid: &[f64],
    omega_grid: &[f64],
    tail_threshold: f64,
) -> Result<HardyEstimate> {
    if sigma_grid.is_empty() || sigma_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(SpectralError::InvalidSigmaGrid);
    }
    if omega_grid.len() < 2 || omega_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SpectralError::InvalidOmegaGrid);
    }
    let omega_max = omega_grid.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let tail_start = omega_max / 10.0;
    let last = omega_grid.len() - 1;

    let mut best = HardyEstimate {
        norm: 0.0,
        sigma_at_max: sigma_grid[0],
        tail_fraction: 0.0,
        converged: true,
    };
    for &sigma in sigma_grid {
        let mut total = 0.0;
        let mut tail = 0.0;
        for (i, &omega) in omega_grid.iter().enumerate() {
            let h = eval(Complex64::new(sigma, omega));
            if !(h.re.is_finite() && h.im.is_finite()) {
                return Err(SpectralError::NotInHardySpace { sigma, omega });
            }
            let left = if i > 0 { omega - omega_grid[i - 1] } else { 0.0 };
            let right = if i < last { omega_grid[i + 1] - omega } else { 0.0 };
            let e = h.norm_sqr() * 0.5 * (left + right);
            total += e;
            if omega.abs() >= tail_start {
                tail += e;
            }
        }
        let norm = total.sqrt();
        if norm > best.norm {
            best.norm = norm;
            best.sigma_at_max = sigma;
            best.tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
        }
    }
    best.converged = best.tail_fraction <= tail_threshold;
    Ok(best)
}
