//! Frequency-domain reconstruction of `u, u_x, u_xx, u_t` from lateral Cauchy data.
//!
//! After transforming in `t`, the equation becomes the ODE
//! `U'' + b·U' + (c - a·p)·U = -F` in `x` with `U(0) = G0`, `U'(0) = G1`.
//! Its characteristic roots are `λ₁,₂ = -b/2 ± √(a·p + μ)`; the `λ₁` mode grows
//! like `exp(x·√(a|ω|/2))` along the imaginary axis, which is why the problem
//! is ill-posed and why data must be mollified first.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{kernel_exponents, kernel_multiplier, KernelError, KernelParams, EXP_OVERFLOW};
use crate::spectral::{
    fourier_integral, hermitian_defect, inverse_values, SpectralError, SpectralLine, TimeGrid,
    TimeSeries,
};

/// Cap on `(x, ω)` samples kept in the flagged-cell diagnostic.
const FLAGGED_SAMPLE_LIMIT: usize = 16;

/// Relative tolerance for snapping `x` onto the source `s`-grid.
const GRID_SNAP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("coefficient a must be positive and finite, got {0}")]
    InvalidDiffusivity(f64),
    #[error("coefficients must be finite (b = {b}, c = {c})")]
    NonFiniteCoefficient { b: f64, c: f64 },
    #[error("mu = b^2/4 - c = {mu} must be positive; apply exp_shift_precondition with a shift above {needed}")]
    NonPositiveMu { mu: f64, needed: f64 },
    #[error("exponential shift must be positive and finite, got {0}")]
    InvalidShift(f64),
    #[error("source profile needs at least two s-samples and a positive step, got {count} samples with ds = {ds}")]
    InvalidSourceGrid { count: usize, ds: f64 },
    #[error("all boundary and source series must share one time grid")]
    GridMismatch,
    #[error("x = {x} lies outside the strip [0, {depth}]")]
    OutsideStrip { x: f64, depth: f64 },
    #[error("x grid must be non-empty, finite and increasing")]
    InvalidXGrid,
    #[error(
        "ill-posed blowup, use premollified mode: {flagged} of {total} spectral cells ({:.1}%) exceed the gain limit",
        100.0 * *flagged as f64 / *total as f64
    )]
    IllPosedBlowup { flagged: usize, total: usize },
    #[error("non-finite {component} spectrum at x = {x}, omega = {omega}")]
    NonFinite {
        component: &'static str,
        x: f64,
        omega: f64,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;

/// Constant coefficients of `a·u_t = u_xx + b·u_x + c·u + f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Coefficients {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let coeffs = Self { a, b, c };
        coeffs.validate()?;
        Ok(coeffs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(SolverError::InvalidDiffusivity(self.a));
        }
        if !(self.b.is_finite() && self.c.is_finite()) {
            return Err(SolverError::NonFiniteCoefficient {
                b: self.b,
                c: self.c,
            });
        }
        Ok(())
    }

    /// `μ = b²/4 - c`.
    pub fn mu(&self) -> f64 {
        self.b * self.b / 4.0 - self.c
    }

    /// Smallest exponential shift making `μ` positive.
    pub fn required_shift(&self) -> f64 {
        (-self.mu() / self.a).max(0.0)
    }

    /// Validates and additionally requires `μ > 0`.
    pub fn require_solvable(&self) -> Result<()> {
        self.validate()?;
        let mu = self.mu();
        if !(mu > 0.0) {
            return Err(SolverError::NonPositiveMu {
                mu,
                needed: self.required_shift(),
            });
        }
        Ok(())
    }
}

/// Whether the data enter the solver as given or multiplied by `K` first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Raw,
    Premollified,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Raw => "raw",
            Mode::Premollified => "premollified",
        }
    }
}

/// `g0 = u(0,·)`, `g1 = u_x(0,·)` and source profiles `f(s_k,·)` on `s_k = k·ds`.
///
/// An empty source means `f ≡ 0` and leaves the strip depth unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub g0: TimeSeries,
    pub g1: TimeSeries,
    pub source: Vec<TimeSeries>,
    pub ds: f64,
}

impl BoundaryData {
    pub fn new(g0: TimeSeries, g1: TimeSeries, source: Vec<TimeSeries>, ds: f64) -> Result<Self> {
        let data = Self { g0, g1, source, ds };
        data.validate()?;
        Ok(data)
    }

    /// Zero data with no source.
    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            g0: TimeSeries::zeros(grid),
            g1: TimeSeries::zeros(grid),
            source: Vec::new(),
            ds: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.g0.grid();
        if self.g1.grid() != grid || self.source.iter().any(|f| f.grid() != grid) {
            return Err(SolverError::GridMismatch);
        }
        if !self.source.is_empty() && (self.source.len() < 2 || !(self.ds > 0.0 && self.ds.is_finite())) {
            return Err(SolverError::InvalidSourceGrid {
                count: self.source.len(),
                ds: self.ds,
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> TimeGrid {
        self.g0.grid()
    }

    /// Right end of the `s`-grid, if a source is present.
    pub fn depth(&self) -> Option<f64> {
        (!self.source.is_empty()).then(|| self.ds * (self.source.len() - 1) as f64)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            g0: self.g0.scaled(factor),
            g1: self.g1.scaled(factor),
            source: self.source.iter().map(|f| f.scaled(factor)).collect(),
            ds: self.ds,
        }
    }
}

/// Transforms of the boundary data on the imaginary axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpectra {
    pub g0: SpectralLine,
    pub g1: SpectralLine,
    pub source: Vec<SpectralLine>,
    pub ds: f64,
}

impl BoundarySpectra {
    /// Applies the endpoint-corrected Fourier quadrature to every series.
    pub fn from_data(data: &BoundaryData) -> Result<Self> {
        data.validate()?;
        Ok(Self {
            g0: fourier_integral(&data.g0),
            g1: fourier_integral(&data.g1),
            source: data.source.par_iter().map(fourier_integral).collect(),
            ds: data.ds,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.g0.grid()
    }

    pub fn depth(&self) -> Option<f64> {
        (!self.source.is_empty()).then(|| self.ds * (self.source.len() - 1) as f64)
    }

    /// Every line multiplied by `K(iω)`.
    pub fn mollified(&self, params: &KernelParams) -> Self {
        let k = kernel_multiplier(&self.grid(), params);
        Self {
            g0: self.g0.multiplied(&k),
            g1: self.g1.multiplied(&k),
            source: self.source.iter().map(|f| f.multiplied(&k)).collect(),
            ds: self.ds,
        }
    }

    /// Source values `F(s_k, iω_i)` for all `k` at line position `i`.
    fn profile_at(&self, i: usize) -> Vec<Complex64> {
        self.source.iter().map(|line| line.values()[i]).collect()
    }
}

/// `λ₁,₂ = -b/2 ± √(a·p + μ)` with the principal root, so `Re λ₁ > Re λ₂`.
pub fn characteristic_roots(p: Complex64, coeffs: &Coefficients) -> Result<(Complex64, Complex64)> {
    coeffs.require_solvable()?;
    Ok(roots_unchecked(p, coeffs))
}

fn roots_unchecked(p: Complex64, coeffs: &Coefficients) -> (Complex64, Complex64) {
    let root = (coeffs.a * p + coeffs.mu()).sqrt();
    let half_b = coeffs.b / 2.0;
    (root - half_b, -root - half_b)
}

/// `U(x, p)` and `U_x(x, p)` for one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyState {
    pub u: Complex64,
    pub u_x: Complex64,
    /// `F(x, p)`, interpolated on the `s`-grid.
    pub source_at_x: Complex64,
}

/// Trapezoidal `∫₀ˣ e^{λ(x-s)} F(s) ds` for two exponents at once, plus `F(x)`.
///
/// Nodes `s_k = k·ds ≤ x` are used as given; a partial last cell uses the
/// linearly interpolated value at `x`.
fn source_integrals(
    x: f64,
    lambdas: [Complex64; 2],
    profile: &[Complex64],
    ds: f64,
) -> ([Complex64; 2], Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    if profile.is_empty() {
        return ([zero; 2], zero);
    }
    let cells = x / ds;
    let mut full = cells.floor() as usize;
    let mut frac = cells - full as f64;
    if 1.0 - frac < GRID_SNAP {
        full += 1;
        frac = 0.0;
    }
    if frac < GRID_SNAP {
        frac = 0.0;
    }
    let last = profile.len() - 1;
    if full >= last {
        full = last;
        frac = 0.0;
    }
    let f_at_x = if frac == 0.0 {
        profile[full]
    } else {
        profile[full] * (1.0 - frac) + profile[full + 1] * frac
    };

    let mut sums = [zero; 2];
    for (sum, lambda) in sums.iter_mut().zip(lambdas) {
        let term = |k: usize| (lambda * (x - k as f64 * ds)).exp() * profile[k];
        let mut acc = zero;
        for k in 0..=full {
            let weight = if k == 0 || k == full { 0.5 } else { 1.0 };
            acc += term(k) * weight;
        }
        if full == 0 {
            acc = zero;
        }
        acc *= ds;
        if frac > 0.0 {
            acc += (term(full) + f_at_x) * (0.5 * frac * ds);
        }
        *sum = acc;
    }
    (sums, f_at_x)
}

/// `U` and `U_x` at `(x, p)` from transformed data. Overflow of `e^{λ₁x}`
/// propagates as non-finite output.
pub fn frequency_state(
    x: f64,
    p: Complex64,
    g0: Complex64,
    g1: Complex64,
    profile: &[Complex64],
    ds: f64,
    coeffs: &Coefficients,
) -> FrequencyState {
    let (l1, l2) = roots_unchecked(p, coeffs);
    let (e1, e2) = ((l1 * x).exp(), (l2 * x).exp());
    let ([i1, i2], source_at_x) = source_integrals(x, [l1, l2], profile, ds);
    let inv = (l1 - l2).inv();
    let grow = g1 - l2 * g0;
    let decay = g1 - l1 * g0;
    FrequencyState {
        u: (grow * e1 - decay * e2 - i1 + i2) * inv,
        u_x: (grow * l1 * e1 - decay * l2 * e2 - l1 * i1 + l2 * i2) * inv,
        source_at_x,
    }
}

/// `U(x, p)`; `profile` holds `F(s_k, p)` on `s_k = k·ds` (empty for `F ≡ 0`).
pub fn frequency_solution(
    x: f64,
    p: Complex64,
    g0: Complex64,
    g1: Complex64,
    profile: &[Complex64],
    ds: f64,
    coeffs: &Coefficients,
) -> Result<Complex64> {
    coeffs.require_solvable()?;
    Ok(frequency_state(x, p, g0, g1, profile, ds, coeffs).u)
}

/// `∂U/∂x(x, p)`.
pub fn frequency_dx(
    x: f64,
    p: Complex64,
    g0: Complex64,
    g1: Complex64,
    profile: &[Complex64],
    ds: f64,
    coeffs: &Coefficients,
) -> Result<Complex64> {
    coeffs.require_solvable()?;
    Ok(frequency_state(x, p, g0, g1, profile, ds, coeffs).u_x)
}

/// `∂²U/∂x² = a·p·U - b·U_x - c·U - F`.
pub fn frequency_dxx(
    u: Complex64,
    u_x: Complex64,
    source_at_x: Complex64,
    p: Complex64,
    coeffs: &Coefficients,
) -> Complex64 {
    coeffs.a * p * u - coeffs.b * u_x - coeffs.c * u - source_at_x
}

/// Field components, in manifest order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    U,
    Ux,
    Uxx,
    Ut,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::U, Component::Ux, Component::Uxx, Component::Ut];

    pub fn name(&self) -> &'static str {
        match self {
            Component::U => "u",
            Component::Ux => "u_x",
            Component::Uxx => "u_xx",
            Component::Ut => "u_t",
        }
    }
}

/// `u, u_x, u_xx, u_t` sampled on `x_grid × t_grid`; rows are `x`, columns `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub x_grid: Vec<f64>,
    pub t_grid: TimeGrid,
    pub u: Array2<f64>,
    pub u_x: Array2<f64>,
    pub u_xx: Array2<f64>,
    pub u_t: Array2<f64>,
}

impl SolutionField {
    pub fn zeros(x_grid: Vec<f64>, t_grid: TimeGrid) -> Self {
        let shape = (x_grid.len(), t_grid.n());
        Self {
            x_grid,
            t_grid,
            u: Array2::zeros(shape),
            u_x: Array2::zeros(shape),
            u_xx: Array2::zeros(shape),
            u_t: Array2::zeros(shape),
        }
    }

    pub fn component(&self, which: Component) -> &Array2<f64> {
        match which {
            Component::U => &self.u,
            Component::Ux => &self.u_x,
            Component::Uxx => &self.u_xx,
            Component::Ut => &self.u_t,
        }
    }

    pub fn component_mut(&mut self, which: Component) -> &mut Array2<f64> {
        match which {
            Component::U => &mut self.u,
            Component::Ux => &mut self.u_x,
            Component::Uxx => &mut self.u_xx,
            Component::Ut => &mut self.u_t,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x_grid: self.x_grid.clone(),
            t_grid: self.t_grid,
            u: &self.u * factor,
            u_x: &self.u_x * factor,
            u_xx: &self.u_xx * factor,
            u_t: &self.u_t * factor,
        }
    }
}

/// Per-`x` discrete `L₂(dt)` norms of the four components.
pub fn w_norm_terms(field: &SolutionField) -> Vec<[f64; 4]> {
    let dt = field.t_grid.dt();
    (0..field.x_grid.len())
        .map(|row| {
            Component::ALL.map(|c| {
                let values = field.component(c).row(row);
                (values.iter().map(|v| v * v).sum::<f64>() * dt).sqrt()
            })
        })
        .collect()
}

/// `max_x (‖u‖ + ‖u_x‖ + ‖u_xx‖ + ‖u_t‖)` over the `x`-grid.
pub fn w_norm(field: &SolutionField) -> f64 {
    w_norm_terms(field)
        .iter()
        .map(|terms| terms.iter().sum::<f64>())
        .fold(0.0, f64::max)
}

/// How the reconstruction treats exponentially amplified modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    pub mode: Mode,
    /// A cell `(x, ω)` is flagged once its net gain `|e^{λ₁x}|` (times `|K|`
    /// when premollified) exceeds this.
    pub max_gain: f64,
    /// Raw mode aborts when more than this share of cells is flagged.
    pub abort_fraction: f64,
}

impl ReconstructOptions {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            max_gain: 1.0 / f64::EPSILON,
            abort_fraction: 0.5,
        }
    }
}

/// Diagnostics accumulated over all `(x, ω)` cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionDiagnostics {
    pub mode: Mode,
    pub total_cells: usize,
    pub flagged_cells: usize,
    pub flagged_fraction: f64,
    pub nonfinite_cells: usize,
    /// Up to 16 `(x, ω)` flagged cells in scan order.
    pub flagged_samples: Vec<(f64, f64)>,
    /// Largest `ln` gain over all cells.
    pub max_log_gain: f64,
    /// Hermitian defect per component relative to that component's peak over
    /// all rows, measured before enforcement.
    pub asymmetry: [f64; 4],
}

impl ReconstructionDiagnostics {
    pub fn max_asymmetry(&self) -> f64 {
        self.asymmetry.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub field: SolutionField,
    pub diagnostics: ReconstructionDiagnostics,
}

/// Solves the lateral Cauchy problem on `x_grid` by evaluating the frequency
/// formulas at `p = iω` and inverting each component.
///
/// In premollified mode every data line is multiplied by `K(iω)` first, so the
/// result approximates `k *ₜ u`.
pub fn reconstruct_field(
    data: &BoundaryData,
    coeffs: &Coefficients,
    params: &KernelParams,
    x_grid: &[f64],
    options: &ReconstructOptions,
) -> Result<Reconstruction> {
    coeffs.require_solvable()?;
    params.validate()?;
    let spectra = BoundarySpectra::from_data(data)?;
    let spectra = match options.mode {
        Mode::Raw => spectra,
        Mode::Premollified => spectra.mollified(params),
    };
    reconstruct_from_spectra(&spectra, coeffs, params, x_grid, options)
}

struct RowResult {
    spectra: [Vec<Complex64>; 4],
    flagged: Vec<f64>,
    nonfinite: usize,
    max_log_gain: f64,
}

/// As [`reconstruct_field`] for data already in the transform domain.
/// The spectra are used as given; `params` only enters the gain estimate in
/// premollified mode.
pub fn reconstruct_from_spectra(
    spectra: &BoundarySpectra,
    coeffs: &Coefficients,
    params: &KernelParams,
    x_grid: &[f64],
    options: &ReconstructOptions,
) -> Result<Reconstruction> {
    coeffs.require_solvable()?;
    if x_grid.is_empty()
        || x_grid.iter().any(|x| !x.is_finite() || *x < 0.0)
        || x_grid.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(SolverError::InvalidXGrid);
    }
    if let Some(depth) = spectra.depth() {
        if let Some(&x) = x_grid.iter().find(|&&x| x > depth * (1.0 + GRID_SNAP)) {
            return Err(SolverError::OutsideStrip { x, depth });
        }
    }
    let grid = spectra.grid();
    let omegas = grid.omegas();
    let log_k: Vec<f64> = match options.mode {
        Mode::Raw => vec![0.0; grid.n()],
        Mode::Premollified => kernel_exponents(&grid, params).iter().map(|z| z.re).collect(),
    };
    let gain_limit = options.max_gain.ln();
    let profiles: Vec<Vec<Complex64>> = (0..grid.n()).map(|i| spectra.profile_at(i)).collect();

    let rows: Vec<RowResult> = x_grid
        .par_iter()
        .map(|&x| {
            let mut out: [Vec<Complex64>; 4] = Default::default();
            for component in out.iter_mut() {
                component.reserve_exact(grid.n());
            }
            let mut flagged = Vec::new();
            let mut nonfinite = 0;
            let mut max_log_gain = f64::NEG_INFINITY;
            for (i, &omega) in omegas.iter().enumerate() {
                let p = Complex64::new(0.0, omega);
                let (l1, _) = roots_unchecked(p, coeffs);
                let log_gain = x * l1.re + log_k[i];
                max_log_gain = max_log_gain.max(log_gain);
                let state = frequency_state(
                    x,
                    p,
                    spectra.g0.values()[i],
                    spectra.g1.values()[i],
                    &profiles[i],
                    spectra.ds,
                    coeffs,
                );
                let u_xx = frequency_dxx(state.u, state.u_x, state.source_at_x, p, coeffs);
                let mut cell = [state.u, state.u_x, u_xx, p * state.u];
                let finite = cell.iter().all(|z| z.re.is_finite() && z.im.is_finite());
                if !finite {
                    nonfinite += 1;
                }
                if log_gain > gain_limit || !finite {
                    flagged.push(omega);
                    if options.mode == Mode::Raw {
                        cell = [Complex64::new(0.0, 0.0); 4];
                    }
                }
                for (component, value) in out.iter_mut().zip(cell) {
                    component.push(value);
                }
            }
            RowResult {
                spectra: out,
                flagged,
                nonfinite,
                max_log_gain,
            }
        })
        .collect();

    let total_cells = x_grid.len() * grid.n();
    let flagged_cells: usize = rows.iter().map(|r| r.flagged.len()).sum();
    let nonfinite_cells: usize = rows.iter().map(|r| r.nonfinite).sum();
    let flagged_samples: Vec<(f64, f64)> = x_grid
        .iter()
        .zip(&rows)
        .flat_map(|(&x, r)| r.flagged.iter().map(move |&w| (x, w)))
        .take(FLAGGED_SAMPLE_LIMIT)
        .collect();

    if options.mode == Mode::Premollified && nonfinite_cells > 0 {
        let (row, x) = rows
            .iter()
            .zip(x_grid)
            .find(|(r, _)| r.nonfinite > 0)
            .expect("a row holds the non-finite cell");
        let (which, omega) = Component::ALL
            .iter()
            .enumerate()
            .find_map(|(c, comp)| {
                row.spectra[c]
                    .iter()
                    .zip(&omegas)
                    .find(|(z, _)| !(z.re.is_finite() && z.im.is_finite()))
                    .map(|(_, w)| (comp.name(), *w))
            })
            .expect("a component holds the non-finite cell");
        return Err(SolverError::NonFinite {
            component: which,
            x: *x,
            omega,
        });
    }
    if flagged_cells > 0 {
        log::warn!(
            "{} of {} spectral cells exceed gain {:.3e} (first at x = {}, omega = {}){}",
            flagged_cells,
            total_cells,
            options.max_gain,
            flagged_samples[0].0,
            flagged_samples[0].1,
            if options.mode == Mode::Raw { "; zero-filled" } else { "" }
        );
    }
    if options.mode == Mode::Raw && flagged_cells as f64 > options.abort_fraction * total_cells as f64 {
        return Err(SolverError::IllPosedBlowup {
            flagged: flagged_cells,
            total: total_cells,
        });
    }

    let mut field = SolutionField::zeros(x_grid.to_vec(), grid);
    let mut defect = [0.0f64; 4];
    let mut peak = [0.0f64; 4];
    for (r, row) in rows.iter().enumerate() {
        for (c, component) in Component::ALL.iter().enumerate() {
            let values = &row.spectra[c];
            let (worst, top) = hermitian_defect(&grid, values);
            defect[c] = defect[c].max(worst);
            peak[c] = peak[c].max(top);
            let series = inverse_values(&grid, values);
            field
                .component_mut(*component)
                .row_mut(r)
                .iter_mut()
                .zip(series)
                .for_each(|(dst, v)| *dst = v);
        }
    }
    let diagnostics = ReconstructionDiagnostics {
        mode: options.mode,
        total_cells,
        flagged_cells,
        flagged_fraction: flagged_cells as f64 / total_cells as f64,
        nonfinite_cells,
        flagged_samples,
        max_log_gain: rows.iter().map(|r| r.max_log_gain).fold(f64::NEG_INFINITY, f64::max),
        asymmetry: std::array::from_fn(|c| if peak[c] > 0.0 { defect[c] / peak[c] } else { 0.0 }),
    };
    Ok(Reconstruction { field, diagnostics })
}

/// The data side of the stability estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityFunctional {
    /// `‖G0/K‖ + ‖G1/K‖ + ∫₀ʸ ‖F(s)/K‖ ds`; infinite on overflow.
    pub value: f64,
    /// Names the input whose quotient by `K` overflowed.
    pub overflow: Option<String>,
}

/// Evaluates the functional on the imaginary axis in the log domain.
/// The `s`-integral uses the trapezoid rule.
pub fn stability_functional(spectra: &BoundarySpectra, params: &KernelParams) -> StabilityFunctional {
    let grid = spectra.grid();
    let log_k = kernel_exponents(&grid, params);
    let step = grid.omega_step();
    let quotient_norm = |line: &SpectralLine| -> Option<f64> {
        let mut total = 0.0;
        for (v, lk) in line.values().iter().zip(&log_k) {
            let modulus = v.norm();
            if modulus == 0.0 {
                continue;
            }
            let log_energy = 2.0 * (modulus.ln() - lk.re);
            if log_energy > EXP_OVERFLOW {
                return None;
            }
            total += log_energy.exp();
        }
        Some((total * step).sqrt())
    };

    let mut value = 0.0;
    let named = [("g0", &spectra.g0), ("g1", &spectra.g1)];
    for (name, line) in named {
        match quotient_norm(line) {
            Some(norm) => value += norm,
            None => {
                return StabilityFunctional {
                    value: f64::INFINITY,
                    overflow: Some(name.to_string()),
                }
            }
        }
    }
    let last = spectra.source.len().saturating_sub(1);
    for (k, line) in spectra.source.iter().enumerate() {
        let weight = if k == 0 || k == last { 0.5 } else { 1.0 };
        match quotient_norm(line) {
            Some(norm) => value += weight * spectra.ds * norm,
            None => {
                return StabilityFunctional {
                    value: f64::INFINITY,
                    overflow: Some(format!("f(s = {}, ·)", k as f64 * spectra.ds)),
                }
            }
        }
    }
    StabilityFunctional {
        value,
        overflow: None,
    }
}

/// `c → c - a·shift` and `v(t) → e^{-shift·t}·v(t)` for every series, so that
/// `u_shift = e^{-shift·t}·u` solves the shifted problem.
pub fn exp_shift_precondition(
    coeffs: &Coefficients,
    data: &BoundaryData,
    shift: f64,
) -> Result<(Coefficients, BoundaryData)> {
    if !(shift > 0.0 && shift.is_finite()) {
        return Err(SolverError::InvalidShift(shift));
    }
    coeffs.validate()?;
    data.validate()?;
    let shifted = Coefficients {
        c: coeffs.c - coeffs.a * shift,
        ..*coeffs
    };
    let damp = |v: &TimeSeries| {
        let grid = v.grid();
        TimeSeries::new(
            grid,
            v.values()
                .iter()
                .enumerate()
                .map(|(j, x)| x * (-shift * grid.time(j)).exp())
                .collect(),
        )
    };
    let data = BoundaryData {
        g0: damp(&data.g0)?,
        g1: damp(&data.g1)?,
        source: data.source.iter().map(damp).collect::<Result<_, _>>()?,
        ds: data.ds,
    };
    Ok((shifted, data))
}

fn rescale_in_time(field: &SolutionField, rate: f64) -> SolutionField {
    let mut out = field.clone();
    let factors: Vec<f64> = field.t_grid.times().iter().map(|t| (rate * t).exp()).collect();
    let (u, u_t) = (&field.u, &field.u_t);
    for component in Component::ALL {
        let target = out.component_mut(component);
        for ((r, j), value) in target.indexed_iter_mut() {
            *value = match component {
                Component::Ut => factors[j] * (u_t[[r, j]] + rate * u[[r, j]]),
                _ => *value * factors[j],
            };
        }
    }
    out
}

/// Inverse of the shift on a solution: `u = e^{shift·t}·u_shift` and
/// `u_t = e^{shift·t}(∂ₜu_shift + shift·u_shift)`.
pub fn undamp_field(field: &SolutionField, shift: f64) -> SolutionField {
    rescale_in_time(field, shift)
}

/// `u_shift = e^{-shift·t}·u` with the matching `u_t`.
pub fn damp_field(field: &SolutionField, shift: f64) -> SolutionField {
    rescale_in_time(field, -shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{relative_l2, SQRT_2PI};
    use proptest::prelude::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn prod_exp() -> Coefficients {
        Coefficients::new(1.0, 2.0, 0.0).unwrap()
    }

    #[test]
    fn coefficient_validation() {
        assert!(Coefficients::new(0.0, 0.0, -1.0).is_err());
        assert!(Coefficients::new(1.0, f64::NAN, -1.0).is_err());
        let unstable = Coefficients::new(1.0, 0.0, 1.0).unwrap();
        assert_eq!(unstable.mu(), -1.0);
        let err = characteristic_roots(c64(0.0, 0.0), &unstable).unwrap_err();
        assert!(matches!(err, SolverError::NonPositiveMu { .. }));
        assert!(err.to_string().contains("exp_shift_precondition"));
    }

    #[test]
    fn roots_examples() {
        let (l1, l2) = characteristic_roots(c64(0.0, 0.0), &prod_exp()).unwrap();
        assert!((l1 - 0.0).norm() < 1e-15 && (l2 + 2.0).norm() < 1e-15);
        let (l1, l2) = characteristic_roots(c64(3.0, 0.0), &prod_exp()).unwrap();
        assert!((l1 - 1.0).norm() < 1e-15 && (l2 + 3.0).norm() < 1e-15);
    }

    #[test]
    fn boundary_values_collapse_at_origin() {
        let coeffs = Coefficients::new(1.3, -0.4, -2.0).unwrap();
        let (g0, g1) = (c64(0.3, -1.2), c64(-2.0, 0.7));
        for p in [c64(0.0, 0.0), c64(0.0, 17.0), c64(2.0, -40.0)] {
            let u = frequency_solution(0.0, p, g0, g1, &[], 0.1, &coeffs).unwrap();
            let ux = frequency_dx(0.0, p, g0, g1, &[], 0.1, &coeffs).unwrap();
            assert!((u - g0).norm() < 1e-14 * (1.0 + g0.norm()));
            assert!((ux - g1).norm() < 1e-13 * (1.0 + g1.norm()));
        }
    }

    #[test]
    fn pure_growing_mode() {
        let coeffs = prod_exp();
        for p in [c64(0.0, 3.0), c64(0.5, -8.0)] {
            let (l1, _) = characteristic_roots(p, &coeffs).unwrap();
            for x in [0.25, 0.5, 1.0] {
                let u = frequency_solution(x, p, c64(1.0, 0.0), l1, &[], 0.1, &coeffs).unwrap();
                assert!((u - (l1 * x).exp()).norm() < 1e-12 * (l1 * x).exp().norm());
            }
        }
    }

    fn manufactured_profile(p: Complex64, ds: f64, depth: f64) -> Vec<Complex64> {
        let count = (depth / ds).round() as usize + 1;
        (0..count)
            .map(|k| (-(k as f64) * ds).exp() / (SQRT_2PI * (p + 1.0)))
            .collect()
    }

    #[test]
    fn manufactured_transform_matches_closed_form() {
        let coeffs = prod_exp();
        let ds = 1.0 / 16384.0;
        for p in [c64(0.0, 0.0), c64(0.0, 2.5), c64(0.0, -7.0), c64(1.0, 4.0)] {
            let g0 = (SQRT_2PI * (p + 1.0) * (p + 1.0)).inv();
            let profile = manufactured_profile(p, ds, 1.0);
            for x in [0.3f64, 0.75, 1.0] {
                let exact = g0 * (-x).exp();
                let state = frequency_state(x, p, g0, -g0, &profile, ds, &coeffs);
                assert!((state.u - exact).norm() < 1e-6 * exact.norm(), "u at {p}, {x}");
                assert!((state.u_x + exact).norm() < 1e-6 * exact.norm(), "u_x at {p}, {x}");
                let uxx = frequency_dxx(state.u, state.u_x, state.source_at_x, p, &coeffs);
                assert!((uxx - exact).norm() < 1e-6 * exact.norm(), "u_xx at {p}, {x}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let coeffs = Coefficients::new(1.0, 0.5, -1.0).unwrap();
        let ds = 1.0 / 64.0;
        let p = c64(0.0, 5.0);
        // Smooth source so that interpolation between s-nodes does not limit the check.
        let profile: Vec<Complex64> = (0..=64)
            .map(|k| c64((k as f64 * ds).cos(), 0.3 * k as f64 * ds))
            .collect();
        let (g0, g1) = (c64(0.4, 0.1), c64(-0.2, 0.5));
        let h = 1e-4;
        // x on a node keeps the partial-cell rule from introducing a kink.
        let x = 0.5 + h;
        let eval = |x: f64| frequency_state(x, p, g0, g1, &profile, ds, &coeffs);
        let centre = eval(x);
        let dx = (eval(x + h).u - eval(x - h).u) / (2.0 * h);
        assert!((dx - centre.u_x).norm() < 1e-5 * centre.u_x.norm() + 1e-3 * ds * ds);

        let second = (eval(x + h).u - 2.0 * centre.u + eval(x - h).u) / (h * h);
        let uxx = frequency_dxx(centre.u, centre.u_x, centre.source_at_x, p, &coeffs);
        assert!((second - uxx).norm() < 1e-2 * uxx.norm());
    }

    #[test]
    fn frequency_dxx_of_zero_is_zero() {
        let z = c64(0.0, 0.0);
        assert_eq!(frequency_dxx(z, z, z, c64(0.0, 3.0), &prod_exp()), z);
    }

    #[test]
    fn shifted_problem_is_the_transform_at_shifted_frequency() {
        // u_shift = e^{-M t} u has transform U(x, p + M), so both routes must
        // agree at the level of the frequency formulas.
        let coeffs = Coefficients::new(1.0, 0.0, -1.0).unwrap();
        let data = BoundaryData::zeros(TimeGrid::new(0.1, 8).unwrap());
        let shift = 2.0;
        let (shifted, _) = exp_shift_precondition(&coeffs, &data, shift).unwrap();
        assert_eq!(shifted.c, -3.0);
        let ds = 1.0 / 4096.0;
        let g0 = |p: Complex64| (SQRT_2PI * (p + 1.0) * (p + 1.0)).inv();
        let f = |s: f64, p: Complex64| (-s).exp() * (p + 3.0) / (SQRT_2PI * (p + 1.0) * (p + 2.0));
        for omega in [0.0, 1.5, -6.0, 20.0] {
            let p = c64(0.0, omega);
            let q = p + shift;
            let profile: Vec<Complex64> = (0..=4096).map(|k| f(k as f64 * ds, q)).collect();
            let direct = frequency_state(0.8, q, g0(q), -g0(q), &profile, ds, &coeffs);
            let via_shift = frequency_state(0.8, p, g0(q), -g0(q), &profile, ds, &shifted);
            assert!((direct.u - via_shift.u).norm() <= 1e-8 * direct.u.norm());
            assert!((direct.u_x - via_shift.u_x).norm() <= 1e-8 * direct.u_x.norm());
        }
    }

    #[test]
    fn shift_rejects_nonpositive_and_round_trips_fields() {
        let grid = TimeGrid::new(0.05, 64).unwrap();
        let coeffs = Coefficients::new(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            exp_shift_precondition(&coeffs, &BoundaryData::zeros(grid), 0.0),
            Err(SolverError::InvalidShift(_))
        ));
        let (shifted, _) = exp_shift_precondition(&coeffs, &BoundaryData::zeros(grid), 2.0).unwrap();
        assert_eq!(shifted.mu(), 1.0);

        let mut field = SolutionField::zeros(vec![0.0, 0.5], grid);
        for component in Component::ALL {
            for ((r, j), v) in field.component_mut(component).indexed_iter_mut() {
                *v = (r as f64 + 1.0) * (0.3 * j as f64).sin();
            }
        }
        let back = undamp_field(&damp_field(&field, 1.5), 1.5);
        for component in Component::ALL {
            let a = back.component(component).as_slice().unwrap();
            let b = field.component(component).as_slice().unwrap();
            assert!(relative_l2(a, b) < 1e-12);
        }
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let grid = TimeGrid::new(1.0 / 32.0, 1 << 10).unwrap();
        let params = KernelParams::new(0.01, 1.0, 0.75).unwrap();
        let data = BoundaryData::zeros(grid);
        for mode in [Mode::Raw, Mode::Premollified] {
            let out = reconstruct_field(&data, &prod_exp(), &params, &[0.0, 0.5, 1.0], &ReconstructOptions::new(mode))
                .unwrap();
            assert_eq!(w_norm(&out.field), 0.0);
            assert_eq!(out.diagnostics.max_asymmetry(), 0.0);
        }
    }

    #[test]
    fn raw_mode_aborts_when_most_cells_blow_up() {
        let grid = TimeGrid::new(1e-3, 1 << 12).unwrap();
        let params = KernelParams::new(0.01, 1.0, 0.75).unwrap();
        let data = BoundaryData::zeros(grid);
        let options = ReconstructOptions {
            max_gain: 10.0,
            ..ReconstructOptions::new(Mode::Raw)
        };
        let err = reconstruct_field(&data, &prod_exp(), &params, &[1.0], &options).unwrap_err();
        assert!(matches!(err, SolverError::IllPosedBlowup { .. }));
        assert!(err.to_string().contains("ill-posed blowup"));
    }

    #[test]
    fn rejects_points_outside_strip() {
        let grid = TimeGrid::new(0.1, 16).unwrap();
        let data = BoundaryData::new(
            TimeSeries::zeros(grid),
            TimeSeries::zeros(grid),
            vec![TimeSeries::zeros(grid); 3],
            0.5,
        )
        .unwrap();
        let params = KernelParams::new(0.1, 1.0, 0.75).unwrap();
        let options = ReconstructOptions::new(Mode::Premollified);
        let err = reconstruct_field(&data, &prod_exp(), &params, &[0.0, 1.5], &options).unwrap_err();
        assert!(matches!(err, SolverError::OutsideStrip { .. }));
        assert!(reconstruct_field(&data, &prod_exp(), &params, &[0.5, 0.2], &options).is_err());
    }

    #[test]
    fn boundary_data_validation() {
        let g = TimeGrid::new(0.1, 16).unwrap();
        let h = TimeGrid::new(0.2, 16).unwrap();
        assert!(matches!(
            BoundaryData::new(TimeSeries::zeros(g), TimeSeries::zeros(h), vec![], 1.0),
            Err(SolverError::GridMismatch)
        ));
        assert!(matches!(
            BoundaryData::new(TimeSeries::zeros(g), TimeSeries::zeros(g), vec![TimeSeries::zeros(g)], 0.1),
            Err(SolverError::InvalidSourceGrid { .. })
        ));
        let data = BoundaryData::new(TimeSeries::zeros(g), TimeSeries::zeros(g), vec![TimeSeries::zeros(g); 5], 0.25)
            .unwrap();
        assert_eq!(data.depth(), Some(1.0));
    }

    #[test]
    fn stability_functional_zero_and_cancellation() {
        let grid = TimeGrid::new(1.0 / 32.0, 1 << 10).unwrap();
        let params = KernelParams::new(0.1, 1.0, 0.75).unwrap();
        let zero = BoundarySpectra::from_data(&BoundaryData::zeros(grid)).unwrap();
        assert_eq!(stability_functional(&zero, &params).value, 0.0);

        let g0 = TimeSeries::from_fn(grid, |t| t * (-t).exp()).unwrap();
        let g1 = g0.scaled(-1.0);
        let source: Vec<TimeSeries> = (0..5)
            .map(|k| TimeSeries::from_fn(grid, |t| (-(t + 0.25 * k as f64)).exp()).unwrap())
            .collect();
        let data = BoundaryData::new(g0, g1, source, 0.25).unwrap();
        let raw = BoundarySpectra::from_data(&data).unwrap();
        let expected = raw.g0.l2_norm()
            + raw.g1.l2_norm()
            + 0.25
                * raw
                    .source
                    .iter()
                    .enumerate()
                    .map(|(k, l)| if k == 0 || k == 4 { 0.5 } else { 1.0 } * l.l2_norm())
                    .sum::<f64>();
        let value = stability_functional(&raw.mollified(&params), &params).value;
        assert!((value - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn stability_functional_names_overflowing_input() {
        let grid = TimeGrid::new(1e-3, 1 << 12).unwrap();
        let params = KernelParams::new(30.0, 1.0, 0.75).unwrap();
        let g = TimeSeries::from_fn(grid, |t| t * (-t).exp()).unwrap();
        let data = BoundaryData::new(TimeSeries::zeros(grid), g, vec![], 1.0).unwrap();
        let out = stability_functional(&BoundarySpectra::from_data(&data).unwrap(), &params);
        assert!(out.value.is_infinite());
        assert_eq!(out.overflow.as_deref(), Some("g1"));
    }

    #[test]
    fn w_norm_examples() {
        let grid = TimeGrid::new(0.25, 16).unwrap();
        let mut field = SolutionField::zeros(vec![0.0, 1.0], grid);
        assert_eq!(w_norm(&field), 0.0);
        field.u.row_mut(1).fill(1.0);
        field.u_t.row_mut(0).fill(2.0);
        assert!((w_norm(&field) - 4.0).abs() < 1e-15);
        assert_eq!(w_norm(&field.scaled(2.0)), 2.0 * w_norm(&field));
    }

    proptest! {
        #[test]
        fn vieta_identities(
            re in 0.0f64..1e3,
            im in -1e6f64..1e6,
            a in 0.01f64..10.0,
            b in -10.0f64..10.0,
            mu in 1e-3f64..10.0,
        ) {
            let coeffs = Coefficients::new(a, b, b * b / 4.0 - mu).unwrap();
            let p = c64(re, im);
            let (l1, l2) = characteristic_roots(p, &coeffs).unwrap();
            prop_assert!((l1 * l2 - (coeffs.c - a * p)).norm() <= 1e-12 * (1.0 + p.norm()));
            prop_assert!((l1 + l2 + b).norm() <= 1e-12);
            prop_assert!(l1.re > l2.re);
        }

        #[test]
        fn frequency_solution_is_conjugate_symmetric(
            omega in 0.0f64..200.0,
            x in 0.0f64..1.0,
            g in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        ) {
            let coeffs = Coefficients::new(1.0, 0.3, -0.5).unwrap();
            let (g0, g1) = (c64(g.0, g.1), c64(g.2, g.3));
            let profile: Vec<Complex64> = (0..9).map(|k| c64(0.1 * k as f64, -0.05 * k as f64)).collect();
            let conj_profile: Vec<Complex64> = profile.iter().map(|z| z.conj()).collect();
            let up = frequency_state(x, c64(0.0, omega), g0, g1, &profile, 0.125, &coeffs);
            let down = frequency_state(x, c64(0.0, -omega), g0.conj(), g1.conj(), &conj_profile, 0.125, &coeffs);
            prop_assert!((up.u.conj() - down.u).norm() <= 1e-10 * (1.0 + up.u.norm()));
            prop_assert!((up.u_x.conj() - down.u_x).norm() <= 1e-10 * (1.0 + up.u_x.norm()));
        }
    }
}
