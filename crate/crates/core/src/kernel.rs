//! The causal smoothing kernel `K(p) = exp(-α(p+β)^q)` and mollification.
//!
//! For `Re p ≥ 0` and `β > 0`, `|Arg(p+β)| < π/2`, so with the principal
//! branch `Re (p+β)^q ≥ cos(qπ/2)·|p+β|^q` and `|K(p)| ≤ exp(-α·M·|p+β|^q)`
//! where `M = cos(qπ/2)` is the decay margin. Because `q > 1/2` this decay
//! beats the `exp(x·√(a|p|))` growth of the backward spatial march.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{
    forward_transform, inverse_values, SpectralLine, TimeGrid, TimeSeries, SQRT_2PI,
};

/// Largest `x` with `exp(x)` finite in `f64`.
pub const EXP_OVERFLOW: f64 = 709.0;

/// Largest denominator accepted for `q` in strict mode.
pub const STRICT_Q_MAX_DENOMINATOR: u32 = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("beta must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("q must lie strictly between 1/2 and 1, got {0}")]
    InvalidQ(f64),
    #[error("strict mode requires rational q with denominator <= {STRICT_Q_MAX_DENOMINATOR}, got {0}")]
    IrrationalQ(f64),
    #[error("principal power needs Re z > 0, got {0}")]
    OutsideDomain(Complex64),
    #[error("kernel is defined on Re p >= 0, got {0}")]
    OutsideHalfPlane(Complex64),
}

/// Parameters `(α, β, q)` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
}

impl KernelParams {
    pub fn new(alpha: f64, beta: f64, q: f64) -> Result<Self, KernelError> {
        let params = Self { alpha, beta, q };
        params.validate()?;
        Ok(params)
    }

    /// Checks `α > 0`, `β > 0`, `1/2 < q < 1`.
    pub fn validate(&self) -> Result<(), KernelError> {
        self.errors().into_iter().next().map_or(Ok(()), Err)
    }

    /// Every violated constraint, in field order.
    pub fn errors(&self) -> Vec<KernelError> {
        let mut errors = Vec::new();
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            errors.push(KernelError::InvalidAlpha(self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            errors.push(KernelError::InvalidBeta(self.beta));
        }
        if !(self.q > 0.5 && self.q < 1.0) {
            errors.push(KernelError::InvalidQ(self.q));
        }
        errors
    }

    /// As [`validate`](Self::validate), and additionally requires `q` to be a
    /// fraction with denominator at most [`STRICT_Q_MAX_DENOMINATOR`].
    pub fn validate_strict(&self) -> Result<(), KernelError> {
        self.validate()?;
        if rational_approximation(self.q).is_none() {
            return Err(KernelError::IrrationalQ(self.q));
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }

    pub fn decay_margin(&self) -> f64 {
        decay_margin(self.q)
    }
}

/// `(numerator, denominator)` with `|q - n/d| ≤ 1e-12` and the smallest such `d ≤ 1000`.
pub fn rational_approximation(q: f64) -> Option<(i64, u32)> {
    (1..=STRICT_Q_MAX_DENOMINATOR).find_map(|den| {
        let num = (q * den as f64).round();
        ((q - num / den as f64).abs() <= 1e-12).then_some((num as i64, den))
    })
}

/// `|z|^q·e^{i·q·Arg z}` on `Re z > 0`.
pub fn principal_power(z: Complex64, q: f64) -> Result<Complex64, KernelError> {
    if !(z.re > 0.0) {
        return Err(KernelError::OutsideDomain(z));
    }
    Ok(Complex64::from_polar(z.norm().powf(q), q * z.arg()))
}

/// `ln K(p) = -α(p+β)^q`.
pub fn kernel_exponent(p: Complex64, params: &KernelParams) -> Result<Complex64, KernelError> {
    if p.re < 0.0 {
        return Err(KernelError::OutsideHalfPlane(p));
    }
    Ok(-params.alpha * principal_power(p + params.beta, params.q)?)
}

/// `K(p) = exp(-α(p+β)^q)` for `Re p ≥ 0`.
pub fn kernel_eval(p: Complex64, params: &KernelParams) -> Result<Complex64, KernelError> {
    kernel_exponent(p, params).map(Complex64::exp)
}

/// `M = cos(qπ/2)`, a lower bound for `cos(q·Arg(p+β))` on the closed right half-plane.
pub fn decay_margin(q: f64) -> f64 {
    (q * PI / 2.0).cos()
}

/// `ln K(iω)` on the line grid.
pub fn kernel_exponents(grid: &TimeGrid, params: &KernelParams) -> Vec<Complex64> {
    grid.omegas()
        .into_iter()
        .map(|omega| {
            kernel_exponent(Complex64::new(0.0, omega), params)
                .expect("imaginary axis lies in the closed half-plane")
        })
        .collect()
}

/// `K(iω)` on the line grid.
pub fn kernel_multiplier(grid: &TimeGrid, params: &KernelParams) -> Vec<Complex64> {
    kernel_exponents(grid, params).into_iter().map(Complex64::exp).collect()
}

/// `v_α = F⁻¹[K(iω)·F v]`.
///
/// `|K(iω)| < 1` on the axis, so `‖v_α‖ ≤ ‖v‖`.
pub fn mollify(v: &TimeSeries, params: &KernelParams) -> TimeSeries {
    let grid = v.grid();
    let line = forward_transform(v).multiplied(&kernel_multiplier(&grid, params));
    TimeSeries::new(grid, inverse_values(&grid, line.values()))
        .expect("inverse of a finite line is finite")
}

/// Grid-level membership test for the class of functions whose transform
/// divided by `K` is square-integrable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassDiagnostic {
    /// Discrete `‖V/K‖_{L₂(dω)}`; infinite on overflow.
    pub norm_estimate: f64,
    /// Share of `‖V/K‖²` carried by the top decade of `|ω|`.
    pub tail_fraction: f64,
    pub in_class: bool,
    /// First `|ω|` (scanning outward from zero) where `|V/K|` overflows.
    pub overflow_omega: Option<f64>,
}

/// Default share of energy allowed in the top decade of `|ω|`.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 0.01;

/// Transform samples below this fraction of the peak are rounding noise and
/// count as zero; dividing them by a tiny `K` would otherwise dominate.
pub const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Evaluates `‖V(iω)/K(iω)‖` in the log domain.
pub fn class_c_diagnostic(
    v: &TimeSeries,
    params: &KernelParams,
    tail_threshold: f64,
) -> ClassDiagnostic {
    line_class_diagnostic(&forward_transform(v), params, tail_threshold)
}

/// [`class_c_diagnostic`] for a line already in the transform domain.
pub fn line_class_diagnostic(
    line: &SpectralLine,
    params: &KernelParams,
    tail_threshold: f64,
) -> ClassDiagnostic {
    let grid = line.grid();
    let omegas = grid.omegas();
    let exponents = kernel_exponents(&grid, params);
    let tail_start = grid.nyquist() / 10.0;
    let floor = ROUNDOFF_FLOOR * line.max_abs();

    let mut total = 0.0;
    let mut tail = 0.0;
    let mut overflow: Option<f64> = None;
    for ((omega, value), log_k) in omegas.iter().zip(line.values()).zip(&exponents) {
        let modulus = value.norm();
        if modulus <= floor {
            continue;
        }
        let log_ratio = modulus.ln() - log_k.re;
        if 2.0 * log_ratio > EXP_OVERFLOW {
            let w = omega.abs();
            overflow = Some(overflow.map_or(w, |o| o.min(w)));
            continue;
        }
        let energy = (2.0 * log_ratio).exp();
        total += energy;
        if omega.abs() >= tail_start {
            tail += energy;
        }
    }
    if overflow.is_some() {
        return ClassDiagnostic {
            norm_estimate: f64::INFINITY,
            tail_fraction: 1.0,
            in_class: false,
            overflow_omega: overflow,
        };
    }
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    ClassDiagnostic {
        norm_estimate: (total * grid.omega_step()).sqrt(),
        tail_fraction,
        in_class: tail_fraction <= tail_threshold,
        overflow_omega: None,
    }
}

/// Time-domain samples of the smoothing kernel `k = F⁻¹K`.
#[derive(Debug, Clone)]
pub struct KernelTimeDomain {
    /// `k(t_j)` for `t_j ≥ 0`.
    pub kernel: TimeSeries,
    /// `Σ_{t<0}|k|/Σ|k|` on the two-sided grid; zero for an exactly causal kernel.
    pub causality_defect: f64,
    /// `Σ_{t≥0} k_j dt`, which approximates `√(2π)·K(0)`.
    pub total_mass: f64,
}

/// Inverts `K(iω)` on a two-sided grid of `2n` samples with step `dt`.
///
/// Samples `t = -n·dt, ..., -dt` measure the causality defect and are then
/// discarded.
pub fn kernel_time_domain(params: &KernelParams, grid: &TimeGrid) -> KernelTimeDomain {
    let n = grid.n();
    let wide = 2 * n;
    let step = 2.0 * PI / (wide as f64 * grid.dt());
    let mut buf: Vec<Complex64> = (0..wide)
        .map(|bin| {
            let m = if bin <= n { bin as f64 } else { bin as f64 - wide as f64 };
            kernel_eval(Complex64::new(0.0, m * step), params).expect("axis is in the half-plane")
        })
        .collect();
    buf[n].im = 0.0;
    FftPlanner::new().plan_fft_inverse(wide).process(&mut buf);
    let scale = SQRT_2PI / (wide as f64 * grid.dt());
    let samples: Vec<f64> = buf.iter().map(|z| z.re * scale).collect();

    let (causal, acausal) = samples.split_at(n);
    let l1 = |s: &[f64]| s.iter().map(|v| v.abs()).sum::<f64>();
    let total_l1 = l1(&samples);
    let causality_defect = if total_l1 > 0.0 { l1(acausal) / total_l1 } else { 0.0 };
    let total_mass = causal.iter().sum::<f64>() * grid.dt();
    KernelTimeDomain {
        kernel: TimeSeries::new(*grid, causal.to_vec()).expect("finite kernel samples"),
        causality_defect,
        total_mass,
    }
}
