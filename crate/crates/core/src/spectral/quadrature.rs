//! Endpoint-corrected cubic quadrature for one-sided Fourier integrals.
//!
//! The plain DFT treats samples as a periodic sequence, which is accurate to
//! `O(dt²·ω)` at low frequency and `O(1)` near the Nyquist limit. Downstream
//! exponential amplification turns that into large errors, so data entering
//! the solver is transformed with the cubic-interpolation rule
//!
//! ```text
//! ∫₀^T e^{iθ t/dt} h(t) dt ≈ dt·[W(θ)·Σ_k h_k e^{iθk} + Σ_{j<4} α_j(θ) h_j]
//! ```
//!
//! with `θ = -ω·dt`. The right-endpoint correction is omitted; data is
//! required to have decayed at the horizon.

#![allow(clippy::excessive_precision)]

use num_complex::Complex64;

use super::{raw_dft, SpectralLine, TimeSeries, SQRT_2PI};

/// Closed forms lose precision for small `θ`; switch to series below this.
const SERIES_CUTOFF: f64 = 0.5;

// Taylor coefficients in powers of θ²; imaginary parts carry an extra factor θ.
const W_SERIES: [f64; 10] = [
    1.0,
    0.0,
    -0.015277777777777777778,
    0.001521164021164021164,
    -0.000076609347442680776014,
    2.4718080273635829191e-6,
    -5.6366096792684094271e-8,
    9.6214065019179657628e-10,
    -1.2786070254968308017e-11,
    1.3620230326958502309e-13,
];
const A0_RE: [f64; 10] = [
    -0.66666666666666666667,
    0.022222222222222222222,
    0.0068121693121693121693,
    -0.00074514991181657848325,
    0.000038129308962642295976,
    -1.2345581128649911719e-6,
    2.8175592411703522815e-8,
    -4.8103908668196111569e-10,
    6.3929326435647460917e-12,
    -6.8100881172334181049e-14,
];
const A0_IM: [f64; 10] = [
    0.044444444444444444444,
    0.019047619047619047619,
    -0.0028218694885361552028,
    0.00018384907273796162685,
    -7.2355627911183466739e-6,
    1.9420125240231060337e-7,
    -3.8078676941629530072e-9,
    5.7107240461413839667e-11,
    -6.772826362000563195e-13,
    6.5167531171083791672e-15,
];
const A1_RE: [f64; 10] = [
    0.29166666666666666667,
    -0.038888888888888888889,
    0.0014467592592592592593,
    -0.00002700617283950617284,
    3.0688832772166105499e-7,
    -2.3553264294005034746e-9,
    1.3047973117417561862e-11,
    -5.4667224390051792618e-14,
    1.7934685896385412666e-16,
    -4.7330930207837049886e-19,
];
const A1_IM: [f64; 10] = [
    0.097222222222222222222,
    -0.005952380952380952381,
    0.00015156525573192239859,
    -2.1711827267382822938e-6,
    2.0073804796027018249e-8,
    -1.3000178344093688009e-10,
    6.2320635804659043584e-13,
    -2.3017778690548123207e-15,
    6.7526646668699851246e-18,
    -1.611737571096118349e-20,
];
const A2_RE: [f64; 10] = [
    -0.16666666666666666667,
    0.022222222222222222222,
    -0.00082671957671957671958,
    0.000015432098765432098765,
    -1.7536475869809203143e-7,
    1.3459008168002876998e-9,
    -7.455984638524321064e-12,
    3.1238413937172452924e-14,
    -1.024839194079166438e-16,
    2.7046245833049742792e-19,
];
const A2_IM: [f64; 10] = [
    -0.077777777777777777778,
    0.0047619047619047619048,
    -0.00012125220458553791887,
    1.7369461813906258351e-6,
    -1.6059043836821614599e-8,
    1.0400142675274950407e-10,
    -4.9856508643727234867e-13,
    1.8414222952438498566e-15,
    -5.4021317334959880997e-18,
    1.2893900568768946792e-20,
];
const A3_RE: [f64; 10] = [
    0.041666666666666666667,
    -0.0055555555555555555556,
    0.00020667989417989417989,
    -3.8580246913580246914e-6,
    4.3841189674523007856e-8,
    -3.3647520420007192494e-10,
    1.863996159631080266e-12,
    -7.8096034842931132311e-15,
    2.5620979851979160951e-17,
    -6.7615614582624356979e-20,
];
const A3_IM: [f64; 10] = [
    0.019444444444444444444,
    -0.0011904761904761904762,
    0.000030313051146384479718,
    -4.3423654534765645877e-7,
    4.0147609592054036498e-9,
    -2.6000356688187376018e-11,
    1.2464127160931808717e-13,
    -4.6035557381096246415e-16,
    1.3505329333739970249e-18,
    -3.2234751421922366981e-21,
];

/// Interior weight and left-endpoint corrections at one `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierWeights {
    pub interior: f64,
    pub endpoint: [Complex64; 4],
}

fn horner(coeffs: &[f64; 10], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Weights of the cubic rule at `θ`.
pub fn fourier_weights(theta: f64) -> FourierWeights {
    let t2 = theta * theta;
    if theta.abs() < SERIES_CUTOFF {
        let pair = |re: &[f64; 10], im: &[f64; 10]| {
            Complex64::new(horner(re, t2), theta * horner(im, t2))
        };
        return FourierWeights {
            interior: horner(&W_SERIES, t2),
            endpoint: [
                pair(&A0_RE, &A0_IM),
                pair(&A1_RE, &A1_IM),
                pair(&A2_RE, &A2_IM),
                pair(&A3_RE, &A3_IM),
            ],
        };
    }
    let t4 = t2 * t2;
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let q = 6.0 + t2;
    let interior = q / (3.0 * t4) * (3.0 - 4.0 * c + c2);
    let a0 = Complex64::new(
        (-42.0 + 5.0 * t2) + q * (8.0 * c - c2),
        (-12.0 * theta + 6.0 * t2 * theta) + q * s2,
    ) / (6.0 * t4);
    let a1 = Complex64::new(
        14.0 * (3.0 - t2) - 7.0 * q * c,
        30.0 * theta - 5.0 * q * s,
    ) / (6.0 * t4);
    let a2 = Complex64::new(
        -4.0 * (3.0 - t2) + 2.0 * q * c,
        -12.0 * theta + 2.0 * q * s,
    ) / (3.0 * t4);
    let a3 = Complex64::new(2.0 * (3.0 - t2) - q * c, 6.0 * theta - q * s) / (6.0 * t4);
    FourierWeights {
        interior,
        endpoint: [a0, a1, a2, a3],
    }
}

/// `(1/√(2π)) ∫₀^T e^{-iωt} v(t) dt` on the line grid by the cubic rule.
///
/// Unlike [`super::forward_transform`] this treats the samples as a smooth
/// function with a possible jump at `t = 0`, and is consistent with
/// differentiation in `t` up to `O(dt⁴)` for smooth data.
pub fn fourier_integral(v: &TimeSeries) -> SpectralLine {
    super::check_series(v);
    let grid = v.grid();
    let dt = grid.dt();
    let h = v.values();
    let scale = dt / SQRT_2PI;
    let values = raw_dft(&grid, h)
        .into_iter()
        .zip(grid.omegas())
        .map(|(sum, omega)| {
            let w = fourier_weights(-omega * dt);
            let correction: Complex64 = w.endpoint.iter().zip(h).map(|(a, hj)| a * hj).sum();
            (sum * w.interior + correction) * scale
        })
        .collect();
    SpectralLine::new(0.0, grid, values).expect("line built on the series grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{forward_transform, TimeGrid};

    #[test]
    fn series_matches_closed_form_past_cutoff() {
        for theta in [0.6, -0.6, 1.0] {
            let closed = fourier_weights(theta);
            let t2 = theta * theta;
            assert!((closed.interior - horner(&W_SERIES, t2)).abs() < 1e-10);
            let tables = [
                (&A0_RE, &A0_IM),
                (&A1_RE, &A1_IM),
                (&A2_RE, &A2_IM),
                (&A3_RE, &A3_IM),
            ];
            for (j, (re, im)) in tables.into_iter().enumerate() {
                let series = Complex64::new(horner(re, t2), theta * horner(im, t2));
                assert!((closed.endpoint[j] - series).norm() < 1e-10, "alpha{j} at {theta}");
            }
        }
    }

    #[test]
    fn zero_frequency_weights_form_left_trapezoid_end() {
        let w = fourier_weights(0.0);
        assert_eq!(w.interior, 1.0);
        let total: Complex64 = w.endpoint.iter().sum();
        assert!((total.re + 0.5).abs() < 1e-15);
        assert_eq!(total.im, 0.0);
    }

    #[test]
    fn matches_analytic_transforms() {
        let grid = TimeGrid::new(1.0 / 32.0, 1 << 14).unwrap();
        let e = TimeSeries::from_fn(grid, |t| (-t).exp()).unwrap();
        let te = TimeSeries::from_fn(grid, |t| t * (-t).exp()).unwrap();
        let le = fourier_integral(&e);
        let lte = fourier_integral(&te);
        let mut worst = 0.0f64;
        for (i, omega) in grid.omegas().into_iter().enumerate() {
            let r = Complex64::new(1.0, omega).inv() / SQRT_2PI;
            worst = worst.max((le.values()[i] - r).norm());
            worst = worst.max((lte.values()[i] - r * r * SQRT_2PI).norm());
        }
        assert!(worst < 1e-7, "worst abs error {worst}");
    }

    #[test]
    fn beats_plain_dft_near_nyquist() {
        let grid = TimeGrid::new(1.0 / 32.0, 1 << 12).unwrap();
        let e = TimeSeries::from_fn(grid, |t| (-t).exp()).unwrap();
        let quad = fourier_integral(&e);
        let plain = forward_transform(&e);
        let i = grid.n() - 1;
        let exact = Complex64::new(1.0, grid.omega(i)).inv() / SQRT_2PI;
        assert!((quad.values()[i] - exact).norm() * 1e3 < (plain.values()[i] - exact).norm());
    }
}
