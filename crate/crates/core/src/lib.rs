//! Frequency-domain reconstruction for the lateral Cauchy problem
//!
//! ```text
//! a·u_t = u_xx + b·u_x + c·u + f,   u(x, 0) = 0,   u(0, t) = g0(t),   u_x(0, t) = g1(t)
//! ```
//!
//! on a strip `0 ≤ x ≤ y`, `t ≥ 0`, with constant coefficients and
//! `μ = b²/4 - c > 0`. The problem is exponentially ill-posed; the solution is
//! regularized by the causal smoothing kernel `K(p) = exp(-α(p+β)^q)`.
//!
//! - [`spectral`]: time grids, transforms, Hardy-norm estimates, CSV I/O.
//! - [`kernel`]: the smoothing kernel and mollification.
//! - [`solver`]: reconstruction of `u, u_x, u_xx, u_t` and stability diagnostics.
//! - [`oracle`]: manufactured solutions, a forward parabolic solver and probes.

// Validation negates comparisons so that NaN is rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod kernel;
pub mod oracle;
pub mod solver;
pub mod spectral;

pub use num_complex::Complex64;
