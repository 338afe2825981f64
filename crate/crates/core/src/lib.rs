//! Numerical laboratory for the dissipative third-order wave equation
//!
//! ```text
//!   -eps u_xxt + u_tt - c^2 u_xx = f(x, t, u, u_x, u_xx, u_t),   x in (0,1),
//!   u(0,t) = u(1,t) = 0,
//! ```
//!
//! the equation of a viscoelastic (Kelvin-Voigt) rod, and of perturbed
//! sine-Gordon dynamics. The crate simulates trajectories, evaluates the
//! energy functionals `V` and `W` and the Sobolev-like distance `d` along
//! them, computes every explicit stability constant in closed form, and
//! verifies the certified decay envelopes (exponential and algebraic)
//! against simulation through a scalar comparison principle.
//!
//! Module map:
//! - [`grid`]: uniform grid on [0,1], stencils, quadrature, sine-series states;
//! - [`forcing`]: the built-in forcing terms and user callbacks with bound
//!   certificates;
//! - [`sim`]: IMEX (Crank-Nicolson + explicit predictor-corrector) time
//!   integration;
//! - [`functionals`]: `d^2`, `d_1^2`, `V`, `V_1`, `W`;
//! - [`certificates`]: the explicit constants and hypothesis verdicts;
//! - [`comparison`]: the scalar comparison ODE, averaged-growth limit,
//!   transient budget, attraction radius, and the decay envelopes.

// negated comparisons like !(x > 0.0) are deliberate: they reject NaN,
// which x <= 0.0 would let through
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// stencil loops index several node-aligned arrays at once
#![allow(clippy::needless_range_loop)]

pub mod certificates;
pub mod comparison;
pub mod error;
pub mod forcing;
pub mod functionals;
pub mod grid;
pub mod sim;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
