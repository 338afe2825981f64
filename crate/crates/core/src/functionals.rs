//! The distance metrics and energy functionals evaluated on states.
//!
//! With (phi, psi) = (u, u_t):
//!
//! ```text
//! d^2   = int( phi^2 + phi_x^2 + phi_xx^2 + psi^2 )
//! d1^2  = d^2 + int( psi_x^2 )
//! V     = 1/2 int( (eps phi_xx - psi)^2 + gamma psi^2 + c^2 (1+gamma) phi_x^2 )
//! V1    = V + eps/2 int( eps psi_x^2 - 2 c^2 psi phi_xx )
//! W     = V - (1+gamma) int( P(phi(x)) ),   P(z) = int_0^z F
//! ```
//!
//! All integrals are the trapezoid rule of [`crate::grid`]; derivatives are
//! its stencils. The sandwich c1^2 d^2 <= V <= c2^2 d^2 (constants from
//! [`crate::certificates`]) holds discretely because its proof is pointwise
//! algebra plus the two integral inequalities
//! int(phi_x^2) >= int(phi^2) and int(phi_xx^2) >= int(phi_x^2),
//! which carry large margins on the states this crate produces.

use crate::forcing::Forcing;
use crate::grid::{trapezoid, DiffOrder, State};
use crate::sim::PdeParams;
use crate::{Error, Result};

fn require_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.5 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "gamma must exceed 1/2, got {gamma}"
        )))
    }
}

/// Squared distance of a state from the null solution:
/// `int(u^2 + u_x^2 + u_xx^2 + v^2)`.
pub fn distance_sq(state: &State) -> f64 {
    let u = state.u().values();
    let v = state.v().values();
    let ux = state.u().derivative(DiffOrder::First);
    let uxx = state.u().derivative(DiffOrder::Second);
    let integrand: Vec<f64> = (0..u.len())
        .map(|i| {
            u[i] * u[i]
                + ux.values()[i] * ux.values()[i]
                + uxx.values()[i] * uxx.values()[i]
                + v[i] * v[i]
        })
        .collect();
    trapezoid(&integrand, state.grid().h())
}

/// The stronger metric `d^2 + int(v_x^2)`; always >= `distance_sq`.
pub fn distance1_sq(state: &State) -> f64 {
    let vx = state.v().derivative(DiffOrder::First);
    let integrand: Vec<f64> = vx.values().iter().map(|&g| g * g).collect();
    distance_sq(state) + trapezoid(&integrand, state.grid().h())
}

/// The energy functional
/// `V = 1/2 int( (eps u_xx - v)^2 + gamma v^2 + c^2(1+gamma) u_x^2 )`.
///
/// Requires gamma > 1/2 so the sandwich constants exist.
pub fn lyapunov_v(state: &State, gamma: f64, params: &PdeParams) -> Result<f64> {
    require_gamma(gamma)?;
    let eps = params.epsilon;
    let c2 = params.c_sq;
    let v = state.v().values();
    let ux = state.u().derivative(DiffOrder::First);
    let uxx = state.u().derivative(DiffOrder::Second);
    let integrand: Vec<f64> = (0..v.len())
        .map(|i| {
            let a = eps * uxx.values()[i] - v[i];
            a * a + gamma * v[i] * v[i] + c2 * (1.0 + gamma) * ux.values()[i] * ux.values()[i]
        })
        .collect();
    Ok(0.5 * trapezoid(&integrand, state.grid().h()))
}

/// The strengthened functional for the d1 metric:
/// `V1 = V + eps/2 int( eps v_x^2 - 2 c^2 v u_xx )`.
///
/// Shares gamma with the accompanying `V`.
pub fn lyapunov_v1(state: &State, gamma: f64, params: &PdeParams) -> Result<f64> {
    let v_part = lyapunov_v(state, gamma, params)?;
    let eps = params.epsilon;
    let c2 = params.c_sq;
    let v = state.v().values();
    let vx = state.v().derivative(DiffOrder::First);
    let uxx = state.u().derivative(DiffOrder::Second);
    let integrand: Vec<f64> = (0..v.len())
        .map(|i| eps * vx.values()[i] * vx.values()[i] - 2.0 * c2 * v[i] * uxx.values()[i])
        .collect();
    Ok(v_part + 0.5 * eps * trapezoid(&integrand, state.grid().h()))
}

/// The potential-augmented functional
/// `W = V - (1+gamma) int( P(u(x)) )` with `P` the forcing's potential.
///
/// Since P <= 0 for admissible forcings, W >= V. Fails when the forcing
/// declares no potential.
pub fn lyapunov_w(state: &State, gamma: f64, params: &PdeParams, forcing: &Forcing) -> Result<f64> {
    let v_part = lyapunov_v(state, gamma, params)?;
    if !forcing.has_potential() {
        return Err(Error::UnsupportedFunctional(
            "W needs a forcing with a declared potential".into(),
        ));
    }
    let u = state.u().values();
    let integrand: Vec<f64> = u
        .iter()
        .map(|&ui| forcing.potential(ui).expect("potential checked above"))
        .collect();
    Ok(v_part - (1.0 + gamma) * trapezoid(&integrand, state.grid().h()))
}

/// One bundled functional evaluation, as recorded along trajectories.
#[derive(Clone, Copy, Debug)]
pub struct FunctionalValues {
    pub d2: f64,
    pub d1_sq: Option<f64>,
    pub v: f64,
    pub v1: Option<f64>,
    pub w: Option<f64>,
    pub gamma: f64,
}

impl FunctionalValues {
    pub fn compute(
        state: &State,
        gamma: f64,
        params: &PdeParams,
        forcing: Option<&Forcing>,
        with_d1: bool,
        with_v1: bool,
    ) -> Result<FunctionalValues> {
        let d2 = distance_sq(state);
        let v = lyapunov_v(state, gamma, params)?;
        let w = match forcing {
            Some(f) if f.has_potential() => Some(lyapunov_w(state, gamma, params, f)?),
            _ => None,
        };
        Ok(FunctionalValues {
            d2,
            d1_sq: with_d1.then(|| distance1_sq(state)),
            v,
            v1: if with_v1 {
                Some(lyapunov_v1(state, gamma, params)?)
            } else {
                None
            },
            w,
            gamma,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::Damping;
    use crate::grid::{random_sine_states, Grid};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(199).unwrap()
    }

    fn params(eps: f64, c_sq: f64) -> PdeParams {
        PdeParams::new(eps, c_sq).unwrap()
    }

    #[test]
    fn zero_state_gives_zero_everything() {
        let s = State::zero(grid(), 0.0);
        let p = params(1.0, 1.0);
        assert_eq!(distance_sq(&s), 0.0);
        assert_eq!(distance1_sq(&s), 0.0);
        assert_eq!(lyapunov_v(&s, 1.0, &p).unwrap(), 0.0);
        assert_eq!(lyapunov_v1(&s, 1.0, &p).unwrap(), 0.0);
        assert_eq!(lyapunov_w(&s, 1.0, &p, &Forcing::Zero).unwrap(), 0.0);
    }

    #[test]
    fn distance_sq_of_first_mode() {
        // u = sin(pi x), v = 0:
        // int u^2 = 1/2, int u_x^2 = pi^2/2, int u_xx^2 = pi^4/2
        let s = State::from_sine_series(&[1.0], &[], &grid(), 0.0);
        let exact = 0.5 * (1.0 + PI.powi(2) + PI.powi(4));
        assert_relative_eq!(distance_sq(&s), exact, max_relative = 2e-4);
    }

    #[test]
    fn distance_sq_of_velocity_mode() {
        let s = State::from_sine_series(&[], &[1.0], &grid(), 0.0);
        assert_relative_eq!(distance_sq(&s), 0.5, max_relative = 1e-6);
    }

    #[test]
    fn distance1_adds_velocity_gradient() {
        let s = State::from_sine_series(&[], &[1.0], &grid(), 0.0);
        let exact = 0.5 + 0.5 * PI.powi(2);
        assert_relative_eq!(distance1_sq(&s), exact, max_relative = 1e-4);
    }

    #[test]
    fn distance1_equals_distance_for_zero_velocity() {
        let s = State::from_sine_series(&[0.3, -0.7], &[], &grid(), 0.0);
        assert_eq!(distance1_sq(&s), distance_sq(&s));
    }

    #[test]
    fn lyapunov_v_of_first_mode() {
        // eps = c = gamma = 1, u = sin(pi x), v = 0:
        // V = 1/2 ( pi^4/2 + 2 * pi^2/2 )
        let s = State::from_sine_series(&[1.0], &[], &grid(), 0.0);
        let exact = 0.5 * (0.5 * PI.powi(4) + PI.powi(2));
        let v = lyapunov_v(&s, 1.0, &params(1.0, 1.0)).unwrap();
        assert_relative_eq!(v, exact, max_relative = 2e-4);
    }

    #[test]
    fn lyapunov_v_rejects_small_gamma() {
        let s = State::zero(grid(), 0.0);
        assert!(matches!(
            lyapunov_v(&s, 0.5, &params(1.0, 1.0)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn v1_equals_v_for_zero_velocity() {
        let s = State::from_sine_series(&[0.4, 0.0, 0.2], &[], &grid(), 0.0);
        let p = params(1.3, 0.8);
        let v = lyapunov_v(&s, 1.0, &p).unwrap();
        let v1 = lyapunov_v1(&s, 1.0, &p).unwrap();
        assert_eq!(v, v1);
    }

    #[test]
    fn v1_of_equal_modes() {
        // u = v = sin(pi x), eps = c = gamma = 1:
        // correction = 1/2 ( pi^2/2 - 2 * (-pi^2/2) ) = 3 pi^2 / 4
        let s = State::from_sine_series(&[1.0], &[1.0], &grid(), 0.0);
        let p = params(1.0, 1.0);
        let v = lyapunov_v(&s, 1.0, &p).unwrap();
        let v1 = lyapunov_v1(&s, 1.0, &p).unwrap();
        assert_relative_eq!(v1 - v, 0.75 * PI.powi(2), max_relative = 2e-4);
    }

    #[test]
    fn w_equals_v_for_zero_forcing() {
        let s = State::from_sine_series(&[0.5], &[0.1], &grid(), 0.0);
        let p = params(1.0, 1.0);
        let v = lyapunov_v(&s, 1.5, &p).unwrap();
        let w = lyapunov_w(&s, 1.5, &p, &Forcing::Zero).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn w_adds_potential_term() {
        // k = 1, tau = 1, gamma = 3/2, u = sin(pi x):
        // -(1+gamma) int P(u) = (5/2) * (1/2) int sin^2 = 0.625
        let s = State::from_sine_series(&[1.0], &[], &grid(), 0.0);
        let p = params(1.0, 1.0);
        let f = Forcing::Example2 {
            k: 1.0,
            tau: 1.0,
            damping: Damping::zero(),
        };
        let v = lyapunov_v(&s, 1.5, &p).unwrap();
        let w = lyapunov_w(&s, 1.5, &p, &f).unwrap();
        assert_relative_eq!(w - v, 0.625, max_relative = 1e-5);
        assert!(w >= v);
    }

    #[test]
    fn w_requires_potential() {
        let s = State::zero(grid(), 0.0);
        let p = params(1.0, 1.0);
        assert!(matches!(
            lyapunov_w(&s, 1.0, &p, &Forcing::Example1 { b0: 1.0 }),
            Err(Error::UnsupportedFunctional(_))
        ));
    }

    #[test]
    fn distance_controls_pointwise_values() {
        // max |u| <= d and max |u_x| <= d on boundary-pinned states
        let g = grid();
        for s in random_sine_states(&g, 40, 8, (-1.0, 1.0), 11) {
            let d = distance_sq(&s).sqrt();
            let tol = 1e-6 * (1.0 + d);
            let max_u = s.max_abs_u();
            let ux = s.u().derivative(DiffOrder::First);
            let max_ux = ux.values().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            assert!(max_u <= d + tol, "max|u| = {max_u} vs d = {d}");
            assert!(max_ux <= d + tol, "max|u_x| = {max_ux} vs d = {d}");
        }
    }

    #[test]
    fn functional_values_bundle() {
        let s = State::from_sine_series(&[0.2], &[0.1], &grid(), 0.0);
        let p = params(1.0, 1.0);
        let f = Forcing::Example2 {
            k: 1.0,
            tau: 0.5,
            damping: Damping::zero(),
        };
        let fv = FunctionalValues::compute(&s, 1.5, &p, Some(&f), true, true).unwrap();
        assert!(fv.d2 > 0.0);
        assert!(fv.d1_sq.unwrap() >= fv.d2);
        assert!(fv.w.unwrap() >= fv.v);
        assert!(fv.v1.is_some());
    }
}
