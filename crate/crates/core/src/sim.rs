//! Time integration of the first-order system
//!
//! ```text
//!   u_t = v,
//!   v_t = eps v_xx + c^2 u_xx + f(x, t, u, u_x, u_xx, v),
//! ```
//!
//! with homogeneous Dirichlet conditions. One step advances the linear part
//! by the trapezoidal (Crank-Nicolson) rule and the forcing explicitly by a
//! predictor-corrector average. Eliminating `u` from the coupled update
//! leaves one tridiagonal solve in the interior `v` unknowns:
//!
//! ```text
//!   (I - alpha D2) v_new = (I + alpha D2) v_old + dt c^2 D2 u_old + dt f_bar,
//!   alpha = eps dt / 2 + c^2 dt^2 / 4,
//!   u_new = u_old + dt/2 (v_old + v_new),
//! ```
//!
//! where D2 is the second-difference operator with zero boundary rows.
//! The eps v_xx term makes the system stiff (eigenvalues ~ -eps/h^2);
//! treating it implicitly removes the dt <~ h^2 step restriction, and the
//! predictor-corrector forcing keeps the overall step second order in dt.

use serde::{Deserialize, Serialize};

use crate::forcing::{Forcing, ForcingArgs};
use crate::functionals::{distance1_sq, distance_sq, lyapunov_v, lyapunov_w};
use crate::grid::{trapezoid, DiffOrder, GridFunction, State};
use crate::{Error, Result};

/// Coefficients of the linear operator: `epsilon` the viscous coefficient,
/// `c_sq` the squared wave speed. Both strictly positive.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PdeParams {
    pub epsilon: f64,
    pub c_sq: f64,
}

impl PdeParams {
    pub fn new(epsilon: f64, c_sq: f64) -> Result<PdeParams> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Parameter(format!(
                "epsilon must be a positive constant, got {epsilon}"
            )));
        }
        if !(c_sq > 0.0 && c_sq.is_finite()) {
            return Err(Error::Parameter(format!(
                "c^2 must be a positive constant, got {c_sq}"
            )));
        }
        Ok(PdeParams { epsilon, c_sq })
    }

    pub fn c(&self) -> f64 {
        self.c_sq.sqrt()
    }
}

/// What to record along a trajectory and how often.
#[derive(Clone, Copy, Debug)]
pub struct ObserverConfig {
    /// Record every `stride`-th step (the initial and final states are
    /// always recorded).
    pub stride: usize,
    /// gamma used for V (and W when available).
    pub gamma: f64,
    pub with_d1: bool,
    /// Record W when the forcing declares a potential.
    pub with_w: bool,
    /// Keep state snapshots at the observation stride (the final state is
    /// always kept).
    pub store_states: bool,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        ObserverConfig {
            stride: 100,
            gamma: 1.0,
            with_d1: false,
            with_w: true,
            store_states: false,
        }
    }
}

/// Functional record at one observation time.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Observation {
    pub t: f64,
    pub d2: f64,
    pub d1_sq: Option<f64>,
    pub v: f64,
    pub w: Option<f64>,
    /// Trapezoid value of `int f^2 dx` at this time (for the forcing-energy
    /// hypothesis check).
    pub f_sq_integral: f64,
}

/// A completed (or partially completed) simulation run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: PdeParams,
    pub dt: f64,
    pub t0: f64,
    /// Snapshots at the observation stride plus the final state.
    pub states: Vec<State>,
    pub observations: Vec<Observation>,
    /// Set when the integrator failed mid-run; the fields above then hold
    /// the partial trajectory up to the failure.
    pub error_mark: Option<String>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.error_mark.is_none()
    }

    pub fn final_state(&self) -> &State {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }
}

/// One-run stepper: constant tridiagonal factorization plus scratch space.
pub struct Stepper {
    params: PdeParams,
    dt: f64,
    h: f64,
    n: usize,
    /// Thomas forward-sweep multipliers for the constant matrix.
    c_prime: Vec<f64>,
    /// Reciprocals of the forward-sweep pivots.
    inv_denom: Vec<f64>,
    off: f64,
    alpha: f64,
}

impl Stepper {
    pub fn new(n_interior: usize, h: f64, dt: f64, params: PdeParams) -> Result<Stepper> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
        }
        let alpha = params.epsilon * dt / 2.0 + params.c_sq * dt * dt / 4.0;
        let diag = 1.0 + 2.0 * alpha / (h * h);
        let off = -alpha / (h * h);

        // Pre-factor the Thomas sweep: the matrix never changes during a run.
        let n = n_interior;
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut denom = diag;
        for i in 0..n {
            if denom.abs() < 1e-300 {
                return Err(Error::Integrator {
                    t: f64::NAN,
                    detail: format!("singular tridiagonal system at row {i}"),
                });
            }
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = off * inv_denom[i];
            denom = diag - off * c_prime[i];
        }

        Ok(Stepper {
            params,
            dt,
            h,
            n,
            c_prime,
            inv_denom,
            off,
            alpha,
        })
    }

    /// Solve (I - alpha D2) x = rhs in place over the interior unknowns.
    fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        // forward sweep
        rhs[0] *= self.inv_denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_denom[i];
        }
        // back substitution
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }

    /// Evaluate the forcing at every interior node of `(u, v)` at time `t`.
    fn forcing_at(
        &self,
        forcing: &Forcing,
        state_u: &GridFunction,
        state_v: &GridFunction,
        t: f64,
        out: &mut [f64],
    ) -> Result<()> {
        let ux = state_u.derivative(DiffOrder::First);
        let uxx = state_u.derivative(DiffOrder::Second);
        let grid = state_u.grid();
        for i in 1..=self.n {
            let args = ForcingArgs {
                x: grid.node(i),
                t,
                u: state_u.values()[i],
                u_x: ux.values()[i],
                u_xx: uxx.values()[i],
                u_t: state_v.values()[i],
            };
            out[i - 1] = forcing.eval(&args)?;
        }
        Ok(())
    }

    /// Given the averaged forcing `f_bar`, advance the linear system by one
    /// Crank-Nicolson step. Returns full-length (u, v) arrays with zero
    /// boundary entries.
    fn linear_step(&self, u_old: &[f64], v_old: &[f64], f_bar: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let h2 = self.h * self.h;
        let mut rhs = vec![0.0; n];
        for i in 1..=n {
            let d2v = (v_old[i - 1] - 2.0 * v_old[i] + v_old[i + 1]) / h2;
            let d2u = (u_old[i - 1] - 2.0 * u_old[i] + u_old[i + 1]) / h2;
            rhs[i - 1] = v_old[i]
                + self.alpha * d2v
                + self.dt * self.params.c_sq * d2u
                + self.dt * f_bar[i - 1];
        }
        self.solve(&mut rhs);

        let m = n + 2;
        let mut u_new = vec![0.0; m];
        let mut v_new = vec![0.0; m];
        for i in 1..=n {
            v_new[i] = rhs[i - 1];
            u_new[i] = u_old[i] + 0.5 * self.dt * (v_old[i] + v_new[i]);
        }
        (u_new, v_new)
    }

    /// One IMEX step from `state`; boundary values remain exactly zero.
    pub fn advance(&self, state: &State, forcing: &Forcing) -> Result<State> {
        let grid = state.grid().clone();
        let t = state.t();
        let u_old = state.u().values();
        let v_old = state.v().values();

        let mut f_bar = vec![0.0; self.n];
        if !forcing.is_zero() {
            // predictor: forcing frozen at the current state
            self.forcing_at(forcing, state.u(), state.v(), t, &mut f_bar)?;
            let (u_pred, v_pred) = self.linear_step(u_old, v_old, &f_bar);
            let u_pred = GridFunction::new(grid.clone(), u_pred)?;
            let v_pred = GridFunction::new(grid.clone(), v_pred)?;

            // corrector: average with the forcing at the predicted state
            let mut f_new = vec![0.0; self.n];
            self.forcing_at(forcing, &u_pred, &v_pred, t + self.dt, &mut f_new)?;
            for (fb, fn_) in f_bar.iter_mut().zip(&f_new) {
                *fb = 0.5 * (*fb + fn_);
            }
        }

        let (u_new, v_new) = self.linear_step(u_old, v_old, &f_bar);
        for &w in u_new.iter().chain(&v_new) {
            if !w.is_finite() {
                return Err(Error::Integrator {
                    t,
                    detail: "state became non-finite".into(),
                });
            }
        }
        Ok(State::from_parts_unchecked(
            GridFunction::new(grid.clone(), u_new)?,
            GridFunction::new(grid, v_new)?,
            t + self.dt,
        ))
    }
}

/// One IMEX step (convenience wrapper building a throwaway [`Stepper`]).
pub fn step(state: &State, dt: f64, params: &PdeParams, forcing: &Forcing) -> Result<State> {
    let stepper = Stepper::new(state.grid().n_interior(), state.grid().h(), dt, *params)?;
    stepper.advance(state, forcing)
}

/// `int f^2 dx` over all nodes of a state (boundary nodes included; the
/// derivatives there come from the one-sided stencils).
pub fn forcing_energy(state: &State, forcing: &Forcing) -> Result<f64> {
    let ux = state.u().derivative(DiffOrder::First);
    let uxx = state.u().derivative(DiffOrder::Second);
    let grid = state.grid();
    let mut integrand = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let args = ForcingArgs {
            x: grid.node(i),
            t: state.t(),
            u: state.u().values()[i],
            u_x: ux.values()[i],
            u_xx: uxx.values()[i],
            u_t: state.v().values()[i],
        };
        let f = forcing.eval(&args)?;
        integrand[i] = f * f;
    }
    Ok(trapezoid(&integrand, grid.h()))
}

fn observe(
    state: &State,
    params: &PdeParams,
    forcing: &Forcing,
    cfg: &ObserverConfig,
) -> Result<Observation> {
    let with_w = cfg.with_w && forcing.has_potential();
    Ok(Observation {
        t: state.t(),
        d2: distance_sq(state),
        d1_sq: cfg.with_d1.then(|| distance1_sq(state)),
        v: lyapunov_v(state, cfg.gamma, params)?,
        w: if with_w {
            Some(lyapunov_w(state, cfg.gamma, params, forcing)?)
        } else {
            None
        },
        f_sq_integral: forcing_energy(state, forcing)?,
    })
}

/// Integrate from `initial` (whose own time stamp is ignored in favor of
/// `t0`) up to `t_end` with fixed step `dt`.
///
/// Preconditions: the initial data vanish at the boundary (enforced by
/// [`State`]), `t_end > t0`, and `dt` divides `t_end - t0` within rounding.
/// A mid-run integrator failure returns the partial trajectory with
/// `error_mark` set; precondition violations fail outright.
pub fn simulate(
    initial: &State,
    t0: f64,
    t_end: f64,
    dt: f64,
    params: &PdeParams,
    forcing: &Forcing,
    cfg: &ObserverConfig,
) -> Result<Trajectory> {
    if !(t_end > t0) {
        return Err(Error::Parameter(format!(
            "t_end = {t_end} must exceed t0 = {t0}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    let span = t_end - t0;
    let steps_f = span / dt;
    let steps = steps_f.round();
    if steps < 1.0 || (steps_f - steps).abs() > 1e-9 * steps.max(1.0) {
        return Err(Error::Parameter(format!(
            "dt = {dt} does not divide t_end - t0 = {span} within rounding"
        )));
    }
    let steps = steps as usize;
    let stride = cfg.stride.max(1);

    let grid = initial.grid().clone();
    let stepper = Stepper::new(grid.n_interior(), grid.h(), dt, *params)?;

    let mut state = State::new(initial.u().clone(), initial.v().clone(), t0)?;
    let mut states = Vec::new();
    let mut observations = Vec::new();
    let mut error_mark = None;

    for k in 0..=steps {
        let is_obs = k % stride == 0 || k == steps;
        if is_obs {
            match observe(&state, params, forcing, cfg) {
                Ok(obs) => observations.push(obs),
                Err(e) => {
                    error_mark = Some(e.to_string());
                    break;
                }
            }
            if cfg.store_states || k == steps {
                states.push(state.clone());
            }
        }
        if k == steps {
            break;
        }
        match stepper.advance(&state, forcing) {
            // retime exactly: k dt accumulation drifts over long runs
            Ok(next) => {
                state = State::from_parts_unchecked(
                    next.u().clone(),
                    next.v().clone(),
                    t0 + (k + 1) as f64 * dt,
                );
            }
            Err(e) => {
                error_mark = Some(e.to_string());
                break;
            }
        }
    }

    if states.is_empty() {
        states.push(state);
    }

    Ok(Trajectory {
        params: *params,
        dt,
        t0,
        states,
        observations,
        error_mark,
    })
}

/// Exact single-mode solution of the semi-discrete system (the method of
/// lines with the same second-difference operator), used as the time-order
/// oracle: mode k evolves by `T'' + eps mu T' + c^2 mu T = 0` with
/// `mu = (4/h^2) sin^2(k pi h / 2)` the discrete eigenvalue.
pub fn damped_mode_oracle(
    k: usize,
    h: f64,
    params: &PdeParams,
    discrete_eigenvalue: bool,
) -> impl Fn(f64) -> (f64, f64) {
    let kf = k as f64 * std::f64::consts::PI;
    let mu = if discrete_eigenvalue {
        let s = (kf * h / 2.0).sin();
        4.0 * s * s / (h * h)
    } else {
        kf * kf
    };
    let eps = params.epsilon;
    let c2 = params.c_sq;
    let disc = eps * eps * mu * mu - 4.0 * c2 * mu;
    assert!(disc > 0.0, "oracle assumes overdamped mode (real roots)");
    let sq = disc.sqrt();
    let l1 = 0.5 * (-eps * mu + sq);
    let l2 = 0.5 * (-eps * mu - sq);
    // T(0) = 1, T'(0) = 0
    move |t: f64| {
        let e1 = (l1 * t).exp();
        let e2 = (l2 * t).exp();
        let amp = (l2 * e1 - l1 * e2) / (l2 - l1);
        let vel = l1 * l2 * (e1 - e2) / (l2 - l1);
        (amp, vel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{Custom, Damping};
    use crate::grid::Grid;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params() -> PdeParams {
        PdeParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn params_must_be_positive() {
        assert!(PdeParams::new(-1.0, 1.0).is_err());
        assert!(PdeParams::new(0.0, 1.0).is_err());
        assert!(PdeParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn zero_state_is_equilibrium() {
        let g = Grid::new(49).unwrap();
        let z = State::zero(g, 0.0);
        for forcing in [
            Forcing::Zero,
            Forcing::Example1 { b0: 0.3 },
            Forcing::Example2 {
                k: 1.0,
                tau: 0.5,
                damping: Damping::zero(),
            },
        ] {
            let mut s = z.clone();
            for _ in 0..100 {
                s = step(&s, 1e-3, &params(), &forcing).unwrap();
            }
            assert_eq!(s.max_abs_u(), 0.0);
            assert!(s.v().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn characteristic_roots_match_quoted_values() {
        // lambda^2 + eps mu lambda + c^2 mu = 0, mu = pi^2, eps = c = 1
        let mu = PI * PI;
        let sq = (mu * mu - 4.0 * mu).sqrt();
        let l1 = 0.5 * (-mu + sq);
        let l2 = 0.5 * (-mu - sq);
        assert_relative_eq!(l1, -1.129, max_relative = 1e-3);
        assert_relative_eq!(l2, -8.740, max_relative = 1e-3);
    }

    #[test]
    fn single_step_matches_mode_oracle_to_third_order() {
        // local error O(dt^3) against the semi-discrete mode solution:
        // halving dt cuts the one-step defect by about 8
        let g = Grid::new(199).unwrap();
        let init = State::from_sine_series(&[1.0], &[], &g, 0.0);
        let p = params();
        let oracle = damped_mode_oracle(1, g.h(), &p, true);

        let one_step_err = |dt: f64| {
            let s = step(&init, dt, &p, &Forcing::Zero).unwrap();
            let (amp, _) = oracle(dt);
            let mut e = 0.0f64;
            for i in 0..g.len() {
                let exact = amp * (PI * g.node(i)).sin();
                e = e.max((s.u().values()[i] - exact).abs());
            }
            e
        };
        let e1 = one_step_err(2e-3);
        let e2 = one_step_err(1e-3);
        let ratio = e1 / e2;
        assert!(
            (6.0..=10.5).contains(&ratio),
            "one-step error ratio {ratio} (e1={e1:e}, e2={e2:e})"
        );
    }

    #[test]
    fn global_error_second_order_in_dt() {
        let g = Grid::new(99).unwrap();
        let init = State::from_sine_series(&[1.0], &[], &g, 0.0);
        let p = params();
        let oracle = damped_mode_oracle(1, g.h(), &p, true);
        let t_end = 1.0;

        let final_err = |dt: f64| {
            let traj = simulate(
                &init,
                0.0,
                t_end,
                dt,
                &p,
                &Forcing::Zero,
                &ObserverConfig {
                    stride: usize::MAX,
                    ..Default::default()
                },
            )
            .unwrap();
            let s = traj.final_state();
            let (amp, _) = oracle(t_end);
            let mut e = 0.0f64;
            for i in 0..g.len() {
                e = e.max((s.u().values()[i] - amp * (PI * g.node(i)).sin()).abs());
            }
            e
        };
        let e1 = final_err(4e-3);
        let e2 = final_err(2e-3);
        let order = (e1 / e2).log2();
        assert!((1.9..=2.1).contains(&order), "dt order {order}");
    }

    #[test]
    fn energy_decays_without_forcing() {
        // V is the dissipated quantity, non-increasing for any initial data;
        // d^2 itself is monotone only for data at rest (a nonzero v first
        // pushes energy into the stiffer u terms).
        let g = Grid::new(99).unwrap();
        let p = params();
        let cfg = ObserverConfig {
            stride: 10,
            gamma: 1.0,
            ..Default::default()
        };

        let mixed = State::from_sine_series(&[0.5, 0.2], &[0.0, 0.1], &g, 0.0);
        let traj = simulate(&mixed, 0.0, 5.0, 1e-3, &p, &Forcing::Zero, &cfg).unwrap();
        assert!(traj.is_complete());
        let v0 = traj.observations[0].v;
        let tol = 10.0 * (g.h() * g.h() + 1e-6) * v0;
        for w in traj.observations.windows(2) {
            assert!(
                w[1].v <= w[0].v + tol,
                "V increased: {} -> {} at t = {}",
                w[0].v,
                w[1].v,
                w[1].t
            );
        }

        let at_rest = State::from_sine_series(&[0.5, 0.2], &[], &g, 0.0);
        let traj = simulate(&at_rest, 0.0, 10.0, 1e-3, &p, &Forcing::Zero, &cfg).unwrap();
        let d0 = traj.observations[0].d2;
        let tol = 10.0 * (g.h() * g.h() + 1e-6) * d0;
        for w in traj.observations.windows(2) {
            assert!(w[1].d2 <= w[0].d2 + tol, "d^2 increased at t = {}", w[1].t);
        }
    }

    #[test]
    fn simulate_validates_time_window() {
        let g = Grid::new(9).unwrap();
        let z = State::zero(g, 0.0);
        let p = params();
        assert!(simulate(&z, 1.0, 0.5, 1e-3, &p, &Forcing::Zero, &Default::default()).is_err());
        // dt not dividing the span
        assert!(simulate(&z, 0.0, 1.0, 0.3, &p, &Forcing::Zero, &Default::default()).is_err());
    }

    #[test]
    fn observation_timing_and_final_state() {
        let g = Grid::new(9).unwrap();
        let init = State::from_sine_series(&[0.1], &[], &g, 0.0);
        let cfg = ObserverConfig {
            stride: 25,
            store_states: true,
            ..Default::default()
        };
        let traj = simulate(&init, 0.0, 0.1, 1e-3, &params(), &Forcing::Zero, &cfg).unwrap();
        // 100 steps, stride 25 -> observations at steps 0,25,50,75,100
        assert_eq!(traj.observations.len(), 5);
        assert_relative_eq!(traj.observations[1].t, 0.025, epsilon = 1e-12);
        assert_relative_eq!(traj.final_state().t(), 0.1, epsilon = 1e-12);
        for s in &traj.states {
            assert!(s.u().boundary_is_zero() && s.v().boundary_is_zero());
        }
    }

    #[test]
    fn stride_larger_than_step_count() {
        let g = Grid::new(9).unwrap();
        let init = State::from_sine_series(&[0.1], &[], &g, 0.0);
        let cfg = ObserverConfig {
            stride: 10_000,
            ..Default::default()
        };
        let traj = simulate(&init, 0.0, 0.1, 1e-3, &params(), &Forcing::Zero, &cfg).unwrap();
        // only the initial and final observations remain
        assert_eq!(traj.observations.len(), 2);
        assert_eq!(traj.observations[0].t, 0.0);
        assert_relative_eq!(traj.observations[1].t, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn mid_run_failure_yields_partial_trajectory() {
        let g = Grid::new(9).unwrap();
        let init = State::from_sine_series(&[0.1], &[], &g, 0.0);
        let forcing = Forcing::Custom(Custom::from_fn(|a| if a.t > 0.05 { f64::NAN } else { 0.0 }));
        let cfg = ObserverConfig {
            stride: 10,
            ..Default::default()
        };
        let traj = simulate(&init, 0.0, 0.2, 1e-3, &params(), &forcing, &cfg).unwrap();
        assert!(!traj.is_complete());
        assert!(traj.error_mark.as_deref().unwrap().contains("non-finite"));
        assert!(!traj.observations.is_empty());
        let last_t = traj.observations.last().unwrap().t;
        assert!(last_t <= 0.06);
    }

    #[test]
    fn forcing_energy_zero_for_zero_forcing() {
        let g = Grid::new(19).unwrap();
        let s = State::from_sine_series(&[1.0], &[0.5], &g, 0.0);
        assert_eq!(forcing_energy(&s, &Forcing::Zero).unwrap(), 0.0);
    }
}
