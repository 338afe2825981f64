//! Scalar comparison machinery behind both decay certificates.
//!
//! The V functional obeys `dV/dt <= [-p + g(t, V)] V` with
//! `g(t, eta) = g_hat(t, eta / c1^2)`, so V is bounded by the solution of
//! the scalar Cauchy problem
//!
//! ```text
//!   dy/dt = [-p + g(t, y)] y,    y(t0) = V(t0).
//! ```
//!
//! From the averaged growth `q(eta) = lim (1/t) int_0^t g_hat(tau, eta/c1^2)`
//! come the certified level `r_bar = sup{rho >= 0 : q(rho) < p}`, the
//! transient budget
//!
//! ```text
//!   M(t0, r) = max{0, max_{t0 <= t <= t0'} [ -(p - q(r))/2 (t - t0)
//!                                            + int_{t0}^t g(tau, r) dtau ]},
//! ```
//!
//! the exponential envelope
//! `d^2(t) <= d^2(t0) (c2^2/c1^2) e^{M} e^{-(p - q(r))/2 (t - t0)}`,
//! and the attraction radius `sup_r (r/c2^2) e^{-M(t0,r)}` (square root of).
//!
//! The W functional instead obeys `dW/dt <= -k3 (W/2D)^(2/(tau+1))` past the
//! crossover, whose exact solution is the algebraic envelope
//! `W(t) <= [W(t0)^(-(1-tau)/(1+tau)) + E (t - t0)]^(-(1+tau)/(1-tau))`,
//! and `d^2 <= W/k1` converts it to the metric.

use serde::Serialize;

use crate::certificates::VConstants;
use crate::{Error, Result};

/// Classical fourth-order one-step integration of `dy/dt = [-p + g(t,y)] y`.
///
/// The solution of the exact problem stays nonnegative; rounding dips below
/// zero are clamped. `g` must be continuous, nonnegative, and nondecreasing
/// in y (caller-certified; the comparison principle needs it).
pub fn solve_comparison_ode(
    p: f64,
    g: impl Fn(f64, f64) -> f64,
    y0: f64,
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(y0 >= 0.0) {
        return Err(Error::Parameter(format!(
            "y0 must be nonnegative, got {y0}"
        )));
    }
    if !(t_end > t0) || !(dt > 0.0) {
        return Err(Error::Parameter("need t_end > t0 and dt > 0".into()));
    }
    let steps = ((t_end - t0) / dt).round() as usize;
    let steps = steps.max(1);
    let dt = (t_end - t0) / steps as f64;

    let rhs = |t: f64, y: f64| -> Result<f64> {
        let gv = g(t, y);
        if !gv.is_finite() {
            return Err(Error::NonFinite(format!(
                "comparison growth term at t = {t}"
            )));
        }
        Ok((-p + gv) * y)
    };

    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0;
    out.push((t0, y));
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let k1 = rhs(t, y)?;
        let k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)?;
        let k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)?;
        let k4 = rhs(t + dt, y + dt * k3)?;
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if y < 0.0 {
            y = 0.0;
        }
        out.push((t0 + (k + 1) as f64 * dt, y));
    }
    Ok(out)
}

/// Numerical surrogate of the averaged-growth limit at one level `eta`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QEstimate {
    /// `(1/T) int_0^T g_hat(tau, eta/c1^2) dtau` at T = horizon.
    pub q: f64,
    /// Same average at T = horizon/2.
    pub q_half_horizon: f64,
    /// Relative difference between the two; the convergence indicator.
    pub rel_diff: f64,
    /// True when `rel_diff` is below the configured factor.
    pub converged: bool,
}

/// Estimate the averaged growth `q(eta)` at a finite horizon by trapezoid
/// quadrature of `g_hat(tau, eta/c1^2)`. The limit itself is not computable;
/// the horizon-halving indicator is the declared surrogate, and the caller
/// decides acceptance (`divergence_factor` defaults to 0.05 upstream).
pub fn estimate_q(
    g_hat: impl Fn(f64, f64) -> f64,
    eta: f64,
    c1_sq: f64,
    horizon: f64,
    scan_dt: f64,
    divergence_factor: f64,
) -> QEstimate {
    let level = eta / c1_sq;
    let steps = ((horizon / scan_dt).ceil() as usize).max(2);
    let dt = horizon / steps as f64;
    let half_step = steps / 2;

    let mut integral = 0.0;
    let mut q_half = 0.0;
    let mut prev = g_hat(0.0, level);
    for k in 1..=steps {
        let t = k as f64 * dt;
        let cur = g_hat(t, level);
        integral += 0.5 * (prev + cur) * dt;
        prev = cur;
        if k == half_step {
            q_half = integral / t;
        }
    }
    let q = integral / horizon;
    let rel_diff = (q - q_half).abs() / q.abs().max(1e-300);
    QEstimate {
        q,
        q_half_horizon: q_half,
        rel_diff,
        converged: rel_diff <= divergence_factor,
    }
}

/// The certified comparison level.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RBar {
    pub value: f64,
    /// True when q stayed below p all the way to the search cap, so the
    /// certified set is search-limited rather than genuinely bounded.
    pub at_boundary: bool,
}

/// Boundary of `{rho >= 0 : q(rho) < p}` by bisection over [0, search_max].
///
/// `q` must be nondecreasing. `q(0) >= p` leaves no certificate at all.
pub fn find_r_bar(q: impl Fn(f64) -> f64, p: f64, search_max: f64, rel_tol: f64) -> Result<RBar> {
    if !(search_max > 0.0) {
        return Err(Error::Parameter("search_max must be positive".into()));
    }
    if q(0.0) >= p {
        return Err(Error::NoCertificate(format!(
            "averaged forcing growth q(0) = {} is not below the drain rate p = {p}",
            q(0.0)
        )));
    }
    if q(search_max) < p {
        return Ok(RBar {
            value: search_max,
            at_boundary: true,
        });
    }
    let mut lo = 0.0;
    let mut hi = search_max;
    while hi - lo > rel_tol * search_max {
        let mid = 0.5 * (lo + hi);
        if q(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RBar {
        value: 0.5 * (lo + hi),
        at_boundary: false,
    })
}

/// Find the settling time t0': the first time after which the running
/// average `(1/(t-t0)) int_{t0}^t g(tau, r) dtau` stays below
/// `(p + q_r)/2`, confirmed over a trailing window of length
/// `confirm_window`, scanning no further than `t0 + cap`.
pub fn find_settling_time(
    t0: f64,
    g_r: impl Fn(f64) -> f64,
    p: f64,
    q_r: f64,
    scan_dt: f64,
    confirm_window: f64,
    cap: f64,
) -> Result<f64> {
    let threshold = 0.5 * (p + q_r);
    let steps = ((cap / scan_dt).ceil() as usize).max(1);
    let mut integral = 0.0;
    let mut prev = g_r(t0);
    let mut last_cross = t0;
    let mut any_cross = false;
    for k in 1..=steps {
        let t = t0 + k as f64 * scan_dt;
        let cur = g_r(t);
        integral += 0.5 * (prev + cur) * scan_dt;
        prev = cur;
        let avg = integral / (t - t0);
        if avg >= threshold {
            last_cross = t;
            any_cross = true;
        } else if t - last_cross >= confirm_window && (!any_cross || t > last_cross) {
            return Ok(last_cross);
        }
    }
    Err(Error::CertificateIncomplete(format!(
        "running average of the growth term did not settle below {threshold} within {cap} time units"
    )))
}

/// The transient budget M(t0, r): dense scan of
/// `-(p - q_r)/2 (t - t0) + int_{t0}^t g(tau, r) dtau` over [t0, t_prime],
/// cumulative integral by trapezoid; never negative.
pub fn transient_budget(
    t0: f64,
    r: f64,
    g: impl Fn(f64, f64) -> f64,
    p: f64,
    q_r: f64,
    scan_dt: f64,
    t_prime: f64,
) -> f64 {
    if t_prime <= t0 {
        return 0.0;
    }
    let rate = 0.5 * (p - q_r);
    let steps = (((t_prime - t0) / scan_dt).ceil() as usize).max(1);
    let dt = (t_prime - t0) / steps as f64;
    let mut integral = 0.0;
    let mut prev = g(t0, r);
    let mut best = 0.0f64;
    for k in 1..=steps {
        let t = t0 + k as f64 * dt;
        let cur = g(t, r);
        integral += 0.5 * (prev + cur) * dt;
        prev = cur;
        best = best.max(-rate * (t - t0) + integral);
    }
    best
}

/// Search controls for the attraction-radius maximization.
#[derive(Clone, Copy, Debug)]
pub struct RadiusSearch {
    /// Log-spaced coarse grid size over ]0, r_bar].
    pub grid_points: usize,
    /// Ratio between the smallest grid point and r_bar.
    pub span_decades: f64,
    pub scan_dt: f64,
    pub confirm_window: f64,
    pub settle_cap: f64,
    /// Golden-section refinement iterations around the best grid point.
    pub refine_iters: usize,
}

impl Default for RadiusSearch {
    fn default() -> Self {
        RadiusSearch {
            grid_points: 32,
            span_decades: 4.0,
            scan_dt: 1e-3,
            confirm_window: 10.0,
            settle_cap: 2000.0,
            refine_iters: 40,
        }
    }
}

/// The certified attraction radius at one initial time.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AttractionRadius {
    /// Radius in d-units: sqrt of the supremum of (r/c2^2) e^{-M(t0,r)}.
    pub radius: f64,
    /// The maximizing comparison level.
    pub r_star: f64,
    /// The supremum itself (a bound on admissible d^2(t0)).
    pub sup_value: f64,
    /// Transient budget at the maximizer.
    pub m_at_r_star: f64,
    /// Inherited from [`RBar`]: the search was capped, not exhausted.
    pub at_search_boundary: bool,
}

/// Maximize `phi(r) = (r / c2^2) e^{-M(t0, r)}` over a log-spaced grid on
/// ]0, r_bar], refined by golden-section around the best grid point.
/// Ties break toward smaller r.
pub fn attraction_radius(
    t0: f64,
    consts: &VConstants,
    q: impl Fn(f64) -> f64,
    g: impl Fn(f64, f64) -> f64,
    r_bar: &RBar,
    search: &RadiusSearch,
) -> Result<AttractionRadius> {
    if !(r_bar.value > 0.0) {
        return Err(Error::NoCertificate("empty certified level set".into()));
    }
    let phi = |r: f64| -> Result<(f64, f64)> {
        let q_r = q(r);
        let t_prime = find_settling_time(
            t0,
            |t| g(t, r),
            consts.p,
            q_r,
            search.scan_dt,
            search.confirm_window,
            search.settle_cap,
        )?;
        let m = transient_budget(t0, r, &g, consts.p, q_r, search.scan_dt, t_prime);
        Ok((r / consts.c2_sq * (-m).exp(), m))
    };

    // coarse log grid
    let n = search.grid_points.max(2);
    let lo = r_bar.value * 10f64.powf(-search.span_decades);
    let ratio = (r_bar.value / lo).powf(1.0 / (n - 1) as f64);
    let mut best_r = lo;
    let mut best = f64::NEG_INFINITY;
    let mut best_m = 0.0;
    let mut grid = Vec::with_capacity(n);
    for i in 0..n {
        let r = lo * ratio.powi(i as i32);
        let (v, m) = phi(r)?;
        grid.push(r);
        if v > best {
            best = v;
            best_r = r;
            best_m = m;
        }
    }

    // golden-section refinement on the bracket around the best grid point
    let idx = grid.iter().position(|&r| r == best_r).unwrap_or(0);
    let mut a = if idx == 0 {
        grid[0] * 0.5
    } else {
        grid[idx - 1]
    };
    let mut b = if idx + 1 < grid.len() {
        grid[idx + 1]
    } else {
        r_bar.value
    };
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = phi(x1)?;
    let mut f2 = phi(x2)?;
    for _ in 0..search.refine_iters {
        if f1.0 > f2.0 || (f1.0 == f2.0 && x1 < x2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = phi(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = phi(x2)?;
        }
    }
    for (x, (v, m)) in [(x1, f1), (x2, f2)] {
        if v > best || (v == best && x < best_r) {
            best = v;
            best_r = x;
            best_m = m;
        }
    }

    Ok(AttractionRadius {
        radius: best.max(0.0).sqrt(),
        r_star: best_r,
        sup_value: best,
        m_at_r_star: best_m,
        at_search_boundary: r_bar.at_boundary && (best_r / r_bar.value) > 0.99,
    })
}

/// Parameters of a certified decay envelope.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// `d^2(t) <= d^2(t0) * prefactor * e^{-rate (t - t0)}` with
    /// rate = (p - q(r))/2 and prefactor = (c2^2/c1^2) e^{M(t0,r)}.
    Exponential {
        rate: f64,
        prefactor: f64,
        /// The comparison level r behind the rate and budget.
        r: f64,
        t0: f64,
    },
    /// `d^2(t) <= (1/k1) [ W(t0)^{-(1-tau)/(1+tau)} + E (t - t0) ]^{-(1+tau)/(1-tau)}`.
    Algebraic {
        e_coeff: f64,
        tau: f64,
        k1: f64,
        t0: f64,
    },
}

/// Evaluate the exponential envelope seeded with `d2_t0 = d^2(t0)`.
pub fn exponential_envelope(d2_t0: f64, env: &Envelope, t: f64) -> Result<f64> {
    match *env {
        Envelope::Exponential {
            rate,
            prefactor,
            t0,
            ..
        } => {
            if t < t0 {
                return Err(Error::Domain(format!(
                    "t = {t} precedes envelope start t0 = {t0}"
                )));
            }
            Ok(d2_t0 * prefactor * (-rate * (t - t0)).exp())
        }
        Envelope::Algebraic { .. } => Err(Error::Domain(
            "exponential evaluation of an algebraic envelope".into(),
        )),
    }
}

/// Evaluate the algebraic envelope seeded with `w_t0 = W(t0) > 0`.
///
/// This is the exact solution of `dy/dt = -k3 (y/2D)^(2/(tau+1))` divided
/// by k1. At tau = 1 the coefficient E vanishes and the algebraic form
/// degenerates; that regime is reported as exponential-only instead.
pub fn algebraic_envelope(w_t0: f64, env: &Envelope, t: f64) -> Result<f64> {
    match *env {
        Envelope::Algebraic {
            e_coeff,
            tau,
            k1,
            t0,
        } => {
            if t < t0 {
                return Err(Error::Domain(format!(
                    "t = {t} precedes envelope start t0 = {t0}"
                )));
            }
            if !(w_t0 > 0.0) {
                return Err(Error::Parameter(format!(
                    "W(t0) must be positive, got {w_t0}"
                )));
            }
            if tau >= 1.0 {
                return Err(Error::Domain(
                    "tau = 1 degenerates the algebraic envelope (E = 0); use the exponential bookkeeping".into(),
                ));
            }
            let beta = (1.0 - tau) / (1.0 + tau);
            Ok((w_t0.powf(-beta) + e_coeff * (t - t0)).powf(-1.0 / beta) / k1)
        }
        Envelope::Exponential { .. } => Err(Error::Domain(
            "algebraic evaluation of an exponential envelope".into(),
        )),
    }
}

/// Pick the envelope level r for a start value `d2_t0`: over a log grid on
/// ]0, r_bar], keep levels admitting the start (`r e^{-M} > c2^2 d^2(t0)`)
/// and take the one with the largest rate (p - q(r))/2, tie-breaking toward
/// smaller r. Fails when no admissible level exists (start outside the
/// certified region).
pub fn build_exponential_envelope(
    t0: f64,
    d2_t0: f64,
    consts: &VConstants,
    q: impl Fn(f64) -> f64,
    g: impl Fn(f64, f64) -> f64,
    r_bar: &RBar,
    search: &RadiusSearch,
) -> Result<Envelope> {
    let n = search.grid_points.max(2);
    let lo = r_bar.value * 10f64.powf(-search.span_decades);
    let ratio = (r_bar.value / lo).powf(1.0 / (n - 1) as f64);
    let mut best: Option<(f64, f64, f64)> = None; // (rate, r, m)
    for i in 0..n {
        let r = lo * ratio.powi(i as i32);
        let q_r = q(r);
        if q_r >= consts.p {
            continue;
        }
        let t_prime = find_settling_time(
            t0,
            |t| g(t, r),
            consts.p,
            q_r,
            search.scan_dt,
            search.confirm_window,
            search.settle_cap,
        )?;
        let m = transient_budget(t0, r, &g, consts.p, q_r, search.scan_dt, t_prime);
        if r * (-m).exp() > consts.c2_sq * d2_t0 {
            let rate = 0.5 * (consts.p - q_r);
            let better = match best {
                None => true,
                Some((br, brr, _)) => rate > br || (rate == br && r < brr),
            };
            if better {
                best = Some((rate, r, m));
            }
        }
    }
    let (rate, r, m) = best.ok_or_else(|| {
        Error::NoCertificate(format!(
            "no comparison level admits d^2(t0) = {d2_t0}; start lies outside the certified region"
        ))
    })?;
    Ok(Envelope::Exponential {
        rate,
        prefactor: consts.c2_sq / consts.c1_sq * m.exp(),
        r,
        t0,
    })
}

/// Least-squares slope of `ln y` against `x` (decay-rate measurement).
pub fn log_slope(samples: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|&(x, y)| (x, y.ln()))
        .collect();
    linear_slope(&pts)
}

/// Least-squares slope of `ln y` against `ln x` (power-law exponent
/// measurement).
pub fn loglog_slope(samples: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    linear_slope(&pts)
}

fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
