//! Forcing terms f(x, t, u, u_x, u_xx, u_t) for the right-hand side.
//!
//! Built-ins:
//! - `Zero`: the unforced equation;
//! - `Example1`: f = b(t) sin(u) with b^2 a train of triangular spikes of
//!   constant unit area and linearly growing height, so f is unbounded in t
//!   while its time average stays finite;
//! - `Example2`: f = F(u) - a(...) u_t with the non-analytic restoring force
//!   F(u) = -k sign(u) |u|^tau, 0 < tau <= 1, and a bounded damping
//!   coefficient `a` carried with user-certified bounds;
//! - `Custom`: arbitrary callbacks plus optional declared certificates
//!   (potential, restoring split, energy-gain bound, damping bounds).
//!
//! Every forcing must vanish on the null state: f(x, t, 0, 0, 0, 0) = 0 is
//! checked at validation time and violations are rejected, since all
//! stability statements concern the equilibrium u = 0.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Arguments a forcing callback receives at one node.
#[derive(Clone, Copy, Debug)]
pub struct ForcingArgs {
    pub x: f64,
    pub t: f64,
    pub u: f64,
    pub u_x: f64,
    pub u_xx: f64,
    pub u_t: f64,
}

/// Callback of the full argument tuple.
pub type FieldFn = Arc<dyn Fn(&ForcingArgs) -> f64 + Send + Sync>;
/// Callback of the displacement only (restoring force or its potential).
pub type UnaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Declared energy-gain bound g_hat(t, eta).
pub type GainFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A damping coefficient `a(x,t,u,u_x,u_t,u_xx)` with user-certified bounds.
///
/// `a_inf`/`a_sup` are declarations, not computations: `a`'s domain is
/// unbounded, so the bounds are spot-checked by random sampling over an
/// argument box at validation time rather than verified exhaustively.
#[derive(Clone)]
pub struct Damping {
    /// The coefficient; `None` means a == 0.
    pub a: Option<FieldFn>,
    pub a_inf: f64,
    pub a_sup: f64,
}

impl Damping {
    pub fn zero() -> Damping {
        Damping {
            a: None,
            a_inf: 0.0,
            a_sup: 0.0,
        }
    }

    pub fn eval(&self, args: &ForcingArgs) -> f64 {
        match &self.a {
            Some(f) => f(args),
            None => 0.0,
        }
    }
}

impl fmt::Debug for Damping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Damping")
            .field("a", &self.a.as_ref().map(|_| "<fn>"))
            .field("a_inf", &self.a_inf)
            .field("a_sup", &self.a_sup)
            .finish()
    }
}

/// A user-supplied forcing with its declared certificates.
#[derive(Clone)]
pub struct Custom {
    /// The forcing itself.
    pub f: FieldFn,
    /// `F(u)` when f has the split form F(u) - a u_t; enables the
    /// force-curvature check.
    pub restoring: Option<UnaryFn>,
    /// `z -> integral of F from 0 to z`; enables the W functional.
    pub potential: Option<UnaryFn>,
    /// Growth exponent tau in [0,1) declared for the potential bound fit.
    pub tau: Option<f64>,
    /// Declared bound g_hat(t, eta) for the forcing-energy hypothesis.
    pub g_hat: Option<GainFn>,
    pub damping: Option<Damping>,
}

impl Custom {
    pub fn from_fn(f: impl Fn(&ForcingArgs) -> f64 + Send + Sync + 'static) -> Custom {
        Custom {
            f: Arc::new(f),
            restoring: None,
            potential: None,
            tau: None,
            g_hat: None,
            damping: None,
        }
    }
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Custom")
            .field("restoring", &self.restoring.as_ref().map(|_| "<fn>"))
            .field("potential", &self.potential.as_ref().map(|_| "<fn>"))
            .field("tau", &self.tau)
            .field("g_hat", &self.g_hat.as_ref().map(|_| "<fn>"))
            .field("damping", &self.damping)
            .finish()
    }
}

/// Tagged description of the forcing term.
#[derive(Clone, Debug)]
pub enum Forcing {
    Zero,
    /// f = b(t) sin(u), b(t) = sqrt(b^2(t)) from the spike train.
    Example1 {
        b0: f64,
    },
    /// f = F(u) - a(...) u_t with F(u) = -k sign(u) |u|^tau.
    Example2 {
        k: f64,
        tau: f64,
        damping: Damping,
    },
    Custom(Custom),
}

/// b^2(t): triangular spikes centered at t = n for n = 2, 3, ... of width
/// 2/n and height b0*n, hence constant area b0 per spike. Continuous,
/// nonnegative, vanishing outside the spike supports.
pub fn example1_b_squared(t: f64, b0: f64) -> f64 {
    let n = t.round();
    if n < 2.0 || !t.is_finite() {
        return 0.0;
    }
    let w = 1.0 / n;
    // clamp: at the kinks t = n -+ 1/n the linear branches can round to a
    // value a few ulp below zero, which would poison the sqrt in b(t)
    if t >= n - w && t <= n {
        (b0 * n * n * (t - n + w)).max(0.0)
    } else if t > n && t <= n + w {
        (b0 * (n - n * n * (t - n))).max(0.0)
    } else {
        0.0
    }
}

/// The non-analytic restoring force F(u) = -k sign(u) |u|^tau, with
/// sign(0) := 0 so F is the continuous extension at u = 0.
pub fn example2_force(u: f64, k: f64, tau: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        -k * u.signum() * u.abs().powf(tau)
    }
}

/// Antiderivative of the restoring force from 0 to u:
/// -k |u|^(tau+1) / (tau+1). Always <= 0, even in u.
pub fn example2_potential(u: f64, k: f64, tau: f64) -> f64 {
    -k * u.abs().powf(tau + 1.0) / (tau + 1.0)
}

impl Forcing {
    /// Evaluate the forcing at one node; rejects non-finite results with the
    /// offending (x, t).
    pub fn eval(&self, args: &ForcingArgs) -> Result<f64> {
        let value = match self {
            Forcing::Zero => 0.0,
            Forcing::Example1 { b0 } => example1_b_squared(args.t, *b0).sqrt() * args.u.sin(),
            Forcing::Example2 { k, tau, damping } => {
                example2_force(args.u, *k, *tau) - damping.eval(args) * args.u_t
            }
            Forcing::Custom(c) => (c.f)(args),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::ForcingEvaluation {
                x: args.x,
                t: args.t,
            })
        }
    }

    /// True when the forcing is identically zero (lets the stepper skip its
    /// corrector pass).
    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    /// The restoring force F(u), when the forcing has the split form
    /// F(u) - a u_t. Zero forcing counts as F == 0.
    pub fn restoring(&self, u: f64) -> Option<f64> {
        match self {
            Forcing::Zero => Some(0.0),
            Forcing::Example1 { .. } => None,
            Forcing::Example2 { k, tau, .. } => Some(example2_force(u, *k, *tau)),
            Forcing::Custom(c) => c.restoring.as_ref().map(|f| f(u)),
        }
    }

    /// The potential `integral of F from 0 to u`, when declared.
    pub fn potential(&self, u: f64) -> Option<f64> {
        match self {
            Forcing::Zero => Some(0.0),
            Forcing::Example1 { .. } => None,
            Forcing::Example2 { k, tau, .. } => Some(example2_potential(u, *k, *tau)),
            Forcing::Custom(c) => c.potential.as_ref().map(|f| f(u)),
        }
    }

    pub fn has_potential(&self) -> bool {
        match self {
            Forcing::Zero | Forcing::Example2 { .. } => true,
            Forcing::Example1 { .. } => false,
            Forcing::Custom(c) => c.potential.is_some(),
        }
    }

    /// The declared forcing-energy gain g_hat(t, eta), when this forcing
    /// carries one (zero forcing: 0; spike forcing: b^2(t)).
    pub fn g_hat(&self) -> Option<GainFn> {
        match self {
            Forcing::Zero => Some(Arc::new(|_, _| 0.0)),
            Forcing::Example1 { b0 } => {
                let b0 = *b0;
                Some(Arc::new(move |t, _eta| example1_b_squared(t, b0)))
            }
            Forcing::Example2 { .. } => None,
            Forcing::Custom(c) => c.g_hat.clone(),
        }
    }

    pub fn damping(&self) -> Option<&Damping> {
        match self {
            Forcing::Example2 { damping, .. } => Some(damping),
            Forcing::Custom(c) => c.damping.as_ref(),
            _ => None,
        }
    }

    /// Configuration-time validation against the operator coefficients.
    ///
    /// Checks parameter ranges, the damping bounds (a_inf > -epsilon,
    /// a_sup finite, spot-checked by sampling), and null-solution
    /// compatibility f(x,t,0,0,0,0) = 0 for custom callbacks.
    pub fn validate(&self, epsilon: f64) -> Result<()> {
        match self {
            Forcing::Zero => Ok(()),
            Forcing::Example1 { b0 } => {
                if !(*b0 >= 0.0) {
                    return Err(Error::Parameter(format!(
                        "spike amplitude b0 must be nonnegative, got {b0}"
                    )));
                }
                Ok(())
            }
            Forcing::Example2 { k, tau, damping } => {
                if !(*k > 0.0) {
                    return Err(Error::Parameter(format!("k must be positive, got {k}")));
                }
                if !(*tau > 0.0 && *tau <= 1.0) {
                    return Err(Error::Parameter(format!(
                        "tau must lie in (0, 1], got {tau}"
                    )));
                }
                validate_damping(damping, epsilon)?;
                Ok(())
            }
            Forcing::Custom(c) => {
                if let Some(d) = &c.damping {
                    validate_damping(d, epsilon)?;
                }
                if let Some(tau) = c.tau {
                    if !(0.0..1.0).contains(&tau) {
                        return Err(Error::Parameter(format!(
                            "declared growth exponent tau must lie in [0, 1), got {tau}"
                        )));
                    }
                }
                self.check_null_compatibility()?;
                Ok(())
            }
        }
    }

    /// Reject forcings that do not vanish on the null state (u = v = 0):
    /// they would move the equilibrium whose stability is being certified.
    fn check_null_compatibility(&self) -> Result<()> {
        for &x in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            for &t in &[0.0, 0.7, 3.0, 41.5] {
                let args = ForcingArgs {
                    x,
                    t,
                    u: 0.0,
                    u_x: 0.0,
                    u_xx: 0.0,
                    u_t: 0.0,
                };
                let v = self.eval(&args)?;
                if v != 0.0 {
                    return Err(Error::Parameter(format!(
                        "forcing does not vanish on the null solution: f({x}, {t}, 0,0,0,0) = {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Box of arguments over which declared damping bounds are spot-checked.
#[derive(Clone, Copy, Debug)]
pub struct DampingSampleBox {
    pub t_max: f64,
    pub field_max: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for DampingSampleBox {
    fn default() -> Self {
        DampingSampleBox {
            t_max: 100.0,
            field_max: 10.0,
            samples: 512,
            seed: 7,
        }
    }
}

fn validate_damping(d: &Damping, epsilon: f64) -> Result<()> {
    if !(d.a_inf > -epsilon) {
        return Err(Error::Parameter(format!(
            "damping lower bound a_inf = {} must exceed -epsilon = {}",
            d.a_inf, -epsilon
        )));
    }
    if !d.a_sup.is_finite() {
        return Err(Error::Parameter(
            "damping upper bound a_sup must be finite".into(),
        ));
    }
    if d.a_inf > d.a_sup {
        return Err(Error::Parameter(format!(
            "damping bounds are inverted: a_inf = {} > a_sup = {}",
            d.a_inf, d.a_sup
        )));
    }
    spot_check_damping(d, &DampingSampleBox::default())
}

/// Randomly sample the damping callback over the argument box and reject if
/// any sample escapes the declared [a_inf, a_sup].
pub fn spot_check_damping(d: &Damping, sample_box: &DampingSampleBox) -> Result<()> {
    let Some(a) = &d.a else { return Ok(()) };
    let mut rng = ChaCha8Rng::seed_from_u64(sample_box.seed);
    let m = sample_box.field_max;
    for _ in 0..sample_box.samples {
        let args = ForcingArgs {
            x: rng.gen_range(0.0..=1.0),
            t: rng.gen_range(0.0..=sample_box.t_max),
            u: rng.gen_range(-m..=m),
            u_x: rng.gen_range(-m..=m),
            u_xx: rng.gen_range(-m..=m),
            u_t: rng.gen_range(-m..=m),
        };
        let v = a(&args);
        if !(v >= d.a_inf && v <= d.a_sup) {
            return Err(Error::HypothesisViolated(format!(
                "damping sample a({}, {}, ...) = {} escapes declared bounds [{}, {}]",
                args.x, args.t, v, d.a_inf, d.a_sup
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn args(t: f64, u: f64, u_t: f64) -> ForcingArgs {
        ForcingArgs {
            x: 0.5,
            t,
            u,
            u_x: 0.0,
            u_xx: 0.0,
            u_t,
        }
    }

    #[test]
    fn b_squared_apex_values() {
        for n in 2..=6 {
            let t = n as f64;
            assert_relative_eq!(example1_b_squared(t, 0.3), 0.3 * t, max_relative = 1e-12);
        }
    }

    #[test]
    fn b_squared_outside_support() {
        // spikes start at n = 2, first support point t = 1.5
        assert_eq!(example1_b_squared(1.2, 5.0), 0.0);
        assert_eq!(example1_b_squared(0.0, 5.0), 0.0);
        // the gap between spike 2 (ends at 2.5) and spike 3 (starts at 8/3)
        assert_eq!(example1_b_squared(2.6, 5.0), 0.0);
    }

    #[test]
    fn b_squared_continuous_at_kinks() {
        let b0 = 1.0;
        for n in [2.0f64, 3.0, 7.0, 40.0] {
            for edge in [n - 1.0 / n, n, n + 1.0 / n] {
                let lo = example1_b_squared(edge - 1e-9, b0);
                let hi = example1_b_squared(edge + 1e-9, b0);
                // slopes are b0*n^2, so continuity at 1e-9 means gap <= ~b0*n^2*1e-9
                assert!((hi - lo).abs() <= 2.0 * b0 * n * n * 1e-9 + 1e-12);
            }
        }
    }

    #[test]
    fn b_squared_spike_area_is_b0() {
        // each triangular spike integrates to b0
        let b0 = 0.7;
        for n in [2usize, 5, 23] {
            let nf = n as f64;
            let (a, b) = (nf - 1.0 / nf, nf + 1.0 / nf);
            let steps = 200_000;
            let dt = (b - a) / steps as f64;
            let mut s = 0.5 * (example1_b_squared(a, b0) + example1_b_squared(b, b0));
            for i in 1..steps {
                s += example1_b_squared(a + i as f64 * dt, b0);
            }
            assert_relative_eq!(s * dt, b0, max_relative = 1e-3);
        }
    }

    #[test]
    fn b_squared_running_average_tends_to_b0() {
        // (1/T) integral of b^2 over [0,T] -> b0; within 5% at T = 500
        let b0 = 1.0;
        let t_end = 500.0;
        let dt = 5e-4;
        let steps = (t_end / dt) as usize;
        let mut s = 0.5 * (example1_b_squared(0.0, b0) + example1_b_squared(t_end, b0));
        for i in 1..steps {
            s += example1_b_squared(i as f64 * dt, b0);
        }
        let avg = s * dt / t_end;
        assert!((avg - b0).abs() / b0 < 0.05, "running average {avg}");
    }

    proptest! {
        #[test]
        fn b_squared_nonnegative_and_supported(t in 0.0f64..1000.0) {
            let v = example1_b_squared(t, 1.0);
            prop_assert!(v >= 0.0);
            if v > 0.0 {
                let n = t.round();
                prop_assert!(n >= 2.0);
                prop_assert!(t >= n - 1.0 / n - 1e-12 && t <= n + 1.0 / n + 1e-12);
            }
        }

        #[test]
        fn restoring_force_odd(u in -5.0f64..5.0, k in 0.1f64..3.0, tau in 0.05f64..1.0) {
            let f = example2_force(u, k, tau);
            let g = example2_force(-u, k, tau);
            prop_assert!((f + g).abs() <= 1e-12 * (1.0 + f.abs()));
            prop_assert!(u * f <= 0.0); // restoring: opposes displacement
        }

        #[test]
        fn potential_even_and_nonpositive(u in -5.0f64..5.0, k in 0.1f64..3.0, tau in 0.05f64..1.0) {
            let p = example2_potential(u, k, tau);
            prop_assert!(p <= 0.0);
            prop_assert!((p - example2_potential(-u, k, tau)).abs() <= 1e-12 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn restoring_force_values() {
        assert_eq!(example2_force(0.0, 2.0, 0.5), 0.0);
        assert_relative_eq!(example2_force(1.0, 2.0, 0.5), -2.0, max_relative = 1e-14);
        assert_relative_eq!(example2_force(-1.0, 2.0, 0.5), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn potential_values() {
        assert_eq!(example2_potential(0.0, 1.0, 1.0), 0.0);
        assert_relative_eq!(
            example2_potential(1.0, 1.0, 1.0),
            -0.5,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            example2_potential(-1.0, 1.0, 1.0),
            -0.5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn eval_zero_forcing() {
        let f = Forcing::Zero;
        assert_eq!(f.eval(&args(3.0, 1.0, -2.0)).unwrap(), 0.0);
    }

    #[test]
    fn eval_example1_at_spike_apex() {
        // apex of spike n = 2 at t = 2: b^2 = 2 b0, u = pi/2 gives sin(u) = 1
        let b0 = 0.4;
        let f = Forcing::Example1 { b0 };
        let v = f
            .eval(&args(2.0, std::f64::consts::FRAC_PI_2, 0.0))
            .unwrap();
        assert_relative_eq!(v, (2.0 * b0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn eval_example2_undamped() {
        let f = Forcing::Example2 {
            k: 1.0,
            tau: 1.0,
            damping: Damping::zero(),
        };
        assert_relative_eq!(
            f.eval(&args(0.0, 0.3, 0.0)).unwrap(),
            -0.3,
            max_relative = 1e-14
        );
    }

    #[test]
    fn eval_rejects_non_finite() {
        let f = Forcing::Custom(Custom::from_fn(|a| if a.t > 1.0 { f64::NAN } else { 0.0 }));
        assert!(f.eval(&args(0.5, 0.0, 0.0)).is_ok());
        match f.eval(&args(2.0, 0.0, 0.0)) {
            Err(Error::ForcingEvaluation { x, t }) => {
                assert_eq!(x, 0.5);
                assert_eq!(t, 2.0);
            }
            other => panic!("expected forcing-evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn validate_parameter_ranges() {
        assert!(Forcing::Example1 { b0: -0.1 }.validate(1.0).is_err());
        assert!(Forcing::Example1 { b0: 0.0 }.validate(1.0).is_ok());

        let e2 = |k, tau, a_inf| Forcing::Example2 {
            k,
            tau,
            damping: Damping {
                a: None,
                a_inf,
                a_sup: a_inf.max(0.0),
            },
        };
        assert!(e2(1.0, 0.5, 0.0).validate(1.0).is_ok());
        assert!(e2(0.0, 0.5, 0.0).validate(1.0).is_err());
        assert!(e2(1.0, 0.0, 0.0).validate(1.0).is_err()); // tau = 0 excluded
        assert!(e2(1.0, 1.0, 0.0).validate(1.0).is_ok()); // tau = 1 allowed
        assert!(e2(1.0, 0.5, -5.0).validate(1.0).is_err()); // a_inf <= -epsilon
    }

    #[test]
    fn validate_rejects_null_incompatible_custom() {
        let f = Forcing::Custom(Custom::from_fn(|_| 1.0));
        assert!(matches!(f.validate(1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn damping_spot_check() {
        let honest = Damping {
            a: Some(Arc::new(|a: &ForcingArgs| a.t.sin())),
            a_inf: -1.0,
            a_sup: 1.0,
        };
        assert!(spot_check_damping(&honest, &DampingSampleBox::default()).is_ok());

        let dishonest = Damping {
            a: Some(Arc::new(|a: &ForcingArgs| a.t.sin())),
            a_inf: 0.0,
            a_sup: 0.5,
        };
        assert!(matches!(
            spot_check_damping(&dishonest, &DampingSampleBox::default()),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn potential_availability() {
        assert_eq!(Forcing::Zero.potential(2.0), Some(0.0));
        assert!(Forcing::Example1 { b0: 1.0 }.potential(2.0).is_none());
        assert!(Forcing::Example2 {
            k: 1.0,
            tau: 0.5,
            damping: Damping::zero()
        }
        .potential(2.0)
        .is_some());
    }
}
