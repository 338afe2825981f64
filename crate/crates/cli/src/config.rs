//! Run configuration: JSON schema, defaults, and physics validation.

use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use dwlab_core::forcing::{Damping, Forcing};
use dwlab_core::grid::{Grid, State};
use dwlab_core::sim::PdeParams;

/// Top-level configuration document.
///
/// Minimal example:
/// `{"epsilon": 1.0, "c2": 1.0, "forcing": {"kind": "zero"}, "initial": {"u_modes": [0.1]}}`
/// Everything else takes defaults (n_interior = 199, dt = 1e-3,
/// observe_stride = 100, gamma per route).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub epsilon: f64,
    /// Squared wave speed c^2.
    pub c2: f64,
    pub forcing: ForcingConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// Cartesian sweep lists (used by the `sweep` subcommand only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ForcingConfig {
    Zero,
    Example1 {
        b0: f64,
    },
    Example2 {
        k: f64,
        tau: f64,
        #[serde(default)]
        a_inf: f64,
        #[serde(default)]
        a_sup: f64,
    },
    /// Callback forcings cannot be expressed in JSON; the library API
    /// accepts them, the CLI rejects them at parse time.
    Custom,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Sine-series coefficients for u (entry k drives mode k+1).
    #[serde(default)]
    pub u_modes: Vec<f64>,
    #[serde(default)]
    pub v_modes: Vec<f64>,
    /// Alternative: raw samples of length n_interior + 2 with zero endpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_samples: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_samples: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_interior: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_interior: 199 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub observe_stride: usize,
}

fn default_t_end() -> f64 {
    10.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_stride() -> usize {
    100
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t0: 0.0,
            t_end: default_t_end(),
            dt: default_dt(),
            observe_stride: default_stride(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// gamma override; defaults to 1 on the V route and to the damping
    /// formula on the W route.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Search cap for the comparison level (r_bar may be unbounded).
    #[serde(default = "default_r_search_max")]
    pub r_search_max: f64,
    /// Horizon for the averaged-growth estimate.
    #[serde(default = "default_q_horizon")]
    pub q_horizon: f64,
    /// Scan step for running integrals (growth average, transient budget).
    #[serde(default = "default_dt")]
    pub scan_dt: f64,
    #[serde(default = "default_tol_abs")]
    pub tol_abs: f64,
    #[serde(default = "default_tol_rel")]
    pub tol_rel: f64,
    /// Initial times for the `region` subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0_list: Option<Vec<f64>>,
    /// Random sine-series sample count for state-batch checks.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_r_search_max() -> f64 {
    1.0
}
fn default_q_horizon() -> f64 {
    500.0
}
fn default_tol_abs() -> f64 {
    1e-8
}
fn default_tol_rel() -> f64 {
    1e-6
}
fn default_samples() -> usize {
    200
}
fn default_seed() -> u64 {
    2024
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            gamma: None,
            r_search_max: default_r_search_max(),
            q_horizon: default_q_horizon(),
            scan_dt: default_dt(),
            tol_abs: default_tol_abs(),
            tol_rel: default_tol_rel(),
            t0_list: None,
            samples: default_samples(),
            seed: default_seed(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

/// Per-parameter value lists for the `sweep` subcommand; absent lists keep
/// the base value.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub c2: Vec<f64>,
    #[serde(default)]
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub b0: Vec<f64>,
    #[serde(default)]
    pub k: Vec<f64>,
    #[serde(default)]
    pub tau: Vec<f64>,
}

impl RunSpec {
    /// Parse and validate a configuration document.
    pub fn parse(text: &str) -> anyhow::Result<RunSpec> {
        let spec: RunSpec =
            serde_json::from_str(text).context("configuration document is not valid")?;
        spec.validate()?;
        Ok(spec)
    }

    /// Physics validation, each failure naming the violated condition.
    pub fn validate(&self) -> anyhow::Result<()> {
        PdeParams::new(self.epsilon, self.c2).map_err(|e| {
            anyhow::anyhow!("{e} (the operator coefficients must be positive constants)")
        })?;
        match &self.forcing {
            ForcingConfig::Custom => {
                bail!("forcing.kind = \"custom\" needs Rust callbacks and is only available through the library API")
            }
            other => {
                let forcing = build_forcing(other);
                forcing
                    .validate(self.epsilon)
                    .map_err(|e| anyhow::anyhow!("forcing: {e}"))?;
            }
        }
        if let Some(gamma) = self.analysis.gamma {
            if !(gamma > 0.5) {
                bail!("analysis.gamma = {gamma}: gamma must exceed 1/2");
            }
        }
        if self.grid.n_interior < 3 {
            bail!(
                "grid.n_interior = {}: need at least 3 interior nodes",
                self.grid.n_interior
            );
        }
        if !(self.time.t_end > self.time.t0) {
            bail!(
                "time: t_end = {} must exceed t0 = {}",
                self.time.t_end,
                self.time.t0
            );
        }
        if !(self.time.dt > 0.0) {
            bail!("time.dt must be positive");
        }
        if self.time.observe_stride == 0 {
            bail!("time.observe_stride must be at least 1");
        }
        if let Some(u) = &self.initial.u_samples {
            self.check_samples("initial.u_samples", u)?;
        }
        if let Some(v) = &self.initial.v_samples {
            self.check_samples("initial.v_samples", v)?;
        }
        Ok(())
    }

    fn check_samples(&self, field: &str, samples: &[f64]) -> anyhow::Result<()> {
        let want = self.grid.n_interior + 2;
        if samples.len() != want {
            bail!("{field}: got {} samples, grid needs {want}", samples.len());
        }
        if samples[0] != 0.0 || samples[want - 1] != 0.0 {
            bail!("{field}: initial data must vanish at both boundary nodes");
        }
        Ok(())
    }

    pub fn params(&self) -> PdeParams {
        PdeParams::new(self.epsilon, self.c2).expect("validated")
    }

    pub fn build_grid(&self) -> anyhow::Result<Grid> {
        Ok(Grid::new(self.grid.n_interior)?)
    }

    pub fn build_forcing(&self) -> Forcing {
        build_forcing(&self.forcing)
    }

    /// The W route handles forcings with a potential (restoring-force
    /// split); the V route handles the rest through the declared g_hat.
    pub fn uses_w_route(&self) -> bool {
        matches!(self.forcing, ForcingConfig::Example2 { .. })
    }

    /// Route-dependent gamma default: 1 for the V machinery, the damping
    /// formula for the W machinery.
    pub fn gamma(&self) -> anyhow::Result<f64> {
        if let Some(g) = self.analysis.gamma {
            return Ok(g);
        }
        if let ForcingConfig::Example2 { a_inf, a_sup, .. } = self.forcing {
            Ok(dwlab_core::certificates::damping_gamma(
                &self.params(),
                a_inf,
                a_sup,
            )?)
        } else {
            Ok(1.0)
        }
    }

    pub fn initial_state(&self, grid: &Grid) -> anyhow::Result<State> {
        match (&self.initial.u_samples, &self.initial.v_samples) {
            (None, None) => Ok(State::from_sine_series(
                &self.initial.u_modes,
                &self.initial.v_modes,
                grid,
                self.time.t0,
            )),
            (u, v) => {
                let zeros = vec![0.0; grid.len()];
                let u = dwlab_core::grid::GridFunction::new(
                    grid.clone(),
                    u.clone().unwrap_or_else(|| zeros.clone()),
                )?;
                let v =
                    dwlab_core::grid::GridFunction::new(grid.clone(), v.clone().unwrap_or(zeros))?;
                Ok(State::new(u, v, self.time.t0)?)
            }
        }
    }
}

fn build_forcing(cfg: &ForcingConfig) -> Forcing {
    match *cfg {
        ForcingConfig::Zero => Forcing::Zero,
        ForcingConfig::Example1 { b0 } => Forcing::Example1 { b0 },
        ForcingConfig::Example2 {
            k,
            tau,
            a_inf,
            a_sup,
        } => Forcing::Example2 {
            k,
            tau,
            damping: Damping {
                a: None,
                a_inf,
                a_sup,
            },
        },
        ForcingConfig::Custom => unreachable!("rejected during validation"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{"epsilon": 1.0, "c2": 1.0, "forcing": {"kind": "zero"}, "initial": {"u_modes": [0.1]}}"#;

    #[test]
    fn minimal_document_fills_defaults() {
        let spec = RunSpec::parse(MINIMAL).unwrap();
        assert_eq!(spec.grid.n_interior, 199);
        assert_eq!(spec.time.dt, 1e-3);
        assert_eq!(spec.time.observe_stride, 100);
        assert_eq!(spec.analysis.samples, 200);
        assert!(spec.analysis.gamma.is_none());
        assert_eq!(spec.gamma().unwrap(), 1.0);
        assert!(!spec.uses_w_route());
    }

    #[test]
    fn negative_epsilon_names_condition() {
        let text = MINIMAL.replace("\"epsilon\": 1.0", "\"epsilon\": -1.0");
        let err = RunSpec::parse(&text).unwrap_err().to_string();
        assert!(err.contains("positive"), "{err}");
    }

    #[test]
    fn example2_damping_bound_checked() {
        let text = r#"{
            "epsilon": 1.0, "c2": 1.0,
            "forcing": {"kind": "example2", "k": 1.0, "tau": 0.5, "a_inf": -5.0, "a_sup": 0.0},
            "initial": {"u_modes": [0.1]}
        }"#;
        let err = RunSpec::parse(text).unwrap_err().to_string();
        assert!(err.contains("a_inf") && err.contains("-epsilon"), "{err}");
    }

    #[test]
    fn custom_kind_rejected() {
        let text = r#"{"epsilon": 1.0, "c2": 1.0, "forcing": {"kind": "custom"}, "initial": {}}"#;
        let err = RunSpec::parse(text).unwrap_err().to_string();
        assert!(err.contains("library API"), "{err}");
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let text = MINIMAL.replace("\"epsilon\"", "\"epsilonn\"");
        assert!(RunSpec::parse(&text).is_err());
    }

    #[test]
    fn w_route_gamma_default() {
        let text = r#"{
            "epsilon": 1.0, "c2": 1.0,
            "forcing": {"kind": "example2", "k": 1.0, "tau": 0.5},
            "initial": {"u_modes": [0.1]}
        }"#;
        let spec = RunSpec::parse(text).unwrap();
        assert!(spec.uses_w_route());
        assert_eq!(spec.gamma().unwrap(), 1.5);
    }

    #[test]
    fn sample_initial_data_must_vanish_at_boundary() {
        let mut samples = vec![0.0; 201];
        samples[0] = 0.1;
        let text = format!(
            r#"{{"epsilon": 1.0, "c2": 1.0, "forcing": {{"kind": "zero"}},
                "initial": {{"u_samples": {samples:?}}}}}"#
        );
        let err = RunSpec::parse(&text).unwrap_err().to_string();
        assert!(err.contains("vanish"), "{err}");
    }

    #[test]
    fn round_trip_preserves_spec() {
        let spec = RunSpec::parse(MINIMAL).unwrap();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let again = RunSpec::parse(&text).unwrap();
        assert_eq!(
            serde_json::to_string(&again).unwrap(),
            serde_json::to_string(&spec).unwrap()
        );
    }

    proptest! {
        #[test]
        fn round_trip_numeric_fields(
            eps in 0.1f64..5.0,
            c2 in 0.1f64..5.0,
            dt in 1e-4f64..1e-2,
            t_end in 0.5f64..20.0,
            stride in 1usize..500,
            b0 in 0.0f64..0.2,
        ) {
            let text = format!(
                r#"{{"epsilon": {eps}, "c2": {c2},
                    "forcing": {{"kind": "example1", "b0": {b0}}},
                    "initial": {{"u_modes": [0.05, -0.01]}},
                    "time": {{"t0": 0.0, "t_end": {t_end}, "dt": {dt}, "observe_stride": {stride}}}}}"#
            );
            let spec = RunSpec::parse(&text).unwrap();
            let rt = RunSpec::parse(&serde_json::to_string(&spec).unwrap()).unwrap();
            prop_assert_eq!(rt.epsilon, spec.epsilon);
            prop_assert_eq!(rt.c2, spec.c2);
            prop_assert_eq!(rt.time.dt, spec.time.dt);
            prop_assert_eq!(rt.time.t_end, spec.time.t_end);
            prop_assert_eq!(rt.time.observe_stride, spec.time.observe_stride);
        }
    }
}
