//! Experiment configuration files.
//!
//! A config is a TOML document with top-level run parameters and one table per
//! concern (`[r]`, `[phi]`, `[flow]`, ...). Unknown keys are rejected at every
//! level.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::SVector;
use pathflow::flow::FlowMode;
use pathflow::mcverify::CylinderFunction;
use pathflow::sde::{CameronMartinPath, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFOLDS: [&str; 5] = ["circle", "torus1", "torus2", "sphere2", "so3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifold: String,
    #[serde(default)]
    pub drift: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Exact common expectation of both sides of an `ibp` or `qi` check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<f64>,
    #[serde(default)]
    pub r: ShiftConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiConfig>,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub ibp: IbpConfig,
    #[serde(default)]
    pub divergence: DivergenceConfig,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_steps() -> usize {
    256
}

fn default_samples() -> usize {
    10_000
}

/// The Cameron-Martin derivative `rdot`.
///
/// `constant` uses `values` on every cell, `linear` scales them by `t / T`,
/// `sin` by `sin(2 pi t / T)`; `cells` lists one row per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    #[serde(default = "default_shift_preset")]
    pub preset: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<Vec<f64>>,
}

fn default_shift_preset() -> String {
    "zero".into()
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            preset: default_shift_preset(),
            values: Vec::new(),
            cells: Vec::new(),
        }
    }
}

/// Cylinder test function evaluated at grid node `time` (default: the final
/// node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coeffs: Vec<f64>,
    /// Row-major `D x D` matrix of `quadratic`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub matrix: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exponents: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wavevector: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default = "default_flow_s")]
    pub s: f64,
    #[serde(default = "default_flow_ds")]
    pub ds: f64,
    /// Step of the `u`-integral of the density; defaults to `ds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub du: Option<f64>,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub bias_halving: bool,
}

fn default_flow_s() -> f64 {
    0.25
}

fn default_flow_ds() -> f64 {
    1.0 / 80.0
}

fn default_mode() -> String {
    "euler".into()
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            s: default_flow_s(),
            ds: default_flow_ds(),
            du: None,
            mode: default_mode(),
            bias_halving: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    100
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            points: default_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
    #[serde(default = "default_refine")]
    pub refine: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_true")]
    pub h_system: bool,
    #[serde(default = "default_true")]
    pub flow: bool,
    /// Flow time of the flow convergence study.
    #[serde(default = "default_convergence_flow_s")]
    pub flow_s: f64,
    #[serde(default = "default_flow_ds_levels")]
    pub flow_ds: Vec<f64>,
    #[serde(default = "default_flow_reference")]
    pub flow_reference: f64,
    #[serde(default = "default_flow_paths")]
    pub flow_paths: usize,
    #[serde(default = "default_min_order")]
    pub min_order: f64,
    #[serde(default = "default_heun_tolerance")]
    pub heun_tolerance: f64,
}

fn default_levels() -> Vec<usize> {
    vec![64, 128, 256, 512]
}

fn default_refine() -> usize {
    16
}

fn default_paths() -> usize {
    32
}

fn default_true() -> bool {
    true
}

fn default_convergence_flow_s() -> f64 {
    0.5
}

fn default_flow_ds_levels() -> Vec<f64> {
    vec![1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0]
}

fn default_flow_reference() -> f64 {
    1.0 / 320.0
}

fn default_flow_paths() -> usize {
    4
}

fn default_min_order() -> f64 {
    0.5
}

fn default_heun_tolerance() -> f64 {
    0.3
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            refine: default_refine(),
            paths: default_paths(),
            h_system: true,
            flow: true,
            flow_s: default_convergence_flow_s(),
            flow_ds: default_flow_ds_levels(),
            flow_reference: default_flow_reference(),
            flow_paths: default_flow_paths(),
            min_order: default_min_order(),
            heun_tolerance: default_heun_tolerance(),
        }
    }
}

/// Independent repetitions of `ibp` with seeds `seed, seed + 1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbpConfig {
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Passing repetitions required; defaults to all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_passes: Option<usize>,
}

fn default_repeats() -> usize {
    1
}

impl Default for IbpConfig {
    fn default() -> Self {
        Self {
            repeats: 1,
            min_passes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceConfig {
    #[serde(default = "default_true")]
    pub density: bool,
    /// Paths compared pathwise with the Girsanov exponent on flat tori.
    #[serde(default = "default_exact_paths")]
    pub exact_paths: usize,
}

fn default_exact_paths() -> usize {
    100
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        Self {
            density: true,
            exact_paths: default_exact_paths(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, value: f64) -> Result<(), CliError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {value}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !MANIFOLDS.contains(&self.manifold.as_str()) {
            return Err(invalid(format!(
                "unknown manifold {:?}; expected one of {MANIFOLDS:?}",
                self.manifold
            )));
        }
        positive("horizon", self.horizon)?;
        if self.steps == 0 {
            return Err(invalid("steps must be positive"));
        }
        if self.samples == 0 {
            return Err(invalid("samples must be positive"));
        }
        if !self.drift.is_finite() {
            return Err(invalid("drift must be finite"));
        }
        positive("flow.ds", self.flow.ds)?;
        if let Some(du) = self.flow.du {
            positive("flow.du", du)?;
        }
        if !self.flow.s.is_finite() {
            return Err(invalid("flow.s must be finite"));
        }
        self.mode()?;
        if self.geometry.points == 0 {
            return Err(invalid("geometry.points must be positive"));
        }
        let c = &self.convergence;
        if c.refine == 0 || c.paths == 0 || c.flow_paths == 0 {
            return Err(invalid(
                "convergence refine and path counts must be positive",
            ));
        }
        for &ds in &c.flow_ds {
            positive("convergence.flow_ds", ds)?;
        }
        positive("convergence.flow_reference", c.flow_reference)?;
        if self.ibp.repeats == 0 {
            return Err(invalid("ibp.repeats must be positive"));
        }
        if self.ibp.min_passes.is_some_and(|m| m > self.ibp.repeats) {
            return Err(invalid("ibp.min_passes exceeds ibp.repeats"));
        }
        Ok(())
    }

    pub fn mode(&self) -> Result<FlowMode, CliError> {
        self.flow.mode.parse().map_err(|_| {
            invalid(format!(
                "flow.mode must be euler or heun, got {:?}",
                self.flow.mode
            ))
        })
    }

    pub fn du(&self) -> f64 {
        self.flow.du.unwrap_or(self.flow.ds)
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(self.horizon, self.steps)?)
    }
}

fn vector<const N: usize>(name: &str, values: &[f64]) -> Result<SVector<f64, N>, CliError> {
    if values.len() != N {
        return Err(invalid(format!(
            "{name} needs {N} entries, got {}",
            values.len()
        )));
    }
    Ok(SVector::from_column_slice(values))
}

/// `rdot` as a function of time.
pub type Rate<const N: usize> = Box<dyn Fn(f64) -> SVector<f64, N> + Sync>;

impl ShiftConfig {
    /// `rdot(t)` of the smooth presets; `cells` has no meaning off its grid.
    pub fn rate<const N: usize>(&self, horizon: f64) -> Result<Rate<N>, CliError> {
        match self.preset.as_str() {
            "zero" => Ok(Box::new(|_| SVector::zeros())),
            "constant" => {
                let v = vector::<N>("r.values", &self.values)?;
                Ok(Box::new(move |_| v))
            }
            "linear" => {
                let v = vector::<N>("r.values", &self.values)?;
                Ok(Box::new(move |t| v * (t / horizon)))
            }
            "sin" => {
                let v = vector::<N>("r.values", &self.values)?;
                Ok(Box::new(move |t| v * (TAU * t / horizon).sin()))
            }
            "cells" => Err(invalid("r preset cells is tied to its grid")),
            other => Err(invalid(format!(
                "unknown r preset {other:?}; expected zero, constant, linear, sin or cells"
            ))),
        }
    }

    pub fn build<const N: usize>(&self, grid: &TimeGrid) -> Result<CameronMartinPath<N>, CliError> {
        if self.preset == "cells" {
            let cells = self
                .cells
                .iter()
                .map(|c| vector::<N>("r.cells row", c))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(CameronMartinPath::from_cells(grid, cells)?);
        }
        Ok(CameronMartinPath::from_fn(grid, self.rate(grid.horizon())?))
    }
}

impl PhiConfig {
    pub fn build<const D: usize>(&self, steps: usize) -> Result<CylinderFunction<D>, CliError> {
        let time = self.time.unwrap_or(steps);
        if time > steps {
            return Err(invalid(format!(
                "phi.time {time} exceeds the grid ({steps} steps)"
            )));
        }
        match self.preset.as_str() {
            "linear" => Ok(CylinderFunction::ambient_linear(
                time,
                vector("phi.coeffs", &self.coeffs)?,
            )),
            "quadratic" => {
                if self.matrix.len() != D * D {
                    return Err(invalid(format!("phi.matrix needs {} entries", D * D)));
                }
                Ok(CylinderFunction::quadratic(
                    time,
                    nalgebra::SMatrix::from_row_slice(&self.matrix),
                ))
            }
            "monomial" => {
                let exponents: [u32; D] = self
                    .exponents
                    .as_slice()
                    .try_into()
                    .map_err(|_| invalid(format!("phi.exponents needs {D} entries")))?;
                Ok(CylinderFunction::monomial(time, exponents))
            }
            "cosine" => Ok(CylinderFunction::cosine(
                time,
                vector("phi.wavevector", &self.wavevector)?,
                self.phase,
            )),
            other => Err(invalid(format!(
                "unknown phi preset {other:?}; expected linear, quadratic, monomial or cosine"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse("manifold = \"circle\"").unwrap();
        assert_eq!((c.horizon, c.steps, c.seed), (1.0, 256, 0));
        assert_eq!(c.flow.ds, 1.0 / 80.0);
        assert_eq!(c.du(), c.flow.ds);
        assert_eq!(c.mode().unwrap(), FlowMode::Euler);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse("manifold = \"circle\"\nsteps_ = 3").is_err());
        assert!(ExperimentConfig::parse("manifold = \"circle\"\n[flow]\nsize = 3").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "manifold = \"klein\"",
            "manifold = \"circle\"\nhorizon = -1.0",
            "manifold = \"circle\"\nsteps = 0",
            "manifold = \"circle\"\n[flow]\nmode = \"rk4\"",
            "manifold = \"circle\"\n[flow]\nds = 0.0",
            "manifold = \"circle\"\n[ibp]\nrepeats = 2\nmin_passes = 3",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "manifold = \"sphere2\"\nanalytic = 0.5\n[r]\npreset = \"sin\"\nvalues = [1.0, 0.0, 0.0]\n[phi]\npreset = \"monomial\"\nexponents = [1, 1, 0]\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn shift_presets() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let linear = ShiftConfig {
            preset: "linear".into(),
            values: vec![2.0],
            cells: vec![],
        };
        let r = linear.build::<1>(&grid).unwrap();
        assert_eq!(
            r.rdot.iter().map(|c| c[0]).collect::<Vec<_>>(),
            [0.0, 0.5, 1.0, 1.5]
        );
        let cells = ShiftConfig {
            preset: "cells".into(),
            values: vec![],
            cells: vec![vec![1.0]; 3],
        };
        assert!(cells.build::<1>(&grid).is_err());
        assert!(linear.build::<2>(&grid).is_err());
    }

    #[test]
    fn phi_time_defaults_to_the_final_node() {
        let phi = PhiConfig {
            preset: "linear".into(),
            time: None,
            coeffs: vec![0.0, 1.0],
            matrix: vec![],
            exponents: vec![],
            wavevector: vec![],
            phase: 0.0,
        };
        assert_eq!(phi.build::<2>(64).unwrap().times(), [64]);
        assert!(PhiConfig {
            time: Some(65),
            ..phi
        }
        .build::<2>(64)
        .is_err());
    }
}
