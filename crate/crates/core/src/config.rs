//! JSON run configuration for the command-line tool.

use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::integrators::IntegratorKind;
use crate::loading::{paper_loading, LoadingProgram};
use crate::material::MaterialParams;
use crate::stability::Rheo1DParams;

pub const DEFAULT_CONFIG_JSON: &str = include_str!("default_config.json");

/// Either the built-in four-knot program (`"paper"`) or an explicit knot list.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LoadingSpec {
    #[default]
    Paper,
    Knots(LoadingProgram),
}

impl LoadingSpec {
    pub fn program(&self) -> LoadingProgram {
        match self {
            LoadingSpec::Paper => paper_loading(),
            LoadingSpec::Knots(p) => p.clone(),
        }
    }
}

impl Serialize for LoadingSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LoadingSpec::Paper => s.serialize_str("paper"),
            LoadingSpec::Knots(p) => p.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for LoadingSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        match value {
            serde_json::Value::String(s) if s == "paper" => Ok(LoadingSpec::Paper),
            serde_json::Value::String(s) => Err(D::Error::custom(format!(
                "unknown loading `{s}`; use \"paper\" or a list of knots"
            ))),
            v @ serde_json::Value::Array(_) => serde_json::from_value(v).map(LoadingSpec::Knots).map_err(D::Error::custom),
            _ => Err(D::Error::custom("loading must be \"paper\" or a list of {t, F} knots")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySettings {
    /// Upper end of the `q(θ)` curve.
    pub theta_max: f64,
    /// Grid points per axis of the `q(θ)` search.
    pub resolution: usize,
    /// Number of `θ` values on the curve, including `θ = 0`.
    pub points: usize,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self {
            theta_max: 0.03,
            resolution: 400,
            points: 61,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demo1DConfig {
    pub params: Rheo1DParams,
    /// Initial inelastic strains of the two trajectories.
    pub eps_i0: [f64; 2],
    pub t_end: f64,
    pub dt: f64,
}

impl Default for Demo1DConfig {
    fn default() -> Self {
        Self {
            params: Rheo1DParams {
                e: 1000.0,
                k: 1.0,
                eta: 100.0,
                strain_rate: 0.01,
                strain_accel: 0.0,
            },
            eps_i0: [0.0, 0.001],
            t_end: 2.0,
            dt: 1e-3,
        }
    }
}

fn default_methods() -> Vec<IntegratorKind> {
    vec![IntegratorKind::Mebm, IntegratorKind::Em, IntegratorKind::Ebm]
}

fn default_dts() -> Vec<f64> {
    vec![1.0, 0.5]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Fields missing from a file take the built-in defaults, except `dt_ref`
/// and `t_end`, which stay unset (the error study then refuses to run, and
/// simulations run to the last loading knot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub material: MaterialParams,
    #[serde(default)]
    pub loading: LoadingSpec,
    #[serde(default = "default_methods")]
    pub methods: Vec<IntegratorKind>,
    #[serde(default = "default_dts")]
    pub dts: Vec<f64>,
    #[serde(default)]
    pub dt_ref: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Where reference solutions are cached; defaults to `<out_dir>/cache`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub stability: StabilitySettings,
    #[serde(default)]
    pub demo_1d: Demo1DConfig,
}

impl RunConfig {
    /// The embedded configuration reproducing the standard studies.
    pub fn embedded_default() -> Self {
        Self::from_json(DEFAULT_CONFIG_JSON).expect("embedded default configuration is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("`methods` must name at least one integrator".into()));
        }
        if self.dts.is_empty() {
            return Err(Error::Config("`dts` must contain at least one step size".into()));
        }
        for &dt in &self.dts {
            positive("dts", dt)?;
        }
        if let Some(dt_ref) = self.dt_ref {
            positive("dt_ref", dt_ref)?;
        }
        if let Some(t_end) = self.t_end {
            positive("t_end", t_end)?;
        }
        positive("stability.theta_max", self.stability.theta_max)?;
        if self.stability.resolution < 2 {
            return Err(Error::InvalidParameter {
                name: "stability.resolution",
                constraint: "resolution >= 2",
                value: self.stability.resolution as f64,
            });
        }
        if self.stability.points < 2 {
            return Err(Error::InvalidParameter {
                name: "stability.points",
                constraint: "points >= 2",
                value: self.stability.points as f64,
            });
        }
        self.demo_1d.params.validate()?;
        positive("demo_1d.t_end", self.demo_1d.t_end)?;
        positive("demo_1d.dt", self.demo_1d.dt)?;
        Ok(())
    }

    pub fn loading_program(&self) -> LoadingProgram {
        self.loading.program()
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            constraint: "a positive finite value",
            value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_default_matches_reference_setup() {
        let cfg = RunConfig::embedded_default();
        assert_eq!(cfg.material, MaterialParams::TABLE1);
        assert_eq!(cfg.loading, LoadingSpec::Paper);
        assert_eq!(cfg.methods[0], IntegratorKind::Mebm);
        assert_eq!(cfg.dts, vec![1.0, 0.5]);
        assert_eq!(cfg.dt_ref, Some(0.01));
        assert_eq!(cfg.demo_1d, Demo1DConfig::default());
        assert_eq!(cfg.stability, StabilitySettings::default());
    }

    #[test]
    fn print_and_reload_is_identity() {
        let cfg = RunConfig::embedded_default();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn missing_fields_take_defaults_except_dt_ref() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg.material, MaterialParams::TABLE1);
        assert_eq!(cfg.dt_ref, None);
        assert_eq!(cfg.t_end, None);
    }

    #[test]
    fn rejects_invalid_values() {
        let err = RunConfig::from_json(r#"{"material": {"k": 73500, "mu": 28200, "K": 270, "m": 0.5, "eta": 2e6, "k0": 1}}"#)
            .unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("m >= 1"), "{err}");
        assert!(RunConfig::from_json(r#"{"t_end": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"stability": {"theta_max": 0, "resolution": 10, "points": 5}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"dts": []}"#).is_err());
        assert!(RunConfig::from_json(r#"{"methods": ["RK4"]}"#).is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::from_json(r#"{"material_typo": 1}"#).is_err());
        assert!(RunConfig::from_json(
            r#"{"material": {"k": 1, "mu": 1, "K": 1, "m": 1, "eta": 1, "k0": 1, "nu": 0.3}}"#
        )
        .is_err());
    }

    #[test]
    fn explicit_knots() {
        let cfg = RunConfig::from_json(
            r#"{"loading": [{"t": 0, "F": [[1,0,0],[0,1,0],[0,0,1]]}, {"t": 10, "F": [[1.1,0,0],[0,1,0],[0,0,1]]}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.loading_program().end(), 10.0);
        assert!(RunConfig::from_json(r#"{"loading": "cyclic"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"loading": [{"t": 0, "F": [[1,0,0],[0,1,0],[0,0,1]]}]}"#).is_err());
    }
}
