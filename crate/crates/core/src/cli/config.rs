use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::analysis::Target;
use crate::error::{Error, Result};
use crate::giem::{FamilyDescriptor, NumText};
use crate::numerics::{ArithmeticMode, PrecisionContext};
use crate::rauzy::ChainReading;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    Martingale,
    Denjoy,
    Combinatorics,
    Diagnostics,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Martingale => "martingale",
            ExperimentKind::Denjoy => "denjoy",
            ExperimentKind::Combinatorics => "combinatorics",
            ExperimentKind::Diagnostics => "diagnostics",
        }
    }
}

/// A built-in family by name, or a full descriptor.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MapSpec {
    Preset { preset: String },
    Custom(FamilyDescriptor),
}

impl<'de> Deserialize<'de> for MapSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        if let Some(obj) = v.as_object() {
            if let Some(name) = obj.get("preset") {
                if obj.len() != 1 {
                    return Err(D::Error::custom("`preset` cannot be combined with other map fields"));
                }
                let name = name.as_str().ok_or_else(|| D::Error::custom("`preset` must be a string"))?;
                return Ok(MapSpec::Preset { preset: name.to_string() });
            }
        }
        FamilyDescriptor::deserialize(v).map(MapSpec::Custom).map_err(D::Error::custom)
    }
}

impl MapSpec {
    pub fn descriptor(&self) -> Result<FamilyDescriptor> {
        match self {
            MapSpec::Preset { preset } => FamilyDescriptor::preset(preset),
            MapSpec::Custom(d) => Ok(d.clone()),
        }
    }
}

fn default_bits() -> u32 {
    256
}

fn default_mode() -> ArithmeticMode {
    ArithmeticMode::ExtendedFloat
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionSpec {
    #[serde(default = "default_mode")]
    pub mode: ArithmeticMode,
    #[serde(default = "default_bits")]
    pub float_bits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<NumText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_quad_panels: Option<usize>,
}

impl Default for PrecisionSpec {
    fn default() -> Self {
        PrecisionSpec { mode: default_mode(), float_bits: default_bits(), quad_tol: None, grid_points: None, max_quad_panels: None }
    }
}

impl PrecisionSpec {
    pub fn context(&self) -> Result<PrecisionContext> {
        let mut ctx = match self.mode {
            ArithmeticMode::ExtendedFloat => PrecisionContext::extended(self.float_bits),
            ArithmeticMode::ExactRational => PrecisionContext::exact(),
        };
        if let Some(t) = &self.quad_tol {
            ctx.quad_tol = match t {
                NumText::Text(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("precision.quad_tol: cannot parse {s:?}")))?,
                NumText::Int(i) => *i as f64,
                NumText::Float(v) => *v,
            };
        }
        if let Some(g) = self.grid_points {
            ctx.grid_points = g;
        }
        if let Some(p) = self.max_quad_panels {
            ctx.max_quad_panels = p;
        }
        ctx.validate()?;
        Ok(ctx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub target: Target,
    pub l1: bool,
    pub max_refinements: usize,
    pub lambda_window: Option<usize>,
    pub p: f64,
    pub mn_quadrature: bool,
    pub record_timings: bool,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            target: Target::Mobius,
            l1: true,
            max_refinements: 2,
            lambda_window: None,
            p: 2.0,
            mn_quadrature: false,
            record_timings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MartingaleSection {
    pub p: f64,
    pub cross_check: bool,
    pub lambda_window: Option<usize>,
    pub tower_tol: f64,
    pub mean_zero_tol: f64,
    /// Required `‖g − Φ_N‖₂ / ‖g‖₂` at the deepest level.
    pub final_ratio: f64,
}

impl Default for MartingaleSection {
    fn default() -> Self {
        MartingaleSection { p: 2.0, cross_check: false, lambda_window: None, tower_tol: 1e-12, mean_zero_tol: 1e-15, final_ratio: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenjoySection {
    pub pairs: usize,
    pub fit_depth: usize,
    pub product_samples: usize,
}

impl Default for DenjoySection {
    fn default() -> Self {
        DenjoySection { pairs: 500, fit_depth: 7, product_samples: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombinatoricsSection {
    pub k: Option<usize>,
    pub reading: ChainReading,
    pub connection_iterates: usize,
}

impl Default for CombinatoricsSection {
    fn default() -> Self {
        CombinatoricsSection { k: None, reading: ChainReading::IndexConsistent, connection_iterates: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub tau_grid: usize,
    pub sums: bool,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection { tau_grid: 33, sums: true }
    }
}

fn one() -> usize {
    1
}

/// One experiment, as read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub map: MapSpec,
    #[serde(default)]
    pub precision: PrecisionSpec,
    /// Deepest renormalization level `N`.
    pub depth: usize,
    #[serde(default = "one")]
    pub first_depth: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub martingale: MartingaleSection,
    #[serde(default)]
    pub denjoy: DenjoySection,
    #[serde(default)]
    pub combinatorics: CombinatoricsSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.first_depth > self.depth {
            return Err(Error::Config(format!("first_depth {} exceeds depth {}", self.first_depth, self.depth)));
        }
        self.precision.context()?;
        self.map.descriptor()?.combinatorics()?;
        Ok(())
    }

    pub fn with_overrides(mut self, depth: Option<usize>, bits: Option<u32>, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = depth {
            self.depth = d;
            self.first_depth = self.first_depth.min(d);
        }
        if let Some(b) = bits {
            self.precision.float_bits = b;
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        if out.is_some() {
            self.out = out;
        }
        self.validate()?;
        Ok(self)
    }
}
