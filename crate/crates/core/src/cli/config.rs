//! Run configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, ScalarField, VelocityGrid};
use crate::rates::TheoremId;
use crate::solver::{DtPolicy, Scheme, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub half_extent: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.dim, self.half_extent, self.points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Maxwellian,
    SqueezedGaussian { sigma: f64 },
    ConcentratedGaussian { sigma: f64, weight: f64 },
    Counterexample { m: f64 },
    Shell { radius: f64, width: f64 },
    /// Sum of random Gaussian bumps drawn from the run seed.
    Random { bumps: usize, spread: f64 },
    File { path: PathBuf },
}

impl ProfileSpec {
    /// Relative file paths resolve against `base`.
    pub fn build(&self, grid: &VelocityGrid, seed: u64, base: &Path) -> Result<ScalarField> {
        match self {
            Self::Maxwellian => Ok(grid::maxwellian(grid)),
            Self::SqueezedGaussian { sigma } => grid::squeezed_gaussian(grid, *sigma),
            Self::ConcentratedGaussian { sigma, weight } => grid::concentrated_gaussian(grid, *sigma, *weight),
            Self::Counterexample { m } => grid::counterexample_profile(grid, *m),
            Self::Shell { radius, width } => grid::shell(grid, *radius, *width),
            Self::Random { bumps, spread } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(grid::random_density(grid, &mut rng, *bumps, *spread))
            }
            Self::File { path } => {
                let path = if path.is_relative() { base.join(path) } else { path.clone() };
                let f = grid::load_snapshot(&path)?;
                if f.grid != *grid {
                    return Err(Error::Config("initial.path: snapshot grid does not match the configured grid".to_string()));
                }
                Ok(f)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(default)]
    pub kind: Scheme,
    /// Fixed step; the automatic policy when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_stride: Option<usize>,
    #[serde(default)]
    pub projection: bool,
}

impl SchemeSpec {
    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig {
            scheme: self.kind,
            projection: self.projection,
            ..SolverConfig::default()
        };
        if let Some(dt) = self.dt {
            cfg.dt = DtPolicy::Fixed { dt };
        }
        if let Some(tol) = self.mass_tol {
            cfg.mass_tol = tol;
        }
        if let Some(s) = self.coefficient_stride {
            cfg.coefficient_stride = s;
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    #[serde(default = "default_base_side")]
    pub base_side: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_ap")]
    pub p: f64,
}

fn default_base_side() -> f64 {
    2.0
}
fn default_levels() -> usize {
    2
}
fn default_ap() -> f64 {
    2.0
}

impl Default for WeightsSpec {
    fn default() -> Self {
        Self {
            base_side: default_base_side(),
            levels: default_levels(),
            p: default_ap(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareSpec {
    #[serde(default = "default_eps_count")]
    pub epsilons: usize,
}

fn default_eps_count() -> usize {
    8
}

impl Default for PoincareSpec {
    fn default() -> Self {
        Self {
            epsilons: default_eps_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSpec {
    pub theorem: TheoremId,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
}

fn default_radii() -> Vec<f64> {
    vec![2.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoserSpec {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_moser_radius")]
    pub radius: f64,
}

fn default_n_max() -> usize {
    6
}
fn default_moser_radius() -> f64 {
    2.0
}

impl Default for MoserSpec {
    fn default() -> Self {
        Self {
            n_max: default_n_max(),
            radius: default_moser_radius(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poincare: Option<PoincareSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moser: Option<MoserSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub gamma: f64,
    pub initial: ProfileSpec,
    #[serde(default)]
    pub scheme: SchemeSpec,
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_stride() -> usize {
    1
}

const REQUIRED: [&str; 4] = ["grid", "gamma", "initial", "t_final"];
const REQUIRED_GRID: [&str; 3] = ["dim", "half_extent", "points"];

impl RunConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?
        } else {
            let v: toml::Value = toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML: {e}")))?;
            serde_json::to_value(v)?
        };
        Self::from_value(value)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn from_value(value: serde_json::Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("configuration must be a table".into()))?;
        let mut missing: Vec<String> = REQUIRED
            .iter()
            .filter(|k| !obj.contains_key(**k))
            .map(|k| k.to_string())
            .collect();
        if let Some(g) = obj.get("grid").and_then(|g| g.as_object()) {
            missing.extend(
                REQUIRED_GRID
                    .iter()
                    .filter(|k| !g.contains_key(**k))
                    .map(|k| format!("grid.{k}")),
            );
        }
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing fields: {}", missing.join(", "))));
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks value ranges, listing every offending field.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let d = self.grid.dim as f64;
        if self.grid.dim < 2 {
            bad.push("grid.dim: must be at least 2".to_string());
        }
        if !(self.grid.half_extent > 0.0) {
            bad.push("grid.half_extent: must be positive".to_string());
        }
        if self.grid.points < 2 {
            bad.push("grid.points: must be at least 2".to_string());
        }
        if !(self.gamma >= -d && self.gamma <= 0.0) {
            bad.push(format!("gamma: {} is outside [-d, 0]", self.gamma));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            bad.push("t_final: must be finite and nonnegative".to_string());
        }
        if self.snapshot_stride == 0 {
            bad.push("snapshot_stride: must be positive".to_string());
        }
        if let Some(dt) = self.scheme.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                bad.push("scheme.dt: must be positive".to_string());
            }
        }
        if let Some(m) = &self.diagnostics.moser {
            if m.n_max > crate::rates::MOSER_MAX_LEVEL {
                bad.push("diagnostics.moser.n_max: must not exceed 8".to_string());
            }
        }
        if let Some(r) = &self.diagnostics.rates {
            if r.radii.is_empty() {
                bad.push("diagnostics.rates.radii: must not be empty".to_string());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
gamma = 0.0
t_final = 0.5
[grid]
dim = 3
half_extent = 8.0
points = 16
[initial]
kind = "maxwellian"
"#;

    #[test]
    fn minimal_toml_parses() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.grid.points, 16);
        assert_eq!(c.initial, ProfileSpec::Maxwellian);
        assert_eq!(c.snapshot_stride, 1);
    }

    #[test]
    fn json_roundtrip() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn missing_gamma_is_named() {
        let text = MINIMAL.replace("gamma = 0.0\n", "");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("gamma"), "{err}");
    }

    #[test]
    fn all_bad_fields_listed() {
        let text = MINIMAL.replace("gamma = 0.0", "gamma = 1.0").replace("t_final = 0.5", "t_final = -1.0");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("gamma") && err.contains("t_final"), "{err}");
    }
}
