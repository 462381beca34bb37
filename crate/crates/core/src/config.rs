//! JSON run configuration and grid syntax.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{CurveGerm, CurveSpec};
use crate::model::{decompose_density, folded_angle, tilted_weight, MixtureModel, PolarModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Radial profile `g_r` of a density `g_r(n(x, y)) · w(T(x, y))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `exp(−r²/2)`.
    Gaussian,
    /// `exp(−r^p/p)`.
    ExpPower { p: f64 },
}

impl ProfileSpec {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            ProfileSpec::Gaussian => (-0.5 * r * r).exp(),
            ProfileSpec::ExpPower { p } => (-r.powf(p) / p).exp(),
        }
    }
}

/// Angular weight `w(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Uniform,
    /// `1 + (θ² − (π/4)²)²` in the folded angle `θ`.
    Tilted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub profile: ProfileSpec,
    pub curve: CurveSpec,
    #[serde(default = "uniform_weight")]
    pub weight: WeightSpec,
}

fn uniform_weight() -> WeightSpec {
    WeightSpec::Uniform
}

impl DensitySpec {
    pub fn decompose(&self) -> Result<PolarModel> {
        let curve = CurveGerm::from_spec(self.curve)?;
        let profile = self.profile.clone();
        match self.weight {
            WeightSpec::Uniform => decompose_density(|r| profile.eval(r), &curve, |_| 1.0),
            WeightSpec::Tilted => {
                decompose_density(|r| profile.eval(r), &curve, |t| tilted_weight(folded_angle(&curve, t)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum ModelSpec {
    Polar(PolarModel),
    Mixture(MixtureModel),
    Density(DensitySpec),
}

impl ModelSpec {
    /// The polar model, decomposing a density spec if needed.
    pub fn polar(&self) -> Result<PolarModel> {
        match self {
            ModelSpec::Polar(m) => Ok(m.clone()),
            ModelSpec::Density(d) => d.decompose(),
            ModelSpec::Mixture(_) => Err(Error::Config(
                "this command needs a polar or density model, not a mixture".into(),
            )),
        }
    }
}

/// Command parameters that may be given in the file instead of on the
/// command line; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default)]
    pub params: Params,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Hex SHA-256 of the compact JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `lo:hi:step` (inclusive, points generated by index) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Config(format!("bad grid '{s}': {why}"));
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.len() {
        1 => s.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        3 => {
            let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || !(hi >= lo) {
                return Err(bad("need lo <= hi and step > 0"));
            }
            let span = (hi - lo) / step;
            let n = (span + 1e-9 * span.max(1.0)).floor();
            if n > 1e7 {
                return Err(bad("more than 10^7 points"));
            }
            (0..=n as usize).map(|i| lo + i as f64 * step).collect()
        }
        _ => return Err(bad("expected lo:hi:step or a comma list")),
    };
    if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    Ok(out)
}
