//! The polar model `(X, Y) = R (u(T), v(T))` with `R ⟂ T`.

mod decompose;
mod mixture;
mod oracle;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AngularLaw, CurveGerm};
use crate::radial::RadialLaw;

pub use decompose::{decompose_density, decompose_radial_profile, folded_angle, tilted_weight};
pub use mixture::MixtureModel;
pub use sampling::WeightedSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolarModelRaw")]
pub struct PolarModel {
    pub radial: RadialLaw,
    pub angular: AngularLaw,
    pub curve: CurveGerm,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolarModelRaw {
    radial: RadialLaw,
    angular: AngularLaw,
    curve: CurveGerm,
}

impl TryFrom<PolarModelRaw> for PolarModel {
    type Error = Error;

    fn try_from(r: PolarModelRaw) -> Result<Self> {
        PolarModel::new(r.radial, r.angular, r.curve)
    }
}

impl PolarModel {
    pub fn new(radial: RadialLaw, angular: AngularLaw, curve: CurveGerm) -> Result<Self> {
        radial.validate()?;
        if let Some(t0) = angular.t0() {
            if (t0 - curve.t0()).abs() > 1e-12 {
                return Err(Error::construction(format!(
                    "angular law is anchored at {t0} but the curve peaks at {}",
                    curve.t0()
                )));
            }
        }
        Ok(PolarModel { radial, angular, curve })
    }

    /// Side coefficients `(g_−, g_+)` of the angular density at `t0`.
    pub fn angular_sides(&self) -> (f64, f64) {
        self.angular.side_coefficients(self.curve.t0())
    }

    /// `g(t0 + s)`, computed from the offset so it stays exact next to `t0`.
    pub fn g_at_offset(&self, s: f64) -> f64 {
        let t0 = self.curve.t0();
        if s < -t0 || s > 1.0 - t0 {
            return 0.0;
        }
        self.angular.germ_profile(t0, s)
    }
}
