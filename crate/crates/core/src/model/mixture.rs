use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_panels, Panel, QuadOptions};
use crate::special::{normal_cdf, normal_quantile, normal_sf};

/// `Y = B(ρX + √(1−ρ²)Z) + (1−B)(τX + √(1−τ²)Z)` with `P(B = 1) = p`,
/// optionally restricted to the cone `c1·x ≤ y ≤ c2·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRaw", into = "MixtureRaw")]
pub struct MixtureModel {
    p: f64,
    rho: f64,
    tau_mix: f64,
    cone: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureRaw {
    p: f64,
    rho: f64,
    tau_mix: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cone: Option<(f64, f64)>,
}

impl From<MixtureModel> for MixtureRaw {
    fn from(m: MixtureModel) -> Self {
        MixtureRaw {
            p: m.p,
            rho: m.rho,
            tau_mix: m.tau_mix,
            cone: m.cone,
        }
    }
}

impl TryFrom<MixtureRaw> for MixtureModel {
    type Error = Error;

    fn try_from(r: MixtureRaw) -> Result<Self> {
        MixtureModel::new(r.p, r.rho, r.tau_mix, r.cone)
    }
}

/// `P(a < Z ≤ b)` without cancellation in either tail.
fn normal_interval(a: f64, b: f64) -> f64 {
    if !(b > a) {
        0.0
    } else if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_cdf(b) - normal_cdf(a)
    } else {
        1.0 - normal_cdf(a) - normal_sf(b)
    }
}

impl MixtureModel {
    pub fn new(p: f64, rho: f64, tau_mix: f64, cone: Option<(f64, f64)>) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::construction(format!(
                "mixture weight must lie in (0, 1), got {p}"
            )));
        }
        if !(rho.abs() <= 1.0 && tau_mix.abs() <= 1.0) {
            return Err(Error::construction("correlations must lie in [-1, 1]"));
        }
        if rho == tau_mix {
            return Err(Error::construction("the two correlations must differ"));
        }
        if let Some((c1, c2)) = cone {
            if !(c1 < c2) {
                return Err(Error::construction("cone needs c1 < c2"));
            }
            if !(c1..=c2).contains(&rho) || (c1..=c2).contains(&tau_mix) {
                return Err(Error::construction("cone must contain rho and exclude tau_mix"));
            }
        }
        Ok(MixtureModel { p, rho, tau_mix, cone })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn tau_mix(&self) -> f64 {
        self.tau_mix
    }
    pub fn cone(&self) -> Option<(f64, f64)> {
        self.cone
    }

    /// `P(X > x, Y ≤ w, (X,Y) ∈ cone) / P(X > x)` for one Gaussian component.
    fn component(&self, r: f64, x: f64, w: f64) -> Result<f64> {
        let sd = (1.0 - r * r).max(0.0).sqrt();
        let (c1, c2) = self.cone.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        // Y | X = s lies in (lo, hi]
        let slice = |s: f64| -> f64 {
            let lo = if c1.is_finite() { c1 * s } else { f64::NEG_INFINITY };
            let hi = if c2.is_finite() { (c2 * s).min(w) } else { w };
            if sd == 0.0 {
                let y = r * s;
                return if y > lo && y <= hi { 1.0 } else { 0.0 };
            }
            normal_interval((lo - r * s) / sd, (hi - r * s) / sd)
        };
        // s = x + e, with φ(x + e)/φ(x) = exp(−xe − e²/2); the X tail is
        // renormalized by the same integral with the slice set to 1
        let density = |e: f64| (-x * e - 0.5 * e * e).exp();
        let scale = 1.0 / x.max(1.0);
        let mut breaks = vec![0.0];
        let mut d = scale;
        while d < 64.0 * scale.max(1.0) {
            breaks.push(d);
            d *= 2.0;
        }
        // kinks where a slice bound switches
        for k in [w / c1, w / c2, w / r] {
            if k.is_finite() && k > x {
                breaks.push(k - x);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut panels: Vec<Panel> = breaks.windows(2).map(|p| Panel::Finite { a: p[0], b: p[1] }).collect();
        panels.push(Panel::UpperInfinite {
            a: *breaks.last().unwrap(),
        });
        let opts = QuadOptions::with_rel(1e-12);
        let num = integrate_panels(|e| density(e) * slice(x + e), &panels, opts)?.value;
        let den = integrate_panels(density, &panels, opts)?.value;
        Ok(num / den)
    }

    /// `P_C(Y ≤ ρx + √(1−ρ²) z | X > x)`, conditioning also on the cone when present.
    pub fn conditional_cdf(&self, x: f64, z: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("mixture threshold must be positive, got {x}")));
        }
        if z.is_nan() {
            return Err(Error::domain("z is NaN"));
        }
        let w = self.rho * x + (1.0 - self.rho * self.rho).sqrt() * z;
        let num = self.p * self.component(self.rho, x, w)? + (1.0 - self.p) * self.component(self.tau_mix, x, w)?;
        let den = if self.cone.is_some() {
            self.p * self.component(self.rho, x, f64::INFINITY)?
                + (1.0 - self.p) * self.component(self.tau_mix, x, f64::INFINITY)?
        } else {
            1.0
        };
        if !(den > 0.0) {
            return Err(Error::domain("cone carries no mass beyond the threshold"));
        }
        Ok((num / den).clamp(0.0, 1.0))
    }

    /// `n` draws of `(X, Y)`, by rejection into the cone when one is set.
    pub fn sample_joint<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
        let gauss = |rng: &mut R| loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                return normal_quantile(u);
            }
        };
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x = gauss(rng);
            let z = gauss(rng);
            let r = if rng.random::<f64>() < self.p {
                self.rho
            } else {
                self.tau_mix
            };
            let y = r * x + (1.0 - r * r).max(0.0).sqrt() * z;
            match self.cone {
                Some((c1, c2)) if !(c1 * x <= y && y <= c2 * x) => continue,
                _ => out.push((x, y)),
            }
        }
        out
    }

    /// Limit of [`MixtureModel::conditional_cdf`] as `x → ∞`.
    pub fn limit_cdf(&self, z: f64) -> f64 {
        let phi = normal_cdf(z);
        if self.cone.is_some() {
            phi
        } else {
            self.p * phi + (1.0 - self.p) * if self.tau_mix < self.rho { 1.0 } else { 0.0 }
        }
    }
}
