use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Density of the angle `T` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngularLaw {
    Uniform,
    /// `g(t0 ± s) = g_± s^τ` for `s ≤ w`, constant beyond, with
    /// `w = min(t0, 1 − t0)/2` and mass `g_minus_frac` left of `t0`.
    Power(PowerAngular),
    /// Piecewise-linear density through the given knots, renormalized.
    Tabulated(TabulatedAngular),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PowerRaw", into = "PowerRaw")]
pub struct PowerAngular {
    t0: f64,
    tau: f64,
    g_minus_frac: f64,
    w: f64,
    a_minus: f64,
    a_plus: f64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerRaw {
    t0: f64,
    tau: f64,
    g_minus_frac: f64,
}

impl From<PowerAngular> for PowerRaw {
    fn from(p: PowerAngular) -> Self {
        PowerRaw {
            t0: p.t0,
            tau: p.tau,
            g_minus_frac: p.g_minus_frac,
        }
    }
}

impl TryFrom<PowerRaw> for PowerAngular {
    type Error = Error;

    fn try_from(r: PowerRaw) -> Result<Self> {
        PowerAngular::new(r.t0, r.tau, r.g_minus_frac)
    }
}

impl PowerAngular {
    pub fn new(t0: f64, tau: f64, g_minus_frac: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0 < 1.0) {
            return Err(Error::construction(format!("t0 must lie in (0, 1), got {t0}")));
        }
        if !(tau > -1.0 && tau.is_finite()) {
            return Err(Error::construction(format!("angular index needs tau > -1, got {tau}")));
        }
        if !(0.0..=1.0).contains(&g_minus_frac) {
            return Err(Error::construction("g_minus_frac must lie in [0, 1]"));
        }
        let w = 0.5 * t0.min(1.0 - t0);
        let core = w.powf(tau + 1.0) / (tau + 1.0);
        let left = core + w.powf(tau) * (t0 - w);
        let right = core + w.powf(tau) * (1.0 - t0 - w);
        Ok(PowerAngular {
            t0,
            tau,
            g_minus_frac,
            w,
            a_minus: g_minus_frac / left,
            a_plus: (1.0 - g_minus_frac) / right,
        })
    }

    // mass of s^τ (capped at w^τ beyond w) over [0, d]
    fn unit_mass(&self, d: f64) -> f64 {
        let core = self.w.powf(self.tau + 1.0) / (self.tau + 1.0);
        if d <= self.w {
            d.powf(self.tau + 1.0) / (self.tau + 1.0)
        } else {
            core + self.w.powf(self.tau) * (d - self.w)
        }
    }

    fn unit_mass_inverse(&self, m: f64) -> f64 {
        let core = self.w.powf(self.tau + 1.0) / (self.tau + 1.0);
        if m <= core {
            ((self.tau + 1.0) * m).powf(1.0 / (self.tau + 1.0))
        } else {
            self.w + (m - core) / self.w.powf(self.tau)
        }
    }

    fn profile(&self, s: f64) -> f64 {
        let a = if s < 0.0 { self.a_minus } else { self.a_plus };
        a * s.abs().min(self.w).powf(self.tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRaw")]
pub struct TabulatedAngular {
    t0: f64,
    knots: Vec<f64>,
    density: Vec<f64>,
    #[serde(skip_serializing)]
    cumulative: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedRaw {
    t0: f64,
    knots: Vec<f64>,
    density: Vec<f64>,
}

impl TryFrom<TabulatedRaw> for TabulatedAngular {
    type Error = Error;

    fn try_from(r: TabulatedRaw) -> Result<Self> {
        TabulatedAngular::new(r.t0, r.knots, r.density)
    }
}

impl TabulatedAngular {
    /// Knots must run from 0 to 1; densities are rescaled to unit mass.
    pub fn new(t0: f64, knots: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 2 || density.len() != n {
            return Err(Error::construction("tabulated density needs matching knots and values"));
        }
        if knots[0] != 0.0 || knots[n - 1] != 1.0 || knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::construction("knots must increase from 0 to 1"));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::construction("tabulated density must be finite and nonnegative"));
        }
        if !(t0 > 0.0 && t0 < 1.0) {
            return Err(Error::construction(format!("t0 must lie in (0, 1), got {t0}")));
        }
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 1..n {
            acc += 0.5 * (density[i] + density[i - 1]) * (knots[i] - knots[i - 1]);
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::construction("tabulated density has zero mass"));
        }
        let density = density.into_iter().map(|d| d / acc).collect();
        for c in cumulative.iter_mut() {
            *c /= acc;
        }
        Ok(TabulatedAngular {
            t0,
            knots,
            density,
            cumulative,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.density
    }

    fn cell(&self, t: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= t);
        i.clamp(1, self.knots.len() - 1) - 1
    }

    fn density(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let i = self.cell(t);
        let s = (t - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.density[i] + s * (self.density[i + 1] - self.density[i])
    }

    fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let i = self.cell(t);
        let h = self.knots[i + 1] - self.knots[i];
        let x = t - self.knots[i];
        let (d0, d1) = (self.density[i], self.density[i + 1]);
        (self.cumulative[i] + d0 * x + 0.5 * (d1 - d0) * x * x / h).min(1.0)
    }

    fn quantile(&self, q: f64) -> f64 {
        let j = self.cumulative.partition_point(|&c| c < q);
        if j == 0 {
            return 0.0;
        }
        if j >= self.knots.len() {
            return 1.0;
        }
        let i = j - 1;
        let h = self.knots[i + 1] - self.knots[i];
        let (d0, d1) = (self.density[i], self.density[i + 1]);
        let r = q - self.cumulative[i];
        let a = 0.5 * (d1 - d0) / h;
        // a x² + d0 x = r, in the cancellation-free root form
        let disc = (d0 * d0 + 4.0 * a * r).max(0.0);
        let x = if d0 + disc.sqrt() > 0.0 {
            2.0 * r / (d0 + disc.sqrt())
        } else {
            h
        };
        (self.knots[i] + x.min(h)).clamp(0.0, 1.0)
    }
}

impl AngularLaw {
    pub fn uniform() -> Self {
        AngularLaw::Uniform
    }

    pub fn power(t0: f64, tau: f64, g_minus_frac: f64) -> Result<Self> {
        Ok(AngularLaw::Power(PowerAngular::new(t0, tau, g_minus_frac)?))
    }

    pub fn tabulated(t0: f64, knots: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        Ok(AngularLaw::Tabulated(TabulatedAngular::new(t0, knots, density)?))
    }

    /// The point the law is anchored at, if it singles one out.
    pub fn t0(&self) -> Option<f64> {
        match self {
            AngularLaw::Uniform => None,
            AngularLaw::Power(p) => Some(p.t0),
            AngularLaw::Tabulated(t) => Some(t.t0),
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            AngularLaw::Power(p) => p.tau,
            _ => 0.0,
        }
    }

    /// Side coefficients `(g_−, g_+)` of `g(t0 ± s) ≈ g_± s^τ` about `t0`.
    pub fn side_coefficients(&self, t0: f64) -> (f64, f64) {
        match self {
            AngularLaw::Uniform => (1.0, 1.0),
            AngularLaw::Power(p) => (p.a_minus, p.a_plus),
            AngularLaw::Tabulated(tab) => {
                let g = tab.density(t0);
                (g, g)
            }
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match self {
            AngularLaw::Uniform => 1.0,
            AngularLaw::Power(p) => p.profile(t - p.t0),
            AngularLaw::Tabulated(tab) => tab.density(t),
        }
    }

    /// `s ↦ g(t0 + s)` on one side, extended by a constant past `[0, 1]`.
    pub fn germ_profile(&self, t0: f64, s: f64) -> f64 {
        match self {
            AngularLaw::Uniform => 1.0,
            AngularLaw::Power(p) => p.profile(s),
            AngularLaw::Tabulated(tab) => tab.density(t0 + s),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match self {
            AngularLaw::Uniform => t,
            AngularLaw::Power(p) => {
                if t <= p.t0 {
                    (p.g_minus_frac - p.a_minus * p.unit_mass(p.t0 - t)).max(0.0)
                } else {
                    (p.g_minus_frac + p.a_plus * p.unit_mass(t - p.t0)).min(1.0)
                }
            }
            AngularLaw::Tabulated(tab) => tab.cdf(t),
        }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::domain(format!("quantile level {q} outside [0, 1]")));
        }
        Ok(match self {
            AngularLaw::Uniform => q,
            AngularLaw::Power(p) => {
                let t = if q <= p.g_minus_frac {
                    p.t0 - p.unit_mass_inverse((p.g_minus_frac - q) / p.a_minus)
                } else {
                    p.t0 + p.unit_mass_inverse((q - p.g_minus_frac) / p.a_plus)
                };
                t.clamp(0.0, 1.0)
            }
            AngularLaw::Tabulated(tab) => tab.quantile(q),
        })
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let q: f64 = rng.random();
        self.quantile(q).expect("uniform draw lies in [0, 1)")
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    /// Points where the density kinks, for quadrature splitting.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            AngularLaw::Uniform => vec![],
            AngularLaw::Power(p) => vec![p.t0 - p.w, p.t0, p.t0 + p.w],
            AngularLaw::Tabulated(tab) => vec![tab.t0],
        }
    }

    /// Power of the density singularity at `t0`, if it is one.
    pub fn singular_power(&self) -> Option<(f64, f64)> {
        match self {
            AngularLaw::Power(p) if p.tau < 0.0 => Some((p.t0, p.tau)),
            _ => None,
        }
    }
}
