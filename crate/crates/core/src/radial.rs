//! Radial laws in the Gumbel max-domain of attraction.
//!
//! Every law is handled through its log-survival function `ln P(R > x)`, so
//! tails far below `f64::MIN_POSITIVE` remain usable by the conditional
//! sampler and by ratio computations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

/// Auxiliary function of a von Mises law, `ψ(x) = coef · x^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiSpec {
    Power {
        coef: f64,
        exponent: f64,
    },
    /// The grid is the only description (e.g. built from a density profile).
    Tabulated,
}

impl PsiSpec {
    pub fn eval(&self, x: f64) -> Option<f64> {
        match *self {
            PsiSpec::Power { coef, exponent } => Some(coef * x.powf(exponent)),
            PsiSpec::Tabulated => None,
        }
    }
}

/// Cached `(x, Λ(x), 1/ψ(x))` with `Λ(x) = ∫_{x0}^x ds/ψ(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VonMisesGrid {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub inv_psi: Vec<f64>,
}

impl VonMisesGrid {
    fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if n < 2 || self.lambda.len() != n || self.inv_psi.len() != n {
            return Err(Error::construction("von Mises grid needs at least two aligned rows"));
        }
        for i in 1..n {
            if !(self.x[i] > self.x[i - 1]) || self.lambda[i] < self.lambda[i - 1] {
                return Err(Error::construction("von Mises grid must be increasing"));
            }
        }
        if self.inv_psi.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::construction("von Mises grid holds invalid values"));
        }
        Ok(())
    }

    fn locate(&self, x: f64) -> usize {
        let i = self.x.partition_point(|&v| v <= x);
        i.clamp(1, self.x.len() - 1) - 1
    }

    /// Monotone cubic Hermite interpolant of Λ using the stored slopes.
    fn lambda_at(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x >= self.x[n - 1] {
            return self.lambda[n - 1] + (x - self.x[n - 1]) * self.inv_psi[n - 1];
        }
        let i = self.locate(x);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let (y0, y1) = (self.lambda[i], self.lambda[i + 1]);
        let h = x1 - x0;
        let (m0, m1) = self.slopes(i);
        let s = (x - x0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
    }

    fn slopes(&self, i: usize) -> (f64, f64) {
        let h = self.x[i + 1] - self.x[i];
        let secant = (self.lambda[i + 1] - self.lambda[i]) / h;
        let (mut m0, mut m1) = (self.inv_psi[i], self.inv_psi[i + 1]);
        if secant <= 0.0 {
            return (0.0, 0.0);
        }
        // Fritsch–Carlson limiter
        let a = m0 / secant;
        let b = m1 / secant;
        let r = a * a + b * b;
        if r > 9.0 {
            let k = 3.0 / r.sqrt();
            m0 = k * a * secant;
            m1 = k * b * secant;
        }
        (m0, m1)
    }

    fn inv_psi_at(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x >= self.x[n - 1] {
            return self.inv_psi[n - 1];
        }
        if x <= self.x[0] {
            return self.inv_psi[0];
        }
        let i = self.locate(x);
        let s = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.inv_psi[i] + s * (self.inv_psi[i + 1] - self.inv_psi[i])
    }

    /// Smallest `x` with `Λ(x) = target`, for `target ≥ Λ(x_0)`.
    fn invert(&self, target: f64) -> f64 {
        let n = self.x.len();
        if target >= self.lambda[n - 1] {
            let slope = self.inv_psi[n - 1];
            if slope <= 0.0 {
                return f64::INFINITY;
            }
            return self.x[n - 1] + (target - self.lambda[n - 1]) / slope;
        }
        let j = self.lambda.partition_point(|&v| v < target);
        if j == 0 {
            return self.x[0];
        }
        let (mut lo, mut hi) = (self.x[j - 1], self.x[j]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.lambda_at(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.abs() {
                break;
            }
        }
        hi
    }
}

/// A von Mises law `S(x) = min(1, scale · exp(−∫_{x0}^x ds/ψ(s)))`, `S = 1` below `x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VonMisesRaw")]
pub struct VonMises {
    pub psi: PsiSpec,
    pub x0: f64,
    pub scale: f64,
    pub grid: VonMisesGrid,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VonMisesRaw {
    psi: PsiSpec,
    x0: f64,
    scale: f64,
    #[serde(default)]
    grid: Option<VonMisesGrid>,
}

impl TryFrom<VonMisesRaw> for VonMises {
    type Error = Error;

    fn try_from(raw: VonMisesRaw) -> Result<Self> {
        match raw.grid {
            Some(grid) => {
                grid.validate()?;
                if !(raw.scale > 0.0) || grid.x[0] != raw.x0 {
                    return Err(Error::construction("von Mises grid does not start at x0"));
                }
                Ok(VonMises {
                    psi: raw.psi,
                    x0: raw.x0,
                    scale: raw.scale,
                    grid,
                })
            }
            None => match raw.psi {
                PsiSpec::Power { coef, exponent } => match von_mises_power(coef, exponent, raw.x0, raw.scale)? {
                    RadialLaw::VonMises(vm) => Ok(vm),
                    _ => unreachable!(),
                },
                PsiSpec::Tabulated => Err(Error::construction("tabulated von Mises law needs a grid")),
            },
        }
    }
}

const LAMBDA_SPAN: f64 = 2000.0;
const GRID_X_LIMIT: f64 = 1e15;

/// Builds a von Mises law by tabulating `Λ(x) = ∫_{x0}^x ds/ψ(s)`.
///
/// The grid runs until `S` has fallen by `e^{-2000}`; failing to get there
/// before `x = 1e15` is taken as divergence of `∫ 1/ψ` failing.
pub fn build_von_mises<F: Fn(f64) -> f64>(psi: F, x0: f64, scale: f64) -> Result<RadialLaw> {
    if !x0.is_finite() || x0 < 0.0 {
        return Err(Error::construction("x0 must be finite and nonnegative"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::construction("scale must be positive"));
    }
    let inv = |x: f64| -> Result<f64> {
        let p = psi(x);
        if p.is_nan() || p <= 0.0 {
            return Err(Error::construction(format!("psi({x}) = {p} is not positive")));
        }
        Ok(1.0 / p)
    };
    let target = scale.ln().max(0.0) + LAMBDA_SPAN;
    let opts = QuadOptions::with_rel(1e-13);
    let mut xs = vec![x0];
    let mut lam = vec![0.0];
    let mut ip = vec![inv(x0)?];
    let mut x = x0;
    let mut l = 0.0;
    while l < target {
        let p = 1.0 / ip[ip.len() - 1];
        let width = 0.1 * x.abs().max(1.0);
        let h = (0.05 * p).min(width).max(1e-9 * x.abs().max(1.0));
        let next = x + h;
        if next > GRID_X_LIMIT {
            return Err(Error::construction(
                "integral of 1/psi does not diverge: survival stays bounded away from 0",
            ));
        }
        // panel integral; 1/psi is checked for positivity at every node
        let bad = std::cell::Cell::new(None);
        let piece = quad::integrate(
            |s| {
                let p = psi(s);
                if p.is_nan() || p <= 0.0 {
                    bad.set(Some(s));
                    0.0
                } else {
                    1.0 / p
                }
            },
            x,
            next,
            opts,
        )?;
        if let Some(s) = bad.get() {
            inv(s)?;
        }
        x = next;
        l += piece.value;
        xs.push(x);
        lam.push(l);
        ip.push(inv(x)?);
    }
    Ok(RadialLaw::VonMises(VonMises {
        psi: PsiSpec::Tabulated,
        x0,
        scale,
        grid: VonMisesGrid {
            x: xs,
            lambda: lam,
            inv_psi: ip,
        },
    }))
}

/// Builds a von Mises law from its `ψ(x) = coef · x^exponent` description.
pub fn von_mises_power(coef: f64, exponent: f64, x0: f64, scale: f64) -> Result<RadialLaw> {
    if !(coef > 0.0) || !exponent.is_finite() {
        return Err(Error::construction("psi coefficient must be positive"));
    }
    let mut law = build_von_mises(|x| coef * x.powf(exponent), x0, scale)?;
    if let RadialLaw::VonMises(vm) = &mut law {
        vm.psi = PsiSpec::Power { coef, exponent };
    }
    Ok(law)
}

/// Radial law catalog. Serialized as `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum RadialLaw {
    Exponential {
        rate: f64,
    },
    /// Unit-scale Weibull, `S(x) = exp(−x^shape)`.
    Weibull {
        shape: f64,
    },
    /// `S(x) = exp(−x²/2)`, the radius of a standard bivariate normal.
    Rayleigh {},
    VonMises(VonMises),
}

/// Largest `C` found for the bound `S(x+ψ(x)t)/S(x) ≤ C(1+t)^{-p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRatioBound {
    pub c: f64,
    pub t_at_max: f64,
}

impl RadialLaw {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::construction("exponential rate must be positive"));
        }
        Ok(RadialLaw::Exponential { rate })
    }

    pub fn weibull(shape: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::construction("Weibull shape must be positive"));
        }
        Ok(RadialLaw::Weibull { shape })
    }

    pub fn rayleigh() -> Self {
        RadialLaw::Rayleigh {}
    }

    /// Re-checks parameters, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            RadialLaw::Exponential { rate } => Self::exponential(*rate).map(|_| ()),
            RadialLaw::Weibull { shape } => Self::weibull(*shape).map(|_| ()),
            RadialLaw::Rayleigh {} => Ok(()),
            RadialLaw::VonMises(vm) => vm.grid.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RadialLaw::Exponential { .. } => "exponential",
            RadialLaw::Weibull { .. } => "weibull",
            RadialLaw::Rayleigh {} => "rayleigh",
            RadialLaw::VonMises(_) => "von_mises",
        }
    }

    /// `ln P(R > x)` for any real `x` (negative `x` gives 0).
    pub fn log_survival(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            RadialLaw::Exponential { rate } => -rate * x,
            RadialLaw::Weibull { shape } => -x.powf(*shape),
            RadialLaw::Rayleigh {} => -0.5 * x * x,
            RadialLaw::VonMises(vm) => {
                if x < vm.x0 {
                    0.0
                } else {
                    (vm.scale.ln() - vm.grid.lambda_at(x)).min(0.0)
                }
            }
        }
    }

    pub fn survival(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("survival needs x >= 0, got {x}")));
        }
        Ok(self.log_survival(x).exp())
    }

    /// Density of `R`, zero where the survival function is flat.
    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("density needs x >= 0, got {x}")));
        }
        let d = match self {
            RadialLaw::Exponential { rate } => rate * (-rate * x).exp(),
            RadialLaw::Weibull { shape } => {
                if x == 0.0 {
                    match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0,
                        _ => 0.0,
                    }
                } else {
                    shape * x.powf(shape - 1.0) * (-x.powf(*shape)).exp()
                }
            }
            RadialLaw::Rayleigh {} => x * (-0.5 * x * x).exp(),
            RadialLaw::VonMises(vm) => {
                if x < vm.x0 || vm.scale.ln() - vm.grid.lambda_at(x) > 0.0 {
                    0.0
                } else {
                    self.log_survival(x).exp() / self.psi_unchecked(x)
                }
            }
        };
        Ok(d)
    }

    fn psi_unchecked(&self, x: f64) -> f64 {
        match self {
            RadialLaw::Exponential { rate } => 1.0 / rate,
            RadialLaw::Weibull { shape } => x.powf(1.0 - shape) / shape,
            RadialLaw::Rayleigh {} => 1.0 / x,
            RadialLaw::VonMises(vm) => match vm.psi.eval(x) {
                Some(p) => p,
                None => 1.0 / vm.grid.inv_psi_at(x),
            },
        }
    }

    /// Canonical auxiliary function `ψ = S/h`.
    pub fn psi(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("psi needs x > 0, got {x}")));
        }
        Ok(self.psi_unchecked(x))
    }

    /// Smallest `x` with `ln S(x) ≤ log_s`, for `log_s ≤ 0`.
    pub fn quantile_from_log_survival(&self, log_s: f64) -> f64 {
        let l = -log_s;
        if !(l > 0.0) {
            return match self {
                RadialLaw::VonMises(vm) => vm.x0,
                _ => 0.0,
            };
        }
        match self {
            RadialLaw::Exponential { rate } => l / rate,
            RadialLaw::Weibull { shape } => l.powf(1.0 / shape),
            RadialLaw::Rayleigh {} => (2.0 * l).sqrt(),
            RadialLaw::VonMises(vm) => {
                let target = vm.scale.ln() + l;
                if target <= 0.0 {
                    vm.x0
                } else {
                    vm.grid.invert(target)
                }
            }
        }
    }

    /// `b(t)`, the solution of `S(b) = 1/t`.
    pub fn quantile_b(&self, t: f64) -> Result<f64> {
        if !(t > 1.0) {
            return Err(Error::domain(format!("quantile_b needs t > 1, got {t}")));
        }
        Ok(self.quantile_from_log_survival(-t.ln()))
    }

    /// Inverse-transform draw.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile_from_log_survival((-u).ln_1p())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    /// Draw from `R | R > s`.
    pub fn sample_above<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let r = self.quantile_from_log_survival(self.log_survival(s) + (-u).ln_1p());
        if r > s {
            r
        } else {
            s.next_up()
        }
    }

    /// `S(x + ψ(x)t) / S(x)`.
    pub fn tail_ratio(&self, x: f64, t: f64) -> Result<f64> {
        let p = self.psi(x)?;
        Ok((self.log_survival(x + p * t) - self.log_survival(x)).exp())
    }

    /// `sup_t |S(x+ψ(x)t)/S(x) − e^{−t}|` over the grid.
    pub fn gamma_variation_gap(&self, x: f64, t_grid: &[f64]) -> Result<f64> {
        let mut gap: f64 = 0.0;
        for &t in t_grid {
            gap = gap.max((self.tail_ratio(x, t)? - (-t).exp()).abs());
        }
        Ok(gap)
    }

    pub fn tail_ratio_bound(&self, p: f64, x: f64, t_grid: &[f64]) -> Result<TailRatioBound> {
        if !(p > 0.0) {
            return Err(Error::domain("tail_ratio_bound needs p > 0"));
        }
        let mut best = TailRatioBound { c: 0.0, t_at_max: 0.0 };
        for &t in t_grid {
            if !(t >= 0.0) {
                return Err(Error::domain("tail_ratio_bound needs t >= 0"));
            }
            let c = self.tail_ratio(x, t)? * (1.0 + t).powf(p);
            if c > best.c {
                best = TailRatioBound { c, t_at_max: t };
            }
        }
        Ok(best)
    }
}
