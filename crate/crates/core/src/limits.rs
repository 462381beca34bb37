//! Limit laws `H_{η,ζ}`, normalizing functions and tail asymptotics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PolarModel;
use crate::radial::RadialLaw;
use crate::special::{gamma, gamma_p, gamma_pq, inverse_gamma_p, inverse_gamma_q, ln_gamma, normal_cdf};

/// Law with density `∝ e^{−|s|^η/η} |s|^{ζ−1}`, weighted `w_−`, `w_+` on the
/// two half-lines, the left half stretched by `scale_minus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LimitLawRaw", into = "LimitLawRaw")]
pub struct LimitLaw {
    pub eta: f64,
    pub zeta: f64,
    pub weight_minus: f64,
    pub weight_plus: f64,
    pub scale_minus: f64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitLawRaw {
    eta: f64,
    zeta: f64,
    #[serde(default = "half")]
    weight_minus: f64,
    #[serde(default = "half")]
    weight_plus: f64,
    #[serde(default = "one")]
    scale_minus: f64,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

impl From<LimitLaw> for LimitLawRaw {
    fn from(l: LimitLaw) -> Self {
        LimitLawRaw {
            eta: l.eta,
            zeta: l.zeta,
            weight_minus: l.weight_minus,
            weight_plus: l.weight_plus,
            scale_minus: l.scale_minus,
        }
    }
}

impl TryFrom<LimitLawRaw> for LimitLaw {
    type Error = Error;

    fn try_from(r: LimitLawRaw) -> Result<Self> {
        LimitLaw::asymmetric(r.eta, r.zeta, r.weight_minus, r.weight_plus, r.scale_minus)
    }
}

/// `∫_0^∞ e^{−s^η/η} s^{ζ−1} ds = η^{ζ/η−1} Γ(ζ/η)`.
pub fn half_line_mass(eta: f64, zeta: f64) -> f64 {
    ((zeta / eta - 1.0) * eta.ln() + ln_gamma(zeta / eta)).exp()
}

impl LimitLaw {
    pub fn new(eta: f64, zeta: f64) -> Result<Self> {
        Self::asymmetric(eta, zeta, 0.5, 0.5, 1.0)
    }

    pub fn asymmetric(eta: f64, zeta: f64, weight_minus: f64, weight_plus: f64, scale_minus: f64) -> Result<Self> {
        if !(eta > 1.0 && eta.is_finite()) {
            return Err(Error::construction(format!("limit law needs eta > 1, got {eta}")));
        }
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(Error::construction(format!("limit law needs zeta > 0, got {zeta}")));
        }
        if !(weight_minus >= 0.0 && weight_plus >= 0.0) {
            return Err(Error::construction("tail weights must be nonnegative"));
        }
        let total = weight_minus + weight_plus;
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::construction("tail weights must have positive finite sum"));
        }
        if !(scale_minus > 0.0 && scale_minus.is_finite()) {
            return Err(Error::construction("left scale must be positive"));
        }
        Ok(LimitLaw {
            eta,
            zeta,
            weight_minus: weight_minus / total,
            weight_plus: weight_plus / total,
            scale_minus,
        })
    }

    fn shape(&self) -> f64 {
        self.zeta / self.eta
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y.is_nan() {
            return f64::NAN;
        }
        let a = self.shape();
        if y >= 0.0 {
            if y == f64::INFINITY {
                return 1.0;
            }
            self.weight_minus + self.weight_plus * gamma_p(a, y.powf(self.eta) / self.eta)
        } else {
            let z = (-y / self.scale_minus).powf(self.eta) / self.eta;
            self.weight_minus * gamma_pq(a, z).1
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let n = half_line_mass(self.eta, self.zeta);
        let (w, s) = if y >= 0.0 {
            (self.weight_plus, y)
        } else {
            (self.weight_minus / self.scale_minus, -y / self.scale_minus)
        };
        if s == 0.0 {
            return if self.zeta < 1.0 {
                f64::INFINITY
            } else if self.zeta == 1.0 {
                w / n
            } else {
                0.0
            };
        }
        w * (-s.powf(self.eta) / self.eta + (self.zeta - 1.0) * s.ln()).exp() / n
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        let a = self.shape();
        let back = |z: f64| (self.eta * z).powf(1.0 / self.eta);
        if q <= self.weight_minus {
            let z = inverse_gamma_q(a, q / self.weight_minus);
            return Ok(-self.scale_minus * back(z));
        }
        let p = (q - self.weight_minus) / self.weight_plus;
        let z = if p > 0.5 {
            inverse_gamma_q(a, (1.0 - q) / self.weight_plus)
        } else {
            inverse_gamma_p(a, p)
        };
        Ok(back(z))
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let q: f64 = rng.random();
            if q > 0.0 {
                out.push(self.quantile(q).expect("level lies in (0, 1)"));
            }
        }
        out
    }
}

/// Threshold `t` with `m(t) = ρt`, `ψ(t)` and `a(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalFrame {
    pub t: f64,
    pub m_t: f64,
    pub psi_t: f64,
    pub a_t: f64,
}

/// `a(t) = η^{−1/η} t h(ψ(t)/t)` with `η = κ/δ`; the prefactor makes the
/// elliptical case reproduce `a(t) = σ √(t ψ(t))` and the limit exactly `H_{η,ζ}`.
pub fn normalization(model: &PolarModel, t: f64) -> Result<ConditionalFrame> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("threshold must be positive, got {t}")));
    }
    let psi_t = model.radial.psi(t)?;
    let x = psi_t / t;
    if x > model.curve.h_domain() {
        return Err(Error::domain(format!(
            "threshold {t} too small: psi(t)/t = {x} exceeds the germ window {}",
            model.curve.h_domain()
        )));
    }
    let eta = model.curve.kappa() / model.curve.delta();
    let a_t = eta.powf(-1.0 / eta) * t * model.curve.h(x)?;
    Ok(ConditionalFrame {
        t,
        m_t: model.curve.rho() * t,
        psi_t,
        a_t,
    })
}

/// `H_{κ/δ,(1+τ)/δ}` with tail weights `∝ g_± c_±^{−(1+τ)/κ}`.
pub fn limit_law_of(model: &PolarModel) -> Result<LimitLaw> {
    let c = &model.curve;
    let tau = model.angular.tau();
    let (g_minus, g_plus) = model.angular_sides();
    let a = (1.0 + tau) / c.kappa();
    let w_minus = g_minus * c.c_minus().powf(-a);
    let w_plus = g_plus * c.c_plus().powf(-a);
    let scale_minus = (c.c_plus() / c.c_minus()).powf(c.delta() / c.kappa()) * c.lambda_minus() / c.lambda_plus();
    LimitLaw::asymmetric(
        c.kappa() / c.delta(),
        (1.0 + tau) / c.delta(),
        w_minus,
        w_plus,
        scale_minus,
    )
}

/// `k(w) = Γ(a)/κ · (g_+ c_+^{−a} + g_− c_−^{−a}) · w^a`, `a = (1+τ)/κ`.
pub fn k_function(model: &PolarModel, w: f64) -> f64 {
    let c = &model.curve;
    let (g_minus, g_plus) = model.angular_sides();
    let a = (1.0 + model.angular.tau()) / c.kappa();
    gamma(a) / c.kappa() * (g_plus * c.c_plus().powf(-a) + g_minus * c.c_minus().powf(-a)) * w.powf(a)
}

/// `ln [k(ψ(x)/x) S(x)]`.
pub fn log_survival_x_asymptotic(model: &PolarModel, x: f64) -> Result<f64> {
    let w = model.radial.psi(x)? / x;
    if w > model.curve.h_domain() {
        return Err(Error::domain(format!("x = {x} is below the germ window")));
    }
    Ok(k_function(model, w).ln() + model.radial.log_survival(x))
}

/// Asymptotic equivalent of `P(X > x)`.
pub fn survival_x_asymptotic(model: &PolarModel, x: f64) -> Result<f64> {
    Ok(log_survival_x_asymptotic(model, x)?.exp())
}

/// Asymptotic `P(RU > x)` for `U ≤ b` with density `g` near `b` of index `τ`.
pub fn product_tail_asymptotic<G: Fn(f64) -> f64>(
    radial: &RadialLaw,
    b_max: f64,
    g_at: G,
    tau: f64,
    x: f64,
) -> Result<f64> {
    if !(b_max > 0.0) || !(x > 0.0) || !(tau > -1.0) {
        return Err(Error::domain("product tail needs b > 0, x > 0 and tau > -1"));
    }
    let xb = x / b_max;
    let w = radial.psi(xb)? / x;
    let g = g_at(1.0 / (1.0 / b_max + w));
    Ok(b_max * b_max * gamma(tau + 1.0) * w * g * radial.log_survival(xb).exp())
}

/// `b_Y(t) ∼ v* b(t)`.
pub fn quantile_y_asymptotic(model: &PolarModel, t: f64) -> Result<f64> {
    Ok(model.curve.v_star() * model.radial.quantile_b(t)?)
}

/// First-order and shift-corrected approximations of
/// `P(Y ≤ ρx + A z | X > x)`, `A = (λ/σ) √(x ψ(x))`, `u = 1 − σ²s²/2 + …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondOrder {
    pub first_order: f64,
    pub corrected: f64,
    /// `A`.
    pub scale: f64,
    /// Location shift of `Y − ρx` given `X > x`, on the original scale.
    pub shift: f64,
}

pub fn second_order_conditional(model: &PolarModel, x: f64, z: f64) -> Result<SecondOrder> {
    let c = &model.curve;
    if c.kappa() != 2.0 || c.delta() != 1.0 || !matches!(model.angular, crate::geometry::AngularLaw::Uniform) {
        return Err(Error::Unsupported(
            "second-order correction needs kappa = 2, delta = 1 and a uniform angle".into(),
        ));
    }
    if c.c_minus() != c.c_plus() || c.lambda_minus() != c.lambda_plus() {
        return Err(Error::Unsupported(
            "second-order correction needs a symmetric germ".into(),
        ));
    }
    let psi = model.radial.psi(x)?;
    let curv = c.c_plus();
    let sigma = (2.0 * curv).sqrt();
    let scale = c.lambda_v() / sigma * (x * psi).sqrt();
    // quadratic coefficient μ of v − ρ, by a symmetric difference
    let h = 1e-3 * c.window();
    let mu = (c.v_minus_rho(h) + c.v_minus_rho(-h)) / (2.0 * h * h);
    // E[X − x | X > x] ≈ ψ and E[R(v − ρu) − λRs] ≈ (μ + ρc) ψ / (2c)
    let shift = psi * (c.rho() + (mu + c.rho() * curv) / (2.0 * curv));
    Ok(SecondOrder {
        first_order: normal_cdf(z),
        corrected: normal_cdf(z - shift / scale),
        scale,
        shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{elliptical_curve, lp_curve, power_curve, AngularLaw};
    use crate::quad::{integrate_panels, Panel, QuadOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_special_case() {
        let h = LimitLaw::new(2.0, 1.0).unwrap();
        assert_eq!(h.cdf(0.0), 0.5);
        assert!((h.cdf(1.0) - 0.841345).abs() < 1e-6);
        let mut worst: f64 = 0.0;
        for i in -50..=50 {
            let y = i as f64 * 0.1;
            worst = worst.max((h.cdf(y) - normal_cdf(y)).abs());
            let phi = (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((h.pdf(y) - phi).abs() < 1e-14);
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn normalizer() {
        let v = 2.0 * half_line_mass(3.0, 1.0);
        assert!((v - 2.575798633708138).abs() < 1e-12);
        for p in [1.5f64, 2.0, 3.0] {
            let closed = 2.0 * p.powf(1.0 / p - 1.0) * gamma(1.0 / p);
            assert!((2.0 * half_line_mass(p, 1.0) - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        for eta in [1.5, 2.0, 3.0] {
            for zeta in [0.5, 1.0, 2.0] {
                let h = LimitLaw::asymmetric(eta, zeta, 0.3, 0.7, 1.7).unwrap();
                let panels = [Panel::UpperInfinite { a: 0.0 }, Panel::left(0.0, 1.0, zeta - 1.0)];
                let right = integrate_panels(|s| h.pdf(s), &panels[..1], QuadOptions::with_rel(1e-13));
                let right = if zeta < 1.0 {
                    integrate_panels(|s| h.pdf(s), &panels[1..], QuadOptions::with_rel(1e-13))
                        .unwrap()
                        .value
                        + integrate_panels(|s| h.pdf(1.0 + s), &panels[..1], QuadOptions::with_rel(1e-13))
                            .unwrap()
                            .value
                } else {
                    right.unwrap().value
                };
                let left = if zeta < 1.0 {
                    integrate_panels(|s| h.pdf(-s), &panels[1..], QuadOptions::with_rel(1e-13))
                        .unwrap()
                        .value
                        + integrate_panels(|s| h.pdf(-1.0 - s), &panels[..1], QuadOptions::with_rel(1e-13))
                            .unwrap()
                            .value
                } else {
                    integrate_panels(|s| h.pdf(-s), &panels[..1], QuadOptions::with_rel(1e-13))
                        .unwrap()
                        .value
                };
                assert!((left + right - 1.0).abs() < 1e-10, "({eta},{zeta})");
                assert!((left - 0.3).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let h = LimitLaw::new(2.0, 1.0).unwrap();
        assert!(h.quantile(0.5).unwrap().abs() < 1e-15);
        assert!((h.quantile(0.841345).unwrap() - 1.0).abs() < 1e-5);
        assert!((h.quantile(normal_cdf(1.0)).unwrap() - 1.0).abs() < 1e-8);
        for law in [
            LimitLaw::new(3.0, 1.0).unwrap(),
            LimitLaw::asymmetric(1.5, 0.5, 0.2, 0.8, 3.0).unwrap(),
            LimitLaw::new(4.0, 2.0).unwrap(),
        ] {
            for q in [1e-12, 1e-4, 0.1, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
                let y = law.quantile(q).unwrap();
                assert!((law.cdf(y) - q).abs() < 1e-10, "{law:?} {q}");
            }
        }
        assert!(h.quantile(0.0).is_err() && h.quantile(1.0).is_err());
    }

    #[test]
    fn sampler_ks() {
        let h = LimitLaw::new(3.0, 1.0).unwrap();
        let mut xs = h.sample(1_000_000, &mut ChaCha8Rng::seed_from_u64(4));
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let f = h.cdf(y);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.002);
    }

    fn elliptical(rho: f64) -> PolarModel {
        PolarModel::new(
            RadialLaw::rayleigh(),
            AngularLaw::uniform(),
            elliptical_curve(rho).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn frames() {
        let m = elliptical(0.6);
        for t in [4.0, 10.0, 100.0] {
            let f = normalization(&m, t).unwrap();
            assert_eq!(f.m_t, 0.6 * t);
            let exact = 0.8 * (1.0 + 0.5 / (t * t)).sqrt();
            assert!((f.a_t - exact).abs() < 1e-12);
            assert!((f.a_t - 0.8).abs() < 0.8 * 0.5 / (t * t));
        }
        let f = normalization(&m, 10.0).unwrap();
        assert!((f.psi_t / (f.a_t / 0.8) - 0.1).abs() < 1e-3);
        assert!(normalization(&m, 0.5).is_err());

        let c = power_curve(0.5, 3.0, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let pm = PolarModel::new(RadialLaw::exponential(1.0).unwrap(), AngularLaw::uniform(), c).unwrap();
        let ratio = |t: f64| normalization(&pm, t).unwrap().a_t / (t * (1.0 / t).powf(1.0 / 3.0));
        assert!((ratio(4000.0) / ratio(2000.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn limit_laws_of_models() {
        let h = limit_law_of(&elliptical(0.3)).unwrap();
        assert_eq!((h.eta, h.zeta), (2.0, 1.0));
        assert!((h.weight_minus - 0.5).abs() < 1e-15 && (h.scale_minus - 1.0).abs() < 1e-15);
        let lp = PolarModel::new(
            RadialLaw::rayleigh(),
            AngularLaw::uniform(),
            lp_curve(3.0, 0.0).unwrap(),
        )
        .unwrap();
        let h = limit_law_of(&lp).unwrap();
        assert_eq!((h.eta, h.zeta), (3.0, 1.0));
        let c = power_curve(0.5, 2.0, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let g = AngularLaw::power(0.5, 1.0, 0.5).unwrap();
        let pm = PolarModel::new(RadialLaw::rayleigh(), g, c).unwrap();
        let h = limit_law_of(&pm).unwrap();
        assert_eq!((h.eta, h.zeta), (2.0, 2.0));
    }

    #[test]
    fn marginal_tail_equivalent() {
        let m = elliptical(0.0);
        let x: f64 = 5.0;
        let mills = (-0.5 * x * x).exp() / (x * (2.0 * std::f64::consts::PI).sqrt());
        let k = survival_x_asymptotic(&m, x).unwrap();
        assert!((k / mills - 1.0).abs() < 1e-12);
        assert!((k - 2.9734e-7).abs() < 1e-10);
        let w = 1e-3;
        assert!((k_function(&m, w) / k_function(&m, w / 2.0) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn product_tail_reduces_for_uniform() {
        let law = RadialLaw::exponential(1.0).unwrap();
        let x: f64 = 40.0;
        let v = product_tail_asymptotic(&law, 1.0, |_| 1.0, 0.0, x).unwrap();
        assert!((v / ((-x).exp() / x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn y_quantile_scales_with_v() {
        let c1 = power_curve(0.5, 2.0, 1.0, 1.0, 1.0, 1.0, 0.2).unwrap();
        let c2 = power_curve(0.5, 2.0, 1.0, 1.0, 1.0, 2.0, 0.4).unwrap();
        let r = RadialLaw::rayleigh();
        let m1 = PolarModel::new(r.clone(), AngularLaw::uniform(), c1).unwrap();
        let m2 = PolarModel::new(r, AngularLaw::uniform(), c2).unwrap();
        let a = quantile_y_asymptotic(&m1, 1e4).unwrap();
        let b = quantile_y_asymptotic(&m2, 1e4).unwrap();
        assert!((b / a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn second_order_shape() {
        let s = second_order_conditional(&elliptical(0.0), 8.0, 0.5).unwrap();
        assert!(s.shift.abs() < 1e-9);
        assert!((s.corrected - s.first_order).abs() < 1e-9);
        let s = second_order_conditional(&elliptical(0.6), 8.0, 0.0).unwrap();
        assert!((s.scale - 0.8).abs() < 1e-12);
        assert!((s.shift - 0.6 / 8.0).abs() < 1e-6);
        let g = AngularLaw::power(0.5, 1.0, 0.5).unwrap();
        let m = PolarModel::new(RadialLaw::rayleigh(), g, elliptical_curve(0.6).unwrap()).unwrap();
        assert!(matches!(
            second_order_conditional(&m, 8.0, 0.0),
            Err(Error::Unsupported(_))
        ));
    }
}
