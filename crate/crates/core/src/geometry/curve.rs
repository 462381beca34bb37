use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of `t0` an inverse is taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Serialized description of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Elliptical {
        rho: f64,
    },
    Lp {
        p: f64,
        rho: f64,
    },
    Power {
        t0: f64,
        kappa: f64,
        delta: f64,
        c_minus: f64,
        c_plus: f64,
        lambda_v: f64,
        /// Left coefficient of `v − ρ`; defaults to `lambda_v`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda_minus: Option<f64>,
        rho: f64,
    },
}

/// A curve `t ↦ (u(t), v(t))` on `[0, 1]` with its germ at the maximum of `u`.
///
/// Near `t0`, `1 − u(t0+s) ≈ c_± |s|^κ` and `v(t0+s) − ρ ≈ ±λ_± |s|^δ`.
/// Outside `[t0 − ε, t0 + ε]` the curve satisfies `u ≤ 1 − η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveSpec", into = "CurveSpec")]
pub struct CurveGerm {
    spec: CurveSpec,
    t0: f64,
    rho: f64,
    kappa: f64,
    delta: f64,
    c_minus: f64,
    c_plus: f64,
    lambda_minus: f64,
    lambda_plus: f64,
    v_star: f64,
    window: f64,
    eta: f64,
    // shear coefficient of the elliptical and L_p families
    sigma: f64,
}

impl From<CurveGerm> for CurveSpec {
    fn from(c: CurveGerm) -> Self {
        c.spec
    }
}

impl TryFrom<CurveSpec> for CurveGerm {
    type Error = Error;

    fn try_from(spec: CurveSpec) -> Result<Self> {
        CurveGerm::from_spec(spec)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::construction(format!("rho must lie in (-1, 1), got {rho}")));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::construction(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

pub fn elliptical_curve(rho: f64) -> Result<CurveGerm> {
    CurveGerm::from_spec(CurveSpec::Elliptical { rho })
}

pub fn lp_curve(p: f64, rho: f64) -> Result<CurveGerm> {
    CurveGerm::from_spec(CurveSpec::Lp { p, rho })
}

#[allow(clippy::too_many_arguments)]
pub fn power_curve(
    t0: f64,
    kappa: f64,
    delta: f64,
    c_minus: f64,
    c_plus: f64,
    lambda_v: f64,
    rho: f64,
) -> Result<CurveGerm> {
    CurveGerm::from_spec(CurveSpec::Power {
        t0,
        kappa,
        delta,
        c_minus,
        c_plus,
        lambda_v,
        lambda_minus: None,
        rho,
    })
}

impl CurveGerm {
    pub fn from_spec(spec: CurveSpec) -> Result<Self> {
        let mut c = match spec {
            CurveSpec::Elliptical { rho } => {
                check_rho(rho)?;
                let sigma = (1.0 - rho * rho).sqrt();
                CurveGerm {
                    spec,
                    t0: 0.5,
                    rho,
                    kappa: 2.0,
                    delta: 1.0,
                    c_minus: 2.0 * PI * PI,
                    c_plus: 2.0 * PI * PI,
                    lambda_minus: 2.0 * PI * sigma,
                    lambda_plus: 2.0 * PI * sigma,
                    v_star: 1.0,
                    window: 0.125,
                    eta: 0.0,
                    sigma,
                }
            }
            CurveSpec::Lp { p, rho } => {
                if !(p > 1.0 && p.is_finite()) {
                    return Err(Error::construction(format!("L_p curve needs p > 1, got {p}")));
                }
                check_rho(rho)?;
                let sigma = (1.0 - rho.abs().powf(p)).powf(1.0 / p);
                // Hölder: max of ρu + σv₀ over the unit L_p sphere is the dual norm
                let q = p / (p - 1.0);
                let v_star = (rho.abs().powf(q) + sigma.powf(q)).powf(1.0 / q);
                let c = 4f64.powf(p) / p;
                CurveGerm {
                    spec,
                    t0: 0.5,
                    rho,
                    kappa: p,
                    delta: 1.0,
                    c_minus: c,
                    c_plus: c,
                    lambda_minus: 4.0 * sigma,
                    lambda_plus: 4.0 * sigma,
                    v_star,
                    window: 0.24,
                    eta: 0.0,
                    sigma,
                }
            }
            CurveSpec::Power {
                t0,
                kappa,
                delta,
                c_minus,
                c_plus,
                lambda_v,
                lambda_minus,
                rho,
            } => {
                if !(t0 > 0.0 && t0 < 1.0) {
                    return Err(Error::construction(format!("t0 must lie in (0, 1), got {t0}")));
                }
                positive("kappa", kappa)?;
                positive("delta", delta)?;
                if delta >= kappa {
                    return Err(Error::construction(format!(
                        "germ needs delta < kappa, got delta = {delta}, kappa = {kappa}"
                    )));
                }
                positive("c_minus", c_minus)?;
                positive("c_plus", c_plus)?;
                positive("lambda_v", lambda_v)?;
                let lambda_minus = lambda_minus.unwrap_or(lambda_v);
                positive("lambda_minus", lambda_minus)?;
                if !rho.is_finite() {
                    return Err(Error::construction("rho must be finite"));
                }
                let mut window = 0.5 * t0.min(1.0 - t0);
                for c in [c_minus, c_plus] {
                    window = window.min((0.5 / c).powf(1.0 / kappa));
                }
                CurveGerm {
                    spec,
                    t0,
                    rho,
                    kappa,
                    delta,
                    c_minus,
                    c_plus,
                    lambda_minus,
                    lambda_plus: lambda_v,
                    v_star: rho + lambda_v * (1.0 - t0).powf(delta),
                    window,
                    eta: 0.0,
                    sigma: 1.0,
                }
            }
        };
        c.settle_window()?;
        Ok(c)
    }

    /// Shrinks the window until `v` is increasing on it, then records `η`.
    fn settle_window(&mut self) -> Result<()> {
        const N: usize = 1000;
        for _ in 0..60 {
            let e = self.window;
            let increasing = (0..N).all(|i| {
                let a = -e + 2.0 * e * i as f64 / N as f64;
                let b = -e + 2.0 * e * (i + 1) as f64 / N as f64;
                self.v_minus_rho(b) > self.v_minus_rho(a)
            });
            if increasing {
                self.eta = self.ell(e).min(self.ell(-e));
                return Ok(());
            }
            self.window *= 0.5;
        }
        Err(Error::construction("v is not increasing near t0"))
    }

    pub fn spec(&self) -> CurveSpec {
        self.spec
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn c_minus(&self) -> f64 {
        self.c_minus
    }
    pub fn c_plus(&self) -> f64 {
        self.c_plus
    }
    /// Right coefficient `λ` of `v − ρ`.
    pub fn lambda_v(&self) -> f64 {
        self.lambda_plus
    }
    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }
    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }
    pub fn v_star(&self) -> f64 {
        self.v_star
    }
    /// Half-width `ε` of the validity window around `t0`.
    pub fn window(&self) -> f64 {
        self.window
    }
    /// `u ≤ 1 − η` outside the window.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `ℓ(s) = 1 − u(t0 + s)`, evaluated without cancellation near `s = 0`.
    pub fn ell(&self, s: f64) -> f64 {
        match self.spec {
            CurveSpec::Elliptical { .. } => {
                let h = (PI * s).sin();
                2.0 * h * h
            }
            CurveSpec::Lp { p, .. } => {
                if s.abs() <= 0.25 {
                    let a = (4.0 * s.abs()).powf(p);
                    -((-a).ln_1p() / p).exp_m1()
                } else {
                    1.0 - self.u(self.t0 + s)
                }
            }
            CurveSpec::Power { .. } => {
                let c = if s < 0.0 { self.c_minus } else { self.c_plus };
                c * s.abs().powf(self.kappa)
            }
        }
    }

    /// `v(t0 + s) − ρ`, evaluated without cancellation near `s = 0`.
    pub fn v_minus_rho(&self, s: f64) -> f64 {
        match self.spec {
            CurveSpec::Elliptical { rho } => {
                let h = (PI * s).sin();
                -2.0 * rho * h * h + self.sigma * (2.0 * PI * s).sin()
            }
            CurveSpec::Lp { rho, .. } => {
                if s.abs() <= 0.25 {
                    -rho * self.ell(s) + self.sigma * 4.0 * s
                } else {
                    self.v(self.t0 + s) - rho
                }
            }
            CurveSpec::Power { .. } => {
                if s < 0.0 {
                    -self.lambda_minus * (-s).powf(self.delta)
                } else {
                    self.lambda_plus * s.powf(self.delta)
                }
            }
        }
    }

    fn lp_coords(p: f64, t: f64) -> (f64, f64) {
        let (sign, v0) = if t < 0.25 {
            (-1.0, -4.0 * t)
        } else if t <= 0.75 {
            (1.0, 4.0 * (t - 0.5))
        } else {
            (-1.0, 4.0 - 4.0 * t)
        };
        let a = v0.abs().min(1.0).powf(p);
        (sign * (1.0 - a).powf(1.0 / p), v0)
    }

    pub fn u(&self, t: f64) -> f64 {
        match self.spec {
            CurveSpec::Elliptical { .. } => (2.0 * PI * (t - 0.5)).cos(),
            CurveSpec::Lp { p, .. } => Self::lp_coords(p, t).0,
            CurveSpec::Power { .. } => 1.0 - self.ell(t - self.t0),
        }
    }

    pub fn v(&self, t: f64) -> f64 {
        match self.spec {
            CurveSpec::Elliptical { rho } => {
                let th = 2.0 * PI * (t - 0.5);
                rho * th.cos() + self.sigma * th.sin()
            }
            CurveSpec::Lp { p, rho } => {
                let (u, v0) = Self::lp_coords(p, t);
                rho * u + self.sigma * v0
            }
            CurveSpec::Power { .. } => self.rho + self.v_minus_rho(t - self.t0),
        }
    }

    /// Points of `[0, 1]` where the curve or its derivatives are known to kink,
    /// plus `t0` and the window edges.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![self.t0 - self.window, self.t0, self.t0 + self.window];
        match self.spec {
            CurveSpec::Elliptical { .. } | CurveSpec::Lp { .. } => b.extend([0.25, 0.75]),
            CurveSpec::Power { .. } => {}
        }
        b.retain(|&t| t > 0.0 && t < 1.0);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `s` on the requested side with `ℓ(s) = target`, `0 ≤ target ≤ ℓ(±ε)`.
    pub fn ell_inverse(&self, target: f64, side: Side) -> Result<f64> {
        let sign = match side {
            Side::Left => -1.0,
            Side::Right => 1.0,
        };
        let edge = self.ell(sign * self.window);
        if !(target >= 0.0 && target <= edge) {
            return Err(Error::domain(format!(
                "1 - u = {target} is outside the local range [0, {edge}]"
            )));
        }
        if target == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, self.window);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.ell(sign * mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(sign * 0.5 * (lo + hi))
    }

    /// Generalized inverse of `u` near `t0`.
    pub fn u_inverse(&self, y: f64, side: Side) -> Result<f64> {
        if !(y <= 1.0) {
            return Err(Error::domain(format!("u_inverse needs y <= 1, got {y}")));
        }
        Ok(self.t0 + self.ell_inverse(1.0 - y, side)?)
    }

    /// `h(x) = (v/u)∘u^←(1/(1+x)) − ρ` on the right branch.
    pub fn h(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("h needs x >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let s = self.ell_inverse(x / (1.0 + x), Side::Right)?;
        let vmr = self.v_minus_rho(s);
        // v(1+x) − ρ = (v − ρ) + x v
        Ok(vmr + x * (self.rho + vmr))
    }

    /// Largest `x` accepted by [`CurveGerm::h`].
    pub fn h_domain(&self) -> f64 {
        let e = self.ell(self.window);
        e / (1.0 - e)
    }

    /// Left-branch analogue of `h`, negative for `x > 0`.
    pub fn h_left(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("h needs x >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let s = self.ell_inverse(x / (1.0 + x), Side::Left)?;
        let vmr = self.v_minus_rho(s);
        Ok(vmr + x * (self.rho + vmr))
    }
}

/// Slope of a least-squares fit of `ln f(s)` on `ln s` over `s = 2^{-k}·s_max`.
pub fn loglog_slope<F: Fn(f64) -> f64>(f: F, s_max: f64, levels: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (0..levels)
        .map(|k| {
            let s = s_max * 0.5f64.powi(k as i32);
            (s.ln(), f(s).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elliptical_germ() {
        let c = elliptical_curve(0.6).unwrap();
        assert_eq!((c.kappa(), c.delta(), c.rho(), c.v_star()), (2.0, 1.0, 0.6, 1.0));
        let c0 = elliptical_curve(0.0).unwrap();
        assert_eq!(c0.u(c0.t0()), 1.0);
        assert_eq!(c0.v(c0.t0()), 0.0);
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let (u, v) = (c.u(t), c.v(t));
            let r = u * u + (v - 0.6 * u).powi(2) / 0.64;
            assert!((r - 1.0).abs() < 1e-12);
        }
        assert!(elliptical_curve(1.0).is_err());
        assert!(elliptical_curve(f64::NAN).is_err());
    }

    #[test]
    fn accurate_germ_functions_match_direct_evaluation() {
        for c in [
            elliptical_curve(-0.3).unwrap(),
            lp_curve(3.0, 0.4).unwrap(),
            lp_curve(1.5, -0.2).unwrap(),
            power_curve(0.3, 2.5, 1.2, 0.7, 1.3, 0.9, 0.1).unwrap(),
        ] {
            for i in 0..=200 {
                let t = i as f64 / 200.0;
                let s = t - c.t0();
                assert!((c.ell(s) - (1.0 - c.u(t))).abs() < 1e-12, "{:?} {t}", c.spec());
                assert!((c.v_minus_rho(s) - (c.v(t) - c.rho())).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lp_curve_family() {
        let c = lp_curve(3.0, 0.0).unwrap();
        assert!((c.u(0.5 + 0.1 / 4.0) - (1.0 - 1e-3f64).cbrt()).abs() < 1e-15);
        assert!((c.u(0.5 + 0.1 / 4.0) - 0.999667).abs() < 1e-6);
        let c = lp_curve(1.5, 0.0).unwrap();
        assert_eq!((c.kappa(), c.delta()), (1.5, 1.0));
        assert!(lp_curve(1.0, 0.0).is_err());
        // p = 2 traces the unit circle
        let c = lp_curve(2.0, 0.0).unwrap();
        for i in 0..=400 {
            let t = i as f64 / 400.0;
            assert!((c.u(t).hypot(c.v(t)) - 1.0).abs() < 1e-12);
        }
        // closed curve with unit p-norm, sheared
        let c = lp_curve(3.0, 0.5).unwrap();
        for i in 0..=400 {
            let t = i as f64 / 400.0;
            let (x, y) = (c.u(t), c.v(t));
            let n = x.abs().powi(3) + (y - 0.5 * x).abs().powi(3) / (1.0 - 0.125);
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!((c.u(0.0) - c.u(1.0)).abs() < 1e-15 && (c.v(0.0) - c.v(1.0)).abs() < 1e-15);
        let grid_max = (0..=100_000)
            .map(|i| c.v(i as f64 / 100_000.0))
            .fold(f64::MIN, f64::max);
        assert!((grid_max - c.v_star()).abs() < 1e-8);
    }

    #[test]
    fn power_curve_germ() {
        let c = power_curve(0.5, 2.0, 1.0, 0.5, 0.5, 1.0, 0.0).unwrap();
        assert_eq!((c.u(0.5), c.v(0.5)), (1.0, 0.0));
        for s in [0.01, 0.05, 0.1] {
            assert!((c.u(0.5 + s) - (1.0 - s * s / 2.0)).abs() < 1e-15);
        }
        let c3 = power_curve(0.5, 3.0, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((c3.ell(0.1) / c3.ell(0.05) - 8.0).abs() < 1e-12);
        assert!(power_curve(0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(power_curve(0.5, 1.0, 2.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(power_curve(1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn window_guarantees() {
        for c in [
            elliptical_curve(0.9).unwrap(),
            elliptical_curve(-0.95).unwrap(),
            lp_curve(3.0, 0.8).unwrap(),
            power_curve(0.2, 2.0, 0.5, 3.0, 1.0, 1.0, 0.3).unwrap(),
        ] {
            let (t0, e, eta) = (c.t0(), c.window(), c.eta());
            assert!(eta > 0.0);
            for i in 0..=2000 {
                let t = i as f64 / 2000.0;
                if (t - t0).abs() > e {
                    assert!(c.u(t) <= 1.0 - eta + 1e-15, "{:?} at {t}", c.spec());
                } else if t != t0 {
                    assert!(c.u(t) < 1.0);
                }
            }
            assert!(c.v_star() > c.rho());
        }
    }

    #[test]
    fn germ_indices_by_regression() {
        for c in [
            elliptical_curve(0.6).unwrap(),
            lp_curve(3.0, 0.0).unwrap(),
            lp_curve(1.5, 0.3).unwrap(),
            power_curve(0.4, 3.0, 1.0, 1.0, 2.0, 1.0, 0.0).unwrap(),
        ] {
            let e = c.window();
            for side in [-1.0, 1.0] {
                let k = loglog_slope(|s| c.ell(side * s), e / 64.0, 12);
                let d = loglog_slope(|s| side * c.v_minus_rho(side * s), e / 64.0, 12);
                assert!((k - c.kappa()).abs() < 0.02, "{:?} kappa {k}", c.spec());
                assert!((d - c.delta()).abs() < 0.02, "{:?} delta {d}", c.spec());
            }
            let s = 1e-7;
            assert!((c.ell(s) / (c.c_plus() * s.powf(c.kappa())) - 1.0).abs() < 1e-3);
            assert!((c.ell(-s) / (c.c_minus() * s.powf(c.kappa())) - 1.0).abs() < 1e-3);
            assert!((c.v_minus_rho(s) / (c.lambda_v() * s.powf(c.delta())) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn inverses() {
        let c = elliptical_curve(0.6).unwrap();
        assert_eq!(c.u_inverse(1.0, Side::Left).unwrap(), 0.5);
        assert_eq!(c.u_inverse(1.0, Side::Right).unwrap(), 0.5);
        let t = c.u_inverse(0.3f64.cos(), Side::Right).unwrap();
        assert!((t - (0.5 + 0.3 / (2.0 * PI))).abs() < 1e-12);
        let t = c.u_inverse(0.3f64.cos(), Side::Left).unwrap();
        assert!((t - (0.5 - 0.3 / (2.0 * PI))).abs() < 1e-12);
        let t1 = c.u_inverse(0.8, Side::Right).unwrap();
        let t2 = c.u_inverse(0.9, Side::Right).unwrap();
        assert!(t1 > t2);
        assert!((c.u(t1) - 0.8).abs() < 1e-12);
        assert!(c.u_inverse(0.0, Side::Right).is_err());
    }

    #[test]
    fn h_function() {
        let c = elliptical_curve(0.0).unwrap();
        assert!((c.h(0.02).unwrap() - 0.200998).abs() < 1e-6);
        for x in [1e-6, 1e-3, 0.05] {
            assert!((c.h(x).unwrap() - (x * x + 2.0 * x).sqrt()).abs() < 1e-12 * (1.0 + x));
        }
        // the shear only rescales h
        let c6 = elliptical_curve(0.6).unwrap();
        assert!((c6.h(0.02).unwrap() - 0.8 * 0.02f64.mul_add(0.02, 0.04).sqrt()).abs() < 1e-12);
        let p = power_curve(0.5, 2.0, 1.0, 0.5, 0.5, 1.0, 0.0).unwrap();
        for x in [1e-8, 1e-6, 1e-4] {
            let r = p.h(x).unwrap() / (2.0 * x).sqrt();
            assert!((r - 1.0).abs() < 2.0 * x.sqrt());
        }
        for c in [c6, lp_curve(3.0, 0.0).unwrap(), p] {
            let idx = c.delta() / c.kappa();
            let r = c.h(1e-9).unwrap() / c.h(0.5e-9).unwrap();
            assert!((r - 2f64.powf(idx)).abs() < 1e-3);
            let mut prev = 0.0;
            for i in 1..=100 {
                let x = c.h_domain() * i as f64 / 100.0;
                let v = c.h(x.min(c.h_domain())).unwrap();
                assert!(v > prev);
                prev = v;
            }
            assert!(c.h(2.0 * c.h_domain()).is_err());
        }
    }

    #[test]
    fn serde_round_trip() {
        let j = r#"{"kind":"elliptical","rho":0.6}"#;
        let c: CurveGerm = serde_json::from_str(j).unwrap();
        assert_eq!(c, elliptical_curve(0.6).unwrap());
        assert_eq!(serde_json::to_string(&c).unwrap(), j);
        let p = power_curve(0.4, 3.0, 1.0, 1.0, 2.0, 1.0, 0.0).unwrap();
        let back: CurveGerm = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<CurveGerm>(r#"{"kind":"lp","p":0.5,"rho":0}"#).is_err());
        assert!(serde_json::from_str::<CurveGerm>(r#"{"kind":"elliptical","rho":0,"x":1}"#).is_err());
    }
}
