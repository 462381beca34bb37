//! From a density `f(x, y) = g_r(n(x, y)) · w(T(x, y))`, where `n` is the
//! gauge of the curve and `T` the curve parameter, back to the polar model.
//!
//! The change of variables `(x, y) = r (u(t), v(t))` has Jacobian
//! `r |u v' − u' v|`, so `R` has density `∝ r g_r(r)` and `T` has density
//! `∝ |u v' − u' v| w(t)`.

use std::f64::consts::FRAC_PI_4;

use super::PolarModel;
use crate::error::{Error, Result};
use crate::geometry::{AngularLaw, CurveGerm};
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::radial::{PsiSpec, RadialLaw, VonMises, VonMisesGrid};

const ANGULAR_CELLS: usize = 20_000;
const DIFF_STEP: f64 = 1e-6;

/// Radial law with density proportional to `r · profile(r)`, tabulated.
pub fn decompose_radial_profile<F: Fn(f64) -> f64>(profile: F) -> Result<RadialLaw> {
    let f = |r: f64| {
        let v = r * profile(r);
        if v.is_finite() && v > 0.0 {
            v
        } else {
            0.0
        }
    };
    if (0..200).any(|i| {
        let r = i as f64 * 0.05;
        let v = profile(r);
        !(v >= 0.0) || v.is_infinite()
    }) {
        return Err(Error::construction("radial profile must be finite and nonnegative"));
    }

    // where the integrand has died out, relative to its bulk
    let peak = (0..400).map(|i| f(i as f64 * 0.05)).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::construction("radial profile vanishes near the origin"));
    }
    let mut r_max = 1.0;
    while f(r_max) > 1e-300 * peak || f(2.0 * r_max) > 1e-300 * peak {
        r_max *= 2.0;
        if r_max > 1e8 {
            return Err(Error::construction(
                "r * profile(r) is not integrable: no decay observed up to r = 1e8",
            ));
        }
    }

    let mut xs = vec![0.0];
    while *xs.last().unwrap() < r_max {
        let x = *xs.last().unwrap();
        xs.push(x + 0.01 * x.max(1.0));
    }
    let opts = QuadOptions::with_rel(1e-12);
    let mut pieces = Vec::with_capacity(xs.len());
    for w in xs.windows(2) {
        pieces.push(integrate(f, w[0], w[1], opts)?.value);
    }
    let far = integrate_to_infinity(f, *xs.last().unwrap(), opts)?.value;
    if !far.is_finite() {
        return Err(Error::construction("r * profile(r) is not integrable"));
    }
    // tail masses summed from the far end keep full relative precision
    let mut tails = vec![0.0; xs.len()];
    let mut acc = far;
    tails[xs.len() - 1] = far;
    for i in (0..pieces.len()).rev() {
        acc += pieces[i];
        tails[i] = acc;
    }
    let total = tails[0];
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::construction("r * profile(r) has no finite positive mass"));
    }
    let mut grid = VonMisesGrid {
        x: Vec::new(),
        lambda: Vec::new(),
        inv_psi: Vec::new(),
    };
    for (i, &x) in xs.iter().enumerate() {
        if !(tails[i] > 1e-290 * total) {
            break;
        }
        grid.x.push(x);
        grid.lambda.push((total / tails[i]).ln());
        grid.inv_psi.push(f(x) / tails[i]);
    }
    if grid.x.len() < 2 {
        return Err(Error::construction("radial profile is too concentrated to tabulate"));
    }
    Ok(RadialLaw::VonMises(VonMises {
        psi: PsiSpec::Tabulated,
        x0: 0.0,
        scale: 1.0,
        grid,
    }))
}

/// `|u v' − u' v|` by central differences, one-sided at the ends.
fn jacobian(curve: &CurveGerm, t: f64) -> f64 {
    let lo = (t - DIFF_STEP).max(0.0);
    let hi = (t + DIFF_STEP).min(1.0);
    let du = (curve.u(hi) - curve.u(lo)) / (hi - lo);
    let dv = (curve.v(hi) - curve.v(lo)) / (hi - lo);
    (curve.u(t) * dv - du * curve.v(t)).abs()
}

/// Polar model of the density `profile(n(x,y)) · weight(T(x,y))`.
pub fn decompose_density<F, W>(profile: F, curve: &CurveGerm, weight: W) -> Result<PolarModel>
where
    F: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    let radial = decompose_radial_profile(profile)?;
    let knots: Vec<f64> = (0..=ANGULAR_CELLS).map(|i| i as f64 / ANGULAR_CELLS as f64).collect();
    let mut dens = Vec::with_capacity(knots.len());
    for &t in &knots {
        let w = weight(t);
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::construction(format!("angular weight is invalid at t = {t}")));
        }
        dens.push(jacobian(curve, t) * w);
    }
    let angular = AngularLaw::tabulated(curve.t0(), knots, dens)?;
    PolarModel::new(radial, angular, curve.clone())
}

/// Angle of the curve point at `t` in the coordinates that make the curve
/// a circle, folded into `[−π/2, π/2]`.
pub fn folded_angle(curve: &CurveGerm, t: f64) -> f64 {
    let rho = curve.rho();
    let sigma = (1.0 - rho * rho).max(0.0).sqrt();
    let u = curve.u(t);
    let ortho = curve.v(t) - rho * u;
    if u == 0.0 {
        return std::f64::consts::FRAC_PI_2.copysign(ortho);
    }
    (ortho / (sigma * u)).atan()
}

/// The weight `1 + (θ² − (π/4)²)²` used for the non-elliptical example.
pub fn tilted_weight(theta: f64) -> f64 {
    let d = theta * theta - FRAC_PI_4 * FRAC_PI_4;
    1.0 + d * d
}
