//! Deterministic quadrature for joint probabilities,
//! `P(X > x, Y > y) = ∫ S(x/u(t) ∨ y/v(t)) g(t) dt` and its relatives.
//!
//! All integrals run over the offset `s = t − t0` so that the germ and any
//! singularity of `g` at `t0` are resolved at full precision, and all
//! values are carried relative to a reference survival `S(x_ref)` so that
//! deep tails do not underflow.

use super::PolarModel;
use crate::error::{Error, Result};
use crate::limits::ConditionalFrame;
use crate::quad::{integrate_panels, Panel, QuadOptions};

const SCAN_POINTS: usize = 1024;
const ORACLE_REL_TOL: f64 = 1e-10;

/// `{x_lo < X ≤ x_hi}` intersected with `{Y ≤ y}` or `{Y > y}`.
#[derive(Debug, Clone, Copy)]
struct Band {
    x_lo: f64,
    x_hi: f64,
    y: f64,
    upper: bool,
}

fn bisect_root<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Sign changes of `f` between consecutive scan points.
fn roots_on<F: Fn(f64) -> f64>(f: F, pts: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev = f(pts[0]);
    for w in pts.windows(2) {
        let cur = f(w[1]);
        if cur == 0.0 {
            out.push(w[1]);
        } else if prev != 0.0 && (prev > 0.0) != (cur > 0.0) && prev.is_finite() && cur.is_finite() {
            out.push(bisect_root(&f, w[0], w[1]));
        }
        prev = cur;
    }
    out
}

impl PolarModel {
    fn s_range(&self) -> (f64, f64) {
        let t0 = self.curve.t0();
        (-t0, 1.0 - t0)
    }

    fn u_s(&self, s: f64) -> f64 {
        1.0 - self.curve.ell(s)
    }

    fn v_s(&self, s: f64) -> f64 {
        self.curve.rho() + self.curve.v_minus_rho(s)
    }

    /// Geometric points accumulating at `center` from both sides.
    fn ladder(&self, center: f64, finest: f64) -> Vec<f64> {
        let (a, b) = self.s_range();
        let mut out = Vec::new();
        let mut d = self.curve.window().max(0.05);
        while d > finest && out.len() < 400 {
            for p in [center - d, center + d] {
                if p > a && p < b {
                    out.push(p);
                }
            }
            d *= 0.5;
        }
        out
    }

    /// Offset scale on which `S(x/u)/S(x)` decays.
    fn germ_scale(&self, x: f64) -> f64 {
        let c = self.curve.c_minus().max(self.curve.c_plus());
        let w = self.radial.psi(x).map(|p| p / x).unwrap_or(1.0);
        (w / c).powf(1.0 / self.curve.kappa())
    }

    fn scan_grid(&self, extra: &[f64]) -> Vec<f64> {
        let (a, b) = self.s_range();
        let mut pts: Vec<f64> = (0..=SCAN_POINTS)
            .map(|i| a + (b - a) * i as f64 / SCAN_POINTS as f64)
            .collect();
        pts.extend_from_slice(extra);
        pts.retain(|p| *p >= a && *p <= b);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn base_breaks(&self) -> Vec<f64> {
        let t0 = self.curve.t0();
        let mut b = vec![0.0];
        b.extend(self.curve.breakpoints().into_iter().map(|t| t - t0));
        b.extend(self.angular.breakpoints().into_iter().map(|t| t - t0));
        b
    }

    /// Integrates `f(s)` over `[−t0, 1 − t0]`, split at `breaks`.
    fn integrate_offsets<F: Fn(f64) -> f64>(&self, f: F, mut breaks: Vec<f64>) -> Result<f64> {
        let (a, b) = self.s_range();
        breaks.retain(|p| *p > a && *p < b);
        breaks.push(a);
        breaks.push(b);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let tau = self.angular.tau();
        let singular = self.angular.singular_power().is_some();
        let panels: Vec<Panel> = breaks
            .windows(2)
            .map(|w| {
                if singular && w[1] == 0.0 {
                    Panel::right(w[0], w[1], tau)
                } else if singular && w[0] == 0.0 {
                    Panel::left(w[0], w[1], tau)
                } else {
                    Panel::Finite { a: w[0], b: w[1] }
                }
            })
            .collect();
        let r = integrate_panels(f, &panels, QuadOptions::with_rel(ORACLE_REL_TOL))?;
        Ok(r.value)
    }

    /// `P(band) / exp(log_ref)`.
    fn band_scaled(&self, band: Band, log_ref: f64) -> Result<f64> {
        if !(band.x_lo > 0.0) {
            return Err(Error::domain(format!("oracle needs x > 0, got {}", band.x_lo)));
        }
        if !(band.x_hi > band.x_lo) || band.y.is_nan() {
            return Ok(0.0);
        }
        if (band.upper && band.y == f64::INFINITY) || (!band.upper && band.y == f64::NEG_INFINITY) {
            return Ok(0.0);
        }
        let law = &self.radial;
        let integrand = |s: f64| -> f64 {
            let u = self.u_s(s);
            if u <= 0.0 {
                return 0.0;
            }
            let v = self.v_s(s);
            let y = band.y;
            let mut lo = band.x_lo / u;
            let mut hi = band.x_hi / u;
            if y.is_finite() {
                if !band.upper {
                    if v > 0.0 {
                        hi = hi.min(y / v);
                    } else if v == 0.0 {
                        if y < 0.0 {
                            return 0.0;
                        }
                    } else if y < 0.0 {
                        lo = lo.max(y / v);
                    }
                } else if v > 0.0 {
                    lo = lo.max(y / v);
                } else if v == 0.0 {
                    if y >= 0.0 {
                        return 0.0;
                    }
                } else if y < 0.0 {
                    hi = hi.min(y / v);
                } else {
                    return 0.0;
                }
            }
            if !(hi > lo) {
                return 0.0;
            }
            let l_lo = law.log_survival(lo);
            let l_hi = if hi.is_finite() {
                law.log_survival(hi)
            } else {
                f64::NEG_INFINITY
            };
            let mass = (l_lo - log_ref).exp() * -(l_hi - l_lo).exp_m1();
            if mass == 0.0 {
                return 0.0;
            }
            mass * self.g_at_offset(s)
        };

        let scale = self.germ_scale(band.x_lo);
        let ladder = self.ladder(0.0, 1e-3 * scale);
        let pts = self.scan_grid(&ladder);
        let mut breaks = self.base_breaks();
        breaks.extend(ladder.iter().copied());
        breaks.extend(roots_on(|s| self.u_s(s), &pts));
        if band.y.is_finite() {
            breaks.extend(roots_on(|s| self.v_s(s), &pts));
            let y = band.y;
            breaks.extend(roots_on(|s| self.u_s(s) * y - self.v_s(s) * band.x_lo, &pts));
            if band.x_hi.is_finite() {
                breaks.extend(roots_on(|s| self.u_s(s) * y - self.v_s(s) * band.x_hi, &pts));
            }
        }
        self.integrate_offsets(integrand, breaks)
    }

    /// `ln P(X > x)`.
    pub fn log_survival_x(&self, x: f64) -> Result<f64> {
        let log_ref = self.radial.log_survival(x);
        let band = Band {
            x_lo: x,
            x_hi: f64::INFINITY,
            y: f64::INFINITY,
            upper: false,
        };
        Ok(log_ref + self.band_scaled(band, log_ref)?.ln())
    }

    pub fn survival_x(&self, x: f64) -> Result<f64> {
        Ok(self.log_survival_x(x)?.exp())
    }

    /// `P(X > x, Y > y)`.
    pub fn joint_exceedance(&self, x: f64, y: f64) -> Result<f64> {
        let log_ref = self.radial.log_survival(x);
        let band = Band {
            x_lo: x,
            x_hi: f64::INFINITY,
            y,
            upper: true,
        };
        Ok(self.band_scaled(band, log_ref)? * log_ref.exp())
    }

    /// `ln P(X > x, Y > y)`, usable where the probability underflows.
    pub fn log_joint_exceedance(&self, x: f64, y: f64) -> Result<f64> {
        let log_ref = self.radial.log_survival(x);
        let band = Band {
            x_lo: x,
            x_hi: f64::INFINITY,
            y,
            upper: true,
        };
        Ok(log_ref + self.band_scaled(band, log_ref)?.ln())
    }

    /// `P(X > x, Y ≤ y)`.
    pub fn joint_lower(&self, x: f64, y: f64) -> Result<f64> {
        let log_ref = self.radial.log_survival(x);
        let band = Band {
            x_lo: x,
            x_hi: f64::INFINITY,
            y,
            upper: false,
        };
        Ok(self.band_scaled(band, log_ref)? * log_ref.exp())
    }

    /// `P(X ≤ t + ψ(t)x, Y ≤ m(t) + a(t)y | X > t)`.
    pub fn conditional_cdf(&self, frame: &ConditionalFrame, x_std: f64, y_std: f64) -> Result<f64> {
        self.conditional_cdf_raw(frame.t, frame.t + frame.psi_t * x_std, frame.m_t + frame.a_t * y_std)
    }

    /// `P(X ≤ x_hi, Y ≤ y | X > t)` on the original scale.
    pub fn conditional_cdf_raw(&self, t: f64, x_hi: f64, y: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("conditioning level must be positive, got {t}")));
        }
        let log_ref = self.radial.log_survival(t);
        let total = self.band_scaled(
            Band {
                x_lo: t,
                x_hi: f64::INFINITY,
                y: f64::INFINITY,
                upper: false,
            },
            log_ref,
        )?;
        if !(total > 0.0) || !(log_ref + total.ln() > -700.0 * std::f64::consts::LN_10) {
            return Err(Error::domain(format!("P(X > {t}) is numerically zero")));
        }
        let part = self.band_scaled(
            Band {
                x_lo: t,
                x_hi: if x_hi.is_nan() { t } else { x_hi },
                y,
                upper: false,
            },
            log_ref,
        )?;
        Ok((part / total).clamp(0.0, 1.0))
    }

    /// `ln P(Y > y)` for `y > 0`.
    pub fn log_survival_y(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::domain(format!("log_survival_y needs y > 0, got {y}")));
        }
        let v_star = self.curve.v_star();
        let log_ref = self.radial.log_survival(y / v_star);
        let integrand = |s: f64| {
            let v = self.v_s(s);
            if v <= 0.0 {
                return 0.0;
            }
            let l = self.radial.log_survival(y / v) - log_ref;
            if l < -745.0 {
                0.0
            } else {
                l.exp() * self.g_at_offset(s)
            }
        };
        // ladder around the maximiser of v
        let (a, b) = self.s_range();
        let coarse = self.scan_grid(&[]);
        let mut s_star = coarse
            .iter()
            .copied()
            .max_by(|p, q| self.v_s(*p).total_cmp(&self.v_s(*q)))
            .unwrap_or(0.0);
        let step = (b - a) / SCAN_POINTS as f64;
        let (mut lo, mut hi) = ((s_star - step).max(a), (s_star + step).min(b));
        // golden-section refinement
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if self.v_s(m1) < self.v_s(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        s_star = 0.5 * (lo + hi);
        let scale = (self.radial.psi(y / v_star).unwrap_or(1.0) * v_star / y).sqrt();
        let mut ladder = Vec::new();
        let mut d = 0.25;
        while d > 1e-4 * scale.min(1.0) && ladder.len() < 400 {
            ladder.extend([s_star - d, s_star + d]);
            d *= 0.5;
        }
        ladder.push(s_star);
        let pts = self.scan_grid(&ladder);
        let mut breaks = self.base_breaks();
        breaks.extend(ladder.iter().copied());
        breaks.extend(roots_on(|s| self.v_s(s), &pts));
        let v = self.integrate_offsets(integrand, breaks)?;
        Ok(log_ref + v.ln())
    }

    /// `b_X(t)`: solves `P(X > x) = 1/t`.
    pub fn quantile_x(&self, t: f64) -> Result<f64> {
        self.solve_tail(t, |x| self.log_survival_x(x))
    }

    /// `b_Y(t)`: solves `P(Y > y) = 1/t`.
    pub fn quantile_y(&self, t: f64) -> Result<f64> {
        self.solve_tail(t, |y| self.log_survival_y(y))
    }

    fn solve_tail<F: Fn(f64) -> Result<f64>>(&self, t: f64, log_sf: F) -> Result<f64> {
        if !(t > 1.0) {
            return Err(Error::domain(format!("tail level needs t > 1, got {t}")));
        }
        let target = -t.ln();
        let mut hi = self.radial.quantile_b(t)?.max(1e-3);
        while log_sf(hi)? > target {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::domain("tail quantile diverged"));
            }
        }
        let mut lo = 0.5 * hi;
        while lo > 1e-12 && log_sf(lo)? <= target {
            hi = lo;
            lo *= 0.5;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if log_sf(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
