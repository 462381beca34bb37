//! Empirical and oracle checks of the conditional limit theory.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AngularLaw;
use crate::limits::{limit_law_of, normalization, ConditionalFrame, LimitLaw};
use crate::model::{PolarModel, WeightedSample};
use crate::quad::{integrate_panels, Panel, QuadOptions};
use crate::radial::RadialLaw;
use crate::special::upper_gamma;

/// Right-continuous weighted step function.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    jumps: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    /// From unnormalized `(point, weight)` pairs.
    pub fn from_weighted(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.retain(|p| p.1 > 0.0);
        let total: f64 = points.iter().map(|p| p.1).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateWeights("step function has zero total weight".into()));
        }
        if points.iter().any(|p| p.0.is_nan()) {
            return Err(Error::domain("step function point is NaN"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut jumps: Vec<f64> = Vec::with_capacity(points.len());
        let mut levels: Vec<f64> = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (y, w) in points {
            acc += w / total;
            if jumps.last() == Some(&y) {
                *levels.last_mut().unwrap() = acc;
            } else {
                jumps.push(y);
                levels.push(acc);
            }
        }
        *levels.last_mut().unwrap() = 1.0;
        Ok(StepFunction { jumps, levels })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let k = self.jumps.partition_point(|&j| j <= y);
        if k == 0 {
            0.0
        } else {
            self.levels[k - 1]
        }
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// Step function of the standardized `(y − m_t)/a_t` under the sample weights.
pub fn empirical_conditional_cdf(sample: &WeightedSample, frame: &ConditionalFrame) -> Result<StepFunction> {
    if sample.is_empty() {
        return Err(Error::domain("empirical CDF of an empty sample"));
    }
    let pts = sample
        .pairs
        .iter()
        .zip(&sample.weights)
        .map(|(p, &w)| ((p.1 - frame.m_t) / frame.a_t, w))
        .collect();
    StepFunction::from_weighted(pts)
}

/// `sup |F̂ − F|` over both sides of every jump.
pub fn ks_distance_to<F: Fn(f64) -> f64>(emp: &StepFunction, cdf: F) -> f64 {
    let mut before = 0.0;
    let mut worst: f64 = 0.0;
    for (&y, &after) in emp.jumps.iter().zip(&emp.levels) {
        let f = cdf(y);
        worst = worst.max((f - before).abs()).max((f - after).abs());
        before = after;
    }
    worst
}

pub fn ks_distance(emp: &StepFunction, law: &LimitLaw) -> f64 {
    ks_distance_to(emp, |y| law.cdf(y))
}

/// Standardized points at which the oracle is compared with `(1 − e^{−x}) H(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid {
            x: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            y: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
        }
    }
}

/// Largest gap between the oracle conditional CDF at `frame` and the limit.
pub fn oracle_distance(model: &PolarModel, frame: &ConditionalFrame, law: &LimitLaw, grid: &OracleGrid) -> Result<f64> {
    let cells: Vec<(f64, f64)> = grid
        .x
        .iter()
        .flat_map(|&x| grid.y.iter().map(move |&y| (x, y)))
        .collect();
    let gaps = cells
        .par_iter()
        .map(|&(x, y)| {
            let exact = model.conditional_cdf(frame, x, y)?;
            Ok((exact - (1.0 - (-x).exp()) * law.cdf(y)).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub levels: Vec<f64>,
    pub thresholds: Vec<f64>,
    #[serde(rename = "ks")]
    pub ks_distances: Vec<f64>,
    #[serde(rename = "eff_size")]
    pub effective_sizes: Vec<f64>,
    #[serde(rename = "oracle_dist")]
    pub oracle_distances: Vec<Option<f64>>,
    /// Oracle distances strictly decrease.
    pub pass: bool,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "level,threshold,ks,eff_size,oracle_dist")?;
        for i in 0..self.thresholds.len() {
            let o = self.oracle_distances[i].map(|v| format!("{v:?}")).unwrap_or_default();
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{}",
                self.levels[i], self.thresholds[i], self.ks_distances[i], self.effective_sizes[i], o
            )?;
        }
        Ok(())
    }
}

/// Generator for sweep level `index`: one ChaCha stream per level.
pub fn level_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// For each level `q`, the threshold `t = b(1/(1−q))`, the KS distance of
/// a conditional sample to the limit law, and the oracle grid distance.
pub fn convergence_sweep(
    model: &PolarModel,
    levels: &[f64],
    n: usize,
    seed: u64,
    grid: Option<&OracleGrid>,
) -> Result<SweepReport> {
    if levels.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
        return Err(Error::domain("sweep levels must lie in (0, 1)"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("sweep levels must be strictly increasing"));
    }
    let law = limit_law_of(model)?;
    let rows = levels
        .par_iter()
        .enumerate()
        .map(|(i, &q)| {
            let t = model.radial.quantile_b(1.0 / (1.0 - q))?;
            let frame = normalization(model, t)?;
            let sample = model.sample_conditional(t, n, &mut level_rng(seed, i))?;
            let ks = if sample.is_empty() {
                f64::NAN
            } else {
                ks_distance(&empirical_conditional_cdf(&sample, &frame)?, &law)
            };
            let oracle = grid.map(|g| oracle_distance(model, &frame, &law, g)).transpose()?;
            Ok((t, ks, sample.effective_size, oracle))
        })
        .collect::<Result<Vec<_>>>()?;
    let oracle_distances: Vec<Option<f64>> = rows.iter().map(|r| r.3).collect();
    let pass = grid.is_some()
        && oracle_distances
            .windows(2)
            .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a));
    Ok(SweepReport {
        levels: levels.to_vec(),
        thresholds: rows.iter().map(|r| r.0).collect(),
        ks_distances: rows.iter().map(|r| r.1).collect(),
        effective_sizes: rows.iter().map(|r| r.2).collect(),
        oracle_distances,
        pass,
    })
}

/// A diagnostic sequence over a threshold grid with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub pass: bool,
}

impl GridReport {
    pub fn write_csv<W: Write>(&self, mut out: W, column: &str) -> Result<()> {
        writeln!(out, "t,{column}")?;
        for (t, v) in self.t_grid.iter().zip(&self.values) {
            writeln!(out, "{t:?},{v:?}")?;
        }
        Ok(())
    }
}

fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 1.0 && t.is_finite())) {
        return Err(Error::domain("t grid must be nonempty with values > 1"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("t grid must be strictly increasing"));
    }
    Ok(())
}

/// Auxiliary function of `v* R`, standing in for that of `Y`.
fn psi_y(model: &PolarModel, y: f64) -> Result<f64> {
    let v = model.curve.v_star();
    Ok(v * model.radial.psi(y / v)?)
}

/// `(b_Y(t) − ρ b_X(t) + ψ_Y(b_Y(t)) y) / a(b_X(t))`, with `b_X` and `b_Y`
/// solved from the oracle marginals. Passes when the sequence strictly
/// increases and grows tenfold.
pub fn independence_condition_check(model: &PolarModel, y: f64, t_grid: &[f64]) -> Result<GridReport> {
    check_t_grid(t_grid)?;
    if !y.is_finite() {
        return Err(Error::domain("independence check needs a finite y"));
    }
    let values = t_grid
        .par_iter()
        .map(|&t| {
            let bx = model.quantile_x(t)?;
            let by = model.quantile_y(t)?;
            let frame = normalization(model, bx)?;
            Ok((by - frame.m_t + psi_y(model, by)? * y) / frame.a_t)
        })
        .collect::<Result<Vec<f64>>>()?;
    let pass = values.windows(2).all(|w| w[1] > w[0]) && values[values.len() - 1] > 10.0 * values[0];
    Ok(GridReport {
        t_grid: t_grid.to_vec(),
        values,
        pass,
    })
}

/// `t · P(X > b_X + ψ(b_X) x, Y > b_Y + ψ_Y(b_Y) y)`. Passes when the sequence
/// decreases and ends below a tenth of its start.
pub fn joint_exceedance_decay(model: &PolarModel, x_std: f64, y_std: f64, t_grid: &[f64]) -> Result<GridReport> {
    check_t_grid(t_grid)?;
    if !(x_std.is_finite() && y_std.is_finite()) {
        return Err(Error::domain("joint exceedance decay needs finite standardized levels"));
    }
    let values = t_grid
        .par_iter()
        .map(|&t| {
            let bx = model.quantile_x(t)?;
            let by = model.quantile_y(t)?;
            let x = bx + model.radial.psi(bx)? * x_std;
            let y = by + psi_y(model, by)? * y_std;
            Ok((t.ln() + model.log_joint_exceedance(x, y)?).exp())
        })
        .collect::<Result<Vec<f64>>>()?;
    let pass = values.windows(2).all(|w| w[1] < w[0]) && values[values.len() - 1] < 0.1 * values[0];
    Ok(GridReport {
        t_grid: t_grid.to_vec(),
        values,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularIntegralCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl AngularIntegralCheck {
    pub fn relative_error(&self) -> f64 {
        (self.lhs / self.rhs - 1.0).abs()
    }
}

/// `∫_z^∞ [S(x + ψ(x)s)/S(x)] [g(sψ(x)/x)/g(ψ(x)/x)] ds` against `Γ(τ+1, z)`,
/// with `g` the right-hand germ profile of the angular law.
pub fn angular_integral_check(law: &RadialLaw, angular: &AngularLaw, z: f64, x: f64) -> Result<AngularIntegralCheck> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::domain(format!("z must be finite and nonnegative, got {z}")));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("x must be positive, got {x}")));
    }
    let t0 = angular.t0().unwrap_or(0.5);
    let psi = law.psi(x)?;
    let w = psi / x;
    let g_ref = angular.germ_profile(t0, w);
    if !(g_ref > 0.0) {
        return Err(Error::domain("angular germ vanishes at psi(x)/x"));
    }
    let ls_x = law.log_survival(x);
    let f = |s: f64| {
        let l = law.log_survival(x + psi * s) - ls_x;
        if l < -745.0 {
            0.0
        } else {
            l.exp() * angular.germ_profile(t0, s * w) / g_ref
        }
    };
    let tau = angular.tau();
    let opts = QuadOptions::with_rel(1e-12);
    let mut panels = Vec::new();
    let mut a = z;
    if z == 0.0 && tau < 0.0 {
        panels.push(Panel::left(0.0, 1.0, tau));
        a = 1.0;
    }
    // integrate where the integrand is non-negligible, then the remainder
    let mut b = a.max(1.0);
    while f(b) > 1e-16 {
        b *= 2.0;
    }
    let mut knots = vec![a];
    let mut k = a.max(0.5);
    while k < b {
        k *= 2.0;
        knots.push(k.min(b));
    }
    panels.extend(knots.windows(2).map(|p| Panel::Finite { a: p[0], b: p[1] }));
    panels.push(Panel::UpperInfinite { a: b });
    let lhs = integrate_panels(f, &panels, opts)?.value;
    Ok(AngularIntegralCheck {
        lhs,
        rhs: upper_gamma(tau + 1.0, z),
    })
}

/// KS distances to the limit law of `(Y − ρX)/a(t)` and of `(Y − ρX)/a(X)`
/// under one weighted conditional sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomNormalization {
    pub ks_fixed: f64,
    pub ks_random: f64,
    pub effective_size: f64,
}

pub fn random_normalization_ks(model: &PolarModel, t: f64, n: usize, seed: u64) -> Result<RandomNormalization> {
    let law = limit_law_of(model)?;
    let frame = normalization(model, t)?;
    let sample = model.sample_conditional(t, n, &mut level_rng(seed, 0))?;
    if sample.is_empty() {
        return Err(Error::domain("random normalization needs a nonempty sample"));
    }
    let rho = model.curve.rho();
    let mut fixed = Vec::with_capacity(sample.len());
    let mut random = Vec::with_capacity(sample.len());
    for (&(x, y), &w) in sample.pairs.iter().zip(&sample.weights) {
        fixed.push(((y - rho * x) / frame.a_t, w));
        random.push(((y - rho * x) / normalization(model, x)?.a_t, w));
    }
    Ok(RandomNormalization {
        ks_fixed: ks_distance(&StepFunction::from_weighted(fixed)?, &law),
        ks_random: ks_distance(&StepFunction::from_weighted(random)?, &law),
        effective_size: sample.effective_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{elliptical_curve, lp_curve};
    use crate::special::normal_cdf;

    fn elliptical(rho: f64) -> PolarModel {
        PolarModel::new(
            RadialLaw::rayleigh(),
            AngularLaw::uniform(),
            elliptical_curve(rho).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn step_functions() {
        let s = StepFunction::from_weighted(vec![(0.0, 1.0)]).unwrap();
        assert_eq!((s.eval(-1e-12), s.eval(0.0), s.eval(5.0)), (0.0, 1.0, 1.0));
        let s = StepFunction::from_weighted(vec![(1.0, 2.0), (-1.0, 2.0)]).unwrap();
        assert_eq!((s.eval(-2.0), s.eval(0.0), s.eval(1.0)), (0.0, 0.5, 1.0));
        assert!(StepFunction::from_weighted(vec![(1.0, 0.0)]).is_err());
        let law = LimitLaw::new(2.0, 1.0).unwrap();
        let s = StepFunction::from_weighted(vec![(0.0, 1.0)]).unwrap();
        assert_eq!(ks_distance(&s, &law), 0.5);
        assert_eq!(ks_distance(&s, &law), ks_distance(&s, &law));
    }

    #[test]
    fn ks_of_quantile_grid() {
        let law = LimitLaw::new(3.0, 1.0).unwrap();
        let n = 1_000_000;
        let pts = (0..n)
            .map(|i| (law.quantile((i as f64 + 0.5) / n as f64).unwrap(), 1.0))
            .collect();
        let s = StepFunction::from_weighted(pts).unwrap();
        assert!(ks_distance(&s, &law) <= 0.002);
    }

    #[test]
    fn ks_triangle_spot_check() {
        let law = LimitLaw::new(2.0, 1.0).unwrap();
        let other = LimitLaw::new(3.0, 1.0).unwrap();
        let s = StepFunction::from_weighted((0..200).map(|i| (i as f64 / 40.0 - 2.5, 1.0)).collect()).unwrap();
        let sup = s
            .jumps()
            .iter()
            .map(|&y| (other.cdf(y) - law.cdf(y)).abs())
            .fold(0.0, f64::max);
        assert!(ks_distance(&s, &law) <= ks_distance(&s, &other) + sup + 1e-15);
    }

    #[test]
    fn empirical_at_moderate_threshold() {
        let m = elliptical(0.0);
        let frame = normalization(&m, 4.0).unwrap();
        let s = m.sample_conditional(4.0, 100_000, &mut level_rng(11, 0)).unwrap();
        assert!(s.effective_size >= 1e4);
        let emp = empirical_conditional_cdf(&s, &frame).unwrap();
        assert!(ks_distance_to(&emp, normal_cdf) < 0.03);
        assert!(empirical_conditional_cdf(&WeightedSample::empty(4.0), &frame).is_err());
    }

    #[test]
    fn sweep_is_reproducible() {
        let m = elliptical(0.6);
        let grid = OracleGrid {
            x: vec![0.5, 2.0],
            y: vec![-1.0, 0.0, 1.0],
        };
        let levels = [0.99, 0.999, 0.9999];
        let a = convergence_sweep(&m, &levels, 2000, 3, Some(&grid)).unwrap();
        let b = convergence_sweep(&m, &levels, 2000, 3, Some(&grid)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.thresholds.len(), 3);
        assert_eq!(a.ks_distances.len(), 3);
        assert!(a.pass, "{:?}", a.oracle_distances);
        assert!(convergence_sweep(&m, &[0.9, 0.5], 10, 1, None).is_err());
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn independence_for_gaussian() {
        let m = elliptical(0.0);
        let grid = [1e2, 1e3, 1e4, 1e5, 1e6];
        let r = independence_condition_check(&m, 0.0, &grid).unwrap();
        assert!(r.values.windows(2).all(|w| w[1] > w[0]), "{:?}", r.values);
        let d = joint_exceedance_decay(&m, 0.0, 0.0, &grid).unwrap();
        // t P(X > b, Y > b) = P(Y > b) = 1/t for independent margins
        for (t, v) in d.t_grid.iter().zip(&d.values) {
            assert!((v * t - 1.0).abs() < 1e-6, "{t}: {v}");
        }
        assert!(d.pass);
        assert!(joint_exceedance_decay(&m, f64::NEG_INFINITY, 0.0, &grid).is_err());
        assert!(independence_condition_check(&m, 0.0, &[10.0, 5.0]).is_err());
    }

    #[test]
    fn angular_integral_cases() {
        let exp = RadialLaw::exponential(1.0).unwrap();
        let c = angular_integral_check(&exp, &AngularLaw::uniform(), 0.0, 20.0).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-10 && c.rhs == 1.0);
        let ray = RadialLaw::rayleigh();
        let c = angular_integral_check(&ray, &AngularLaw::uniform(), 1.0, 20.0).unwrap();
        assert!((c.rhs - (-1f64).exp()).abs() < 1e-15);
        assert!(c.relative_error() < 0.05);
        let g = AngularLaw::power(0.5, 1.0, 0.5).unwrap();
        let e20 = angular_integral_check(&ray, &g, 0.0, 20.0).unwrap().relative_error();
        let e40 = angular_integral_check(&ray, &g, 0.0, 40.0).unwrap().relative_error();
        assert!(e40 < e20 && e20 < 0.05, "{e20} {e40}");
        let g = AngularLaw::power(0.5, -0.5, 0.5).unwrap();
        let c = angular_integral_check(&exp, &g, 0.0, 1000.0).unwrap();
        assert!(c.relative_error() < 1e-9, "{c:?}");
    }

    #[test]
    fn random_normalization_is_close() {
        let m = PolarModel::new(
            RadialLaw::rayleigh(),
            AngularLaw::uniform(),
            lp_curve(3.0, 0.0).unwrap(),
        )
        .unwrap();
        let t = m.radial.quantile_b(1e6).unwrap();
        let r = random_normalization_ks(&m, t, 50_000, 9).unwrap();
        assert!((r.ks_random - r.ks_fixed).abs() <= 0.03, "{r:?}");
    }
}
