//! Globally adaptive Gauss–Kronrod (G10/K21) quadrature.
//!
//! An integral is described as a list of [`Panel`]s. Each panel carries its
//! own change of variables so that integrable endpoint singularities of the
//! form `(x - a)^τ`, `τ > -1`, and semi-infinite ranges are mapped to smooth
//! integrands on a finite parameter interval. All panels share one error
//! budget: the segment with the largest error estimate is bisected until the
//! total estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_617_413,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-300,
            rel_tol: 1e-10,
            max_segments: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub segments: usize,
}

/// One piece of an integration range together with its change of variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Panel {
    /// Plain `[a, b]`.
    Finite { a: f64, b: f64 },
    /// `[a, b]` with an integrable singularity `~ (x - a)^power` at `a`.
    SingularLeft { a: f64, b: f64, power: f64 },
    /// `[a, b]` with an integrable singularity `~ (b - x)^power` at `b`.
    SingularRight { a: f64, b: f64, power: f64 },
    /// `[a, ∞)`.
    UpperInfinite { a: f64 },
}

impl Panel {
    /// Panel for `[a, b]` that is singular at `a` only if `power < 0`.
    pub fn left(a: f64, b: f64, power: f64) -> Panel {
        if power < 0.0 {
            Panel::SingularLeft { a, b, power }
        } else {
            Panel::Finite { a, b }
        }
    }

    pub fn right(a: f64, b: f64, power: f64) -> Panel {
        if power < 0.0 {
            Panel::SingularRight { a, b, power }
        } else {
            Panel::Finite { a, b }
        }
    }

    fn parameter_range(&self) -> (f64, f64) {
        match *self {
            Panel::Finite { a, b } => (a, b),
            _ => (0.0, 1.0),
        }
    }

    /// Maps a parameter value to `(x, dx/ds)`.
    #[inline]
    fn map(&self, s: f64) -> (f64, f64) {
        match *self {
            Panel::Finite { .. } => (s, 1.0),
            Panel::SingularLeft { a, b, power } => {
                let k = 1.0 / (1.0 + power);
                let w = b - a;
                let x = a + w * s.powf(k);
                // rounded onto the singular endpoint: the weight is zero there
                let jac = if x == a { 0.0 } else { w * k * s.powf(k - 1.0) };
                (x, jac)
            }
            Panel::SingularRight { a, b, power } => {
                let k = 1.0 / (1.0 + power);
                let w = b - a;
                let x = b - w * s.powf(k);
                let jac = if x == b { 0.0 } else { w * k * s.powf(k - 1.0) };
                (x, jac)
            }
            Panel::UpperInfinite { a } => {
                let r = 1.0 - s;
                (a + s / r, 1.0 / (r * r))
            }
        }
    }

    fn is_empty(&self) -> bool {
        match *self {
            Panel::Finite { a, b } | Panel::SingularLeft { a, b, .. } | Panel::SingularRight { a, b, .. } => !(b > a),
            Panel::UpperInfinite { a } => a == f64::INFINITY,
        }
    }
}

struct Segment {
    panel: usize,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, panel: &Panel, lo: f64, hi: f64) -> Result<(f64, f64, f64)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |s: f64| -> Result<f64> {
        let (x, jac) = panel.map(s);
        if jac == 0.0 || !jac.is_finite() {
            // parameter endpoint rounding; the weight vanishes there
            return Ok(0.0);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(0.0);
        }
        let v = fx * jac;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { at: x })
        }
    };

    let fc = eval(center)?;
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for (j, wg) in WG.iter().enumerate() {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        resg += wg * (f1 + f2);
        resk += WGK[jtw] * (f1 + f2);
        resabs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        resk += WGK[jtwm1] * (f1 + f2);
        resabs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let result = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((result, err, resabs))
}

/// Integrates `f` over the union of `panels`.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, panels: &[Panel], opts: QuadOptions) -> Result<Integral> {
    let panels: Vec<Panel> = panels.iter().copied().filter(|p| !p.is_empty()).collect();
    let mut heap = BinaryHeap::new();
    let mut frozen = (0.0, 0.0, 0.0);
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut total_abs = 0.0;
    for (i, p) in panels.iter().enumerate() {
        let (lo, hi) = p.parameter_range();
        let (value, error, abs) = kronrod(&f, p, lo, hi)?;
        total += value;
        total_err += error;
        total_abs += abs;
        heap.push(Segment {
            panel: i,
            lo,
            hi,
            value,
            error,
            abs,
        });
    }
    // below this the estimate is dominated by rounding in the sums
    let roundoff = |abs: f64| 100.0 * f64::EPSILON * abs;
    let mut count = heap.len();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs()).max(roundoff(total_abs));
        if total_err <= tol {
            break;
        }
        let Some(seg) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (seg.lo + seg.hi);
        if count >= opts.max_segments || !(mid > seg.lo && mid < seg.hi) {
            heap.push(seg);
            break;
        }
        let panel = &panels[seg.panel];
        let (v1, e1, a1) = kronrod(&f, panel, seg.lo, mid)?;
        let (v2, e2, a2) = kronrod(&f, panel, mid, seg.hi)?;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        total_abs += a1 + a2 - seg.abs;
        count += 1;
        for (lo, hi, value, error, abs) in [(seg.lo, mid, v1, e1, a1), (mid, seg.hi, v2, e2, a2)] {
            if (hi - lo) <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                frozen.0 += value;
                frozen.1 += error;
                frozen.2 += abs;
            } else {
                heap.push(Segment {
                    panel: seg.panel,
                    lo,
                    hi,
                    value,
                    error,
                    abs,
                });
            }
        }
        // resum occasionally to shed accumulated rounding in the running totals
        if count % 256 == 0 {
            total = frozen.0 + heap.iter().map(|s| s.value).sum::<f64>();
            total_err = frozen.1 + heap.iter().map(|s| s.error).sum::<f64>();
            total_abs = frozen.2 + heap.iter().map(|s| s.abs).sum::<f64>();
        }
    }
    let value = frozen.0 + heap.iter().map(|s| s.value).sum::<f64>();
    let error = frozen.1 + heap.iter().map(|s| s.error).sum::<f64>();
    let abs = frozen.2 + heap.iter().map(|s| s.abs).sum::<f64>();
    let tol = opts.abs_tol.max(opts.rel_tol * value.abs()).max(roundoff(abs));
    if error <= tol {
        Ok(Integral {
            value,
            error,
            segments: count,
        })
    } else {
        Err(Error::Quadrature {
            achieved: error,
            requested: tol,
        })
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Integral> {
    integrate_panels(f, &[Panel::Finite { a, b }], opts)
}

/// Integrates `f` over `[a, b]` split at the interior `breaks`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<Integral> {
    let panels: Vec<Panel> = split_points(a, b, breaks)
        .windows(2)
        .map(|w| Panel::Finite { a: w[0], b: w[1] })
        .collect();
    integrate_panels(f, &panels, opts)
}

/// Integrates `f` over `[a, ∞)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, opts: QuadOptions) -> Result<Integral> {
    integrate_panels(f, &[Panel::UpperInfinite { a }], opts)
}

/// Sorted, deduplicated `a`, the breaks strictly inside `(a, b)`, and `b`.
pub fn split_points(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x < b && x.is_finite())
        .collect();
    inner.sort_by(f64::total_cmp);
    for x in inner {
        if x > *pts.last().unwrap() {
            pts.push(x);
        }
    }
    pts.push(b);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_high_degree_polynomials() {
        // K21 integrates degree <= 31 exactly on a single panel
        let f = |x: f64| x.powi(20) - 3.0 * x.powi(7) + 1.0;
        let got = integrate(f, -1.0, 2.0, QuadOptions::default()).unwrap();
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0 + 3.0;
        assert!((got.value - exact).abs() < 1e-12 * exact.abs());
    }

    #[test]
    fn oscillatory_and_peaked() {
        let got = integrate(|x: f64| (50.0 * x).sin(), 0.0, 1.0, QuadOptions::with_rel(1e-12)).unwrap();
        let exact = (1.0 - 50f64.cos()) / 50.0;
        assert!((got.value - exact).abs() < 1e-12);

        let got = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, QuadOptions::with_rel(1e-12)).unwrap();
        let exact = 2.0 * 100.0 * (100f64).atan();
        assert!((got.value / exact - 1.0).abs() < 1e-11);
    }

    #[test]
    fn endpoint_singularity_is_mapped_away() {
        // ∫_0^1 x^{-1/2} dx = 2, ∫_0^1 x^{-0.9} dx = 10
        let opts = QuadOptions::with_rel(1e-12);
        let got = integrate_panels(|x: f64| x.powf(-0.5), &[Panel::left(0.0, 1.0, -0.5)], opts).unwrap();
        assert!((got.value - 2.0).abs() < 1e-12);
        let got = integrate_panels(|x: f64| x.powf(-0.9), &[Panel::left(0.0, 1.0, -0.9)], opts).unwrap();
        assert!((got.value - 10.0).abs() < 1e-10);
        let got = integrate_panels(|x: f64| (1.0 - x).powf(-0.5), &[Panel::right(0.0, 1.0, -0.5)], opts).unwrap();
        assert!((got.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite() {
        let got = integrate_to_infinity(|x: f64| (-x).exp(), 1.0, QuadOptions::with_rel(1e-12)).unwrap();
        assert!((got.value - (-1f64).exp()).abs() < 1e-13);
        let got = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x * x), 0.0, QuadOptions::with_rel(1e-12)).unwrap();
        assert!((got.value - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn breaks_handle_kinks() {
        let f = |x: f64| (x - 0.3).abs() + if x > 0.7 { 1.0 } else { 0.0 };
        let got = integrate_with_breaks(f, 0.0, 1.0, &[0.3, 0.7], QuadOptions::with_rel(1e-13)).unwrap();
        let exact = 0.3 * 0.3 / 2.0 + 0.7 * 0.7 / 2.0 + 0.3;
        assert!((got.value - exact).abs() < 1e-14);
    }

    #[test]
    fn non_convergence_reports_achieved_error() {
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-15,
            max_segments: 3,
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, opts).unwrap_err();
        match err {
            Error::Quadrature { achieved, requested } => assert!(achieved > requested),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let err = integrate(|_| f64::NAN, 0.0, 1.0, QuadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn zero_integrand_converges() {
        let got = integrate(|_| 0.0, 0.0, 1.0, QuadOptions::default()).unwrap();
        assert_eq!(got.value, 0.0);
    }
}
