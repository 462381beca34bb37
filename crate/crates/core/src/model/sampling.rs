use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PolarModel;
use crate::error::{Error, Result};

/// Weighted draws from the law of `(X, Y)` given `X > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub pairs: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    pub threshold: f64,
    /// `(Σw)² / Σw²`.
    pub effective_size: f64,
}

impl WeightedSample {
    pub fn empty(threshold: f64) -> Self {
        WeightedSample {
            pairs: Vec::new(),
            weights: Vec::new(),
            threshold,
            effective_size: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Builds a sample from unnormalized log-weights.
    pub fn from_log_weights(threshold: f64, pairs: Vec<(f64, f64)>, log_w: Vec<f64>) -> Result<Self> {
        if pairs.is_empty() {
            return Ok(Self::empty(threshold));
        }
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::DegenerateWeights(format!(
                "all {} importance weights vanish at threshold {threshold}",
                pairs.len()
            )));
        }
        let mut weights: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let sq: f64 = weights.iter().map(|w| w * w).sum();
        Ok(WeightedSample {
            pairs,
            weights,
            threshold,
            effective_size: 1.0 / sq,
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,weight")?;
        for ((x, y), w) in self.pairs.iter().zip(&self.weights) {
            writeln!(out, "{x:?},{y:?},{w:?}")?;
        }
        Ok(())
    }
}

impl PolarModel {
    /// `n` i.i.d. pairs `R (u(T), v(T))`; `R` and `T` use separate streams
    /// split off `rng`.
    pub fn sample_joint<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
        let mut r_rng = ChaCha8Rng::from_seed(rng.random());
        let mut t_rng = ChaCha8Rng::from_seed(rng.random());
        (0..n)
            .map(|_| {
                let r = self.radial.sample_one(&mut r_rng);
                let t = self.angular.sample_one(&mut t_rng);
                (r * self.curve.u(t), r * self.curve.v(t))
            })
            .collect()
    }

    /// Importance sampling of `(X, Y) | X > t`.
    ///
    /// `T` is drawn from `g`, weighted by `S(t/u(T))`, and `R` is drawn from
    /// `R | R > t/u(T)`. Draws with `u(T) ≤ 0` carry no weight and are dropped.
    pub fn sample_conditional<R: Rng + ?Sized>(&self, t: f64, n: usize, rng: &mut R) -> Result<WeightedSample> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("conditioning level must be positive, got {t}")));
        }
        if n == 0 {
            return Ok(WeightedSample::empty(t));
        }
        let mut r_rng = ChaCha8Rng::from_seed(rng.random());
        let mut t_rng = ChaCha8Rng::from_seed(rng.random());
        let mut pairs = Vec::with_capacity(n);
        let mut log_w = Vec::with_capacity(n);
        for _ in 0..n {
            let tt = self.angular.sample_one(&mut t_rng);
            let u = self.curve.u(tt);
            if u <= 0.0 {
                continue;
            }
            let floor = t / u;
            let lw = self.radial.log_survival(floor);
            if lw == f64::NEG_INFINITY {
                continue;
            }
            let mut r = self.radial.sample_above(floor, &mut r_rng);
            while r * u <= t {
                r = r.next_up();
            }
            pairs.push((r * u, r * self.curve.v(tt)));
            log_w.push(lw);
        }
        if pairs.is_empty() {
            return Err(Error::DegenerateWeights(format!(
                "none of {n} angular draws can exceed threshold {t}"
            )));
        }
        WeightedSample::from_log_weights(t, pairs, log_w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{elliptical_curve, AngularLaw};
    use crate::radial::RadialLaw;
    use crate::special::normal_cdf;

    fn gaussian(rho: f64) -> PolarModel {
        PolarModel::new(
            RadialLaw::rayleigh(),
            AngularLaw::uniform(),
            elliptical_curve(rho).unwrap(),
        )
        .unwrap()
    }

    fn moments(xy: &[(f64, f64)]) -> (f64, f64, f64) {
        let n = xy.len() as f64;
        let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
        let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
        let vx = xy.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>() / n;
        let vy = xy.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>() / n;
        let cxy = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / n;
        (vx, vy, cxy / (vx * vy).sqrt())
    }

    #[test]
    fn joint_sampling_is_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(gaussian(0.0).sample_joint(0, &mut rng).is_empty());
        let xy = gaussian(0.0).sample_joint(1_000_000, &mut rng);
        let (vx, vy, c) = moments(&xy);
        assert!((vx - 1.0).abs() < 0.01 && (vy - 1.0).abs() < 0.01);
        assert!(c.abs() < 0.005);
        let xy = gaussian(0.6).sample_joint(1_000_000, &mut rng);
        assert!((moments(&xy).2 - 0.6).abs() < 0.01);
        let a = gaussian(0.6).sample_joint(100, &mut ChaCha8Rng::seed_from_u64(5));
        let b = gaussian(0.6).sample_joint(100, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn conditional_sample_matches_independent_gaussian() {
        let m = gaussian(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(m.sample_conditional(4.0, 0, &mut rng).unwrap().is_empty());
        let s = m.sample_conditional(4.0, 100_000, &mut rng).unwrap();
        assert!(s.pairs.iter().all(|p| p.0 > 4.0));
        assert!(s.effective_size >= 1e4, "{}", s.effective_size);
        assert!(s.max_weight() < 0.01);
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // weighted KS distance of Y against Φ
        let mut ys: Vec<(f64, f64)> = s.pairs.iter().map(|p| p.1).zip(s.weights.iter().copied()).collect();
        ys.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let mut ks: f64 = 0.0;
        for (y, w) in ys {
            let f = normal_cdf(y);
            ks = ks.max((f - acc).abs());
            acc += w;
            ks = ks.max((f - acc).abs());
        }
        assert!(ks < 0.01, "{ks}");
    }

    #[test]
    fn deep_threshold_stays_exact() {
        let m = gaussian(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = m.sample_conditional(60.0, 1000, &mut rng).unwrap();
        assert!(s.pairs.iter().all(|p| p.0 > 60.0));
        assert!(s.effective_size > 1.0);
    }

    #[test]
    fn csv_output() {
        let s = WeightedSample::from_log_weights(1.0, vec![(2.0, 0.5), (3.0, -1.0)], vec![0.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "x,y,weight\n2.0,0.5,0.5\n3.0,-1.0,0.5\n"
        );
        assert!(WeightedSample::from_log_weights(1.0, vec![(2.0, 0.0)], vec![f64::NEG_INFINITY]).is_err());
    }
}
