//! Small statistical helpers: sample means with standard errors,
//! compensated summation and the goodness-of-fit tests used by the checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut k = Kahan::default();
    for x in xs {
        k.add(x);
    }
    k.total()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = xs.len();
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let var = if n > 1 {
            compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        Ok(Self {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        })
    }

    /// Signed distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.se > 0.0 {
            (self.mean - target) / self.se
        } else if self.mean == target {
            0.0
        } else {
            f64::INFINITY.copysign(self.mean - target)
        }
    }

    /// True if `|mean - target| <= k se + slack`.
    pub fn agrees(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + slack
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic critical value of [`ks_two_sample`] at level `alpha`.
pub fn ks_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-0.5 * (0.5 * alpha).ln()).sqrt();
    let (na, nb) = (na as f64, nb as f64);
    c * ((na + nb) / (na * nb)).sqrt()
}

/// Pearson statistic for equiprobable bins, and the `1 - alpha` quantile of
/// the chi-squared law with `bins - 1` degrees of freedom.
pub fn chi_square_uniform(counts: &[usize], alpha: f64) -> Result<(f64, f64)> {
    let total: usize = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return Err(Error::EmptySample);
    }
    let expect = total as f64 / counts.len() as f64;
    let stat = counts
        .iter()
        .map(|&c| (c as f64 - expect).powi(2) / expect)
        .sum();
    let law = ChiSquared::new((counts.len() - 1) as f64)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((stat, law.inverse_cdf(1.0 - alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant() {
        let e = Estimate::from_samples(&[2.0; 10]).unwrap();
        assert_eq!((e.mean, e.se, e.n), (2.0, 0.0, 10));
        assert_eq!(e.z_score(2.0), 0.0);
        assert!(Estimate::from_samples(&[]).is_err());
    }

    #[test]
    fn estimate_known_variance() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.mean, 2.5);
        assert!((e.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
        assert!((ks_critical(0.01, 10_000, 10_000) - 1.6276 * (2e-4f64).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn chi_square_quantile() {
        let (stat, crit) = chi_square_uniform(&[10; 36], 0.01).unwrap();
        assert_eq!(stat, 0.0);
        assert!((crit - 57.342).abs() < 1e-2);
    }
}
