//! Overlapping strips `{-eps < x < L}` and their reflections: survival of
//! the exit time, `E(min(theta, theta'))` for independent copies, the
//! dimensionless `F(rho)` and the coupling transition threshold `F = 3`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::laws::{Evaluated, IntervalExitLaw, SeriesConfig};
use crate::error::{Error, Result};

/// Geometry of the strip `{-eps < x < L}` seen from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSpec {
    /// Distance to the near wall.
    pub eps: f64,
    /// Distance to the far wall.
    pub l: f64,
    /// Width `L + eps`.
    pub ell: f64,
    /// `eps / (L + eps)`.
    pub alpha: f64,
    /// `L / eps`.
    pub rho: f64,
}

impl StripSpec {
    pub fn new(eps: f64, l: f64) -> Result<Self> {
        if !(eps > 0.0 && l > 0.0 && eps.is_finite() && l.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "strip needs eps > 0 and L > 0, got ({eps}, {l})"
            )));
        }
        Ok(Self {
            eps,
            l,
            ell: l + eps,
            alpha: eps / (l + eps),
            rho: l / eps,
        })
    }

    /// The strip `|x - a| < ell / 2`, i.e. `eps = ell/2 - a`, `L = ell/2 + a`.
    pub fn from_translation(ell: f64, a: f64) -> Result<Self> {
        if !(ell > 0.0 && a.abs() < 0.5 * ell) {
            return Err(Error::InvalidParameter(format!(
                "translation {a} must satisfy |a| < ell/2 = {}",
                0.5 * ell
            )));
        }
        Self::new(0.5 * ell - a, 0.5 * ell + a)
    }

    /// Translation offset `a = (ell/2) (rho - 1) / (rho + 1)`.
    pub fn offset(&self) -> f64 {
        0.5 * self.ell * (self.rho - 1.0) / (self.rho + 1.0)
    }

    pub fn law(&self, cfg: SeriesConfig) -> Result<IntervalExitLaw> {
        IntervalExitLaw::new(-self.eps, self.l, cfg)
    }

    /// `E(theta) = eps L`.
    pub fn mean_exit_time(&self) -> f64 {
        self.eps * self.l
    }

    /// `E(tau)` of the overlap `{|x| < eps}`.
    pub fn overlap_mean_exit_time(&self) -> f64 {
        self.eps * self.eps
    }
}

pub fn strip_survival(t: f64, s: &StripSpec, cfg: SeriesConfig) -> Result<Evaluated> {
    s.law(cfg)?.survival_checked(t)
}

/// `sum_{m,n >= 0} sin(a_m x) sin(a_n x) / (a_m a_n (a_m^2 + a_n^2))` with
/// odd `a_k = 2k + 1`, for `0 < x < pi`.
///
/// The inner sum over `n` is carried out in closed form,
/// `sum_n sin(a_n x) / (a_n (a_n^2 + a^2)) = (pi / 4a^2) (1 - cosh(a(pi/2 - x)) / cosh(a pi/2))`,
/// leaving a single series in `m` whose tail is bounded by Abel summation:
/// the weights decrease and partial sums of `sin(a_m x)` stay below
/// `1 / sin x`. The sum is symmetric under `x -> pi - x`, which keeps the
/// exponentials below one.
pub fn odd_double_sum(x: f64, outer_terms: usize) -> Evaluated {
    let x = x.min(PI - x);
    let weight = |a: f64| {
        let ratio = (-a * x).exp() * (1.0 + (-a * (PI - 2.0 * x)).exp()) / (1.0 + (-a * PI).exp());
        0.25 * PI * (1.0 - ratio) / (a * a * a)
    };
    let mut sum = 0.0;
    let mut comp = 0.0;
    for m in 0..outer_terms {
        let a = (2 * m + 1) as f64;
        // Neumaier summation
        let term = (a * x).sin() * weight(a);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    let a_next = (2 * outer_terms + 1) as f64;
    let bound = 2.0 * weight(a_next) / x.sin().abs();
    Evaluated {
        value: sum + comp,
        truncation_bound: bound,
        short_time: false,
    }
}

/// The same double sum truncated at `m, n < terms` on both axes, without any
/// closed form. Slow; used to cross-check [`odd_double_sum`].
pub fn odd_double_sum_direct(x: f64, terms: usize) -> f64 {
    let s: Vec<(f64, f64)> = (0..terms)
        .map(|k| {
            let a = (2 * k + 1) as f64;
            (a, (a * x).sin() / a)
        })
        .collect();
    s.iter()
        .map(|&(am, sm)| sm * s.iter().map(|&(an, sn)| sn / (am * am + an * an)).sum::<f64>())
        .sum()
}

fn checked(quantity: &'static str, scale: f64, e: Evaluated, cfg: SeriesConfig) -> Result<Evaluated> {
    let out = Evaluated {
        value: scale * e.value,
        truncation_bound: scale * e.truncation_bound,
        short_time: false,
    };
    if out.truncation_bound > cfg.tail_tol {
        return Err(Error::Truncation {
            quantity,
            bound: out.truncation_bound,
            tol: cfg.tail_tol,
        });
    }
    Ok(out)
}

/// `E(min(theta, theta'))` for independent exit times of the strip,
/// `(32 ell^2 / pi^4) * odd_double_sum(pi alpha)`.
pub fn strip_min_expectation(s: &StripSpec, cfg: SeriesConfig) -> Result<Evaluated> {
    let scale = 32.0 * s.ell * s.ell / PI.powi(4);
    checked(
        "strip_min_expectation",
        scale,
        odd_double_sum(PI * s.alpha, cfg.n_terms),
        cfg,
    )
}

/// Series configuration for [`f_rho`] and the threshold search: the Abel
/// remainder decays like `M^-3` and grows like `(rho + 1)^3`; `M = 4 * 10^4`
/// outer terms keep it below `1e-10` on the whole threshold bracket.
pub fn default_double_series() -> SeriesConfig {
    SeriesConfig {
        n_terms: 40_000,
        tail_tol: 1e-9,
    }
}

/// `F(rho) = E(min(theta, theta')) / eps^2` as a function of `rho = L / eps`.
pub fn f_rho(rho: f64, cfg: SeriesConfig) -> Result<Evaluated> {
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("F needs rho >= 1, got {rho}")));
    }
    let scale = 32.0 * (rho + 1.0).powi(2) / PI.powi(4);
    checked("F", scale, odd_double_sum(PI / (rho + 1.0), cfg.n_terms), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub ell: f64,
    pub rho_star: f64,
    pub a_star: f64,
    /// `a_star / (ell / 2)`, independent of `ell`.
    pub a_star_ratio: f64,
    /// Overlap width `2 eps* = 2 ell / (rho* + 1)`.
    pub overlap_width: f64,
}

pub const THRESHOLD_BRACKET: (f64, f64) = (2.0, 50.0);

/// Root of `F(rho) = 3` on [`THRESHOLD_BRACKET`] by bisection.
pub fn coupling_threshold(ell: f64, tol: f64, cfg: SeriesConfig) -> Result<Threshold> {
    if !(tol > 0.0) || !(ell > 0.0) {
        return Err(Error::InvalidParameter("threshold needs ell > 0 and tol > 0".into()));
    }
    let g = |rho: f64| f_rho(rho, cfg).map(|e| e.value - 3.0);
    let (mut lo, mut hi) = THRESHOLD_BRACKET;
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if glo * ghi >= 0.0 {
        return Err(Error::Bracket(format!(
            "F - 3 has no sign change on [{lo}, {hi}]: {glo} and {ghi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (g(mid)? < 0.0) == (glo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho_star = 0.5 * (lo + hi);
    let a_star_ratio = (rho_star - 1.0) / (rho_star + 1.0);
    Ok(Threshold {
        ell,
        rho_star,
        a_star: a_star_ratio * 0.5 * ell,
        a_star_ratio,
        overlap_width: 2.0 * ell / (rho_star + 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::laws::integrate_survival_product;

    #[test]
    fn closed_inner_sum_matches_plain_double_series() {
        for rho in [1.0, 2.0, 12.5, 30.0] {
            let x = PI / (rho + 1.0);
            let a = odd_double_sum(x, 20_000).value;
            let b = odd_double_sum_direct(x, 1500);
            // the plain double series truncation error is about 1e-9 here
            assert!((a - b).abs() < 1e-8, "rho={rho}: {a} vs {b}");
        }
    }

    #[test]
    fn f_by_quadrature_of_squared_survival() {
        // Independent route: E(min) = integral of P(theta > t)^2.
        let cfg = SeriesConfig::default();
        for rho in [1.0, 2.0, 3.0, 20.0] {
            let s = StripSpec::new(1.0, rho).unwrap();
            let law = s.law(cfg).unwrap();
            let quad = integrate_survival_product(&[&law, &law]);
            let f = f_rho(rho, default_double_series()).unwrap().value;
            assert!((quad - f).abs() < 1e-7 * f.max(1.0), "rho={rho}: {quad} vs {f}");
        }
    }

    #[test]
    fn f_values() {
        let cfg = default_double_series();
        let f1 = f_rho(1.0, cfg).unwrap().value;
        assert!(f1 < 3.0);
        // square exit time: independent coordinates of the same interval
        assert!((f1 - 0.589_370_826_252).abs() < 1e-9);
        for eps in [0.5, 1.0, 3.0] {
            let s = StripSpec::new(eps, 2.0 * eps).unwrap();
            let direct = strip_min_expectation(&s, cfg).unwrap().value;
            let f2 = f_rho(2.0, cfg).unwrap().value;
            assert!((direct - eps * eps * f2).abs() <= 1e-9 * direct);
            assert!(direct <= s.mean_exit_time());
        }
    }

    #[test]
    fn threshold_values() {
        let th = coupling_threshold(1.0, 1e-9, default_double_series()).unwrap();
        assert!((th.rho_star - 12.5386).abs() < 1e-3, "{}", th.rho_star);
        assert!((th.a_star_ratio - 0.85227).abs() < 1e-4);
        assert!((th.overlap_width - 0.14772).abs() < 1e-4);
        for ell in [2.0, 10.0] {
            let other = coupling_threshold(ell, 1e-9, default_double_series()).unwrap();
            assert!((other.a_star / (0.5 * ell) - th.a_star_ratio).abs() < 1e-6);
        }
    }

    #[test]
    fn spec_from_translation() {
        let s = StripSpec::from_translation(2.0, 0.5).unwrap();
        assert_eq!((s.eps, s.l), (0.5, 1.5));
        assert!((s.offset() - 0.5).abs() < 1e-15);
        assert!(StripSpec::from_translation(2.0, 1.0).is_err());
    }

    #[test]
    fn coarse_series_is_rejected() {
        let cfg = SeriesConfig::new(10, 1e-12).unwrap();
        assert!(matches!(f_rho(12.0, cfg), Err(Error::Truncation { .. })));
    }
}
