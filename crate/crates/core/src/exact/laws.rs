//! Exit-time laws with spectral survival series: the unit disc, intervals
//! (vertical strips), and axis-aligned rectangles.
//!
//! Brownian motion here has generator `Δ/2`, i.e. unit variance per unit time
//! in each coordinate, so `|Z_t|^2 - 2t` is a martingale and the unit disc has
//! mean exit time `1/2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::bessel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    /// Number of terms: Bessel zeros for the disc, odd modes for intervals,
    /// outer terms for the strip double series.
    pub n_terms: usize,
    pub tail_tol: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            n_terms: 400,
            tail_tol: 1e-10,
        }
    }
}

impl SeriesConfig {
    pub fn new(n_terms: usize, tail_tol: f64) -> Result<Self> {
        if n_terms == 0 || !(tail_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "series config needs n_terms > 0 and tail_tol > 0".into(),
            ));
        }
        Ok(Self { n_terms, tail_tol })
    }

    pub fn doubled(self) -> Self {
        Self {
            n_terms: self.n_terms * 2,
            ..self
        }
    }
}

/// A truncated series value together with a bound on what was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub value: f64,
    pub truncation_bound: f64,
    /// Set when the value came from a short-time representation instead of
    /// the eigenfunction series.
    #[serde(default)]
    pub short_time: bool,
}

impl Evaluated {
    fn spectral(value: f64, truncation_bound: f64) -> Self {
        Self {
            value,
            truncation_bound,
            short_time: false,
        }
    }
}

/// A continuous law on `(0, inf)` described through its survival function.
pub trait ExitTimeLaw: Sync {
    fn survival(&self, t: f64) -> f64;
    fn density(&self, t: f64) -> f64;
    /// Smallest Dirichlet eigenvalue: the survival function decays like
    /// `exp(-rate t)`.
    fn leading_rate(&self) -> f64;
    fn mean(&self) -> f64;
}

/// Dirichlet eigen-expansion of the unit-disc exit time,
/// `P(tau > t) = sum_n 2 / (j_n J1(j_n)) exp(-j_n^2 t / 2)`.
#[derive(Debug, Clone)]
pub struct DiscExitLaw {
    zeros: Vec<f64>,
    coeffs: Vec<f64>,
    rates: Vec<f64>,
    cfg: SeriesConfig,
}

impl DiscExitLaw {
    pub fn new(cfg: SeriesConfig) -> Result<Self> {
        // Two extra zeros feed the remainder bound.
        let zeros = bessel::j0_zeros(cfg.n_terms + 2)?;
        let coeffs = zeros.iter().map(|&j| 2.0 / (j * bessel::j1(j))).collect();
        let rates = zeros.iter().map(|&j| 0.5 * j * j).collect();
        Ok(Self {
            zeros,
            coeffs,
            rates,
            cfg,
        })
    }

    /// First `n_terms` positive zeros of `J0`.
    pub fn bessel_zeros(&self) -> &[f64] {
        &self.zeros[..self.cfg.n_terms]
    }

    pub fn config(&self) -> SeriesConfig {
        self.cfg
    }

    /// Survival with an explicit bound on the truncated tail. Once the
    /// eigen-series bound exceeds the tolerance at small `t`, falls back to
    /// the reflection bound `P(tau <= t) <= 4 erfc(1 / (2 sqrt t))`.
    pub fn survival_checked(&self, t: f64) -> Result<Evaluated> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(Evaluated::spectral(1.0, 0.0));
        }
        let k = self.cfg.n_terms;
        let (value, used) = self.partial_sum(t, |c, _| c);
        let bound = self.remainder_bound(used.min(k), t);
        if bound <= self.cfg.tail_tol {
            return Ok(Evaluated::spectral(value.clamp(0.0, 1.0), bound));
        }
        let short = 4.0 * libm::erfc(0.5 / t.sqrt());
        if short <= self.cfg.tail_tol {
            return Ok(Evaluated {
                value: 1.0,
                truncation_bound: short,
                short_time: true,
            });
        }
        Err(Error::Truncation {
            quantity: "disc_survival",
            bound: bound.min(short),
            tol: self.cfg.tail_tol,
        })
    }

    /// Sums up to `n_terms` terms, stopping once the remaining tail is
    /// negligible. Returns the sum and the number of terms used.
    fn partial_sum(&self, t: f64, weight: impl Fn(f64, f64) -> f64) -> (f64, usize) {
        let k = self.cfg.n_terms;
        let mut sum = 0.0;
        for n in 0..k {
            let e = (-self.rates[n] * t).exp();
            sum += weight(self.coeffs[n], self.rates[n]) * e;
            if e < 1e-18 && n + 2 < self.rates.len() && self.remainder_bound(n + 1, t) < 1e-18 {
                return (sum, n + 1);
            }
        }
        (sum, k)
    }

    /// Bound on `sum_{n >= used} |c_n| exp(-rate_n t)`. Coefficient magnitudes
    /// decrease and rate gaps increase, so a geometric series dominates.
    fn remainder_bound(&self, used: usize, t: f64) -> f64 {
        let first = self.coeffs[used].abs() * (-self.rates[used] * t).exp();
        let ratio = (-(self.rates[used + 1] - self.rates[used]) * t).exp();
        if ratio >= 1.0 {
            f64::INFINITY
        } else {
            first / (1.0 - ratio)
        }
    }
}

impl ExitTimeLaw for DiscExitLaw {
    fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if t < 2e-3 {
            // eigen-series is slow here and the exit probability is below 1e-50
            return 1.0;
        }
        self.partial_sum(t, |c, _| c).0.clamp(0.0, 1.0)
    }

    fn density(&self, t: f64) -> f64 {
        if t < 2e-3 {
            return 0.0;
        }
        self.partial_sum(t, |c, r| c * r).0.max(0.0)
    }

    fn leading_rate(&self) -> f64 {
        self.rates[0]
    }

    fn mean(&self) -> f64 {
        0.5
    }
}

/// `P(tau_D > t)` for the unit disc.
pub fn disc_survival(t: f64, cfg: SeriesConfig) -> Result<Evaluated> {
    DiscExitLaw::new(cfg)?.survival_checked(t)
}

/// Exit time of one-dimensional Brownian motion from `(lo, hi)`, started at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalExitLaw {
    lo: f64,
    hi: f64,
    n_terms: usize,
    tail_tol: f64,
}

impl IntervalExitLaw {
    pub fn new(lo: f64, hi: f64, cfg: SeriesConfig) -> Result<Self> {
        if !(lo < 0.0 && 0.0 < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "interval must satisfy lo < 0 < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self {
            lo,
            hi,
            n_terms: cfg.n_terms,
            tail_tol: cfg.tail_tol,
        })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Relative position of the start point, `-lo / (hi - lo)`.
    pub fn alpha(&self) -> f64 {
        -self.lo / self.width()
    }

    fn rate_unit(&self) -> f64 {
        PI * PI / (2.0 * self.width() * self.width())
    }

    /// Odd-mode eigen-series
    /// `(4/pi) sum_n sin(k pi alpha) / k exp(-k^2 pi^2 t / (2 l^2))`, k = 2n+1,
    /// truncated at `n_terms` modes, with the dropped tail bounded by a
    /// geometric series.
    pub fn survival_spectral(&self, t: f64) -> Evaluated {
        let c = self.rate_unit();
        let x = PI * self.alpha();
        let mut sum = 0.0;
        let mut used = self.n_terms;
        for n in 0..self.n_terms {
            let k = (2 * n + 1) as f64;
            let e = (-k * k * c * t).exp();
            sum += (k * x).sin() / k * e;
            if e < 1e-19 {
                used = n + 1;
                break;
            }
        }
        let k0 = (2 * used + 1) as f64;
        let ratio = (-(8.0 * used as f64 + 8.0) * c * t).exp();
        let bound = if ratio < 1.0 {
            4.0 / PI * (-k0 * k0 * c * t).exp() / (k0 * (1.0 - ratio))
        } else {
            f64::INFINITY
        };
        Evaluated::spectral(4.0 / PI * sum, bound)
    }

    /// Method-of-images representation, fast for `t` small against `l^2`.
    pub fn survival_images(&self, t: f64) -> Evaluated {
        let l = self.width();
        let x = -self.lo;
        let s = (2.0 * t).sqrt();
        // Phi(u) - Phi(v) through erfc for accuracy in the far tails.
        let band = |u: f64, v: f64| 0.5 * (libm::erfc(-u / s) - libm::erfc(-v / s));
        let mut sum = 0.0;
        let mut bound = 0.0;
        for n in 0..200i32 {
            let mut add = 0.0;
            for m in if n == 0 { vec![0] } else { vec![n, -n] } {
                let shift = 2.0 * f64::from(m) * l;
                add += band(l - x + shift, -x + shift) - band(l + x + shift, x + shift);
            }
            sum += add;
            // the next shells sit at least 2 n l - l away from the window
            let reach = (2.0 * f64::from(n + 1) - 1.0) * l;
            bound = 2.0 * libm::erfc(reach / s);
            if n > 0 && bound < 1e-18 {
                break;
            }
        }
        Evaluated {
            value: sum.clamp(0.0, 1.0),
            truncation_bound: bound,
            short_time: true,
        }
    }

    pub fn survival_checked(&self, t: f64) -> Result<Evaluated> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(Evaluated::spectral(1.0, 0.0));
        }
        // Short times: the image sum needs a couple of shells, while the
        // eigen-series needs many terms and leaves rounding noise near 1.
        if t <= 0.1 * self.width() * self.width() {
            let images = self.survival_images(t);
            if images.truncation_bound <= self.tail_tol {
                return Ok(images);
            }
        }
        let spectral = self.survival_spectral(t);
        if spectral.truncation_bound <= self.tail_tol {
            return Ok(Evaluated {
                value: spectral.value.clamp(0.0, 1.0),
                ..spectral
            });
        }
        let images = self.survival_images(t);
        if images.truncation_bound <= self.tail_tol {
            return Ok(images);
        }
        Err(Error::Truncation {
            quantity: "strip_survival",
            bound: spectral.truncation_bound.min(images.truncation_bound),
            tol: self.tail_tol,
        })
    }
}

impl ExitTimeLaw for IntervalExitLaw {
    fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let l = self.width();
        if t < 0.1 * l * l {
            self.survival_images(t).value
        } else {
            self.survival_spectral(t).value.clamp(0.0, 1.0)
        }
    }

    fn density(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let l = self.width();
        if t < 0.1 * l * l {
            return interval_density_images(-self.lo, l, t).max(0.0);
        }
        let c = self.rate_unit();
        let x = PI * self.alpha();
        let mut sum = 0.0;
        for n in 0..self.n_terms {
            let k = (2 * n + 1) as f64;
            let e = (-k * k * c * t).exp();
            sum += (k * x).sin() * k * c * e;
            if e < 1e-19 {
                break;
            }
        }
        (4.0 / PI * sum).max(0.0)
    }

    fn leading_rate(&self) -> f64 {
        self.rate_unit()
    }

    fn mean(&self) -> f64 {
        -self.lo * self.hi
    }
}

/// First-exit density from `(0, l)` started at `x`, by images:
/// `sum_n [g(x + 2nl) + g(l - x + 2nl)]` with `g(d) = d / sqrt(2 pi t^3) exp(-d^2/2t)`
/// summed over the signed image lattice.
fn interval_density_images(x: f64, l: f64, t: f64) -> f64 {
    let g = |d: f64| d / (2.0 * PI * t.powi(3)).sqrt() * (-d * d / (2.0 * t)).exp();
    let mut sum = 0.0;
    for n in -20i32..=20 {
        let shift = 2.0 * f64::from(n) * l;
        sum += g(x + shift) + g(l - x + shift);
    }
    sum
}

/// Product law of two independent interval exit times: the exit time of an
/// axis-aligned rectangle.
#[derive(Debug, Clone, Copy)]
pub struct RectangleExitLaw {
    pub x: IntervalExitLaw,
    pub y: IntervalExitLaw,
}

impl RectangleExitLaw {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, cfg: SeriesConfig) -> Result<Self> {
        Ok(Self {
            x: IntervalExitLaw::new(x_lo, x_hi, cfg)?,
            y: IntervalExitLaw::new(y_lo, y_hi, cfg)?,
        })
    }
}

impl ExitTimeLaw for RectangleExitLaw {
    fn survival(&self, t: f64) -> f64 {
        self.x.survival(t) * self.y.survival(t)
    }

    fn density(&self, t: f64) -> f64 {
        self.x.density(t) * self.y.survival(t) + self.x.survival(t) * self.y.density(t)
    }

    fn leading_rate(&self) -> f64 {
        self.x.leading_rate() + self.y.leading_rate()
    }

    fn mean(&self) -> f64 {
        integrate_survival_product(&[self])
    }
}

/// `integral_0^inf prod_i S_i(t) dt` by adaptive Simpson quadrature.
///
/// With one law this is the mean; with two independent laws it is
/// `E(min(theta, theta'))`.
pub fn integrate_survival_product(laws: &[&dyn ExitTimeLaw]) -> f64 {
    let rate: f64 = laws.iter().map(|l| l.leading_rate()).sum();
    let f = |t: f64| laws.iter().map(|l| l.survival(t)).product::<f64>();
    // Each survival is at most ~1.3 exp(-rate t) once past the transient.
    let t_end = (45.0 + 2.0 * laws.len() as f64) / rate;
    let panels = 64;
    let h = t_end / panels as f64;
    (0..panels)
        .map(|i| {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            adaptive_simpson(&f, a, b, 1e-13, 30)
        })
        .sum()
}

pub(crate) fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
