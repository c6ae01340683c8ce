//! Bessel functions of the first kind of orders zero and one, and the
//! positive zeros of `J0`.
//!
//! Small arguments use the ascending power series, large arguments the
//! Hankel asymptotic expansion. The crossover at `x = 12` keeps both branches
//! accurate to about `1e-12` absolute.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 12.0;

/// Ascending series `sum_k (-1)^k (x/2)^(2k+nu) / (k! (k+nu)!)`.
fn power_series(nu: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = half.powi(nu as i32) / (1..=nu).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200u32 {
        term *= q / (f64::from(k) * f64::from(k + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Hankel expansion `sqrt(2/(pi x)) (P cos chi - Q sin chi)` with
/// `chi = x - (nu/2 + 1/4) pi`, summed up to the smallest term.
fn hankel(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * f64::from(nu * nu);
    let mut p = 0.0;
    let mut q = 0.0;
    // a_k = prod_{i=1..k} (mu - (2i-1)^2) / (k! 8^k x^k)
    let mut a = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 0..60u32 {
        if k > 0 {
            let odd = f64::from(2 * k - 1);
            a *= (mu - odd * odd) / (f64::from(k) * 8.0 * x);
        }
        if a.abs() > last || a == 0.0 {
            break;
        }
        last = a.abs();
        match k % 4 {
            0 => p += a,
            1 => q += a,
            2 => p -= a,
            _ => q -= a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * f64::from(nu) + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn eval(nu: u32, x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        power_series(nu, ax)
    } else {
        hankel(nu, ax)
    };
    if nu % 2 == 1 && x < 0.0 {
        -v
    } else {
        v
    }
}

pub fn j0(x: f64) -> f64 {
    eval(0, x)
}

pub fn j1(x: f64) -> f64 {
    eval(1, x)
}

/// McMahon's expansion of the n-th zero (1-based) of `J0`.
fn mcmahon_guess(n: usize) -> f64 {
    let beta = (n as f64 - 0.25) * PI;
    let b8 = 8.0 * beta;
    beta + 1.0 / b8 - 124.0 / (3.0 * b8.powi(3)) + 120_928.0 / (15.0 * b8.powi(5))
}

/// First `count` positive zeros of `J0`, each by bracketed bisection around
/// McMahon's estimate.
pub fn j0_zeros(count: usize) -> Result<Vec<f64>> {
    let mut zeros = Vec::with_capacity(count);
    for n in 1..=count {
        let guess = mcmahon_guess(n);
        // consecutive zeros are about pi apart
        let (mut lo, mut hi) = (guess - FRAC_PI_4, guess + FRAC_PI_4);
        let (mut flo, fhi) = (j0(lo), j0(hi));
        if flo * fhi >= 0.0 {
            return Err(Error::Bracket(format!(
                "J0 has no sign change around zero #{n} ({lo}, {hi})"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = j0(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        zeros.push(0.5 * (lo + hi));
    }
    Ok(zeros)
}
