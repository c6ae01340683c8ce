//! Closed-form transport costs: scaled domains, the disc integrals driven by
//! the exit-time quantile function, Brownian norm and repulsion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quantile::QuantileTable;
use crate::error::{Error, Result};
use crate::sampler::ExitPair;
use crate::stats::Estimate;

/// `A_p = E|Z_tau|^p`, `M_p = E tau^(p/2)` and `S_p = A_p + M_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub p: f64,
    pub a_p: f64,
    pub m_p: f64,
    pub s_p: f64,
}

fn check_p(p: f64, min: f64) -> Result<()> {
    if !(p >= min) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p must be >= {min}, got {p}")));
    }
    Ok(())
}

impl Moments {
    pub fn new(p: f64, a_p: f64, m_p: f64) -> Result<Self> {
        check_p(p, 1.0)?;
        if !(a_p >= 0.0 && m_p >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "moments must be nonnegative, got A_p={a_p}, M_p={m_p}"
            )));
        }
        Ok(Self {
            p,
            a_p,
            m_p,
            s_p: a_p + m_p,
        })
    }

    /// Unit disc: `A_p = 1` and `M_p = integral Q(r)^(p/2) dr`.
    pub fn disc(p: f64, qt: &QuantileTable) -> Result<Self> {
        Self::new(p, 1.0, qt.integrate(|q| q.powf(0.5 * p)))
    }

    /// Sample moments of a set of exit pairs.
    pub fn from_pairs(p: f64, pairs: &[ExitPair]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = pairs.len() as f64;
        let a = pairs.iter().map(|e| e.position.norm().powf(p)).sum::<f64>() / n;
        let m = pairs.iter().map(|e| e.time.powf(0.5 * p)).sum::<f64>() / n;
        Self::new(p, a, m)
    }

    /// Brownian norm `S_p^(1/p)`.
    pub fn norm(&self) -> f64 {
        self.s_p.powf(1.0 / self.p)
    }
}

/// A cost value that may only be an upper bound for the true optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledCost {
    pub value: f64,
    pub upper_bound: bool,
}

/// `Lambda_p(U, lam U) = (|lam - 1|^p A_p + |lam^2 - 1|^(p/2) M_p)^(1/p)`.
/// Exact for `p >= 2`; for `1 <= p < 2` the result is flagged as an upper
/// bound.
pub fn lambda_scaled(p: f64, lam: f64, m: &Moments) -> Result<ScaledCost> {
    check_p(p, 1.0)?;
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {lam}")));
    }
    let v = (lam - 1.0).abs().powf(p) * m.a_p + (lam * lam - 1.0).abs().powf(0.5 * p) * m.m_p;
    Ok(ScaledCost {
        value: v.powf(1.0 / p),
        upper_bound: p < 2.0,
    })
}

fn check_dilation(lam: f64) -> Result<()> {
    if !(lam >= 1.0) || !lam.is_finite() {
        return Err(Error::InvalidParameter(format!("dilation needs lam >= 1, got {lam}")));
    }
    Ok(())
}

/// Same-path cost `sqrt(3 (lam^2 - 1) M_2)` for a starlike domain and its
/// dilation.
pub fn tsame2_scaled(lam: f64, m2: f64) -> Result<f64> {
    check_dilation(lam)?;
    Ok((3.0 * (lam * lam - 1.0) * m2).sqrt())
}

/// Independent-path cost `sqrt(3 (1 + lam^2) M_2 - 2 E(min(theta, lam^2 theta')))`
/// for the unit disc.
pub fn tind2_scaled_disc(lam: f64, qt: &QuantileTable) -> Result<f64> {
    check_dilation(lam)?;
    let m2 = qt.integrate(|q| q);
    let l2 = lam * lam;
    let min = qt.integrate_product(|a, b| a.min(l2 * b));
    Ok((3.0 * (1.0 + l2) * m2 - 2.0 * min).max(0.0).sqrt())
}

/// Squared costs of the same-path and independent couplings of `U` and `V`
/// and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingGap {
    pub tsame2_sq: f64,
    pub tind2_sq: f64,
    /// `tind2_sq - tsame2_sq = 2 (3 E tau_{U cap V} - E min(theta, S))`;
    /// positive when the same path is cheaper.
    pub gap: f64,
}

pub fn same_vs_ind_gap2(etau_u: f64, etau_v: f64, etau_inter: f64, emin_theta_s: f64) -> CouplingGap {
    let tsame2_sq = 3.0 * (etau_u + etau_v - 2.0 * etau_inter);
    let tind2_sq = 3.0 * (etau_u + etau_v) - 2.0 * emin_theta_s;
    CouplingGap {
        tsame2_sq,
        tind2_sq,
        gap: 2.0 * (3.0 * etau_inter - emin_theta_s),
    }
}

pub const CIRCLE_NODES: usize = 2048;

fn circle_trapezoid(p: f64, lam: f64, nodes: usize) -> f64 {
    let base = 1.0 + lam * lam;
    (0..nodes)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / nodes as f64;
            (base - 2.0 * lam * th.cos()).max(0.0).powf(0.5 * p)
        })
        .sum::<f64>()
        / nodes as f64
}

/// `I_p(lam) = (1/2pi) integral (1 + lam^2 - 2 lam cos t)^(p/2) dt`, the
/// position part of the independent disc coupling.
pub fn i_p(p: f64, lam: f64) -> Result<f64> {
    let a = circle_trapezoid(p, lam, CIRCLE_NODES);
    let b = circle_trapezoid(p, lam, 2 * CIRCLE_NODES);
    if (a - b).abs() > 1e-4 {
        return Err(Error::Quadrature {
            quantity: "I_p",
            shift: (a - b).abs(),
        });
    }
    Ok(b)
}

fn check_disc_args(p: f64, lam: f64) -> Result<()> {
    check_p(p, 2.0)?;
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {lam}")));
    }
    Ok(())
}

/// Supremal cost `Phi_p(D, lam D)`, realized by antipodal positions and
/// antithetic times.
pub fn phi_disc(p: f64, lam: f64, qt: &QuantileTable) -> Result<f64> {
    check_disc_args(p, lam)?;
    let l2 = lam * lam;
    let time = qt.integrate_antithetic(|a, b| (a - l2 * b).abs().powf(0.5 * p));
    Ok(((1.0 + lam).powf(p) + time).powf(1.0 / p))
}

/// Independent-path cost `T^ind_p(D, lam D) = (I_p + J_{p/2})^(1/p)`.
pub fn tind_disc(p: f64, lam: f64, qt: &QuantileTable) -> Result<f64> {
    check_disc_args(p, lam)?;
    let l2 = lam * lam;
    let j = qt.integrate_product(|a, b| (a - l2 * b).abs().powf(0.5 * p));
    Ok((i_p(p, lam)? + j).powf(1.0 / p))
}

/// Lower bound on `Phi_p - T^ind_p` for the disc and `lam >= 1`, with
/// `m_p = E tau^(p/2)`.
pub fn phi_tind_gap_bound(p: f64, lam: f64, m_p: f64) -> f64 {
    let num = (1.0 + lam).powf(p) - (lam - 1.0).powf(p);
    num / (2.0 * p * (1.0 + lam).powf(p - 1.0) * (1.0 + m_p).powf((p - 1.0) / p))
}

/// The `lam`-free lower bound `1 / (p (1 + m_p)^((p-1)/p))`.
pub fn phi_tind_gap_bound_uniform(p: f64, m_p: f64) -> f64 {
    1.0 / (p * (1.0 + m_p).powf((p - 1.0) / p))
}

/// Repulsion `R_p(D) = Phi_p(D, D)`.
pub fn repulsion_disc(p: f64, qt: &QuantileTable) -> Result<f64> {
    phi_disc(p, 1.0, qt)
}

/// `||U||_2 = sqrt(3 E tau_U)`.
pub fn brownian_norm2(etau: f64) -> Result<f64> {
    if !(etau >= 0.0) || !etau.is_finite() {
        return Err(Error::InvalidParameter(format!("mean exit time must be >= 0, got {etau}")));
    }
    Ok((3.0 * etau).sqrt())
}

/// Mean exit time from the base point of the shifted elliptic annulus
/// between the confocal ellipses `E_alpha` and `E_beta`, started on `E_gamma`.
pub fn elliptic_annulus_mean_exit_time(c: f64, alpha: f64, gamma: f64, beta: f64) -> Result<f64> {
    if !(c > 0.0 && alpha > 0.0 && alpha <= gamma && gamma <= beta && alpha < beta) {
        return Err(Error::InvalidParameter(format!(
            "annulus_order: need c > 0 and 0 < alpha <= gamma <= beta, got ({c}, {alpha}, {gamma}, {beta})"
        )));
    }
    let w = beta - alpha;
    let bracket = (beta - gamma) / w * (2.0 * alpha).cosh() + (gamma - alpha) / w * (2.0 * beta).cosh()
        - (2.0 * gamma).cosh()
        + ((2.0 * (beta - gamma)).sinh() + (2.0 * (gamma - alpha)).sinh()) / (2.0 * w).sinh()
        - 1.0;
    Ok(0.25 * c * c * bracket.max(0.0))
}

pub fn elliptic_annulus_norm2(c: f64, alpha: f64, gamma: f64, beta: f64) -> Result<f64> {
    brownian_norm2(elliptic_annulus_mean_exit_time(c, alpha, gamma, beta)?)
}

/// Mean exit time `u(xi, eta)` of the confocal annulus `alpha < xi < beta`
/// from the point with elliptic coordinates `(xi, eta)`, i.e.
/// `x + i y = c cosh(xi + i eta)` before the shift. Solves `Delta u / 2 = -1`
/// with `u = 0` on both ellipses.
pub fn elliptic_annulus_torsion(c: f64, alpha: f64, beta: f64, xi: f64, eta: f64) -> f64 {
    let (a, b) = annulus_torsion_parts(c, alpha, beta, xi);
    a + b * (2.0 * eta).cos()
}

/// `(A(xi), B(xi))` with `u = A + B cos(2 eta)`.
fn annulus_torsion_parts(c: f64, alpha: f64, beta: f64, xi: f64) -> (f64, f64) {
    let w = beta - alpha;
    let k = 0.25 * c * c;
    let a = k * ((beta - xi) / w * (2.0 * alpha).cosh() + (xi - alpha) / w * (2.0 * beta).cosh() - (2.0 * xi).cosh());
    let b = k * (((2.0 * (beta - xi)).sinh() + (2.0 * (xi - alpha)).sinh()) / (2.0 * w).sinh() - 1.0);
    (a, b)
}

/// `|grad u|` on the annulus boundary, maximized over both ellipses by a
/// scan in `eta`. Scales the O(sqrt h) exit-time bias of the Euler scheme.
pub fn elliptic_annulus_max_boundary_gradient(c: f64, alpha: f64, beta: f64) -> f64 {
    let w = beta - alpha;
    let k = 0.25 * c * c;
    let da = |xi: f64| k * (((2.0 * beta).cosh() - (2.0 * alpha).cosh()) / w - 2.0 * (2.0 * xi).sinh());
    let db = |xi: f64| k * 2.0 * ((2.0 * (xi - alpha)).cosh() - (2.0 * (beta - xi)).cosh()) / (2.0 * w).sinh();
    let steps = 4096;
    let mut best: f64 = 0.0;
    for xi in [alpha, beta] {
        for i in 0..=steps {
            let eta = PI * i as f64 / steps as f64;
            let normal = (da(xi) + db(xi) * (2.0 * eta).cos()).abs();
            let metric = c * (xi.sinh().powi(2) + eta.sin().powi(2)).sqrt();
            best = best.max(normal / metric);
        }
    }
    best
}

/// Empirical constant term `b_0 = -E(|xi'|^(p-2) <xi', xi>) / S_p^((p-1)/p)`
/// of the large-scale expansion, from coupled exit pairs `(xi, xi')`.
pub fn asymptotic_b0(p: f64, coupled: &[(ExitPair, ExitPair)], s_p: f64) -> Result<Estimate> {
    check_p(p, 2.0)?;
    if coupled.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(s_p > 0.0) {
        return Err(Error::InvalidParameter(format!("S_p must be positive, got {s_p}")));
    }
    let scale = -1.0 / s_p.powf((p - 1.0) / p);
    let terms: Vec<f64> = coupled
        .iter()
        .map(|(a, b)| scale * b.position.norm().powf(p - 2.0) * b.position.dot(a.position))
        .collect();
    Estimate::from_samples(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::laws::SeriesConfig;
    use crate::exact::quantile::build_disc_quantile;
    use crate::geometry::Point;
    use std::sync::OnceLock;

    fn table() -> &'static QuantileTable {
        static T: OnceLock<QuantileTable> = OnceLock::new();
        T.get_or_init(|| build_disc_quantile(1000, SeriesConfig::default()).unwrap())
    }

    fn disc2() -> Moments {
        Moments::new(2.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn lambda_scaled_values() {
        assert_eq!(lambda_scaled(2.0, 1.0, &disc2()).unwrap().value, 0.0);
        let v = lambda_scaled(2.0, 2.0, &disc2()).unwrap().value;
        // p = 2: (3 lam^2 - 4 lam + 1) M_2
        assert!((v - ((3.0 * 4.0 - 8.0 + 1.0) * 0.5f64).sqrt()).abs() < 1e-14);
        // discs of radius 1 and 2
        let discs = ((2.0 * 1.0 + 3.0) / 2.0f64).sqrt();
        assert!((v - discs).abs() < 1e-14);
        assert!(lambda_scaled(0.5, 2.0, &disc2()).is_err());
        assert!(lambda_scaled(1.5, 2.0, &disc2()).unwrap().upper_bound);
        assert!(!lambda_scaled(2.0, 2.0, &disc2()).unwrap().upper_bound);
    }

    #[test]
    fn lambda_scaled_large_scale_slope() {
        let m = Moments::new(3.0, 1.0, 0.3).unwrap();
        let lam = 1e3;
        let ratio = lambda_scaled(3.0, lam, &m).unwrap().value / lam;
        assert!((ratio / m.norm() - 1.0).abs() < 0.01);
    }

    #[test]
    fn tsame_values() {
        assert_eq!(tsame2_scaled(1.0, 0.5).unwrap(), 0.0);
        assert!((tsame2_scaled(2.0, 0.5).unwrap() - 4.5f64.sqrt()).abs() < 1e-14);
        assert!(tsame2_scaled(0.9, 0.5).is_err());
    }

    #[test]
    fn tind2_disc_by_two_routes() {
        let qt = table();
        let t = tind2_scaled_disc(2.0, qt).unwrap();
        assert!(t >= 6.5f64.sqrt() && t <= 7.5f64.sqrt(), "{t}");
        // the general-p formula at p = 2: I_2 + J_1
        let u = tind_disc(2.0, 2.0, qt).unwrap();
        assert!((t - u).abs() < 2e-3, "{t} vs {u}");
        assert!(tind2_scaled_disc(1.0, qt).unwrap() >= 2.0 * 0.5f64.sqrt());
    }

    #[test]
    fn circle_integral() {
        for lam in [0.3, 1.0, 2.0, 7.0] {
            assert!((i_p(2.0, lam).unwrap() - (1.0 + lam * lam)).abs() < 1e-12);
        }
        // p = 4: 1 + 4 lam^2 + lam^4
        let lam: f64 = 1.7;
        let want = 1.0 + 4.0 * lam * lam + lam.powi(4);
        assert!((i_p(4.0, lam).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn phi_at_unit_scale() {
        let qt = table();
        let phi = phi_disc(2.0, 1.0, qt).unwrap();
        assert!(phi * phi >= 4.0 && phi * phi <= 6.0);
        let ind = tind_disc(2.0, 1.0, qt).unwrap();
        assert!(phi - ind >= 1.0 / (2.0 * 1.5f64.sqrt()) - 1e-9);
        assert!((phi_tind_gap_bound(2.0, 1.0, 0.5) - 0.408_248_290_463_863).abs() < 1e-12);
        let r = repulsion_disc(2.0, qt).unwrap();
        assert!(r >= 2.0 && r <= 6f64.sqrt());
    }

    #[test]
    fn gap_examples() {
        let g = same_vs_ind_gap2(1.0, 1.0, 1.0, 0.7);
        assert_eq!(g.tsame2_sq, 0.0);
        assert!(g.gap >= 4.0);
        assert!((g.tind2_sq - g.tsame2_sq - g.gap).abs() < 1e-14);
    }

    #[test]
    fn annulus_norm() {
        assert_eq!(elliptic_annulus_norm2(1.0, 0.4, 0.4, 1.3).unwrap(), 0.0);
        assert!(elliptic_annulus_norm2(1.0, 0.4, 1.3, 1.3).unwrap() < 1e-7);
        let n = elliptic_annulus_norm2(1.0, 0.4, 0.9, 1.3).unwrap();
        assert!((n - 0.8436).abs() < 1e-3, "{n}");
        assert!(elliptic_annulus_norm2(1.0, 0.9, 0.4, 1.3).is_err());
        // scaling: ||c U|| = c ||U||
        let n2 = elliptic_annulus_norm2(2.5, 0.4, 0.9, 1.3).unwrap();
        assert!((n2 - 2.5 * n).abs() < 1e-12);
    }

    fn pair(re: f64, im: f64) -> ExitPair {
        ExitPair {
            position: Point::new(re, im),
            time: 0.5,
        }
    }

    #[test]
    fn b0_of_deterministic_couplings() {
        let pts: Vec<(ExitPair, ExitPair)> = (0..64)
            .map(|k| {
                let th = k as f64 * 0.1;
                (pair(th.cos(), th.sin()), pair(th.cos(), th.sin()))
            })
            .collect();
        let b = asymptotic_b0(2.0, &pts, 1.5).unwrap();
        assert!((b.mean + 1.0 / 1.5f64.sqrt()).abs() < 1e-12);
        let anti: Vec<_> = pts
            .iter()
            .map(|(a, _)| (*a, pair(-a.position.re, -a.position.im)))
            .collect();
        let b = asymptotic_b0(2.0, &anti, 1.5).unwrap();
        assert!((b.mean - 1.0 / 1.5f64.sqrt()).abs() < 1e-12);
        assert!(asymptotic_b0(2.0, &[], 1.5).is_err());
    }
    #[test]
    fn annulus_torsion_solves_the_poisson_problem() {
        let (c, a, b) = (1.0, 0.4, 1.3);
        let u = |xi: f64, eta: f64| elliptic_annulus_torsion(c, a, b, xi, eta);
        for eta in [0.0, 0.7, 2.0] {
            assert!(u(a, eta).abs() < 1e-14 && u(b, eta).abs() < 1e-14);
        }
        assert!((u(0.9, 0.0) - elliptic_annulus_mean_exit_time(c, a, 0.9, b).unwrap()).abs() < 1e-14);
        // Delta u / 2 = -1 in elliptic coordinates
        let (xi, eta, h) = (0.8, 0.6, 1e-4);
        let lap = (u(xi + h, eta) + u(xi - h, eta) + u(xi, eta + h) + u(xi, eta - h) - 4.0 * u(xi, eta)) / (h * h);
        let metric = c * c * (xi.sinh().powi(2) + eta.sin().powi(2));
        assert!((0.5 * lap / metric + 1.0).abs() < 1e-5);
    }

    #[test]
    fn annulus_boundary_gradient_by_differences() {
        let (c, a, b) = (1.0, 0.4, 1.3);
        let g = elliptic_annulus_max_boundary_gradient(c, a, b);
        let h = 1e-6;
        let mut best: f64 = 0.0;
        for i in 0..=2000 {
            let eta = PI * i as f64 / 2000.0;
            for (xi, s) in [(a, 1.0), (b, -1.0)] {
                let du = s * elliptic_annulus_torsion(c, a, b, xi + s * h, eta) / h;
                best = best.max(du / (c * (xi.sinh().powi(2) + eta.sin().powi(2)).sqrt()));
            }
        }
        assert!((g - best).abs() < 1e-4, "{g} vs {best}");
        assert!((g - 1.72018).abs() < 1e-4);
    }
}
