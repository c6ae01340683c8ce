use exit_transport::exact::{
    build_disc_quantile, coupling_threshold, default_double_series, disc_survival, f_rho, lambda_scaled,
    strip_min_expectation, strip_survival, tind2_scaled_disc, tsame2_scaled, DiscExitLaw, ExitTimeLaw, Moments,
    QuantileTable, SeriesConfig, StripSpec,
};
use proptest::prelude::*;
use std::sync::OnceLock;

fn table() -> &'static QuantileTable {
    static T: OnceLock<QuantileTable> = OnceLock::new();
    T.get_or_init(|| build_disc_quantile(2000, SeriesConfig::default()).unwrap())
}

fn increasing_grid(start: f64, gaps: &[f64]) -> Vec<f64> {
    gaps.iter()
        .scan(start, |t, g| {
            *t += g;
            Some(*t)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn disc_survival_is_nonincreasing(gaps in prop::collection::vec(1e-4..0.01f64, 1000)) {
        let cfg = SeriesConfig::default();
        let grid = increasing_grid(0.0, &gaps);
        let mut prev = 1.0;
        for t in grid {
            let s = disc_survival(t, cfg).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= prev, "survival rose at t = {}", t);
            prev = s;
        }
    }

    #[test]
    fn strip_survival_is_nonincreasing(eps in 0.2..3.0f64, l in 0.2..3.0f64, gaps in prop::collection::vec(1e-4..0.02f64, 1000)) {
        let spec = StripSpec::new(eps, l).unwrap();
        let cfg = SeriesConfig::new(10_000, 1e-8).unwrap();
        let mut prev = 1.0;
        for t in increasing_grid(0.0, &gaps) {
            let s = strip_survival(t, &spec, cfg).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= prev, "survival rose at t = {}", t);
            prev = s;
        }
    }

    #[test]
    fn doubling_terms_stays_within_tolerance(t in 1e-2..10.0f64, eps in 0.2..3.0f64, l in 0.2..3.0f64, rho in 1.0..60.0f64) {
        let cfg = SeriesConfig::default();
        let a = disc_survival(t, cfg).unwrap().value;
        let b = disc_survival(t, cfg.doubled()).unwrap().value;
        prop_assert!((a - b).abs() < cfg.tail_tol);

        let spec = StripSpec::new(eps, l).unwrap();
        let a = strip_survival(t, &spec, cfg).unwrap().value;
        let b = strip_survival(t, &spec, cfg.doubled()).unwrap().value;
        prop_assert!((a - b).abs() < cfg.tail_tol);

        let dcfg = default_double_series();
        let a = strip_min_expectation(&spec, dcfg).unwrap().value;
        let b = strip_min_expectation(&spec, dcfg.doubled()).unwrap().value;
        prop_assert!((a - b).abs() < dcfg.tail_tol);
        let a = f_rho(rho, dcfg).unwrap().value;
        let b = f_rho(rho, dcfg.doubled()).unwrap().value;
        prop_assert!((a - b).abs() < dcfg.tail_tol);
    }
}

#[test]
fn quantile_inverts_survival_on_the_grid() {
    let qt = table();
    let law = DiscExitLaw::new(SeriesConfig::default()).unwrap();
    for (r, q) in qt.grid.iter().zip(&qt.values) {
        assert!((law.survival(*q) - (1.0 - r)).abs() < 1e-6, "r = {r}");
    }
    assert!(qt.values.windows(2).all(|w| w[1] > w[0]));
    assert!((qt.integrate(|q| q) - 0.5).abs() < 1e-3);
}

#[test]
fn lambda_squared_vanishes_linearly_at_one() {
    // For p >= 2 the time term |lam^2 - 1|^(p/2) is of order (lam - 1)^(p/2)
    // and dominates, so Lambda^2 (not Lambda) is linear in lam - 1.
    for p in [2.0, 3.0, 4.0] {
        let m = Moments::disc(p, table()).unwrap();
        assert_eq!(lambda_scaled(p, 1.0, &m).unwrap().value, 0.0);
        let a = lambda_scaled(p, 1.0 + 1e-4, &m).unwrap().value.powi(2);
        let b = lambda_scaled(p, 1.0 + 2e-4, &m).unwrap().value.powi(2);
        assert!((b / a - 2.0).abs() < 1e-2, "p = {p}: ratio {}", b / a);
        let slope = 2.0 * m.m_p.powf(2.0 / p);
        assert!((a / 1e-4 / slope - 1.0).abs() < 1e-2);
    }
}

#[test]
fn lambda_slope_at_large_scale() {
    for p in [2.0, 3.0, 4.0] {
        let m = Moments::disc(p, table()).unwrap();
        let lam = 1e3;
        let slope = lambda_scaled(p, lam, &m).unwrap().value / lam;
        assert!((slope / m.s_p.powf(1.0 / p) - 1.0).abs() < 0.01);
    }
}

#[test]
fn lambda_increases_with_scale() {
    let m = Moments::disc(2.0, table()).unwrap();
    let vals: Vec<f64> = (0..50)
        .map(|k| lambda_scaled(2.0, 1.0 + 0.2 * k as f64, &m).unwrap().value)
        .collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
    assert!(lambda_scaled(1.5, 2.0, &m).unwrap().upper_bound);
    assert!(lambda_scaled(0.5, 2.0, &m).is_err());
}

#[test]
fn cost_chain_for_dilated_disc() {
    let m2 = 0.5;
    for lam in [1.0, 1.5, 2.0, 5.0] {
        let same = tsame2_scaled(lam, m2).unwrap();
        let mid = ((3.0 * lam * lam + 1.0) * m2).sqrt();
        let ind = tind2_scaled_disc(lam, table()).unwrap();
        let top = (3.0 * (lam * lam + 1.0) * m2).sqrt();
        assert!(same <= mid && mid <= ind + 1e-9 && ind <= top, "lam = {lam}: {same} {mid} {ind} {top}");
    }
    assert!(tind2_scaled_disc(1.0, table()).unwrap() >= 2.0 * m2.sqrt() - 1e-9);
    let ind2 = tind2_scaled_disc(2.0, table()).unwrap();
    assert!(6.5f64.sqrt() <= ind2 && ind2 <= 7.5f64.sqrt());
}

#[test]
fn same_path_gap_lower_bound() {
    let m2 = 0.5;
    let m = Moments::new(2.0, 2.0 * m2, m2).unwrap();
    for lam in [1.5, 2.0, 5.0] {
        let gap = tsame2_scaled(lam, m2).unwrap() - lambda_scaled(2.0, lam, &m).unwrap().value;
        let bound = (2.0 * (lam - 1.0) * m2 / (3.0 * lam + 1.0)).sqrt();
        assert!(gap >= bound, "lam = {lam}: {gap} < {bound}");
    }
}

#[test]
fn threshold_is_scale_free() {
    let cfg = default_double_series();
    let ratios: Vec<f64> = [1.0, 2.0, 10.0]
        .iter()
        .map(|&ell| {
            let t = coupling_threshold(ell, 1e-9, cfg).unwrap();
            t.a_star / (ell / 2.0)
        })
        .collect();
    assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-6));
    assert!((ratios[0] - 0.85227).abs() < 1e-4);
}

#[test]
fn f_identities() {
    let cfg = default_double_series();
    assert!(f_rho(1.0, cfg).unwrap().value < 3.0);
    let f2 = f_rho(2.0, cfg).unwrap().value;
    for eps in [0.5, 1.0, 3.0] {
        let spec = StripSpec::new(eps, 2.0 * eps).unwrap();
        let e = strip_min_expectation(&spec, cfg).unwrap().value;
        assert!((e - eps * eps * f2).abs() < 1e-12 * e);
        assert!(e <= spec.mean_exit_time());
    }
}
