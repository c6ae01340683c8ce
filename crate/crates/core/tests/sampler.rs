use exit_transport::exact::{default_double_series, f_rho};
use exit_transport::geometry::Domain;
use exit_transport::sampler::{
    sample_disc_exact, sample_exit_pairs, sample_strip_exit_times_exact, simulate_first_exits, SimConfig,
    EXIT_OVERSHOOT,
};
use exit_transport::stats::{chi_square_uniform, ks_critical, ks_two_sample, Estimate};
use proptest::prelude::*;
use std::f64::consts::TAU;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn records_are_deterministic(seed in any::<u64>(), index in 0u64..1_000_000, h in 1e-4..1e-2f64) {
        let domains = [Domain::unit_disc(), Domain::vertical_strip(-1.0, 2.0).unwrap()];
        let cfg = SimConfig::for_domains(&domains, h, seed, 1_000_000).unwrap();
        let a = simulate_first_exits(&domains, &cfg, index).unwrap();
        let b = simulate_first_exits(&domains, &cfg, index).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn nested_domains_exit_in_order(seed in any::<u64>(), index in 0u64..1_000_000, r in 1.0..3.0f64) {
        let inner = Domain::unit_disc();
        let outer = Domain::centered_disc(r).unwrap();
        let rect = Domain::rectangle(-0.5, 0.5, -0.5, 0.5).unwrap();
        let domains = [rect, inner, outer];
        let cfg = SimConfig::for_domains(&domains, 1e-3, seed, 1_000_000).unwrap();
        let rec = simulate_first_exits(&domains, &cfg, index).unwrap();
        let t: Vec<f64> = (0..3).map(|k| rec.pair(k).unwrap().time).collect();
        prop_assert!(t[0] <= t[1] && t[1] <= t[2], "{:?}", t);
    }
}

#[test]
fn sample_sets_are_deterministic() {
    let d = Domain::rectangle(-1.0, 2.0, -1.0, 1.0).unwrap();
    let cfg = SimConfig::for_domains(std::slice::from_ref(&d), 1e-3, 42, 500).unwrap();
    let a = sample_exit_pairs(&d, &cfg).unwrap();
    let b = sample_exit_pairs(&d, &cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn euler_disc_times_match_exact_law() {
    let n = 10_000;
    let h: f64 = 1e-4;
    let d = Domain::unit_disc();
    let cfg = SimConfig::for_domains(std::slice::from_ref(&d), h, 17, n).unwrap();
    let euler = sample_exit_pairs(&d, &cfg).unwrap();
    let exact = sample_disc_exact(1.0, n, 18).unwrap();

    // Overshoot makes the Euler walk see a disc of radius about
    // 1 + EXIT_OVERSHOOT sqrt(h); exit times scale with the squared radius.
    let r = 1.0 + EXIT_OVERSHOOT * h.sqrt();
    let corrected: Vec<f64> = euler.times().iter().map(|t| t / (r * r)).collect();
    let crit = ks_critical(0.01, n, n);
    let ks = ks_two_sample(&corrected, &exact.times()).unwrap();
    assert!(ks < crit, "KS {ks} above {crit}");

    // measured bias constant C in mean(tau_h) - 1/2 = C sqrt(h)
    let mean = Estimate::from_samples(&euler.times()).unwrap();
    let c = (mean.mean - 0.5) / h.sqrt();
    assert!((c - EXIT_OVERSHOOT).abs() < 3.0 * mean.se / h.sqrt(), "C = {c}");

    // exit angles follow the uniform harmonic measure
    let mut bins = [0usize; 36];
    for e in &euler.pairs {
        let a = e.position.im.atan2(e.position.re).rem_euclid(TAU);
        bins[((a / TAU * 36.0) as usize).min(35)] += 1;
    }
    let (stat, crit) = chi_square_uniform(&bins, 0.01).unwrap();
    assert!(stat < crit, "chi-square {stat} above {crit}");
}

#[test]
fn exact_disc_sampler_laws() {
    let a = sample_disc_exact(1.0, 100_000, 3).unwrap();
    let mean = Estimate::from_samples(&a.times()).unwrap();
    assert!((mean.mean - 0.5).abs() < 0.005);
    assert!(a.pairs.iter().all(|e| (e.position.norm() - 1.0).abs() < 1e-15));
    let b = sample_disc_exact(2.0, 1000, 3).unwrap();
    for (x, y) in a.pairs.iter().zip(&b.pairs) {
        assert_eq!(y.time, 4.0 * x.time);
    }
    assert!(sample_disc_exact(1.0, 0, 3).unwrap().is_empty());
}

#[test]
fn exact_strip_sampler_laws() {
    let n = 100_000;
    let t = sample_strip_exit_times_exact(1.0, 2.0, n, 5).unwrap();
    let e = Estimate::from_samples(&t).unwrap();
    assert!((e.mean - 2.0).abs() < 0.05, "{e:?}");

    let sym = sample_strip_exit_times_exact(1.0, 1.0, n, 6).unwrap();
    assert!((Estimate::from_samples(&sym).unwrap().mean - 1.0).abs() < 0.03);

    let other = sample_strip_exit_times_exact(1.0, 2.0, n, 7).unwrap();
    let mins: Vec<f64> = t.iter().zip(&other).map(|(a, b)| a.min(*b)).collect();
    let m = Estimate::from_samples(&mins).unwrap();
    let f2 = f_rho(2.0, default_double_series()).unwrap().value;
    assert!(m.agrees(f2, 3.0, 0.0), "{m:?} vs {f2}");
}
