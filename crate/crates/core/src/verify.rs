//! The end-to-end numerical checks, shared by the acceptance test target and
//! the `verify` command. Each check returns a [`Check`] with the measured
//! values, so that a failure reports how far off it was.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::exact::{
    asymptotic_b0, coupling_threshold, default_double_series, elliptic_annulus_max_boundary_gradient,
    elliptic_annulus_norm2, f_rho, integrate_survival_product, phi_disc, phi_tind_gap_bound,
    phi_tind_gap_bound_uniform, repulsion_disc, strip_min_expectation, tind_disc, DiscExitLaw,
    ExitTimeLaw, Moments, RectangleExitLaw, SeriesConfig, StripSpec,
};
use crate::geometry::Domain;
use crate::sampler::{
    disc_quantile_sampler, sample_disc_exact, sample_exit_pairs, sample_multi_exits, simulate_first_exits,
    SampleSet, SimConfig, EXIT_OVERSHOOT,
};
use crate::stats::{compensated_sum, Estimate};
use crate::transport::{
    assign_max, assign_min, coupling_gap2, empirical_lambda, empirical_phi, independent_mean_cost, CostMatrix,
    Matching,
};

pub const DEFAULT_SEED: u64 = 7;

/// `(id, name)` of every check, in order.
pub const CHECKS: [(u8, &str); 11] = [
    (1, "strip coupling threshold"),
    (2, "scaled disc optimal cost"),
    (3, "p=2 coupling identity"),
    (4, "strip gap changes sign"),
    (5, "series self-consistency"),
    (6, "disc supremal gap"),
    (7, "disc repulsion bounds"),
    (8, "assignment against exhaustive search"),
    (9, "disc asymptotic constant"),
    (10, "elliptic annulus norm"),
    (11, "property suites"),
];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

/// Runs one check. Errors inside the check become a failed [`Check`].
pub fn run(id: u8, seed: u64) -> Check {
    let name = CHECKS
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .unwrap_or("unknown check");
    let start = Instant::now();
    let outcome = match id {
        1 => threshold(),
        2 => scaled_disc(seed),
        3 => coupling_identity(seed),
        4 => strip_sign(seed),
        5 => series(),
        6 => supremal_gap(),
        7 => repulsion(seed),
        8 => exhaustive(seed),
        9 => asymptotic_constant(seed),
        10 => annulus(seed),
        11 => properties(seed),
        _ => Ok((false, format!("no check with id {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if let Some(limit) = time_limit(id) {
        if seconds > limit {
            passed = false;
            detail.push_str(&format!("; over the {limit} s budget"));
        }
    }
    Check {
        id,
        name,
        passed,
        detail,
        seconds,
    }
}

pub fn run_all(seed: u64) -> Vec<Check> {
    CHECKS.iter().map(|c| run(c.0, seed)).collect()
}

fn time_limit(id: u8) -> Option<f64> {
    match id {
        1 => Some(10.0),
        2 => Some(120.0),
        3 => Some(300.0),
        _ => None,
    }
}

type Outcome = Result<(bool, String)>;

/// Standard error of `mean_cost^(1/p)` from the spread of the matched costs.
pub fn matching_se(m: &Matching) -> Result<f64> {
    let e = Estimate::from_samples(&m.matched_costs)?;
    Ok(e.se * m.value / (m.p * m.mean_cost))
}

fn threshold() -> Outcome {
    let cfg = default_double_series();
    let mut ok = true;
    let mut parts = Vec::new();
    for ell in [1.0, 2.0, 10.0] {
        let t = coupling_threshold(ell, 1e-7, cfg)?;
        let overlap = t.overlap_width / ell;
        ok &= (t.rho_star - 12.5386).abs() <= 1e-3
            && (t.a_star_ratio - 0.85227).abs() <= 1e-4
            && (overlap - 0.14772).abs() <= 1e-4;
        parts.push(format!(
            "ell={ell}: rho*={:.5} a*/(ell/2)={:.6} overlap/ell={:.6}",
            t.rho_star, t.a_star_ratio, overlap
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn scaled_disc(seed: u64) -> Outcome {
    let n = 4000;
    let a = sample_disc_exact(1.0, n, seed)?;
    let b = sample_disc_exact(2.0, n, seed.wrapping_add(1))?;
    let m = empirical_lambda(2.0, &a, &b)?;
    let se = matching_se(&m)?;
    let target = 2.5f64.sqrt();
    let ok = (m.value - target).abs() <= 3.0 * se;
    Ok((
        ok,
        format!(
            "Lambda_hat={:.5} target={target:.5} se={se:.5} z={:+.2}",
            m.value,
            (m.value - target) / se
        ),
    ))
}

/// Same-path records for two domains, at a step fine enough that the
/// O(sqrt h) exit-time bias is far below the statistical error.
fn gap_estimate(u: Domain, v: Domain, n: usize, seed: u64) -> Result<Estimate> {
    let h = 1e-6;
    let cfg = SimConfig::for_domains(&[u.clone(), v.clone()], h, seed, n)?;
    let sample = sample_multi_exits(&[u, v], &cfg)?;
    coupling_gap2(&sample.records)
}

fn describe_gap(label: &str, g: &Estimate, target: f64) -> String {
    format!(
        "{label}: gap={:.4} se={:.4} target={target:.4} z={:+.2}",
        g.mean,
        g.se,
        g.z_score(target)
    )
}

fn coupling_identity(seed: u64) -> Outcome {
    let n = 100_000;
    let cfg = SeriesConfig::default();

    let strips = StripSpec::new(1.0, 2.0)?;
    let u = Domain::vertical_strip(-1.0, 2.0)?;
    let v = Domain::reflected_y(u.clone())?;
    let g_strip = gap_estimate(u, v, n, seed)?;
    let t_strip = 3.0 * strips.overlap_mean_exit_time() - strip_min_expectation(&strips, default_double_series())?.value;

    let u = Domain::rectangle(-1.0, 2.0, -1.0, 1.0)?;
    let v = Domain::rectangle(-2.0, 1.0, -0.5, 1.5)?;
    let g_rect = gap_estimate(u, v, n, seed.wrapping_add(1))?;
    let lu = RectangleExitLaw::new(-1.0, 2.0, -1.0, 1.0, cfg)?;
    let lv = RectangleExitLaw::new(-2.0, 1.0, -0.5, 1.5, cfg)?;
    let inter = RectangleExitLaw::new(-1.0, 1.0, -0.5, 1.0, cfg)?;
    let t_rect = 3.0 * inter.mean() - integrate_survival_product(&[&lu, &lv]);

    let ok = g_strip.agrees(t_strip, 3.0, 0.0) && g_rect.agrees(t_rect, 3.0, 0.0);
    Ok((
        ok,
        format!(
            "{}; {}",
            describe_gap("strips", &g_strip, t_strip),
            describe_gap("rectangles", &g_rect, t_rect)
        ),
    ))
}

fn strip_sign(seed: u64) -> Outcome {
    let n = 100_000;
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, rho) in [3.0, 20.0].into_iter().enumerate() {
        let u = Domain::vertical_strip(-1.0, rho)?;
        let v = Domain::reflected_y(u.clone())?;
        let g = gap_estimate(u, v, n, seed.wrapping_add(10 + k as u64))?;
        let exact = 3.0 - f_rho(rho, default_double_series())?.value;
        // positive gap: the same-path coupling is the cheaper one
        let sign_ok = if rho < 12.5386 {
            g.mean - 3.0 * g.se > 0.0
        } else {
            g.mean + 3.0 * g.se < 0.0
        };
        ok &= sign_ok;
        parts.push(describe_gap(&format!("rho={rho}"), &g, exact));
    }
    Ok((ok, parts.join("; ")))
}

fn series() -> Outcome {
    let cfg = SeriesConfig::default();
    let disc = integrate_survival_product(&[&DiscExitLaw::new(cfg)?]);
    let strip = integrate_survival_product(&[&StripSpec::new(1.0, 2.0)?.law(cfg)?]);
    let mut worst: f64 = 0.0;
    let f2 = f_rho(2.0, default_double_series())?.value;
    for eps in [0.25, 1.0, 3.0] {
        let e = strip_min_expectation(&StripSpec::new(eps, 2.0 * eps)?, default_double_series())?.value;
        worst = worst.max((e / (eps * eps * f2) - 1.0).abs());
    }
    let ok = (disc - 0.5).abs() <= 1e-3 && (strip - 2.0).abs() <= 1e-3 && worst <= 1e-9;
    Ok((
        ok,
        format!("disc mean={disc:.9} strip mean={strip:.9} identity rel err={worst:.2e}"),
    ))
}

fn supremal_gap() -> Outcome {
    let table = &disc_quantile_sampler()?.table;
    let m2 = Moments::disc(2.0, table)?.m_p;
    let uniform = phi_tind_gap_bound_uniform(2.0, 0.5);
    let mut ok = true;
    let mut parts = Vec::new();
    for lam in [1.0, 2.0, 5.0] {
        let gap = phi_disc(2.0, lam, table)? - tind_disc(2.0, lam, table)?;
        let bound = phi_tind_gap_bound(2.0, lam, m2);
        ok &= gap >= bound && gap >= uniform;
        parts.push(format!("lambda={lam}: gap={gap:.5} bound={bound:.5}"));
    }
    Ok((ok, format!("{}; uniform bound={uniform:.5}", parts.join("; "))))
}

fn repulsion(seed: u64) -> Outcome {
    let table = &disc_quantile_sampler()?.table;
    let r = repulsion_disc(2.0, table)?;
    let (lo, hi) = (2.0, 6.0f64.sqrt());
    let a = sample_disc_exact(1.0, 2000, seed.wrapping_add(20))?;
    let b = sample_disc_exact(1.0, 2000, seed.wrapping_add(21))?;
    let m = empirical_phi(2.0, &a, &b)?;
    let se = matching_se(&m)?;
    let ok = (lo..=hi).contains(&r) && m.value >= lo - 3.0 * se && m.value <= hi + 3.0 * se;
    Ok((
        ok,
        format!("R_2={r:.5} Phi_hat={:.5} se={se:.5} interval=[2, {hi:.5}]", m.value),
    ))
}

/// Visits every permutation of `0..n` in lexicographic order.
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        f(&p);
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).expect("a larger element");
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// First optimal permutation in lexicographic order, scored by the same
/// compensated row-ordered sum the solver reports.
fn brute_force(m: &CostMatrix, maximize: bool) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_permutation(m.n, |p| {
        let s = compensated_sum(p.iter().enumerate().map(|(i, &j)| m.get(i, j)));
        let better = match &best {
            None => true,
            Some((_, b)) => {
                if maximize {
                    s > *b
                } else {
                    s < *b
                }
            }
        };
        if better {
            best = Some((p.to_vec(), s));
        }
    });
    best.expect("n >= 1")
}

fn exhaustive(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x8888);
    let mut failures = Vec::new();
    let mut count = 0;
    for n in 2..=8 {
        for k in 0..100 {
            // every fourth matrix has small integer entries, hence many ties
            let entries: Vec<f64> = if k % 4 == 3 {
                (0..n * n).map(|_| f64::from(rng.random_range(0..3u8))).collect()
            } else {
                (0..n * n).map(|_| rng.random::<f64>()).collect()
            };
            let m = CostMatrix::from_entries(n, 2.0, entries)?;
            for maximize in [false, true] {
                count += 1;
                let got = if maximize { assign_max(&m)? } else { assign_min(&m)? };
                let (perm, sum) = brute_force(&m, maximize);
                if got.mean_cost != sum / n as f64 || got.permutation != perm {
                    failures.push(format!(
                        "n={n} k={k} {}: {:?} vs {perm:?}",
                        if maximize { "max" } else { "min" },
                        got.permutation
                    ));
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{count} assignments equal exhaustive search, permutations included")
    } else {
        format!("{} of {count} differ, first: {}", failures.len(), failures[0])
    };
    Ok((failures.is_empty(), detail))
}

fn asymptotic_constant(seed: u64) -> Outcome {
    let n = 1_000_000;
    let a = sample_disc_exact(1.0, n, seed.wrapping_add(30))?;
    let b = sample_disc_exact(1.0, n, seed.wrapping_add(31))?;
    let s2 = 1.5;
    let independent: Vec<_> = a.pairs.iter().copied().zip(b.pairs.iter().copied()).collect();
    let diagonal: Vec<_> = a.pairs.iter().map(|&x| (x, x)).collect();
    let bi = asymptotic_b0(2.0, &independent, s2)?;
    let bd = asymptotic_b0(2.0, &diagonal, s2)?;
    let target = -1.0 / s2.sqrt();
    // the diagonal terms are constant up to rounding, so its se is ~0
    let ok = bi.agrees(0.0, 3.0, 0.0) && bd.agrees(target, 3.0, 1e-12);
    Ok((
        ok,
        format!(
            "independent b0={:.5} se={:.5}; diagonal b0={:.12} target={target:.12}",
            bi.mean, bi.se, bd.mean
        ),
    ))
}

fn annulus(seed: u64) -> Outcome {
    let (c, alpha, gamma, beta) = (1.0, 0.4, 0.9, 1.3);
    let h = 1e-4;
    let exact = elliptic_annulus_norm2(c, alpha, gamma, beta)?;
    let d = Domain::elliptic_annulus(c, alpha, gamma, beta)?;
    let cfg = SimConfig::for_domains(std::slice::from_ref(&d), h, seed.wrapping_add(40), 100_000)?;
    let sample: SampleSet = sample_exit_pairs(&d, &cfg)?;
    let tau = Estimate::from_samples(&sample.times())?;
    let norm = (3.0 * tau.mean).sqrt();
    let se = 1.5 * tau.se / norm;
    // the Euler exit time is late by at most EXIT_OVERSHOOT sqrt(h) |grad u|
    let bias_tau = EXIT_OVERSHOOT * h.sqrt() * elliptic_annulus_max_boundary_gradient(c, alpha, beta);
    let allowance = 1.5 * bias_tau / exact;
    let ok = (norm - exact).abs() <= 3.0 * se + allowance;
    Ok((
        ok,
        format!("closed form={exact:.5} Euler={norm:.5} se={se:.5} bias allowance={allowance:.5}"),
    ))
}

/// The property checks for one seed, as `(name, passed)`.
pub fn property_suite(seed: u64) -> Result<Vec<(&'static str, bool)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1111);
    let n = 40;
    let radii: [f64; 3] = [
        rng.random_range(0.5..1.5),
        rng.random_range(0.5..1.5),
        rng.random_range(0.5..1.5),
    ];
    let s: Vec<SampleSet> = radii
        .iter()
        .enumerate()
        .map(|(k, &r)| sample_disc_exact(r, n, seed.wrapping_mul(3).wrapping_add(k as u64)))
        .collect::<Result<_>>()?;
    let tol = 1e-12;
    let mut out = Vec::new();

    let lam = |a: &SampleSet, b: &SampleSet| empirical_lambda(2.0, a, b).map(|m| m.value);
    let (ab, ba, bc, ac) = (lam(&s[0], &s[1])?, lam(&s[1], &s[0])?, lam(&s[1], &s[2])?, lam(&s[0], &s[2])?);
    out.push(("identity", lam(&s[0], &s[0])? == 0.0));
    out.push(("positivity", ab > 0.0));
    out.push(("symmetry", (ab - ba).abs() <= tol));
    out.push(("triangle inequality", ac <= ab + bc + tol));

    let mut sandwich = true;
    for p in [1.0, 2.0, 3.0] {
        let lo = empirical_lambda(p, &s[0], &s[1])?.value;
        let mid = independent_mean_cost(p, &s[0].pairs, &s[1].pairs)?.powf(1.0 / p);
        let hi = empirical_phi(p, &s[0], &s[1])?.value;
        sandwich &= lo <= mid + tol && mid <= hi + tol;
    }
    out.push(("sandwich", sandwich));

    let table = &disc_quantile_sampler()?.table;
    let (l1, l2) = {
        let a = rng.random_range(1.0..5.0);
        let b = rng.random_range(1.0..5.0);
        (f64::min(a, b), f64::max(a, b))
    };
    out.push(("nested disc monotonicity", tind_disc(2.0, l1, table)? <= tind_disc(2.0, l2, table)?));

    let again = sample_disc_exact(radii[0], n, seed.wrapping_mul(3))?;
    let d = Domain::unit_disc();
    let cfg = SimConfig::for_domains(std::slice::from_ref(&d), 1e-3, seed, 4)?;
    let e1 = simulate_first_exits(std::slice::from_ref(&d), &cfg, 3)?;
    let e2 = simulate_first_exits(std::slice::from_ref(&d), &cfg, 3)?;
    let m1 = assign_min(&CostMatrix::from_pairs(2.0, &s[0].pairs, &s[1].pairs)?)?;
    let m2 = assign_min(&CostMatrix::from_pairs(2.0, &s[0].pairs, &s[1].pairs)?)?;
    out.push(("determinism", again.pairs == s[0].pairs && e1 == e2 && m1 == m2));
    Ok(out)
}

fn properties(seed: u64) -> Outcome {
    let mut failed = Vec::new();
    let mut total = 0;
    for k in 0..20 {
        let s = seed.wrapping_add(1000 + k);
        for (name, ok) in property_suite(s)? {
            total += 1;
            if !ok {
                failed.push(format!("{name} (seed {s})"));
            }
        }
    }
    let detail = if failed.is_empty() {
        format!("{total} property checks over 20 seeds")
    } else {
        format!("{} of {total} failed: {}", failed.len(), failed.join(", "))
    };
    Ok((failed.is_empty(), detail))
}
