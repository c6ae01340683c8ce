//! The `exit-transport` command line tool: figure data as CSV/JSON files and
//! the `verify` suite.
//!
//! Every output file starts with the run configuration and the library
//! version. CSV files carry them as `#` comment lines before the header row;
//! JSON files as `version` and `config` members.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact::{
    coupling_threshold, default_double_series, elliptic_annulus_max_boundary_gradient,
    elliptic_annulus_mean_exit_time, f_rho, lambda_scaled, phi_disc, phi_tind_gap_bound, repulsion_disc,
    tind2_scaled_disc, tind_disc, tsame2_scaled, ExitTimeLaw, Moments, RectangleExitLaw, SeriesConfig,
};
use crate::geometry::Domain;
use crate::sampler::{disc_quantile_sampler, sample_exit_pairs, simulate_with_trace, SampleSet, SimConfig, EXIT_OVERSHOOT};
use crate::stats::Estimate;
use crate::transport::{empirical_lambda, empirical_phi, lift_matched_paths, Matching};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Largest sample accepted by `match`; the assignment is cubic in it.
pub const MATCH_MAX_N: usize = 5000;

#[derive(Debug, Parser)]
#[command(name = "exit-transport", version, about = "Transport costs between Brownian exit-pair laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON parameter block for the command; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_delimiter = ',', default_value = "csv,json")]
    format: Vec<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Optimal, same-path and independent costs of the disc and its dilations.
    ScaledScan,
    /// F(rho) on a grid and the coupling transition threshold.
    Threshold,
    /// Min and max matchings between Euler samples of two domains.
    Match,
    /// Supremal and independent disc costs and the repulsion.
    DiscExact,
    /// Brownian norms: closed forms where known, and Monte Carlo.
    Norm,
    /// Runs the numerical checks and reports pass/fail.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ScaledScan => "scaled-scan",
            Command::Threshold => "threshold",
            Command::Match => "match",
            Command::DiscExact => "disc-exact",
            Command::Norm => "norm",
            Command::Verify => "verify",
        }
    }
}

/// Everything that determines a run. Written into every output header.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub params: Value,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub formats: Vec<Format>,
}

/// A command failure, mapped to the exit code.
#[derive(Debug)]
enum Failure {
    Config(String),
    Tolerance(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidDomain(_) | Error::InvalidParameter(_) | Error::OutsideDomain { .. } | Error::Json(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Run = std::result::Result<(), Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Tolerance(m)) => {
            eprintln!("tolerance failure: {m}");
            EXIT_TOLERANCE
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn execute(cli: &Cli) -> Run {
    let params: Value = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => json!({}),
    };
    let rc = RunConfig {
        command: cli.command.name().to_string(),
        params,
        output_dir: cli.out.clone(),
        seed: cli.seed,
        formats: cli.format.clone(),
    };
    fs::create_dir_all(&rc.output_dir)?;
    match cli.command {
        Command::ScaledScan => scaled_scan(&rc),
        Command::Threshold => threshold(&rc),
        Command::Match => match_demo(&rc),
        Command::DiscExact => disc_exact(&rc),
        Command::Norm => norm(&rc),
        Command::Verify => run_verify(&rc),
    }
}

fn parse<T: for<'de> Deserialize<'de>>(rc: &RunConfig) -> std::result::Result<T, Failure> {
    serde_json::from_value(rc.params.clone()).map_err(|e| Failure::Config(format!("{} config: {e}", rc.command)))
}

/// A grid given either as a list or as `{start, stop, steps}` (inclusive).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, steps: usize },
}

impl Grid {
    fn values(&self) -> std::result::Result<Vec<f64>, Failure> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, steps } => {
                if *steps < 1 {
                    return Err(Failure::Config("grid needs steps >= 1".into()));
                }
                (0..=*steps)
                    .map(|k| start + (stop - start) * k as f64 / *steps as f64)
                    .collect()
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Failure::Config("grid must be nonempty and finite".into()));
        }
        Ok(v)
    }

    fn check_within(&self, lo: f64, hi: f64, what: &str) -> std::result::Result<Vec<f64>, Failure> {
        let v = self.values()?;
        if let Some(x) = v.iter().find(|&&x| !(lo..=hi).contains(&x)) {
            return Err(Failure::Config(format!("{what} grid value {x} outside [{lo}, {hi}]")));
        }
        Ok(v)
    }
}

fn header_lines(rc: &RunConfig) -> std::result::Result<String, Failure> {
    let cfg = serde_json::to_string(rc).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(format!("# exit-transport {}\n# config: {cfg}\n", crate::VERSION))
}

/// Writes `<stem>.csv`, prefixed by the provenance comment lines.
fn write_csv(rc: &RunConfig, stem: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Run {
    if !rc.formats.contains(&Format::Csv) {
        return Ok(());
    }
    let mut buf = header_lines(rc)?.into_bytes();
    body(&mut buf)?;
    fs::write(rc.output_dir.join(format!("{stem}.csv")), buf)?;
    Ok(())
}

fn write_json(rc: &RunConfig, stem: &str, data: Value) -> Run {
    if !rc.formats.contains(&Format::Json) {
        return Ok(());
    }
    let doc = json!({ "version": crate::VERSION, "config": rc, "data": data });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::write(rc.output_dir.join(format!("{stem}.json")), text + "\n")?;
    Ok(())
}

fn default_lambda_grid() -> Grid {
    Grid::Range {
        start: 1.0,
        stop: 5.0,
        steps: 40,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaledScanConfig {
    #[serde(default = "two")]
    p: f64,
    #[serde(default = "default_lambda_grid")]
    lambda_grid: Grid,
    #[serde(default = "half")]
    m2: f64,
}

fn two() -> f64 {
    2.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize)]
struct ScaledRow {
    lambda: f64,
    lambda2_scaled: f64,
    tsame2: f64,
    tind2_lower: f64,
    tind2_upper: f64,
    tind2_disc: f64,
}

fn scaled_scan(rc: &RunConfig) -> Run {
    let cfg: ScaledScanConfig = parse(rc)?;
    if cfg.p != 2.0 {
        return Err(Failure::Config(format!("scaled-scan is defined for p = 2, got {}", cfg.p)));
    }
    let grid = cfg.lambda_grid.check_within(1.0, f64::INFINITY, "lambda")?;
    let moments = Moments::new(2.0, 1.0, cfg.m2)?;
    let table = &disc_quantile_sampler()?.table;
    let mut rows = Vec::with_capacity(grid.len());
    let mut violations = Vec::new();
    for &lam in &grid {
        let row = ScaledRow {
            lambda: lam,
            lambda2_scaled: lambda_scaled(2.0, lam, &moments)?.value,
            tsame2: tsame2_scaled(lam, cfg.m2)?,
            tind2_lower: ((3.0 * lam * lam + 1.0) * cfg.m2).sqrt(),
            tind2_upper: (3.0 * (lam * lam + 1.0) * cfg.m2).sqrt(),
            tind2_disc: tind2_scaled_disc(lam, table)?,
        };
        let tol = 1e-9;
        let mut ordered = row.lambda2_scaled <= row.tsame2 + tol && row.tsame2 <= row.tind2_lower + tol;
        if cfg.m2 == 0.5 {
            ordered &= row.tind2_lower <= row.tind2_disc + tol && row.tind2_disc <= row.tind2_upper + tol;
        }
        if !ordered {
            violations.push(lam);
        }
        rows.push(row);
    }
    write_csv(rc, "scaled_scan", |w| {
        writeln!(w, "lambda,lambda2_scaled,tsame2,tind2_lower,tind2_upper,tind2_disc")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.lambda, r.lambda2_scaled, r.tsame2, r.tind2_lower, r.tind2_upper, r.tind2_disc
            )?;
        }
        Ok(())
    })?;
    write_json(rc, "scaled_scan", json!(rows))?;
    if !violations.is_empty() {
        return Err(Failure::Tolerance(format!("cost ordering fails at lambda = {violations:?}")));
    }
    Ok(())
}

fn default_rho_grid() -> Grid {
    Grid::Range {
        start: 1.0,
        stop: 50.0,
        steps: 98,
    }
}

fn default_ells() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdConfig {
    #[serde(default = "default_ells")]
    ell: Vec<f64>,
    #[serde(default = "default_rho_grid")]
    rho_grid: Grid,
    #[serde(default = "default_root_tol")]
    tol: f64,
}

fn default_root_tol() -> f64 {
    1e-7
}

fn threshold(rc: &RunConfig) -> Run {
    let cfg: ThresholdConfig = parse(rc)?;
    let grid = cfg.rho_grid.check_within(1.0, 50.0, "rho")?;
    let series = default_double_series();
    let mut values = Vec::with_capacity(grid.len());
    for &rho in &grid {
        let e = f_rho(rho, series)?;
        values.push((rho, e.value, e.truncation_bound));
    }
    let crossings = values
        .windows(2)
        .filter(|w| (w[0].1 - 3.0).signum() != (w[1].1 - 3.0).signum())
        .count();
    let roots = cfg
        .ell
        .iter()
        .map(|&ell| coupling_threshold(ell, cfg.tol, series))
        .collect::<Result<Vec<_>>>()?;
    write_csv(rc, "threshold_f", |w| {
        writeln!(w, "rho,F(rho)")?;
        for (rho, f, _) in &values {
            writeln!(w, "{rho},{f}")?;
        }
        Ok(())
    })?;
    write_json(
        rc,
        "threshold",
        json!({
            "thresholds": roots,
            "sign_changes_on_grid": crossings,
            "f": values.iter().map(|(r, f, b)| json!({"rho": r, "f": f, "truncation_bound": b})).collect::<Vec<_>>(),
        }),
    )?;
    for t in &roots {
        println!(
            "ell={} rho*={:.6} a*={:.6} a*/(ell/2)={:.6} overlap={:.6}",
            t.ell, t.rho_star, t.a_star, t.a_star_ratio, t.overlap_width
        );
    }
    if crossings != 1 {
        return Err(Failure::Tolerance(format!(
            "F - 3 changes sign {crossings} times on the grid, expected once"
        )));
    }
    Ok(())
}

fn default_match_domains() -> (Domain, Domain) {
    let a = Domain::Rectangle {
        x_lo: -1.0,
        x_hi: 2.0,
        y_lo: -1.0,
        y_hi: 1.0,
    };
    let b = Domain::Disc {
        center: crate::geometry::Point::new(-0.5, 0.3),
        radius: 1.2,
    };
    (a, b)
}

fn default_match_n() -> usize {
    500
}

fn default_step() -> f64 {
    1e-4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatchConfig {
    domain_a: Option<Domain>,
    domain_b: Option<Domain>,
    #[serde(default = "default_match_n")]
    n: usize,
    #[serde(default = "two")]
    p: f64,
    #[serde(default = "default_step")]
    step: f64,
    /// Seed of the second sample; `seed + 1` when absent.
    seed_b: Option<u64>,
    /// Row of the matching whose two paths are traced; the row with the
    /// median matched cost when absent.
    lifted_row: Option<usize>,
}

fn match_demo(rc: &RunConfig) -> Run {
    let cfg: MatchConfig = parse(rc)?;
    if cfg.n == 0 || cfg.n > MATCH_MAX_N {
        return Err(Failure::Config(format!("match needs 1 <= n <= {MATCH_MAX_N}, got {}", cfg.n)));
    }
    let (da, db) = default_match_domains();
    let da = cfg.domain_a.unwrap_or(da).validated()?;
    let db = cfg.domain_b.unwrap_or(db).validated()?;
    let seed_b = cfg.seed_b.unwrap_or(rc.seed.wrapping_add(1));
    let ca = SimConfig::for_domains(std::slice::from_ref(&da), cfg.step, rc.seed, cfg.n)?;
    let cb = SimConfig::for_domains(std::slice::from_ref(&db), cfg.step, seed_b, cfg.n)?;
    let a = sample_exit_pairs(&da, &ca)?;
    let b = sample_exit_pairs(&db, &cb)?;
    let min = empirical_lambda(cfg.p, &a, &b)?;
    let max = empirical_phi(cfg.p, &a, &b)?;

    write_csv(rc, "exits_a", |w| a.write_csv(w))?;
    write_csv(rc, "exits_b", |w| b.write_csv(w))?;
    for m in [&min, &max] {
        let stem = mode_stem(m);
        write_csv(rc, &format!("matching_{stem}"), |w| m.write_csv(w))?;
        let row = match cfg.lifted_row {
            Some(r) if r < cfg.n => r,
            Some(r) => return Err(Failure::Config(format!("lifted_row {r} is not below n = {}", cfg.n))),
            None => median_row(m),
        };
        let traces = lifted_traces(m, row, (&da, &a, &ca), (&db, &b, &cb))?;
        write_csv(rc, &format!("paths_{stem}"), |w| {
            writeln!(w, "side,path_index,step,time,re,im")?;
            for (side, (index, points)) in ["a", "b"].iter().zip(&traces) {
                for p in points {
                    writeln!(w, "{side},{index},{},{},{},{}", p.step, p.time, p.position.re, p.position.im)?;
                }
            }
            Ok(())
        })?;
    }
    let summary = json!({
        "n": cfg.n,
        "p": cfg.p,
        "lambda_hat": min.value,
        "phi_hat": max.value,
        "rejected_a": a.provenance.rejected,
        "rejected_b": b.provenance.rejected,
        "min": min.summary(),
        "max": max.summary(),
    });
    write_json(rc, "match_summary", summary)?;
    println!("Lambda_hat={} Phi_hat={}", min.value, max.value);
    if min.value > max.value {
        return Err(Failure::Tolerance(format!(
            "Lambda_hat {} exceeds Phi_hat {}",
            min.value, max.value
        )));
    }
    Ok(())
}

fn mode_stem(m: &Matching) -> &'static str {
    match m.mode {
        crate::transport::Mode::Min => "min",
        crate::transport::Mode::Max => "max",
    }
}

fn median_row(m: &Matching) -> usize {
    let mut idx: Vec<usize> = (0..m.n()).collect();
    idx.sort_by(|&i, &j| m.matched_costs[i].total_cmp(&m.matched_costs[j]).then(i.cmp(&j)));
    idx[idx.len() / 2]
}

type Side<'a> = (&'a Domain, &'a SampleSet, &'a SimConfig);

/// Re-simulates the two paths joined by row `row` of the matching.
fn lifted_traces(
    m: &Matching,
    row: usize,
    a: Side<'_>,
    b: Side<'_>,
) -> Result<Vec<(u64, Vec<crate::sampler::TracePoint>)>> {
    let pairs = lift_matched_paths(m, &a.1.path_indices, &b.1.path_indices)?;
    let (&ia, &ib) = pairs[row];
    let mut out = Vec::with_capacity(2);
    for ((domain, _, cfg), index) in [(a, ia), (b, ib)] {
        let (_, trace) = simulate_with_trace(std::slice::from_ref(domain), cfg, index)?;
        let mut points = trace.points;
        if let Some(c) = trace.crossings.first() {
            if let Some(exit) = trace_exit(domain, c, cfg.step) {
                points.push(exit);
            }
        }
        out.push((index, points));
    }
    Ok(out)
}

fn trace_exit(domain: &Domain, c: &crate::sampler::Crossing, h: f64) -> Option<crate::sampler::TracePoint> {
    let trace = crate::sampler::PathTrace {
        path_index: 0,
        stride: 1,
        points: Vec::new(),
        crossings: vec![*c],
    };
    let e = trace.exit_pair(c.domain, domain, h)?;
    Some(crate::sampler::TracePoint {
        step: c.outside.step,
        time: e.time,
        position: e.position,
    })
}

fn default_p_list() -> Vec<f64> {
    vec![2.0, 3.0, 4.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscExactConfig {
    #[serde(default = "default_p_list")]
    p: Vec<f64>,
    #[serde(default = "default_lambda_grid")]
    lambda_grid: Grid,
}

fn disc_exact(rc: &RunConfig) -> Run {
    let cfg: DiscExactConfig = parse(rc)?;
    let grid = cfg.lambda_grid.check_within(1.0, f64::INFINITY, "lambda")?;
    if let Some(p) = cfg.p.iter().find(|&&p| !(p >= 2.0) || !p.is_finite()) {
        return Err(Failure::Config(format!("the disc formulas need p >= 2, got {p}")));
    }
    let table = &disc_quantile_sampler()?.table;
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for &p in &cfg.p {
        let m = Moments::disc(p, table)?;
        let rep = repulsion_disc(p, table)?;
        for &lam in &grid {
            let phi = phi_disc(p, lam, table)?;
            let tind = tind_disc(p, lam, table)?;
            let bound = phi_tind_gap_bound(p, lam, m.m_p);
            if phi - tind < bound {
                violations.push((p, lam));
            }
            rows.push(json!({
                "p": p, "lambda": lam, "phi": phi, "tind": tind,
                "gap": phi - tind, "gap_bound": bound, "repulsion": rep,
            }));
        }
    }
    write_csv(rc, "disc_exact", |w| {
        writeln!(w, "p,lambda,phi,tind,gap,gap_bound,repulsion")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r["p"], r["lambda"], r["phi"], r["tind"], r["gap"], r["gap_bound"], r["repulsion"]
            )?;
        }
        Ok(())
    })?;
    write_json(rc, "disc_exact", json!(rows))?;
    if !violations.is_empty() {
        return Err(Failure::Tolerance(format!("gap below its bound at (p, lambda) = {violations:?}")));
    }
    Ok(())
}

fn default_norm_domains() -> Vec<Domain> {
    vec![
        Domain::Disc {
            center: crate::geometry::Point::ORIGIN,
            radius: 1.0,
        },
        Domain::EllipticAnnulus {
            c: 1.0,
            alpha: 0.4,
            gamma: 0.9,
            beta: 1.3,
        },
    ]
}

fn default_norm_n() -> usize {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormConfig {
    #[serde(default = "default_norm_domains")]
    domains: Vec<Domain>,
    #[serde(default = "default_norm_n")]
    n: usize,
    #[serde(default = "default_step")]
    step: f64,
}

/// Closed-form mean exit time from the origin, where one is known.
fn closed_form_mean_exit_time(d: &Domain) -> Result<Option<f64>> {
    Ok(match d {
        Domain::Disc { center, radius } => Some(0.5 * (radius * radius - center.norm_sqr())),
        Domain::VerticalStrip { x_lo, x_hi } => Some(-x_lo * x_hi),
        Domain::Rectangle { x_lo, x_hi, y_lo, y_hi } => {
            Some(RectangleExitLaw::new(*x_lo, *x_hi, *y_lo, *y_hi, SeriesConfig::default())?.mean())
        }
        Domain::EllipticAnnulus { c, alpha, gamma, beta } => {
            Some(elliptic_annulus_mean_exit_time(*c, *alpha, *gamma, *beta)?)
        }
        Domain::Scaled { inner, lambda } => closed_form_mean_exit_time(inner)?.map(|t| t * lambda * lambda),
        Domain::ReflectedY { inner } => closed_form_mean_exit_time(inner)?,
        _ => None,
    })
}

/// Upper bound on the boundary gradient of the mean exit time function,
/// where one is known; it scales the Euler bias allowance.
fn boundary_gradient(d: &Domain) -> Option<f64> {
    match d {
        // |grad u| = |z - center| = radius on the circle
        Domain::Disc { radius, .. } => Some(*radius),
        Domain::VerticalStrip { x_lo, x_hi } => Some(x_hi - x_lo),
        Domain::EllipticAnnulus { c, alpha, beta, .. } => Some(elliptic_annulus_max_boundary_gradient(*c, *alpha, *beta)),
        Domain::Scaled { inner, lambda } => boundary_gradient(inner).map(|g| g * lambda),
        Domain::ReflectedY { inner } => boundary_gradient(inner),
        _ => None,
    }
}

fn norm(rc: &RunConfig) -> Run {
    let cfg: NormConfig = parse(rc)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (k, d) in cfg.domains.iter().enumerate() {
        let d = d.clone().validated()?;
        let exact = closed_form_mean_exit_time(&d)?.map(|t| (3.0 * t).sqrt());
        let sim = SimConfig::for_domains(std::slice::from_ref(&d), cfg.step, rc.seed.wrapping_add(k as u64), cfg.n)?;
        let sample = sample_exit_pairs(&d, &sim)?;
        let tau = Estimate::from_samples(&sample.times())?;
        let mc = (3.0 * tau.mean).sqrt();
        let se = 1.5 * tau.se / mc;
        let allowance = boundary_gradient(&d).map(|g| 1.5 * EXIT_OVERSHOOT * cfg.step.sqrt() * g / mc);
        if let (Some(x), Some(a)) = (exact, allowance) {
            if (mc - x).abs() > 3.0 * se + a {
                failures.push(k);
            }
        }
        rows.push((d, exact, mc, se, allowance));
    }
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    write_csv(rc, "norm", |w| {
        writeln!(w, "domain,closed_form,monte_carlo,se,bias_allowance")?;
        for (d, exact, mc, se, a) in &rows {
            let name = serde_json::to_string(d).unwrap_or_default().replace('"', "\"\"");
            writeln!(w, "\"{name}\",{},{mc},{se},{}", opt(*exact), opt(*a))?;
        }
        Ok(())
    })?;
    write_json(
        rc,
        "norm",
        json!(rows
            .iter()
            .map(|(d, exact, mc, se, a)| json!({
                "domain": d, "closed_form": exact, "monte_carlo": mc, "se": se, "bias_allowance": a,
            }))
            .collect::<Vec<_>>()),
    )?;
    for (d, exact, mc, se, _) in &rows {
        let exact = exact.map_or_else(|| "n/a".to_string(), |x| format!("{x:.5}"));
        println!("{}: closed form {exact} Monte Carlo {mc:.5} +- {se:.5}", domain_label(d));
    }
    if !failures.is_empty() {
        return Err(Failure::Tolerance(format!("Monte Carlo norm disagrees for domains {failures:?}")));
    }
    Ok(())
}

fn domain_label(d: &Domain) -> String {
    serde_json::to_value(d)
        .ok()
        .and_then(|v| v.get("type").and_then(|t| t.as_str()).map(str::to_string))
        .unwrap_or_else(|| "domain".into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    checks: Option<Vec<u8>>,
}

fn run_verify(rc: &RunConfig) -> Run {
    let cfg: VerifyConfig = parse(rc)?;
    let ids: Vec<u8> = cfg.checks.unwrap_or_else(|| verify::CHECKS.iter().map(|c| c.0).collect());
    if let Some(id) = ids.iter().find(|&&id| !verify::CHECKS.iter().any(|c| c.0 == id)) {
        return Err(Failure::Config(format!("no check with id {id}")));
    }
    let mut results = Vec::new();
    for id in ids {
        let c = verify::run(id, rc.seed);
        println!("{c}");
        results.push(c);
    }
    write_json(rc, "verify", json!(results))?;
    let failed: Vec<u8> = results.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    if !failed.is_empty() {
        return Err(Failure::Tolerance(format!("checks {failed:?} failed")));
    }
    Ok(())
}
