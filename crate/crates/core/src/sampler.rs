//! Brownian exit pairs: a pathwise Euler scheme that records first exits
//! from several domains along one trajectory, and exact samplers for the
//! disc (exit pair) and for strips (exit time only).

use std::io::Write;
use std::sync::OnceLock;

use rand::distr::{Distribution, Open01};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::laws::{DiscExitLaw, ExitTimeLaw, IntervalExitLaw, SeriesConfig};
use crate::exact::quantile::QuantileSampler;
use crate::geometry::{Domain, Point};
use crate::rng::{path_rng, TAG_DISC_EXACT, TAG_EULER, TAG_STRIP_EXACT};

/// Fraction of capped paths tolerated before sampling gives up.
pub const CAP_BUDGET: f64 = 0.01;

/// `-zeta(1/2) / sqrt(2 pi)`: the mean overshoot of a discretely monitored
/// Brownian motion over a flat boundary, in units of `sqrt(h)`. The Euler
/// exit time of a domain is late by about this times `sqrt(h)` times the
/// normal derivative of the mean exit time function at the exit point.
pub const EXIT_OVERSHOOT: f64 = 0.5825971579390106;

/// Far from the boundary, `K` Euler steps are drawn at once as one Gaussian
/// increment of variance `K h`, with `K h <= d^2 / MACRO_SAFETY` for the
/// distance `d` to the nearest active boundary. A skipped intermediate grid
/// point could then only lie outside after a 7 sigma excursion of one
/// coordinate, probability below `1e-11` per macro step.
pub const MACRO_SAFETY: f64 = 98.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Time increment `h`.
    pub step: f64,
    /// Paths still inside at this time are capped.
    pub max_time: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl SimConfig {
    pub fn new(step: f64, max_time: f64, seed: u64, n_paths: usize) -> Result<Self> {
        let cfg = Self {
            step,
            max_time,
            seed,
            n_paths,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uses [`default_cap`] of the largest domain.
    pub fn for_domains(domains: &[Domain], step: f64, seed: u64, n_paths: usize) -> Result<Self> {
        let mut cap: f64 = 0.0;
        for d in domains {
            cap = cap.max(default_cap(d)?);
        }
        Self::new(step, cap.max(step), seed, n_paths)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.max_time.is_finite() || self.step > self.max_time {
            return Err(Error::InvalidParameter(format!(
                "need 0 < step <= max_time < inf, got step {} and max_time {}",
                self.step, self.max_time
            )));
        }
        Ok(())
    }

    fn max_steps(&self) -> u64 {
        (self.max_time / self.step).floor() as u64
    }
}

/// `50 D^2` for a diameter bound `D` (twice the slab half-width, which is
/// finite for strips as well).
pub fn default_cap(d: &Domain) -> Result<f64> {
    let w = d
        .slab_half_width()
        .ok_or_else(|| Error::InvalidDomain("no finite width bound for time cap".into()))?;
    Ok(50.0 * (2.0 * w).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitPair {
    pub position: Point,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitOutcome {
    Exited(ExitPair),
    CapReached,
}

impl ExitOutcome {
    pub fn pair(&self) -> Option<&ExitPair> {
        match self {
            ExitOutcome::Exited(p) => Some(p),
            ExitOutcome::CapReached => None,
        }
    }
}

/// First exits from several domains read off one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiExitRecord {
    pub path_index: u64,
    pub exits: Vec<ExitOutcome>,
}

impl MultiExitRecord {
    pub fn all_exited(&self) -> bool {
        self.exits.iter().all(|e| e.pair().is_some())
    }

    /// Exit pair of domain `i`; `CapReached` if it never left.
    pub fn pair(&self, i: usize) -> Result<&ExitPair> {
        self.exits
            .get(i)
            .ok_or(Error::SizeMismatch {
                left: i + 1,
                right: self.exits.len(),
            })?
            .pair()
            .ok_or(Error::CapReached {
                path_index: self.path_index,
                max_time: f64::NAN,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Number of elapsed Euler steps.
    pub step: u64,
    pub time: f64,
    pub position: Point,
}

/// The segment on which a domain's first exit was detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub domain: usize,
    pub inside: TracePoint,
    pub outside: TracePoint,
}

/// Decimated trajectory: one point every `stride` Euler steps (the first
/// position reached at or after each multiple), plus every crossing segment.
/// Meant for display, not for re-simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub path_index: u64,
    pub stride: u64,
    pub points: Vec<TracePoint>,
    pub crossings: Vec<Crossing>,
}

impl PathTrace {
    /// Recomputes the exit pair of `domains[c.domain]` from its stored
    /// crossing segment, exactly as the simulation did.
    pub fn exit_pair(&self, domain_index: usize, domain: &Domain, h: f64) -> Option<ExitPair> {
        let c = self.crossings.iter().find(|c| c.domain == domain_index)?;
        Some(crossing_pair(domain, &c.inside, &c.outside, h))
    }
}

pub fn trace_stride(h: f64) -> u64 {
    ((1.0 / (100.0 * h)).ceil() as u64).max(1)
}

fn crossing_param(domain: &Domain, a: Point, b: Point) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if domain.contains(a.lerp(b, mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn crossing_pair(domain: &Domain, inside: &TracePoint, outside: &TracePoint, h: f64) -> ExitPair {
    let theta = crossing_param(domain, inside.position, outside.position);
    let span = (outside.step - inside.step) as f64;
    ExitPair {
        position: inside.position.lerp(outside.position, theta),
        time: (inside.step as f64 + theta * span) * h,
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> Point {
    Point::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

fn run_path(
    domains: &[Domain],
    cfg: &SimConfig,
    path_index: u64,
    mut trace: Option<&mut PathTrace>,
) -> MultiExitRecord {
    let h = cfg.step;
    let max_steps = cfg.max_steps();
    let mut rng = path_rng(cfg.seed, TAG_EULER, path_index);
    let mut exits = vec![ExitOutcome::CapReached; domains.len()];
    let mut active: Vec<usize> = (0..domains.len()).collect();
    let mut pos = Point::ORIGIN;
    let mut k: u64 = 0;
    let stride = trace.as_ref().map_or(u64::MAX, |t| t.stride);
    if let Some(t) = trace.as_deref_mut() {
        t.points.push(TracePoint {
            step: 0,
            time: 0.0,
            position: pos,
        });
    }
    while !active.is_empty() && k < max_steps {
        let d = active
            .iter()
            .map(|&i| domains[i].distance_bound_unchecked(pos))
            .fold(f64::INFINITY, f64::min);
        let macro_k = (d * d / (MACRO_SAFETY * h)).floor();
        let kk = if macro_k >= 2.0 {
            (macro_k.min(1e15) as u64).min(max_steps - k)
        } else {
            1
        };
        let next = pos + gaussian(&mut rng) * (kk as f64 * h).sqrt();
        let k_next = k + kk;
        let inside = TracePoint {
            step: k,
            time: k as f64 * h,
            position: pos,
        };
        let outside = TracePoint {
            step: k_next,
            time: k_next as f64 * h,
            position: next,
        };
        active.retain(|&i| {
            if domains[i].contains(next) {
                return true;
            }
            exits[i] = ExitOutcome::Exited(crossing_pair(&domains[i], &inside, &outside, h));
            if let Some(t) = trace.as_deref_mut() {
                t.crossings.push(Crossing {
                    domain: i,
                    inside,
                    outside,
                });
            }
            false
        });
        if let Some(t) = trace.as_deref_mut() {
            if k_next / stride > k / stride {
                t.points.push(outside);
            }
        }
        pos = next;
        k = k_next;
    }
    MultiExitRecord { path_index, exits }
}

fn check_inputs(domains: &[Domain], cfg: &SimConfig, path_index: u64) -> Result<()> {
    cfg.validate()?;
    for d in domains {
        d.validate()?;
    }
    if path_index >= cfg.n_paths as u64 {
        return Err(Error::InvalidParameter(format!(
            "path index {path_index} must be below n_paths = {}",
            cfg.n_paths
        )));
    }
    Ok(())
}

/// One trajectory, with the first exit from each domain. Domains never left
/// before `cfg.max_time` are marked [`ExitOutcome::CapReached`].
pub fn simulate_first_exits(domains: &[Domain], cfg: &SimConfig, path_index: u64) -> Result<MultiExitRecord> {
    check_inputs(domains, cfg, path_index)?;
    Ok(run_path(domains, cfg, path_index, None))
}

/// Same trajectory as [`simulate_first_exits`], also returning a decimated
/// trace of it.
pub fn simulate_with_trace(
    domains: &[Domain],
    cfg: &SimConfig,
    path_index: u64,
) -> Result<(MultiExitRecord, PathTrace)> {
    check_inputs(domains, cfg, path_index)?;
    Ok(trace_path(domains, cfg, path_index))
}

fn trace_path(domains: &[Domain], cfg: &SimConfig, path_index: u64) -> (MultiExitRecord, PathTrace) {
    let mut trace = PathTrace {
        path_index,
        stride: trace_stride(cfg.step),
        points: Vec::new(),
        crossings: Vec::new(),
    };
    let rec = run_path(domains, cfg, path_index, Some(&mut trace));
    (rec, trace)
}

/// `n_paths` records in which every domain was exited. Capped paths are
/// replaced by fresh path indices `n_paths, n_paths + 1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSample {
    pub records: Vec<MultiExitRecord>,
    pub rejected: usize,
}

pub fn sample_multi_exits(domains: &[Domain], cfg: &SimConfig) -> Result<MultiSample> {
    cfg.validate()?;
    for d in domains {
        d.validate()?;
    }
    let n = cfg.n_paths;
    let mut records: Vec<MultiExitRecord> = (0..n as u64)
        .into_par_iter()
        .map(|i| run_path(domains, cfg, i, None))
        .collect();
    let mut attempted = n;
    let mut rejected = 0;
    let mut next_index = n as u64;
    loop {
        let failed: Vec<usize> = (0..n).filter(|&i| !records[i].all_exited()).collect();
        if failed.is_empty() {
            break;
        }
        rejected += failed.len();
        if rejected as f64 > CAP_BUDGET * attempted as f64 {
            return Err(Error::CapRejectionRateExceeded { rejected, attempted });
        }
        let fresh: Vec<MultiExitRecord> = (0..failed.len() as u64)
            .into_par_iter()
            .map(|j| run_path(domains, cfg, next_index + j, None))
            .collect();
        next_index += failed.len() as u64;
        attempted += failed.len();
        for (slot, rec) in failed.into_iter().zip(fresh) {
            records[slot] = rec;
        }
    }
    Ok(MultiSample { records, rejected })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    ExactDisc,
    ExactStripTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scheme: Scheme,
    pub seed: u64,
    pub n: usize,
    pub step: Option<f64>,
    pub max_time: Option<f64>,
    pub rejected: usize,
    pub version: String,
}

/// `N` exit pairs from one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub pairs: Vec<ExitPair>,
    /// Stream index each pair was generated from.
    pub path_indices: Vec<u64>,
    pub domain: Domain,
    pub provenance: Provenance,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.time).collect()
    }

    /// Writes `index,re,im,time` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,re,im,time")?;
        for (i, p) in self.pairs.iter().enumerate() {
            writeln!(out, "{i},{},{},{}", p.position.re, p.position.im, p.time)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Euler exit pairs of `d` from `cfg.n_paths` accepted paths.
pub fn sample_exit_pairs(d: &Domain, cfg: &SimConfig) -> Result<SampleSet> {
    let ms = sample_multi_exits(std::slice::from_ref(d), cfg)?;
    let mut pairs = Vec::with_capacity(ms.records.len());
    let mut path_indices = Vec::with_capacity(ms.records.len());
    for r in &ms.records {
        pairs.push(*r.pair(0)?);
        path_indices.push(r.path_index);
    }
    Ok(SampleSet {
        pairs,
        path_indices,
        domain: d.clone(),
        provenance: Provenance {
            scheme: Scheme::Euler,
            seed: cfg.seed,
            n: cfg.n_paths,
            step: Some(cfg.step),
            max_time: Some(cfg.max_time),
            rejected: ms.rejected,
            version: crate::VERSION.to_string(),
        },
    })
}

pub const DISC_QUANTILE_CELLS: usize = 2000;

/// Shared unit-disc exit-time quantile, built on first use.
pub fn disc_quantile_sampler() -> Result<&'static QuantileSampler<DiscExitLaw>> {
    static CELL: OnceLock<QuantileSampler<DiscExitLaw>> = OnceLock::new();
    if let Some(s) = CELL.get() {
        return Ok(s);
    }
    let law = DiscExitLaw::new(SeriesConfig::default())?;
    let mut s = QuantileSampler::new(law, DISC_QUANTILE_CELLS)?;
    s.table.bessel_zeros = s.law.bessel_zeros().to_vec();
    let _ = CELL.set(s);
    Ok(CELL.get().expect("initialized above"))
}

/// Exact exit pairs of the disc of radius `radius` about the origin: uniform
/// angle and, independently, `radius^2 Q(r)` for uniform `r`.
pub fn sample_disc_exact(radius: f64, n: usize, seed: u64) -> Result<SampleSet> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let q = disc_quantile_sampler()?;
    let r2 = radius * radius;
    let pairs: Vec<ExitPair> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, TAG_DISC_EXACT, i);
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let r: f64 = Open01.sample(&mut rng);
            ExitPair {
                position: Point::from_polar(radius, angle),
                time: r2 * q.quantile(r),
            }
        })
        .collect();
    Ok(SampleSet {
        pairs,
        path_indices: (0..n as u64).collect(),
        domain: Domain::centered_disc(radius)?,
        provenance: Provenance {
            scheme: Scheme::ExactDisc,
            seed,
            n,
            step: None,
            max_time: None,
            rejected: 0,
            version: crate::VERSION.to_string(),
        },
    })
}

/// Inverse-transform sampler for the exit time of the strip
/// `{-eps < x < L}`.
pub fn strip_time_sampler(eps: f64, l: f64) -> Result<QuantileSampler<IntervalExitLaw>> {
    if !(eps > 0.0 && l > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "strip needs eps > 0 and L > 0, got ({eps}, {l})"
        )));
    }
    let law = IntervalExitLaw::new(-eps, l, SeriesConfig::default())?;
    // Fails early if the series cannot reach tolerance.
    law.survival_checked(law.mean())?;
    QuantileSampler::new(law, DISC_QUANTILE_CELLS)
}

pub fn sample_strip_times_with(q: &QuantileSampler<IntervalExitLaw>, n: usize, seed: u64) -> Vec<f64> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, TAG_STRIP_EXACT, i);
            let r: f64 = Open01.sample(&mut rng);
            q.quantile(r)
        })
        .collect()
}

/// Exact exit times (no positions) of the strip `{-eps < x < L}`.
pub fn sample_strip_exit_times_exact(eps: f64, l: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(sample_strip_times_with(&strip_time_sampler(eps, l)?, n, seed))
}
