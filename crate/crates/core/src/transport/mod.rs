//! Empirical transport between exit-pair samples: the parabolic cost,
//! optimal and supremal assignments, the same-path and independent-path
//! estimators, and lifting a matching to whole paths.

pub mod hungarian;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sampler::{ExitPair, MultiExitRecord, SampleSet};
use crate::stats::{compensated_sum, Estimate, Kahan};

/// `|z - w|^p + |t - s|^(p/2)`.
pub fn cost(p: f64, a: &ExitPair, b: &ExitPair) -> f64 {
    let dz = a.position - b.position;
    let dt = (a.time - b.time).abs();
    if p == 2.0 {
        dz.norm_sqr() + dt
    } else {
        dz.norm().powf(p) + dt.powf(0.5 * p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

/// Row-major `n x n` matrix of costs between two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub n: usize,
    pub p: f64,
    pub entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_pairs(p: f64, a: &[ExitPair], b: &[ExitPair]) -> Result<Self> {
        check_p(p)?;
        if a.len() != b.len() {
            return Err(Error::SizeMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let n = a.len();
        let mut entries = vec![0.0; n * n];
        entries
            .par_chunks_mut(n.max(1))
            .zip(a.par_iter())
            .for_each(|(row, x)| {
                for (e, y) in row.iter_mut().zip(b) {
                    *e = cost(p, x, y);
                }
            });
        Ok(Self { n, p, entries })
    }

    /// Wraps precomputed entries (for tests and external matrices).
    pub fn from_entries(n: usize, p: f64, entries: Vec<f64>) -> Result<Self> {
        check_p(p)?;
        if entries.len() != n * n {
            return Err(Error::SizeMismatch {
                left: entries.len(),
                right: n * n,
            });
        }
        Ok(Self { n, p, entries })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(k) = self.entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: k / self.n,
                col: k % self.n,
            });
        }
        Ok(())
    }

    /// Mean cost over all `n^2` cells: the value of the product coupling.
    pub fn mean_all(&self) -> f64 {
        compensated_sum(self.entries.iter().copied()) / (self.n * self.n) as f64
    }

    fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub mode: Mode,
    pub p: f64,
    /// `permutation[i] = sigma(i)`.
    pub permutation: Vec<usize>,
    /// `cost[i][sigma(i)]`.
    pub matched_costs: Vec<f64>,
    /// Mean matched cost.
    pub mean_cost: f64,
    /// `mean_cost^(1/p)`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSummary {
    pub mode: Mode,
    pub p: f64,
    pub n: usize,
    pub value: f64,
}

impl Matching {
    fn new(m: &CostMatrix, mode: Mode, permutation: Vec<usize>) -> Self {
        let matched_costs: Vec<f64> = permutation
            .iter()
            .enumerate()
            .map(|(i, &j)| m.get(i, j))
            .collect();
        let mean_cost = if matched_costs.is_empty() {
            0.0
        } else {
            compensated_sum(matched_costs.iter().copied()) / matched_costs.len() as f64
        };
        Self {
            mode,
            p: m.p,
            permutation,
            matched_costs,
            mean_cost,
            value: mean_cost.powf(1.0 / m.p),
        }
    }

    pub fn n(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.n()];
        self.permutation
            .iter()
            .all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
    }

    pub fn summary(&self) -> MatchingSummary {
        MatchingSummary {
            mode: self.mode,
            p: self.p,
            n: self.n(),
            value: self.value,
        }
    }

    /// Writes `i,sigma_i,cost_ij` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,sigma_i,cost_ij")?;
        for (i, (&j, c)) in self.permutation.iter().zip(&self.matched_costs).enumerate() {
            writeln!(out, "{i},{j},{c}")?;
        }
        Ok(())
    }
}

fn tie_tolerance(m: &CostMatrix) -> f64 {
    1e-12 * m.max_entry().max(1e-300) * (m.n as f64).max(1.0)
}

/// Minimum-cost perfect matching; among optimal permutations the
/// lexicographically smallest is returned.
pub fn assign_min(m: &CostMatrix) -> Result<Matching> {
    m.check_finite()?;
    let c = |i: usize, j: usize| m.get(i, j);
    let mut sol = hungarian::solve(m.n, &m.entries);
    hungarian::lexicographic_ties(&mut sol, c, tie_tolerance(m));
    Ok(Matching::new(m, Mode::Min, sol.perm))
}

/// Maximum-cost perfect matching, solved as a minimum on
/// `max_entry - entries`.
pub fn assign_max(m: &CostMatrix) -> Result<Matching> {
    m.check_finite()?;
    let top = m.max_entry();
    let flipped: Vec<f64> = m.entries.iter().map(|e| top - e).collect();
    let mut sol = hungarian::solve(m.n, &flipped);
    drop(flipped);
    lexicographic_max(&mut sol, m, top);
    Ok(Matching::new(m, Mode::Max, sol.perm))
}

fn lexicographic_max(sol: &mut hungarian::Solution, m: &CostMatrix, top: f64) {
    // Ties are judged on the original entries so that the kept permutation
    // never lowers the row-ordered sum of the original costs.
    let neg = |i: usize, j: usize| -m.get(i, j);
    let shifted_u: Vec<f64> = sol.u.iter().map(|u| u - top).collect();
    let mut shifted = hungarian::Solution {
        perm: std::mem::take(&mut sol.perm),
        u: shifted_u,
        v: std::mem::take(&mut sol.v),
    };
    hungarian::lexicographic_ties(&mut shifted, neg, tie_tolerance(m));
    sol.perm = shifted.perm;
}

fn check_sizes(a: &[ExitPair], b: &[ExitPair]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(())
}

/// Empirical optimal cost `Lambda_hat` between two equal-size samples.
pub fn empirical_lambda(p: f64, a: &SampleSet, b: &SampleSet) -> Result<Matching> {
    check_sizes(&a.pairs, &b.pairs)?;
    assign_min(&CostMatrix::from_pairs(p, &a.pairs, &b.pairs)?)
}

/// Empirical supremal cost `Phi_hat` between two equal-size samples.
pub fn empirical_phi(p: f64, a: &SampleSet, b: &SampleSet) -> Result<Matching> {
    check_sizes(&a.pairs, &b.pairs)?;
    assign_max(&CostMatrix::from_pairs(p, &a.pairs, &b.pairs)?)
}

/// Mean cost between the two exits of each record, i.e. the same-path
/// coupling; returns the mean cost (not its `1/p` power) with its standard
/// error.
pub fn same_path_mean_cost(p: f64, records: &[MultiExitRecord]) -> Result<Estimate> {
    check_p(p)?;
    let costs = records
        .iter()
        .map(|r| {
            if r.exits.len() != 2 {
                return Err(Error::SizeMismatch {
                    left: r.exits.len(),
                    right: 2,
                });
            }
            Ok(cost(p, r.pair(0)?, r.pair(1)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Estimate::from_samples(&costs)
}

/// `T_hat^same_p`: the `1/p` power of [`same_path_mean_cost`].
pub fn empirical_same_path(p: f64, records: &[MultiExitRecord]) -> Result<f64> {
    Ok(same_path_mean_cost(p, records)?.mean.powf(1.0 / p))
}

/// Mean cost of the product coupling of two samples, averaged over all
/// `N_a N_b` ordered pairs. `O(N log N)` for `p = 2`, `O(N^2)` otherwise.
pub fn independent_mean_cost(p: f64, a: &[ExitPair], b: &[ExitPair]) -> Result<f64> {
    check_p(p)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if p == 2.0 {
        return Ok(independent_mean_cost2(a, b));
    }
    let total: f64 = a
        .par_iter()
        .map(|x| {
            let mut k = Kahan::default();
            for y in b {
                k.add(cost(p, x, y));
            }
            k.total()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(Kahan::default(), |mut k, x| {
            k.add(x);
            k
        })
        .total();
    Ok(total / (a.len() as f64 * b.len() as f64))
}

/// `p = 2`: `mean|z|^2 + mean|w|^2 - 2 <mean z, mean w>` plus the all-pairs
/// mean of `|t - s|` by sorting.
fn independent_mean_cost2(a: &[ExitPair], b: &[ExitPair]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mean_sq = |s: &[ExitPair]| compensated_sum(s.iter().map(|e| e.position.norm_sqr())) / s.len() as f64;
    let mean_re = |s: &[ExitPair]| compensated_sum(s.iter().map(|e| e.position.re)) / s.len() as f64;
    let mean_im = |s: &[ExitPair]| compensated_sum(s.iter().map(|e| e.position.im)) / s.len() as f64;
    let space = mean_sq(a) + mean_sq(b) - 2.0 * (mean_re(a) * mean_re(b) + mean_im(a) * mean_im(b));
    let mut ta: Vec<f64> = a.iter().map(|e| e.time).collect();
    let mut tb: Vec<f64> = b.iter().map(|e| e.time).collect();
    ta.sort_by(f64::total_cmp);
    tb.sort_by(f64::total_cmp);
    let total_b = compensated_sum(tb.iter().copied());
    let mut below = Kahan::default();
    let mut count = 0usize;
    let mut acc = Kahan::default();
    for &t in &ta {
        while count < tb.len() && tb[count] < t {
            below.add(tb[count]);
            count += 1;
        }
        let c = count as f64;
        let lo = c * t - below.total();
        let hi = (total_b - below.total()) - (nb - c) * t;
        acc.add(lo + hi);
    }
    space + acc.total() / (na * nb)
}

/// `T_hat^ind_p` from the full product coupling of two independent samples.
pub fn empirical_independent(p: f64, a: &SampleSet, b: &SampleSet) -> Result<f64> {
    Ok(independent_mean_cost(p, &a.pairs, &b.pairs)?.powf(1.0 / p))
}

/// Paired variant: mean of `c_p(a_i, b_i)`, with its standard error. Needs
/// equal sizes.
pub fn empirical_independent_paired(p: f64, a: &SampleSet, b: &SampleSet) -> Result<Estimate> {
    check_p(p)?;
    check_sizes(&a.pairs, &b.pairs)?;
    let c: Vec<f64> = a.pairs.iter().zip(&b.pairs).map(|(x, y)| cost(p, x, y)).collect();
    Estimate::from_samples(&c)
}

/// For each `x_i`, `sum_j |x_i - y_j|`, by sorting `y` and prefix sums.
fn abs_deviation_sums(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut ys = y.to_vec();
    ys.sort_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(ys.len() + 1);
    let mut k = Kahan::default();
    prefix.push(0.0);
    for &t in &ys {
        k.add(t);
        prefix.push(k.total());
    }
    let total = prefix[ys.len()];
    let m = ys.len() as f64;
    x.iter()
        .map(|&t| {
            let below = ys.partition_point(|&s| s < t);
            let c = below as f64;
            (c * t - prefix[below]) + ((total - prefix[below]) - (m - c) * t)
        })
        .collect()
}

/// Half the gap `T^ind_2^2 - T^same_2^2`, estimated from one set of
/// two-domain records. The independent coupling uses every ordered pair of
/// distinct records, whose paths are independent, so the `|z|^2` terms that
/// dominate the variance cancel between the two couplings. The standard
/// error is that of the first-order projection of this U-statistic.
pub fn coupling_gap2(records: &[MultiExitRecord]) -> Result<Estimate> {
    let n = records.len();
    if n < 2 {
        return Err(Error::EmptySample);
    }
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for r in records {
        if r.exits.len() != 2 {
            return Err(Error::SizeMismatch {
                left: r.exits.len(),
                right: 2,
            });
        }
        a.push(*r.pair(0)?);
        b.push(*r.pair(1)?);
    }
    let sum_sq = |s: &[ExitPair]| compensated_sum(s.iter().map(|e| e.position.norm_sqr()));
    let sum_z = |s: &[ExitPair]| {
        Point::new(
            compensated_sum(s.iter().map(|e| e.position.re)),
            compensated_sum(s.iter().map(|e| e.position.im)),
        )
    };
    let (sa2, sb2, sa, sb) = (sum_sq(&a), sum_sq(&b), sum_z(&a), sum_z(&b));
    let ta: Vec<f64> = a.iter().map(|e| e.time).collect();
    let tb: Vec<f64> = b.iter().map(|e| e.time).collect();
    let row_t = abs_deviation_sums(&ta, &tb);
    let col_t = abs_deviation_sums(&tb, &ta);
    let nf = n as f64;
    let mut gap = Vec::with_capacity(n);
    let mut proj = Vec::with_capacity(n);
    for i in 0..n {
        let (z, w) = (a[i].position, b[i].position);
        let row = nf * z.norm_sqr() + sb2 - 2.0 * z.dot(sb) + row_t[i];
        let col = nf * w.norm_sqr() + sa2 - 2.0 * w.dot(sa) + col_t[i];
        let diag = cost(2.0, &a[i], &b[i]);
        let ind = (row + col - 2.0 * diag) / (2.0 * (nf - 1.0));
        gap.push(0.5 * (ind - diag));
        proj.push(ind - 0.5 * diag);
    }
    let spread = Estimate::from_samples(&proj)?;
    Ok(Estimate {
        mean: compensated_sum(gap.iter().copied()) / nf,
        se: spread.se,
        n,
    })
}

/// Pairs each stored path of the first sample with the path its exit pair
/// was matched to: `(paths_a[i], paths_b[sigma(i)])`.
pub fn lift_matched_paths<'a, A, B>(
    matching: &Matching,
    paths_a: &'a [A],
    paths_b: &'a [B],
) -> Result<Vec<(&'a A, &'a B)>> {
    let n = matching.n();
    if paths_a.len() != n || paths_b.len() != n {
        return Err(Error::SizeMismatch {
            left: paths_a.len().max(paths_b.len()),
            right: n,
        });
    }
    if !matching.is_bijection() {
        return Err(Error::InvalidParameter("matching is not a bijection".into()));
    }
    Ok(matching
        .permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| (&paths_a[i], &paths_b[j]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::ExitOutcome;

    #[test]
    fn coupling_gap_matches_quadratic_sum() {
        let mk = |k: usize, shift: f64| ExitPair {
            position: Point::new((k as f64 * 0.7).sin() + shift, (k as f64 * 1.3).cos()),
            time: ((k * 37 % 11) as f64) * 0.1 + shift,
        };
        let records: Vec<MultiExitRecord> = (0..40)
            .map(|k| MultiExitRecord {
                path_index: k as u64,
                exits: vec![ExitOutcome::Exited(mk(k, 0.0)), ExitOutcome::Exited(mk(k * 3 + 1, 0.25))],
            })
            .collect();
        let g = coupling_gap2(&records).unwrap();
        let n = records.len();
        let (mut off, mut diag) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let c = cost(2.0, records[i].pair(0).unwrap(), records[j].pair(1).unwrap());
                if i == j {
                    diag += c;
                } else {
                    off += c;
                }
            }
        }
        let expect = 0.5 * (off / (n * (n - 1)) as f64 - diag / n as f64);
        assert!((g.mean - expect).abs() < 1e-12, "{} vs {expect}", g.mean);
        assert!(g.se > 0.0);
    }
    use crate::geometry::Point;

    fn ep(re: f64, im: f64, t: f64) -> ExitPair {
        ExitPair {
            position: Point::new(re, im),
            time: t,
        }
    }

    #[test]
    fn cost_examples() {
        let a = ep(1.0, 0.0, 1.0);
        let o = ep(0.0, 0.0, 0.0);
        assert_eq!(cost(2.0, &a, &a), 0.0);
        assert_eq!(cost(2.0, &a, &o), 2.0);
        assert_eq!(cost(4.0, &ep(0.0, 3.0, 4.0), &o), 97.0);
    }

    #[test]
    fn two_by_two() {
        let m = CostMatrix::from_entries(2, 2.0, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let lo = assign_min(&m).unwrap();
        assert_eq!(lo.permutation, vec![0, 1]);
        assert_eq!(lo.mean_cost, 0.0);
        let hi = assign_max(&m).unwrap();
        assert_eq!(hi.permutation, vec![1, 0]);
        assert_eq!(hi.mean_cost, 1.0);
    }

    #[test]
    fn non_finite_rejected() {
        let m = CostMatrix::from_entries(2, 2.0, vec![0.0, f64::NAN, 1.0, 0.0]).unwrap();
        assert!(matches!(assign_min(&m), Err(Error::NonFinite { row: 0, col: 1 })));
    }

    #[test]
    fn fast_independent_matches_quadratic() {
        let a: Vec<ExitPair> = (0..37)
            .map(|i| {
                let x = i as f64;
                ep((x * 0.7).cos(), (x * 1.3).sin(), (x * 0.37).sin().abs())
            })
            .collect();
        let b: Vec<ExitPair> = (0..23)
            .map(|i| {
                let x = i as f64;
                ep((x * 0.2).sin() * 2.0, x.cos(), (x * 0.91).cos().abs() * 3.0)
            })
            .collect();
        let fast = independent_mean_cost2(&a, &b);
        let mut slow = 0.0;
        for x in &a {
            for y in &b {
                slow += cost(2.0, x, y);
            }
        }
        slow /= (a.len() * b.len()) as f64;
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn lift_pairs_indices() {
        let m = Matching {
            mode: Mode::Min,
            p: 2.0,
            permutation: vec![2, 0, 1],
            matched_costs: vec![0.0; 3],
            mean_cost: 0.0,
            value: 0.0,
        };
        let a = [10, 11, 12];
        let b = [20, 21, 22];
        let l = lift_matched_paths(&m, &a, &b).unwrap();
        let got: Vec<(i32, i32)> = l.iter().map(|(x, y)| (**x, **y)).collect();
        assert_eq!(got, vec![(10, 22), (11, 20), (12, 21)]);
        assert!(lift_matched_paths(&m, &a[..2], &b).is_err());
    }
}
