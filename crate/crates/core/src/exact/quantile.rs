//! Quantile tables of exit-time laws and the quadrature rules they induce on
//! `(0, 1)`.
//!
//! The grid covers `[delta, 1 - delta]`. Below `delta` a single node at
//! `Q(delta / 2)` carries the mass; above `1 - delta` the law is replaced by
//! its leading exponential mode, under which `tau` given `tau > Q(1 - delta)`
//! is `Q(1 - delta)` plus an exponential variable. That tail is integrated by
//! Gauss-Laguerre nodes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::laws::{DiscExitLaw, ExitTimeLaw, SeriesConfig};
use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 1e-4;

const LAGUERRE_X: [f64; 12] = [
    0.115_722_117_358_020_5,
    0.611_757_484_515_130_8,
    1.512_610_269_776_419,
    2.833_751_337_743_507,
    4.599_227_639_418_348,
    6.844_525_453_115_177,
    9.621_316_842_456_867,
    13.006_054_993_306_348,
    17.116_855_187_462_257,
    22.151_090_379_397_004,
    28.487_967_250_984,
    37.099_121_044_466_92,
];
const LAGUERRE_W: [f64; 12] = [
    0.264_731_371_055_436_54,
    0.377_759_275_873_142_1,
    0.244_082_011_319_879_06,
    0.090_449_222_211_681_82,
    0.020_102_381_154_634_218,
    0.002_663_973_541_865_333_5,
    0.000_203_231_592_663_001_3,
    8.365_055_856_819_926e-6,
    1.668_493_876_540_921_2e-7,
    1.342_391_030_515_004e-9,
    3.061_601_635_035_102_3e-12,
    8.148_077_467_426_094e-16,
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileTable {
    pub delta: f64,
    /// Equally spaced probabilities `delta = r_0 < ... < r_G = 1 - delta`.
    pub grid: Vec<f64>,
    /// `Q(r_j)`.
    pub values: Vec<f64>,
    /// `Q(delta / 2)`, representative of the lower tail cell.
    pub lower_tail_value: f64,
    /// Leading decay rate, which drives the upper tail cell.
    pub tail_rate: f64,
    /// Positive zeros of `J0` used by the disc series (empty for other laws).
    pub bessel_zeros: Vec<f64>,
}

/// Solves `S(t) = target` for a decreasing survival function by bisection.
pub fn invert_survival(law: &dyn ExitTimeLaw, target: f64, resolution: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "survival target must lie in (0, 1), got {target}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0 / law.leading_rate();
    let mut grow = 0;
    while law.survival(hi) > target {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Bracket(format!("no upper bracket for survival target {target}")));
        }
    }
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if law.survival(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl QuantileTable {
    /// Tabulates the quantile function of `law` on `grid_cells + 1` points.
    pub fn build(law: &dyn ExitTimeLaw, grid_cells: usize, delta: f64) -> Result<Self> {
        if grid_cells < 2 || !(delta > 0.0 && delta < 0.01) {
            return Err(Error::InvalidParameter(
                "quantile table needs at least 2 cells and 0 < delta < 0.01".into(),
            ));
        }
        let scale = 1.0 / law.leading_rate();
        let resolution = 1e-11 * scale.max(1e-3);
        let step = (1.0 - 2.0 * delta) / grid_cells as f64;
        let grid: Vec<f64> = (0..=grid_cells).map(|j| delta + j as f64 * step).collect();
        let values = grid
            .iter()
            .map(|&r| invert_survival(law, 1.0 - r, resolution))
            .collect::<Result<Vec<_>>>()?;
        let lower_tail_value = invert_survival(law, 1.0 - 0.5 * delta, resolution)?;
        Ok(Self {
            delta,
            grid,
            values,
            lower_tail_value,
            tail_rate: law.leading_rate(),
            bessel_zeros: Vec::new(),
        })
    }

    pub fn cells(&self) -> usize {
        self.grid.len() - 1
    }

    fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Quadrature nodes `(Q value, weight)` for `integral_0^1 g(Q(r)) dr`.
    /// Weights sum to one.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let h = self.step();
        let g = self.cells();
        let mut out = Vec::with_capacity(g + 1 + 1 + LAGUERRE_X.len());
        out.push((self.lower_tail_value, self.delta));
        for (j, &q) in self.values.iter().enumerate() {
            let w = if j == 0 || j == g { 0.5 * h } else { h };
            out.push((q, w));
        }
        let top = self.values[g];
        for (x, w) in LAGUERRE_X.iter().zip(LAGUERRE_W) {
            out.push((top + x / self.tail_rate, self.delta * w));
        }
        out
    }

    /// `integral_0^1 g(Q(r)) dr`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes().iter().map(|&(q, w)| w * g(q)).sum()
    }

    /// `integral_0^1 g(Q(r), Q(1 - r)) dr`.
    pub fn integrate_antithetic(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let h = self.step();
        let n = self.cells();
        let mut sum = 0.0;
        for j in 0..=n {
            let w = if j == 0 || j == n { 0.5 * h } else { h };
            sum += w * g(self.values[j], self.values[n - j]);
        }
        let top = self.values[n];
        let low = self.lower_tail_value;
        for (x, w) in LAGUERRE_X.iter().zip(LAGUERRE_W) {
            let q_hi = top + x / self.tail_rate;
            sum += self.delta * w * (g(low, q_hi) + g(q_hi, low));
        }
        sum
    }

    /// `integral_0^1 integral_0^1 g(Q(r), Q(u)) dr du`.
    pub fn integrate_product(&self, g: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
        use rayon::prelude::*;
        let nodes = self.nodes();
        nodes
            .par_iter()
            .map(|&(qa, wa)| wa * nodes.iter().map(|&(qb, wb)| wb * g(qa, qb)).sum::<f64>())
            .sum()
    }

    /// Linear interpolation on the grid; tails are clamped. Use
    /// [`QuantileSampler`] for accurate values.
    pub fn interpolate(&self, r: f64) -> f64 {
        let n = self.cells();
        if r <= self.grid[0] {
            return self.values[0];
        }
        if r >= self.grid[n] {
            return self.values[n];
        }
        let pos = (r - self.grid[0]) / self.step();
        let j = (pos.floor() as usize).min(n - 1);
        let s = pos - j as f64;
        self.values[j] + s * (self.values[j + 1] - self.values[j])
    }

    /// Writes `r,Q` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,Q")?;
        for (r, q) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{r},{q}")?;
        }
        Ok(())
    }
}

/// Tabulated disc exit-time quantile with `G` cells.
pub fn build_disc_quantile(grid_cells: usize, cfg: SeriesConfig) -> Result<QuantileTable> {
    if grid_cells < 100 {
        return Err(Error::InvalidParameter(format!(
            "disc quantile grid needs G >= 100, got {grid_cells}"
        )));
    }
    let law = DiscExitLaw::new(cfg)?;
    let mut table = QuantileTable::build(&law, grid_cells, DEFAULT_DELTA)?;
    table.bessel_zeros = law.bessel_zeros().to_vec();
    Ok(table)
}

/// A law bundled with its table: evaluates `Q(r)` accurately anywhere in
/// `(0, 1)` by interpolating and then polishing with Newton steps.
pub struct QuantileSampler<L: ExitTimeLaw> {
    pub law: L,
    pub table: QuantileTable,
}

impl<L: ExitTimeLaw> QuantileSampler<L> {
    pub fn new(law: L, grid_cells: usize) -> Result<Self> {
        let table = QuantileTable::build(&law, grid_cells, DEFAULT_DELTA)?;
        Ok(Self { law, table })
    }

    pub fn quantile(&self, r: f64) -> f64 {
        let t = &self.table;
        let n = t.cells();
        if r < t.grid[0] || r > t.grid[n] {
            let scale = 1.0 / self.law.leading_rate();
            return invert_survival(&self.law, 1.0 - r, 1e-12 * scale).unwrap_or(f64::NAN);
        }
        let pos = ((r - t.grid[0]) / t.step()).clamp(0.0, n as f64);
        let j = (pos.floor() as usize).min(n - 1);
        let (lo, hi) = (t.values[j], t.values[j + 1]);
        let mut x = lo + (pos - j as f64) * (hi - lo);
        let target = 1.0 - r;
        for _ in 0..3 {
            let f = self.law.density(x);
            if !(f > 0.0) {
                break;
            }
            let next = x + (self.law.survival(x) - target) / f;
            x = next.clamp(lo, hi);
        }
        x
    }
}
