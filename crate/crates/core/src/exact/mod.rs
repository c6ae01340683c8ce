//! Series, closed forms and quadratures used as reference values for the
//! Monte Carlo estimates.

pub mod bessel;
pub mod costs;
pub mod laws;
pub mod quantile;
pub mod strips;

use serde::{Deserialize, Serialize};

pub use costs::{
    asymptotic_b0, brownian_norm2, elliptic_annulus_max_boundary_gradient,
    elliptic_annulus_mean_exit_time, elliptic_annulus_norm2, elliptic_annulus_torsion, i_p,
    lambda_scaled, phi_disc, phi_tind_gap_bound, phi_tind_gap_bound_uniform, repulsion_disc,
    same_vs_ind_gap2, tind2_scaled_disc, tind_disc, tsame2_scaled, CouplingGap, Moments, ScaledCost,
};
pub use laws::{
    disc_survival, integrate_survival_product, DiscExitLaw, Evaluated, ExitTimeLaw, IntervalExitLaw,
    RectangleExitLaw,
    SeriesConfig,
};
pub use quantile::{build_disc_quantile, QuantileSampler, QuantileTable};
pub use strips::{
    coupling_threshold, default_double_series, f_rho, strip_min_expectation, strip_survival,
    StripSpec, Threshold,
};

/// One computed quantity, as emitted by the command line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub quantity: String,
    pub params: serde_json::Map<String, serde_json::Value>,
    pub value: f64,
    pub truncation_bound: Option<f64>,
    pub flags: Vec<String>,
}

impl Record {
    pub fn new(quantity: &str, value: f64) -> Self {
        Self {
            quantity: quantity.to_string(),
            params: serde_json::Map::new(),
            value,
            truncation_bound: None,
            flags: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn bound(mut self, b: f64) -> Self {
        self.truncation_bound = Some(b);
        self
    }

    pub fn flag(mut self, f: &str) -> Self {
        self.flags.push(f.to_string());
        self
    }
}
