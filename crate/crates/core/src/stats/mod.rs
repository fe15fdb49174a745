//! Length-distribution tests and per-token propensity analysis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::CohortName;

pub mod bayes;
pub mod binomial;
pub mod length;
pub mod propensity;
pub mod special;

pub use bayes::{bayes_factor, BayesFactor, BetaPrior, Evidence};
pub use binomial::{binom_pmf, binomial_test_two_sided, ln_binom_pmf};
pub use length::{
    chi2_independence, length_distribution, merge_bins, pvalue_matrix, Chi2Result,
    LengthDistribution, MatrixCell, MergedTable, PValueMatrix,
};
pub use propensity::{
    default_p_grid, threshold_sweep, token_propensity_scan, SweepCurve, SweepPoint, Tilt,
    TokenPropensity,
};
pub use special::{chi2_sf, gamma_q, ln_beta, ln_gamma};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cohort {0} is empty")]
    EmptyCohort(CohortName),
    #[error("{a} vs {b}: only {categories} length categories, need at least 2")]
    UnmergeableTable {
        a: CohortName,
        b: CohortName,
        categories: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub p_threshold: f64,
    pub logb_threshold: f64,
    pub min_expected: f64,
    pub min_expected_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            p_threshold: 0.01,
            logb_threshold: 5.0,
            min_expected: 5.0,
            min_expected_fraction: 0.8,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.p_threshold.is_nan() || !(0.0..=1.0).contains(&self.p_threshold) {
            return Err(StatsError::Domain(format!("p_threshold {}", self.p_threshold)));
        }
        if self.logb_threshold.is_nan() {
            return Err(StatsError::Domain("logb_threshold is NaN".into()));
        }
        if !(self.min_expected > 0.0) || !self.min_expected.is_finite() {
            return Err(StatsError::Domain(format!("min_expected {}", self.min_expected)));
        }
        if !(0.0..=1.0).contains(&self.min_expected_fraction) {
            return Err(StatsError::Domain(format!(
                "min_expected_fraction {}",
                self.min_expected_fraction
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::default().validate().is_ok());
        let t = Thresholds {
            p_threshold: 1.5,
            ..Default::default()
        };
        assert!(t.validate().is_err());
        let t = Thresholds {
            logb_threshold: f64::NEG_INFINITY,
            ..Default::default()
        };
        assert!(t.validate().is_ok());
        let t = Thresholds {
            min_expected: 0.0,
            ..Default::default()
        };
        assert!(t.validate().is_err());
    }
}
