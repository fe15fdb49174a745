use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use vmspos_core::cohort::{CohortKind, CohortName, RateBasis, SpacingRate};
use vmspos_core::corpus::{CorpusStats, FilterCriteria};
use vmspos_core::ivtff::MarkerConfig;
use vmspos_core::stats::{BetaPrior, PValueMatrix, SweepCurve, Thresholds, TokenPropensity};

/// Name of the metadata field excluded from reproducibility comparisons.
pub const TIMESTAMP_FIELD: &str = "generated_at";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMeta {
    /// Configured path or URL.
    pub source: String,
    pub checksum: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMeta {
    pub count: u8,
    pub cohort_size: usize,
    pub cohort_size_rule: String,
    pub sampler: String,
}

/// Every analysis choice that affects a reported number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub binomial_test: String,
    pub binomial_tie_tolerance: f64,
    pub bayes_prior: BetaPrior,
    pub p0_estimator: String,
    pub ref_absent_policy: String,
    pub saturated_reference_policy: String,
    pub reference_cohort: CohortName,
    pub sd_convention: String,
    pub chi2_test: String,
    pub bin_merge_policy: String,
    pub matrix_diagonal: String,
    pub ordinal_convention: String,
    pub multi_role_policy: String,
    pub rate_basis: RateBasis,
    pub thresholds: Thresholds,
    pub p_grid: Vec<f64>,
    pub random: RandomMeta,
    pub filter: FilterCriteria,
    pub markers: MarkerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub generated_at: String,
    pub input: InputMeta,
    pub seed: u64,
    pub defaults: Defaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSection {
    /// Paragraph text on every page, before page filters and exclusions.
    pub source: CorpusStats,
    /// The filtered study corpus.
    pub study: CorpusStats,
    /// Pages dropped because a filter variable was absent: (folio, key).
    pub missing_variable: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub name: CohortName,
    pub kind: CohortKind,
    pub size: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub sd_sample: Option<f64>,
    /// `100 * (mean / mean(MIDDLE) - 1)`.
    pub mean_delta_vs_middle_pct: Option<f64>,
    pub length_counts: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityTable {
    pub subject: CohortName,
    pub reference: CohortName,
    pub n_subject: u64,
    pub n_ref: u64,
    pub tokens_compared: usize,
    pub significant_affinitive: usize,
    pub significant_aversive: usize,
    /// Significant tokens only, affinitive first then by strength.
    pub rows: Vec<TokenPropensity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub metadata: Metadata,
    pub corpus: CorpusSection,
    pub cohorts: Vec<CohortRow>,
    pub dropped_multi_role: usize,
    pub spacing_rates: Vec<SpacingRate>,
    pub matrix: PValueMatrix,
    pub propensity: Vec<PropensityTable>,
    pub sweep: Vec<SweepCurve>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn cohort(&self, name: CohortName) -> Option<&CohortRow> {
        self.cohorts.iter().find(|c| c.name == name)
    }

    pub fn propensity_table(&self, name: CohortName) -> Option<&PropensityTable> {
        self.propensity.iter().find(|t| t.subject == name)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report is always serializable")
    }

    /// JSON text with the timestamp blanked, for reproducibility checks.
    pub fn canonical_json(&self) -> String {
        let mut v = self.to_json();
        v["metadata"][TIMESTAMP_FIELD] = serde_json::Value::Null;
        serde_json::to_string_pretty(&v).expect("report is always serializable")
    }
}
