use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vmspos_core::cohort::{
    assign_positions, build_cohort_set, spacing_uncertainty_rate, CohortError, CohortKind,
    CohortName, CohortSet, SAMPLER_NAME,
};
use vmspos_core::corpus::{build_corpus, source_stats, StudyCorpus};
use vmspos_core::ivtff::{parse_document, ParseError, TransliterationDocument};
use vmspos_core::stats::binomial::TIE_TOLERANCE;
use vmspos_core::stats::{
    default_p_grid, length_distribution, pvalue_matrix, threshold_sweep, token_propensity_scan,
    StatsError, Tilt,
};

use crate::acquire::{acquire_input, AcquireError, Acquired};
use crate::config::{ConfigError, Format, RunConfig};
use crate::report::{
    CohortRow, CorpusSection, Defaults, InputMeta, Metadata, PropensityTable, RandomMeta,
    RunReport,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("input: {0}")]
    Input(#[from] AcquireError),
    #[error("parse: {0}")]
    Parse(#[from] ParseError),
    #[error("cohorts: {0}")]
    Cohort(#[from] CohortError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("corpus cache {path}: {reason}")]
    CorpusCache { path: PathBuf, reason: String },
    #[error("emit {path}: {source}")]
    Emit {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("report fails its schema: {0}")]
    Schema(String),
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub p_threshold: Option<f64>,
    pub logb_threshold: Option<f64>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.random.seed = s;
        }
        if let Some(p) = self.p_threshold {
            cfg.thresholds.p_threshold = p;
        }
        if let Some(b) = self.logb_threshold {
            cfg.thresholds.logb_threshold = b;
        }
        if let Some(o) = &self.out {
            cfg.outputs.directory = o.clone();
        }
        if let Some(f) = &self.formats {
            cfg.outputs.formats = f.clone();
        }
    }
}

/// Filtered corpus plus the provenance needed to analyse it later; this is
/// what the `stats` verb reads back from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusBundle {
    pub input: InputMeta,
    pub corpus_section: CorpusSection,
    pub corpus: StudyCorpus,
}

pub fn input_meta(cfg: &RunConfig, acquired: &Acquired) -> InputMeta {
    let source = match (&cfg.input.path, &cfg.input.url) {
        (Some(p), _) => p.display().to_string(),
        (None, Some(u)) => u.clone(),
        (None, None) => String::new(),
    };
    InputMeta {
        source,
        checksum: acquired.checksum.clone(),
        bytes: acquired.bytes.len() as u64,
    }
}

pub fn load_document(
    cfg: &RunConfig,
    offline: bool,
) -> Result<(TransliterationDocument, Acquired), PipelineError> {
    cfg.validate()?;
    let acquired = acquire_input(&cfg.input, offline)?;
    let doc = parse_document(&acquired.bytes, &cfg.markers)?;
    Ok((doc, acquired))
}

pub fn build_study(
    doc: &TransliterationDocument,
    input: InputMeta,
    cfg: &RunConfig,
) -> Result<CorpusBundle, PipelineError> {
    let exec = cfg.analysis.execution;
    let source = source_stats(doc, &cfg.filter.unfiltered(), exec)?;
    let (corpus, selection) = build_corpus(doc, &cfg.filter, exec)?;
    Ok(CorpusBundle {
        input,
        corpus_section: CorpusSection {
            source,
            study: corpus.stats.clone(),
            missing_variable: selection.missing_variable,
        },
        corpus,
    })
}

pub fn cohort_set(bundle: &CorpusBundle, cfg: &RunConfig) -> Result<CohortSet, PipelineError> {
    let ann = assign_positions(&bundle.corpus, cfg.analysis.execution);
    Ok(build_cohort_set(&bundle.corpus, &ann, &cfg.random)?)
}

fn defaults(cfg: &RunConfig, set: &CohortSet, p_grid: Vec<f64>) -> Defaults {
    Defaults {
        binomial_test: "exact two-sided, minimum-likelihood".into(),
        binomial_tie_tolerance: TIE_TOLERANCE,
        bayes_prior: cfg.prior,
        p0_estimator: "k_ref / n_ref".into(),
        ref_absent_policy: "k_ref = 0: p0 = 1 / (n_ref + 1), ratio +inf, flagged ref_absent".into(),
        saturated_reference_policy: "k_ref = n_ref: p0 = n_ref / (n_ref + 1)".into(),
        reference_cohort: CohortName::Middle,
        sd_convention: "sd is the population sd; sd_sample uses n - 1".into(),
        chi2_test: "Pearson 2 x K, no continuity correction, dof = K - 1".into(),
        bin_merge_policy: "absent lengths dropped; top length categories merged until the top \
                           category has expected count >= min_expected in both cohorts"
            .into(),
        matrix_diagonal: "p = 1 by definition".into(),
        ordinal_convention: "ordinal = 1 + certain separators to the left; ordinal_max counts \
                             uncertain separators as spaces"
            .into(),
        multi_role_policy: "tokens matching two or more positional roles are dropped; MIDDLE \
                            is tokens matching none"
            .into(),
        rate_basis: cfg.analysis.rate_basis,
        thresholds: cfg.thresholds,
        p_grid,
        random: RandomMeta {
            count: cfg.random.count,
            cohort_size: set.random_size,
            cohort_size_rule: match cfg.random.cohort_size {
                Some(_) => "configured".into(),
                None => "size of the smallest subject cohort".into(),
            },
            sampler: SAMPLER_NAME.into(),
        },
        filter: cfg.filter.clone(),
        markers: cfg.markers.clone(),
    }
}

fn timestamp() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}

/// Cohorts, length statistics, the p-value matrix, propensity tables and
/// sweeps for an already built corpus.
pub fn analyze(bundle: &CorpusBundle, cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    cfg.thresholds.validate()?;
    let exec = cfg.analysis.execution;
    let corpus = &bundle.corpus;
    let ann = assign_positions(corpus, exec);
    let set = build_cohort_set(corpus, &ann, &cfg.random)?;
    let mut warnings = Vec::new();
    if corpus.stats.tokens == 0 {
        warnings.push("EmptyCorpus: no tokens survived the filters".to_string());
    }
    if !bundle.corpus_section.missing_variable.is_empty() {
        warnings.push(format!(
            "MissingVariable: {} pages lack a filter variable and were skipped",
            bundle.corpus_section.missing_variable.len()
        ));
    }
    warnings.extend(set.warnings.iter().cloned());

    let dists: Vec<_> = set
        .cohorts
        .iter()
        .map(|c| length_distribution(c, corpus).map_err(|e| (c.name, e)))
        .collect();
    let middle_mean = dists
        .iter()
        .find_map(|d| d.as_ref().ok().filter(|d| d.cohort == CohortName::Middle))
        .map(|d| d.mean);
    let cohorts = set
        .cohorts
        .iter()
        .zip(&dists)
        .map(|(c, d)| {
            let d = d.as_ref().ok();
            CohortRow {
                name: c.name,
                kind: c.kind,
                size: c.len(),
                mean: d.map(|d| d.mean),
                sd: d.map(|d| d.sd),
                sd_sample: d.map(|d| d.sd_sample),
                mean_delta_vs_middle_pct: match (d, middle_mean) {
                    (Some(d), Some(m)) => Some(100.0 * (d.mean / m - 1.0)),
                    _ => None,
                },
                length_counts: d.map(|d| d.counts.clone()).unwrap_or_default(),
            }
        })
        .collect();

    let matrix = pvalue_matrix(&dists, &cfg.thresholds, exec)?;
    for (i, row) in matrix.cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate().skip(i + 1) {
            if let Some(e) = &cell.error {
                warnings.push(format!("{} vs {}: {e}", matrix.cohorts[i], matrix.cohorts[j]));
            }
        }
    }

    let spacing_rates: Vec<_> = cfg
        .analysis
        .spacing_ordinals
        .iter()
        .map(|o| spacing_uncertainty_rate(corpus, &ann, *o, cfg.analysis.rate_basis))
        .collect();

    let p_grid = cfg.analysis.p_grid.clone().unwrap_or_else(default_p_grid);
    let middle = set.get(CohortName::Middle).expect("MIDDLE always present");
    let mut propensity = Vec::new();
    let mut sweep = Vec::new();
    for c in set.cohorts.iter().filter(|c| c.kind != CohortKind::Reference) {
        let scan = token_propensity_scan(c, middle, corpus, &cfg.thresholds, cfg.prior, exec)?;
        sweep.push(threshold_sweep(c.name, &scan, &p_grid, cfg.thresholds.logb_threshold)?);
        let rows: Vec<_> = scan.iter().filter(|t| t.significant).cloned().collect();
        propensity.push(PropensityTable {
            subject: c.name,
            reference: CohortName::Middle,
            n_subject: c.len() as u64,
            n_ref: middle.len() as u64,
            tokens_compared: scan.len(),
            significant_affinitive: rows.iter().filter(|t| t.tilt == Tilt::Affinitive).count(),
            significant_aversive: rows.iter().filter(|t| t.tilt == Tilt::Aversive).count(),
            rows,
        });
    }

    Ok(RunReport {
        metadata: Metadata {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            generated_at: timestamp(),
            input: bundle.input.clone(),
            seed: cfg.random.seed,
            defaults: defaults(cfg, &set, p_grid),
        },
        corpus: bundle.corpus_section.clone(),
        cohorts,
        dropped_multi_role: set.dropped_multi_role.len(),
        spacing_rates,
        matrix,
        propensity,
        sweep,
        warnings,
    })
}

/// Parser, corpus, cohorts and statistics in order.
pub fn run_pipeline(cfg: &RunConfig, offline: bool) -> Result<RunReport, PipelineError> {
    let (doc, acquired) = load_document(cfg, offline)?;
    let bundle = build_study(&doc, input_meta(cfg, &acquired), cfg)?;
    analyze(&bundle, cfg)
}
