use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bayes::{bayes_factor, BetaPrior};
use super::binomial::binomial_test_two_sided;
use super::{StatsError, Thresholds};
use crate::cohort::{Cohort, CohortName};
use crate::corpus::StudyCorpus;
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tilt {
    Affinitive,
    Aversive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPropensity {
    pub token: String,
    pub subject: CohortName,
    pub k_subject: u64,
    pub n_subject: u64,
    pub k_ref: u64,
    pub n_ref: u64,
    /// Null rate the tests were evaluated against.
    pub p0: f64,
    pub p_value: f64,
    pub log_bayes: f64,
    /// `+inf` when the token never occurs in the reference cohort.
    #[serde(with = "extended_f64")]
    pub propensity_ratio: f64,
    pub tilt: Tilt,
    pub significant: bool,
    pub ref_absent: bool,
}

/// JSON has no infinity; encode non-finite ratios as strings.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl TokenPropensity {
    /// Evaluates one token. Requires `n_subject > 0`, `n_ref > 0` and at
    /// least one occurrence in either cohort.
    pub fn evaluate(
        token: &str,
        subject: CohortName,
        (k_subject, n_subject): (u64, u64),
        (k_ref, n_ref): (u64, u64),
        thresholds: &Thresholds,
        prior: BetaPrior,
    ) -> Result<Self, StatsError> {
        if n_subject == 0 || n_ref == 0 || k_subject > n_subject || k_ref > n_ref {
            return Err(StatsError::Domain(format!(
                "counts {k_subject}/{n_subject} vs {k_ref}/{n_ref}"
            )));
        }
        let ref_absent = k_ref == 0;
        let p0 = if ref_absent {
            1.0 / (n_ref + 1) as f64
        } else if k_ref == n_ref {
            n_ref as f64 / (n_ref + 1) as f64
        } else {
            k_ref as f64 / n_ref as f64
        };
        let cross_s = u128::from(k_subject) * u128::from(n_ref);
        let cross_r = u128::from(k_ref) * u128::from(n_subject);
        let propensity_ratio = if ref_absent {
            if k_subject > 0 {
                f64::INFINITY
            } else {
                f64::NAN
            }
        } else {
            cross_s as f64 / cross_r as f64
        };
        let tilt = if cross_s > cross_r {
            Tilt::Affinitive
        } else {
            Tilt::Aversive
        };
        let p_value = binomial_test_two_sided(k_subject, n_subject, p0)?;
        let log_bayes = bayes_factor(k_subject, n_subject, p0, prior)?.log_b;
        Ok(Self {
            token: token.to_string(),
            subject,
            k_subject,
            n_subject,
            k_ref,
            n_ref,
            p0,
            p_value,
            log_bayes,
            propensity_ratio,
            tilt,
            significant: p_value <= thresholds.p_threshold && log_bayes >= thresholds.logb_threshold,
            ref_absent,
        })
    }

    /// `|ln ratio|`; infinite for ratios of 0 or `+inf`.
    pub fn strength(&self) -> f64 {
        self.propensity_ratio.ln().abs()
    }
}

/// Affinitive first, then by descending `|ln ratio|`, then by token text.
pub fn propensity_order(a: &TokenPropensity, b: &TokenPropensity) -> Ordering {
    a.tilt
        .cmp(&b.tilt)
        .then_with(|| b.strength().total_cmp(&a.strength()))
        .then_with(|| a.token.cmp(&b.token))
}

fn text_counts(cohort: &Cohort, corpus: &StudyCorpus) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for r in &cohort.members {
        *m.entry(corpus.token(*r).text.clone()).or_insert(0) += 1;
    }
    m
}

/// Per-token propensity of `subject` relative to `reference`, over every
/// token text seen in either cohort. Empty when either cohort is empty.
pub fn token_propensity_scan(
    subject: &Cohort,
    reference: &Cohort,
    corpus: &StudyCorpus,
    thresholds: &Thresholds,
    prior: BetaPrior,
    exec: Execution,
) -> Result<Vec<TokenPropensity>, StatsError> {
    if subject.is_empty() || reference.is_empty() {
        return Ok(Vec::new());
    }
    let subj = text_counts(subject, corpus);
    let refc = text_counts(reference, corpus);
    let (n_s, n_r) = (subject.len() as u64, reference.len() as u64);
    let mut texts: Vec<&String> = subj.keys().chain(refc.keys()).collect();
    texts.sort_unstable();
    texts.dedup();
    let rows = exec.map(&texts, |t| {
        TokenPropensity::evaluate(
            t,
            subject.name,
            (subj.get(*t).copied().unwrap_or(0), n_s),
            (refc.get(*t).copied().unwrap_or(0), n_r),
            thresholds,
            prior,
        )
    });
    let mut out = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    out.sort_by(propensity_order);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    /// Tokens with `p <= threshold`.
    pub p_only: usize,
    /// Tokens with `p <= threshold` and `log B >= logb_threshold`.
    pub combined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub subject: CohortName,
    pub tokens_compared: usize,
    pub points: Vec<SweepPoint>,
}

/// Log-spaced grid of quarter decades from `1e-6` up to `10^-0.25`.
pub fn default_p_grid() -> Vec<f64> {
    (0..24).map(|i| 10f64.powf(-6.0 + f64::from(i) * 0.25)).collect()
}

pub fn threshold_sweep(
    subject: CohortName,
    scan: &[TokenPropensity],
    p_grid: &[f64],
    logb_threshold: f64,
) -> Result<SweepCurve, StatsError> {
    if p_grid.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) || p_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StatsError::Domain("p grid must be strictly ascending in (0, 1]".into()));
    }
    let points = p_grid
        .iter()
        .map(|&threshold| {
            let hit = scan.iter().filter(|t| t.p_value <= threshold);
            SweepPoint {
                threshold,
                p_only: hit.clone().count(),
                combined: hit.filter(|t| t.log_bayes >= logb_threshold).count(),
            }
        })
        .collect();
    Ok(SweepCurve {
        subject,
        tokens_compared: scan.len(),
        points,
    })
}
