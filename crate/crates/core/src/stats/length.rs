use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::special::chi2_sf;
use super::{StatsError, Thresholds};
use crate::cohort::{Cohort, CohortName};
use crate::corpus::StudyCorpus;
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthDistribution {
    pub cohort: CohortName,
    /// Glyph count -> number of tokens.
    pub counts: BTreeMap<u32, u64>,
    pub total: u64,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    /// Sample (n - 1) standard deviation.
    pub sd_sample: f64,
}

impl LengthDistribution {
    pub fn from_counts(cohort: CohortName, counts: BTreeMap<u32, u64>) -> Result<Self, StatsError> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(StatsError::EmptyCohort(cohort));
        }
        let n = total as f64;
        let mean = counts.iter().map(|(l, c)| f64::from(*l) * *c as f64).sum::<f64>() / n;
        let ss: f64 = counts
            .iter()
            .map(|(l, c)| (f64::from(*l) - mean).powi(2) * *c as f64)
            .sum();
        let sd_sample = if total > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        Ok(Self {
            cohort,
            counts,
            total,
            mean,
            sd: (ss / n).sqrt(),
            sd_sample,
        })
    }
}

pub fn length_distribution(
    cohort: &Cohort,
    corpus: &StudyCorpus,
) -> Result<LengthDistribution, StatsError> {
    let mut counts = BTreeMap::new();
    for r in &cohort.members {
        let t = corpus.token(*r);
        let len = t.length.ok_or_else(|| {
            StatsError::Domain(format!("cohort {} holds illegible token `{}`", cohort.name, t.text))
        })?;
        *counts.entry(len).or_insert(0u64) += 1;
    }
    LengthDistribution::from_counts(cohort.name, counts)
}

/// One length category of a contingency table: lengths `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBin {
    pub lo: u32,
    pub hi: u32,
    /// Whether this is the merged top category, open above.
    pub open: bool,
}

impl LengthBin {
    pub fn label(&self) -> String {
        if self.open {
            format!("{}+", self.lo)
        } else if self.lo == self.hi {
            self.lo.to_string()
        } else {
            format!("{}-{}", self.lo, self.hi)
        }
    }
}

/// A 2 x K table of (cohort x length category) counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub bins: Vec<LengthBin>,
    pub rows: [Vec<u64>; 2],
}

impl ContingencyTable {
    pub fn expected(&self) -> [Vec<f64>; 2] {
        let row_tot: [u64; 2] = [self.rows[0].iter().sum(), self.rows[1].iter().sum()];
        let n = (row_tot[0] + row_tot[1]) as f64;
        let col = |j: usize| (self.rows[0][j] + self.rows[1][j]) as f64;
        let mk = |i: usize| {
            (0..self.bins.len())
                .map(|j| row_tot[i] as f64 * col(j) / n)
                .collect()
        };
        [mk(0), mk(1)]
    }

    /// Every expected count at least 1, and at least the given fraction of
    /// cells reaching `min_expected`.
    pub fn meets_expected_rule(&self, thresholds: &Thresholds) -> bool {
        let e = self.expected();
        let cells: Vec<f64> = e.iter().flatten().copied().collect();
        let ok = cells.iter().filter(|v| **v >= thresholds.min_expected).count();
        cells.iter().all(|v| *v >= 1.0)
            && ok as f64 >= thresholds.min_expected_fraction * cells.len() as f64
    }

    fn top_bin_sparse(&self, thresholds: &Thresholds) -> bool {
        let e = self.expected();
        let j = self.bins.len() - 1;
        e[0][j] < thresholds.min_expected || e[1][j] < thresholds.min_expected
    }

    fn merge_top(&mut self) {
        let top = self.bins.pop().unwrap();
        let below = self.bins.last_mut().unwrap();
        below.hi = top.hi;
        below.open = true;
        for row in &mut self.rows {
            let c = row.pop().unwrap();
            *row.last_mut().unwrap() += c;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedTable {
    pub table: ContingencyTable,
    /// Human-readable record of what was merged, e.g. `"9+ <- 9,10"`.
    pub merged_bins: String,
}

/// Builds the 2 x K length table and merges the upper tail until the top
/// category has the minimum expected count in both rows. Interior and
/// lower categories are never merged; length values absent from both
/// cohorts are dropped.
pub fn merge_bins(
    a: &LengthDistribution,
    b: &LengthDistribution,
    thresholds: &Thresholds,
) -> Result<MergedTable, StatsError> {
    let mut lengths: Vec<u32> = a.counts.keys().chain(b.counts.keys()).copied().collect();
    lengths.sort_unstable();
    lengths.dedup();
    let get = |d: &LengthDistribution, l: u32| d.counts.get(&l).copied().unwrap_or(0);
    lengths.retain(|l| get(a, *l) + get(b, *l) > 0);
    if lengths.len() < 2 {
        return Err(StatsError::UnmergeableTable {
            a: a.cohort,
            b: b.cohort,
            categories: lengths.len(),
        });
    }
    let mut table = ContingencyTable {
        bins: lengths
            .iter()
            .map(|l| LengthBin {
                lo: *l,
                hi: *l,
                open: false,
            })
            .collect(),
        rows: [
            lengths.iter().map(|l| get(a, *l)).collect(),
            lengths.iter().map(|l| get(b, *l)).collect(),
        ],
    };
    let mut absorbed = Vec::new();
    while table.bins.len() > 2 && table.top_bin_sparse(thresholds) {
        if absorbed.is_empty() {
            absorbed.push(table.bins.last().unwrap().hi);
        }
        table.merge_top();
        absorbed.push(table.bins.last().unwrap().lo);
    }
    let merged_bins = if absorbed.is_empty() {
        "none".to_string()
    } else {
        absorbed.reverse();
        let top = table.bins.last().unwrap();
        let members: Vec<String> = lengths
            .iter()
            .filter(|l| **l >= top.lo)
            .map(u32::to_string)
            .collect();
        format!("{} <- {}", top.label(), members.join(","))
    };
    Ok(MergedTable { table, merged_bins })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    pub cohort_a: CohortName,
    pub cohort_b: CohortName,
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    pub bins: Vec<String>,
    pub merged_bins: String,
    pub expected_count_rule_satisfied: bool,
}

/// Pearson statistic without continuity correction over a 2 x K table.
pub fn pearson_statistic(table: &ContingencyTable) -> f64 {
    let e = table.expected();
    let mut stat = 0.0;
    for i in 0..2 {
        for (o, ex) in table.rows[i].iter().zip(&e[i]) {
            let d = *o as f64 - ex;
            stat += d * d / ex;
        }
    }
    stat
}

pub fn chi2_independence(
    a: &LengthDistribution,
    b: &LengthDistribution,
    thresholds: &Thresholds,
) -> Result<Chi2Result, StatsError> {
    let merged = merge_bins(a, b, thresholds)?;
    let statistic = pearson_statistic(&merged.table);
    let dof = merged.table.bins.len() as u32 - 1;
    Ok(Chi2Result {
        cohort_a: a.cohort,
        cohort_b: b.cohort,
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof)?,
        bins: merged.table.bins.iter().map(LengthBin::label).collect(),
        expected_count_rule_satisfied: merged.table.meets_expected_rule(thresholds),
        merged_bins: merged.merged_bins,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub p_value: Option<f64>,
    pub statistic: Option<f64>,
    pub dof: Option<u32>,
    pub merged_bins: Option<String>,
    pub expected_count_rule_satisfied: Option<bool>,
    pub error: Option<String>,
}

impl MatrixCell {
    fn diagonal() -> Self {
        Self {
            p_value: Some(1.0),
            statistic: Some(0.0),
            dof: None,
            merged_bins: None,
            expected_count_rule_satisfied: None,
            error: None,
        }
    }

    fn from_result(r: Result<Chi2Result, StatsError>) -> Self {
        match r {
            Ok(r) => Self {
                p_value: Some(r.p_value),
                statistic: Some(r.statistic),
                dof: Some(r.dof),
                merged_bins: Some(r.merged_bins),
                expected_count_rule_satisfied: Some(r.expected_count_rule_satisfied),
                error: None,
            },
            Err(e) => Self {
                p_value: None,
                statistic: None,
                dof: None,
                merged_bins: None,
                expected_count_rule_satisfied: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Symmetric matrix of pairwise length-distribution tests. The diagonal is
/// defined as p = 1 for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueMatrix {
    pub cohorts: Vec<CohortName>,
    pub cells: Vec<Vec<MatrixCell>>,
}

impl PValueMatrix {
    pub fn index(&self, name: CohortName) -> Option<usize> {
        self.cohorts.iter().position(|c| *c == name)
    }

    pub fn p_value(&self, a: CohortName, b: CohortName) -> Option<f64> {
        let (i, j) = (self.index(a)?, self.index(b)?);
        self.cells[i][j].p_value
    }
}

/// Cohorts whose distribution could not be built (empty) still get a row,
/// with the error recorded in each off-diagonal cell.
pub fn pvalue_matrix(
    dists: &[Result<LengthDistribution, (CohortName, StatsError)>],
    thresholds: &Thresholds,
    exec: Execution,
) -> Result<PValueMatrix, StatsError> {
    let k = dists.len();
    if k < 2 {
        return Err(StatsError::Domain("p-value matrix needs at least two cohorts".into()));
    }
    let names: Vec<CohortName> = dists
        .iter()
        .map(|d| match d {
            Ok(d) => d.cohort,
            Err((n, _)) => *n,
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    let results = exec.map(&pairs, |&(i, j)| match (&dists[i], &dists[j]) {
        (Ok(a), Ok(b)) => MatrixCell::from_result(chi2_independence(a, b, thresholds)),
        (Err((_, e)), _) | (_, Err((_, e))) => MatrixCell::from_result(Err(e.clone())),
    });
    let mut cells: Vec<Vec<Option<MatrixCell>>> = vec![vec![None; k]; k];
    for (i, row) in cells.iter_mut().enumerate() {
        row[i] = Some(MatrixCell::diagonal());
    }
    for (&(i, j), cell) in pairs.iter().zip(results) {
        cells[j][i] = Some(cell.clone());
        cells[i][j] = Some(cell);
    }
    Ok(PValueMatrix {
        cohorts: names,
        cells: cells
            .into_iter()
            .map(|r| r.into_iter().map(Option::unwrap).collect())
            .collect(),
    })
}
