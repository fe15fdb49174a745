use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::pipeline::PipelineError;
use crate::report::RunReport;
use crate::schema::validate_report;

/// Shortest round-tripping decimal, in exponent form outside `[1e-4, 1e7)`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e7).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// A rectangular table rendered identically to CSV and Markdown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub file_stem: String,
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn matrix_table(report: &RunReport) -> Table {
    let m = &report.matrix;
    let mut header = vec!["cohort".to_string()];
    header.extend(m.cohorts.iter().map(|c| c.to_string()));
    let rows = m
        .cohorts
        .iter()
        .zip(&m.cells)
        .map(|(name, row)| {
            let mut r = vec![name.to_string()];
            r.extend(row.iter().map(|c| c.p_value.map(fmt_num).unwrap_or_else(|| "NA".into())));
            r
        })
        .collect();
    Table {
        file_stem: "matrix".into(),
        title: "Chi-squared p-value matrix".into(),
        header,
        rows,
    }
}

pub fn cohort_table(report: &RunReport) -> Table {
    let rows = report
        .cohorts
        .iter()
        .map(|c| {
            vec![
                c.name.to_string(),
                serde_json::to_value(c.kind).unwrap().as_str().unwrap_or_default().to_string(),
                c.size.to_string(),
                opt(c.mean),
                opt(c.sd),
                opt(c.sd_sample),
                opt(c.mean_delta_vs_middle_pct),
            ]
        })
        .collect();
    Table {
        file_stem: "cohorts".into(),
        title: "Cohorts".into(),
        header: strings(&["cohort", "kind", "size", "mean_length", "sd", "sd_sample", "mean_delta_vs_middle_pct"]),
        rows,
    }
}

pub fn propensity_tables(report: &RunReport) -> Vec<Table> {
    report
        .propensity
        .iter()
        .map(|t| Table {
            file_stem: format!("propensity_{}", t.subject),
            title: format!("Significant propensity tokens: {} vs {}", t.subject, t.reference),
            header: strings(&[
                "token",
                "k_subject",
                "n_subject",
                "k_ref",
                "n_ref",
                "propensity_ratio",
                "p_value",
                "log_bayes",
                "tilt",
                "ref_absent",
            ]),
            rows: t
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.token.clone(),
                        r.k_subject.to_string(),
                        r.n_subject.to_string(),
                        r.k_ref.to_string(),
                        r.n_ref.to_string(),
                        fmt_num(r.propensity_ratio),
                        fmt_num(r.p_value),
                        fmt_num(r.log_bayes),
                        format!("{:?}", r.tilt).to_lowercase(),
                        r.ref_absent.to_string(),
                    ]
                })
                .collect(),
        })
        .collect()
}

pub fn sweep_table(report: &RunReport) -> Table {
    let rows = report
        .sweep
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| {
                vec![
                    c.subject.to_string(),
                    fmt_num(p.threshold),
                    p.p_only.to_string(),
                    p.combined.to_string(),
                    c.tokens_compared.to_string(),
                ]
            })
        })
        .collect();
    Table {
        file_stem: "sweep".into(),
        title: "Significant-token counts by p-value threshold".into(),
        header: strings(&["cohort", "threshold", "p_only", "combined", "tokens_compared"]),
        rows,
    }
}

pub fn all_tables(report: &RunReport) -> Vec<Table> {
    let mut t = vec![matrix_table(report), cohort_table(report)];
    t.extend(propensity_tables(report));
    t.push(sweep_table(report));
    t
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Emit {
        path: path.to_owned(),
        source,
    }
}

pub fn write_csv(table: &Table, path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_err(path)(e.into()))?;
    w.write_record(&table.header).map_err(|e| io_err(path)(e.into()))?;
    for r in &table.rows {
        w.write_record(r).map_err(|e| io_err(path)(e.into()))?;
    }
    w.flush().map_err(io_err(path))
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn md_table(out: &mut String, t: &Table) {
    let _ = writeln!(out, "## {}\n", t.title);
    if t.file_stem.starts_with("propensity_") && t.rows.is_empty() {
        out.push_str("No significant tokens.\n\n");
    }
    let _ = writeln!(out, "| {} |", t.header.iter().map(|h| md_cell(h)).collect::<Vec<_>>().join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(t.header.len()));
    for r in &t.rows {
        let _ = writeln!(out, "| {} |", r.iter().map(|c| md_cell(c)).collect::<Vec<_>>().join(" | "));
    }
    out.push('\n');
}

pub fn render_markdown(report: &RunReport) -> String {
    let m = &report.metadata;
    let mut out = String::new();
    let _ = writeln!(out, "# {} {} report\n", m.tool, m.version);
    let _ = writeln!(out, "- generated: {}", m.generated_at);
    let _ = writeln!(out, "- input: `{}`", m.input.source);
    let _ = writeln!(out, "- sha256: `{}`", m.input.checksum);
    let _ = writeln!(out, "- seed: {}", m.seed);
    let d = &m.defaults;
    let _ = writeln!(out, "- binomial test: {}", d.binomial_test);
    let _ = writeln!(out, "- prior: Beta({}, {})", fmt_num(d.bayes_prior.alpha), fmt_num(d.bayes_prior.beta));
    let _ = writeln!(
        out,
        "- thresholds: p <= {}, log B >= {}",
        fmt_num(d.thresholds.p_threshold),
        fmt_num(d.thresholds.logb_threshold)
    );
    let _ = writeln!(out, "- random cohorts: {} of size {}\n", d.random.count, d.random.cohort_size);

    out.push_str("## Corpus\n\n| scope | pages | lines | tokens | slots | excluded |\n|---|---|---|---|---|---|\n");
    for (name, s) in [("source", &report.corpus.source), ("study", &report.corpus.study)] {
        let _ = writeln!(
            out,
            "| {name} | {} | {} | {} | {} | {} |",
            s.pages, s.lines, s.tokens, s.slots, s.excluded_tokens
        );
    }
    let _ = writeln!(out, "\nTokens dropped for matching several roles: {}\n", report.dropped_multi_role);

    out.push_str("## Spacing uncertainty\n\n| ordinal | designated | uncertain | rate |\n|---|---|---|---|\n");
    for r in &report.spacing_rates {
        let _ = writeln!(out, "| {} | {} | {} | {} |", r.ordinal, r.designated, r.uncertain, fmt_num(r.rate));
    }
    out.push('\n');

    for t in all_tables(report) {
        md_table(&mut out, &t);
    }
    out.push_str("## Warnings\n\n");
    if report.warnings.is_empty() {
        out.push_str("None.\n");
    }
    for w in &report.warnings {
        let _ = writeln!(out, "- {w}");
    }
    out
}

/// Validates the report against the shipped schema, then writes every
/// requested format into `dir`. Returns the written paths.
pub fn emit_tables(report: &RunReport, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let json = report.to_json();
    validate_report(&json).map_err(|e| PipelineError::Schema(e.join("; ")))?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    if formats.contains(&Format::Json) {
        let p = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(&json).expect("serializable");
        text.push('\n');
        std::fs::write(&p, text).map_err(io_err(&p))?;
        written.push(p);
    }
    if formats.contains(&Format::Csv) {
        for t in all_tables(report) {
            let p = dir.join(format!("{}.csv", t.file_stem));
            write_csv(&t, &p)?;
            written.push(p);
        }
    }
    if formats.contains(&Format::Md) {
        let p = dir.join("report.md");
        std::fs::write(&p, render_markdown(report)).map_err(io_err(&p))?;
        written.push(p);
    }
    Ok(written)
}
