use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vmspos::config::{Format, RunConfig};
use vmspos::emit::{emit_tables, write_csv, Table};
use vmspos::pipeline::{
    analyze, build_study, cohort_set, input_meta, load_document, CorpusBundle, Overrides,
    PipelineError,
};
use vmspos_core::ivtff::{audit_document, ParseAudit};

/// Exit status when a report was produced but carries warnings.
const EXIT_WARNINGS: u8 = 3;

#[derive(Parser)]
#[command(name = "vmspos", version, about = "Positional token statistics for IVTFF transliterations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: parse, corpus, cohorts, statistics, reports.
    Run(CommonArgs),
    /// Parse and audit the transliteration; writes parse_audit.json and corpus.json.
    Parse(CommonArgs),
    /// Build the cohort roster; writes roster.csv and corpus.json.
    Cohorts(CommonArgs),
    /// Statistics from a previously written corpus.json.
    Stats(StatsArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    /// Never fetch over the network; use the checksum-keyed cache only.
    #[arg(long)]
    offline: bool,
}

#[derive(Args, Clone)]
struct StatsArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus file written by `parse`, `cohorts` or `run` (default: <out>/corpus.json).
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args, Clone)]
struct Tuning {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    p_threshold: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    logb_threshold: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of json,csv,md.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

impl Tuning {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            p_threshold: self.p_threshold,
            logb_threshold: self.logb_threshold,
            out: self.out.clone(),
            formats: self.format.clone(),
        }
    }
}

fn load_config(path: &Path, tuning: &Tuning) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    tuning.overrides().apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn prepare(args: &CommonArgs) -> anyhow::Result<(RunConfig, CorpusBundle, ParseAudit)> {
    let cfg = load_config(&args.config, &args.tuning)?;
    let (doc, acquired) = load_document(&cfg, args.offline)?;
    let audit = audit_document(&doc).map_err(PipelineError::from)?;
    let bundle = build_study(&doc, input_meta(&cfg, &acquired), &cfg)?;
    write_json(&cfg.outputs.directory.join("corpus.json"), &bundle)?;
    Ok((cfg, bundle, audit))
}

fn finish(warnings: &[String]) -> ExitCode {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if warnings.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_WARNINGS)
    }
}

fn report_and_emit(bundle: &CorpusBundle, cfg: &RunConfig) -> anyhow::Result<ExitCode> {
    let report = analyze(bundle, cfg)?;
    let written = emit_tables(&report, &cfg.outputs.formats, &cfg.outputs.directory)?;
    let s = &report.corpus.study;
    println!(
        "study corpus: {} pages, {} lines, {} tokens; {} files written to {}",
        s.pages,
        s.lines,
        s.tokens,
        written.len(),
        cfg.outputs.directory.display()
    );
    Ok(finish(&report.warnings))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, bundle, audit) = prepare(&args)?;
            let mut code = report_and_emit(&bundle, &cfg)?;
            if !audit.passed() {
                eprintln!("warning: parser audit reported {} findings", audit.findings.len());
                code = ExitCode::from(EXIT_WARNINGS);
            }
            Ok(code)
        }
        Command::Parse(args) => {
            let (cfg, bundle, audit) = prepare(&args)?;
            #[derive(Serialize)]
            struct Dump<'a> {
                audit: &'a ParseAudit,
                corpus: &'a vmspos::report::CorpusSection,
            }
            write_json(
                &cfg.outputs.directory.join("parse_audit.json"),
                &Dump {
                    audit: &audit,
                    corpus: &bundle.corpus_section,
                },
            )?;
            let (src, st) = (&bundle.corpus_section.source, &bundle.corpus_section.study);
            println!(
                "{} pages, {} loci, round trip {}/{}, gaps {} ({} interior, {} edge)",
                audit.pages, audit.loci, audit.round_trip_ok, audit.loci, audit.gap_codes, audit.interior_gaps, audit.edge_gaps
            );
            println!("source: {} pages, {} lines, {} tokens", src.pages, src.lines, src.tokens);
            println!("study:  {} pages, {} lines, {} tokens", st.pages, st.lines, st.tokens);
            let warnings: Vec<String> = audit
                .findings
                .iter()
                .map(|f| format!("{} line {}: {}", f.folio_id, f.source_line, f.detail))
                .collect();
            Ok(finish(&warnings))
        }
        Command::Cohorts(args) => {
            let (cfg, bundle, _) = prepare(&args)?;
            let set = cohort_set(&bundle, &cfg)?;
            let table = Table {
                file_stem: "roster".into(),
                title: "Cohort roster".into(),
                header: ["cohort", "paragraph", "line", "slot", "token"].map(String::from).to_vec(),
                rows: set
                    .cohorts
                    .iter()
                    .flat_map(|c| {
                        c.members.iter().map(|r| {
                            vec![
                                c.name.to_string(),
                                r.paragraph.to_string(),
                                r.line.to_string(),
                                r.slot.to_string(),
                                bundle.corpus.token(*r).text.clone(),
                            ]
                        })
                    })
                    .collect(),
            };
            std::fs::create_dir_all(&cfg.outputs.directory)?;
            write_csv(&table, &cfg.outputs.directory.join("roster.csv"))?;
            for c in &set.cohorts {
                println!("{:<8} {:>6}", c.name.to_string(), c.len());
            }
            println!("dropped (multiple roles): {}", set.dropped_multi_role.len());
            Ok(finish(&set.warnings))
        }
        Command::Stats(args) => {
            let mut cfg = match &args.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            args.tuning.overrides().apply(&mut cfg);
            let corpus_path = args
                .corpus
                .clone()
                .unwrap_or_else(|| cfg.outputs.directory.join("corpus.json"));
            let text = std::fs::read_to_string(&corpus_path).map_err(|e| PipelineError::CorpusCache {
                path: corpus_path.clone(),
                reason: e.to_string(),
            })?;
            let bundle: CorpusBundle = serde_json::from_str(&text).map_err(|e| PipelineError::CorpusCache {
                path: corpus_path.clone(),
                reason: e.to_string(),
            })?;
            report_and_emit(&bundle, &cfg)
        }
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn error_chain(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    let mut last = out.clone();
    for cause in e.chain().skip(1) {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            out.push_str(": ");
            out.push_str(&msg);
        }
        last = msg;
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::FAILURE
        }
    }
}
