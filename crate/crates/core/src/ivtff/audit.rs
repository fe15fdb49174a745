use serde::{Deserialize, Serialize};

use super::{strip_comments, tokenize_locus, MarkerConfig, ParseError, TransliterationDocument};

/// Location of a locus that failed an audit check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFinding {
    pub folio_id: String,
    pub locus_number: u32,
    pub source_line: usize,
    pub detail: String,
}

/// Whole-document consistency checks on tokenization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseAudit {
    pub pages: usize,
    pub loci: usize,
    pub tokens: usize,
    pub round_trip_ok: usize,
    /// Gap codes found by scanning the comment-free text.
    pub gap_codes: usize,
    pub interior_gaps: usize,
    pub edge_gaps: usize,
    pub precedes_gap: usize,
    pub follows_gap: usize,
    pub findings: Vec<AuditFinding>,
}

impl ParseAudit {
    pub fn passed(&self) -> bool {
        self.findings.is_empty() && self.round_trip_ok == self.loci
    }
}

fn count_codes(text: &str, codes: &[String]) -> usize {
    let mut codes: Vec<&str> = codes.iter().map(String::as_str).collect();
    codes.sort_by_key(|c| std::cmp::Reverse(c.len()));
    let mut n = 0;
    let mut rest = text;
    'outer: while !rest.is_empty() {
        for c in &codes {
            if let Some(r) = rest.strip_prefix(c) {
                n += 1;
                rest = r;
                continue 'outer;
            }
        }
        let mut it = rest.chars();
        it.next();
        rest = it.as_str();
    }
    n
}

/// Re-tokenizes every locus and checks that reassembly reproduces the
/// comment-free text and that every drawing gap flags its neighbours.
pub fn audit_document(doc: &TransliterationDocument) -> Result<ParseAudit, ParseError> {
    let cfg: &MarkerConfig = &doc.marker_config;
    let mut a = ParseAudit {
        pages: doc.pages.len(),
        ..Default::default()
    };
    for locus in doc.loci() {
        a.loci += 1;
        let t = tokenize_locus(locus, cfg)?;
        a.tokens += t.tokens.len();
        let finding = |detail: String| AuditFinding {
            folio_id: locus.folio_id.clone(),
            locus_number: locus.locus_number,
            source_line: locus.source_line,
            detail,
        };
        let stripped = strip_comments(&locus.raw_text, cfg);
        if t.reassemble() == stripped {
            a.round_trip_ok += 1;
        } else {
            a.findings.push(finding(format!("reassembled `{}`", t.reassemble())));
        }
        let in_text = count_codes(&stripped, &cfg.gap_codes);
        let in_junctions: usize = t.junctions.iter().map(|j| count_codes(&j.raw, &cfg.gap_codes)).sum();
        a.gap_codes += in_text;
        if in_text != in_junctions {
            a.findings.push(finding(format!(
                "{in_text} gap codes in text, {in_junctions} in junctions"
            )));
        }
        let last = t.junctions.len() - 1;
        for (i, j) in t.junctions.iter().enumerate() {
            if !j.gap {
                continue;
            }
            let left = i.checked_sub(1).and_then(|k| t.tokens.get(k));
            let right = t.tokens.get(i);
            if i == 0 || i == last {
                a.edge_gaps += 1;
            } else {
                a.interior_gaps += 1;
            }
            let ok = left.is_none_or(|l| l.flags.precedes_gap) && right.is_none_or(|r| r.flags.follows_gap);
            if !ok {
                a.findings.push(finding(format!("gap at junction {i} lacks neighbour flags")));
            }
        }
        a.precedes_gap += t.tokens.iter().filter(|x| x.flags.precedes_gap).count();
        a.follows_gap += t.tokens.iter().filter(|x| x.flags.follows_gap).count();
    }
    Ok(a)
}
