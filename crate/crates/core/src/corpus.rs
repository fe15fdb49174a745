//! Study-corpus construction: page selection by header variables,
//! paragraph assembly from paragraph-type loci, and token exclusions.
//!
//! Excluded tokens stay in their lines. They occupy positional slots so that
//! neighbours keep their physical positions, but they never enter a cohort.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::ivtff::{
    tokenize_locus, Locus, MarkerConfig, Page, ParseError, TokenFlags, TransliterationDocument,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMatch {
    pub key: String,
    pub value: String,
}

impl VariableMatch {
    pub fn new(key: &str, value: &str) -> Self {
        Self {
            key: key.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exclusions {
    pub paragraph_final_token: bool,
    pub ambiguous_glyphs: bool,
    pub uncertain_adjacent_space: bool,
}

impl Default for Exclusions {
    fn default() -> Self {
        Self {
            paragraph_final_token: true,
            ambiguous_glyphs: true,
            uncertain_adjacent_space: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterCriteria {
    /// Illustration-type filter; `None` accepts every page.
    pub illustration: Option<VariableMatch>,
    /// Scribe (hand) filter; `None` accepts every page.
    pub scribe: Option<VariableMatch>,
    /// Locus type codes treated as paragraph text. A trailing `*` matches
    /// any suffix. Patterns are matched against the type without its
    /// position marker unless they start with one.
    pub paragraph_locus_types: Vec<String>,
    pub exclusions: Exclusions,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self {
            illustration: Some(VariableMatch::new("I", "H")),
            scribe: Some(VariableMatch::new("H", "1")),
            paragraph_locus_types: vec!["P*".into()],
            exclusions: Exclusions::default(),
        }
    }
}

impl FilterCriteria {
    /// Criteria that select every page (used for whole-file totals).
    pub fn unfiltered(&self) -> Self {
        Self {
            illustration: None,
            scribe: None,
            ..self.clone()
        }
    }

    pub fn is_paragraph_locus(&self, locus: &Locus) -> bool {
        self.paragraph_locus_types.iter().any(|pat| {
            let subject = match pat.chars().next() {
                Some(c) if !c.is_ascii_alphanumeric() && c != '*' => locus.locus_type.as_str(),
                _ => locus.type_code(),
            };
            match pat.strip_suffix('*') {
                Some(prefix) => subject.starts_with(prefix),
                None => subject == pat,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExclusionReason {
    ParagraphFinal,
    AmbiguousGlyph,
    UncertainSpace,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::ParagraphFinal => "PARAGRAPH_FINAL",
            ExclusionReason::AmbiguousGlyph => "AMBIGUOUS_GLYPH",
            ExclusionReason::UncertainSpace => "UNCERTAIN_SPACE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenPosition {
    pub line_index_in_paragraph: u32,
    pub index_in_line: u32,
    pub tokens_in_line: u32,
    pub is_paragraph_final: bool,
    /// Some delimiter to the left of this token on its line is uncertain.
    pub ordinal_uncertain: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusToken {
    pub text: String,
    /// Glyph count; `None` when the token has an illegible glyph.
    pub length: Option<u32>,
    pub flags: TokenFlags,
    pub position: TokenPosition,
    pub exclusions: Vec<ExclusionReason>,
}

impl CorpusToken {
    pub fn excluded(&self) -> bool {
        !self.exclusions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub folio_id: String,
    pub locus_number: u32,
    pub locus_type: String,
    pub tokens: Vec<CorpusToken>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub folio_id: String,
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub pages: usize,
    pub lines: usize,
    /// Included tokens only.
    pub tokens: usize,
    /// Every token slot, included or not.
    pub slots: usize,
    pub excluded_tokens: usize,
    pub excluded_by_reason: BTreeMap<ExclusionReason, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCorpus {
    pub paragraphs: Vec<Paragraph>,
    pub criteria: FilterCriteria,
    pub stats: CorpusStats,
}

impl StudyCorpus {
    pub fn tokens(&self) -> impl Iterator<Item = &CorpusToken> {
        self.paragraphs
            .iter()
            .flat_map(|p| p.lines.iter())
            .flat_map(|l| l.tokens.iter())
    }

    pub fn token(&self, r: TokenRef) -> &CorpusToken {
        &self.paragraphs[r.paragraph as usize].lines[r.line as usize].tokens[r.slot as usize]
    }

    /// All token references in document order.
    pub fn token_refs(&self) -> impl Iterator<Item = TokenRef> + '_ {
        self.paragraphs.iter().enumerate().flat_map(|(p, para)| {
            para.lines.iter().enumerate().flat_map(move |(l, line)| {
                (0..line.tokens.len()).map(move |s| TokenRef {
                    paragraph: p as u32,
                    line: l as u32,
                    slot: s as u32,
                })
            })
        })
    }
}

/// Stable address of a token slot within a [`StudyCorpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenRef {
    pub paragraph: u32,
    pub line: u32,
    pub slot: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageSelection<'a> {
    pub pages: Vec<&'a Page>,
    /// (folio id, missing key) for pages dropped because a filter key was absent.
    pub missing_variable: Vec<(String, String)>,
}

pub fn filter_pages<'a>(
    doc: &'a TransliterationDocument,
    criteria: &FilterCriteria,
) -> PageSelection<'a> {
    let mut sel = PageSelection::default();
    'pages: for page in &doc.pages {
        for m in [&criteria.illustration, &criteria.scribe].into_iter().flatten() {
            match page.header.variables.get(&m.key) {
                None => {
                    sel.missing_variable
                        .push((page.header.folio_id.clone(), m.key.clone()));
                    continue 'pages;
                }
                Some(v) if *v != m.value => continue 'pages,
                Some(_) => {}
            }
        }
        sel.pages.push(page);
    }
    sel
}

fn ordinal_uncertain(flags: &[TokenFlags], slot: usize) -> bool {
    flags[1..=slot].iter().any(|f| f.uncertain_space_before)
}

/// Groups the paragraph loci of one page into paragraphs.
///
/// A paragraph ends at a paragraph-end code, at a non-paragraph locus, or
/// where the paragraph locus type changes; a paragraph-start code always
/// opens a new one. Loci without tokens contribute no line.
pub fn build_paragraphs(
    page: &Page,
    criteria: &FilterCriteria,
    markers: &MarkerConfig,
) -> Result<Vec<Paragraph>, ParseError> {
    let mut paragraphs = Vec::new();
    let mut current: Option<Paragraph> = None;
    let mut current_type: Option<&str> = None;

    for locus in &page.loci {
        if !criteria.is_paragraph_locus(locus) {
            paragraphs.extend(current.take());
            current_type = None;
            continue;
        }
        let tl = tokenize_locus(locus, markers)?;
        if tl.paragraph_start || current_type.is_some_and(|t| t != locus.type_code()) {
            paragraphs.extend(current.take());
        }
        current_type = Some(locus.type_code());

        if !tl.tokens.is_empty() {
            let para = current.get_or_insert_with(|| Paragraph {
                folio_id: page.header.folio_id.clone(),
                lines: Vec::new(),
            });
            let flags: Vec<TokenFlags> = tl.tokens.iter().map(|t| t.flags).collect();
            let n = tl.tokens.len() as u32;
            let line_index = para.lines.len() as u32;
            let tokens = tl
                .tokens
                .into_iter()
                .enumerate()
                .map(|(i, t)| CorpusToken {
                    length: (!t.flags.has_illegible_glyph).then_some(t.glyphs.len() as u32),
                    text: t.text,
                    flags: t.flags,
                    position: TokenPosition {
                        line_index_in_paragraph: line_index,
                        index_in_line: i as u32,
                        tokens_in_line: n,
                        is_paragraph_final: false,
                        ordinal_uncertain: ordinal_uncertain(&flags, i),
                    },
                    exclusions: Vec::new(),
                })
                .collect();
            para.lines.push(Line {
                folio_id: locus.folio_id.clone(),
                locus_number: locus.locus_number,
                locus_type: locus.locus_type.clone(),
                tokens,
            });
        }
        if tl.paragraph_end {
            paragraphs.extend(current.take());
            current_type = None;
        }
    }
    paragraphs.extend(current.take());

    for para in &mut paragraphs {
        for line in &mut para.lines {
            for t in &mut line.tokens {
                t.position.is_paragraph_final = false;
            }
        }
        if let Some(last) = para.lines.last_mut().and_then(|l| l.tokens.last_mut()) {
            last.position.is_paragraph_final = true;
        }
    }
    Ok(paragraphs)
}

fn exclusion_reasons(t: &CorpusToken, ex: &Exclusions) -> Vec<ExclusionReason> {
    let mut reasons = Vec::new();
    if ex.paragraph_final_token && t.position.is_paragraph_final {
        reasons.push(ExclusionReason::ParagraphFinal);
    }
    if ex.ambiguous_glyphs && t.flags.is_ambiguous() {
        reasons.push(ExclusionReason::AmbiguousGlyph);
    }
    if ex.uncertain_adjacent_space && t.flags.has_uncertain_space() {
        reasons.push(ExclusionReason::UncertainSpace);
    }
    reasons
}

/// Marks every token with its exclusion reasons (recomputed from scratch,
/// so applying this twice is the same as applying it once).
pub fn apply_exclusions(mut paragraphs: Vec<Paragraph>, criteria: &FilterCriteria) -> StudyCorpus {
    for t in paragraphs
        .iter_mut()
        .flat_map(|p| p.lines.iter_mut())
        .flat_map(|l| l.tokens.iter_mut())
    {
        t.exclusions = exclusion_reasons(t, &criteria.exclusions);
    }
    let stats = corpus_stats(&paragraphs);
    StudyCorpus {
        paragraphs,
        criteria: criteria.clone(),
        stats,
    }
}

/// Pages and lines are counted when they hold at least one included token.
pub fn corpus_stats(paragraphs: &[Paragraph]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    let mut pages = BTreeSet::new();
    for para in paragraphs {
        for line in &para.lines {
            let mut included = 0;
            for t in &line.tokens {
                stats.slots += 1;
                if t.excluded() {
                    stats.excluded_tokens += 1;
                    for r in &t.exclusions {
                        *stats.excluded_by_reason.entry(*r).or_default() += 1;
                    }
                } else {
                    included += 1;
                }
            }
            if included > 0 {
                stats.lines += 1;
                stats.tokens += included;
                pages.insert(para.folio_id.as_str());
            }
        }
    }
    stats.pages = pages.len();
    stats
}

/// Whole-file totals before any page filter or exclusion: paragraph-text
/// pages, non-empty paragraph lines, and every token on them.
pub fn source_stats(
    doc: &TransliterationDocument,
    criteria: &FilterCriteria,
    exec: Execution,
) -> Result<CorpusStats, ParseError> {
    let per_page = exec.map(&doc.pages, |p| build_paragraphs(p, criteria, &doc.marker_config));
    let mut paragraphs = Vec::new();
    for r in per_page {
        paragraphs.extend(r?);
    }
    Ok(corpus_stats(&paragraphs))
}

/// Filter, assemble paragraphs and apply exclusions in one step.
pub fn build_corpus<'a>(
    doc: &'a TransliterationDocument,
    criteria: &FilterCriteria,
    exec: Execution,
) -> Result<(StudyCorpus, PageSelection<'a>), ParseError> {
    let selection = filter_pages(doc, criteria);
    let per_page = exec.map(&selection.pages, |p| {
        build_paragraphs(p, criteria, &doc.marker_config)
    });
    let mut paragraphs = Vec::new();
    for r in per_page {
        paragraphs.extend(r?);
    }
    Ok((apply_exclusions(paragraphs, criteria), selection))
}
