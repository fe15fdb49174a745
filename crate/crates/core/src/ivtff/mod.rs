//! Reader for the Intermediate Voynich Transliteration File Format.
//!
//! A file consists of an optional `#=IVTFF` format line, `#` comment lines,
//! page headers such as `<f36r>  <! $I=H $H=1>` and locus lines such as
//! `<f36r.3,+P0>  daiin.chor,shol<->qokeey<$>`. Inline markup is described
//! by [`MarkerConfig`] so that the vocabulary can be adjusted from a run
//! configuration without touching the parser.

mod audit;
mod parse;
mod tokenize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{audit_document, AuditFinding, ParseAudit};
pub use parse::{parse_document, parse_page_header};
pub use tokenize::{strip_comments, tokenize_locus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: malformed header or locator: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: unterminated markup `{open}`")]
    UnterminatedMarkup { line: usize, open: String },
    #[error("line {line}: unknown inline code `{code}`")]
    UnknownMarkup { line: usize, code: String },
    #[error("invalid marker configuration: {0}")]
    InvalidConfig(String),
    #[error("input is not valid UTF-8 (byte offset {0})")]
    Encoding(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("token `{0}` contains an illegible glyph")]
pub struct IllegibleToken(pub String);

/// Inline markup vocabulary. Defaults follow IVTFF 2.0 as used by the
/// Zandbergen-Landini transliteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkerConfig {
    pub word_separator: String,
    pub uncertain_space: String,
    /// Intraline drawing intrusions. All listed codes are treated alike.
    pub gap_codes: Vec<String>,
    pub paragraph_end_code: String,
    pub paragraph_start_code: String,
    /// Codes that split tokens but carry no positional meaning.
    pub neutral_codes: Vec<String>,
    pub alternate_open: String,
    pub alternate_close: String,
    pub alternate_divider: String,
    pub comment_open: String,
    pub comment_close: String,
    pub ligature_open: String,
    pub ligature_close: String,
    pub illegible_glyph: String,
    pub rare_glyph_open: String,
    pub rare_glyph_close: String,
    /// Characters accepted as ordinary single glyphs.
    pub glyph_inventory: String,
    /// Markup form -> constituent glyphs, e.g. a capitalised ligature member.
    pub ligature_markup: BTreeMap<String, String>,
}

impl Default for MarkerConfig {
    fn default() -> Self {
        let ligature_markup = ('A'..='Z')
            .map(|c| (c.to_string(), c.to_ascii_lowercase().to_string()))
            .collect();
        Self {
            word_separator: ".".into(),
            uncertain_space: ",".into(),
            gap_codes: vec!["<->".into()],
            paragraph_end_code: "<$>".into(),
            paragraph_start_code: "<%>".into(),
            neutral_codes: vec!["<~>".into()],
            alternate_open: "[".into(),
            alternate_close: "]".into(),
            alternate_divider: ":".into(),
            comment_open: "<!".into(),
            comment_close: ">".into(),
            ligature_open: "{".into(),
            ligature_close: "}".into(),
            illegible_glyph: "?".into(),
            rare_glyph_open: "@".into(),
            rare_glyph_close: ";".into(),
            glyph_inventory: ('a'..='z').collect(),
            ligature_markup,
        }
    }
}

impl MarkerConfig {
    /// Rejects empty markers and markers that collide with each other or
    /// with the glyph inventory.
    pub fn validate(&self) -> Result<(), ParseError> {
        let mut markers: Vec<(&str, &str)> = vec![
            ("word_separator", &self.word_separator),
            ("uncertain_space", &self.uncertain_space),
            ("paragraph_end_code", &self.paragraph_end_code),
            ("paragraph_start_code", &self.paragraph_start_code),
            ("alternate_open", &self.alternate_open),
            ("comment_open", &self.comment_open),
            ("ligature_open", &self.ligature_open),
            ("illegible_glyph", &self.illegible_glyph),
            ("rare_glyph_open", &self.rare_glyph_open),
        ];
        markers.extend(self.gap_codes.iter().map(|c| ("gap_codes", c.as_str())));
        markers.extend(self.neutral_codes.iter().map(|c| ("neutral_codes", c.as_str())));
        for (name, value) in &markers {
            if value.is_empty() {
                return Err(ParseError::InvalidConfig(format!("{name} is empty")));
            }
        }
        for (name, value) in [
            ("alternate_close", &self.alternate_close),
            ("alternate_divider", &self.alternate_divider),
            ("comment_close", &self.comment_close),
            ("ligature_close", &self.ligature_close),
            ("rare_glyph_close", &self.rare_glyph_close),
        ] {
            if value.is_empty() {
                return Err(ParseError::InvalidConfig(format!("{name} is empty")));
            }
        }
        for (i, (na, a)) in markers.iter().enumerate() {
            for (nb, b) in &markers[i + 1..] {
                if a == b {
                    return Err(ParseError::InvalidConfig(format!(
                        "{na} and {nb} share the marker `{a}`"
                    )));
                }
            }
            if a.chars().count() == 1 {
                let c = a.chars().next().unwrap();
                if self.glyph_inventory.contains(c) || self.ligature_markup.contains_key(*a) {
                    return Err(ParseError::InvalidConfig(format!(
                        "{na} `{a}` is also a glyph"
                    )));
                }
            }
        }
        // The scanner tries comments first, then the longest codes; a code
        // that begins with the comment opener would never be reachable.
        for code in self.gap_codes.iter().chain(&self.neutral_codes).chain([
            &self.paragraph_end_code,
            &self.paragraph_start_code,
        ]) {
            if code.starts_with(&self.comment_open) {
                return Err(ParseError::InvalidConfig(format!(
                    "code `{code}` is shadowed by comment opener `{}`",
                    self.comment_open
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn is_gap(&self, code: &str) -> bool {
        self.gap_codes.iter().any(|g| g == code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageHeader {
    pub folio_id: String,
    pub variables: BTreeMap<String, String>,
    /// Free text in the header comment that is not a `$key=value` pair.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    pub folio_id: String,
    pub locus_number: u32,
    /// Raw locus type, e.g. `@P0`, `+P0`, `@Lf`.
    pub locus_type: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub transcriber_tag: String,
    pub raw_text: String,
    /// 1-based line in the source file where the locator appeared.
    pub source_line: usize,
}

impl Locus {
    /// Locus type without its leading position marker (`@P0` -> `P0`).
    pub fn type_code(&self) -> &str {
        match self.locus_type.chars().next() {
            Some(c) if !c.is_ascii_alphanumeric() => &self.locus_type[c.len_utf8()..],
            _ => &self.locus_type,
        }
    }

    /// Leading position marker of the locus type, if any.
    pub fn position_marker(&self) -> Option<char> {
        self.locus_type.chars().next().filter(|c| !c.is_ascii_alphanumeric())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFlags {
    pub uncertain_space_before: bool,
    pub uncertain_space_after: bool,
    pub has_alternate_reading: bool,
    pub has_illegible_glyph: bool,
    /// Glyph outside the configured inventory, e.g. a rare-glyph code.
    pub has_nonstandard_glyph: bool,
    pub precedes_gap: bool,
    pub follows_gap: bool,
}

impl TokenFlags {
    pub fn is_ambiguous(&self) -> bool {
        self.has_alternate_reading || self.has_illegible_glyph || self.has_nonstandard_glyph
    }

    pub fn has_uncertain_space(&self) -> bool {
        self.uncertain_space_before || self.uncertain_space_after
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSource {
    pub folio_id: String,
    pub locus_number: u32,
    pub index_in_locus: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawToken {
    /// Glyph string with markup removed; first reading for alternates.
    pub text: String,
    pub glyphs: Vec<String>,
    pub flags: TokenFlags,
    pub source: TokenSource,
    /// The token exactly as written in the locus, comments excluded.
    pub markup: String,
}

/// What sits between two tokens (or at either edge of a locus).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Junction {
    pub raw: String,
    pub uncertain: bool,
    pub gap: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedLocus {
    pub tokens: Vec<RawToken>,
    /// `tokens.len() + 1` entries: leading edge, interior junctions, trailing edge.
    pub junctions: Vec<Junction>,
    pub paragraph_start: bool,
    pub paragraph_end: bool,
}

impl TokenizedLocus {
    /// Reassembles the locus text from tokens and junctions.
    pub fn reassemble(&self) -> String {
        let mut out = String::new();
        for (i, j) in self.junctions.iter().enumerate() {
            out.push_str(&j.raw);
            if let Some(t) = self.tokens.get(i) {
                out.push_str(&t.markup);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub header: PageHeader,
    pub loci: Vec<Locus>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransliterationDocument {
    /// Contents of the `#=IVTFF` line, if the file has one.
    pub format_line: Option<String>,
    pub pages: Vec<Page>,
    pub marker_config: MarkerConfig,
    /// Lowercase hex SHA-256 of the input bytes.
    pub source_checksum: String,
}

impl TransliterationDocument {
    pub fn page(&self, folio_id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.header.folio_id == folio_id)
    }

    pub fn loci(&self) -> impl Iterator<Item = &Locus> {
        self.pages.iter().flat_map(|p| p.loci.iter())
    }
}

/// Number of glyphs in a token, ligature members counted individually.
pub fn glyph_count(token: &RawToken) -> Result<usize, IllegibleToken> {
    if token.flags.has_illegible_glyph {
        return Err(IllegibleToken(token.markup.clone()));
    }
    Ok(token.glyphs.len())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
