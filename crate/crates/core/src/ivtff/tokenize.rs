use std::mem;

use super::{Junction, Locus, MarkerConfig, ParseError, RawToken, TokenFlags, TokenSource, TokenizedLocus};

#[derive(Default)]
struct TokenBuilder {
    glyphs: Vec<String>,
    flags: TokenFlags,
    markup: String,
}

struct Scanner<'a> {
    cfg: &'a MarkerConfig,
    line: usize,
    tokens: Vec<TokenBuilder>,
    junctions: Vec<Junction>,
    current: Option<TokenBuilder>,
    junction: Junction,
    paragraph_start: bool,
    paragraph_end: bool,
}

impl<'a> Scanner<'a> {
    fn token(&mut self) -> &mut TokenBuilder {
        if self.current.is_none() {
            self.junctions.push(mem::take(&mut self.junction));
            self.current = Some(TokenBuilder::default());
        }
        self.current.as_mut().unwrap()
    }

    fn junction(&mut self) -> &mut Junction {
        if let Some(t) = self.current.take() {
            self.tokens.push(t);
        }
        &mut self.junction
    }

    fn push_glyph_chars(&mut self, text: &str) {
        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            let consumed = self.push_glyph_at(rest, c);
            rest = &rest[consumed..];
        }
    }

    /// Consumes one glyph unit at the start of `rest`, returning its byte length.
    fn push_glyph_at(&mut self, rest: &str, c: char) -> usize {
        let cfg = self.cfg;
        if rest.starts_with(cfg.illegible_glyph.as_str()) {
            let tok = self.token();
            tok.flags.has_illegible_glyph = true;
            tok.glyphs.push(cfg.illegible_glyph.clone());
            return cfg.illegible_glyph.len();
        }
        if let Some((key, glyphs)) = cfg
            .ligature_markup
            .iter()
            .filter(|(k, _)| !k.is_empty() && rest.starts_with(k.as_str()))
            .max_by_key(|(k, _)| k.len())
        {
            let tok = self.token();
            tok.glyphs.extend(glyphs.chars().map(String::from));
            return key.len();
        }
        let tok = self.token();
        if !cfg.glyph_inventory.contains(c) {
            tok.flags.has_nonstandard_glyph = true;
        }
        tok.glyphs.push(c.to_string());
        c.len_utf8()
    }

    fn finish(mut self, source: &Locus) -> TokenizedLocus {
        if let Some(t) = self.current.take() {
            self.tokens.push(t);
        }
        self.junctions.push(mem::take(&mut self.junction));
        debug_assert_eq!(self.junctions.len(), self.tokens.len() + 1);

        let mut tokens = Vec::with_capacity(self.tokens.len());
        for (i, b) in self.tokens.into_iter().enumerate() {
            let (left, right) = (&self.junctions[i], &self.junctions[i + 1]);
            let mut flags = b.flags;
            flags.uncertain_space_before = left.uncertain;
            flags.uncertain_space_after = right.uncertain;
            flags.follows_gap = left.gap;
            flags.precedes_gap = right.gap;
            tokens.push(RawToken {
                text: b.glyphs.concat(),
                glyphs: b.glyphs,
                flags,
                source: TokenSource {
                    folio_id: source.folio_id.clone(),
                    locus_number: source.locus_number,
                    index_in_locus: i as u32,
                },
                markup: b.markup,
            });
        }
        TokenizedLocus {
            tokens,
            junctions: self.junctions,
            paragraph_start: self.paragraph_start,
            paragraph_end: self.paragraph_end,
        }
    }
}

fn find_close(text: &str, from: usize, close: &str) -> Option<usize> {
    text[from..].find(close).map(|i| from + i)
}

/// Splits a locus into tokens and records the markup around each one.
///
/// Separators, uncertain spaces, drawing gaps and paragraph codes form the
/// junctions between tokens; inline comments are dropped wherever they occur.
pub fn tokenize_locus(locus: &Locus, cfg: &MarkerConfig) -> Result<TokenizedLocus, ParseError> {
    let text = locus.raw_text.as_str();
    let line = locus.source_line;
    let mut codes: Vec<&str> = cfg
        .gap_codes
        .iter()
        .chain(&cfg.neutral_codes)
        .map(String::as_str)
        .chain([cfg.paragraph_end_code.as_str(), cfg.paragraph_start_code.as_str()])
        .collect();
    codes.sort_by_key(|c| std::cmp::Reverse(c.len()));

    let mut s = Scanner {
        cfg,
        line,
        tokens: Vec::new(),
        junctions: Vec::new(),
        current: None,
        junction: Junction::default(),
        paragraph_start: false,
        paragraph_end: false,
    };

    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        let c = rest.chars().next().unwrap();

        if rest.starts_with(cfg.comment_open.as_str()) {
            let close = find_close(text, pos + cfg.comment_open.len(), &cfg.comment_close)
                .ok_or_else(|| ParseError::UnterminatedMarkup {
                    line: s.line,
                    open: cfg.comment_open.clone(),
                })?;
            pos = close + cfg.comment_close.len();
            continue;
        }

        if let Some(code) = codes.iter().find(|code| rest.starts_with(**code)) {
            let is_gap = cfg.is_gap(code);
            if *code == cfg.paragraph_end_code {
                s.paragraph_end = true;
            } else if *code == cfg.paragraph_start_code {
                s.paragraph_start = true;
            }
            let j = s.junction();
            j.raw.push_str(code);
            j.gap |= is_gap;
            pos += code.len();
            continue;
        }

        if c == '<' {
            let end = rest.find('>').map_or(rest.len(), |i| i + 1);
            return Err(ParseError::UnknownMarkup {
                line,
                code: rest[..end].to_string(),
            });
        }

        if rest.starts_with(cfg.word_separator.as_str()) {
            s.junction().raw.push_str(&cfg.word_separator);
            pos += cfg.word_separator.len();
            continue;
        }
        if rest.starts_with(cfg.uncertain_space.as_str()) {
            let j = s.junction();
            j.raw.push_str(&cfg.uncertain_space);
            j.uncertain = true;
            pos += cfg.uncertain_space.len();
            continue;
        }
        if c.is_whitespace() {
            s.junction().raw.push(c);
            pos += c.len_utf8();
            continue;
        }

        if rest.starts_with(cfg.alternate_open.as_str()) {
            let inner_start = pos + cfg.alternate_open.len();
            let close = find_close(text, inner_start, &cfg.alternate_close).ok_or_else(|| {
                ParseError::UnterminatedMarkup {
                    line,
                    open: cfg.alternate_open.clone(),
                }
            })?;
            let inner = &text[inner_start..close];
            let reading = inner
                .split(cfg.alternate_divider.as_str())
                .find(|r| !r.is_empty())
                .unwrap_or("");
            let end = close + cfg.alternate_close.len();
            let tok = s.token();
            tok.flags.has_alternate_reading = true;
            tok.markup.push_str(&text[pos..end]);
            s.push_glyph_chars(reading);
            pos = end;
            continue;
        }

        if rest.starts_with(cfg.ligature_open.as_str()) {
            let inner_start = pos + cfg.ligature_open.len();
            let close = find_close(text, inner_start, &cfg.ligature_close).ok_or_else(|| {
                ParseError::UnterminatedMarkup {
                    line,
                    open: cfg.ligature_open.clone(),
                }
            })?;
            let end = close + cfg.ligature_close.len();
            s.token().markup.push_str(&text[pos..end]);
            s.push_glyph_chars(&text[inner_start..close]);
            pos = end;
            continue;
        }

        if rest.starts_with(cfg.rare_glyph_open.as_str()) {
            let close = find_close(text, pos + cfg.rare_glyph_open.len(), &cfg.rare_glyph_close)
                .ok_or_else(|| ParseError::UnterminatedMarkup {
                    line,
                    open: cfg.rare_glyph_open.clone(),
                })?;
            let end = close + cfg.rare_glyph_close.len();
            let code = &text[pos..end];
            let tok = s.token();
            tok.flags.has_nonstandard_glyph = true;
            tok.glyphs.push(code.to_string());
            tok.markup.push_str(code);
            pos = end;
            continue;
        }

        let consumed = s.push_glyph_at(rest, c);
        s.token().markup.push_str(&rest[..consumed]);
        pos += consumed;
    }

    Ok(s.finish(locus))
}

/// Locus text with inline comments removed; the reference for the
/// reassembly audit.
pub fn strip_comments(text: &str, cfg: &MarkerConfig) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find(cfg.comment_open.as_str()) {
        out.push_str(&rest[..start]);
        let after = &rest[start + cfg.comment_open.len()..];
        match after.find(cfg.comment_close.as_str()) {
            Some(end) => rest = &after[end + cfg.comment_close.len()..],
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out
}
