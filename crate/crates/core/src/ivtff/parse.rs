use std::collections::BTreeMap;
use std::collections::HashSet;

use super::{
    sha256_hex, tokenize_locus, Locus, MarkerConfig, Page, PageHeader, ParseError,
    TransliterationDocument,
};

const FORMAT_PREFIX: &str = "#=IVTFF";

enum Locator<'a> {
    Page { folio: &'a str },
    Locus { folio: &'a str, number: u32, kind: &'a str, tag: &'a str },
}

fn malformed(line: usize, reason: impl Into<String>) -> ParseError {
    ParseError::MalformedHeader {
        line,
        reason: reason.into(),
    }
}

fn valid_folio(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric())
}

/// Splits `<...>rest` into the locator and whatever follows it.
fn parse_locator(line: &str, lineno: usize) -> Result<(Locator<'_>, &str), ParseError> {
    let close = line
        .find('>')
        .ok_or_else(|| malformed(lineno, "locator has no closing `>`"))?;
    let inner = &line[1..close];
    let rest = &line[close + 1..];

    let Some((folio, tail)) = inner.split_once('.') else {
        if !valid_folio(inner) {
            return Err(malformed(lineno, format!("bad page id `{inner}`")));
        }
        return Ok((Locator::Page { folio: inner }, rest));
    };
    if !valid_folio(folio) {
        return Err(malformed(lineno, format!("bad page id `{folio}`")));
    }
    let (num, typed) = tail
        .split_once(',')
        .ok_or_else(|| malformed(lineno, format!("locus `{inner}` lacks a type")))?;
    let number: u32 = num
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| malformed(lineno, format!("bad locus number `{num}`")))?;
    let (kind, tag) = typed.split_once(';').unwrap_or((typed, ""));
    let kind_ok = (2..=3).contains(&kind.chars().count())
        && kind.chars().all(|c| c.is_ascii_graphic())
        && kind.chars().any(|c| c.is_ascii_alphabetic());
    if !kind_ok {
        return Err(malformed(lineno, format!("bad locus type `{kind}`")));
    }
    if tag.chars().any(|c| !c.is_ascii_alphanumeric()) {
        return Err(malformed(lineno, format!("bad transcriber tag `{tag}`")));
    }
    Ok((
        Locator::Locus {
            folio,
            number,
            kind,
            tag,
        },
        rest,
    ))
}

fn header_from_parts(folio: &str, rest: &str, lineno: usize) -> Result<PageHeader, ParseError> {
    let rest = rest.trim();
    let mut variables = BTreeMap::new();
    let mut note = Vec::new();
    if !rest.is_empty() {
        let body = rest
            .strip_prefix("<!")
            .and_then(|r| r.strip_suffix('>'))
            .ok_or_else(|| malformed(lineno, format!("unexpected text after page id: `{rest}`")))?;
        for word in body.split_whitespace() {
            let Some(var) = word.strip_prefix('$') else {
                note.push(word);
                continue;
            };
            let (key, value) = var
                .split_once('=')
                .ok_or_else(|| malformed(lineno, format!("variable `{word}` has no value")))?;
            if key.is_empty() {
                return Err(malformed(lineno, format!("variable `{word}` has no name")));
            }
            if variables.insert(key.to_string(), value.to_string()).is_some() {
                return Err(malformed(lineno, format!("duplicate variable `${key}`")));
            }
        }
    }
    Ok(PageHeader {
        folio_id: folio.to_string(),
        variables,
        note: note.join(" "),
    })
}

/// Parses a single page-header line such as `<f36r>   <! $I=H $H=1>`.
pub fn parse_page_header(line: &str) -> Result<PageHeader, ParseError> {
    let line = line.trim_end();
    if !line.starts_with('<') {
        return Err(malformed(1, "page header must start with `<`"));
    }
    match parse_locator(line, 1)? {
        (Locator::Page { folio }, rest) => header_from_parts(folio, rest, 1),
        (Locator::Locus { .. }, _) => Err(malformed(1, "expected a page header, found a locus")),
    }
}

/// Parses a complete IVTFF file. Every locus is tokenized once as a
/// validity check, so markup errors surface here with their line numbers.
pub fn parse_document(
    input: &[u8],
    config: &MarkerConfig,
) -> Result<TransliterationDocument, ParseError> {
    config.validate()?;
    let text = std::str::from_utf8(input).map_err(|e| ParseError::Encoding(e.valid_up_to()))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut format_line = None;
    let mut pages: Vec<Page> = Vec::new();
    let mut seen_pages = HashSet::new();
    let mut seen_loci = HashSet::new();
    let mut saw_content = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(FORMAT_PREFIX) {
            if saw_content || format_line.is_some() {
                return Err(malformed(lineno, "format line must be the first line"));
            }
            if !rest.starts_with(' ') || rest.split_whitespace().count() < 2 {
                return Err(malformed(lineno, "format line needs alphabet and version"));
            }
            format_line = Some(line.to_string());
            saw_content = true;
            continue;
        }
        saw_content = true;
        if line.starts_with('#') {
            continue;
        }
        if line.starts_with('<') {
            match parse_locator(line, lineno)? {
                (Locator::Page { folio }, rest) => {
                    if !seen_pages.insert(folio.to_string()) {
                        return Err(malformed(lineno, format!("duplicate page `{folio}`")));
                    }
                    pages.push(Page {
                        header: header_from_parts(folio, rest, lineno)?,
                        loci: Vec::new(),
                    });
                }
                (
                    Locator::Locus {
                        folio,
                        number,
                        kind,
                        tag,
                    },
                    rest,
                ) => {
                    let page = pages
                        .last_mut()
                        .filter(|p| p.header.folio_id == folio)
                        .ok_or_else(|| {
                            malformed(lineno, format!("locus for `{folio}` outside its page"))
                        })?;
                    if !seen_loci.insert((folio.to_string(), number, tag.to_string())) {
                        return Err(malformed(
                            lineno,
                            format!("duplicate locus `{folio}.{number}`"),
                        ));
                    }
                    page.loci.push(Locus {
                        folio_id: folio.to_string(),
                        locus_number: number,
                        locus_type: kind.to_string(),
                        transcriber_tag: tag.to_string(),
                        raw_text: rest.trim().to_string(),
                        source_line: lineno,
                    });
                }
            }
            continue;
        }
        // Anything else continues the text of the preceding locus.
        let locus = pages
            .last_mut()
            .and_then(|p| p.loci.last_mut())
            .ok_or_else(|| malformed(lineno, "text line before any locus"))?;
        locus.raw_text.push_str(line.trim());
    }

    for locus in pages.iter().flat_map(|p| &p.loci) {
        tokenize_locus(locus, config)?;
    }

    Ok(TransliterationDocument {
        format_line,
        pages,
        marker_config: config.clone(),
        source_checksum: sha256_hex(input),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "<f36r>      <! $I=H $H=1>\n<f36r.1,@P0>      kshol.qoocthy.shody.qotshey<->dain<$>\n";

    #[test]
    fn minimal_two_line_file() {
        let doc = parse_document(MINIMAL.as_bytes(), &MarkerConfig::default()).unwrap();
        assert_eq!(doc.pages.len(), 1);
        assert_eq!(doc.pages[0].loci.len(), 1);
        let l = &doc.pages[0].loci[0];
        assert_eq!(l.folio_id, "f36r");
        assert_eq!(l.locus_number, 1);
        assert_eq!(l.locus_type, "@P0");
        assert_eq!(l.source_line, 2);
        assert_eq!(l.raw_text, "kshol.qoocthy.shody.qotshey<->dain<$>");
        assert_eq!(doc.source_checksum.len(), 64);
    }

    #[test]
    fn empty_body_after_format_line() {
        let doc = parse_document(b"#=IVTFF Eva- 2.0 M 5\n# comment\n\n", &MarkerConfig::default())
            .unwrap();
        assert!(doc.pages.is_empty());
        assert_eq!(doc.format_line.as_deref(), Some("#=IVTFF Eva- 2.0 M 5"));
    }

    #[test]
    fn page_header_variables() {
        let h = parse_page_header("<f36r>      <! $I=H $H=1>").unwrap();
        assert_eq!(h.folio_id, "f36r");
        assert_eq!(h.variables.len(), 2);
        assert_eq!(h.variables["I"], "H");
        assert_eq!(h.variables["H"], "1");
    }

    #[test]
    fn page_header_without_variables() {
        let h = parse_page_header("<f1v>").unwrap();
        assert!(h.variables.is_empty());
    }

    #[test]
    fn duplicate_variable_is_malformed() {
        assert!(matches!(
            parse_page_header("<f1v> <! $I=H $I=T>"),
            Err(ParseError::MalformedHeader { .. })
        ));
    }

    #[test]
    fn malformed_locators_report_line_numbers() {
        let cases = [
            "<f1r>\n<f1r.x,@P0> daiin\n",
            "<f1r>\n<f1r.1> daiin\n",
            "<f1r>\n<f1r.1,@P0 daiin\n",
            "<f1r>\n<f2r.1,@P0> daiin\n",
            "<f1r>\n<f1r.0,@P0> daiin\n",
            "<f1r>\n<f1r> \n",
            "<f1r> trailing words\n",
        ];
        for c in cases {
            match parse_document(c.as_bytes(), &MarkerConfig::default()) {
                Err(ParseError::MalformedHeader { line, .. }) => {
                    assert!((1..=2).contains(&line), "{c:?}")
                }
                other => panic!("{c:?} -> {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_locus_is_malformed() {
        let input = "<f1r>\n<f1r.1,@P0> a\n<f1r.1,+P0> b\n";
        assert!(parse_document(input.as_bytes(), &MarkerConfig::default()).is_err());
        // Different transcribers may share a locus number.
        let input = "<f1r>\n<f1r.1,@P0;H> a\n<f1r.1,@P0;C> b\n";
        assert!(parse_document(input.as_bytes(), &MarkerConfig::default()).is_ok());
    }

    #[test]
    fn unterminated_markup_surfaces_at_parse() {
        let input = "<f1r>\n<f1r.1,@P0> a.b\n<f1r.2,+P0> [a:o.dy\n";
        assert_eq!(
            parse_document(input.as_bytes(), &MarkerConfig::default()),
            Err(ParseError::UnterminatedMarkup {
                line: 3,
                open: "[".into()
            })
        );
    }

    #[test]
    fn continuation_lines_are_joined() {
        let input = "<f1r>\n<f1r.1,@P0> daiin.chor.\n   shol.dy\n";
        let doc = parse_document(input.as_bytes(), &MarkerConfig::default()).unwrap();
        assert_eq!(doc.pages[0].loci[0].raw_text, "daiin.chor.shol.dy");
    }

    #[test]
    fn format_line_must_come_first() {
        let input = "<f1r>\n#=IVTFF Eva- 2.0\n";
        assert!(parse_document(input.as_bytes(), &MarkerConfig::default()).is_err());
    }
}
