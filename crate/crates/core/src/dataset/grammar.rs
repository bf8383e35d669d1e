//! Grammar-book templates: parsing, canonical and randomized rendering, and
//! incidental-bitext extraction.
//!
//! Source format, one item per line:
//!
//! ```text
//! // comment
//! # SECTION TITLE
//! - first paraphrase of a paragraph
//! = another paraphrase of the same paragraph
//! ## Subsection title
//! - paragraph text with a list {{and: @a@ | @b@ | @c@}}
//! %table Title
//! % header | cells
//! % row | cells
//! %end
//! ```
//!
//! `\n` inside paragraph text is a line break. `{{a | b}}` is a list whose
//! order is shuffled by variation; `{{and: …}}` and `{{or: …}}` join the last
//! two items with the word.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DatasetError;
use crate::template::{SpanKind, Template};

/// Marker symbols for section rules, subsection bullets and tables.
pub const DEFAULT_SYMBOLS: [char; 8] = ['-', '#', '~', '§', '*', ':', '+', '='];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub title: String,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Block {
    /// A bank of interchangeable paraphrases; the first is canonical.
    Paragraph(Vec<String>),
    Table(Table),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsection {
    pub title: String,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub title: String,
    /// Blocks before the first subsection.
    pub intro: Vec<Block>,
    pub subsections: Vec<Subsection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarBook {
    pub source_id: String,
    pub sections: Vec<Section>,
}

/// An example pair embedded in grammar prose, e.g. `@pneu@ > @pneus@ 'tires'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidentalBitext {
    pub conlang_template: String,
    pub english: String,
}

impl IncidentalBitext {
    /// `conlang 'english'`, one line of a parallel-segments block.
    pub fn line(&self) -> String {
        format!("{} '{}'", self.conlang_template, self.english)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarExcerpt {
    pub sections: Vec<Section>,
    pub incidental_bitexts: Vec<IncidentalBitext>,
}

fn parse_error(source_id: &str, line: usize, reason: impl Into<String>) -> DatasetError {
    DatasetError::Grammar {
        source_id: source_id.to_string(),
        line,
        reason: reason.into(),
    }
}

impl GrammarBook {
    pub fn parse(source_id: &str, text: &str) -> Result<Self, DatasetError> {
        let mut sections: Vec<Section> = Vec::new();
        let mut table: Option<(Table, usize)> = None;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim_end();
            if let Some((t, _)) = table.as_mut() {
                if line == "%end" {
                    let (t, _) = table.take().expect("open table");
                    push_block(&mut sections, Block::Table(t)).map_err(|r| parse_error(source_id, lineno, r))?;
                } else if let Some(row) = line.strip_prefix("% ") {
                    let cells: Vec<String> = row.split('|').map(|c| c.trim().to_string()).collect();
                    for c in &cells {
                        Template::parse(c).map_err(|e| parse_error(source_id, lineno, e.to_string()))?;
                    }
                    t.rows.push(cells);
                } else {
                    return Err(parse_error(source_id, lineno, "expected a '% ' row or %end inside a table"));
                }
                continue;
            }
            if line.trim().is_empty() || line.starts_with("//") {
                continue;
            }
            if let Some(title) = line.strip_prefix("## ") {
                let section = sections
                    .last_mut()
                    .ok_or_else(|| parse_error(source_id, lineno, "subsection before any section"))?;
                section.subsections.push(Subsection {
                    title: title.trim().to_string(),
                    blocks: Vec::new(),
                });
            } else if let Some(title) = line.strip_prefix("# ") {
                sections.push(Section {
                    title: title.trim().to_string(),
                    intro: Vec::new(),
                    subsections: Vec::new(),
                });
            } else if let Some(text) = line.strip_prefix("- ") {
                let text = unescape(text);
                validate_paragraph(&text).map_err(|r| parse_error(source_id, lineno, r))?;
                push_block(&mut sections, Block::Paragraph(vec![text])).map_err(|r| parse_error(source_id, lineno, r))?;
            } else if let Some(text) = line.strip_prefix("= ") {
                let text = unescape(text);
                validate_paragraph(&text).map_err(|r| parse_error(source_id, lineno, r))?;
                match last_block(&mut sections) {
                    Some(Block::Paragraph(bank)) => bank.push(text),
                    _ => return Err(parse_error(source_id, lineno, "paraphrase without a preceding paragraph")),
                }
            } else if let Some(title) = line.strip_prefix("%table") {
                table = Some((
                    Table {
                        title: title.trim().to_string(),
                        rows: Vec::new(),
                    },
                    lineno,
                ));
            } else {
                return Err(parse_error(source_id, lineno, format!("unrecognized line {line:?}")));
            }
        }
        if let Some((_, start)) = table {
            return Err(parse_error(source_id, start, "table is never closed with %end"));
        }
        Ok(GrammarBook {
            source_id: source_id.to_string(),
            sections,
        })
    }

    pub fn section(&self, title: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.title == title)
    }

    /// The named sections, in the order given.
    pub fn excerpt(&self, titles: &[String]) -> Result<GrammarExcerpt, DatasetError> {
        let sections = titles
            .iter()
            .map(|t| {
                self.section(t).cloned().ok_or_else(|| DatasetError::MissingResource(format!(
                    "section {t:?} in {}",
                    self.source_id
                )))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GrammarExcerpt::new(sections))
    }
}

fn unescape(s: &str) -> String {
    s.replace("\\n", "\n")
}

fn last_block(sections: &mut [Section]) -> Option<&mut Block> {
    let section = sections.last_mut()?;
    match section.subsections.last_mut() {
        Some(sub) => sub.blocks.last_mut(),
        None => section.intro.last_mut(),
    }
}

fn push_block(sections: &mut [Section], block: Block) -> Result<(), String> {
    let section = sections.last_mut().ok_or("content before any section")?;
    match section.subsections.last_mut() {
        Some(sub) => sub.blocks.push(block),
        None => section.intro.push(block),
    }
    Ok(())
}

fn validate_paragraph(text: &str) -> Result<(), String> {
    let expanded = expand_lists(text, None)?;
    Template::parse(&expanded).map_err(|e| e.to_string())?;
    Ok(())
}

/// Expands `{{…}}` lists, shuffling items when an RNG is supplied.
fn expand_lists(text: &str, mut rng: Option<&mut ChaCha8Rng>) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or("unclosed list '{{'")?;
        let inner = after[..end].trim();
        let (joiner, body) = if let Some(b) = inner.strip_prefix("and:") {
            (Some("and"), b)
        } else if let Some(b) = inner.strip_prefix("or:") {
            (Some("or"), b)
        } else {
            (None, inner)
        };
        let mut items: Vec<&str> = body.split('|').map(str::trim).collect();
        if items.iter().any(|i| i.is_empty()) {
            return Err("empty list item".into());
        }
        for item in &items {
            if item.matches('@').count() % 2 == 1 {
                return Err(format!("list item {item:?} splits an encrypt span"));
            }
        }
        if let Some(rng) = rng.as_deref_mut() {
            items.shuffle(rng);
        }
        out.push_str(&join_items(&items, joiner));
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

fn join_items(items: &[&str], joiner: Option<&str>) -> String {
    match (joiner, items) {
        (Some(word), [init @ .., last]) if !init.is_empty() => format!("{} {word} {last}", init.join(", ")),
        _ => items.join(", "),
    }
}

/// Identity of one rendered block: (section, subsection, block, paraphrase).
/// Section-intro blocks have no subsection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockRef {
    pub section: usize,
    pub subsection: Option<usize>,
    pub block: usize,
    pub paraphrase: usize,
}

struct Style {
    section_marker: char,
    subsection_marker: char,
    table_symbol: char,
    table_layout: usize,
}

const TABLE_LAYOUTS: usize = 3;

impl GrammarExcerpt {
    pub fn new(sections: Vec<Section>) -> Self {
        let incidental_bitexts = scan_incidental_bitexts(&sections);
        GrammarExcerpt {
            sections,
            incidental_bitexts,
        }
    }

    fn check_banks(&self) -> Result<(), DatasetError> {
        for s in &self.sections {
            let blocks = s.intro.iter().chain(s.subsections.iter().flat_map(|sub| sub.blocks.iter()));
            for b in blocks {
                if matches!(b, Block::Paragraph(bank) if bank.is_empty()) {
                    return Err(DatasetError::EmptyParaphraseBank { section: s.title.clone() });
                }
            }
        }
        Ok(())
    }

    /// The fixed rendering used in the test set: source order, first
    /// paraphrases, unshuffled lists, `-` rules and `*` bullets.
    pub fn canonical(&self) -> Result<String, DatasetError> {
        self.check_banks()?;
        let style = Style {
            section_marker: '-',
            subsection_marker: '*',
            table_symbol: '-',
            table_layout: 0,
        };
        Ok(self.render(&style, None).0)
    }

    pub fn vary(&self, seed: u64, symbols: &[char]) -> Result<(String, Vec<BlockRef>), DatasetError> {
        self.check_banks()?;
        if symbols.is_empty() {
            return Err(DatasetError::MissingResource("marker symbol list is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let style = Style {
            section_marker: symbols[rng.random_range(0..symbols.len())],
            subsection_marker: symbols[rng.random_range(0..symbols.len())],
            table_symbol: symbols[rng.random_range(0..symbols.len())],
            table_layout: rng.random_range(0..TABLE_LAYOUTS),
        };
        Ok(self.render(&style, Some(&mut rng)))
    }

    fn render(&self, style: &Style, mut rng: Option<&mut ChaCha8Rng>) -> (String, Vec<BlockRef>) {
        let mut trace = Vec::new();
        let mut order: Vec<usize> = (0..self.sections.len()).collect();
        if let Some(rng) = rng.as_deref_mut() {
            order.shuffle(rng);
        }
        let mut parts = Vec::new();
        for si in order {
            let section = &self.sections[si];
            let rule: String = std::iter::repeat_n(style.section_marker, section.title.chars().count()).collect();
            let mut out = format!("{rule}\n{}\n{rule}", section.title);
            for text in render_blocks(&section.intro, si, None, style, rng.as_deref_mut(), &mut trace) {
                out.push_str("\n\n");
                out.push_str(&text);
            }
            let mut sub_order: Vec<usize> = (0..section.subsections.len()).collect();
            if let Some(rng) = rng.as_deref_mut() {
                sub_order.shuffle(rng);
            }
            for sj in sub_order {
                let sub = &section.subsections[sj];
                out.push_str(&format!("\n\n{} {}", style.subsection_marker, sub.title));
                let texts = render_blocks(&sub.blocks, si, Some(sj), style, rng.as_deref_mut(), &mut trace);
                for (k, text) in texts.iter().enumerate() {
                    out.push_str(if k == 0 { "\n" } else { "\n\n" });
                    out.push_str(text);
                }
            }
            parts.push(out);
        }
        (parts.join("\n\n"), trace)
    }
}

/// Renders blocks keeping the first in place and shuffling the rest.
fn render_blocks(
    blocks: &[Block],
    section: usize,
    subsection: Option<usize>,
    style: &Style,
    mut rng: Option<&mut ChaCha8Rng>,
    trace: &mut Vec<BlockRef>,
) -> Vec<String> {
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    if let Some(rng) = rng.as_deref_mut() {
        if order.len() > 2 {
            order[1..].shuffle(rng);
        }
    }
    order
        .into_iter()
        .map(|bi| match &blocks[bi] {
            Block::Paragraph(bank) => {
                let pick = rng.as_deref_mut().map_or(0, |r| r.random_range(0..bank.len()));
                trace.push(BlockRef {
                    section,
                    subsection,
                    block: bi,
                    paraphrase: pick,
                });
                expand_lists(&bank[pick], rng.as_deref_mut()).expect("validated at parse time")
            }
            Block::Table(t) => {
                trace.push(BlockRef {
                    section,
                    subsection,
                    block: bi,
                    paraphrase: 0,
                });
                render_table(t, style)
            }
        })
        .collect()
}

fn render_table(t: &Table, style: &Style) -> String {
    let m = style.table_symbol;
    let mut out = t.title.clone();
    let Some((header, body)) = t.rows.split_first() else {
        return out;
    };
    match style.table_layout {
        0 => {
            let head = header.join(" | ");
            out.push('\n');
            out.push_str(&head);
            out.push('\n');
            out.extend(std::iter::repeat_n(m, head.chars().count()));
            for row in body {
                out.push('\n');
                out.push_str(&row.join(" | "));
            }
        }
        1 => {
            out.push(':');
            for row in body {
                let (label, cells) = row.split_first().map_or(("", &[][..]), |(l, c)| (l.as_str(), c));
                let pairs: Vec<String> = header
                    .iter()
                    .skip(1)
                    .zip(cells)
                    .map(|(h, c)| if h.is_empty() { c.clone() } else { format!("{h} {c}") })
                    .collect();
                out.push_str(&format!("\n{m} {label}: {}", pairs.join("; ")));
            }
        }
        _ => {
            let sep = format!(" {m} ");
            for row in &t.rows {
                out.push('\n');
                out.push_str(&row.join(&sep));
            }
        }
    }
    out
}

const CONNECTORS: [&str; 7] = [">", "→", "-->", "becomes", "to", "changes to", "gives"];
const GLOSS_LEADS: [&str; 5] = [", meaning", "meaning", ", i.e.", ",", "("];

/// Finds a quoted gloss at the start of a literal, after optional lead-in
/// words. Returns the gloss text.
fn leading_gloss(literal: &str) -> Option<&str> {
    let mut s = literal.trim_start();
    for lead in GLOSS_LEADS {
        if let Some(rest) = s.strip_prefix(lead) {
            s = rest.trim_start();
            break;
        }
    }
    let mut chars = s.chars();
    let open = chars.next()?;
    let closers: &[char] = match open {
        '\'' | '`' | '‘' => &['\'', '’'],
        '"' => &['"'],
        '“' => &['”'],
        _ => return None,
    };
    let body = &s[open.len_utf8()..];
    let end = body.find(closers)?;
    let gloss = body[..end].trim();
    (!gloss.is_empty()).then_some(gloss)
}

fn is_connector(literal: &str) -> bool {
    CONNECTORS.contains(&literal.trim())
}

/// Pairs found in one paragraph: chains of encrypt spans joined by
/// connectors, immediately followed by a quoted gloss.
pub fn scan_paragraph(text: &str) -> Vec<IncidentalBitext> {
    let Ok(template) = Template::parse(text) else {
        return Vec::new();
    };
    let mut found = Vec::new();
    let mut chain = String::new();
    let mut pending_connector: Option<&str> = None;
    for span in &template.spans {
        match span.kind {
            SpanKind::Encrypt => {
                match pending_connector.take() {
                    Some(conn) if !chain.is_empty() => chain.push_str(conn),
                    _ => chain.clear(),
                }
                chain.push('@');
                chain.push_str(&span.text);
                chain.push('@');
            }
            SpanKind::Literal => {
                pending_connector = None;
                if chain.is_empty() {
                    continue;
                }
                if let Some(gloss) = leading_gloss(&span.text) {
                    found.push(IncidentalBitext {
                        conlang_template: std::mem::take(&mut chain),
                        english: gloss.to_string(),
                    });
                } else if is_connector(&span.text) {
                    pending_connector = Some(span.text.as_str());
                } else {
                    chain.clear();
                }
            }
        }
    }
    found
}

fn scan_incidental_bitexts(sections: &[Section]) -> Vec<IncidentalBitext> {
    let mut out = Vec::new();
    for s in sections {
        let blocks = s.intro.iter().chain(s.subsections.iter().flat_map(|sub| sub.blocks.iter()));
        for b in blocks {
            if let Block::Paragraph(bank) = b {
                if let Some(first) = bank.first() {
                    if let Ok(expanded) = expand_lists(first, None) {
                        out.extend(scan_paragraph(&expanded));
                    }
                }
            }
        }
    }
    out
}

/// Tracked example pairs of an excerpt, in document order.
pub fn extract_incidental_bitexts(excerpt: &GrammarExcerpt) -> Vec<IncidentalBitext> {
    excerpt.incidental_bitexts.clone()
}

/// One randomized rendering of `excerpt`, drawing markers from `symbols`.
pub fn vary_grammar_excerpt(excerpt: &GrammarExcerpt, seed: u64, symbols: &[char]) -> Result<String, DatasetError> {
    excerpt.vary(seed, symbols).map(|(text, _)| text)
}
