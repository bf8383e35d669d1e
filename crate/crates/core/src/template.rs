//! Cleartext templates with `@`-delimited spans marked for encipherment.
//!
//! `a @les coraux@ b` parses into a literal, an encrypt span and another
//! literal. `@` is reserved and has no escape.

use thiserror::Error;

use crate::cipher::{encipher_segment, CipherKey};

pub const DELIMITER: char = '@';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("{source_id}: odd number of '@' delimiters ({count})")]
    UnbalancedDelimiters { source_id: String, count: usize },
    #[error("{source_id}: empty encrypt span at byte {offset}")]
    EmptyEncryptSpan { source_id: String, offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanKind {
    Literal,
    Encrypt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub kind: SpanKind,
    pub text: String,
}

impl Span {
    pub fn literal(text: impl Into<String>) -> Self {
        Span {
            kind: SpanKind::Literal,
            text: text.into(),
        }
    }

    pub fn encrypt(text: impl Into<String>) -> Self {
        Span {
            kind: SpanKind::Encrypt,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub source_id: String,
    pub spans: Vec<Span>,
}

impl Template {
    pub fn parse(raw: &str) -> Result<Self, TemplateError> {
        Self::parse_named("<inline>", raw)
    }

    pub fn parse_named(source_id: &str, raw: &str) -> Result<Self, TemplateError> {
        let count = raw.matches(DELIMITER).count();
        if count % 2 == 1 {
            return Err(TemplateError::UnbalancedDelimiters {
                source_id: source_id.to_string(),
                count,
            });
        }
        let mut spans = Vec::new();
        let mut offset = 0;
        for (i, fragment) in raw.split(DELIMITER).enumerate() {
            if i % 2 == 0 {
                if !fragment.is_empty() {
                    spans.push(Span::literal(fragment));
                }
            } else if fragment.is_empty() {
                return Err(TemplateError::EmptyEncryptSpan {
                    source_id: source_id.to_string(),
                    offset: offset - 1,
                });
            } else {
                spans.push(Span::encrypt(fragment));
            }
            offset += fragment.len() + DELIMITER.len_utf8();
        }
        Ok(Template {
            source_id: source_id.to_string(),
            spans,
        })
    }

    /// Re-serializes the template, reproducing the parsed source.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for span in &self.spans {
            match span.kind {
                SpanKind::Literal => out.push_str(&span.text),
                SpanKind::Encrypt => {
                    out.push(DELIMITER);
                    out.push_str(&span.text);
                    out.push(DELIMITER);
                }
            }
        }
        out
    }

    /// Literals verbatim, encrypt spans enciphered under `key`.
    pub fn render(&self, key: &CipherKey) -> String {
        self.render_with(|clear| encipher_segment(key, clear))
    }

    /// Like [`render`](Self::render), but an encrypt span whose cleartext
    /// starts with an uppercase letter gets a capitalized first letter, as
    /// language names do in running prose.
    pub fn render_with_case(&self, key: &CipherKey) -> String {
        self.render_with(|clear| {
            let enc = encipher_segment(key, clear);
            if clear.chars().next().is_some_and(char::is_uppercase) {
                capitalize(&enc)
            } else {
                enc
            }
        })
    }

    pub fn render_with(&self, mut encipher: impl FnMut(&str) -> String) -> String {
        let mut out = String::new();
        for span in &self.spans {
            match span.kind {
                SpanKind::Literal => out.push_str(&span.text),
                SpanKind::Encrypt => out.push_str(&encipher(&span.text)),
            }
        }
        out
    }

    pub fn encrypt_spans(&self) -> Vec<&str> {
        self.spans
            .iter()
            .filter(|s| s.kind == SpanKind::Encrypt)
            .map(|s| s.text.as_str())
            .collect()
    }

    /// The document with delimiters dropped and nothing enciphered.
    pub fn cleartext(&self) -> String {
        self.render_with(str::to_string)
    }
}

pub fn parse_template(raw: &str) -> Result<Template, TemplateError> {
    Template::parse(raw)
}

pub fn render(template: &Template, key: &CipherKey) -> String {
    template.render(key)
}

pub fn extract_encrypt_spans(template: &Template) -> Vec<String> {
    template.encrypt_spans().into_iter().map(str::to_string).collect()
}

/// Removes the delimiters from a template string without validating it.
pub fn strip_delimiters(raw: &str) -> String {
    raw.chars().filter(|&c| c != DELIMITER).collect()
}

pub(crate) fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{decipher_segment, generate_key, Inventory, Scheme};
    use proptest::prelude::*;

    #[test]
    fn alternating_spans() {
        let t = parse_template("a@b@c").unwrap();
        assert_eq!(t.spans, vec![Span::literal("a"), Span::encrypt("b"), Span::literal("c")]);
    }

    #[test]
    fn table_row_bitext() {
        let t = parse_template("@les coraux@ ↔ the corals").unwrap();
        assert_eq!(t.spans, vec![Span::encrypt("les coraux"), Span::literal(" ↔ the corals")]);
        assert_eq!(extract_encrypt_spans(&t), vec!["les coraux"]);
    }

    #[test]
    fn unbalanced() {
        assert!(matches!(
            parse_template("a@b"),
            Err(TemplateError::UnbalancedDelimiters { count: 1, .. })
        ));
    }

    #[test]
    fn adjacent_delimiters_are_an_empty_span() {
        assert!(matches!(
            parse_template("x@@y"),
            Err(TemplateError::EmptyEncryptSpan { offset: 1, .. })
        ));
    }

    #[test]
    fn span_extraction() {
        assert_eq!(extract_encrypt_spans(&parse_template("a@b@c@d@").unwrap()), vec!["b", "d"]);
        assert!(extract_encrypt_spans(&parse_template("plain").unwrap()).is_empty());
        assert_eq!(strip_delimiters("a@b@c"), "abc");
    }

    #[test]
    fn literal_only_renders_verbatim() {
        let key = generate_key(&Inventory::default(), Scheme::SubstitutionOnly, 1).unwrap();
        let t = parse_template("just English, nothing else.").unwrap();
        assert_eq!(t.render(&key), "just English, nothing else.");
    }

    #[test]
    fn render_is_deterministic_and_delimiter_free() {
        let key = generate_key(&Inventory::default(), Scheme::SubstitutionWithReversal, 4).unwrap();
        let t = parse_template("Nouns ending in @-au@ take @-x@ (e.g., @tuyau@ > @tuyaux@ 'pipes').").unwrap();
        let a = t.render(&key);
        assert_eq!(a, t.render(&key));
        assert!(!a.contains('@'));
        assert!(a.starts_with("Nouns ending in "));
        assert_eq!(t.cleartext(), "Nouns ending in -au take -x (e.g., tuyau > tuyaux 'pipes').");
    }

    #[test]
    fn capitalized_names() {
        let key = generate_key(&Inventory::default(), Scheme::SubstitutionOnly, 9).unwrap();
        let t = parse_template("@French@ nouns and @french@").unwrap();
        let out = t.render_with_case(&key);
        let enc = encipher_segment(&key, "french");
        assert!(out.starts_with(&capitalize(&enc)));
        assert!(out.ends_with(&enc));
        assert_eq!(decipher_segment(&key, &capitalize(&enc)).unwrap(), "french");
    }

    proptest! {
        #[test]
        fn parse_is_lossless(parts in prop::collection::vec("[a-z ,.'-]{1,8}", 0..8), lead in "[a-z ]{0,4}") {
            let mut raw = lead.clone();
            for (i, p) in parts.iter().enumerate() {
                if i % 2 == 0 {
                    raw.push('@');
                    raw.push_str(p);
                    raw.push('@');
                } else {
                    raw.push_str(p);
                }
            }
            let t = parse_template(&raw).unwrap();
            prop_assert_eq!(t.to_source(), raw);
        }

        #[test]
        fn rendered_spans_decipher(seed in any::<u64>(), spans in prop::collection::vec("[a-zé' -]{1,12}", 1..5)) {
            let key = generate_key(&Inventory::default(), Scheme::SubstitutionWithReversal, seed).unwrap();
            let raw: String = spans.iter().map(|s| format!("|@{s}@")).collect();
            let t = parse_template(&raw).unwrap();
            let rendered = t.render(&key);
            let regions: Vec<&str> = rendered.split('|').skip(1).collect();
            prop_assert_eq!(regions.len(), spans.len());
            for (region, s) in regions.iter().zip(&spans) {
                prop_assert_eq!(decipher_segment(&key, region).unwrap(), s.to_lowercase());
            }
        }
    }
}
