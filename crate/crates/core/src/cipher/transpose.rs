//! Character-order transpositions.
//!
//! Both transpositions split the lowercased text into words (runs of
//! letters, digits, hyphens and apostrophes) and the separators between
//! them. Separators carrying punctuation are re-anchored rather than
//! reversed, so "The quick, brown fox." becomes "xof nworb, kciuq eht.".

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '-' | '\'' | '’')
}

struct Layout {
    prefix: String,
    words: Vec<String>,
    gaps: Vec<String>,
    suffix: String,
}

fn layout(text: &str) -> Layout {
    let lower = text.to_lowercase();
    let mut runs: Vec<(bool, String)> = Vec::new();
    for c in lower.chars() {
        let word = is_word_char(c);
        match runs.last_mut() {
            Some((w, run)) if *w == word => run.push(c),
            _ => runs.push((word, c.to_string())),
        }
    }

    let mut out = Layout {
        prefix: String::new(),
        words: Vec::new(),
        gaps: Vec::new(),
        suffix: String::new(),
    };
    let mut pending_sep: Option<String> = None;
    for (word, run) in runs {
        if word {
            if let Some(sep) = pending_sep.take() {
                if out.words.is_empty() {
                    out.prefix = sep;
                } else {
                    out.gaps.push(sep);
                }
            } else if !out.words.is_empty() {
                out.gaps.push(String::new());
            }
            out.words.push(run);
        } else {
            pending_sep = Some(run);
        }
    }
    match pending_sep {
        Some(sep) if out.words.is_empty() => out.prefix = sep,
        Some(sep) => out.suffix = sep,
        None => {}
    }
    out
}

fn assemble(prefix: &str, words: &[String], gaps: &[String], suffix: &str) -> String {
    let mut s = String::from(prefix);
    for (i, w) in words.iter().enumerate() {
        s.push_str(w);
        if let Some(g) = gaps.get(i) {
            s.push_str(g);
        }
    }
    s.push_str(suffix);
    s
}

fn reverse_chars(s: &str) -> String {
    s.chars().rev().collect()
}

/// Reverses the letter order of the whole sentence.
///
/// Leading and trailing punctuation stay in place; separators between
/// words are mirrored along with the words, so a comma that followed the
/// second of four words ends up after the second word of the output.
/// Hyphens and apostrophes belong to words and reverse with them
/// ("-au" becomes "ua-"). The result is lowercase.
pub fn reverse_sentence(text: &str) -> String {
    let Layout {
        prefix,
        mut words,
        mut gaps,
        suffix,
    } = layout(text);
    words.reverse();
    for w in &mut words {
        *w = reverse_chars(w);
    }
    gaps.reverse();
    assemble(&prefix, &words, &gaps, &suffix)
}

/// Reverses the letters of each word in place; word order and punctuation
/// are unchanged. The result is lowercase.
pub fn reverse_words(text: &str) -> String {
    let Layout {
        prefix,
        mut words,
        gaps,
        suffix,
    } = layout(text);
    for w in &mut words {
        *w = reverse_chars(w);
    }
    assemble(&prefix, &words, &gaps, &suffix)
}
