//! Prompt skeletons for the three modalities and both directions.
//!
//! Everything produced here is a template: the language name and all
//! conlang material are `@` spans, rendered later under the instance key.

use super::DatasetError;
use crate::instance::{Direction, Modality};
use crate::keys::Matrix;

pub const COT_ENDING: &str = "You may explain your chain of thoughts prior to producing the required translation. \
IMPORTANT: Do write your translation between tags in the following manner: <translation>your translation here</translation>.";

pub const NO_COT_ENDING: &str = "Do not explain your chain of thoughts, instead immediately produce the required \
translation in a spontaneous fashion. IMPORTANT: Do write your translation between tags in the following manner: \
<translation>your translation here</translation>.";

/// Inputs of one prompt. `segment` is the English text for eng→art and the
/// conlang template for art→eng; `dictionary` holds pre-formatted entry
/// lines.
#[derive(Debug, Clone)]
pub struct PromptRequest<'a> {
    pub matrix: Matrix,
    pub direction: Direction,
    pub modality: Modality,
    pub cot: bool,
    pub segment: &'a str,
    pub dictionary: &'a [String],
    pub grammar: Option<&'a str>,
    pub ib_lines: Option<&'a [String]>,
}

fn language(matrix: Matrix) -> &'static str {
    match matrix {
        Matrix::French | Matrix::ReversedFrench => "@French@",
        Matrix::Latin => "@Latin@",
    }
}

fn aid(modality: Modality) -> &'static str {
    match modality {
        Modality::W => "a few dictionary entries",
        Modality::WG => "a few dictionary entries and excerpts from a grammar book",
        Modality::WIb => "a few parallel segments and dictionary entries",
    }
}

fn dictionary_header(lang: &str, matrix: Matrix, direction: Direction) -> String {
    const LEAD: &str = "a few dictionary entries that may be of use to you; note that each entry follows the format:";
    const LATIN_TAIL: &str = "optional gender information for nouns, m. for masculine, f. for feminine and n. for neuter \
nouns, (optional mention of a morphological paradigm, conjugation or declension, for verbs and nouns, respectively)";
    match (direction, matrix) {
        (Direction::EngToArt, Matrix::Latin) => format!("Here are {LEAD} English lemma : {lang} equivalent, {LATIN_TAIL}."),
        (Direction::EngToArt, _) => {
            format!("Here are {LEAD} English lemma : {lang} equivalent (grammatical gender and/or part of speech).")
        }
        (Direction::ArtToEng, Matrix::Latin) => {
            format!("And here are {LEAD} {lang} lemma, {LATIN_TAIL} : English equivalent.")
        }
        (Direction::ArtToEng, _) => {
            format!("And here are {LEAD} lemma (grammatical gender and/or part of speech) : English equivalent.")
        }
    }
}

/// Builds the prompt template. Errors if the modality's extra block is
/// absent.
pub fn assemble_prompt(req: &PromptRequest<'_>) -> Result<String, DatasetError> {
    let lang = language(req.matrix);
    let missing = |block| DatasetError::MissingBlock {
        modality: req.modality.to_string(),
        block,
    };
    let mut paragraphs: Vec<String> = Vec::new();
    paragraphs.push(match req.direction {
        Direction::EngToArt => format!(
            "{lang} is a recently devised conlang. You are to translate the following English segment into {lang} with the help of {}.",
            aid(req.modality)
        ),
        Direction::ArtToEng => format!(
            "{lang} is a recently devised conlang. You are to translate the following {lang} text segment into English with the help of {}.",
            aid(req.modality)
        ),
    });
    paragraphs.push(format!("Here is the text segment you must translate:\n{}", req.segment));
    let mut dict = dictionary_header(lang, req.matrix, req.direction);
    for line in req.dictionary {
        dict.push('\n');
        dict.push_str(line);
    }
    paragraphs.push(dict);

    match req.modality {
        Modality::W => {}
        Modality::WG => {
            let grammar = req.grammar.ok_or_else(|| missing("grammar"))?;
            paragraphs.push(format!(
                "And here are relevant excerpts from a grammar book: \n\nBeginning of {lang} Grammar Book Excerpts\n\n{grammar}\n\nEnd of {lang} Grammar Book Excerpts\n"
            ));
        }
        Modality::WIb => {
            let lines = req.ib_lines.ok_or_else(|| missing("parallel-segments"))?;
            paragraphs.push(format!(
                "Here are a few parallel segments that may be of use to you; note that each line follows the format: {lang} segment 'English translation'.\nBeginning of {lang} / English parallel segments\n\n{}\n\nEnd of {lang} / English parallel segments\n",
                lines.join("\n")
            ));
        }
    }

    paragraphs.push(match req.direction {
        Direction::EngToArt => format!("A reminder that the English sentence you must translate into {lang} is:\n{}", req.segment),
        Direction::ArtToEng => format!("A reminder that the {lang} sentence you must translate into English is:\n{}", req.segment),
    });
    paragraphs.push(if req.cot { COT_ENDING } else { NO_COT_ENDING }.to_string());
    Ok(paragraphs.join("\n\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request<'a>(modality: Modality, cot: bool, dictionary: &'a [String]) -> PromptRequest<'a> {
        PromptRequest {
            matrix: Matrix::French,
            direction: Direction::EngToArt,
            modality,
            cot,
            segment: "the confessions",
            dictionary,
            grammar: None,
            ib_lines: None,
        }
    }

    #[test]
    fn word_only_eng_art_skeleton() {
        let dict = vec!["confession : @aveu@ (masc. n.)".to_string()];
        let p = assemble_prompt(&request(Modality::W, true, &dict)).unwrap();
        let expected = "@French@ is a recently devised conlang. You are to translate the following English segment into @French@ with the help of a few dictionary entries.\n\n\
Here is the text segment you must translate:\nthe confessions\n\n\
Here are a few dictionary entries that may be of use to you; note that each entry follows the format: English lemma : @French@ equivalent (grammatical gender and/or part of speech).\nconfession : @aveu@ (masc. n.)\n\n\
A reminder that the English sentence you must translate into @French@ is:\nthe confessions\n\n"
            .to_string()
            + COT_ENDING;
        assert_eq!(p, expected);
        assert!(!p.contains("Grammar Book Excerpts"));
        assert!(!p.contains("parallel segments"));
    }

    #[test]
    fn endings_and_blocks() {
        let dict = vec![];
        let p = assemble_prompt(&request(Modality::W, false, &dict)).unwrap();
        assert!(p.ends_with(NO_COT_ENDING));
        assert!(p.contains("Do not explain your chain of thoughts"));

        let mut req = request(Modality::WG, true, &dict);
        assert!(matches!(assemble_prompt(&req), Err(DatasetError::MissingBlock { .. })));
        req.grammar = Some("NOUNS");
        let p = assemble_prompt(&req).unwrap();
        assert!(p.contains("Beginning of @French@ Grammar Book Excerpts\n\nNOUNS\n\nEnd of @French@ Grammar Book Excerpts\n\n\nA reminder"));

        let ib = vec!["@pneu@ > @pneus@ 'tires'".to_string()];
        let mut req = request(Modality::WIb, true, &dict);
        assert!(assemble_prompt(&req).is_err());
        req.ib_lines = Some(&ib);
        let p = assemble_prompt(&req).unwrap();
        assert!(p.contains("a few parallel segments and dictionary entries."));
        assert!(p.contains("\n\n@pneu@ > @pneus@ 'tires'\n\nEnd of @French@ / English parallel segments"));
    }

    #[test]
    fn art_eng_headers() {
        let dict = vec![];
        let mut req = request(Modality::W, true, &dict);
        req.direction = Direction::ArtToEng;
        req.segment = "@les aveux@";
        let p = assemble_prompt(&req).unwrap();
        assert!(p.contains("the following @French@ text segment into English"));
        assert!(p.contains("\n\nAnd here are a few dictionary entries that may be of use to you; note that each entry follows the format: lemma (grammatical gender and/or part of speech) : English equivalent."));
        assert!(p.contains("the @French@ sentence you must translate into English is:\n@les aveux@"));
        req.matrix = Matrix::Latin;
        let p = assemble_prompt(&req).unwrap();
        assert!(p.contains("format: @Latin@ lemma, optional gender information for nouns"));
    }
}
