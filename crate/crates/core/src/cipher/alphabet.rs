use std::collections::HashSet;
use std::fmt;

use super::CipherError;

/// Ordered inventory of distinct letter characters.
///
/// Used both for the cleartext alphabet and for the consonant/vowel
/// inventories of the cipher side. Whitespace, digits and punctuation are
/// rejected: those characters always pass through the cipher unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    chars: Vec<char>,
}

impl Alphabet {
    pub fn new(chars: impl IntoIterator<Item = char>) -> Result<Self, CipherError> {
        let chars: Vec<char> = chars.into_iter().collect();
        let mut seen = HashSet::with_capacity(chars.len());
        for &c in &chars {
            if !c.is_alphabetic() || c.is_whitespace() || c.is_numeric() {
                return Err(CipherError::InvalidAlphabet(format!(
                    "{c:?} is not a letter"
                )));
            }
            if !seen.insert(c) {
                return Err(CipherError::InvalidAlphabet(format!(
                    "{c:?} occurs more than once"
                )));
            }
        }
        Ok(Self { chars })
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn contains(&self, c: char) -> bool {
        self.chars.contains(&c)
    }

    pub fn is_disjoint(&self, other: &Alphabet) -> bool {
        self.chars.iter().all(|c| !other.contains(*c))
    }
}

impl std::str::FromStr for Alphabet {
    type Err = CipherError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Alphabet::new(s.chars())
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.chars.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

/// The character inventories a key is generated from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inventory {
    pub clear: Alphabet,
    pub consonants: Alphabet,
    pub vowels: Alphabet,
}

/// Basic Latin letters plus the accented letters found in the French and
/// Latin resources.
pub const DEFAULT_CLEAR: &str = "abcdefghijklmnopqrstuvwxyzàâæçéèêëîïôœùûüÿ";
/// Cipher-side consonants, including a few extended-Latin forms.
pub const DEFAULT_CONSONANTS: &str = "bcdfghjklmnpqrstvwxzçñþð";
/// Cipher-side vowels, including accented forms.
pub const DEFAULT_VOWELS: &str = "aeiouyàâæéèêîôœûø";

impl Inventory {
    pub fn new(clear: Alphabet, consonants: Alphabet, vowels: Alphabet) -> Result<Self, CipherError> {
        if consonants.is_empty() || vowels.is_empty() {
            return Err(CipherError::InvalidAlphabet(
                "consonant and vowel inventories must be non-empty".into(),
            ));
        }
        if !consonants.is_disjoint(&vowels) {
            return Err(CipherError::InvalidAlphabet(
                "consonant and vowel inventories overlap".into(),
            ));
        }
        Ok(Self {
            clear,
            consonants,
            vowels,
        })
    }
}

impl Default for Inventory {
    fn default() -> Self {
        Inventory::new(
            DEFAULT_CLEAR.parse().expect("default clear alphabet"),
            DEFAULT_CONSONANTS.parse().expect("default consonants"),
            DEFAULT_VOWELS.parse().expect("default vowels"),
        )
        .expect("default inventory")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_non_letters() {
        assert!(Alphabet::new("abca".chars()).is_err());
        assert!(Alphabet::new("ab c".chars()).is_err());
        assert!(Alphabet::new("ab,".chars()).is_err());
        assert!(Alphabet::new("ab1".chars()).is_err());
        assert!(Alphabet::new("abé".chars()).is_ok());
    }

    #[test]
    fn default_inventory_is_valid() {
        let inv = Inventory::default();
        assert_eq!(inv.clear.len(), DEFAULT_CLEAR.chars().count());
        assert!(inv.consonants.is_disjoint(&inv.vowels));
    }

    #[test]
    fn overlapping_consonants_and_vowels_rejected() {
        let err = Inventory::new(
            "ab".parse().unwrap(),
            "bc".parse().unwrap(),
            "ce".parse().unwrap(),
        );
        assert!(err.is_err());
    }
}
