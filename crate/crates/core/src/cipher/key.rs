use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::alphabet::{Alphabet, Inventory};
use super::CipherError;

/// Upper bound on subset resampling before giving up on a parameter set.
const MAX_SUBSET_ATTEMPTS: usize = 100_000;

/// Cipher-side image of one cleartext character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodePoint {
    Monogram(char),
    /// Consonant from the digram consonant subset followed by a vowel from
    /// the digram vowel subset.
    Digram(char, char),
}

impl CodePoint {
    pub fn is_digram(&self) -> bool {
        matches!(self, CodePoint::Digram(..))
    }

    fn push_to(&self, out: &mut String) {
        match *self {
            CodePoint::Monogram(c) => out.push(c),
            CodePoint::Digram(c, v) => {
                out.push(c);
                out.push(v);
            }
        }
    }
}

impl fmt::Display for CodePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodePoint::Monogram(c) => write!(f, "{c}"),
            CodePoint::Digram(c, v) => write!(f, "{c}{v}"),
        }
    }
}

impl std::str::FromStr for CodePoint {
    type Err = CipherError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.chars();
        match (it.next(), it.next(), it.next()) {
            (Some(c), None, _) => Ok(CodePoint::Monogram(c)),
            (Some(c), Some(v), None) => Ok(CodePoint::Digram(c, v)),
            _ => Err(CipherError::InvalidKey(format!(
                "code point {s:?} must be one or two characters"
            ))),
        }
    }
}

/// Probability that a cleartext character is assigned a digram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DigramProbability {
    TwoFifths,
    Half,
    TwoThirds,
    ThreeQuarters,
}

impl DigramProbability {
    pub const ALL: [DigramProbability; 4] = [
        DigramProbability::TwoFifths,
        DigramProbability::Half,
        DigramProbability::TwoThirds,
        DigramProbability::ThreeQuarters,
    ];

    pub fn ratio(self) -> (u32, u32) {
        match self {
            DigramProbability::TwoFifths => (2, 5),
            DigramProbability::Half => (1, 2),
            DigramProbability::TwoThirds => (2, 3),
            DigramProbability::ThreeQuarters => (3, 4),
        }
    }

    pub fn value(self) -> f64 {
        let (n, d) = self.ratio();
        n as f64 / d as f64
    }
}

impl fmt::Display for DigramProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = self.ratio();
        write!(f, "{n}/{d}")
    }
}

impl std::str::FromStr for DigramProbability {
    type Err = CipherError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DigramProbability::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| CipherError::InvalidKey(format!("unsupported digram probability {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SubstitutionOnly,
    /// Sentence reversal of the cleartext followed by substitution.
    SubstitutionWithReversal,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::SubstitutionOnly => "substitution_only",
            Scheme::SubstitutionWithReversal => "substitution_with_reversal",
        })
    }
}

/// Complete state of one conlang's encipherment.
///
/// Construction always goes through validation, so every live key satisfies
/// injectivity and the unique-decodability invariants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "KeyRepr", into = "KeyRepr")]
pub struct CipherKey {
    clear_alphabet: Alphabet,
    consonants: Alphabet,
    vowels: Alphabet,
    digram_consonants: Alphabet,
    digram_vowels: Alphabet,
    mapping: Vec<(char, CodePoint)>,
    p: DigramProbability,
    scheme: Scheme,
    seed: u64,
    lookup: Lookup,
}

#[derive(Debug, Clone, Default)]
struct Lookup {
    forward: HashMap<char, CodePoint>,
    inverse: HashMap<CodePoint, char>,
    digram_consonants: HashSet<char>,
    digram_vowels: HashSet<char>,
    inventory: HashSet<char>,
}

impl PartialEq for CipherKey {
    fn eq(&self, other: &Self) -> bool {
        self.clear_alphabet == other.clear_alphabet
            && self.consonants == other.consonants
            && self.vowels == other.vowels
            && self.digram_consonants == other.digram_consonants
            && self.digram_vowels == other.digram_vowels
            && self.mapping == other.mapping
            && self.p == other.p
            && self.scheme == other.scheme
            && self.seed == other.seed
    }
}

impl Eq for CipherKey {}

impl CipherKey {
    /// Builds a key from explicit parts, checking every key invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        clear_alphabet: Alphabet,
        consonants: Alphabet,
        vowels: Alphabet,
        digram_consonants: Alphabet,
        digram_vowels: Alphabet,
        mapping: Vec<(char, CodePoint)>,
        p: DigramProbability,
        scheme: Scheme,
        seed: u64,
    ) -> Result<Self, CipherError> {
        let invalid = |msg: String| Err(CipherError::InvalidKey(msg));

        if !consonants.is_disjoint(&vowels) {
            return invalid("consonants and vowels overlap".into());
        }
        if let Some(c) = digram_consonants.chars().iter().find(|c| !consonants.contains(**c)) {
            return invalid(format!("digram consonant {c:?} is not a consonant"));
        }
        if let Some(v) = digram_vowels.chars().iter().find(|v| !vowels.contains(**v)) {
            return invalid(format!("digram vowel {v:?} is not a vowel"));
        }
        if mapping.len() != clear_alphabet.len()
            || mapping.iter().zip(clear_alphabet.chars()).any(|((c, _), a)| c != a)
        {
            return invalid("mapping must list every cleartext character once, in alphabet order".into());
        }

        let mut lookup = Lookup {
            digram_consonants: digram_consonants.chars().iter().copied().collect(),
            digram_vowels: digram_vowels.chars().iter().copied().collect(),
            inventory: consonants.chars().iter().chain(vowels.chars()).copied().collect(),
            ..Lookup::default()
        };

        for &(clear, image) in &mapping {
            match image {
                CodePoint::Digram(c, v) => {
                    if !lookup.digram_consonants.contains(&c) || !lookup.digram_vowels.contains(&v) {
                        return invalid(format!("digram image {image} of {clear:?} lies outside the digram subsets"));
                    }
                }
                CodePoint::Monogram(m) => {
                    let free_consonant = consonants.contains(m) && !lookup.digram_consonants.contains(&m);
                    let free_vowel = vowels.contains(m) && !lookup.digram_vowels.contains(&m);
                    if !(free_consonant || free_vowel) {
                        return invalid(format!("monogram image {image} of {clear:?} lies outside the monogram pool"));
                    }
                }
            }
            if lookup.inverse.insert(image, clear).is_some() {
                return invalid(format!("code point {image} assigned twice"));
            }
            lookup.forward.insert(clear, image);
        }

        // A monogram drawn from the digram consonants would make the stream
        // ambiguous; the pool check above excludes it, this re-states it.
        if mapping
            .iter()
            .any(|(_, cp)| matches!(cp, CodePoint::Monogram(m) if lookup.digram_consonants.contains(m)))
        {
            return invalid("monogram image collides with a digram consonant".into());
        }

        Ok(Self {
            clear_alphabet,
            consonants,
            vowels,
            digram_consonants,
            digram_vowels,
            mapping,
            p,
            scheme,
            seed,
            lookup,
        })
    }

    pub fn clear_alphabet(&self) -> &Alphabet {
        &self.clear_alphabet
    }

    pub fn consonants(&self) -> &Alphabet {
        &self.consonants
    }

    pub fn vowels(&self) -> &Alphabet {
        &self.vowels
    }

    pub fn digram_consonants(&self) -> &Alphabet {
        &self.digram_consonants
    }

    pub fn digram_vowels(&self) -> &Alphabet {
        &self.digram_vowels
    }

    pub fn mapping(&self) -> &[(char, CodePoint)] {
        &self.mapping
    }

    pub fn digram_probability(&self) -> DigramProbability {
        self.p
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn image(&self, clear: char) -> Option<CodePoint> {
        self.lookup.forward.get(&clear).copied()
    }

    pub fn preimage(&self, image: CodePoint) -> Option<char> {
        self.lookup.inverse.get(&image).copied()
    }

    /// Share of cleartext characters mapped to digrams.
    pub fn digram_share(&self) -> f64 {
        if self.mapping.is_empty() {
            return 0.0;
        }
        let digrams = self.mapping.iter().filter(|(_, cp)| cp.is_digram()).count();
        digrams as f64 / self.mapping.len() as f64
    }

    pub(crate) fn is_digram_consonant(&self, c: char) -> bool {
        self.lookup.digram_consonants.contains(&c)
    }

    pub(crate) fn is_digram_vowel(&self, c: char) -> bool {
        self.lookup.digram_vowels.contains(&c)
    }

    pub(crate) fn in_inventory(&self, c: char) -> bool {
        self.lookup.inventory.contains(&c)
    }

    pub(crate) fn push_image(&self, clear: char, out: &mut String) -> bool {
        match self.lookup.forward.get(&clear) {
            Some(cp) => {
                cp.push_to(out);
                true
            }
            None => false,
        }
    }

    /// Single-line JSON serialization.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("key serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self, CipherError> {
        serde_json::from_str(s).map_err(|e| CipherError::InvalidKey(e.to_string()))
    }
}

/// Largest code-point pool reachable by any choice of digram subsets.
fn max_capacity(consonants: usize, vowels: usize) -> usize {
    (0..=consonants)
        .flat_map(|a| (0..=vowels).map(move |b| a * b + (consonants - a) + (vowels - b)))
        .max()
        .unwrap_or(0)
}

/// Generates a random key for `inventory` deterministically from `seed`.
pub fn generate_key(inventory: &Inventory, scheme: Scheme, seed: u64) -> Result<CipherKey, CipherError> {
    let Inventory {
        clear,
        consonants,
        vowels,
    } = inventory;
    let needed = clear.len();
    let (m, n) = (consonants.len(), vowels.len());
    if max_capacity(m, n) < needed {
        return Err(CipherError::InsufficientCodePoints {
            needed,
            available: max_capacity(m, n),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = DigramProbability::ALL[rng.random_range(0..DigramProbability::ALL.len())];

    let mut subsets = None;
    for _ in 0..MAX_SUBSET_ATTEMPTS {
        let ck: Vec<char> = consonants.chars().iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let vl: Vec<char> = vowels.chars().iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        if ck.len() * vl.len() + (m - ck.len()) + (n - vl.len()) >= needed {
            subsets = Some((ck, vl));
            break;
        }
    }
    let (ck, vl) = subsets.ok_or(CipherError::InsufficientCodePoints {
        needed,
        available: max_capacity(m, n),
    })?;

    let mut digrams: Vec<CodePoint> = ck
        .iter()
        .flat_map(|&c| vl.iter().map(move |&v| CodePoint::Digram(c, v)))
        .collect();
    let mut monograms: Vec<CodePoint> = consonants
        .chars()
        .iter()
        .filter(|c| !ck.contains(c))
        .chain(vowels.chars().iter().filter(|v| !vl.contains(v)))
        .map(|&c| CodePoint::Monogram(c))
        .collect();

    let mut mapping = Vec::with_capacity(needed);
    for &c in clear.chars() {
        let want_digram = rng.random_bool(p.value());
        let pool = if (want_digram && !digrams.is_empty()) || monograms.is_empty() {
            &mut digrams
        } else {
            &mut monograms
        };
        let idx = rng.random_range(0..pool.len());
        mapping.push((c, pool.swap_remove(idx)));
    }

    CipherKey::from_parts(
        clear.clone(),
        consonants.clone(),
        vowels.clone(),
        Alphabet::new(ck)?,
        Alphabet::new(vl)?,
        mapping,
        p,
        scheme,
        seed,
    )
}

#[derive(Serialize, Deserialize)]
struct KeyRepr {
    clear_alphabet: String,
    consonants: String,
    vowels: String,
    digram_consonants: String,
    digram_vowels: String,
    mapping: Vec<(String, String)>,
    p: String,
    scheme: Scheme,
    seed: u64,
}

impl From<CipherKey> for KeyRepr {
    fn from(k: CipherKey) -> Self {
        KeyRepr {
            clear_alphabet: k.clear_alphabet.to_string(),
            consonants: k.consonants.to_string(),
            vowels: k.vowels.to_string(),
            digram_consonants: k.digram_consonants.to_string(),
            digram_vowels: k.digram_vowels.to_string(),
            mapping: k.mapping.iter().map(|(c, cp)| (c.to_string(), cp.to_string())).collect(),
            p: k.p.to_string(),
            scheme: k.scheme,
            seed: k.seed,
        }
    }
}

impl TryFrom<KeyRepr> for CipherKey {
    type Error = CipherError;

    fn try_from(r: KeyRepr) -> Result<Self, Self::Error> {
        let mapping = r
            .mapping
            .iter()
            .map(|(c, cp)| {
                let mut chars = c.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok((c, cp.parse()?)),
                    _ => Err(CipherError::InvalidKey(format!("mapping source {c:?} is not one character"))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        CipherKey::from_parts(
            r.clear_alphabet.parse()?,
            r.consonants.parse()?,
            r.vowels.parse()?,
            r.digram_consonants.parse()?,
            r.digram_vowels.parse()?,
            mapping,
            r.p.parse()?,
            r.scheme,
            r.seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv(clear: &str, c: &str, v: &str) -> Inventory {
        Inventory::new(clear.parse().unwrap(), c.parse().unwrap(), v.parse().unwrap()).unwrap()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let inv = Inventory::default();
        let a = generate_key(&inv, Scheme::SubstitutionOnly, 7).unwrap();
        let b = generate_key(&inv, Scheme::SubstitutionOnly, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_key(&inv, Scheme::SubstitutionOnly, 8).unwrap();
        assert_ne!(a.mapping(), c.mapping());
    }

    #[test]
    fn probability_is_one_of_four_values() {
        let inv = Inventory::default();
        for seed in 0..200 {
            let k = generate_key(&inv, Scheme::SubstitutionOnly, seed).unwrap();
            assert!(DigramProbability::ALL.contains(&k.digram_probability()));
        }
    }

    #[test]
    fn insufficient_code_points() {
        // Four cleartext characters, at most three code points.
        let err = generate_key(&inv("abgh", "cd", "e"), Scheme::SubstitutionOnly, 1).unwrap_err();
        assert!(matches!(err, CipherError::InsufficientCodePoints { needed: 4, available: 3 }));
    }

    #[test]
    fn tiny_inventory_keys_satisfy_invariants() {
        // Capacity 4 is reached only with both or neither subsets fully chosen.
        let inv = inv("abgh", "cd", "ef");
        for seed in 0..10_000u64 {
            let key = generate_key(&inv, Scheme::SubstitutionOnly, seed).unwrap();
            let images: HashSet<_> = key.mapping().iter().map(|(_, cp)| *cp).collect();
            assert_eq!(images.len(), 4);
            for (_, cp) in key.mapping() {
                match *cp {
                    CodePoint::Digram(c, v) => {
                        assert!(key.digram_consonants().contains(c));
                        assert!(key.digram_vowels().contains(v));
                    }
                    CodePoint::Monogram(m) => {
                        assert!(!key.digram_consonants().contains(m));
                        assert!(!key.digram_vowels().contains(m));
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let key = generate_key(&Inventory::default(), Scheme::SubstitutionWithReversal, 99).unwrap();
        let json = key.to_json();
        let back = CipherKey::from_json(&json).unwrap();
        assert_eq!(back, key);
        assert_eq!(back.to_json(), json);
        assert!(json.contains("\"digram_consonants\""));
        assert!(json.contains("\"scheme\":\"substitution_with_reversal\""));
    }

    #[test]
    fn deserialization_rejects_ambiguous_mapping() {
        // 'c' is a digram consonant, so it cannot double as a monogram.
        let json = r#"{"clear_alphabet":"ab","consonants":"cd","vowels":"e","digram_consonants":"c","digram_vowels":"e","mapping":[["a","ce"],["b","c"]],"p":"1/2","scheme":"substitution_only","seed":0}"#;
        assert!(CipherKey::from_json(json).is_err());
        let dup = r#"{"clear_alphabet":"ab","consonants":"cd","vowels":"e","digram_consonants":"","digram_vowels":"","mapping":[["a","d"],["b","d"]],"p":"1/2","scheme":"substitution_only","seed":0}"#;
        assert!(CipherKey::from_json(dup).is_err());
    }

    #[test]
    fn code_point_parsing() {
        assert_eq!("x".parse::<CodePoint>().unwrap(), CodePoint::Monogram('x'));
        assert_eq!("cé".parse::<CodePoint>().unwrap(), CodePoint::Digram('c', 'é'));
        assert!("abc".parse::<CodePoint>().is_err());
        assert!("".parse::<CodePoint>().is_err());
    }
}
