use super::key::{CipherKey, CodePoint, Scheme};
use super::transpose::reverse_sentence;
use super::CipherError;

/// Enciphers a cleartext segment.
///
/// Characters of the cleartext alphabet are replaced by their code point;
/// anything else passes through. The output is always lowercase. Under
/// [`Scheme::SubstitutionWithReversal`] the cleartext is sentence-reversed
/// before substitution, so digrams are never split by the transposition.
pub fn encipher_segment(key: &CipherKey, cleartext: &str) -> String {
    let source = match key.scheme() {
        Scheme::SubstitutionOnly => cleartext.to_lowercase(),
        Scheme::SubstitutionWithReversal => reverse_sentence(cleartext),
    };
    let mut out = String::with_capacity(source.len() * 2);
    for c in source.chars() {
        if !key.push_image(c, &mut out) {
            out.push(c);
        }
    }
    out
}

/// Inverts [`encipher_segment`].
///
/// Scanning left to right, a digram consonant consumes the next character
/// as its vowel; other inventory characters decode as monograms and
/// characters outside the cipher inventory pass through. Input case is
/// ignored.
pub fn decipher_segment(key: &CipherKey, ciphertext: &str) -> Result<String, CipherError> {
    let lower = ciphertext.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    let mut chars = lower.char_indices();
    while let Some((pos, c)) = chars.next() {
        if key.is_digram_consonant(c) {
            let Some((_, v)) = chars.next() else {
                return Err(CipherError::MalformedCiphertext {
                    position: pos,
                    reason: format!("digram consonant {c:?} ends the text"),
                });
            };
            if !key.is_digram_vowel(v) {
                return Err(CipherError::MalformedCiphertext {
                    position: pos,
                    reason: format!("digram consonant {c:?} followed by {v:?}"),
                });
            }
            match key.preimage(CodePoint::Digram(c, v)) {
                Some(clear) => out.push(clear),
                None => {
                    return Err(CipherError::MalformedCiphertext {
                        position: pos,
                        reason: format!("digram {c}{v} has no preimage"),
                    })
                }
            }
        } else if key.in_inventory(c) {
            match key.preimage(CodePoint::Monogram(c)) {
                Some(clear) => out.push(clear),
                None => {
                    return Err(CipherError::MalformedCiphertext {
                        position: pos,
                        reason: format!("{c:?} has no preimage"),
                    })
                }
            }
        } else {
            out.push(c);
        }
    }
    Ok(match key.scheme() {
        Scheme::SubstitutionOnly => out,
        Scheme::SubstitutionWithReversal => reverse_sentence(&out),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{Alphabet, DigramProbability};

    fn a(s: &str) -> Alphabet {
        s.parse().unwrap()
    }

    fn swap_key() -> CipherKey {
        CipherKey::from_parts(
            a("ab"),
            a("bd"),
            a("a"),
            a(""),
            a(""),
            vec![('a', CodePoint::Monogram('b')), ('b', CodePoint::Monogram('a'))],
            DigramProbability::Half,
            Scheme::SubstitutionOnly,
            0,
        )
        .unwrap()
    }

    fn digram_key(scheme: Scheme) -> CipherKey {
        CipherKey::from_parts(
            a("ab"),
            a("cd"),
            a("e"),
            a("c"),
            a("e"),
            vec![('a', CodePoint::Digram('c', 'e')), ('b', CodePoint::Monogram('d'))],
            DigramProbability::Half,
            scheme,
            0,
        )
        .unwrap()
    }

    #[test]
    fn forced_swap() {
        assert_eq!(encipher_segment(&swap_key(), "ab"), "ba");
    }

    #[test]
    fn forced_digram() {
        let key = digram_key(Scheme::SubstitutionOnly);
        assert_eq!(encipher_segment(&key, "ab"), "ced");
        assert_eq!(decipher_segment(&key, "ced").unwrap(), "ab");
        assert_eq!(decipher_segment(&key, "").unwrap(), "");
    }

    #[test]
    fn pass_through_and_case() {
        let key = digram_key(Scheme::SubstitutionOnly);
        assert_eq!(encipher_segment(&key, "Ab, ba."), "ced, dce.");
        assert_eq!(decipher_segment(&key, "CED, dce.").unwrap(), "ab, ba.");
    }

    #[test]
    fn reversal_scheme_reverses_before_substitution() {
        let key = digram_key(Scheme::SubstitutionWithReversal);
        // "aab b" reverses to "b baa" before substitution.
        assert_eq!(encipher_segment(&key, "aab b"), "d dcece");
        assert_eq!(decipher_segment(&key, "d dcece").unwrap(), "aab b");
    }

    #[test]
    fn malformed_streams() {
        let key = digram_key(Scheme::SubstitutionOnly);
        assert!(matches!(
            decipher_segment(&key, "dc"),
            Err(CipherError::MalformedCiphertext { position: 1, .. })
        ));
        assert!(decipher_segment(&key, "cd").is_err());
        // 'e' is a digram vowel and never a monogram image.
        assert!(decipher_segment(&key, "e").is_err());
    }
}
