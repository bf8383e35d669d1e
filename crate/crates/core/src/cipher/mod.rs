//! Substitution ciphers with optional sentence reversal.
//!
//! A key maps each cleartext character either to a single cipher letter
//! (monogram) or to a consonant-vowel pair (digram). Digram consonants are
//! never used as monograms, which makes every enciphered stream parse in
//! exactly one way.

mod alphabet;
mod codec;
mod key;
mod keyspace;
mod transpose;

use thiserror::Error;

pub use alphabet::{Alphabet, Inventory, DEFAULT_CLEAR, DEFAULT_CONSONANTS, DEFAULT_VOWELS};
pub use codec::{decipher_segment, encipher_segment};
pub use key::{generate_key, CipherKey, CodePoint, DigramProbability, Scheme};
pub use keyspace::key_space_size;
pub use transpose::{reverse_sentence, reverse_words};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CipherError {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("cannot cover {needed} cleartext characters with at most {available} code points")]
    InsufficientCodePoints { needed: usize, available: usize },
    #[error("malformed ciphertext at byte {position}: {reason}")]
    MalformedCiphertext { position: usize, reason: String },
}
