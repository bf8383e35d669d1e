//! Experimental conditions and the prompt records built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::keys::Matrix;

pub const SYSTEM_PROMPT: &str = "You are an expert linguist and translator.";

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(concat!("unknown ", stringify!($name), " {:?}"), s)),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// One of the fourteen linguistic phenomena of the test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartitionId {
    P1,
    P2m,
    P2f,
    P3,
    P4,
    P5m,
    P5f,
    P6,
    P7m,
    P7f,
    P8a,
    P8g,
    P9a,
    P9g,
}

string_enum!(PartitionId {
    P1 => "1", P2m => "2m", P2f => "2f", P3 => "3", P4 => "4", P5m => "5m", P5f => "5f",
    P6 => "6", P7m => "7m", P7f => "7f", P8a => "8a", P8g => "8g", P9a => "9a", P9g => "9g",
});

impl PartitionId {
    pub const ALL: [PartitionId; 14] = [
        PartitionId::P1,
        PartitionId::P2m,
        PartitionId::P2f,
        PartitionId::P3,
        PartitionId::P4,
        PartitionId::P5m,
        PartitionId::P5f,
        PartitionId::P6,
        PartitionId::P7m,
        PartitionId::P7f,
        PartitionId::P8a,
        PartitionId::P8g,
        PartitionId::P9a,
        PartitionId::P9g,
    ];

    pub fn is_latin(self) -> bool {
        matches!(self, PartitionId::P8a | PartitionId::P8g | PartitionId::P9a | PartitionId::P9g)
    }

    /// Partitions whose references can be off by adjective placement.
    pub fn is_adjective(self) -> bool {
        matches!(
            self,
            PartitionId::P2m | PartitionId::P2f | PartitionId::P5m | PartitionId::P5f | PartitionId::P7m | PartitionId::P7f
        )
    }

    /// Position in increasing order of complexity, 0 to 13.
    pub fn rank(self) -> usize {
        PartitionId::ALL.iter().position(|&p| p == self).expect("listed")
    }

    pub fn admits(self, matrix: Matrix) -> bool {
        self.is_latin() == (matrix == Matrix::Latin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    EngToArt,
    ArtToEng,
}

string_enum!(Direction { EngToArt => "eng-art", ArtToEng => "art-eng" });

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::EngToArt, Direction::ArtToEng];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    W,
    WIb,
    WG,
}

string_enum!(Modality { W => "W", WIb => "W+IB", WG => "W+G" });

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::W, Modality::WIb, Modality::WG];

    /// Filename-safe label.
    pub fn slug(self) -> &'static str {
        match self {
            Modality::W => "w",
            Modality::WIb => "w_ib",
            Modality::WG => "w_g",
        }
    }
}

/// Which model checkpoint a test-set copy is destined for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Track {
    Baseline,
    FineTuned,
}

string_enum!(Track { Baseline => "baseline", FineTuned => "fine_tuned" });

impl Track {
    pub const ALL: [Track; 2] = [Track::Baseline, Track::FineTuned];
}

/// Everything that distinguishes one cell of the experimental grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Variant {
    pub track: Track,
    pub direction: Direction,
    pub modality: Modality,
    pub cot: bool,
}

impl Variant {
    /// The 24 variants, in dataset-file order.
    pub fn all() -> Vec<Variant> {
        let mut out = Vec::with_capacity(24);
        for track in Track::ALL {
            for direction in Direction::ALL {
                for modality in Modality::ALL {
                    for cot in [false, true] {
                        out.push(Variant {
                            track,
                            direction,
                            modality,
                            cot,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn slug(&self) -> String {
        format!(
            "{}__{}__{}__{}",
            self.track,
            self.direction,
            self.modality.slug(),
            if self.cot { "cot" } else { "nocot" }
        )
    }
}

/// One fully rendered prompt with its references and key linkage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub instance_id: String,
    pub base_instance_id: String,
    pub partition: PartitionId,
    pub direction: Direction,
    pub modality: Modality,
    pub cot: bool,
    pub matrix: Matrix,
    pub track: Track,
    pub system_prompt: String,
    pub prompt: String,
    pub reference: String,
    pub ad_order_error_reference: Option<String>,
    pub key_ref: String,
}

impl PromptInstance {
    pub fn variant(&self) -> Variant {
        Variant {
            track: self.track,
            direction: self.direction,
            modality: self.modality,
            cot: self.cot,
        }
    }
}

/// A training prompt paired with its demonstration completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance {
    #[serde(flatten)]
    pub instance: PromptInstance,
    pub completion: String,
}

pub const MIN_MAX_TOKENS: u32 = 100;
pub const MAX_MAX_TOKENS: u32 = 1300;

/// Completion budget for one configuration.
///
/// Spontaneous answers get the floor; reasoning budgets grow with partition
/// complexity, with extra room when a grammar excerpt is in the prompt.
pub fn max_tokens_for(modality: Modality, cot: bool, partition: PartitionId) -> u32 {
    if !cot {
        return MIN_MAX_TOKENS;
    }
    let grammar_bonus = if modality == Modality::WG { 80 } else { 0 };
    (700 + 40 * partition.rank() as u32 + grammar_bonus).clamp(MIN_MAX_TOKENS, MAX_MAX_TOKENS)
}
