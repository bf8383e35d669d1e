// A deliberately naive scorer and a synthetic judgment suite, shared by the
// evaluation tests and the acceptance target. Written without reference to
// the library's helpers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LATIN: [&str; 4] = ["8a", "8g", "9a", "9g"];
pub const ADJECTIVE: [&str; 6] = ["2m", "2f", "5m", "5f", "7m", "7f"];
pub const PARTITIONS: [&str; 14] = ["1", "2m", "2f", "3", "4", "5m", "5f", "6", "7m", "7f", "8a", "8g", "9a", "9g"];

#[derive(Debug, Clone)]
pub struct Case {
    pub partition: &'static str,
    pub direction: &'static str,
    pub reference: String,
    pub ad_order: Option<String>,
    pub completion: String,
    /// Which construction produced the completion.
    pub kind: &'static str,
}

fn inside_last_pair(text: &str) -> Option<&str> {
    let mut closes: Vec<usize> = text.match_indices("</translation>").map(|(i, _)| i).collect();
    let close = closes.pop()?;
    let mut open = None;
    let mut from = 0;
    while let Some(i) = text[from..close].find("<translation>") {
        open = Some(from + i);
        from += i + 1;
    }
    Some(&text[open? + "<translation>".len()..close])
}

fn words(text: &str) -> Vec<String> {
    let lowered: String = text.chars().filter(|c| *c != '.').collect::<String>().to_lowercase();
    lowered.split_whitespace().map(String::from).collect()
}

pub fn naive_score(partition: &str, direction: &str, reference: &str, ad_order: Option<&str>, completion: &str) -> u8 {
    let Some(answer) = inside_last_pair(completion) else {
        return 0;
    };
    let got = words(answer);
    let want = words(reference);
    if LATIN.contains(&partition) {
        let (mut g, mut w) = (got, want);
        g.sort();
        w.sort();
        return if g == w { 100 } else { 0 };
    }
    if got == want {
        return 100;
    }
    if direction == "eng-art" && ADJECTIVE.contains(&partition) {
        if let Some(ad) = ad_order {
            if got == words(ad) {
                return 50;
            }
        }
    }
    0
}

const LEXICON: [&str; 24] = [
    "les", "la", "le", "chat", "chats", "nouveaux", "jeux", "vieille", "maison", "rouge", "the", "old", "house", "red",
    "cats", "games", "new", "equus", "piratam", "timet", "rex", "bonus", "puella", "videt",
];

fn noisy(rng: &mut impl Rng, words: &[String]) -> String {
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push_str(if rng.random_bool(0.2) { "  " } else { " " });
        }
        if rng.random_bool(0.3) {
            out.push_str(&w.to_uppercase());
        } else {
            out.push_str(w);
        }
    }
    if rng.random_bool(0.4) {
        out.push('.');
    }
    out
}

fn wrap(answer: &str) -> String {
    format!("<translation>{answer}</translation>")
}

/// `n` cases cycling through every partition, both directions and ten
/// completion shapes.
pub fn synthetic_suite(seed: u64, n: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let partition = PARTITIONS[i % PARTITIONS.len()];
            let direction = if (i / PARTITIONS.len()).is_multiple_of(2) { "eng-art" } else { "art-eng" };
            let len = rng.random_range(2..=4);
            let mut reference: Vec<String> = (0..len).map(|_| LEXICON[rng.random_range(0..LEXICON.len())].to_string()).collect();
            reference.dedup();
            if reference.len() < 2 {
                reference.push("rouge".into());
            }
            let ad_order = ADJECTIVE.contains(&partition).then(|| {
                let mut swapped = reference.clone();
                let last = swapped.len() - 1;
                swapped.swap(last - 1, last);
                swapped
            });
            let (kind, completion) = match i % 10 {
                0 => ("exact", format!("Reasoning first. {}", wrap(&noisy(&mut rng, &reference)))),
                1 => match &ad_order {
                    Some(ad) => ("ad_order", wrap(&noisy(&mut rng, ad))),
                    None => ("exact", wrap(&reference.join(" "))),
                },
                2 => {
                    let mut shuffled = reference.clone();
                    shuffled.shuffle(&mut rng);
                    ("permuted", wrap(&shuffled.join(" ")))
                }
                3 => {
                    let mut wrong = reference.clone();
                    wrong[0] = "zzz".into();
                    ("wrong_word", wrap(&wrong.join(" ")))
                }
                4 => ("no_tags", reference.join(" ")),
                5 => ("last_pair_right", format!("{} then {}", wrap("nope"), wrap(&reference.join(" ")))),
                6 => ("last_pair_wrong", format!("{} then {}", wrap(&reference.join(" ")), wrap("nope"))),
                7 => ("dangling_open", format!("{} <translation>", wrap(&reference.join(" ")))),
                8 => ("empty", wrap("")),
                _ => {
                    let mut doubled = reference.clone();
                    doubled.push(reference[0].clone());
                    ("extra_token", wrap(&doubled.join(" ")))
                }
            };
            Case {
                partition,
                direction,
                reference: reference.join(" "),
                ad_order: ad_order.map(|a| a.join(" ")),
                completion,
                kind,
            }
        })
        .collect()
}
