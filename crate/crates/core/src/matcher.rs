//! Token normalization and fuzzy resolution of out-of-vocabulary words.
//!
//! A token that is in the vocabulary resolves to itself. Otherwise the
//! closest word by normalized Levenshtein similarity is used, provided it
//! clears a threshold; failing that, a filler word stands in.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FILLER: &str = "a";
pub const DEFAULT_THRESHOLD: f64 = 0.6;
pub const DEFAULT_LENGTH_WINDOW: usize = 3;

const STRIP: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\'', '(', ')', '[', ']', '—', '–'];

/// Lowercase and strip surrounding punctuation. An empty result means the
/// token should be dropped.
pub fn normalize_token(raw: &str) -> String {
    raw.trim()
        .trim_matches(|c: char| STRIP.contains(&c) || c.is_whitespace())
        .to_lowercase()
}

/// Split on whitespace and normalize, dropping tokens that normalize to
/// nothing. Returns `(raw, normalized)` pairs.
pub fn tokenize(sentence: &str) -> Vec<(String, String)> {
    sentence
        .split_whitespace()
        .filter_map(|raw| {
            let norm = normalize_token(raw);
            (!norm.is_empty()).then(|| (raw.to_string(), norm))
        })
        .collect()
}

/// Like [`tokenize`], but digit-only tokens are spelled out as English words
/// (`"42"` becomes `"forty"`, `"two"`), all sharing the raw token.
pub fn tokenize_expanding_numbers(sentence: &str) -> Vec<(String, String)> {
    tokenize(sentence)
        .into_iter()
        .flat_map(|(raw, norm)| match spell_number(&norm) {
            Some(words) => words.into_iter().map(|w| (raw.clone(), w)).collect(),
            None => vec![(raw, norm)],
        })
        .collect()
}

fn spell_number(token: &str) -> Option<Vec<String>> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) || token.len() > 18 {
        return None;
    }
    let n: u64 = token.parse().ok()?;
    let mut words = Vec::new();
    number_words(n, &mut words);
    Some(words.into_iter().map(str::to_string).collect())
}

fn number_words(n: u64, out: &mut Vec<&'static str>) {
    const ONES: [&str; 20] = [
        "zero",
        "one",
        "two",
        "three",
        "four",
        "five",
        "six",
        "seven",
        "eight",
        "nine",
        "ten",
        "eleven",
        "twelve",
        "thirteen",
        "fourteen",
        "fifteen",
        "sixteen",
        "seventeen",
        "eighteen",
        "nineteen",
    ];
    const TENS: [&str; 10] = [
        "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
    ];
    const SCALES: [(u64, &str); 5] = [
        (1_000_000_000_000_000, "quadrillion"),
        (1_000_000_000_000, "trillion"),
        (1_000_000_000, "billion"),
        (1_000_000, "million"),
        (1_000, "thousand"),
    ];
    if n < 20 {
        out.push(ONES[n as usize]);
        return;
    }
    if n < 100 {
        out.push(TENS[(n / 10) as usize]);
        if !n.is_multiple_of(10) {
            out.push(ONES[(n % 10) as usize]);
        }
        return;
    }
    if n < 1000 {
        out.push(ONES[(n / 100) as usize]);
        out.push("hundred");
        if !n.is_multiple_of(100) {
            number_words(n % 100, out);
        }
        return;
    }
    for (scale, name) in SCALES {
        if n >= scale {
            number_words(n / scale, out);
            out.push(name);
            if !n.is_multiple_of(scale) {
                number_words(n % scale, out);
            }
            return;
        }
    }
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if ca == cb {
                diag
            } else {
                1 + diag.min(above).min(row[j])
            };
            diag = above;
        }
    }
    row[b.len()]
}

/// `1 - lev(a, b) / max(|a|, |b|)`; two empty strings are identical.
pub fn similarity(a: &str, b: &str) -> f64 {
    let la = a.chars().count();
    let lb = b.chars().count();
    let longest = la.max(lb);
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchKind {
    Exact,
    Fuzzy,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub kind: MatchKind,
    pub matched_word: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatcherConfig {
    pub threshold: f64,
    pub length_window: usize,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            length_window: DEFAULT_LENGTH_WINDOW,
        }
    }
}

/// A word set indexed for exact lookup and for length-windowed fuzzy search.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    words: HashSet<String>,
    by_len: BTreeMap<usize, Vec<Vec<char>>>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: HashSet<String> = words.into_iter().map(Into::into).collect();
        let mut by_len: BTreeMap<usize, Vec<Vec<char>>> = BTreeMap::new();
        for w in &words {
            let chars: Vec<char> = w.chars().collect();
            by_len.entry(chars.len()).or_default().push(chars);
        }
        for bucket in by_len.values_mut() {
            bucket.sort();
        }
        Self { words, by_len }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Resolve with the default threshold and window.
    pub fn resolve(&self, token: &str, filler: &str) -> Result<Resolution> {
        self.resolve_with(token, filler, &MatcherConfig::default())
    }

    pub fn resolve_with(&self, token: &str, filler: &str, cfg: &MatcherConfig) -> Result<Resolution> {
        if !self.contains(filler) {
            return Err(Error::FillerNotInVocab(filler.to_string()));
        }
        if self.contains(token) {
            return Ok(Resolution {
                kind: MatchKind::Exact,
                matched_word: token.to_string(),
                similarity: 1.0,
            });
        }
        let query: Vec<char> = token.chars().collect();
        let lo = query.len().saturating_sub(cfg.length_window);
        let hi = query.len() + cfg.length_window;

        // (similarity, distance, word); higher similarity, then smaller
        // distance, then lexicographically smaller word wins.
        let mut best: Option<(f64, usize, &[char])> = None;
        for (&len, bucket) in self.by_len.range(lo..=hi) {
            let longest = len.max(query.len()).max(1);
            for cand in bucket {
                let dist = levenshtein_chars(&query, cand);
                let sim = 1.0 - dist as f64 / longest as f64;
                let better = match best {
                    None => true,
                    Some((bs, bd, bw)) => {
                        sim > bs || (sim == bs && (dist < bd || (dist == bd && cand.as_slice() < bw)))
                    }
                };
                if better {
                    best = Some((sim, dist, cand));
                }
            }
        }
        Ok(match best {
            Some((sim, _, word)) if sim >= cfg.threshold => Resolution {
                kind: MatchKind::Fuzzy,
                matched_word: word.iter().collect(),
                similarity: sim,
            },
            _ => Resolution {
                kind: MatchKind::Fallback,
                matched_word: filler.to_string(),
                similarity: 0.0,
            },
        })
    }
}

/// Resolve `token` against an arbitrary word set.
pub fn resolve<'a, I>(token: &str, vocab: I, filler: &str) -> Result<Resolution>
where
    I: IntoIterator<Item = &'a str>,
{
    Vocabulary::new(vocab).resolve(token, filler)
}
