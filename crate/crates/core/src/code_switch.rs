//! Dictionary-driven code-switching.
//!
//! With probability `p` a sentence is switched: `n` distinct positions are
//! picked uniformly without replacement, and each picked token that has a
//! dictionary entry is replaced by its translation. The mixed token
//! sequence is then stitched from two banks, one per language.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bank::SpokenVocabBank;
use crate::error::{Error, Result};
use crate::matcher::{normalize_token, MatchKind, Resolution};
use crate::seed::{self, Stream};
use crate::stitcher::{render, token_speakers, SpeakerPolicy, StitchConfig, StitchReport, TokenReport};
use crate::PcmBuffer;

/// Source word to target word, both normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsDictionary {
    entries: HashMap<String, String>,
    pub source_lang: String,
    pub target_lang: String,
}

impl CsDictionary {
    /// Duplicate keys keep their first value.
    pub fn new<I, K, V>(pairs: I, source_lang: &str, target_lang: &str) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut entries = HashMap::new();
        for (k, v) in pairs {
            let key = normalize_token(k.as_ref());
            let value = normalize_token(v.as_ref());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Dictionary(format!(
                    "entry {:?} -> {:?} is empty after normalization",
                    k.as_ref(),
                    v.as_ref()
                )));
            }
            entries.entry(key).or_insert(value);
        }
        Ok(Self {
            entries,
            source_lang: source_lang.to_string(),
            target_lang: target_lang.to_string(),
        })
    }

    /// Parse `source<TAB>target` lines. Blank lines are skipped.
    pub fn parse_tsv(text: &str, source_lang: &str, target_lang: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(src), Some(tgt), None)
                    if !normalize_token(src).is_empty() && !normalize_token(tgt).is_empty() =>
                {
                    pairs.push((src, tgt))
                }
                _ => {
                    return Err(Error::MalformedRow {
                        line: i + 1,
                        message: "expected source<TAB>target".into(),
                    })
                }
            }
        }
        Self::new(pairs, source_lang, target_lang)
    }

    pub fn load_tsv(path: impl AsRef<Path>, source_lang: &str, target_lang: &str) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text, source_lang, target_lang)
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.entries.get(word).map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.entries.values().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsConfig {
    /// Probability that a sentence is code-switched.
    pub p: f64,
    /// Number of positions selected for switching.
    pub n: usize,
    /// Draw `q ~ N(0, 1)` and switch when `q > p`, as the pseudocode is
    /// written, instead of `u ~ U[0, 1)` and `u < p`.
    #[serde(default)]
    pub literal_normal_draw: bool,
}

impl Default for CsConfig {
    fn default() -> Self {
        Self {
            p: 0.35,
            n: 2,
            literal_normal_draw: false,
        }
    }
}

impl CsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::OutOfRange {
                name: "p",
                value: self.p,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lang {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub token: String,
    pub lang: Lang,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CsReport {
    pub switched: bool,
    /// Ascending.
    pub selected_indices: Vec<usize>,
    /// Ascending; subset of `selected_indices`.
    pub replaced_indices: Vec<usize>,
}

/// Apply the switching draw to a normalized token sequence.
pub fn code_switch_tokens<S: AsRef<str>>(
    tokens: &[S],
    dict: &CsDictionary,
    cfg: &CsConfig,
    seed: u64,
) -> (Vec<TaggedToken>, CsReport) {
    let mut out: Vec<TaggedToken> = tokens
        .iter()
        .map(|t| TaggedToken {
            token: t.as_ref().to_string(),
            lang: Lang::Source,
        })
        .collect();
    let mut rng = seed::rng(seed, Stream::CodeSwitch);
    let switched = if cfg.literal_normal_draw {
        let q: f64 = rng.sample(StandardNormal);
        q > cfg.p
    } else {
        rng.random::<f64>() < cfg.p
    };
    let mut report = CsReport {
        switched,
        ..CsReport::default()
    };
    if !switched {
        return (out, report);
    }
    let amount = cfg.n.min(out.len());
    let mut selected = index::sample(&mut rng, out.len(), amount).into_vec();
    selected.sort_unstable();
    for &i in &selected {
        if let Some(target) = dict.get(&out[i].token) {
            out[i] = TaggedToken {
                token: target.to_string(),
                lang: Lang::Target,
            };
            report.replaced_indices.push(i);
        }
    }
    report.selected_indices = selected;
    (out, report)
}

/// Two banks and a dictionary, checked for compatibility once up front.
#[derive(Debug, Clone)]
pub struct CsAssets {
    pub source: Arc<SpokenVocabBank>,
    pub target: Arc<SpokenVocabBank>,
    pub dict: Arc<CsDictionary>,
}

impl CsAssets {
    pub fn new(source: Arc<SpokenVocabBank>, target: Arc<SpokenVocabBank>, dict: Arc<CsDictionary>) -> Result<Self> {
        if source.sample_rate_hz() != target.sample_rate_hz() {
            return Err(Error::RateMismatch {
                left: source.sample_rate_hz(),
                right: target.sample_rate_hz(),
            });
        }
        let mut missing: Vec<&str> = dict.values().filter(|v| !target.vocab().contains(v)).collect();
        if !missing.is_empty() {
            missing.sort_unstable();
            missing.dedup();
            return Err(Error::Dictionary(format!(
                "target bank lacks dictionary values [{}]",
                missing.join(", ")
            )));
        }
        Ok(Self { source, target, dict })
    }
}

/// Code-switch a sentence and stitch it from both banks.
///
/// With `p = 0` this produces exactly the audio of
/// [`stitch_sentence`](crate::stitcher::stitch_sentence) for the same seed.
pub fn cs_stitch(
    sentence: &str,
    assets: &CsAssets,
    cs_cfg: &CsConfig,
    cfg: &StitchConfig,
    policy: &SpeakerPolicy,
    seed: u64,
) -> Result<(PcmBuffer, StitchReport, CsReport)> {
    cfg.validate()?;
    cs_cfg.validate()?;
    let tokens = if cfg.expand_numbers {
        crate::matcher::tokenize_expanding_numbers(sentence)
    } else {
        crate::matcher::tokenize(sentence)
    };
    if tokens.is_empty() {
        return Err(Error::NoStitchableTokens);
    }
    let source = assets.source.as_ref();
    let target = assets.target.as_ref();

    let speaker = policy.choose(source, seed, Stream::Speaker)?;
    let target_speaker = policy.choose(target, seed, Stream::TargetSpeaker)?;
    let source_speakers = token_speakers(source, policy, &speaker, cfg, tokens.len(), seed);

    let norms: Vec<&str> = tokens.iter().map(|(_, n)| n.as_str()).collect();
    let (tagged, cs_report) = code_switch_tokens(&norms, &assets.dict, cs_cfg, seed);

    let mut reports = Vec::with_capacity(tokens.len());
    let mut pieces = Vec::with_capacity(tokens.len());
    for (((raw, _), tok), spk) in tokens.into_iter().zip(tagged).zip(source_speakers) {
        let (bank, spk, resolution, lang) = match tok.lang {
            Lang::Source => {
                let r = source.vocab().resolve_with(&tok.token, &cfg.filler, &cfg.matcher)?;
                (source, spk, r, &assets.dict.source_lang)
            }
            Lang::Target => {
                let r = Resolution {
                    kind: MatchKind::Exact,
                    matched_word: tok.token.clone(),
                    similarity: 1.0,
                };
                (target, target_speaker.clone(), r, &assets.dict.target_lang)
            }
        };
        let snippet = bank
            .get_snippet(&spk, &resolution.matched_word)?
            .ok_or_else(|| Error::Dictionary(format!("{:?} missing from bank", resolution.matched_word)))?;
        pieces.push(snippet);
        reports.push(TokenReport {
            raw,
            token: tok.token,
            speaker_id: spk,
            language: Some(lang.clone()),
            resolution,
        });
    }

    let (audio, distortion) = render(&pieces, source.sample_rate_hz(), cfg, seed)?;
    let mut report = StitchReport::new(speaker, reports);
    report.target_speaker_id = Some(target_speaker);
    report.num_samples = audio.len();
    report.sample_rate_hz = audio.sample_rate_hz();
    report.distortion = distortion;
    Ok((audio, report, cs_report))
}
