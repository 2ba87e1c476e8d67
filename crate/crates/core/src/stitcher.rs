//! Sentence to utterance: tokenize, resolve each token against the bank,
//! fetch one speaker's snippets and cross-fade them together.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{
    apply_echo, apply_speed, apply_tempo, crossfade_append, fade_len, resample, PcmBuffer, EFFECT_FACTOR_RANGE,
};
use crate::bank::SpokenVocabBank;
use crate::error::{Error, Result};
use crate::matcher::{tokenize, tokenize_expanding_numbers, MatchKind, MatcherConfig, Resolution, DEFAULT_FILLER};
use crate::seed::{self, Stream};

pub const DEFAULT_FADE_MS: f64 = 10.0;

/// Inclusive ranges the distortion parameters are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortRanges {
    pub tempo: (f64, f64),
    pub speed: (f64, f64),
    pub echo_delay_ms: (f64, f64),
    pub echo_decay: (f64, f64),
}

impl Default for DistortRanges {
    fn default() -> Self {
        Self {
            tempo: (0.9, 1.1),
            speed: (0.95, 1.05),
            echo_delay_ms: (50.0, 150.0),
            echo_decay: (0.2, 0.4),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StitchConfig {
    pub fade_ms: f64,
    /// `None` keeps the bank rate.
    pub output_rate_hz: Option<u32>,
    pub distort: bool,
    pub distort_ranges: DistortRanges,
    pub filler: String,
    pub matcher: MatcherConfig,
    /// Spell out digit-only tokens before resolving them.
    pub expand_numbers: bool,
    /// Draw a speaker per token instead of per utterance (random policy only).
    pub mix_speakers_per_token: bool,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self {
            fade_ms: DEFAULT_FADE_MS,
            output_rate_hz: None,
            distort: false,
            distort_ranges: DistortRanges::default(),
            filler: DEFAULT_FILLER.to_string(),
            matcher: MatcherConfig::default(),
            expand_numbers: false,
            mix_speakers_per_token: false,
        }
    }
}

impl StitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fade_ms.is_finite() && self.fade_ms >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fade_ms must be >= 0, got {}",
                self.fade_ms
            )));
        }
        if self.output_rate_hz == Some(0) {
            return Err(Error::InvalidArgument("output rate must be positive".into()));
        }
        let r = &self.distort_ranges;
        let (fmin, fmax) = EFFECT_FACTOR_RANGE;
        let checks = [
            ("tempo", r.tempo, fmin, fmax),
            ("speed", r.speed, fmin, fmax),
            ("echo delay", r.echo_delay_ms, f64::MIN_POSITIVE, f64::MAX),
            ("echo decay", r.echo_decay, 0.0, 1.0 - f64::EPSILON),
        ];
        for (name, (lo, hi), min, max) in checks {
            if !(min <= lo && lo <= hi && hi <= max) {
                return Err(Error::InvalidArgument(format!(
                    "{name} range [{lo}, {hi}] is empty or outside [{min}, {max}]"
                )));
            }
        }
        Ok(())
    }

    fn tokens(&self, sentence: &str) -> Vec<(String, String)> {
        if self.expand_numbers {
            tokenize_expanding_numbers(sentence)
        } else {
            tokenize(sentence)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpeakerPolicy {
    Fixed(String),
    UniformRandom,
}

impl SpeakerPolicy {
    pub(crate) fn choose(&self, bank: &SpokenVocabBank, seed: u64, stream: Stream) -> Result<String> {
        match self {
            SpeakerPolicy::Fixed(id) => {
                if bank.has_speaker(id) {
                    Ok(id.clone())
                } else {
                    Err(Error::UnknownSpeaker(id.clone()))
                }
            }
            SpeakerPolicy::UniformRandom => {
                let speakers = bank.speakers();
                let i = seed::rng(seed, stream).random_range(0..speakers.len());
                Ok(speakers[i].clone())
            }
        }
    }
}

/// Effect parameters actually drawn for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedDistortion {
    pub tempo: f64,
    pub speed: f64,
    pub echo_delay_ms: f64,
    pub echo_decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenReport {
    pub raw: String,
    pub token: String,
    pub speaker_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub language: Option<String>,
    pub resolution: Resolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchReport {
    pub speaker_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target_speaker_id: Option<String>,
    pub tokens: Vec<TokenReport>,
    pub exact: usize,
    pub fuzzy: usize,
    pub fallback: usize,
    pub num_samples: usize,
    pub sample_rate_hz: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distortion: Option<AppliedDistortion>,
}

impl StitchReport {
    pub(crate) fn new(speaker_id: String, tokens: Vec<TokenReport>) -> Self {
        let count = |k: MatchKind| tokens.iter().filter(|t| t.resolution.kind == k).count();
        Self {
            speaker_id,
            target_speaker_id: None,
            exact: count(MatchKind::Exact),
            fuzzy: count(MatchKind::Fuzzy),
            fallback: count(MatchKind::Fallback),
            tokens,
            num_samples: 0,
            sample_rate_hz: 0,
            distortion: None,
        }
    }
}

/// Per-utterance seed for the `index`-th item of a batch.
pub fn utterance_seed(seed: u64, index: u64) -> u64 {
    seed::mix(seed, index)
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Fold the snippets with cross-fades, then distort and resample.
pub(crate) fn render(
    pieces: &[&PcmBuffer],
    bank_rate: u32,
    cfg: &StitchConfig,
    seed: u64,
) -> Result<(PcmBuffer, Option<AppliedDistortion>)> {
    let total: usize = pieces.iter().map(|p| p.len()).sum();
    let mut acc: Vec<f32> = Vec::with_capacity(total);
    for p in pieces {
        let fade_n = fade_len(cfg.fade_ms, bank_rate, acc.len(), p.len());
        crossfade_append(&mut acc, p.samples(), fade_n);
    }
    let mut audio = PcmBuffer::new(acc, bank_rate)?;

    let mut applied = None;
    if cfg.distort {
        let r = &cfg.distort_ranges;
        let tempo = draw(&mut seed::rng(seed, Stream::Tempo), r.tempo);
        let speed = draw(&mut seed::rng(seed, Stream::Speed), r.speed);
        let mut echo_rng = seed::rng(seed, Stream::Echo);
        let echo_delay_ms = draw(&mut echo_rng, r.echo_delay_ms);
        let echo_decay = draw(&mut echo_rng, r.echo_decay);
        audio = apply_tempo(&audio, tempo)?;
        audio = apply_speed(&audio, speed)?;
        audio = apply_echo(&audio, echo_delay_ms, echo_decay)?;
        applied = Some(AppliedDistortion {
            tempo,
            speed,
            echo_delay_ms,
            echo_decay,
        });
    }
    if let Some(rate) = cfg.output_rate_hz {
        if rate != audio.sample_rate_hz() {
            audio = resample(&audio, rate)?;
        }
    }
    Ok((audio, applied))
}

pub(crate) fn token_speakers(
    bank: &SpokenVocabBank,
    policy: &SpeakerPolicy,
    utterance_speaker: &str,
    cfg: &StitchConfig,
    count: usize,
    seed: u64,
) -> Vec<String> {
    if cfg.mix_speakers_per_token && *policy == SpeakerPolicy::UniformRandom {
        let mut rng = seed::rng(seed, Stream::TokenSpeakers);
        let speakers = bank.speakers();
        (0..count)
            .map(|_| speakers[rng.random_range(0..speakers.len())].clone())
            .collect()
    } else {
        vec![utterance_speaker.to_string(); count]
    }
}

/// Stitch one sentence into an utterance. Identical inputs and seed give
/// bit-identical audio and report.
pub fn stitch_sentence(
    sentence: &str,
    bank: &SpokenVocabBank,
    policy: &SpeakerPolicy,
    cfg: &StitchConfig,
    seed: u64,
) -> Result<(PcmBuffer, StitchReport)> {
    cfg.validate()?;
    let tokens = cfg.tokens(sentence);
    if tokens.is_empty() {
        return Err(Error::NoStitchableTokens);
    }
    let speaker = policy.choose(bank, seed, Stream::Speaker)?;
    let speakers = token_speakers(bank, policy, &speaker, cfg, tokens.len(), seed);

    let mut reports = Vec::with_capacity(tokens.len());
    let mut pieces = Vec::with_capacity(tokens.len());
    for ((raw, token), spk) in tokens.into_iter().zip(speakers) {
        let resolution = bank.vocab().resolve_with(&token, &cfg.filler, &cfg.matcher)?;
        let snippet = bank
            .get_snippet(&spk, &resolution.matched_word)?
            .expect("resolved words are indexed for every speaker");
        pieces.push(snippet);
        reports.push(TokenReport {
            raw,
            token,
            speaker_id: spk,
            language: None,
            resolution,
        });
    }

    let (audio, distortion) = render(&pieces, bank.sample_rate_hz(), cfg, seed)?;
    let mut report = StitchReport::new(speaker, reports);
    report.num_samples = audio.len();
    report.sample_rate_hz = audio.sample_rate_hz();
    report.distortion = distortion;
    Ok((audio, report))
}
