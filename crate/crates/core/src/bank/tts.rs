use std::collections::HashSet;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{build_bank, check_file_word, SpokenVocabBank};
use crate::audio::{write_wav, PcmBuffer};
use crate::error::{Error, Result};
use crate::matcher::normalize_token;
use crate::seed::stable_hash;

pub type TtsError = Box<dyn std::error::Error + Send + Sync>;

/// Renders one word in one voice. Implementations used for bank building
/// must be deterministic per `(word, voice_id)`.
pub trait TtsAdapter: Send + Sync {
    fn render(&self, word: &str, voice_id: &str) -> std::result::Result<PcmBuffer, TtsError>;
}

pub const MOCK_TTS_RATE_HZ: u32 = 24000;

const SEGMENT_MS: f64 = 60.0;
const MIN_MS: f64 = 120.0;
const MAX_MS: f64 = 800.0;
const AMPLITUDE: f64 = 0.3;
const RAMP_MS: f64 = 5.0;

/// Offline stand-in for a real TTS engine: each character becomes a short
/// tone whose pitch is a hash of the character and the voice.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockTts;

impl TtsAdapter for MockTts {
    fn render(&self, word: &str, voice_id: &str) -> std::result::Result<PcmBuffer, TtsError> {
        Ok(mock_tts_render(word, voice_id)?)
    }
}

fn char_frequency(c: char, voice_id: &str) -> f64 {
    let mut key = [0u8; 4];
    let mut bytes = c.encode_utf8(&mut key).as_bytes().to_vec();
    bytes.push(0xff);
    bytes.extend_from_slice(voice_id.as_bytes());
    200.0 + 25.0 * (stable_hash(&bytes) % 120) as f64
}

/// Deterministic 24 kHz rendering of `word`.
///
/// Duration is 60 ms per character clamped to [120 ms, 800 ms] and split
/// evenly across characters (the last segment takes the remainder). Each
/// segment is a sine at `200 + 25 * (hash(char, voice) mod 120)` Hz with
/// amplitude 0.3 and 5 ms linear attack and release.
pub fn mock_tts_render(word: &str, voice_id: &str) -> Result<PcmBuffer> {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return Err(Error::InvalidArgument("cannot render an empty word".into()));
    }
    let rate = MOCK_TTS_RATE_HZ as f64;
    let total_ms = (chars.len() as f64 * SEGMENT_MS).clamp(MIN_MS, MAX_MS);
    let total = (total_ms * rate / 1000.0).round() as usize;
    let base = total / chars.len();
    let ramp = (RAMP_MS * rate / 1000.0).round();

    let mut samples = Vec::with_capacity(total);
    for (ci, &c) in chars.iter().enumerate() {
        let seg_len = if ci + 1 == chars.len() {
            total - base * (chars.len() - 1)
        } else {
            base
        };
        let step = 2.0 * PI * char_frequency(c, voice_id) / rate;
        for i in 0..seg_len {
            let attack = (i as f64 / ramp).min(1.0);
            let release = ((seg_len - 1 - i) as f64 / ramp).min(1.0);
            let v = AMPLITUDE * attack.min(release) * (step * i as f64).sin();
            samples.push(v as f32);
        }
    }
    Ok(PcmBuffer::from_parts(samples, MOCK_TTS_RATE_HZ))
}

fn read_word_list(vocab_file: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(vocab_file).map_err(|e| Error::io(vocab_file, e))?;
    let mut seen = HashSet::new();
    let words: Vec<String> = text
        .lines()
        .map(normalize_token)
        .filter(|w| !w.is_empty() && seen.insert(w.clone()))
        .collect();
    if words.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} contains no words",
            vocab_file.display()
        )));
    }
    Ok(words)
}

impl SpokenVocabBank {
    /// Render every `(word, voice)` pair in memory; no files are written.
    pub fn synthesize_in_memory<W, V>(words: &[W], voices: &[V], adapter: &dyn TtsAdapter) -> Result<Self>
    where
        W: AsRef<str> + Sync,
        V: AsRef<str> + Sync,
    {
        let mut seen = HashSet::new();
        let words: Vec<String> = words
            .iter()
            .map(|w| normalize_token(w.as_ref()))
            .filter(|w| !w.is_empty() && seen.insert(w.clone()))
            .collect();
        let jobs: Vec<(&str, &str)> = voices
            .iter()
            .flat_map(|v| words.iter().map(move |w| (v.as_ref(), w.as_str())))
            .collect();
        let rendered: Vec<(String, String, PcmBuffer)> = jobs
            .par_iter()
            .map(|&(voice, word)| {
                adapter
                    .render(word, voice)
                    .map(|audio| (voice.to_string(), word.to_string(), audio))
                    .map_err(|e| Error::Tts {
                        word: word.to_string(),
                        voice: voice.to_string(),
                        message: e.to_string(),
                    })
            })
            .collect::<Result<_>>()?;
        SpokenVocabBank::from_snippets(rendered)
    }
}

/// Render a word list in each voice to `<out_dir>/<voice>/<word>.wav`, then
/// build the bank in place.
pub fn synthesize_bank<V: AsRef<str> + Sync>(
    vocab_file: impl AsRef<Path>,
    voices: &[V],
    adapter: &dyn TtsAdapter,
    out_dir: impl AsRef<Path>,
) -> Result<SpokenVocabBank> {
    let out_dir = out_dir.as_ref();
    let words = read_word_list(vocab_file.as_ref())?;
    if voices.is_empty() {
        return Err(Error::InvalidArgument("at least one voice is required".into()));
    }
    for w in &words {
        check_file_word(w)?;
    }
    for v in voices {
        let dir = out_dir.join(v.as_ref());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let jobs: Vec<(&str, &str)> = voices
        .iter()
        .flat_map(|v| words.iter().map(move |w| (v.as_ref(), w.as_str())))
        .collect();
    jobs.par_iter().try_for_each(|&(voice, word)| {
        let audio = adapter.render(word, voice).map_err(|e| Error::Tts {
            word: word.to_string(),
            voice: voice.to_string(),
            message: e.to_string(),
        })?;
        write_wav(&audio, out_dir.join(voice).join(format!("{word}.wav")))
    })?;
    build_bank(out_dir, out_dir)
}
