//! Browser bindings for the stitcher demo page in `www/`.
//!
//! The page cannot read a bank from disk, so [`Demo`] renders one in memory
//! with the mock TTS. Everything else is the same code path the CLI uses.

use serde::Serialize;
use stitchvox_core::audio::{crossfade_concat, fade_len};
use stitchvox_core::bank::MockTts;
use stitchvox_core::{stitch_sentence, PcmBuffer, SpeakerPolicy, SpokenVocabBank, StitchConfig};
use wasm_bindgen::prelude::*;

pub const DEFAULT_WORDS: &str = "a i you we like love want see hear the this that apple apples orange \
    cat dog house water speech sound voice word words model data train translate language day night good new and or";

/// Word list the demo page builds its bank from.
#[wasm_bindgen(js_name = defaultWords)]
pub fn default_words() -> String {
    DEFAULT_WORDS.to_string()
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Audio plus the JSON description of how it was made.
#[wasm_bindgen]
pub struct Rendered {
    samples: Vec<f32>,
    sample_rate_hz: u32,
    report_json: String,
}

#[wasm_bindgen]
impl Rendered {
    /// Copied out as a `Float32Array`.
    #[wasm_bindgen(getter)]
    pub fn samples(&self) -> Vec<f32> {
        self.samples.clone()
    }

    #[wasm_bindgen(getter, js_name = sampleRateHz)]
    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    #[wasm_bindgen(getter, js_name = reportJson)]
    pub fn report_json(&self) -> String {
        self.report_json.clone()
    }
}

#[wasm_bindgen]
pub struct Demo {
    bank: SpokenVocabBank,
}

#[wasm_bindgen]
impl Demo {
    /// Build a mock bank from whitespace-separated `words` in `voices`
    /// voices named v0, v1, ...
    #[wasm_bindgen(constructor)]
    pub fn new(words: &str, voices: u32) -> Result<Demo, JsError> {
        let mut list: Vec<&str> = words.split_whitespace().collect();
        if !list.contains(&"a") {
            list.push("a");
        }
        let names: Vec<String> = (0..voices.max(1)).map(|i| format!("v{i}")).collect();
        let bank = SpokenVocabBank::synthesize_in_memory(&list, &names, &MockTts).map_err(js_err)?;
        Ok(Demo { bank })
    }

    #[wasm_bindgen(js_name = vocabSize)]
    pub fn vocab_size(&self) -> usize {
        self.bank.vocab_size()
    }

    /// Stitch `text` and return the audio with its report.
    pub fn stitch(&self, text: &str, seed: u64, fade_ms: f64, distort: bool) -> Result<Rendered, JsError> {
        let cfg = StitchConfig {
            fade_ms,
            distort,
            ..StitchConfig::default()
        };
        let (audio, report) =
            stitch_sentence(text, &self.bank, &SpeakerPolicy::UniformRandom, &cfg, seed).map_err(js_err)?;
        Ok(Rendered {
            sample_rate_hz: audio.sample_rate_hz(),
            samples: audio.into_samples(),
            report_json: serde_json::to_string(&report).map_err(js_err)?,
        })
    }

    /// How one token would be matched against the bank vocabulary, as JSON.
    pub fn resolve(&self, token: &str) -> Result<String, JsError> {
        let norm = stitchvox_core::matcher::normalize_token(token);
        let resolution = self.bank.vocab().resolve(&norm, "a").map_err(js_err)?;
        serde_json::to_string(&resolution).map_err(js_err)
    }
}

#[derive(Serialize)]
struct CrossfadeReport {
    len_a: usize,
    len_b: usize,
    fade_n: usize,
    len_out: usize,
}

fn tone(freq: f64, len: usize, rate: u32) -> Vec<f32> {
    (0..len)
        .map(|i| (0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin()) as f32)
        .collect()
}

/// Join two 250 ms tones with a linear cross-fade so the page can show the
/// seam. `len_out` is always `len_a + len_b - fade_n`.
#[wasm_bindgen(js_name = crossfadeDemo)]
pub fn crossfade_demo(freq_a: f64, freq_b: f64, fade_ms: f64) -> Result<Rendered, JsError> {
    const RATE: u32 = 24000;
    let a = PcmBuffer::new(tone(freq_a, 6000, RATE), RATE).map_err(js_err)?;
    let b = PcmBuffer::new(tone(freq_b, 6000, RATE), RATE).map_err(js_err)?;
    let fade_n = fade_len(fade_ms, RATE, a.len(), b.len());
    let joined = crossfade_concat(&a, &b, fade_ms).map_err(js_err)?;
    let report = CrossfadeReport {
        len_a: a.len(),
        len_b: b.len(),
        fade_n,
        len_out: joined.len(),
    };
    Ok(Rendered {
        sample_rate_hz: RATE,
        samples: joined.into_samples(),
        report_json: serde_json::to_string(&report).map_err(js_err)?,
    })
}
