#![allow(dead_code)]

use rustfft::{num_complex::Complex, FftPlanner};
use stitchvox_core::bank::MockTts;
use stitchvox_core::{PcmBuffer, SpokenVocabBank};

/// Frequency of the largest Hann-windowed FFT magnitude, zero-padded to at
/// least `min_len` points.
pub fn dominant_frequency(buf: &PcmBuffer, min_len: usize) -> f64 {
    let x = buf.samples();
    let n = x.len().max(min_len);
    let mut data: Vec<Complex<f64>> = (0..n)
        .map(|i| {
            let s = x.get(i).copied().unwrap_or(0.0) as f64;
            let w = if i < x.len() {
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / x.len() as f64).cos()
            } else {
                0.0
            };
            Complex::new(s * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut data);
    let (bin, _) = data[..n / 2]
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| (i, c.norm()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    bin as f64 * buf.sample_rate_hz() as f64 / n as f64
}

pub fn sine(freq: f64, len: usize, rate: u32) -> PcmBuffer {
    PcmBuffer::new(
        (0..len)
            .map(|i| (0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin()) as f32)
            .collect(),
        rate,
    )
    .unwrap()
}

pub const TOY_WORDS: &[&str] = &[
    "a",
    "i",
    "like",
    "apple",
    "speech",
    "word",
    "the",
    "cat",
    "sat",
    "on",
    "mat",
    "we",
    "go",
    "home",
    "translate",
    "this",
    "sentence",
    "into",
    "audio",
    "quickly",
    "data",
    "model",
    "train",
    "good",
];

pub fn mock_bank(voices: &[&str]) -> SpokenVocabBank {
    SpokenVocabBank::synthesize_in_memory(TOY_WORDS, voices, &MockTts).unwrap()
}
